#include <doctest.h>

#include <cmath>

#include "epiflow/errors.hpp"
#include "epiflow/geo.hpp"

using namespace epiflow;

TEST_CASE("haversine basics") {
    geo::LatLon nyc{40.7128, -74.0060};
    CHECK(geo::geodesic_distance_km(nyc, nyc) == 0.0);

    // antipodal points: half the circumference
    geo::LatLon north{45.0, 30.0}, south{-45.0, -150.0};
    CHECK(geo::geodesic_distance_km(north, south) ==
          doctest::Approx(M_PI * 6371.0088).epsilon(1e-9));

    // frozen from an independent geodesic calculator (spherical model)
    geo::LatLon boston{42.3601, -71.0589};
    double d = geo::geodesic_distance_km(nyc, boston);
    CHECK(std::abs(d - 306.1) / 306.1 < 0.005);

    CHECK_THROWS_AS(geo::geodesic_distance_km({91.0, 0.0}, nyc), ValidationError);
    CHECK_THROWS_AS(geo::geodesic_distance_km(nyc, {0.0, 181.0}), ValidationError);
}

TEST_CASE("camp strength averages the window months") {
    geo::CampRecord camp;
    camp.camp_id = "camp_a";
    const std::int64_t jul = 1918 * 12 + 6, aug = jul + 1, sep = jul + 2, oct = jul + 3;
    camp.monthly_strength = {{jul, 30000}, {aug, 30000}, {sep, 30000}, {oct, 99999}};
    CHECK(geo::camp_strength(camp, jul, sep) == doctest::Approx(30000));

    camp.monthly_strength = {{jul, 20000}, {sep, 40000}};  // one month missing
    CHECK(geo::camp_strength(camp, jul, sep) == doctest::Approx(30000));

    camp.monthly_strength = {{oct, 10000}};
    CHECK_THROWS_AS(geo::camp_strength(camp, jul, sep), ValidationError);
}

TEST_CASE("instrument z from log strengths and log distances") {
    // one camp with strength e at distance e km gives z = 0
    geo::LatLon origin{40.0, -75.0};
    // place the camp due north: distance = radius * dtheta
    double dlat_deg = std::exp(1.0) / 6371.0088 * 180.0 / M_PI;
    geo::CampExposure unit{"camp_e", std::exp(1.0), {40.0 + dlat_deg, -75.0}};
    auto z = geo::instrument_z("city", origin, {unit});
    CHECK(z.z == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("two-camp worked example") {
    geo::LatLon origin{40.0, -75.0};
    auto north = [&](double km) {
        return geo::LatLon{40.0 + km / 6371.0088 * 180.0 / M_PI, -75.0};
    };
    std::vector<geo::CampExposure> camps{{"near", 1000.0, north(10.0)},
                                         {"far", 2000.0, north(100.0)}};
    auto z = geo::instrument_z("city", origin, camps);
    // ln(1000/10) + ln(2000/100) = ln 100 + ln 20
    CHECK(z.z == doctest::Approx(std::log(100.0) + std::log(20.0)).epsilon(1e-6));
    CHECK(std::abs(z.z - 7.6009) < 1e-4);

    // doubling all strengths adds J ln 2 exactly
    for (auto& c : camps) c.strength *= 2.0;
    auto z2 = geo::instrument_z("city", origin, camps);
    CHECK(z2.z - z.z == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("instrument error paths") {
    geo::LatLon origin{40.0, -75.0};
    CHECK_THROWS_WITH_AS(
        geo::instrument_z("city", origin, {{"onsite", 1000.0, origin}}),
        doctest::Contains("onsite"), ValidationError);

    geo::InstrumentDiagnostics diag;
    auto z = geo::instrument_z(
        "city", origin,
        {{"ghost", 0.0, {41.0, -75.0}}, {"real", 1000.0, {41.0, -76.0}}}, &diag);
    CHECK(diag.zero_strength_camps == std::vector<std::string>{"ghost"});
    CHECK(std::isfinite(z.z));
}

TEST_CASE("property: additivity and monotonicity in camp distance") {
    geo::LatLon origin{40.0, -75.0};
    std::vector<geo::CampExposure> camps{{"a", 500.0, {42.0, -71.0}},
                                         {"b", 1500.0, {39.0, -77.0}},
                                         {"c", 2500.0, {41.0, -87.0}}};
    double total = geo::instrument_z("city", origin, camps).z;
    double sum = 0;
    for (const auto& c : camps) {
        sum += geo::instrument_z("city", origin, {c}).z;
    }
    CHECK(total == doctest::Approx(sum).epsilon(1e-12));

    // moving a camp closer strictly increases z
    auto closer = camps;
    closer[2].position = {40.5, -76.0};
    CHECK(geo::instrument_z("city", origin, closer).z > total);
}

TEST_CASE("unit sensitivity: miles shift z by J times ln(1.609344)") {
    geo::LatLon origin{40.0, -75.0};
    std::vector<geo::CampExposure> camps{{"a", 500.0, {42.0, -71.0}},
                                         {"b", 1500.0, {39.0, -77.0}},
                                         {"c", 2500.0, {41.0, -87.0}}};
    double z_km = geo::instrument_z("city", origin, camps).z;
    const double km_per_mile = 1.609344;
    double z_miles = 0;
    for (const auto& c : camps) {
        double d_miles = geo::geodesic_distance_km(origin, c.position) / km_per_mile;
        z_miles += std::log(c.strength) - std::log(d_miles);
    }
    CHECK(z_miles - z_km == doctest::Approx(3.0 * std::log(km_per_mile)).epsilon(1e-12));
}
