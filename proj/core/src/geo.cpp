#include "epiflow/geo.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "epiflow/errors.hpp"

namespace epiflow::geo {

namespace {

void check_coords(LatLon p) {
    if (!(std::abs(p.lat) <= 90.0) || !(std::abs(p.lon) <= 180.0)) {
        throw ValidationError("invalid coordinates: lat=" + std::to_string(p.lat) +
                              " lon=" + std::to_string(p.lon));
    }
}

double to_rad(double deg) { return deg * std::numbers::pi / 180.0; }

}  // namespace

double geodesic_distance_km(LatLon a, LatLon b) {
    check_coords(a);
    check_coords(b);
    double dlat = to_rad(b.lat - a.lat);
    double dlon = to_rad(b.lon - a.lon);
    double sin_lat = std::sin(dlat / 2.0);
    double sin_lon = std::sin(dlon / 2.0);
    double h = sin_lat * sin_lat +
               std::cos(to_rad(a.lat)) * std::cos(to_rad(b.lat)) * sin_lon * sin_lon;
    h = std::clamp(h, 0.0, 1.0);
    return 2.0 * kEarthRadiusKm * std::atan2(std::sqrt(h), std::sqrt(1.0 - h));
}

double camp_strength(const CampRecord& camp, std::int64_t first_month_key,
                     std::int64_t last_month_key) {
    double sum = 0;
    int n = 0;
    for (const auto& [month, strength] : camp.monthly_strength) {
        if (month < first_month_key || month > last_month_key) continue;
        sum += strength;
        ++n;
    }
    if (n == 0) {
        throw ValidationError("camp '" + camp.camp_id +
                              "' has no strength data in the averaging window");
    }
    return sum / n;
}

InstrumentValue instrument_z(const std::string& location_id, LatLon location,
                             const std::vector<CampExposure>& camps,
                             InstrumentDiagnostics* diag) {
    check_coords(location);
    double z = 0;
    for (const auto& camp : camps) {
        if (camp.strength < 0) {
            throw ValidationError("camp '" + camp.camp_id + "' has negative strength");
        }
        if (camp.strength == 0) {
            if (diag) diag->zero_strength_camps.push_back(camp.camp_id);
            continue;
        }
        double dist = geodesic_distance_km(location, camp.position);
        if (dist <= 0) {
            throw ValidationError("location '" + location_id +
                                  "' is at zero distance from camp '" +
                                  camp.camp_id + "'; ln(dist) undefined");
        }
        z += std::log(camp.strength) - std::log(dist);
    }
    return InstrumentValue{location_id, z};
}

}  // namespace epiflow::geo
