#include <doctest.h>

#include "epiflow/errors.hpp"
#include "epiflow/npi.hpp"

using namespace epiflow;

namespace {
const Date kWindowStart = Date::from_ymd(1918, 9, 8);
const Date kWindowEnd = Date::from_ymd(1919, 2, 22);

npi::RawInterval iv(npi::Category c, const char* s, const char* e) {
    return {c, Date::parse(s), Date::parse(e)};
}
}  // namespace

TEST_CASE("full-window coverage of all three categories reaches 504") {
    std::vector<npi::RawInterval> raw{
        iv(npi::Category::school_closure, "1918-09-08", "1919-02-22"),
        iv(npi::Category::public_gathering_ban, "1918-09-01", "1919-03-15"),
        iv(npi::Category::other_quarantine_isolation, "1918-09-08", "1919-02-22"),
    };
    auto rec = npi::normalize("city", raw, kWindowStart, kWindowEnd);
    CHECK(npi::npi_intensity(rec) == 504);
    CHECK(npi::npi_intensity_exclusive(rec) == 501);
    CHECK(rec.first_response_date == Date::parse("1918-09-01"));
}

TEST_CASE("no interventions give zero intensity") {
    auto rec = npi::normalize("city", {}, kWindowStart, kWindowEnd);
    CHECK(npi::npi_intensity(rec) == 0);
    CHECK_FALSE(rec.first_response_date.has_value());
    CHECK_THROWS_AS(npi::npi_speed(rec, kWindowStart), ValidationError);
}

TEST_CASE("direct interval arithmetic: 10 + 5 + 0 days") {
    std::vector<npi::RawInterval> raw{
        iv(npi::Category::school_closure, "1918-10-01", "1918-10-10"),
        iv(npi::Category::public_gathering_ban, "1918-10-05", "1918-10-09"),
    };
    auto rec = npi::normalize("city", raw, kWindowStart, kWindowEnd);
    CHECK(npi::npi_intensity(rec) == 15);
}

TEST_CASE("overlapping activations union, never double count") {
    std::vector<npi::RawInterval> raw{
        iv(npi::Category::school_closure, "1918-10-01", "1918-10-10"),
        iv(npi::Category::school_closure, "1918-10-05", "1918-10-20"),
        iv(npi::Category::school_closure, "1918-10-21", "1918-10-25"),  // adjacent
        iv(npi::Category::school_closure, "1918-12-01", "1918-12-05"),  // separate
    };
    auto rec = npi::normalize("city", raw, kWindowStart, kWindowEnd);
    // union: Oct 1-25 (25 days) + Dec 1-5 (5 days)
    CHECK(npi::npi_intensity(rec) == 30);
    CHECK(rec.intervals[0].size() == 2);
}

TEST_CASE("clipping to the study window") {
    std::vector<npi::RawInterval> raw{
        iv(npi::Category::school_closure, "1918-08-01", "1918-09-10"),
        iv(npi::Category::public_gathering_ban, "1919-03-01", "1919-03-10"),
    };
    auto rec = npi::normalize("city", raw, kWindowStart, kWindowEnd);
    CHECK(npi::npi_intensity(rec) == 3);  // Sep 8, 9, 10
    // first response dates come from the raw starts, clipped away or not
    CHECK(rec.first_response_date == Date::parse("1918-08-01"));
    CHECK_THROWS_AS(
        npi::normalize("city",
                       {iv(npi::Category::school_closure, "1918-10-10", "1918-10-01")},
                       kWindowStart, kWindowEnd),
        ValidationError);
}

TEST_CASE("speed sign convention") {
    std::vector<npi::RawInterval> raw{
        iv(npi::Category::school_closure, "1918-10-05", "1918-10-20")};
    auto rec = npi::normalize("city", raw, kWindowStart, kWindowEnd);
    CHECK(npi::npi_speed(rec, Date::parse("1918-10-05")) == 0);
    CHECK(npi::npi_speed(rec, Date::parse("1918-10-08")) == 3);   // 3 days early
    CHECK(npi::npi_speed(rec, Date::parse("1918-10-01")) == -4);  // 4 days late
}

TEST_CASE("speed is translation invariant") {
    for (int shift : {-10, 0, 17}) {
        std::vector<npi::RawInterval> raw{
            {npi::Category::school_closure, Date::parse("1918-10-05") + shift,
             Date::parse("1918-10-20") + shift}};
        auto rec = npi::normalize("city", raw, kWindowStart - 30, kWindowEnd + 30);
        CHECK(npi::npi_speed(rec, Date::parse("1918-10-10") + shift) == 5);
    }
}

TEST_CASE("intensity is monotone under interval extension") {
    std::vector<npi::RawInterval> raw{
        iv(npi::Category::school_closure, "1918-10-01", "1918-10-10")};
    auto base = npi::npi_intensity(npi::normalize("c", raw, kWindowStart, kWindowEnd));
    for (int extend = 1; extend <= 20; ++extend) {
        std::vector<npi::RawInterval> longer{
            {npi::Category::school_closure, Date::parse("1918-10-01"),
             Date::parse("1918-10-10") + extend}};
        auto v = npi::npi_intensity(npi::normalize("c", longer, kWindowStart, kWindowEnd));
        CHECK(v >= base);
        base = v;
    }
}

TEST_CASE("four-city median example classifies exactly one high city") {
    std::vector<npi::NpiMeasures> m(4);
    m[0] = {"a", 10, 10, 10, std::nullopt};
    m[1] = {"b", 20, 20, 1, std::nullopt};
    m[2] = {"c", 1, 1, 20, std::nullopt};
    m[3] = {"d", 20, 20, 20, std::nullopt};
    auto res = npi::classify_high_npi(m);
    CHECK(res.median_intensity == doctest::Approx(15.0));
    CHECK(res.median_speed == doctest::Approx(15.0));
    CHECK(res.n_high == 1);
    CHECK(res.n_low == 3);
    CHECK(m[3].high_npi == true);
    CHECK(m[0].high_npi == false);
    CHECK(m[1].high_npi == false);
    CHECK(m[2].high_npi == false);
}

TEST_CASE("dominating city is the only high city") {
    std::vector<npi::NpiMeasures> m(2);
    m[0] = {"small", 5, 5, -3, std::nullopt};
    m[1] = {"big", 50, 50, 9, std::nullopt};
    auto res = npi::classify_high_npi(m);
    CHECK(res.n_high == 1);
    CHECK(m[1].high_npi == true);
}

TEST_CASE("ties at the median are low; identical values classify nobody") {
    std::vector<npi::NpiMeasures> m(3);
    m[0] = {"a", 10, 10, 5, std::nullopt};
    m[1] = {"b", 10, 10, 5, std::nullopt};
    m[2] = {"c", 10, 10, 5, std::nullopt};
    auto res = npi::classify_high_npi(m);
    CHECK(res.degenerate);
    CHECK(res.n_high == 0);
    CHECK(res.n_low == 3);
}

TEST_CASE("classification ignores cities without speed") {
    std::vector<npi::NpiMeasures> m(3);
    m[0] = {"a", 10, 10, 2, std::nullopt};
    m[1] = {"b", 30, 30, 8, std::nullopt};
    m[2] = {"no_speed", 99, 99, std::nullopt, std::nullopt};
    auto res = npi::classify_high_npi(m);
    CHECK(res.n_high + res.n_low == 2);
    CHECK_FALSE(m[2].high_npi.has_value());
}

TEST_CASE("classification is invariant to monotone transforms of intensity") {
    std::vector<npi::NpiMeasures> base(5);
    base[0] = {"a", 10, 0, 1, std::nullopt};
    base[1] = {"b", 40, 0, 7, std::nullopt};
    base[2] = {"c", 25, 0, 4, std::nullopt};
    base[3] = {"d", 70, 0, 9, std::nullopt};
    base[4] = {"e", 55, 0, 2, std::nullopt};
    npi::classify_high_npi(base);

    auto transformed = base;
    for (auto& m : transformed) {
        m.intensity = m.intensity * m.intensity + 3;  // strictly monotone on x >= 0
        m.high_npi.reset();
    }
    npi::classify_high_npi(transformed);
    for (size_t i = 0; i < base.size(); ++i) {
        CHECK(base[i].high_npi == transformed[i].high_npi);
    }
}

TEST_CASE("classify needs two complete cities") {
    std::vector<npi::NpiMeasures> m(1);
    m[0] = {"only", 10, 10, 1, std::nullopt};
    CHECK_THROWS_AS(npi::classify_high_npi(m), ValidationError);
}

TEST_CASE("intensity hits 504 exactly when all categories cover every day") {
    auto full = [](npi::Category c) {
        return npi::RawInterval{c, kWindowStart, kWindowEnd};
    };
    std::vector<npi::RawInterval> raw{full(npi::Category::school_closure),
                                      full(npi::Category::public_gathering_ban),
                                      full(npi::Category::other_quarantine_isolation)};
    CHECK(npi::npi_intensity(npi::normalize("c", raw, kWindowStart, kWindowEnd)) == 504);

    // removing a single day from any category drops below 504
    for (int cat = 0; cat < 3; ++cat) {
        auto clipped = raw;
        clipped[static_cast<size_t>(cat)].end = kWindowEnd - 1;
        CHECK(npi::npi_intensity(npi::normalize("c", clipped, kWindowStart,
                                                kWindowEnd)) == 503);
    }
}
