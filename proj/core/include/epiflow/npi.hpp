#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "epiflow/calendar.hpp"

namespace epiflow::npi {

enum class Category { school_closure, public_gathering_ban, other_quarantine_isolation };
inline constexpr int kCategoryCount = 3;

std::string to_string(Category c);
Category category_from_string(const std::string& s);

// Closed interval of active days.
struct DateInterval {
    Date start;
    Date end;
};

// Per-city activation intervals, merged within category and clipped to the
// study window. first_response_date is the earliest raw start across
// categories (before clipping), the date officials first enforced an NPI.
struct NpiRecord {
    std::string city_id;
    std::array<std::vector<DateInterval>, kCategoryCount> intervals;
    std::optional<Date> first_response_date;
};

struct RawInterval {
    Category category;
    Date start;
    Date end;
};

// Union-merges intervals per category and clips them to [window_start,
// window_end]. Intervals entirely outside the window are dropped (but
// still count toward first_response_date).
NpiRecord normalize(const std::string& city_id, const std::vector<RawInterval>& raw,
                    Date window_start, Date window_end);

struct NpiMeasures {
    std::string city_id;
    int intensity = 0;                 // cumulative active days, all categories
    int intensity_exclusive = 0;       // diagnostic: end-exclusive day counting
    std::optional<int> speed;          // days; positive = response before acceleration
    std::optional<bool> high_npi;      // set by classify_high_npi
};

// Cumulative active days across the three categories; an interval [s, e]
// contributes e - s + 1 days. Bounded by 3x the window length (504 for the
// standard 168-day window).
int npi_intensity(const NpiRecord& r);
int npi_intensity_exclusive(const NpiRecord& r);

// Negated day count from acceleration to first response: positive when the
// response preceded the acceleration date.
int npi_speed(const NpiRecord& r, Date acceleration);

struct HighNpiResult {
    double median_intensity = 0;
    double median_speed = 0;
    int n_high = 0;
    int n_low = 0;
    bool degenerate = false;  // all-identical values; nobody classified high
};

// Sets high_npi on every measure that has both intensity and speed
// (the analysis sample): true iff strictly above both sample medians.
// Measures without a speed are left unset.
HighNpiResult classify_high_npi(std::vector<NpiMeasures>& measures);

}  // namespace epiflow::npi
