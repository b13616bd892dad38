#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "epiflow/calendar.hpp"
#include "epiflow/series.hpp"

namespace epiflow::mortality {

enum class Cause { influenza_pneumonia, all_cause };

std::string to_string(Cause c);
Cause cause_from_string(const std::string& s);

// 24-week pandemic study window, 1918-09-08 .. 1919-02-22 by default.
struct StudyWindow {
    Date start;
    int weeks = 24;

    static StudyWindow standard();
    Date end() const { return start + (weeks * 7 - 1); }
    int days() const { return weeks * 7; }
};

struct PopulationEstimate {
    std::string city_id;
    double pop_1910 = 0;
    double pop_1920 = 0;
    double pandemic_deaths = 0;
    double pop_1918 = 0;  // derived
};

// Census-to-census geometric interpolation to July 1918, with the 1920
// count adjusted upward by pandemic deaths so high-mortality cities do
// not get their 1918 population underestimated.
double estimate_pop_1918(double pop_1910, double pop_1920, double pandemic_deaths);

// Seasonal baseline: one rate per calendar month (Jan..Dec), the median
// across the supplied years. Rates are weekly-equivalent deaths per
// `scale` inhabitants.
struct SeasonalBaseline {
    std::array<double, 12> rate{};
};

// rates_by_year: for each year, 12 optional monthly rates (Jan..Dec).
// Every calendar month needs at least one observation across years.
SeasonalBaseline baseline_monthly_median(
    const std::vector<std::array<std::optional<double>, 12>>& rates_by_year);

// Lays a seasonal baseline over the months covering [first, last] as a
// monthly TimeSeries.
series::TimeSeries baseline_over(const SeasonalBaseline& b, Date first, Date last);

struct ExcessParams {
    series::SmoothingParams weekly = series::SmoothingParams::weekly_default();
    series::SmoothingParams monthly = series::SmoothingParams::monthly_default();
    double scale = 100000.0;  // rate denominator (per 100,000 by default)
};

// All reconstructed series for one city and cause. Daily series share one
// grid (the overlap of the weekly and monthly inputs) and all rates are
// weekly-equivalent per `scale` inhabitants.
struct MortalityCurves {
    std::string city_id;
    Cause cause = Cause::influenza_pneumonia;
    double pop_1918 = 0;
    double scale = 100000.0;

    series::TimeSeries wdc;   // weekly death counts (input, imputed)
    series::TimeSeries ddc;   // daily death counts (smoothed weekly / 7)
    series::TimeSeries mbdr;  // monthly baseline rates (input)
    series::TimeSeries dbdr;  // daily baseline rate (smoothed monthly)
    series::TimeSeries wbdr;  // weekly baseline rate, piecewise constant per week
    series::TimeSeries ewdr;  // weekly excess rate, piecewise constant per week
    series::TimeSeries eddr;  // daily excess rate

    int negative_smoothed_days = 0;  // diagnostic: clamp-report, never clamp-silently

    double observed_daily_rate(Date d) const;  // weekly-equivalent observed rate
};

// Builds the daily baseline, smoothed daily counts, and excess rates from
// a complete weekly count series and a monthly baseline series.
MortalityCurves excess_rates(const std::string& city_id, Cause cause,
                             const series::TimeSeries& wdc,
                             const series::TimeSeries& mbdr, double pop_1918,
                             const ExcessParams& params);

// First date strictly after window.start where the daily excess rate
// reaches twice the daily baseline rate.
std::optional<Date> acceleration_date(const MortalityCurves& c,
                                      const StudyWindow& window);

struct MortalityOutcomes {
    std::string city_id;
    Cause cause = Cause::influenza_pneumonia;
    std::optional<Date> acceleration;
    double peak_weekly_edr = 0;
    Date peak_date;
    double cumulative_edr = 0;
    bool second_peak = false;
    bool peak_from_fallback = false;  // no qualifying local max; global max used
};

// Peak (first local maximum of the smoothed excess curve, in
// weekly-equivalent units) and cumulative excess (sum of weekly excess
// rates) over the study window. Requires full window coverage.
MortalityOutcomes peak_and_cumulative(const MortalityCurves& c,
                                      const StudyWindow& window);

// Group-mean excess curves re-indexed to days since each city's
// acceleration date, truncated at +19 weeks.
struct AlignedGroupCurves {
    static constexpr int horizon_days = 19 * 7;
    // day offset 0..horizon_days inclusive
    std::vector<double> high_mean, low_mean;
    std::vector<int> high_n, low_n;
    std::vector<std::string> excluded_cities;  // no acceleration date
};

AlignedGroupCurves align_and_average(
    const std::vector<const MortalityCurves*>& curves,
    const std::map<std::string, std::optional<Date>>& acceleration_dates,
    const std::map<std::string, bool>& high_npi);

}  // namespace epiflow::mortality
