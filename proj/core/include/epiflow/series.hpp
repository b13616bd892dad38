#pragma once

#include <optional>
#include <string>
#include <vector>

#include "epiflow/calendar.hpp"

namespace epiflow::series {

// A calendar-indexed numeric series. Values are stored one per native
// period (days for daily, weeks for weekly, months for monthly); missing
// values are explicit. Weekly and monthly series must sit on grids aligned
// to period boundaries so every period is fully covered.
class TimeSeries {
public:
    TimeSeries(CalendarGrid grid, Frequency freq,
               std::vector<std::optional<double>> values);

    // Convenience constructor for fully observed data.
    static TimeSeries dense(CalendarGrid grid, Frequency freq,
                            std::vector<double> values);

    const CalendarGrid& grid() const { return grid_; }
    Frequency frequency() const { return freq_; }
    int periods() const { return static_cast<int>(values_.size()); }
    const std::vector<std::optional<double>>& values() const { return values_; }

    bool complete() const;
    int missing_count() const;
    // Throws ValidationError when any value is missing; otherwise returns
    // the dense value vector.
    std::vector<double> dense_values(const std::string& context) const;

    // Last calendar day of period `idx`.
    Date period_end(int idx) const;
    // Number of calendar days in period `idx`.
    int period_length(int idx) const;

    // Value on a calendar day (daily series only).
    double at(Date d) const;

    // Sub-series of a daily series restricted to [a, b].
    TimeSeries slice(Date a, Date b) const;

private:
    CalendarGrid grid_;
    Frequency freq_;
    std::vector<std::optional<double>> values_;
};

struct SmoothingParams {
    Frequency frequency = Frequency::weekly;  // weekly or monthly
    int bandwidth = 3;                        // k >= 1; 3 (weekly) or 15 (monthly)

    static SmoothingParams weekly_default() { return {Frequency::weekly, 3}; }
    static SmoothingParams monthly_default() { return {Frequency::monthly, 15}; }
};

struct ImputeResult {
    TimeSeries series;
    int imputed_cells = 0;
};

struct SmoothResult {
    TimeSeries daily;        // the algorithm output y
    TimeSeries final_z;      // z from the last (i = 1) iteration, diagnostic only
    int negative_days = 0;   // days where the output went negative
};

// Repeats each period value across the days of the period. The result
// carries the period-total scale: per-period means equal the input.
TimeSeries broadcast_to_daily(const TimeSeries& s);

// Centered moving average over [t-i, t+i]; windows truncate at the series
// boundaries.
TimeSeries rolling_mean(const TimeSeries& s, int bandwidth);

// Replaces every day by the mean of its enclosing week or month, returned
// on the same daily grid (piecewise constant per period).
TimeSeries mean_by(const TimeSeries& s, Frequency f);

// Iterative rolling-mean interpolation of a weekly or monthly series to a
// smooth daily series whose per-period means match the input.
SmoothResult smooth_mortality(const TimeSeries& x, const SmoothingParams& params);

// Fills interior gaps of up to max_gap consecutive missing periods by
// linear interpolation between the nearest observed neighbours. Leading or
// trailing gaps, and gaps longer than max_gap, are rejected.
ImputeResult impute_linear(const TimeSeries& s, int max_gap);

// --- Series CSV interface -------------------------------------------------
// Schema: series_id, period_end_date (ISO-8601), value (empty = missing).
// Frequency is not encoded in the file; callers pass it (sidecar manifest).

struct NamedSeries {
    std::string id;
    TimeSeries series;
};

std::vector<NamedSeries> read_series_csv(const std::string& path, Frequency f);
void write_series_csv(const std::string& path,
                      const std::vector<NamedSeries>& series);

}  // namespace epiflow::series
