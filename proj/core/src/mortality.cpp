#include "epiflow/mortality.hpp"

#include <algorithm>
#include <cmath>

#include "epiflow/errors.hpp"

namespace epiflow::mortality {

using series::TimeSeries;

std::string to_string(Cause c) {
    return c == Cause::influenza_pneumonia ? "influenza_pneumonia" : "all_cause";
}

Cause cause_from_string(const std::string& s) {
    if (s == "influenza_pneumonia") return Cause::influenza_pneumonia;
    if (s == "all_cause") return Cause::all_cause;
    throw ValidationError("unknown cause: '" + s + "'");
}

StudyWindow StudyWindow::standard() {
    return StudyWindow{Date::from_ymd(1918, 9, 8), 24};
}

double estimate_pop_1918(double pop_1910, double pop_1920, double pandemic_deaths) {
    if (pop_1910 <= 0 || pop_1920 <= 0) {
        throw ValidationError("population counts must be positive");
    }
    if (pandemic_deaths < 0) {
        throw ValidationError("pandemic deaths must be nonnegative");
    }
    // 8.5 of the 10 years between the 1910 and 1920 censuses elapse by
    // July 1918; the 1920 count is restored by the pandemic's deaths.
    return pop_1910 * std::pow((pop_1920 + pandemic_deaths) / pop_1910, 0.85);
}

SeasonalBaseline baseline_monthly_median(
    const std::vector<std::array<std::optional<double>, 12>>& rates_by_year) {
    SeasonalBaseline out;
    for (int m = 0; m < 12; ++m) {
        std::vector<double> vals;
        for (const auto& year : rates_by_year) {
            if (year[static_cast<size_t>(m)]) vals.push_back(*year[static_cast<size_t>(m)]);
        }
        if (vals.empty()) {
            throw ValidationError("baseline_monthly_median: no observations for month " +
                                  std::to_string(m + 1));
        }
        std::sort(vals.begin(), vals.end());
        size_t n = vals.size();
        // even counts: mean of the two middle values
        out.rate[static_cast<size_t>(m)] =
            (n % 2 == 1) ? vals[n / 2] : 0.5 * (vals[n / 2 - 1] + vals[n / 2]);
    }
    return out;
}

series::TimeSeries baseline_over(const SeasonalBaseline& b, Date first, Date last) {
    Date start = first.month_start();
    Date end = last.month_end();
    CalendarGrid grid(start, end - start + 1);
    auto spans = grid.periods(Frequency::monthly);
    std::vector<std::optional<double>> vals;
    vals.reserve(spans.size());
    for (const auto& span : spans) {
        unsigned month = grid.date_at(span.first_index).month();
        vals.push_back(b.rate[month - 1]);
    }
    return TimeSeries(grid, Frequency::monthly, std::move(vals));
}

double MortalityCurves::observed_daily_rate(Date d) const {
    return eddr.at(d) + dbdr.at(d);
}

MortalityCurves excess_rates(const std::string& city_id, Cause cause,
                             const TimeSeries& wdc, const TimeSeries& mbdr,
                             double pop_1918, const ExcessParams& params) {
    if (pop_1918 <= 0) {
        throw ValidationError(city_id + ": population estimate missing or nonpositive");
    }
    if (wdc.frequency() != Frequency::weekly) {
        throw ValidationError(city_id + ": weekly death counts must be a weekly series");
    }
    if (mbdr.frequency() != Frequency::monthly) {
        throw ValidationError(city_id + ": baseline rates must be a monthly series");
    }

    auto smoothed_counts = series::smooth_mortality(wdc, params.weekly);
    auto smoothed_baseline = series::smooth_mortality(mbdr, params.monthly);

    Date lo = std::max(smoothed_counts.daily.grid().start,
                       smoothed_baseline.daily.grid().start);
    Date hi = std::min(smoothed_counts.daily.grid().end(),
                       smoothed_baseline.daily.grid().end());
    if (lo > hi) {
        throw ValidationError(city_id +
                              ": weekly counts and monthly baseline do not overlap");
    }

    // week-total scale on every day; /7 gives counts per day
    TimeSeries weekly_scale = smoothed_counts.daily.slice(lo, hi);
    TimeSeries dbdr = smoothed_baseline.daily.slice(lo, hi);
    int n = weekly_scale.grid().length_days;

    std::vector<std::optional<double>> ddc_v(static_cast<size_t>(n));
    std::vector<std::optional<double>> eddr_v(static_cast<size_t>(n));
    for (int t = 0; t < n; ++t) {
        double wk = *weekly_scale.values()[static_cast<size_t>(t)];
        ddc_v[static_cast<size_t>(t)] = wk / 7.0;
        double observed = wk / pop_1918 * params.scale;
        eddr_v[static_cast<size_t>(t)] =
            observed - *dbdr.values()[static_cast<size_t>(t)];
    }
    TimeSeries ddc(weekly_scale.grid(), Frequency::daily, std::move(ddc_v));
    TimeSeries eddr(weekly_scale.grid(), Frequency::daily, std::move(eddr_v));

    // Weekly baseline and weekly excess, on the daily grid. Only weeks
    // fully inside the grid get values; clipped edge weeks stay missing.
    std::vector<std::optional<double>> wbdr_v(static_cast<size_t>(n));
    std::vector<std::optional<double>> ewdr_v(static_cast<size_t>(n));
    auto week_spans = weekly_scale.grid().periods(Frequency::weekly);
    auto wdc_spans = wdc.grid().periods(Frequency::weekly);
    auto wdc_values = wdc.dense_values(city_id + ": weekly death counts");
    for (const auto& span : week_spans) {
        double base_sum = 0.0;
        for (int d = 0; d < span.n_days; ++d) {
            base_sum += *dbdr.values()[static_cast<size_t>(span.first_index + d)];
        }
        double base = base_sum / span.n_days;
        for (int d = 0; d < span.n_days; ++d) {
            wbdr_v[static_cast<size_t>(span.first_index + d)] = base;
        }
        if (span.n_days != 7) continue;  // clipped week
        // find this week in the input counts
        for (size_t p = 0; p < wdc_spans.size(); ++p) {
            if (wdc_spans[p].key == span.key) {
                double observed = wdc_values[p] / pop_1918 * params.scale;
                for (int d = 0; d < span.n_days; ++d) {
                    ewdr_v[static_cast<size_t>(span.first_index + d)] = observed - base;
                }
                break;
            }
        }
    }
    TimeSeries wbdr(weekly_scale.grid(), Frequency::daily, std::move(wbdr_v));
    TimeSeries ewdr(weekly_scale.grid(), Frequency::daily, std::move(ewdr_v));

    MortalityCurves out{city_id,
                        cause,
                        pop_1918,
                        params.scale,
                        wdc,
                        std::move(ddc),
                        mbdr,
                        std::move(dbdr),
                        std::move(wbdr),
                        std::move(ewdr),
                        std::move(eddr),
                        smoothed_counts.negative_days + smoothed_baseline.negative_days};
    return out;
}

std::optional<Date> acceleration_date(const MortalityCurves& c,
                                      const StudyWindow& window) {
    Date lo = std::max(window.start + 1, c.eddr.grid().start);
    Date hi = std::min(window.end(), c.eddr.grid().end());
    for (Date d = lo; d <= hi; ++d) {
        if (c.eddr.at(d) >= 2.0 * c.dbdr.at(d)) return d;
    }
    return std::nullopt;
}

namespace {

// A day qualifies as a (strict) local maximum when the curve declines on
// each of the following seven days.
bool declines_for_week(const std::vector<std::optional<double>>& v, int t) {
    if (t + 7 >= static_cast<int>(v.size())) return false;
    for (int d = 0; d < 7; ++d) {
        if (!(*v[static_cast<size_t>(t + d)] > *v[static_cast<size_t>(t + d + 1)])) {
            return false;
        }
    }
    return true;
}

}  // namespace

MortalityOutcomes peak_and_cumulative(const MortalityCurves& c,
                                      const StudyWindow& window) {
    if (c.eddr.grid().start > window.start || c.eddr.grid().end() < window.end()) {
        throw ValidationError(
            c.city_id + " (" + to_string(c.cause) + "): curves cover " +
            c.eddr.grid().start.to_string() + ".." + c.eddr.grid().end().to_string() +
            " but the study window needs " + window.start.to_string() + ".." +
            window.end().to_string());
    }

    MortalityOutcomes out;
    out.city_id = c.city_id;
    out.cause = c.cause;
    out.acceleration = acceleration_date(c, window);

    // Cumulative excess: sum of the weekly excess rates of the window's
    // 24 weeks.
    Date first_week_end = window.start.week_end();
    double cum = 0.0;
    for (int w = 0; w < window.weeks; ++w) {
        Date we = first_week_end + 7 * w;
        int idx = c.ewdr.grid().index_of(we);
        const auto& v = c.ewdr.values()[static_cast<size_t>(idx)];
        if (!v) {
            throw ValidationError(c.city_id + " (" + to_string(c.cause) +
                                  "): no weekly excess rate for week ending " +
                                  we.to_string() + "; window coverage incomplete");
        }
        cum += *v;
    }
    out.cumulative_edr = cum;

    // Peak: first local maximum of the smoothed excess curve, searched from
    // the acceleration date (window start when there is none).
    const auto& e = c.eddr.values();
    Date detect_from = out.acceleration ? *out.acceleration : window.start;
    int i0 = c.eddr.grid().index_of(detect_from);
    int i1 = c.eddr.grid().index_of(window.end());
    int peak_idx = -1;
    for (int t = i0; t <= i1; ++t) {
        bool rises = (t == i0) || (*e[static_cast<size_t>(t)] > *e[static_cast<size_t>(t - 1)]);
        if (rises && declines_for_week(e, t)) {
            peak_idx = t;
            break;
        }
    }
    if (peak_idx < 0) {
        // fallback: global maximum over the window
        out.peak_from_fallback = true;
        peak_idx = i0;
        for (int t = i0 + 1; t <= i1; ++t) {
            if (*e[static_cast<size_t>(t)] > *e[static_cast<size_t>(peak_idx)]) peak_idx = t;
        }
    }
    out.peak_weekly_edr = *e[static_cast<size_t>(peak_idx)];
    out.peak_date = c.eddr.grid().date_at(peak_idx);

    // Later local maximum above half the first peak.
    if (!out.peak_from_fallback) {
        for (int t = peak_idx + 1; t <= i1; ++t) {
            bool rises = *e[static_cast<size_t>(t)] > *e[static_cast<size_t>(t - 1)];
            if (rises && declines_for_week(e, t) &&
                *e[static_cast<size_t>(t)] > 0.5 * out.peak_weekly_edr) {
                out.second_peak = true;
                break;
            }
        }
    }
    return out;
}

AlignedGroupCurves align_and_average(
    const std::vector<const MortalityCurves*>& curves,
    const std::map<std::string, std::optional<Date>>& acceleration_dates,
    const std::map<std::string, bool>& high_npi) {
    AlignedGroupCurves out;
    int len = AlignedGroupCurves::horizon_days + 1;
    out.high_mean.assign(static_cast<size_t>(len), 0.0);
    out.low_mean.assign(static_cast<size_t>(len), 0.0);
    out.high_n.assign(static_cast<size_t>(len), 0);
    out.low_n.assign(static_cast<size_t>(len), 0);

    for (const auto* c : curves) {
        auto accel_it = acceleration_dates.find(c->city_id);
        if (accel_it == acceleration_dates.end() || !accel_it->second) {
            out.excluded_cities.push_back(c->city_id);
            continue;
        }
        auto group_it = high_npi.find(c->city_id);
        if (group_it == high_npi.end()) {
            out.excluded_cities.push_back(c->city_id);
            continue;
        }
        bool high = group_it->second;
        Date accel = *accel_it->second;
        for (int off = 0; off < len; ++off) {
            Date d = accel + off;
            if (!c->eddr.grid().contains(d)) continue;
            double v = c->eddr.at(d);
            if (high) {
                out.high_mean[static_cast<size_t>(off)] += v;
                out.high_n[static_cast<size_t>(off)] += 1;
            } else {
                out.low_mean[static_cast<size_t>(off)] += v;
                out.low_n[static_cast<size_t>(off)] += 1;
            }
        }
    }
    for (int off = 0; off < len; ++off) {
        if (out.high_n[static_cast<size_t>(off)] > 0) {
            out.high_mean[static_cast<size_t>(off)] /= out.high_n[static_cast<size_t>(off)];
        }
        if (out.low_n[static_cast<size_t>(off)] > 0) {
            out.low_mean[static_cast<size_t>(off)] /= out.low_n[static_cast<size_t>(off)];
        }
    }
    return out;
}

}  // namespace epiflow::mortality
