#include "epiflow/series.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "epiflow/csv.hpp"
#include "epiflow/errors.hpp"

namespace epiflow::series {

namespace {

std::string fmt_value(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

TimeSeries::TimeSeries(CalendarGrid grid, Frequency freq,
                       std::vector<std::optional<double>> values)
    : grid_(grid), freq_(freq), values_(std::move(values)) {
    if (freq != Frequency::daily && !grid_.aligned_to(freq)) {
        throw ValidationError("series grid " + grid_.start.to_string() + ".." +
                              grid_.end().to_string() + " is not aligned to " +
                              to_string(freq) + " period boundaries");
    }
    size_t expected = grid_.periods(freq).size();
    if (values_.size() != expected) {
        throw ValidationError("series has " + std::to_string(values_.size()) +
                              " values but its grid covers " +
                              std::to_string(expected) + " " + to_string(freq) +
                              " periods");
    }
}

TimeSeries TimeSeries::dense(CalendarGrid grid, Frequency freq,
                             std::vector<double> values) {
    std::vector<std::optional<double>> v(values.begin(), values.end());
    return TimeSeries(grid, freq, std::move(v));
}

bool TimeSeries::complete() const { return missing_count() == 0; }

int TimeSeries::missing_count() const {
    int n = 0;
    for (const auto& v : values_)
        if (!v) ++n;
    return n;
}

std::vector<double> TimeSeries::dense_values(const std::string& context) const {
    std::vector<double> out;
    out.reserve(values_.size());
    for (size_t i = 0; i < values_.size(); ++i) {
        if (!values_[i]) {
            throw ValidationError(context + ": missing value in period ending " +
                                  period_end(static_cast<int>(i)).to_string() +
                                  "; impute first");
        }
        out.push_back(*values_[i]);
    }
    return out;
}

Date TimeSeries::period_end(int idx) const {
    auto spans = grid_.periods(freq_);
    const auto& s = spans.at(static_cast<size_t>(idx));
    return grid_.date_at(s.first_index + s.n_days - 1);
}

int TimeSeries::period_length(int idx) const {
    auto spans = grid_.periods(freq_);
    return spans.at(static_cast<size_t>(idx)).n_days;
}

double TimeSeries::at(Date d) const {
    if (freq_ != Frequency::daily) {
        throw ValidationError("TimeSeries::at requires a daily series");
    }
    int i = grid_.index_of(d);
    if (!values_[static_cast<size_t>(i)]) {
        throw ValidationError("missing value at " + d.to_string());
    }
    return *values_[static_cast<size_t>(i)];
}

TimeSeries TimeSeries::slice(Date a, Date b) const {
    if (freq_ != Frequency::daily) {
        throw ValidationError("TimeSeries::slice requires a daily series");
    }
    if (a > b) throw ValidationError("slice: start after end");
    int i0 = grid_.index_of(a);
    int i1 = grid_.index_of(b);
    std::vector<std::optional<double>> v(values_.begin() + i0,
                                         values_.begin() + i1 + 1);
    return TimeSeries(CalendarGrid(a, i1 - i0 + 1), Frequency::daily, std::move(v));
}

TimeSeries broadcast_to_daily(const TimeSeries& s) {
    if (s.frequency() == Frequency::daily) return s;
    auto vals = s.dense_values("broadcast_to_daily");
    auto spans = s.grid().periods(s.frequency());
    std::vector<std::optional<double>> daily(
        static_cast<size_t>(s.grid().length_days));
    for (size_t p = 0; p < spans.size(); ++p) {
        for (int d = 0; d < spans[p].n_days; ++d) {
            daily[static_cast<size_t>(spans[p].first_index + d)] = vals[p];
        }
    }
    return TimeSeries(s.grid(), Frequency::daily, std::move(daily));
}

TimeSeries rolling_mean(const TimeSeries& s, int bandwidth) {
    if (bandwidth < 1) {
        throw ValidationError("rolling_mean: bandwidth must be >= 1, got " +
                              std::to_string(bandwidth));
    }
    if (s.frequency() != Frequency::daily) {
        throw ValidationError("rolling_mean operates on daily series");
    }
    auto v = s.dense_values("rolling_mean");
    int n = static_cast<int>(v.size());
    // prefix sums for O(n) windows
    std::vector<double> prefix(static_cast<size_t>(n) + 1, 0.0);
    for (int t = 0; t < n; ++t) prefix[t + 1] = prefix[t] + v[t];
    std::vector<std::optional<double>> out(static_cast<size_t>(n));
    for (int t = 0; t < n; ++t) {
        int lo = std::max(0, t - bandwidth);
        int hi = std::min(n - 1, t + bandwidth);
        out[static_cast<size_t>(t)] =
            (prefix[hi + 1] - prefix[lo]) / static_cast<double>(hi - lo + 1);
    }
    return TimeSeries(s.grid(), Frequency::daily, std::move(out));
}

TimeSeries mean_by(const TimeSeries& s, Frequency f) {
    if (s.frequency() != Frequency::daily) {
        throw ValidationError("mean_by operates on daily series");
    }
    auto v = s.dense_values("mean_by");
    auto spans = s.grid().periods(f);
    std::vector<std::optional<double>> out(v.size());
    for (const auto& span : spans) {
        double sum = 0.0;
        for (int d = 0; d < span.n_days; ++d) {
            sum += v[static_cast<size_t>(span.first_index + d)];
        }
        double mean = sum / static_cast<double>(span.n_days);
        for (int d = 0; d < span.n_days; ++d) {
            out[static_cast<size_t>(span.first_index + d)] = mean;
        }
    }
    return TimeSeries(s.grid(), Frequency::daily, std::move(out));
}

SmoothResult smooth_mortality(const TimeSeries& x, const SmoothingParams& params) {
    if (params.frequency == Frequency::daily) {
        throw ValidationError("smooth_mortality: frequency must be weekly or monthly");
    }
    if (x.frequency() != params.frequency) {
        throw ValidationError("smooth_mortality: series is " +
                              to_string(x.frequency()) + " but params say " +
                              to_string(params.frequency));
    }
    if (params.bandwidth < 1) {
        throw ValidationError("smooth_mortality: bandwidth must be >= 1");
    }
    TimeSeries xd = broadcast_to_daily(x);
    TimeSeries y = xd;
    std::optional<TimeSeries> last_z;
    for (int i = params.bandwidth; i >= 1; --i) {
        TimeSeries z = rolling_mean(y, i);
        TimeSeries w = mean_by(z, params.frequency);
        if (i > 1) {
            // y <- x + z - w; (z - w) has mean zero within each period, so
            // per-period means of y stay equal to x.
            std::vector<std::optional<double>> next(
                static_cast<size_t>(y.grid().length_days));
            const auto& xv = xd.values();
            const auto& zv = z.values();
            const auto& wv = w.values();
            for (size_t t = 0; t < next.size(); ++t) {
                next[t] = *xv[t] + *zv[t] - *wv[t];
            }
            y = TimeSeries(y.grid(), Frequency::daily, std::move(next));
        }
        last_z = std::move(z);
    }
    int negatives = 0;
    for (const auto& v : y.values())
        if (*v < 0.0) ++negatives;
    return SmoothResult{std::move(y), std::move(*last_z), negatives};
}

ImputeResult impute_linear(const TimeSeries& s, int max_gap) {
    if (max_gap < 1) throw ValidationError("impute_linear: max_gap must be >= 1");
    const auto& v = s.values();
    int n = static_cast<int>(v.size());
    if (n == 0) throw ValidationError("impute_linear: empty series");
    if (!v.front()) {
        throw ValidationError("impute_linear: leading missing value (period ending " +
                              s.period_end(0).to_string() +
                              "); extrapolation not supported");
    }
    if (!v.back()) {
        throw ValidationError("impute_linear: trailing missing value (period ending " +
                              s.period_end(n - 1).to_string() +
                              "); extrapolation not supported");
    }
    std::vector<std::optional<double>> out = v;
    int imputed = 0;
    int t = 1;
    while (t < n) {
        if (out[static_cast<size_t>(t)]) {
            ++t;
            continue;
        }
        int gap_start = t;
        while (t < n && !out[static_cast<size_t>(t)]) ++t;
        int gap_len = t - gap_start;
        if (gap_len > max_gap) {
            throw ValidationError(
                "impute_linear: gap of " + std::to_string(gap_len) +
                " periods starting at period ending " +
                s.period_end(gap_start).to_string() + " exceeds max_gap=" +
                std::to_string(max_gap));
        }
        double lo = *out[static_cast<size_t>(gap_start - 1)];
        double hi = *out[static_cast<size_t>(t)];
        for (int g = 0; g < gap_len; ++g) {
            double frac = static_cast<double>(g + 1) / static_cast<double>(gap_len + 1);
            out[static_cast<size_t>(gap_start + g)] = lo + (hi - lo) * frac;
            ++imputed;
        }
    }
    return ImputeResult{TimeSeries(s.grid(), s.frequency(), std::move(out)), imputed};
}

std::vector<NamedSeries> read_series_csv(const std::string& path, Frequency f) {
    csv::Table t = csv::read_file(path);
    int c_id = t.column("series_id");
    int c_end = t.column("period_end_date");
    int c_val = t.column("value");

    std::map<std::string, std::map<Date, std::optional<double>>> grouped;
    for (const auto& row : t.rows()) {
        Date end = Date::parse(t.field(row, c_end));
        if (f == Frequency::weekly && end.weekday() != 6) {
            t.fail(row, "weekly period_end_date " + end.to_string() +
                            " is not a Saturday");
        }
        if (f == Frequency::monthly && end != end.month_end()) {
            t.fail(row, "monthly period_end_date " + end.to_string() +
                            " is not a month end");
        }
        auto& series = grouped[t.field(row, c_id)];
        if (series.count(end)) {
            t.fail(row, "duplicate period " + end.to_string() + " for series '" +
                            t.field(row, c_id) + "'");
        }
        series[end] = t.number_optional(row, c_val);
    }

    std::vector<NamedSeries> out;
    for (auto& [id, by_date] : grouped) {
        Date last = by_date.rbegin()->first;
        Date first_end = by_date.begin()->first;
        Date start;
        switch (f) {
            case Frequency::daily: start = first_end; break;
            case Frequency::weekly: start = first_end - 6; break;
            case Frequency::monthly: start = first_end.month_start(); break;
        }
        CalendarGrid grid(start, last - start + 1);
        auto spans = grid.periods(f);
        std::vector<std::optional<double>> vals(spans.size());
        size_t found = 0;
        for (size_t p = 0; p < spans.size(); ++p) {
            Date end = grid.date_at(spans[p].first_index + spans[p].n_days - 1);
            auto it = by_date.find(end);
            if (it != by_date.end()) {
                vals[p] = it->second;
                ++found;
            }
        }
        if (found != by_date.size()) {
            throw ValidationError(path + ": series '" + id +
                                  "' has periods that do not line up on a contiguous " +
                                  to_string(f) + " grid");
        }
        out.push_back(NamedSeries{id, TimeSeries(grid, f, std::move(vals))});
    }
    return out;
}

void write_series_csv(const std::string& path,
                      const std::vector<NamedSeries>& series) {
    csv::Writer w({"series_id", "period_end_date", "value"});
    for (const auto& ns : series) {
        for (int p = 0; p < ns.series.periods(); ++p) {
            const auto& v = ns.series.values()[static_cast<size_t>(p)];
            w.add_row({ns.id, ns.series.period_end(p).to_string(),
                       v ? fmt_value(*v) : ""});
        }
    }
    w.write_file(path);
}

}  // namespace epiflow::series
