#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "epiflow/series.hpp"

using namespace epiflow;

namespace {

series::TimeSeries random_weekly(int n_weeks, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> value(0.0, 400.0);
    std::vector<double> x(static_cast<size_t>(n_weeks));
    for (auto& v : x) v = value(rng);
    CalendarGrid grid(Date::from_ymd(1918, 9, 8), n_weeks * 7);
    return series::TimeSeries::dense(grid, Frequency::weekly, std::move(x));
}

void bm_smooth_weekly(benchmark::State& state) {
    auto s = random_weekly(static_cast<int>(state.range(0)), 42);
    auto params = series::SmoothingParams::weekly_default();
    for (auto _ : state) {
        auto result = series::smooth_mortality(s, params);
        benchmark::DoNotOptimize(result.daily.values().data());
    }
}
BENCHMARK(bm_smooth_weekly)->Arg(26)->Arg(52)->Arg(520);

void bm_smooth_monthly(benchmark::State& state) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> value(0.0, 80.0);
    int n_months = static_cast<int>(state.range(0));
    std::vector<double> x(static_cast<size_t>(n_months));
    for (auto& v : x) v = value(rng);
    Date start = Date::from_ymd(1910, 1, 1);
    Date end = start;
    for (int i = 1; i < n_months; ++i) end = end.month_end() + 1;
    CalendarGrid grid(start, end.month_end() - start + 1);
    auto s = series::TimeSeries::dense(grid, Frequency::monthly, std::move(x));
    auto params = series::SmoothingParams::monthly_default();
    for (auto _ : state) {
        auto result = series::smooth_mortality(s, params);
        benchmark::DoNotOptimize(result.daily.values().data());
    }
}
BENCHMARK(bm_smooth_monthly)->Arg(12)->Arg(84);

void bm_rolling_mean(benchmark::State& state) {
    auto s = series::broadcast_to_daily(random_weekly(520, 99));
    for (auto _ : state) {
        auto r = series::rolling_mean(s, 15);
        benchmark::DoNotOptimize(r.values().data());
    }
}
BENCHMARK(bm_rolling_mean);

}  // namespace

BENCHMARK_MAIN();
