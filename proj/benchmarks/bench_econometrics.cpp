#include <benchmark/benchmark.h>

#include <random>

#include "epiflow/econometrics.hpp"

using namespace epiflow;

namespace {

struct PanelFixture {
    econ::PanelData panel;
};

PanelFixture make_panel(int n_city, int n_time, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    PanelFixture f;
    auto& p = f.panel;
    p.treatment_name = "treat";
    p.control_names = {"c1", "c2"};
    int n = n_city * n_time;
    p.outcome.resize(n);
    p.treatment.resize(n);
    p.controls.resize(n, 2);
    for (int t = 0; t < n_time; ++t) p.time_value.push_back(t);
    int row = 0;
    for (int c = 0; c < n_city; ++c) {
        double treat = c % 2;
        double c1 = normal(rng), c2 = normal(rng);
        for (int t = 0; t < n_time; ++t) {
            p.unit.push_back(c);
            p.time.push_back(t);
            p.treatment(row) = treat;
            p.controls(row, 0) = c1;
            p.controls(row, 1) = c2;
            bool post = t >= n_time / 2;
            p.outcome(row) = 2.0 * c - 0.5 * t - 5.0 * treat * post + normal(rng);
            ++row;
        }
    }
    return f;
}

void bm_did(benchmark::State& state) {
    auto f = make_panel(static_cast<int>(state.range(0)), 15, 3);
    econ::DidSpec spec;
    spec.post_from = 7;
    for (auto _ : state) {
        auto fit = econ::did_estimate(f.panel, spec);
        benchmark::DoNotOptimize(fit.coef.data());
    }
}
BENCHMARK(bm_did)->Arg(46)->Arg(200);

void bm_event_study(benchmark::State& state) {
    auto f = make_panel(static_cast<int>(state.range(0)), 8, 5);
    econ::EventStudySpec spec;
    spec.base_period = 2;
    for (auto _ : state) {
        auto res = econ::event_study(f.panel, spec);
        benchmark::DoNotOptimize(res.fit.coef.data());
    }
}
BENCHMARK(bm_event_study)->Arg(46)->Arg(200);

void bm_ols_hc1(benchmark::State& state) {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> normal(0.0, 1.0);
    int n = static_cast<int>(state.range(0));
    Eigen::MatrixXd X(n, 8);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
        X(i, 0) = 1.0;
        for (int j = 1; j < 8; ++j) X(i, j) = normal(rng);
        y(i) = X.row(i).sum() + normal(rng);
    }
    std::vector<std::string> names;
    for (int j = 0; j < 8; ++j) names.push_back("x" + std::to_string(j));
    for (auto _ : state) {
        auto fit = econ::ols_fit(y, X, names, {});
        benchmark::DoNotOptimize(fit.coef.data());
    }
}
BENCHMARK(bm_ols_hc1)->Arg(46)->Arg(1000);

}  // namespace

BENCHMARK_MAIN();
