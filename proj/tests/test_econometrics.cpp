#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <vector>

#include "epiflow/econometrics.hpp"
#include "epiflow/errors.hpp"

using namespace epiflow;
using econ::CovFlavor;
using econ::OlsOptions;

namespace {

// Plain Gauss-Jordan inverse, kept free of Eigen decompositions so the
// normal-equations oracle routes through none of the library code.
std::vector<std::vector<double>> gj_inverse(std::vector<std::vector<double>> a) {
    int n = static_cast<int>(a.size());
    std::vector<std::vector<double>> inv(n, std::vector<double>(n, 0.0));
    for (int i = 0; i < n; ++i) inv[i][i] = 1.0;
    for (int col = 0; col < n; ++col) {
        int pivot = col;
        for (int r = col + 1; r < n; ++r) {
            if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
        }
        std::swap(a[col], a[pivot]);
        std::swap(inv[col], inv[pivot]);
        double d = a[col][col];
        REQUIRE(std::abs(d) > 1e-12);
        for (int c = 0; c < n; ++c) {
            a[col][c] /= d;
            inv[col][c] /= d;
        }
        for (int r = 0; r < n; ++r) {
            if (r == col) continue;
            double f = a[r][col];
            for (int c = 0; c < n; ++c) {
                a[r][c] -= f * a[col][c];
                inv[r][c] -= f * inv[col][c];
            }
        }
    }
    return inv;
}

// beta = (X'X)^-1 X'y via the hand-rolled inverse
Eigen::VectorXd normal_equations(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
    int k = static_cast<int>(X.cols());
    std::vector<std::vector<double>> xtx(k, std::vector<double>(k, 0.0));
    std::vector<double> xty(static_cast<size_t>(k), 0.0);
    for (int i = 0; i < X.rows(); ++i) {
        for (int a = 0; a < k; ++a) {
            xty[static_cast<size_t>(a)] += X(i, a) * y(i);
            for (int b = 0; b < k; ++b) xtx[a][b] += X(i, a) * X(i, b);
        }
    }
    auto inv = gj_inverse(xtx);
    Eigen::VectorXd beta(k);
    for (int a = 0; a < k; ++a) {
        double s = 0;
        for (int b = 0; b < k; ++b) s += inv[a][b] * xty[static_cast<size_t>(b)];
        beta(a) = s;
    }
    return beta;
}

// direct sandwich-formula oracle, explicit loops only
Eigen::MatrixXd sandwich_oracle(const Eigen::MatrixXd& X, const Eigen::VectorXd& u,
                                bool clustered, const std::vector<int>& cl,
                                int k_total) {
    int n = static_cast<int>(X.rows());
    int k = static_cast<int>(X.cols());
    std::vector<std::vector<double>> xtx(k, std::vector<double>(k, 0.0));
    for (int i = 0; i < n; ++i) {
        for (int a = 0; a < k; ++a) {
            for (int b = 0; b < k; ++b) xtx[a][b] += X(i, a) * X(i, b);
        }
    }
    auto bread = gj_inverse(xtx);
    std::vector<std::vector<double>> meat(k, std::vector<double>(k, 0.0));
    double factor;
    if (!clustered) {
        for (int i = 0; i < n; ++i) {
            for (int a = 0; a < k; ++a) {
                for (int b = 0; b < k; ++b) {
                    meat[a][b] += X(i, a) * X(i, b) * u(i) * u(i);
                }
            }
        }
        factor = static_cast<double>(n) / (n - k_total);  // HC1
    } else {
        int g = 0;
        for (int c : cl) g = std::max(g, c + 1);
        std::vector<std::vector<double>> scores(static_cast<size_t>(g),
                                                std::vector<double>(k, 0.0));
        for (int i = 0; i < n; ++i) {
            for (int a = 0; a < k; ++a) {
                scores[static_cast<size_t>(cl[static_cast<size_t>(i)])][a] += X(i, a) * u(i);
            }
        }
        for (const auto& s : scores) {
            for (int a = 0; a < k; ++a) {
                for (int b = 0; b < k; ++b) meat[a][b] += s[a] * s[b];
            }
        }
        factor = (static_cast<double>(g) / (g - 1)) *
                 (static_cast<double>(n - 1) / (n - k_total));
    }
    Eigen::MatrixXd v(k, k);
    for (int a = 0; a < k; ++a) {
        for (int b = 0; b < k; ++b) {
            double s = 0;
            for (int c = 0; c < k; ++c) {
                for (int d = 0; d < k; ++d) s += bread[a][c] * meat[c][d] * bread[d][b];
            }
            v(a, b) = factor * s;
        }
    }
    return v;
}

std::vector<std::string> names_for(int k) {
    std::vector<std::string> n;
    for (int j = 0; j < k; ++j) n.push_back("x" + std::to_string(j));
    return n;
}

}  // namespace

TEST_CASE("exact linear outcome: zero residuals, unit R2") {
    Eigen::MatrixXd X(6, 2);
    Eigen::VectorXd y(6);
    for (int i = 0; i < 6; ++i) {
        X(i, 0) = 1.0;
        X(i, 1) = i;
        y(i) = 3.0 - 2.0 * i;
    }
    auto fit = econ::ols_fit(y, X, {"intercept", "t"}, {});
    CHECK(fit.coef(0) == doctest::Approx(3.0));
    CHECK(fit.coef(1) == doctest::Approx(-2.0));
    CHECK(fit.residuals.norm() == doctest::Approx(0.0).epsilon(1e-10));
    CHECK(fit.r2 == doctest::Approx(1.0));
}

TEST_CASE("five-observation fixture matches the normal-equations oracle") {
    Eigen::MatrixXd X(5, 3);
    Eigen::VectorXd y(5);
    double xs[5][2] = {{0.2, 1.4}, {-1.1, 0.3}, {2.2, -0.7}, {0.9, 0.8}, {-0.4, 2.1}};
    double ys[5] = {1.0, -0.5, 3.2, 1.1, 0.4};
    for (int i = 0; i < 5; ++i) {
        X(i, 0) = 1.0;
        X(i, 1) = xs[i][0];
        X(i, 2) = xs[i][1];
        y(i) = ys[i];
    }
    auto fit = econ::ols_fit(y, X, names_for(3), {});
    auto expected = normal_equations(X, y);
    for (int j = 0; j < 3; ++j) {
        CHECK(fit.coef(j) == doctest::Approx(expected(j)).epsilon(1e-10));
    }
}

TEST_CASE("intercept-only model returns the mean") {
    Eigen::MatrixXd X = Eigen::MatrixXd::Ones(7, 1);
    Eigen::VectorXd y(7);
    y << 1, 2, 3, 4, 5, 6, 7;
    auto fit = econ::ols_fit(y, X, {"intercept"}, {});
    CHECK(fit.coef(0) == doctest::Approx(4.0));
}

TEST_CASE("rank deficiency names the collinear column") {
    Eigen::MatrixXd X(6, 3);
    for (int i = 0; i < 6; ++i) {
        X(i, 0) = 1.0;
        X(i, 1) = i;
        X(i, 2) = 2.0 * i;  // collinear with column 1
    }
    Eigen::VectorXd y = Eigen::VectorXd::Random(6);
    CHECK_THROWS_WITH_AS(econ::ols_fit(y, X, {"intercept", "a", "b"}, {}),
                         doctest::Contains("collinear"), EstimationError);
}

TEST_CASE("sandwiches match the formula oracle on random designs") {
    std::mt19937_64 rng(4242);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_int_distribution<int> n_dist(20, 60);
    for (int rep = 0; rep < 100; ++rep) {
        int n = n_dist(rng);
        int k = 3;
        Eigen::MatrixXd X(n, k);
        Eigen::VectorXd y(n);
        std::vector<int> clusters;
        for (int i = 0; i < n; ++i) {
            X(i, 0) = 1.0;
            X(i, 1) = normal(rng);
            X(i, 2) = normal(rng);
            y(i) = 1.0 + X(i, 1) - 0.5 * X(i, 2) + normal(rng) * (1.0 + 0.3 * std::abs(X(i, 1)));
            clusters.push_back(i % 7);
        }

        OlsOptions hc1;
        hc1.cov = CovFlavor::hc1;
        auto fit = econ::ols_fit(y, X, names_for(k), hc1);
        auto expected = sandwich_oracle(X, fit.residuals, false, {}, k);
        CHECK((fit.vcov - expected).norm() <= 1e-8 * std::max(1.0, expected.norm()));

        OlsOptions cl;
        cl.cov = CovFlavor::cluster;
        cl.clusters = clusters;
        auto cfit = econ::ols_fit(y, X, names_for(k), cl);
        auto cexpected = sandwich_oracle(X, cfit.residuals, true, clusters, k);
        CHECK((cfit.vcov - cexpected).norm() <= 1e-8 * std::max(1.0, cexpected.norm()));
        CHECK(cfit.n_clusters == 7);

        // PSD: no negative diagonal and symmetric
        for (int j = 0; j < k; ++j) CHECK(cfit.vcov(j, j) >= -1e-12);
        CHECK((cfit.vcov - cfit.vcov.transpose()).norm() <= 1e-10);
    }
}

TEST_CASE("homoskedastic data: HC1 close to classical standard errors") {
    std::mt19937_64 rng(99);
    std::normal_distribution<double> normal(0.0, 1.0);
    int n = 4000;
    Eigen::MatrixXd X(n, 2);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
        X(i, 0) = 1.0;
        X(i, 1) = normal(rng);
        y(i) = 2.0 + 0.5 * X(i, 1) + normal(rng);
    }
    OlsOptions hc1;
    hc1.cov = CovFlavor::hc1;
    auto robust = econ::ols_fit(y, X, names_for(2), hc1);
    OlsOptions cls;
    cls.cov = CovFlavor::classical;
    auto classical = econ::ols_fit(y, X, names_for(2), cls);
    for (int j = 0; j < 2; ++j) {
        CHECK(std::abs(robust.se(j) - classical.se(j)) / classical.se(j) < 0.05);
    }
}

TEST_CASE("singleton clusters reproduce HC1 exactly") {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> normal(0.0, 1.0);
    int n = 40;
    Eigen::MatrixXd X(n, 2);
    Eigen::VectorXd y(n);
    std::vector<int> clusters;
    for (int i = 0; i < n; ++i) {
        X(i, 0) = 1.0;
        X(i, 1) = normal(rng);
        y(i) = 1.0 + X(i, 1) + normal(rng);
        clusters.push_back(i);  // every observation its own cluster
    }
    OlsOptions hc1;
    hc1.cov = CovFlavor::hc1;
    OlsOptions cl;
    cl.cov = CovFlavor::cluster;
    cl.clusters = clusters;
    auto a = econ::ols_fit(y, X, names_for(2), hc1);
    auto b = econ::ols_fit(y, X, names_for(2), cl);
    // G/(G-1) * (n-1)/(n-k) with G == n collapses to the HC1 factor n/(n-k)
    CHECK((a.vcov - b.vcov).norm() <= 1e-12 * a.vcov.norm());
}

TEST_CASE("row duplication leaves the bare cluster sandwich unchanged") {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> normal(0.0, 1.0);
    int n = 30;
    Eigen::MatrixXd X(n, 2), X2(2 * n, 2);
    Eigen::VectorXd y(n), y2(2 * n);
    std::vector<int> cl, cl2;
    for (int i = 0; i < n; ++i) {
        X(i, 0) = 1.0;
        X(i, 1) = normal(rng);
        y(i) = 1.0 - 2.0 * X(i, 1) + normal(rng);
        cl.push_back(i % 6);
    }
    for (int i = 0; i < n; ++i) {
        X2.row(i) = X.row(i);
        X2.row(n + i) = X.row(i);
        y2(i) = y(i);
        y2(n + i) = y(i);
        cl2.push_back(cl[static_cast<size_t>(i)]);
    }
    for (int i = 0; i < n; ++i) cl2.push_back(cl[static_cast<size_t>(i)]);

    OlsOptions opts;
    opts.cov = CovFlavor::cluster_unadjusted;
    opts.clusters = cl;
    auto base = econ::ols_fit(y, X, names_for(2), opts);
    opts.clusters = cl2;
    auto doubled = econ::ols_fit(y2, X2, names_for(2), opts);
    CHECK((base.coef - doubled.coef).norm() <= 1e-10);
    CHECK((base.vcov - doubled.vcov).norm() <= 1e-8 * std::max(1.0, base.vcov.norm()));
}

TEST_CASE("cluster covariance rejects a single cluster") {
    Eigen::MatrixXd X = Eigen::MatrixXd::Ones(5, 1);
    Eigen::VectorXd y = Eigen::VectorXd::Random(5);
    OlsOptions opts;
    opts.cov = CovFlavor::cluster;
    opts.clusters = {0, 0, 0, 0, 0};
    CHECK_THROWS_AS(econ::ols_fit(y, X, {"intercept"}, opts), EstimationError);
}

TEST_CASE("one-way absorption equals unit demeaning") {
    Eigen::VectorXd y(6);
    y << 1, 2, 3, 7, 8, 9;
    Eigen::MatrixXd X(6, 1);
    X << 0.5, 1.0, 1.5, 0.2, 0.4, 0.6;
    std::vector<int> unit{0, 0, 0, 1, 1, 1};
    auto r = econ::absorb_fixed_effects(y, X, {"x"}, unit, {});
    CHECK(r.absorbed_df == 2);
    for (int g = 0; g < 2; ++g) {
        double mean = 0;
        for (int i = 0; i < 3; ++i) mean += r.y(3 * g + i) / 3.0;
        CHECK(mean == doctest::Approx(0.0).epsilon(1e-12));
    }
}

TEST_CASE("absorbed slope equals the dummy-variable regression") {
    // 3 cities x 3 years
    std::vector<int> unit{0, 0, 0, 1, 1, 1, 2, 2, 2};
    std::vector<int> time{0, 1, 2, 0, 1, 2, 0, 1, 2};
    Eigen::VectorXd y(9), x(9);
    x << 0.1, 0.9, 1.7, 0.4, 1.1, 2.3, 0.2, 1.4, 2.0;
    for (int i = 0; i < 9; ++i) {
        y(i) = 2.0 * x(i) + unit[static_cast<size_t>(i)] * 3.0 -
               time[static_cast<size_t>(i)] * 1.5 + ((i * 7) % 5 - 2) * 0.1;
    }
    Eigen::MatrixXd X(9, 1);
    X.col(0) = x;
    auto absorbed = econ::absorb_fixed_effects(y, X, {"x"}, unit, time);
    auto fit = econ::ols_fit(absorbed.y, absorbed.X, absorbed.names,
                             [] {
                                 OlsOptions o;
                                 o.cov = CovFlavor::classical;
                                 o.absorbed_df = 5;
                                 return o;
                             }());

    // dummy regression: intercept + x + 2 unit dummies + 2 time dummies
    Eigen::MatrixXd D(9, 6);
    for (int i = 0; i < 9; ++i) {
        D(i, 0) = 1.0;
        D(i, 1) = x(i);
        D(i, 2) = unit[static_cast<size_t>(i)] == 1;
        D(i, 3) = unit[static_cast<size_t>(i)] == 2;
        D(i, 4) = time[static_cast<size_t>(i)] == 1;
        D(i, 5) = time[static_cast<size_t>(i)] == 2;
    }
    auto dummy = normal_equations(D, y);
    CHECK(fit.coef(0) == doctest::Approx(dummy(1)).epsilon(1e-8));
}

TEST_CASE("property: Frisch-Waugh on random unbalanced panels") {
    std::mt19937_64 rng(314159);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int rep = 0; rep < 100; ++rep) {
        int n_unit = 4 + rep % 5;
        int n_time = 3 + rep % 4;
        std::vector<int> unit, time;
        std::vector<double> yv, x1v, x2v;
        for (int u = 0; u < n_unit; ++u) {
            for (int t = 0; t < n_time; ++t) {
                if (unif(rng) < 0.15 && !(u == 0 && t == 0)) continue;  // unbalanced
                double x1 = normal(rng), x2 = normal(rng);
                unit.push_back(u);
                time.push_back(t);
                x1v.push_back(x1);
                x2v.push_back(x2);
                yv.push_back(1.5 * x1 - 0.7 * x2 + 2.0 * u - 1.0 * t + normal(rng));
            }
        }
        int n = static_cast<int>(yv.size());
        // compact ids in case a level vanished
        auto compact = [](std::vector<int>& ids) {
            std::map<int, int> seen;
            for (int& v : ids) {
                auto [it, inserted] = seen.emplace(v, static_cast<int>(seen.size()));
                v = it->second;
            }
            return static_cast<int>(seen.size());
        };
        int nu = compact(unit), nt = compact(time);
        if (n < nu + nt + 4) continue;

        Eigen::VectorXd y(n);
        Eigen::MatrixXd X(n, 2);
        for (int i = 0; i < n; ++i) {
            y(i) = yv[static_cast<size_t>(i)];
            X(i, 0) = x1v[static_cast<size_t>(i)];
            X(i, 1) = x2v[static_cast<size_t>(i)];
        }
        auto absorbed = econ::absorb_fixed_effects(y, X, {"x1", "x2"}, unit, time);
        if (absorbed.names.size() != 2) continue;
        OlsOptions opts;
        opts.cov = CovFlavor::classical;
        opts.absorbed_df = absorbed.absorbed_df;
        auto fe_fit = econ::ols_fit(absorbed.y, absorbed.X, absorbed.names, opts);

        Eigen::MatrixXd D(n, 1 + 2 + (nu - 1) + (nt - 1));
        for (int i = 0; i < n; ++i) {
            int col = 0;
            D(i, col++) = 1.0;
            D(i, col++) = X(i, 0);
            D(i, col++) = X(i, 1);
            for (int u = 1; u < nu; ++u) D(i, col++) = unit[static_cast<size_t>(i)] == u;
            for (int t = 1; t < nt; ++t) D(i, col++) = time[static_cast<size_t>(i)] == t;
        }
        auto dummy = normal_equations(D, y);
        CHECK(std::abs(fe_fit.coef(0) - dummy(1)) <= 1e-8 * std::max(1.0, std::abs(dummy(1))));
        CHECK(std::abs(fe_fit.coef(1) - dummy(2)) <= 1e-8 * std::max(1.0, std::abs(dummy(2))));
    }
}

TEST_CASE("regressor constant within units is dropped with a diagnostic") {
    std::vector<int> unit{0, 0, 1, 1, 2, 2};
    Eigen::VectorXd y(6);
    y << 1, 2, 3, 4, 5, 6;
    Eigen::MatrixXd X(6, 2);
    X << 1, 0.3, 1, 0.7, 5, 0.1, 5, 0.9, 9, 0.2, 9, 0.4;  // col 0 constant per unit
    auto r = econ::absorb_fixed_effects(y, X, {"const_in_unit", "varies"}, unit, {});
    REQUIRE(r.dropped.size() == 1);
    CHECK(r.dropped[0] == "const_in_unit");
    CHECK(r.names == std::vector<std::string>{"varies"});
}

namespace {

struct DidDraw {
    econ::PanelData panel;
    double beta;
};

DidDraw make_did_panel(std::mt19937_64& rng, double beta, int n_city = 40,
                       int n_month = 15, int post_at = 8) {
    std::normal_distribution<double> normal(0.0, 1.0);
    DidDraw d;
    d.beta = beta;
    auto& p = d.panel;
    p.treatment_name = "treat";
    p.control_names = {"ctrl"};
    std::vector<double> alpha(static_cast<size_t>(n_city)), ctrl(static_cast<size_t>(n_city));
    std::vector<double> tau(static_cast<size_t>(n_month));
    for (auto& a : alpha) a = 3.0 * normal(rng);
    for (auto& c : ctrl) c = normal(rng);
    for (auto& t : tau) t = 2.0 * normal(rng);
    int n = n_city * n_month;
    p.outcome.resize(n);
    p.treatment.resize(n);
    p.controls.resize(n, 1);
    for (int t = 0; t < n_month; ++t) p.time_value.push_back(t);
    int row = 0;
    for (int c = 0; c < n_city; ++c) {
        double treat = c % 2;
        for (int t = 0; t < n_month; ++t) {
            bool post = t >= post_at;
            p.unit.push_back(c);
            p.time.push_back(t);
            p.treatment(row) = treat;
            p.controls(row, 0) = ctrl[static_cast<size_t>(c)];
            p.outcome(row) = alpha[static_cast<size_t>(c)] + tau[static_cast<size_t>(t)] +
                             beta * treat * post +
                             2.0 * ctrl[static_cast<size_t>(c)] * post + 5.0 * normal(rng);
            ++row;
        }
    }
    return d;
}

}  // namespace

TEST_CASE("DiD recovers the treatment effect (quick check)") {
    std::mt19937_64 rng(2024);
    double sum = 0;
    int covered = 0;
    const int reps = 50;
    for (int rep = 0; rep < reps; ++rep) {
        auto draw = make_did_panel(rng, -5.0);
        econ::DidSpec spec;
        spec.post_from = 8;
        auto fit = econ::did_estimate(draw.panel, spec);
        int idx = fit.term_index("treat_x_post");
        REQUIRE(idx >= 0);
        sum += fit.coef(idx);
        auto ci = fit.confidence_interval(idx, 0.95);
        if (ci.first <= -5.0 && -5.0 <= ci.second) ++covered;
        CHECK(fit.n_clusters == 40);
        CHECK(fit.df_residual == doctest::Approx(39.0));
    }
    CHECK(std::abs(sum / reps + 5.0) < 0.5);
    CHECK(covered >= 42);  // ~95% of 50
}

TEST_CASE("DiD rejects treatments collinear with the fixed effects") {
    std::mt19937_64 rng(5);
    auto draw = make_did_panel(rng, -5.0);
    draw.panel.treatment.setConstant(1.0);  // treat x post collinear with time FE
    econ::DidSpec spec;
    spec.post_from = 8;
    CHECK_THROWS_AS(econ::did_estimate(draw.panel, spec), EstimationError);
}

TEST_CASE("DiD requires post variation") {
    std::mt19937_64 rng(6);
    auto draw = make_did_panel(rng, -5.0);
    econ::DidSpec spec;
    spec.post_from = 99;  // nothing is post
    CHECK_THROWS_AS(econ::did_estimate(draw.panel, spec), EstimationError);
}

TEST_CASE("event study: effects land in the right periods, base is zero") {
    std::mt19937_64 rng(31337);
    std::normal_distribution<double> normal(0.0, 1.0);
    econ::PanelData p;
    p.treatment_name = "treat";
    const std::vector<std::int64_t> years{1909, 1914, 1919, 1921};
    for (auto y : years) p.time_value.push_back(y);
    int n_city = 30;
    int n = n_city * static_cast<int>(years.size());
    p.outcome.resize(n);
    p.treatment.resize(n);
    p.controls.resize(n, 0);
    int row = 0;
    for (int c = 0; c < n_city; ++c) {
        double treat = c % 2;
        double alpha = normal(rng);
        for (size_t t = 0; t < years.size(); ++t) {
            p.unit.push_back(c);
            p.time.push_back(static_cast<int>(t));
            p.treatment(row) = treat;
            double effect = years[t] >= 1919 ? 0.10 : 0.0;
            p.outcome(row) = alpha + 0.05 * static_cast<double>(t) +
                             effect * treat + 0.02 * normal(rng);
            ++row;
        }
    }
    econ::EventStudySpec spec;
    spec.base_period = 1914;
    auto res = econ::event_study(p, spec);
    REQUIRE(res.periods == std::vector<std::int64_t>{1909, 1919, 1921});
    auto coef_for = [&](std::int64_t year) {
        for (size_t i = 0; i < res.periods.size(); ++i) {
            if (res.periods[i] == year) return res.fit.coef(res.coef_index[i]);
        }
        FAIL("missing period");
        return 0.0;
    };
    CHECK(std::abs(coef_for(1909)) < 0.03);
    CHECK(coef_for(1919) == doctest::Approx(0.10).epsilon(0.25));
    CHECK(coef_for(1921) == doctest::Approx(0.10).epsilon(0.25));

    // renaming the base year shifts levels, differences are invariant
    econ::EventStudySpec spec2;
    spec2.base_period = 1909;
    auto res2 = econ::event_study(p, spec2);
    auto coef2_for = [&](std::int64_t year) {
        for (size_t i = 0; i < res2.periods.size(); ++i) {
            if (res2.periods[i] == year) return res2.fit.coef(res2.coef_index[i]);
        }
        FAIL("missing period");
        return 0.0;
    };
    double d1 = coef_for(1921) - coef_for(1919);
    double d2 = coef2_for(1921) - coef2_for(1919);
    CHECK(d1 == doctest::Approx(d2).epsilon(1e-8));

    CHECK_THROWS_AS(
        [&] {
            econ::EventStudySpec bad;
            bad.base_period = 1900;
            return econ::event_study(p, bad);
        }(),
        EstimationError);

    // no treated variation: zero treatment everywhere
    econ::PanelData flat = p;
    flat.treatment.setZero();
    CHECK_THROWS_WITH_AS(econ::event_study(flat, spec),
                         doctest::Contains("no treated variation"), EstimationError);
}

TEST_CASE("oster bound worked example is exact") {
    auto b = econ::oster_bound(-2.0, 0.10, -1.5, 0.50);
    CHECK(b.r_max == doctest::Approx(0.65).epsilon(1e-15));
    CHECK(b.beta_star == doctest::Approx(-1.3125).epsilon(1e-15));

    // controls moved nothing: the bound equals the controlled estimate
    auto same = econ::oster_bound(-1.5, 0.10, -1.5, 0.50);
    CHECK(same.beta_star == doctest::Approx(-1.5));

    // R-max caps at 1
    auto capped = econ::oster_bound(-2.0, 0.10, -1.5, 0.90);
    CHECK(capped.r_max == doctest::Approx(1.0));

    CHECK_THROWS_AS(econ::oster_bound(-2.0, 0.50, -1.5, 0.10), EstimationError);
    CHECK_THROWS_AS(econ::oster_bound(-2.0, 0.50, -1.5, 0.50), EstimationError);
}

TEST_CASE("2SLS with the instrument equal to the regressor reproduces OLS") {
    std::mt19937_64 rng(808);
    std::normal_distribution<double> normal(0.0, 1.0);
    int n = 60;
    Eigen::VectorXd y(n), x(n);
    Eigen::MatrixXd exog = Eigen::MatrixXd::Ones(n, 1);
    for (int i = 0; i < n; ++i) {
        x(i) = normal(rng);
        y(i) = 1.0 + 2.0 * x(i) + normal(rng);
    }
    auto iv = econ::tsls_fit(y, x, x, exog, {"intercept"}, "x", "x_as_z", {});
    Eigen::MatrixXd X(n, 2);
    X.col(0) = x;
    X.col(1).setOnes();
    auto ols = econ::ols_fit(y, X, {"x", "intercept"}, {});
    CHECK(std::abs(iv.second_stage.coef(0) - ols.coef(0)) <= 1e-8);
    CHECK(std::abs(iv.second_stage.se(0) - ols.se(0)) <= 1e-8);
}

TEST_CASE("2SLS fixes the endogeneity bias (quick check)") {
    std::mt19937_64 rng(112358);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double beta = 2.0;
    double ols_sum = 0, iv_sum = 0;
    const int reps = 60, n = 400;
    for (int rep = 0; rep < reps; ++rep) {
        Eigen::VectorXd y(n), x(n), z(n);
        Eigen::MatrixXd exog = Eigen::MatrixXd::Ones(n, 1);
        for (int i = 0; i < n; ++i) {
            double zi = normal(rng), ui = normal(rng);
            x(i) = 0.8 * zi + ui;
            double e = 0.8 * ui + 0.6 * normal(rng);
            y(i) = 1.0 + beta * x(i) + e;
            z(i) = zi;
        }
        auto iv = econ::tsls_fit(y, x, z, exog, {"intercept"}, "x", "z", {});
        iv_sum += iv.second_stage.coef(0);
        Eigen::MatrixXd X(n, 2);
        X.col(0) = x;
        X.col(1).setOnes();
        ols_sum += econ::ols_fit(y, X, {"x", "intercept"}, {}).coef(0);
        CHECK(iv.first_stage_f > 10.0);
        // F is the squared t of the excluded instrument
        CHECK(iv.first_stage_f ==
              doctest::Approx(std::pow(iv.first_stage.tstat(0), 2)).epsilon(1e-10));
    }
    CHECK(std::abs(ols_sum / reps - beta) > 0.3);   // OLS is biased
    CHECK(std::abs(iv_sum / reps - beta) < 0.05);   // 2SLS is not
}

TEST_CASE("degenerate instruments are rejected") {
    Eigen::VectorXd y = Eigen::VectorXd::Random(20);
    Eigen::VectorXd x = Eigen::VectorXd::Random(20);
    Eigen::VectorXd z = Eigen::VectorXd::Constant(20, 3.0);
    Eigen::MatrixXd exog = Eigen::MatrixXd::Ones(20, 1);
    CHECK_THROWS_WITH_AS(econ::tsls_fit(y, x, z, exog, {"intercept"}, "x", "z", {}),
                         doctest::Contains("constant"), EstimationError);
}

TEST_CASE("t distribution helpers") {
    CHECK(econ::t_critical(0.95, 1e7) == doctest::Approx(1.95996).epsilon(1e-4));
    CHECK(econ::t_pvalue(1.95996, 1e7) == doctest::Approx(0.05).epsilon(1e-3));
    CHECK(econ::t_critical(0.90, 26) == doctest::Approx(1.70562).epsilon(1e-4));
}

TEST_CASE("row order permutation changes nothing") {
    std::mt19937_64 rng(321);
    std::normal_distribution<double> normal(0.0, 1.0);
    int n = 50;
    Eigen::MatrixXd X(n, 3);
    Eigen::VectorXd y(n);
    std::vector<int> clusters;
    for (int i = 0; i < n; ++i) {
        X(i, 0) = 1.0;
        X(i, 1) = normal(rng);
        X(i, 2) = normal(rng);
        y(i) = 1 + X(i, 1) - X(i, 2) + normal(rng);
        clusters.push_back(i % 5);
    }
    OlsOptions opts;
    opts.cov = CovFlavor::cluster;
    opts.clusters = clusters;
    auto fit = econ::ols_fit(y, X, names_for(3), opts);

    std::vector<int> perm(static_cast<size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Eigen::MatrixXd Xp(n, 3);
    Eigen::VectorXd yp(n);
    std::vector<int> cp;
    for (int i = 0; i < n; ++i) {
        Xp.row(i) = X.row(perm[static_cast<size_t>(i)]);
        yp(i) = y(perm[static_cast<size_t>(i)]);
        cp.push_back(clusters[static_cast<size_t>(perm[static_cast<size_t>(i)])]);
    }
    opts.clusters = cp;
    auto pfit = econ::ols_fit(yp, Xp, names_for(3), opts);
    CHECK((fit.coef - pfit.coef).norm() <= 1e-10);
    CHECK((fit.vcov - pfit.vcov).norm() <= 1e-10 * std::max(1.0, fit.vcov.norm()));
    CHECK(fit.r2 == doctest::Approx(pfit.r2).epsilon(1e-12));
}

TEST_CASE("affine equivariance: rescaling a control rescales only its coefficient") {
    std::mt19937_64 rng(654);
    std::normal_distribution<double> normal(0.0, 1.0);
    int n = 45;
    Eigen::MatrixXd X(n, 3);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
        X(i, 0) = 1.0;
        X(i, 1) = normal(rng);  // regressor of interest
        X(i, 2) = normal(rng);  // control
        y(i) = 1 + 2 * X(i, 1) - X(i, 2) + normal(rng);
    }
    auto base = econ::ols_fit(y, X, names_for(3), {});
    const double c = 40.0;
    Eigen::MatrixXd Xs = X;
    Xs.col(2) *= c;
    auto scaled = econ::ols_fit(y, Xs, names_for(3), {});
    CHECK(scaled.coef(2) == doctest::Approx(base.coef(2) / c).epsilon(1e-10));
    CHECK(scaled.coef(1) == doctest::Approx(base.coef(1)).epsilon(1e-10));
    CHECK(scaled.coef(0) == doctest::Approx(base.coef(0)).epsilon(1e-10));
    CHECK(scaled.r2 == doctest::Approx(base.r2).epsilon(1e-12));
    Eigen::VectorXd fitted_base = y - base.residuals;
    Eigen::VectorXd fitted_scaled = y - scaled.residuals;
    CHECK((fitted_base - fitted_scaled).norm() <= 1e-10);
}

TEST_CASE("optional weights: duplicating a row equals weighting it by 2") {
    std::mt19937_64 rng(246);
    std::normal_distribution<double> normal(0.0, 1.0);
    int n = 25;
    Eigen::MatrixXd X(n, 2);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
        X(i, 0) = 1.0;
        X(i, 1) = normal(rng);
        y(i) = 2.0 + 0.7 * X(i, 1) + normal(rng);
    }
    Eigen::MatrixXd Xd(n + 1, 2);
    Eigen::VectorXd yd(n + 1);
    Xd.topRows(n) = X;
    yd.head(n) = y;
    Xd.row(n) = X.row(0);
    yd(n) = y(0);

    OlsOptions weighted;
    weighted.cov = CovFlavor::classical;
    weighted.weights.assign(static_cast<size_t>(n), 1.0);
    weighted.weights[0] = 2.0;
    auto wfit = econ::ols_fit(y, X, names_for(2), weighted);

    OlsOptions plain;
    plain.cov = CovFlavor::classical;
    auto dfit = econ::ols_fit(yd, Xd, names_for(2), plain);
    CHECK((wfit.coef - dfit.coef).norm() <= 1e-10);

    OlsOptions bad;
    bad.weights.assign(static_cast<size_t>(n), 1.0);
    bad.weights[3] = 0.0;
    CHECK_THROWS_AS(econ::ols_fit(y, X, names_for(2), bad), EstimationError);
}

TEST_CASE("property: sandwich covariance is PSD on 1000 random designs") {
    std::mt19937_64 rng(1000003);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int rep = 0; rep < 1000; ++rep) {
        int n = 12 + rep % 40;
        Eigen::MatrixXd X(n, 3);
        Eigen::VectorXd y(n);
        std::vector<int> clusters;
        for (int i = 0; i < n; ++i) {
            X(i, 0) = 1.0;
            X(i, 1) = normal(rng);
            X(i, 2) = 0.4 * X(i, 1) + normal(rng);
            y(i) = X(i, 1) - X(i, 2) + normal(rng) * (0.5 + std::abs(X(i, 1)));
            clusters.push_back(i % (3 + rep % 5));
        }
        OlsOptions opts;
        opts.cov = (rep % 2 == 0) ? CovFlavor::hc1 : CovFlavor::cluster;
        if (rep % 2 == 1) opts.clusters = clusters;
        auto fit = econ::ols_fit(y, X, names_for(3), opts);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(fit.vcov);
        CHECK(eig.eigenvalues().minCoeff() >= -1e-10 * std::max(1.0, fit.vcov.norm()));
    }
}
