#include "epiflow/econometrics.hpp"

#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <map>
#include <set>

#include "epiflow/errors.hpp"

namespace epiflow::econ {

std::string to_string(CovFlavor f) {
    switch (f) {
        case CovFlavor::classical: return "classical";
        case CovFlavor::hc0: return "hc0";
        case CovFlavor::hc1: return "hc1";
        case CovFlavor::hc2: return "hc2";
        case CovFlavor::hc3: return "hc3";
        case CovFlavor::cluster: return "cluster";
        case CovFlavor::cluster_unadjusted: return "cluster_unadjusted";
    }
    return "?";
}

CovFlavor cov_flavor_from_string(const std::string& s) {
    if (s == "classical") return CovFlavor::classical;
    if (s == "hc0") return CovFlavor::hc0;
    if (s == "hc1") return CovFlavor::hc1;
    if (s == "hc2") return CovFlavor::hc2;
    if (s == "hc3") return CovFlavor::hc3;
    if (s == "cluster") return CovFlavor::cluster;
    if (s == "cluster_unadjusted") return CovFlavor::cluster_unadjusted;
    throw ValidationError("unknown covariance flavor: '" + s + "'");
}

double t_pvalue(double t, double df) {
    if (df <= 0) return std::numeric_limits<double>::quiet_NaN();
    boost::math::students_t_distribution<double> dist(df);
    return 2.0 * boost::math::cdf(dist, -std::abs(t));
}

double t_critical(double level, double df) {
    if (df <= 0) return std::numeric_limits<double>::quiet_NaN();
    boost::math::students_t_distribution<double> dist(df);
    return boost::math::quantile(dist, 0.5 + level / 2.0);
}

double RegressionResult::tstat(int i) const { return coef(i) / se(i); }

double RegressionResult::pvalue(int i) const { return t_pvalue(tstat(i), df_residual); }

std::pair<double, double> RegressionResult::confidence_interval(int i,
                                                                double level) const {
    double tc = t_critical(level, df_residual);
    return {coef(i) - tc * se(i), coef(i) + tc * se(i)};
}

int RegressionResult::term_index(const std::string& name) const {
    for (size_t i = 0; i < terms.size(); ++i) {
        if (terms[i] == name) return static_cast<int>(i);
    }
    return -1;
}

namespace {

bool has_intercept_like_column(const Eigen::MatrixXd& X) {
    for (int j = 0; j < X.cols(); ++j) {
        double first = X(0, j);
        if (first == 0.0) continue;
        if ((X.col(j).array() == first).all()) return true;
    }
    return false;
}

int count_clusters(const std::vector<int>& clusters) {
    std::set<int> ids(clusters.begin(), clusters.end());
    return static_cast<int>(ids.size());
}

}  // namespace

Eigen::MatrixXd sandwich_covariance(const Eigen::MatrixXd& X,
                                    const Eigen::VectorXd& residuals,
                                    const Eigen::MatrixXd& xtx_inv,
                                    CovFlavor flavor,
                                    const std::vector<int>& clusters,
                                    int k_total) {
    const int n = static_cast<int>(X.rows());
    const int k = static_cast<int>(X.cols());

    if (flavor == CovFlavor::classical) {
        double sigma2 = residuals.squaredNorm() / (n - k_total);
        return sigma2 * xtx_inv;
    }

    if (flavor == CovFlavor::cluster || flavor == CovFlavor::cluster_unadjusted) {
        if (static_cast<int>(clusters.size()) != n) {
            throw EstimationError("cluster covariance requested without cluster ids");
        }
        std::map<int, Eigen::VectorXd> scores;
        for (int i = 0; i < n; ++i) {
            auto [it, inserted] = scores.try_emplace(clusters[i], Eigen::VectorXd::Zero(k));
            it->second += X.row(i).transpose() * residuals(i);
        }
        int g = static_cast<int>(scores.size());
        if (g < 2) {
            throw EstimationError("cluster covariance needs at least 2 clusters, got " +
                                  std::to_string(g));
        }
        Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(k, k);
        for (const auto& [id, s] : scores) {
            (void)id;
            meat += s * s.transpose();
        }
        double factor = 1.0;
        if (flavor == CovFlavor::cluster) {
            factor = (static_cast<double>(g) / (g - 1)) *
                     (static_cast<double>(n - 1) / (n - k_total));
        }
        return factor * xtx_inv * meat * xtx_inv;
    }

    // heteroskedasticity-robust family
    Eigen::VectorXd weight = residuals.array().square();
    if (flavor == CovFlavor::hc2 || flavor == CovFlavor::hc3) {
        for (int i = 0; i < n; ++i) {
            double h = X.row(i) * xtx_inv * X.row(i).transpose();
            double denom = flavor == CovFlavor::hc2 ? (1.0 - h) : (1.0 - h) * (1.0 - h);
            if (denom <= 0) {
                throw EstimationError("leverage of 1 encountered in HC2/HC3 weights");
            }
            weight(i) /= denom;
        }
    }
    Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(k, k);
    for (int i = 0; i < n; ++i) {
        meat += weight(i) * (X.row(i).transpose() * X.row(i));
    }
    double factor = flavor == CovFlavor::hc1
                        ? static_cast<double>(n) / (n - k_total)
                        : 1.0;
    return factor * xtx_inv * meat * xtx_inv;
}

RegressionResult ols_fit(const Eigen::VectorXd& y_in, const Eigen::MatrixXd& X_in,
                         const std::vector<std::string>& names,
                         const OlsOptions& options) {
    const int n = static_cast<int>(X_in.rows());
    const int k = static_cast<int>(X_in.cols());
    if (static_cast<int>(names.size()) != k) {
        throw EstimationError("ols_fit: " + std::to_string(k) + " columns but " +
                              std::to_string(names.size()) + " names");
    }
    if (y_in.size() != n) {
        throw EstimationError("ols_fit: y length does not match X rows");
    }
    Eigen::VectorXd y = y_in;
    Eigen::MatrixXd X = X_in;
    if (!options.weights.empty()) {
        if (static_cast<int>(options.weights.size()) != n) {
            throw EstimationError("ols_fit: weights do not match rows");
        }
        for (int i = 0; i < n; ++i) {
            double w = options.weights[static_cast<size_t>(i)];
            if (w <= 0) throw EstimationError("ols_fit: weights must be positive");
            double sw = std::sqrt(w);
            y(i) *= sw;
            X.row(i) *= sw;
        }
    }
    int k_total = k + options.absorbed_df;
    if (n <= k_total) {
        throw EstimationError("ols_fit: " + std::to_string(n) + " observations cannot "
                              "identify " + std::to_string(k_total) + " parameters");
    }

    // rank check on unit-scaled columns so wild magnitudes do not mask
    // genuine collinearity
    Eigen::VectorXd scale(k);
    for (int j = 0; j < k; ++j) {
        double norm = X.col(j).norm();
        scale(j) = norm > 0 ? norm : 1.0;
    }
    Eigen::MatrixXd Xs = X * scale.cwiseInverse().asDiagonal();
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Xs);
    qr.setThreshold(1e-10);
    int rank = static_cast<int>(qr.rank());
    if (rank < k) {
        auto perm = qr.colsPermutation().indices();
        std::string cols;
        for (int j = rank; j < k; ++j) {
            if (!cols.empty()) cols += ", ";
            cols += names[static_cast<size_t>(perm(j))];
        }
        throw EstimationError("design matrix is rank deficient; collinear columns: " +
                              cols);
    }

    Eigen::VectorXd beta = scale.cwiseInverse().asDiagonal() * qr.solve(y);
    Eigen::VectorXd residuals = y - X * beta;

    Eigen::MatrixXd xtx_inv =
        (X.transpose() * X).ldlt().solve(Eigen::MatrixXd::Identity(k, k));

    RegressionResult res;
    res.terms = names;
    res.coef = beta;
    res.residuals = residuals;
    res.n_obs = n;
    res.rank = k;
    res.absorbed_df = options.absorbed_df;
    res.cov = options.cov;

    int nested = options.absorbed_df_nested;
    int k_for_correction = k_total - nested;
    res.vcov = sandwich_covariance(X, residuals, xtx_inv, options.cov,
                                   options.clusters, k_for_correction);
    res.se = res.vcov.diagonal().cwiseMax(0.0).cwiseSqrt();

    if (options.cov == CovFlavor::cluster ||
        options.cov == CovFlavor::cluster_unadjusted) {
        res.n_clusters = count_clusters(options.clusters);
        res.df_residual = res.n_clusters - 1;
    } else {
        res.df_residual = n - k_total;
    }

    double rss = residuals.squaredNorm();
    double tss;
    if (options.tss_centered_override) {
        tss = *options.tss_centered_override;
    } else if (options.absorbed_df > 0 || has_intercept_like_column(X)) {
        tss = (y.array() - y.mean()).square().sum();
    } else {
        tss = y.squaredNorm();
    }
    res.r2 = tss > 0 ? 1.0 - rss / tss : 0.0;
    res.adj_r2 = tss > 0 ? 1.0 - (rss / (n - k_total)) / (tss / (n - 1)) : 0.0;
    return res;
}

AbsorbResult absorb_fixed_effects(const Eigen::VectorXd& y, const Eigen::MatrixXd& X,
                                  const std::vector<std::string>& names,
                                  const std::vector<int>& unit,
                                  const std::vector<int>& time,
                                  double tol, int max_iter) {
    const int n = static_cast<int>(y.size());
    if (static_cast<int>(unit.size()) != n) {
        throw EstimationError("absorb_fixed_effects: unit ids do not match rows");
    }
    bool two_way = !time.empty();
    if (two_way && static_cast<int>(time.size()) != n) {
        throw EstimationError("absorb_fixed_effects: time ids do not match rows");
    }

    int n_unit = unit.empty() ? 0 : *std::max_element(unit.begin(), unit.end()) + 1;
    int n_time = two_way ? *std::max_element(time.begin(), time.end()) + 1 : 0;

    Eigen::MatrixXd work(n, X.cols() + 1);
    work.col(0) = y;
    if (X.cols() > 0) work.rightCols(X.cols()) = X;
    Eigen::VectorXd pre_norm(work.cols());
    for (int j = 0; j < work.cols(); ++j) pre_norm(j) = work.col(j).norm();

    auto demean_by = [&](const std::vector<int>& ids, int levels) -> double {
        Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(levels, work.cols());
        Eigen::VectorXd counts = Eigen::VectorXd::Zero(levels);
        for (int i = 0; i < n; ++i) {
            sums.row(ids[i]) += work.row(i);
            counts(ids[i]) += 1;
        }
        for (int l = 0; l < levels; ++l) {
            if (counts(l) > 0) sums.row(l) /= counts(l);
        }
        double max_change = 0;
        for (int i = 0; i < n; ++i) {
            max_change = std::max(max_change,
                                  sums.row(ids[i]).cwiseAbs().maxCoeff());
            work.row(i) -= sums.row(ids[i]);
        }
        return max_change;
    };

    int iter = 0;
    for (; iter < max_iter; ++iter) {
        double change = demean_by(unit, n_unit);
        if (two_way) change = std::max(change, demean_by(time, n_time));
        if (change < tol) break;
        if (!two_way) break;  // one pass suffices for one-way FE
    }
    if (iter >= max_iter) {
        throw EstimationError("fixed-effect absorption did not converge after " +
                              std::to_string(max_iter) + " iterations");
    }

    AbsorbResult res;
    res.iterations = iter + 1;
    res.absorbed_df = two_way ? n_unit + n_time - 1 : n_unit;
    res.y = work.col(0);

    std::vector<int> keep;
    for (int j = 0; j < X.cols(); ++j) {
        double post = work.col(j + 1).norm();
        if (post <= 1e-8 * std::max(1.0, pre_norm(j + 1))) {
            res.dropped.push_back(names[static_cast<size_t>(j)]);
        } else {
            keep.push_back(j);
        }
    }
    res.X.resize(n, static_cast<int>(keep.size()));
    for (size_t j = 0; j < keep.size(); ++j) {
        res.X.col(static_cast<int>(j)) = work.col(keep[j] + 1);
        res.names.push_back(names[static_cast<size_t>(keep[j])]);
    }
    return res;
}

namespace {

struct InteractionDesign {
    Eigen::MatrixXd X;
    std::vector<std::string> names;
};

}  // namespace

RegressionResult did_estimate(const PanelData& panel, const DidSpec& spec) {
    const int n = static_cast<int>(panel.outcome.size());
    Eigen::VectorXd post(n);
    for (int i = 0; i < n; ++i) {
        post(i) = panel.time_value[static_cast<size_t>(panel.time[static_cast<size_t>(i)])] >=
                          spec.post_from
                      ? 1.0
                      : 0.0;
    }
    if (post.sum() == 0 || post.sum() == n) {
        throw EstimationError("did_estimate: Post indicator has no variation "
                              "(post_from outside the estimation window?)");
    }

    int kc = static_cast<int>(panel.controls.cols());
    Eigen::MatrixXd X(n, 1 + kc);
    std::vector<std::string> names;
    X.col(0) = panel.treatment.cwiseProduct(post);
    names.push_back(panel.treatment_name + "_x_post");
    for (int j = 0; j < kc; ++j) {
        X.col(1 + j) = panel.controls.col(j).cwiseProduct(post);
        names.push_back(panel.control_names[static_cast<size_t>(j)] + "_x_post");
    }

    AbsorbResult absorbed =
        absorb_fixed_effects(panel.outcome, X, names, panel.unit, panel.time);
    for (const auto& d : absorbed.dropped) {
        if (d == names[0]) {
            throw EstimationError("did_estimate: treatment term '" + d +
                                  "' is collinear with the fixed effects");
        }
    }

    OlsOptions opts;
    opts.cov = spec.cov;
    opts.clusters = panel.unit;
    opts.absorbed_df = absorbed.absorbed_df;
    if (spec.cov == CovFlavor::cluster || spec.cov == CovFlavor::cluster_unadjusted) {
        // unit FE are nested within unit clusters and do not consume
        // small-sample degrees of freedom
        int n_unit = *std::max_element(panel.unit.begin(), panel.unit.end()) + 1;
        opts.absorbed_df_nested = n_unit;
    }
    opts.tss_centered_override =
        (panel.outcome.array() - panel.outcome.mean()).square().sum();
    return ols_fit(absorbed.y, absorbed.X, absorbed.names, opts);
}

EventStudyResult event_study(const PanelData& panel, const EventStudySpec& spec) {
    const int n = static_cast<int>(panel.outcome.size());
    std::set<std::int64_t> period_set(panel.time_value.begin(), panel.time_value.end());
    if (!period_set.count(spec.base_period)) {
        throw EstimationError("event_study: base period " +
                              std::to_string(spec.base_period) +
                              " not present in the panel");
    }
    std::vector<std::int64_t> periods;
    for (auto p : period_set) {
        if (p != spec.base_period) periods.push_back(p);
    }

    int kc = static_cast<int>(panel.controls.cols());
    int np = static_cast<int>(periods.size());
    Eigen::MatrixXd X = Eigen::MatrixXd::Zero(n, np * (1 + kc));
    std::vector<std::string> names;
    for (int p = 0; p < np; ++p) {
        names.push_back(panel.treatment_name + "_x_" + std::to_string(periods[p]));
    }
    for (int j = 0; j < kc; ++j) {
        for (int p = 0; p < np; ++p) {
            names.push_back(panel.control_names[static_cast<size_t>(j)] + "_x_" +
                            std::to_string(periods[p]));
        }
    }
    for (int i = 0; i < n; ++i) {
        std::int64_t tv =
            panel.time_value[static_cast<size_t>(panel.time[static_cast<size_t>(i)])];
        for (int p = 0; p < np; ++p) {
            if (periods[static_cast<size_t>(p)] != tv) continue;
            X(i, p) = panel.treatment(i);
            for (int j = 0; j < kc; ++j) {
                X(i, np + j * np + p) = panel.controls(i, j);
            }
        }
    }

    AbsorbResult absorbed =
        absorb_fixed_effects(panel.outcome, X, names, panel.unit, panel.time);
    for (int p = 0; p < np; ++p) {
        const std::string& name = names[static_cast<size_t>(p)];
        if (std::find(absorbed.dropped.begin(), absorbed.dropped.end(), name) !=
            absorbed.dropped.end()) {
            throw EstimationError("event_study: no treated variation in period " +
                                  std::to_string(periods[static_cast<size_t>(p)]));
        }
    }

    OlsOptions opts;
    opts.cov = spec.cov;
    opts.clusters = panel.unit;
    opts.absorbed_df = absorbed.absorbed_df;
    if (spec.cov == CovFlavor::cluster || spec.cov == CovFlavor::cluster_unadjusted) {
        int n_unit = *std::max_element(panel.unit.begin(), panel.unit.end()) + 1;
        opts.absorbed_df_nested = n_unit;
    }
    opts.tss_centered_override =
        (panel.outcome.array() - panel.outcome.mean()).square().sum();

    EventStudyResult res;
    res.fit = ols_fit(absorbed.y, absorbed.X, absorbed.names, opts);
    res.periods = periods;
    for (int p = 0; p < np; ++p) {
        res.coef_index.push_back(
            res.fit.term_index(names[static_cast<size_t>(p)]));
    }
    return res;
}

OsterBound oster_bound(double beta_uncontrolled, double r2_uncontrolled,
                       double beta_controlled, double r2_controlled,
                       double r_max_coef, double r_max_cap) {
    if (!(r2_controlled > r2_uncontrolled)) {
        throw EstimationError(
            "oster_bound: controlled R^2 (" + std::to_string(r2_controlled) +
            ") must exceed uncontrolled R^2 (" + std::to_string(r2_uncontrolled) + ")");
    }
    OsterBound b;
    b.beta_uncontrolled = beta_uncontrolled;
    b.r2_uncontrolled = r2_uncontrolled;
    b.beta_controlled = beta_controlled;
    b.r2_controlled = r2_controlled;
    b.r_max = std::min(r_max_cap, r_max_coef * r2_controlled);
    b.beta_star = beta_controlled -
                  (beta_uncontrolled - beta_controlled) *
                      (b.r_max - r2_controlled) / (r2_controlled - r2_uncontrolled);
    double move = (beta_uncontrolled - beta_controlled) * (b.r_max - r2_controlled);
    b.delta_for_zero = move != 0
                           ? beta_controlled * (r2_controlled - r2_uncontrolled) / move
                           : std::numeric_limits<double>::infinity();
    return b;
}

TslsResult tsls_fit(const Eigen::VectorXd& y, const Eigen::VectorXd& endogenous,
                    const Eigen::VectorXd& instrument, const Eigen::MatrixXd& exog,
                    const std::vector<std::string>& exog_names,
                    const std::string& endogenous_name,
                    const std::string& instrument_name,
                    const OlsOptions& options) {
    const int n = static_cast<int>(y.size());
    const int ke = static_cast<int>(exog.cols());
    if ((instrument.array() == instrument(0)).all()) {
        throw EstimationError("tsls_fit: instrument '" + instrument_name +
                              "' is constant");
    }

    Eigen::MatrixXd X(n, 1 + ke);
    X.col(0) = endogenous;
    if (ke > 0) X.rightCols(ke) = exog;
    Eigen::MatrixXd Z(n, 1 + ke);
    Z.col(0) = instrument;
    if (ke > 0) Z.rightCols(ke) = exog;

    std::vector<std::string> x_names;
    x_names.push_back(endogenous_name);
    for (const auto& nm : exog_names) x_names.push_back(nm);

    // first stage: endogenous on instrument and controls
    std::vector<std::string> z_names;
    z_names.push_back(instrument_name);
    for (const auto& nm : exog_names) z_names.push_back(nm);
    OlsOptions fs_opts = options;
    RegressionResult first = ols_fit(endogenous, Z, z_names, fs_opts);
    if (first.residuals.squaredNorm() <= 0) {
        throw EstimationError("tsls_fit: first stage has zero residual variance; "
                              "F statistic undefined");
    }
    double f_stat = first.tstat(0) * first.tstat(0);

    // just-identified IV: beta = (Z'X)^-1 Z'y
    Eigen::MatrixXd zx = Z.transpose() * X;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(zx);
    if (!lu.isInvertible()) {
        throw EstimationError("tsls_fit: Z'X is singular (weak or collinear "
                              "instrument)");
    }
    Eigen::VectorXd beta = lu.solve(Z.transpose() * y);
    Eigen::VectorXd residuals = y - X * beta;

    Eigen::MatrixXd zx_inv = lu.inverse();
    int k_total = static_cast<int>(X.cols()) + options.absorbed_df -
                  options.absorbed_df_nested;

    // sandwich with instrument-side scores: (Z'X)^-1 M (X'Z)^-1
    Eigen::MatrixXd meat;
    double factor = 1.0;
    int kk = static_cast<int>(Z.cols());
    if (options.cov == CovFlavor::cluster ||
        options.cov == CovFlavor::cluster_unadjusted) {
        if (static_cast<int>(options.clusters.size()) != n) {
            throw EstimationError("tsls_fit: cluster covariance without cluster ids");
        }
        std::map<int, Eigen::VectorXd> scores;
        for (int i = 0; i < n; ++i) {
            auto [it, ins] =
                scores.try_emplace(options.clusters[i], Eigen::VectorXd::Zero(kk));
            it->second += Z.row(i).transpose() * residuals(i);
        }
        int g = static_cast<int>(scores.size());
        if (g < 2) throw EstimationError("tsls_fit: needs at least 2 clusters");
        meat = Eigen::MatrixXd::Zero(kk, kk);
        for (const auto& [id, s] : scores) {
            (void)id;
            meat += s * s.transpose();
        }
        if (options.cov == CovFlavor::cluster) {
            factor = (static_cast<double>(g) / (g - 1)) *
                     (static_cast<double>(n - 1) / (n - k_total));
        }
    } else {
        meat = Eigen::MatrixXd::Zero(kk, kk);
        for (int i = 0; i < n; ++i) {
            meat += residuals(i) * residuals(i) *
                    (Z.row(i).transpose() * Z.row(i));
        }
        if (options.cov == CovFlavor::hc1) {
            factor = static_cast<double>(n) / (n - k_total);
        } else if (options.cov == CovFlavor::classical) {
            double sigma2 = residuals.squaredNorm() / (n - k_total);
            meat = sigma2 * (Z.transpose() * Z);
        }
    }

    RegressionResult second;
    second.terms = x_names;
    second.coef = beta;
    second.residuals = residuals;
    second.vcov = factor * zx_inv * meat * zx_inv.transpose();
    second.se = second.vcov.diagonal().cwiseMax(0.0).cwiseSqrt();
    second.n_obs = n;
    second.rank = static_cast<int>(X.cols());
    second.cov = options.cov;
    second.first_stage_f = f_stat;
    if (options.cov == CovFlavor::cluster ||
        options.cov == CovFlavor::cluster_unadjusted) {
        second.n_clusters = count_clusters(options.clusters);
        second.df_residual = second.n_clusters - 1;
    } else {
        second.df_residual = n - k_total;
    }
    double tss = (y.array() - y.mean()).square().sum();
    second.r2 = tss > 0 ? 1.0 - residuals.squaredNorm() / tss : 0.0;
    second.adj_r2 =
        tss > 0 ? 1.0 - (residuals.squaredNorm() / (n - k_total)) / (tss / (n - 1))
                : 0.0;

    TslsResult res;
    res.second_stage = std::move(second);
    res.first_stage = std::move(first);
    res.first_stage_f = f_stat;
    return res;
}

}  // namespace epiflow::econ
