#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace epiflow::econ {

enum class CovFlavor {
    classical,
    hc0,
    hc1,
    hc2,
    hc3,
    cluster,             // with the G/(G-1) * (n-1)/(n-k) factor
    cluster_unadjusted,  // bare cluster sandwich (diagnostic)
};

std::string to_string(CovFlavor f);
CovFlavor cov_flavor_from_string(const std::string& s);

struct RegressionResult {
    std::vector<std::string> terms;
    Eigen::VectorXd coef;
    Eigen::MatrixXd vcov;
    Eigen::VectorXd se;
    Eigen::VectorXd residuals;
    double r2 = 0;
    double adj_r2 = 0;
    int n_obs = 0;
    int rank = 0;          // explicit regressors
    int absorbed_df = 0;   // dummy-equivalent parameters absorbed as FE
    double df_residual = 0;  // degrees of freedom for t statistics
    int n_clusters = 0;
    CovFlavor cov = CovFlavor::hc1;
    std::optional<double> first_stage_f;

    double tstat(int i) const;
    double pvalue(int i) const;
    // two-sided confidence interval, e.g. level = 0.95
    std::pair<double, double> confidence_interval(int i, double level) const;
    int term_index(const std::string& name) const;  // -1 when absent
};

// Two-sided p-value and critical value of Student's t.
double t_pvalue(double t, double df);
double t_critical(double level, double df);

struct OlsOptions {
    CovFlavor cov = CovFlavor::hc1;
    // 0-based cluster ids, one per row; required for cluster flavors
    std::vector<int> clusters;
    // optional observation weights (the analyses here run unweighted, but
    // the column is exposed); rows are scaled by sqrt(weight)
    std::vector<double> weights;
    // extra parameters (absorbed FE) counted in small-sample corrections
    int absorbed_df = 0;
    int absorbed_df_nested = 0;  // absorbed params nested inside clusters
    // total sum of squares override: FE regressions report R^2 against the
    // raw outcome even though the fit runs on demeaned data
    std::optional<double> tss_centered_override;
};

// Least squares with a rank-revealing factorization (threshold 1e-10 on
// unit-scaled columns). Rank deficiency is an error naming the collinear
// columns.
RegressionResult ols_fit(const Eigen::VectorXd& y, const Eigen::MatrixXd& X,
                         const std::vector<std::string>& names,
                         const OlsOptions& options = {});

// Sandwich covariance for given design and residuals. `k_total` enters the
// small-sample factors.
Eigen::MatrixXd sandwich_covariance(const Eigen::MatrixXd& X,
                                    const Eigen::VectorXd& residuals,
                                    const Eigen::MatrixXd& xtx_inv,
                                    CovFlavor flavor,
                                    const std::vector<int>& clusters,
                                    int k_total);

// --- fixed effects ---------------------------------------------------------

struct AbsorbResult {
    Eigen::VectorXd y;
    Eigen::MatrixXd X;
    std::vector<std::string> names;    // surviving columns
    std::vector<std::string> dropped;  // columns absorbed by the FE
    int iterations = 0;
    int absorbed_df = 0;  // dummy-equivalent parameter count
};

// Iterative within-demeaning over one or two FE dimensions until the
// largest cell change is below tol. Columns that demean to (numerically)
// zero were collinear with the FE and are dropped.
AbsorbResult absorb_fixed_effects(const Eigen::VectorXd& y, const Eigen::MatrixXd& X,
                                  const std::vector<std::string>& names,
                                  const std::vector<int>& unit,
                                  const std::vector<int>& time,
                                  double tol = 1e-11, int max_iter = 20000);

// --- panel estimators -------------------------------------------------------

struct PanelData {
    std::vector<int> unit;          // 0-based unit ids per row
    std::vector<int> time;          // 0-based time ids per row
    std::vector<std::int64_t> time_value;  // original period label per time id
    Eigen::VectorXd outcome;
    Eigen::VectorXd treatment;      // time-invariant treatment per row
    Eigen::MatrixXd controls;       // time-invariant controls per row
    std::vector<std::string> control_names;
    std::string treatment_name = "treatment";
};

struct DidSpec {
    std::int64_t post_from = 0;  // time_value >= post_from means Post = 1
    CovFlavor cov = CovFlavor::cluster;
};

// treat x Post with unit+time FE and controls x Post; cluster by unit.
// The coefficient of interest carries the term name
// "<treatment>_x_post".
RegressionResult did_estimate(const PanelData& panel, const DidSpec& spec);

struct EventStudySpec {
    std::int64_t base_period = 0;
    CovFlavor cov = CovFlavor::cluster;
};

struct EventStudyResult {
    RegressionResult fit;
    std::vector<std::int64_t> periods;  // every period except the base
    std::vector<int> coef_index;        // treatment coefficient per period
};

// One treatment (and control) interaction per period except the base;
// the base-period coefficient is zero by construction.
EventStudyResult event_study(const PanelData& panel, const EventStudySpec& spec);

// --- bounding and IV --------------------------------------------------------

struct OsterBound {
    double beta_uncontrolled = 0, r2_uncontrolled = 0;
    double beta_controlled = 0, r2_controlled = 0;
    double r_max = 0;
    double beta_star = 0;        // bias-adjusted coefficient at delta = 1
    double delta_for_zero = 0;   // proportional selection needed for beta = 0
};

OsterBound oster_bound(double beta_uncontrolled, double r2_uncontrolled,
                       double beta_controlled, double r2_controlled,
                       double r_max_coef = 1.3, double r_max_cap = 1.0);

struct TslsResult {
    RegressionResult second_stage;  // first term is the endogenous regressor
    RegressionResult first_stage;   // first term is the excluded instrument
    double first_stage_f = 0;
};

// Exactly identified two-stage least squares: one endogenous regressor,
// one excluded instrument, common exogenous controls (including the
// intercept column).
TslsResult tsls_fit(const Eigen::VectorXd& y, const Eigen::VectorXd& endogenous,
                    const Eigen::VectorXd& instrument, const Eigen::MatrixXd& exog,
                    const std::vector<std::string>& exog_names,
                    const std::string& endogenous_name,
                    const std::string& instrument_name,
                    const OlsOptions& options = {});

}  // namespace epiflow::econ
