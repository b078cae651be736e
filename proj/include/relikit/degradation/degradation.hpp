#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "relikit/rng.hpp"

namespace relikit::degradation {

inline constexpr std::size_t kChannels = 3;

/// One specimen. Epochs are days in service (1, 2, ...); covariates[k] holds
/// the channel values recorded at epochs[k]. Measurements sit on a subset of
/// the epochs.
struct DegradationUnitRecord {
    std::string unit_id;
    int start_day = 0;
    std::vector<double> epochs;
    std::vector<std::array<double, kChannels>> covariates;
    std::vector<double> measurement_epochs;
    std::vector<double> measurements;

    void validate() const;
};

enum class BasisKind { ISPLINE, CSPLINE };

std::string to_string(BasisKind kind);
BasisKind basis_kind_from_string(const std::string& s);

struct ChannelSpline {
    std::string name;
    BasisKind kind = BasisKind::ISPLINE;
    /// Boundary and interior knots, ascending: {lo, k1, ..., hi}.
    std::vector<double> knots;
    int degree = 3;
    /// Multiplier applied to the monotone I-spline effect; -1 makes the damage
    /// contribution nonincreasing in the covariate.
    double sign = -1.0;

    void validate() const;
    /// Constrained basis functions for this channel.
    std::size_t constrained_count() const;
    /// Unconstrained columns contributed by this channel (the linear term of a
    /// concave effect).
    std::size_t free_count() const { return kind == BasisKind::CSPLINE ? 1 : 0; }
};

struct SplineEffectSpec {
    std::vector<ChannelSpline> channels;

    void validate() const;
    std::size_t constrained_count() const;
    /// Includes the intercept.
    std::size_t free_count() const;

    /// Quantile knots from pooled covariate values: interior knots at the
    /// empirical quantiles, boundary knots at the range.
    static SplineEffectSpec from_data(std::span<const DegradationUnitRecord> data, int interior_knots = 3,
                                      int degree = 3);
};

/// I-spline basis of the given degree with the constant function dropped.
/// Entries lie in [0,1] and are nondecreasing; x is clamped to the knot span.
std::vector<double> ispline_basis(double x, std::span<const double> knots, int degree);
/// Integrated I-splines, normalized so each entry is 1 at the upper knot.
std::vector<double> cspline_basis(double x, std::span<const double> knots, int degree);

/// Basis values of one channel as they enter the damage rate: constrained
/// columns then free columns.
struct ChannelRow {
    std::vector<double> constrained;
    std::vector<double> free;
};
ChannelRow channel_row(double x, const ChannelSpline& ch);

/// Concatenated basis vector for one channel, as exposed by spline_basis.
std::vector<double> spline_basis(double x, const ChannelSpline& ch);

struct PathParams {
    double beta0 = 0.0;
    /// Free coefficients other than the intercept, in channel order.
    std::vector<double> beta_free;
    /// Nonnegative coefficients, in channel order.
    std::vector<double> beta_constrained;
    double sigma0 = 0.0;
    double sigma1 = 0.0;
    double rho = 0.0;
    double sigma_eps = 0.0;

    void validate(const SplineEffectSpec& spec) const;
    Eigen::Matrix2d random_effect_cov() const;
    /// beta0, beta_free, beta_constrained stacked.
    Eigen::VectorXd coefficients() const;
    void set_coefficients(const Eigen::VectorXd& beta, const SplineEffectSpec& spec);
};

/// Damage rate contributed by all channels at covariate values x.
double damage_rate(const std::array<double, kChannels>& x, const PathParams& params, const SplineEffectSpec& spec);

/// Fixed-effect path D at epoch t of a unit.
double cumulative_damage(double t, const DegradationUnitRecord& unit, const PathParams& params,
                         const SplineEffectSpec& spec);

/// Fixed-effect design rows of a unit at its measurement epochs:
/// columns are [intercept, free..., constrained...].
Eigen::MatrixXd design_matrix(const DegradationUnitRecord& unit, const SplineEffectSpec& spec);

/// Marginal Gaussian log-likelihood with the random effects integrated out.
double path_loglik(const PathParams& params, std::span<const DegradationUnitRecord> data,
                   const SplineEffectSpec& spec);

struct FitOptions {
    int max_iterations = 200;
    double tolerance = 1e-6;
};

struct FitReport {
    int iterations = 0;
    bool converged = false;
    /// -2 log-likelihood after each outer iteration.
    std::vector<double> objective_trace;
    double loglik = 0.0;
};

struct DegradationFit {
    PathParams params;
    SplineEffectSpec spec;
    FitReport report;
};

DegradationFit fit_degradation(std::span<const DegradationUnitRecord> data, const SplineEffectSpec& spec,
                               const FitOptions& options = {});

/// Best linear unbiased predictions of the random effects.
std::vector<Eigen::Vector2d> predict_random_effects(const DegradationFit& fit,
                                                    std::span<const DegradationUnitRecord> data);

struct CoefficientInterval {
    std::string name;
    double estimate = 0.0;
    double lower = 0.0;
    double upper = 0.0;
};

struct BootstrapResult {
    std::vector<PathParams> replicates;
    std::vector<CoefficientInterval> intervals;
    /// Scale factors applied to the predicted random effects and residuals.
    Eigen::Matrix2d effect_scale = Eigen::Matrix2d::Identity();
    double residual_scale = 1.0;
    bool few_resamples = false;
};

BootstrapResult bootstrap_degradation(std::span<const DegradationUnitRecord> data, const DegradationFit& fit,
                                      std::size_t resamples, double level, const Rng& stream,
                                      const FitOptions& options = {});

/// Names of the entries of PathParams in the order used by intervals.
std::vector<std::string> parameter_names(const SplineEffectSpec& spec);
std::vector<double> parameter_vector(const PathParams& p);

/// Bias-corrected percentile interval.
std::pair<double, double> bc_percentile(std::vector<double> replicates, double estimate, double level);

// ---- covariate process ----

struct CovariateProcessParams {
    std::array<double, kChannels> mu{};
    std::array<double, kChannels> kappa{};
    std::array<double, kChannels> eta{};
    /// Variance-seasonality terms; the third channel has none.
    std::array<double, 2> nu{};
    std::array<double, 2> varsigma{};
    Eigen::Matrix3d Q1 = Eigen::Matrix3d::Zero();
    Eigen::Matrix3d Q2 = Eigen::Matrix3d::Zero();
    Eigen::Matrix3d Sigma_e = Eigen::Matrix3d::Identity();

    void validate() const;
    double spectral_radius() const;
    double seasonal_mean(std::size_t channel, double day) const;
    double volatility(std::size_t channel, double day) const;
};

struct CovariateProcessFit {
    CovariateProcessParams params;
    /// Standard errors of vec([Q1 Q2]) (row-major over the 3x6 block).
    Eigen::Matrix<double, 3, 6> var_se = Eigen::Matrix<double, 3, 6>::Zero();
    /// Standard errors of (mu, kappa, eta) per channel from the first step.
    std::array<std::array<double, 3>, kChannels> seasonal_se{};
    std::size_t days = 0;
};

/// Daily series indexed by calendar day first_day, first_day+1, ...
struct DailySeries {
    int first_day = 1;
    std::vector<std::array<double, kChannels>> values;
};

CovariateProcessFit fit_covariate_process(const DailySeries& series);

/// Daily values for calendar days start_day+1 ... start_day+days.
DailySeries simulate_covariate_process(const CovariateProcessParams& params, std::size_t days, Rng& rng,
                                       int start_day = 0, std::size_t burn_in = 100);

/// Pools unit covariate slices into one calendar series; all units must agree
/// where they overlap and the union must be contiguous.
DailySeries calendar_series(std::span<const DegradationUnitRecord> data);

// ---- failure prediction ----

struct FailureSpec {
    double threshold = -0.4;
    double horizon = 1000.0;
    double grid_step = 1.0;

    void validate() const;
};

/// First crossing of the threshold by a path tabulated at 0, step, 2 step, ...
std::optional<double> failure_time_of_path(std::span<const double> path, const FailureSpec& spec);

struct FailureCdf {
    std::vector<double> grid;
    std::vector<double> cdf;
    std::vector<double> lower;
    std::vector<double> upper;
    /// Simulated failure times at the point estimate; censored units omitted.
    std::vector<double> failure_times;
    std::size_t censored = 0;
    bool few_draws = false;
    bool few_resamples = false;
};

struct FailureMcOptions {
    std::size_t draws = 200;
    int start_min = 161;
    int start_max = 190;
    double level = 0.95;
};

FailureCdf failure_cdf_mc(const DegradationFit& fit, const CovariateProcessParams& covariate_params,
                          std::span<const PathParams> replicates, const FailureSpec& spec,
                          std::span<const double> grid, const Rng& stream, const FailureMcOptions& options = {});

/// Simulated failure times of `draws` random units under one parameter set.
std::vector<std::optional<double>> simulate_failure_times(const PathParams& params, const SplineEffectSpec& spec,
                                                          const CovariateProcessParams& covariate_params,
                                                          const FailureSpec& failure, const Rng& stream,
                                                          const FailureMcOptions& options);

/// Intersection over union of two intervals.
double interval_overlap(double a_lo, double a_hi, double b_lo, double b_hi);

}  // namespace relikit::degradation
