#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "relikit/dist.hpp"
#include "relikit/rng.hpp"

/// Cumulative-exposure failure-time model with a dynamic use-rate covariate.
///
/// A unit fails when its cumulative exposure u(t) = int_0^t exp(beta x(s)) ds
/// reaches a random threshold U with log-location-scale distribution
/// (mu0, sigma0). The covariate x(t) = log(R(t) / R0) follows a linear mixed
/// model in log time.
namespace relikit::lifetime {

/// Discretely observed covariate x(t). The value recorded at epoch t_k applies
/// to the interval (t_{k-1}, t_k] (with t_0 = 0); after the last epoch the last
/// value is carried forward.
struct UseRateSeries {
    std::vector<double> times;
    std::vector<double> values;
    double baseline_rate = 1.0;
    /// Raw use rates when the series was built from them; empty otherwise.
    std::vector<double> rates;

    void validate() const;
    bool empty() const { return times.empty(); }
    /// Covariate value in effect at time t.
    double value_at(double t) const;

    /// Builds x = log(R / R0) from raw use rates.
    static UseRateSeries from_rates(std::vector<double> times, std::span<const double> rates,
                                    double baseline_rate);
};

struct LifetimeUnitRecord {
    std::string unit_id;
    double event_time = 0.0;
    bool failed = false;
    UseRateSeries covariates;

    void validate() const;
};

struct LifetimeParams {
    double mu0 = 0.0;
    double sigma0 = 1.0;
    double beta = 0.0;

    void validate() const;
    Eigen::Vector3d as_vector() const { return {mu0, sigma0, beta}; }
    static LifetimeParams from_vector(const Eigen::Vector3d& v) { return {v[0], v[1], v[2]}; }
};

/// Parameters of x_ij = eta + [1, log t_ij] w_i + eps_ij.
struct CovariateLmeParams {
    double eta = 0.0;
    double sigma1 = 0.1;  ///< sd of the random intercept
    double sigma2 = 0.1;  ///< sd of the random log-time slope
    double rho = 0.0;
    double sigma_eps = 0.1;

    /// Fitted models need strictly positive scales; simulation also accepts zeros.
    void validate(bool allow_degenerate = false) const;
    Eigen::Matrix2d random_effect_cov() const;
    Eigen::Matrix<double, 5, 1> as_vector() const { return {eta, sigma1, sigma2, rho, sigma_eps}; }
    static CovariateLmeParams from_vector(const Eigen::Matrix<double, 5, 1>& v)
    {
        return {v[0], v[1], v[2], v[3], v[4]};
    }
};

struct LifetimeFit {
    LifetimeParams params;
    dist::StdKind kind = dist::StdKind::SEV;
    /// Covariance of (mu0, sigma0, beta) from the inverse observed information.
    Eigen::Matrix3d covariance = Eigen::Matrix3d::Zero();
    double loglik = 0.0;
    int iterations = 0;
};

struct CovariateFit {
    CovariateLmeParams params;
    /// Covariance of (eta, sigma1, sigma2, rho, sigma_eps).
    Eigen::Matrix<double, 5, 5> covariance = Eigen::Matrix<double, 5, 5>::Zero();
    double loglik = 0.0;
    int iterations = 0;
};

/// Raised when an optimizer stops without meeting its convergence test.
class FitError : public std::runtime_error {
  public:
    FitError(const std::string& what, Eigen::VectorXd last_iterate)
        : std::runtime_error(what), last_iterate_(std::move(last_iterate))
    {
    }
    const Eigen::VectorXd& last_iterate() const { return last_iterate_; }

  private:
    Eigen::VectorXd last_iterate_;
};

// ---------------------------------------------------------------- exposure

/// Cumulative exposure tabulated at the epochs of a step covariate path.
/// Exposure is linear between epochs and extends at the last rate.
class ExposureCurve {
  public:
    ExposureCurve() = default;
    ExposureCurve(std::span<const double> times, std::span<const double> values, double beta);

    double at(double t) const;
    /// Smallest t with at(t) >= u.
    double inverse(double u) const;
    double rate_at(double t) const;

  private:
    std::vector<double> times_;
    std::vector<double> cumulative_;
    std::vector<double> rates_;
};

double exposure(double t, double beta, const UseRateSeries& covariates);

double lifetime_cdf(double t, const LifetimeParams& params, const UseRateSeries& covariates,
                    dist::StdKind kind);

/// Failure-time log-likelihood over all units.
double lifetime_loglik(const LifetimeParams& params, std::span<const LifetimeUnitRecord> data,
                       dist::StdKind kind);

struct FitOptions {
    int starts = 5;
    int max_iterations = 400;
    /// When set, beta is held at this value (reduces to a plain log-location-scale fit).
    std::optional<double> fixed_beta;
};

LifetimeFit fit_lifetime(std::span<const LifetimeUnitRecord> data, dist::StdKind kind,
                         const FitOptions& options = {});

// ---------------------------------------------------------------- covariate model

/// Marginal log-likelihood of the covariate mixed model, random effects
/// integrated out in closed form.
double covariate_loglik(const CovariateLmeParams& params, std::span<const UseRateSeries> data);

CovariateFit fit_covariate(std::span<const UseRateSeries> data, const FitOptions& options = {});

/// Gaussian conditional law of a unit's future covariate values given its
/// observed series, obtained through the posterior of the random effects.
class ConditionalCovariate {
  public:
    ConditionalCovariate(const CovariateLmeParams& params, const UseRateSeries& observed);

    const Eigen::Vector2d& effect_mean() const { return mean_; }
    const Eigen::Matrix2d& effect_cov() const { return cov_; }

    /// Conditional mean of x at a future epoch.
    double mean_at(double t) const;
    /// One joint draw at the given epochs.
    std::vector<double> draw(std::span<const double> epochs, Rng& rng) const;
    /// Random-effect draw; values then follow as eta + w0 + w1 log t + noise.
    Eigen::Vector2d draw_effects(Rng& rng) const;
    double value_given_effects(const Eigen::Vector2d& w, double t, Rng& rng) const;

  private:
    CovariateLmeParams params_;
    Eigen::Vector2d mean_;
    Eigen::Matrix2d cov_;
    Eigen::Matrix2d factor_;
};

std::vector<double> simulate_covariate_conditional(const CovariateLmeParams& params,
                                                   const UseRateSeries& observed,
                                                   std::span<const double> future_epochs, Rng& rng);

// ---------------------------------------------------------------- remaining life

struct DrlOptions {
    std::size_t draws = 200;
    /// Spacing of simulated future covariate epochs (weeks).
    double step = 1.0;
};

/// Monte Carlo estimate of P(t_i < T <= t_i + s | T > t_i, history) at each
/// horizon. All horizons share the same covariate draws, so the curve is
/// nondecreasing. Draw m uses stream.substream(m).
std::vector<double> drl_curve(const LifetimeUnitRecord& unit, std::span<const double> horizons,
                              const LifetimeParams& theta_t, const CovariateLmeParams& theta_x,
                              dist::StdKind kind, const Rng& stream, const DrlOptions& options = {});

double drl_estimate(const LifetimeUnitRecord& unit, double s, const LifetimeParams& theta_t,
                    const CovariateLmeParams& theta_x, dist::StdKind kind, const Rng& stream,
                    const DrlOptions& options = {});

struct Interval {
    double lower = 0.0;
    double upper = 0.0;
};

/// Draws one parameter set from the asymptotic normal law of both fits.
/// Invalid draws (nonpositive scales, |rho| >= 1) are rejected and redrawn.
std::pair<LifetimeParams, CovariateLmeParams> draw_parameters(const LifetimeFit& fit_t,
                                                              const CovariateFit& fit_x, Rng& rng);

/// Parametric-bootstrap percentile interval for rho_i(s). Replicate b draws its
/// parameters from stream.substream(b) and reuses the covariate draws of the
/// point estimate.
Interval drl_ci(const LifetimeUnitRecord& unit, double s, const LifetimeFit& fit_t,
                const CovariateFit& fit_x, std::size_t resamples, double alpha, const Rng& stream,
                const DrlOptions& options = {});

struct RemainingLifeInterval {
    double lower = 0.0;
    double upper = 0.0;
    /// True when rho never reaches the upper calibration level within the search bound.
    bool upper_open = false;
    double v_lower = 0.0;
    double v_upper = 0.0;
};

struct PiOptions {
    DrlOptions drl;
    std::size_t calibration_draws = 200;
    /// Search bound for the remaining life, usually 20 times the observation window.
    /// Defaults to 20 times the unit's own time in service.
    std::optional<double> search_bound;
    double tolerance = 1e-3;
};

/// Calibrated prediction interval of the remaining life: solves
/// rho_i(S_lower) = v_{alpha/2} and rho_i(S_upper) = v_{1-alpha/2}, where the v's
/// are quantiles of rho_i(S_i) with S_i simulated from the fitted model under
/// parameters drawn from their sampling distribution.
RemainingLifeInterval remaining_life_pi(const LifetimeUnitRecord& unit, const LifetimeFit& fit_t,
                                        const CovariateFit& fit_x, double alpha, const Rng& stream,
                                        const PiOptions& options = {});

struct RemainingLifeEstimate {
    double horizon = 0.0;
    double rho_hat = 0.0;
    Interval ci;
    RemainingLifeInterval pi;
    std::size_t draws = 0;
    std::size_t resamples = 0;
};

// ---------------------------------------------------------------- fleet counts

/// Exact Poisson-binomial pmf by sequential convolution.
std::vector<double> poisson_binomial_pmf(std::span<const double> rhos);
/// Same pmf through the discrete Fourier transform of the characteristic function.
std::vector<double> poisson_binomial_pmf_dft(std::span<const double> rhos);
double fleet_count_cdf(std::span<const double> rhos, std::size_t n_k);

struct FleetPrediction {
    std::size_t risk_set_size = 0;
    std::vector<double> horizons;
    std::vector<double> expected;
    std::vector<Interval> interval;
    /// count_cdf[h][k] = P(N(horizons[h]) <= k) at the point estimate.
    std::vector<std::vector<double>> count_cdf;
};

struct FleetOptions {
    DrlOptions drl;
    std::size_t resamples = 50;
};

FleetPrediction fleet_prediction(std::span<const LifetimeUnitRecord> data, const LifetimeFit& fit_t,
                                 const CovariateFit& fit_x, std::span<const double> horizons,
                                 double alpha, const Rng& stream, const FleetOptions& options = {});

}  // namespace relikit::lifetime
