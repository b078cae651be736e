#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "relikit/dist.hpp"
#include "relikit/posterior.hpp"
#include "relikit/rng.hpp"

namespace relikit::alt {

struct MaterialTestConfig {
    double sigma_ult = 1339.67;
    double R = 0.1;
    double freq = 2.0;
    double alpha_angle = 0.0;
    double censor_cycles = 2e6;
    double q_lower = 0.35;
    double q_upper = 0.75;
    std::vector<double> grid{0.35, 0.40, 0.45, 0.50, 0.55, 0.60, 0.65, 0.70, 0.75};
    dist::StdKind kind = dist::StdKind::NORMAL;

    void validate() const;
    double psi() const;
    double gamma() const;
};

struct AltParams {
    double A = 0.0;
    double B = 1.0;
    double nu = 1.0;

    void validate() const;
};

/// One test unit. `censored` follows the ALT convention: true when the run was
/// stopped before failure.
struct AltTestDatum {
    double q = 0.5;
    double cycles = 1.0;
    bool censored = false;

    void validate() const;
};

struct UseProfile {
    std::vector<double> levels{0.20, 0.25, 0.30};
    std::vector<double> weights{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};

    void validate() const;
};

struct AltPriors {
    double mu_A = 0.08;
    double var_A = 0.0008;
    double mu_B = 1.0;
    double var_B = 0.0833;
    double kappa_ig = 4.5;
    double gamma_ig = 3.0;

    void validate() const;
};

/// Location of log cycles at standardized stress q.
double mu_model(double q, double A, double B, const MaterialTestConfig& config);
/// Analytic partial derivatives of mu_model with respect to (A, B).
Eigen::Vector2d mu_gradient(double q, double A, double B, const MaterialTestConfig& config);

double log_quantile(double p, double u, const AltParams& params, const MaterialTestConfig& config);

double alt_loglik(const AltParams& params, std::span<const AltTestDatum> data, const MaterialTestConfig& config);

/// Expected information of one unit at stress q for (mu, nu), Type-I censored.
Eigen::Matrix2d location_scale_information(double z_censor, double nu, dist::StdKind kind);
/// Expected information of one unit at stress q for (A, B, nu).
Eigen::Matrix3d unit_information(const AltParams& params, double q, const MaterialTestConfig& config);
Eigen::Matrix3d fim(const AltParams& params, std::span<const double> design, const MaterialTestConfig& config);

Eigen::Vector3d c_vector(double u, double p, const AltParams& params, const MaterialTestConfig& config);

struct AvarResult {
    double value = 0.0;
    /// Ridge added because the information was ill-conditioned.
    bool guarded = false;
    bool singular = false;
};

/// Sum_k w_k c_k' I^{-1} c_k for a given information matrix.
AvarResult weighted_avar_info(const Eigen::Matrix3d& info, const AltParams& params, const UseProfile& profile,
                              double p, const MaterialTestConfig& config);
AvarResult weighted_avar(const AltParams& params, std::span<const double> design, const UseProfile& profile,
                         double p, const MaterialTestConfig& config);

struct SamplerOptions {
    std::size_t burn_in = 2000;
    std::size_t draws = 4000;
    double target_acceptance = 0.3;
    std::size_t chain = 0;
};

/// Random-walk Metropolis over (log A, B, log nu) with B > 0. The proposal
/// covariance is learned during burn-in and then frozen.
PosteriorDraws posterior_sample(const AltPriors& priors, std::span<const AltTestDatum> data,
                                const MaterialTestConfig& config, const Rng& stream,
                                const SamplerOptions& options = {});
double log_posterior(const AltParams& params, const AltPriors& priors, std::span<const AltTestDatum> data,
                     const MaterialTestConfig& config);

AltParams params_from_row(const PosteriorDraws& draws, std::size_t row);

/// Posterior mean of the weighted avar after adding one unit at q_new.
double sbd_objective(double q_new, const PosteriorDraws& draws, std::span<const double> design,
                     const UseProfile& profile, double p, const MaterialTestConfig& config);
/// Objective over the whole grid, sharing the information of the current design.
std::vector<double> sbd_objective_grid(std::span<const double> grid, const PosteriorDraws& draws,
                                       std::span<const double> design, const UseProfile& profile, double p,
                                       const MaterialTestConfig& config);

struct Allocation {
    std::vector<double> grid;
    std::vector<int> counts;
    double avar = 0.0;
};

/// Greedy sequential allocation of n_units on top of an optional base design.
Allocation local_c_optimal(const AltParams& planning, std::span<const double> grid, int n_units,
                           const UseProfile& profile, double p, const MaterialTestConfig& config,
                           std::span<const double> base_design = {});
/// Exhaustive search over all integer allocations; for checking the greedy rule.
Allocation exact_c_optimal(const AltParams& planning, std::span<const double> grid, int n_units,
                           const UseProfile& profile, double p, const MaterialTestConfig& config,
                           std::span<const double> base_design = {});

struct MlFit {
    AltParams params;
    double loglik = 0.0;
    bool converged = false;
};

MlFit fit_alt_ml(std::span<const AltTestDatum> data, const MaterialTestConfig& config);

AltTestDatum simulate_test(double q, const AltParams& truth, const MaterialTestConfig& config, Rng& rng);

// ---- campaign ----

struct Proposal {
    int round = 0;
    double q = 0.0;
    double objective = 0.0;
    std::vector<double> objective_trace;
};

struct AltCampaignState {
    std::string id;
    MaterialTestConfig config;
    AltPriors priors;
    UseProfile profile;
    double p = 0.1;
    std::uint64_t seed = 1;
    SamplerOptions sampler;
    std::vector<AltTestDatum> data;
    /// Number of leading entries of data that were supplied at creation.
    std::size_t historical = 0;
    std::vector<Proposal> proposals;
    long version = 0;
    long data_version = 0;

    struct Cache {
        PosteriorDraws draws;
        long data_version = -1;
    };
    std::optional<Cache> posterior;

    bool cache_fresh() const { return posterior && posterior->data_version == data_version; }
    std::vector<double> design() const;
};

/// Draws for the current data, recomputed when stale. Deterministic in
/// (seed, data version).
const PosteriorDraws& ensure_posterior(AltCampaignState& state);

/// Minimizes the objective over the grid (ties to the lowest q) and logs it.
Proposal propose_next(AltCampaignState& state);

/// Appends a datum; returns true when q matches the latest proposal.
bool record_result(AltCampaignState& state, double q, double cycles, bool censored);

struct CampaignRound {
    int round = 0;
    double q = 0.0;
    AltTestDatum datum;
    double objective = 0.0;
};

struct CampaignTrace {
    std::vector<AltTestDatum> history;
    std::vector<CampaignRound> rounds;
    std::vector<double> avar_path;
    MlFit final_fit;
    /// Weighted avar of the final design at the final ML estimate.
    double final_avar = 0.0;
};

struct CampaignSimOptions {
    UseProfile profile;
    double p = 0.1;
    SamplerOptions sampler;
    std::vector<double> historical_stress{621.0, 690.0, 965.0};
};

/// Historical failures at the configured stresses simulated from the truth.
std::vector<AltTestDatum> simulate_history(const AltParams& truth, const MaterialTestConfig& config,
                                           std::span<const double> stresses, Rng& rng);

CampaignTrace run_campaign_sim(const AltParams& truth, const AltPriors& priors, const MaterialTestConfig& config,
                               int n_new, const Rng& stream, const CampaignSimOptions& options = {},
                               std::optional<std::vector<AltTestDatum>> history = std::nullopt);

struct LocalDesignTrace {
    std::vector<AltTestDatum> history;
    MlFit planning_fit;
    Allocation allocation;
    std::vector<AltTestDatum> data;
    MlFit final_fit;
    double final_avar = 0.0;
};

/// Comparator: plan at the ML estimate of the history, run the plan, refit.
LocalDesignTrace run_local_design_sim(const AltParams& truth, const MaterialTestConfig& config, int n_new,
                                      const Rng& stream, const CampaignSimOptions& options,
                                      const std::vector<AltTestDatum>& history);

}  // namespace relikit::alt
