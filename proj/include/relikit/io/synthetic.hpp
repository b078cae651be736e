#pragma once

#include <string>
#include <vector>

#include "relikit/io/datasets.hpp"

namespace relikit::io {

struct LifetimeScenario {
    std::size_t units = 1800;
    /// Units enter service uniformly over the study window and are observed
    /// until its end.
    double study_weeks = 70.0;
    lifetime::LifetimeParams truth{5.65, 0.5, 1.0};
    dist::StdKind kind = dist::StdKind::SEV;
    lifetime::CovariateLmeParams covariate{0.0, 0.3, 0.15, 0.3, 0.1};
    double baseline_rate = 1.0;
};

struct DegradationScenario {
    std::size_t units = 36;
    /// Units start in evenly spaced batches over this many days.
    int placement_days = 540;
    int observe_days = 200;
    int measure_every = 5;
    degradation::CovariateProcessParams weather = default_weather();
    double rate = -0.0024;
    /// Common value of each constrained coefficient, per channel.
    std::array<double, degradation::kChannels> channel_weight{0.0004, 0.0002, 0.0001};
    double rh_linear = -0.0003;
    double beta0 = 0.0;
    double sigma0 = 0.01;
    double sigma1 = 0.0009;
    double rho = -0.2;
    double sigma_eps = 0.005;

    static degradation::CovariateProcessParams default_weather();
};

struct RecurrentScenario {
    std::size_t units = 203;
    double tau = 110.0;
    mtrp::MtrpParams truth = default_truth();
    /// Monthly usage of unit i is a_i * usage_rate with log a_i ~ N(0, usage_log_sd^2).
    double usage_rate = 1.0;
    double usage_log_sd = 0.3;

    static mtrp::MtrpParams default_truth();
};

struct AltScenario {
    alt::MaterialTestConfig config;
    alt::AltParams truth{0.0157, 0.3188, 0.7259};
    std::vector<double> stress{469, 469, 469, 536, 536, 603, 621, 690, 737, 804, 871, 938, 965, 1005};
    /// When nonnegative, draws are repeated until exactly this many units fail.
    int failures = 11;
};

LifetimeScenario lifetime_scenario(const Json& j);
DegradationScenario degradation_scenario(const Json& j);
RecurrentScenario recurrent_scenario(const Json& j);
AltScenario alt_scenario(const Json& j);

LifetimeDataset simulate_lifetime(const LifetimeScenario& s, const Rng& stream);
/// Also returns the generating path parameters and spline spec.
DegradationDataset simulate_degradation(const DegradationScenario& s, const Rng& stream,
                                        degradation::DegradationFit* truth = nullptr);
RecurrentDataset simulate_recurrent(const RecurrentScenario& s, const Rng& stream);
AltDataset simulate_alt(const AltScenario& s, const Rng& stream);

struct GeneratedDataset {
    DatasetManifest manifest;
    Json summary;
    /// Table contents keyed by manifest role, as written to disk.
    std::map<std::string, std::string> tables;
};

/// Generates a dataset; writes the tables and manifest.json to out_dir when it
/// is nonempty.
GeneratedDataset generate_synthetic(DatasetKind kind, const Json& scenario, std::uint64_t seed,
                                    const std::string& out_dir);

}  // namespace relikit::io
