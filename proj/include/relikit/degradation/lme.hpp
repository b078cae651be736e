#pragma once

// Random intercept and slope model r = Z w + e with Z = [1, t], used on
// residuals of the fixed-effect path.

#include <span>
#include <vector>

#include <Eigen/Dense>

namespace relikit::degradation::lme {

struct UnitStats {
    double n = 0.0;
    Eigen::Matrix2d ZtZ = Eigen::Matrix2d::Zero();
    Eigen::Vector2d Ztr = Eigen::Vector2d::Zero();
    double rtr = 0.0;
};

struct VarianceComponents {
    double sigma0 = 0.0;
    double sigma1 = 0.0;
    double rho = 0.0;
    double sigma_eps = 1.0;

    Eigen::Matrix2d cov() const;
};

UnitStats unit_stats(const Eigen::Ref<const Eigen::VectorXd>& t, const Eigen::Ref<const Eigen::VectorXd>& r);

/// -2 log-likelihood without the 2 pi constant.
double neg2_loglik(std::span<const UnitStats> stats, const VarianceComponents& vc);

/// Maximizes the likelihood starting from `start`; the result never has a
/// larger objective than the start. Standard deviations are kept above `floor`.
VarianceComponents fit(std::span<const UnitStats> stats, const VarianceComponents& start, double floor,
                       int starts = 1);

/// Posterior mean of the random effects given the unit's residual statistics.
Eigen::Vector2d blup(const UnitStats& s, const VarianceComponents& vc);

}  // namespace relikit::degradation::lme
