#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace relikit {

/// MCMC output: one row per retained draw.
struct PosteriorDraws {
    std::vector<std::string> names;
    Eigen::MatrixXd values;
    std::vector<int> chain;
    std::vector<int> iteration;
    /// Acceptance rate per parameter over the retained iterations.
    std::vector<double> acceptance;
    /// Optional per-unit latent effects, same row order as values.
    Eigen::MatrixXd effects;

    std::size_t size() const { return static_cast<std::size_t>(values.rows()); }
    std::size_t column(const std::string& name) const;
    std::vector<double> draws_of(const std::string& name) const;
    /// Draws of one parameter split by chain, for convergence diagnostics.
    std::vector<std::vector<double>> by_chain(const std::string& name) const;
};

}  // namespace relikit
