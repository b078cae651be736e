#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace relikit::numeric {

using Objective = std::function<double(const Eigen::VectorXd&)>;
/// Objective that also fills the gradient when `grad` is non-null.
using GradObjective = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd* grad)>;

struct MinimizeOptions {
    int max_iterations = 500;
    double gradient_tolerance = 1e-6;
    double value_tolerance = 1e-12;
    /// Relative step for central-difference gradients.
    double fd_step = 1e-5;
};

struct MinimizeResult {
    Eigen::VectorXd x;
    double value = 0.0;
    int iterations = 0;
    bool converged = false;
};

/// Quasi-Newton minimization with central-difference gradients and an Armijo
/// backtracking line search. Non-finite objective values are treated as +inf,
/// which lets callers encode hard parameter bounds.
MinimizeResult minimize_bfgs(const Objective& f, Eigen::VectorXd x0,
                             const MinimizeOptions& options = {});
MinimizeResult minimize_bfgs(const GradObjective& f, Eigen::VectorXd x0,
                             const MinimizeOptions& options = {});

MinimizeResult minimize_nelder_mead(const Objective& f, const Eigen::VectorXd& x0,
                                    double initial_step = 0.5, int max_evaluations = 4000,
                                    double tolerance = 1e-10);

/// Runs BFGS from every start and keeps the best finite optimum.
MinimizeResult minimize_multistart(const Objective& f, std::span<const Eigen::VectorXd> starts,
                                   const MinimizeOptions& options = {});

Eigen::VectorXd numeric_gradient(const Objective& f, const Eigen::VectorXd& x, double rel_step = 1e-5);
Eigen::MatrixXd numeric_hessian(const Objective& f, const Eigen::VectorXd& x, double rel_step = 1e-4);

/// Gauss-Legendre nodes and weights on [-1, 1].
struct Quadrature {
    std::vector<double> nodes;
    std::vector<double> weights;
};
const Quadrature& gauss_legendre(int n);

/// Bisection for a monotone function; returns the abscissa where f changes sign.
double bisect(const std::function<double(double)>& f, double lo, double hi, double tol,
              int max_iterations = 200);

/// Lawson-Hanson active-set solution of min ||A x - b|| subject to x >= 0.
Eigen::VectorXd nnls(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, int max_iterations = 0);

/// min ||A x - b|| with x_j >= 0 for the columns flagged in `constrained`; the
/// remaining columns are free. The free block is profiled out by projection.
Eigen::VectorXd partially_constrained_lsq(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                                          const std::vector<bool>& constrained);

/// Factor L with L L' = cov for a positive semidefinite matrix. Eigenvalues in
/// [-tol * trace, 0) are clamped to zero; anything more negative throws.
Eigen::MatrixXd psd_factor(const Eigen::MatrixXd& cov, double tol = 1e-10);

/// Inverse of a symmetric matrix; throws std::runtime_error when not positive definite.
Eigen::MatrixXd spd_inverse(const Eigen::MatrixXd& m);

/// Sample quantile (linear interpolation between order statistics, type 7).
double quantile(std::vector<double> values, double p);
double mean(std::span<const double> values);
double variance(std::span<const double> values);

/// Rounds half away from zero and clamps to [1, n]; returns a 1-based index.
std::size_t rounded_rank(double x, std::size_t n);

/// One-sample Kolmogorov-Smirnov statistic against a continuous cdf.
double ks_statistic(std::vector<double> sample, const std::function<double(double)>& cdf);
/// Asymptotic p-value of the KS statistic for sample size n.
double ks_pvalue(double d, std::size_t n);

/// Potential scale reduction factor for equally long chains of one parameter.
double gelman_rubin(const std::vector<std::vector<double>>& chains);

/// Calls fn(i) for i in [0, n). Work is spread over hardware threads; fn must
/// only touch per-index state.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace relikit::numeric
