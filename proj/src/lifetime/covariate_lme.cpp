#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "relikit/lifetime/lifetime.hpp"
#include "relikit/numeric.hpp"

namespace relikit::lifetime {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Per-unit sufficient statistics of the covariate mixed model.
struct UnitStats {
    double n = 0.0;
    double sum_x = 0.0;
    double sum_xx = 0.0;
    Eigen::Vector2d zx = Eigen::Vector2d::Zero();
    Eigen::Vector2d z1 = Eigen::Vector2d::Zero();
    Eigen::Matrix2d zz = Eigen::Matrix2d::Zero();
};

UnitStats make_stats(const UseRateSeries& s)
{
    s.validate();
    UnitStats u;
    for (std::size_t j = 0; j < s.times.size(); ++j) {
        const Eigen::Vector2d z(1.0, std::log(s.times[j]));
        const double x = s.values[j];
        u.n += 1.0;
        u.sum_x += x;
        u.sum_xx += x * x;
        u.zx += z * x;
        u.z1 += z;
        u.zz += z * z.transpose();
    }
    return u;
}

double unit_loglik(const UnitStats& u, double eta, const Eigen::Matrix2d& sigma_w, double s2)
{
    const double rr = u.sum_xx - 2.0 * eta * u.sum_x + u.n * eta * eta;
    const Eigen::Vector2d zr = u.zx - eta * u.z1;
    const Eigen::Matrix2d M = Eigen::Matrix2d::Identity() + sigma_w * u.zz / s2;
    const double det_m = M.determinant();
    if (!(det_m > 0.0)) return -kInf;
    const double quad = (rr - zr.dot(M.inverse() * sigma_w * zr) / s2) / s2;
    const double logdet = u.n * std::log(s2) + std::log(det_m);
    return -0.5 * (u.n * std::log(2.0 * std::numbers::pi) + logdet + quad);
}

double total_loglik(const std::vector<UnitStats>& units, const CovariateLmeParams& p)
{
    const Eigen::Matrix2d sw = p.random_effect_cov();
    const double s2 = p.sigma_eps * p.sigma_eps;
    double ll = 0.0;
    for (const auto& u : units) ll += unit_loglik(u, p.eta, sw, s2);
    return ll;
}

}  // namespace

void CovariateLmeParams::validate(bool allow_degenerate) const
{
    if (!std::isfinite(eta)) throw std::invalid_argument("eta must be finite");
    const bool ok = allow_degenerate ? (sigma1 >= 0.0 && sigma2 >= 0.0 && sigma_eps >= 0.0)
                                     : (sigma1 > 0.0 && sigma2 > 0.0 && sigma_eps > 0.0);
    if (!ok) throw std::invalid_argument("covariate model standard deviations must be positive");
    if (!(rho > -1.0 && rho < 1.0)) throw std::invalid_argument("rho must lie in (-1, 1)");
}

Eigen::Matrix2d CovariateLmeParams::random_effect_cov() const
{
    Eigen::Matrix2d m;
    m << sigma1 * sigma1, rho * sigma1 * sigma2, rho * sigma1 * sigma2, sigma2 * sigma2;
    return m;
}

double covariate_loglik(const CovariateLmeParams& params, std::span<const UseRateSeries> data)
{
    params.validate();
    std::vector<UnitStats> units;
    units.reserve(data.size());
    for (const auto& s : data) units.push_back(make_stats(s));
    return total_loglik(units, params);
}

CovariateFit fit_covariate(std::span<const UseRateSeries> data, const FitOptions& options)
{
    if (data.empty()) throw std::invalid_argument("no covariate series");
    std::vector<UnitStats> units;
    units.reserve(data.size());
    bool identified = false;
    double total_n = 0.0, total_x = 0.0, total_xx = 0.0;
    for (const auto& s : data) {
        units.push_back(make_stats(s));
        const auto& u = units.back();
        if (u.n >= 2.0 && u.zz.determinant() > 1e-12 * u.n * u.n) identified = true;
        total_n += u.n;
        total_x += u.sum_x;
        total_xx += u.sum_xx;
    }
    if (!identified) throw std::invalid_argument("singular covariate design: no unit has two distinct epochs");

    const double grand_mean = total_x / total_n;
    const double total_sd = std::sqrt(std::max(total_xx / total_n - grand_mean * grand_mean, 1e-12));

    // Transformed parameters: eta, log sigma1, log sigma2, atanh rho, log sigma_eps.
    auto unpack = [](const Eigen::VectorXd& x) {
        CovariateLmeParams p;
        p.eta = x[0];
        p.sigma1 = std::exp(x[1]);
        p.sigma2 = std::exp(x[2]);
        p.rho = std::tanh(x[3]);
        p.sigma_eps = std::exp(x[4]);
        return p;
    };
    const numeric::Objective f = [&](const Eigen::VectorXd& x) {
        for (int i : {1, 2, 4})
            if (x[i] < -25.0 || x[i] > 10.0) return kInf;
        if (std::abs(x[3]) > 12.0) return kInf;
        const double ll = total_loglik(units, unpack(x));
        return std::isfinite(ll) ? -ll : kInf;
    };

    numeric::MinimizeOptions mo;
    mo.max_iterations = options.max_iterations;
    mo.gradient_tolerance = 1e-6;
    const double ls = std::log(total_sd);
    const double start_scales[][3] = {{-1.0, -2.0, -1.0}, {0.0, -3.0, -2.0}, {-2.0, -1.0, 0.0},
                                      {-0.5, -0.5, -0.5}, {-3.0, -3.0, -3.0}};
    const double start_rho[] = {0.0, 0.5, -0.5, 0.0, 0.0};
    std::vector<Eigen::VectorXd> starts;
    for (int s = 0; s < std::max(1, options.starts); ++s) {
        Eigen::VectorXd x0(5);
        x0 << grand_mean, ls + start_scales[s % 5][0], ls + start_scales[s % 5][1], start_rho[s % 5],
            ls + start_scales[s % 5][2];
        starts.push_back(x0);
    }
    const auto best = numeric::minimize_multistart(f, starts, mo);
    if (!std::isfinite(best.value)) throw FitError("covariate fit failed: objective not finite", best.x);

    CovariateFit fit;
    fit.params = unpack(best.x);
    fit.loglik = -best.value;
    fit.iterations = best.iterations;

    const numeric::Objective natural = [&](const Eigen::VectorXd& v) {
        CovariateLmeParams p{v[0], v[1], v[2], v[3], v[4]};
        if (!(p.sigma1 > 0.0 && p.sigma2 > 0.0 && p.sigma_eps > 0.0 && std::abs(p.rho) < 1.0)) return kInf;
        return -total_loglik(units, p);
    };
    const Eigen::VectorXd at = fit.params.as_vector();
    const Eigen::MatrixXd H = numeric::numeric_hessian(natural, at);
    try {
        fit.covariance = numeric::spd_inverse(H);
    } catch (const std::runtime_error&) {
        // Boundary optimum (a variance component near zero): fall back to the
        // pseudo-inverse of the positive part of the information.
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (H + H.transpose()));
        Eigen::VectorXd inv = eig.eigenvalues();
        for (Eigen::Index i = 0; i < inv.size(); ++i) inv[i] = inv[i] > 1e-12 ? 1.0 / inv[i] : 0.0;
        fit.covariance = eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
    }
    return fit;
}

ConditionalCovariate::ConditionalCovariate(const CovariateLmeParams& params, const UseRateSeries& observed)
    : params_(params)
{
    params.validate(true);
    observed.validate();
    const Eigen::Matrix2d sw = params.random_effect_cov();
    const double s2 = params.sigma_eps * params.sigma_eps;
    const auto u = make_stats(observed);
    const Eigen::Vector2d zr = u.zx - params.eta * u.z1;
    if (sw.isZero(0.0)) {
        mean_.setZero();
        cov_.setZero();
    } else if (s2 > 0.0) {
        // w | x ~ N(M^-1 Sw Z'r / s2, M^-1 Sw) with M = I + Sw Z'Z / s2.
        const Eigen::Matrix2d M = Eigen::Matrix2d::Identity() + sw * u.zz / s2;
        const Eigen::Matrix2d Minv = M.inverse();
        mean_ = Minv * sw * zr / s2;
        cov_ = Minv * sw;
        cov_ = 0.5 * (cov_ + cov_.transpose());
    } else {
        // Noise-free observations: condition through the pseudo-inverse of Z Sw Z'.
        const auto n = static_cast<Eigen::Index>(observed.times.size());
        Eigen::MatrixXd Z(n, 2);
        Eigen::VectorXd r(n);
        for (Eigen::Index j = 0; j < n; ++j) {
            Z(j, 0) = 1.0;
            Z(j, 1) = std::log(observed.times[static_cast<std::size_t>(j)]);
            r[j] = observed.values[static_cast<std::size_t>(j)] - params.eta;
        }
        const Eigen::MatrixXd V = Z * sw * Z.transpose();
        const Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(V);
        const Eigen::MatrixXd K = sw * Z.transpose() * cod.pseudoInverse();
        mean_ = K * r;
        cov_ = sw - K * Z * sw;
        cov_ = 0.5 * (cov_ + cov_.transpose());
    }
    try {
        factor_ = numeric::psd_factor(cov_, 1e-9);
    } catch (const std::runtime_error&) {
        throw std::runtime_error("conditional covariance of the random effects is not positive semidefinite");
    }
}

double ConditionalCovariate::mean_at(double t) const
{
    return params_.eta + mean_[0] + mean_[1] * std::log(t);
}

Eigen::Vector2d ConditionalCovariate::draw_effects(Rng& rng) const
{
    const double z0 = rng.normal();
    const double z1 = rng.normal();
    return mean_ + factor_ * Eigen::Vector2d(z0, z1);
}

double ConditionalCovariate::value_given_effects(const Eigen::Vector2d& w, double t, Rng& rng) const
{
    if (!(t > 0.0)) throw std::invalid_argument("future epochs must be positive");
    return params_.eta + w[0] + w[1] * std::log(t) + params_.sigma_eps * rng.normal();
}

std::vector<double> ConditionalCovariate::draw(std::span<const double> epochs, Rng& rng) const
{
    const Eigen::Vector2d w = draw_effects(rng);
    std::vector<double> out(epochs.size());
    for (std::size_t k = 0; k < epochs.size(); ++k) out[k] = value_given_effects(w, epochs[k], rng);
    return out;
}

std::vector<double> simulate_covariate_conditional(const CovariateLmeParams& params, const UseRateSeries& observed,
                                                   std::span<const double> future_epochs, Rng& rng)
{
    for (double t : future_epochs) {
        if (!(t > observed.times.back())) throw std::invalid_argument("future epochs must follow the observed series");
    }
    return ConditionalCovariate(params, observed).draw(future_epochs, rng);
}

}  // namespace relikit::lifetime
