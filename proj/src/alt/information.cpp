#include <cmath>
#include <limits>
#include <stdexcept>

#include "relikit/alt/alt.hpp"
#include "relikit/numeric.hpp"

namespace relikit::alt {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kNodes = 128;

// Support of the standardized density that carries all but negligible mass.
std::pair<double, double> support(dist::StdKind kind)
{
    if (kind == dist::StdKind::SEV) return {-25.0, 3.5};
    return {-10.0, 10.0};
}

}  // namespace

Eigen::Matrix2d location_scale_information(double z_censor, double nu, dist::StdKind kind)
{
    if (!(nu > 0.0)) throw std::invalid_argument("nu must be positive");
    const auto [lo, hi_support] = support(kind);
    const double hi = std::min(z_censor, hi_support);
    Eigen::Matrix2d info = Eigen::Matrix2d::Zero();
    if (hi > lo) {
        const auto& gl = numeric::gauss_legendre(kNodes);
        const double half = 0.5 * (hi - lo), mid = 0.5 * (hi + lo);
        for (int i = 0; i < kNodes; ++i) {
            const double z = mid + half * gl.nodes[i];
            const double g = dist::dlog_std_pdf(z, kind);
            const Eigen::Vector2d s(-g, -(1.0 + z * g));
            info += (gl.weights[i] * half * dist::std_pdf(z, kind)) * (s * s.transpose());
        }
    }
    if (std::isfinite(z_censor)) {
        const double surv = dist::std_survival(z_censor, kind);
        if (surv > 0.0) {
            const double h = dist::std_pdf(z_censor, kind) / surv;
            const Eigen::Vector2d s(h, z_censor * h);
            info += surv * (s * s.transpose());
        }
    }
    return info / (nu * nu);
}

Eigen::Matrix3d unit_information(const AltParams& params, double q, const MaterialTestConfig& config)
{
    const double mu = mu_model(q, params.A, params.B, config);
    const double zc = (std::log(config.censor_cycles) - mu) / params.nu;
    const Eigen::Matrix2d ls = location_scale_information(zc, params.nu, config.kind);
    const Eigen::Vector2d dmu = mu_gradient(q, params.A, params.B, config);
    Eigen::Matrix<double, 2, 3> jac = Eigen::Matrix<double, 2, 3>::Zero();
    jac(0, 0) = dmu[0];
    jac(0, 1) = dmu[1];
    jac(1, 2) = 1.0;
    return jac.transpose() * ls * jac;
}

Eigen::Matrix3d fim(const AltParams& params, std::span<const double> design, const MaterialTestConfig& config)
{
    if (design.empty()) throw std::invalid_argument("design is empty");
    Eigen::Matrix3d info = Eigen::Matrix3d::Zero();
    for (double q : design) info += unit_information(params, q, config);
    return info;
}

Eigen::Vector3d c_vector(double u, double p, const AltParams& params, const MaterialTestConfig& config)
{
    const Eigen::Vector2d d = mu_gradient(u, params.A, params.B, config);
    return {d[0], d[1], dist::std_quantile(p, config.kind)};
}

AvarResult weighted_avar_info(const Eigen::Matrix3d& info, const AltParams& params, const UseProfile& profile,
                              double p, const MaterialTestConfig& config)
{
    AvarResult out;
    Eigen::Matrix3d m = 0.5 * (info + info.transpose());
    const double trace = m.trace();
    if (!(trace > 0.0) || !m.allFinite()) {
        out.value = kInf;
        out.singular = true;
        return out;
    }
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(m, Eigen::EigenvaluesOnly);
    const double emin = eig.eigenvalues()[0], emax = eig.eigenvalues()[2];
    if (!(emin > 0.0) || emax / emin > 1e12) {
        m += 1e-10 * trace * Eigen::Matrix3d::Identity();
        out.guarded = true;
    }
    const Eigen::LLT<Eigen::Matrix3d> llt(m);
    if (llt.info() != Eigen::Success) {
        out.value = kInf;
        out.singular = true;
        return out;
    }
    double total = 0.0;
    for (std::size_t k = 0; k < profile.levels.size(); ++k) {
        const Eigen::Vector3d c = c_vector(profile.levels[k], p, params, config);
        total += profile.weights[k] * c.dot(llt.solve(c));
    }
    out.value = std::isfinite(total) ? total : kInf;
    out.singular = !std::isfinite(total);
    return out;
}

AvarResult weighted_avar(const AltParams& params, std::span<const double> design, const UseProfile& profile,
                         double p, const MaterialTestConfig& config)
{
    return weighted_avar_info(fim(params, design, config), params, profile, p, config);
}

}  // namespace relikit::alt
