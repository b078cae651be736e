#include "relikit/degradation/lme.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "relikit/numeric.hpp"

namespace relikit::degradation::lme {

Eigen::Matrix2d VarianceComponents::cov() const
{
    Eigen::Matrix2d S;
    S << sigma0 * sigma0, rho * sigma0 * sigma1, rho * sigma0 * sigma1, sigma1 * sigma1;
    return S;
}

UnitStats unit_stats(const Eigen::Ref<const Eigen::VectorXd>& t, const Eigen::Ref<const Eigen::VectorXd>& r)
{
    UnitStats s;
    s.n = static_cast<double>(t.size());
    s.ZtZ << s.n, t.sum(), t.sum(), t.squaredNorm();
    s.Ztr << r.sum(), t.dot(r);
    s.rtr = r.squaredNorm();
    return s;
}

double neg2_loglik(std::span<const UnitStats> stats, const VarianceComponents& vc)
{
    const double s2 = vc.sigma_eps * vc.sigma_eps;
    if (!(s2 > 0.0)) return std::numeric_limits<double>::infinity();
    const Eigen::Matrix2d S = vc.cov();
    double total = 0.0;
    for (const auto& u : stats) {
        // |V| = s2^n |I + S Z'Z / s2|, V^{-1} = (I - Z M^{-1} S Z' / s2) / s2.
        const Eigen::Matrix2d M = Eigen::Matrix2d::Identity() + S * u.ZtZ / s2;
        const double det = M.determinant();
        if (!(det > 0.0)) return std::numeric_limits<double>::infinity();
        const Eigen::Vector2d v = M.partialPivLu().solve(S * u.Ztr);
        const double quad = (u.rtr - u.Ztr.dot(v) / s2) / s2;
        // Negative quadratic forms only arise from cancellation in degenerate corners.
        if (!(quad >= 0.0)) return std::numeric_limits<double>::infinity();
        total += u.n * std::log(s2) + std::log(det) + quad;
    }
    return std::isfinite(total) ? total : std::numeric_limits<double>::infinity();
}

namespace {

Eigen::VectorXd encode(const VarianceComponents& vc, double floor)
{
    Eigen::VectorXd x(4);
    x << std::log(std::max(vc.sigma0, floor)), std::log(std::max(vc.sigma1, floor)),
        std::atanh(std::clamp(vc.rho, -0.999, 0.999)), std::log(std::max(vc.sigma_eps, floor));
    return x;
}

VarianceComponents decode(const Eigen::VectorXd& x, double floor)
{
    auto sd = [floor](double v) { return floor + std::exp(std::min(v, 700.0)); };
    return {sd(x[0]), sd(x[1]), std::tanh(x[2]), sd(x[3])};
}

}  // namespace

VarianceComponents fit(std::span<const UnitStats> stats, const VarianceComponents& start, double floor, int starts)
{
    auto f = [&](const Eigen::VectorXd& x) { return neg2_loglik(stats, decode(x, floor)); };
    VarianceComponents best = start;
    best.sigma0 = std::max(best.sigma0, floor);
    best.sigma1 = std::max(best.sigma1, floor);
    best.sigma_eps = std::max(best.sigma_eps, floor);
    double best_value = neg2_loglik(stats, best);
    std::vector<Eigen::VectorXd> inits{encode(best, floor)};
    for (int k = 1; k < starts; ++k) {
        Eigen::VectorXd x = inits.front();
        x[0] += (k % 2 ? 1.0 : -1.0);
        x[1] += (k % 3 ? -1.0 : 1.0);
        x[2] = (k % 2 ? 0.3 : -0.3);
        inits.push_back(x);
    }
    numeric::MinimizeOptions opt;
    opt.max_iterations = 300;
    for (const auto& x0 : inits) {
        const auto r = numeric::minimize_bfgs(f, x0, opt);
        if (r.value < best_value) {
            best_value = r.value;
            best = decode(r.x, floor);
        }
    }
    return best;
}

Eigen::Vector2d blup(const UnitStats& s, const VarianceComponents& vc)
{
    const double s2 = vc.sigma_eps * vc.sigma_eps;
    const Eigen::Matrix2d S = vc.cov();
    const Eigen::Matrix2d M = Eigen::Matrix2d::Identity() + S * s.ZtZ / s2;
    // E[w | r] = S Z' V^{-1} r = S (Z'r - Z'Z M^{-1} S Z'r / s2) / s2.
    const Eigen::Vector2d v = M.partialPivLu().solve(S * s.Ztr);
    return S * (s.Ztr - s.ZtZ * v / s2) / s2;
}

}  // namespace relikit::degradation::lme
