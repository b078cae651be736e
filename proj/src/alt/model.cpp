#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "relikit/alt/alt.hpp"
#include "relikit/numeric.hpp"

namespace relikit::alt {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double softplus(double x) { return x > 30.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }
double logistic(double x) { return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

// log(G - 1) for G = (B/A) h^B K + 1, K the stress-ratio term.
double log_excess(double q, double A, double B, const MaterialTestConfig& c)
{
    const double g = c.gamma();
    const double inv_q = 1.0 / q;
    const double log_k = std::log(inv_q - 1.0) + (g - 1.0) * std::log(inv_q) - g * std::log1p(-c.psi());
    return std::log(B / A) + B * std::log(c.freq) + log_k;
}

void check_q(double q)
{
    if (!(q > 0.0) || !std::isfinite(q)) throw std::domain_error("standardized stress must be positive");
}

}  // namespace

void MaterialTestConfig::validate() const
{
    if (!(sigma_ult > 0.0)) throw std::invalid_argument("sigma_ult must be positive");
    if (!(R >= 0.0) || R == 1.0) throw std::invalid_argument("stress ratio must be nonnegative and not 1");
    if (!(freq > 0.0)) throw std::invalid_argument("frequency must be positive");
    if (!std::isfinite(alpha_angle)) throw std::invalid_argument("angle must be finite");
    if (!(censor_cycles > 0.0)) throw std::invalid_argument("censor_cycles must be positive");
    if (!(q_lower > 0.0 && q_lower < q_upper && q_upper < 1.0)) throw std::invalid_argument("need 0 < q_lower < q_upper < 1");
    if (grid.empty()) throw std::invalid_argument("candidate grid is empty");
    for (double q : grid)
        if (!(q >= q_lower - 1e-12 && q <= q_upper + 1e-12))
            throw std::invalid_argument("candidate grid must lie within [q_lower, q_upper]");
}

double MaterialTestConfig::psi() const { return R < 1.0 ? R : 1.0 / R; }

double MaterialTestConfig::gamma() const { return 1.6 - psi() * std::abs(std::sin(alpha_angle)); }

void AltParams::validate() const
{
    if (!(A > 0.0) || !std::isfinite(A)) throw std::invalid_argument("A must be positive");
    if (B == 0.0 || !std::isfinite(B)) throw std::invalid_argument("B must be nonzero");
    if (!(nu > 0.0) || !std::isfinite(nu)) throw std::invalid_argument("nu must be positive");
}

void AltTestDatum::validate() const
{
    if (!(q > 0.0 && q < 1.0)) throw std::invalid_argument("q must lie in (0, 1)");
    if (!(cycles > 0.0) || !std::isfinite(cycles)) throw std::invalid_argument("cycles must be positive");
}

void UseProfile::validate() const
{
    if (levels.empty() || levels.size() != weights.size()) throw std::invalid_argument("use profile needs matching levels and weights");
    double total = 0.0;
    for (std::size_t k = 0; k < levels.size(); ++k) {
        if (!(levels[k] > 0.0 && levels[k] < 1.0)) throw std::invalid_argument("use levels must lie in (0, 1)");
        if (!(weights[k] > 0.0)) throw std::invalid_argument("use weights must be positive");
        total += weights[k];
    }
    if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("use weights must sum to 1");
}

void AltPriors::validate() const
{
    if (!(var_A > 0.0) || !(var_B > 0.0)) throw std::invalid_argument("prior variances must be positive");
    if (!(kappa_ig > 0.0) || !(gamma_ig > 0.0)) throw std::invalid_argument("inverse-gamma parameters must be positive");
    if (!std::isfinite(mu_A) || !std::isfinite(mu_B)) throw std::invalid_argument("prior means must be finite");
}

double mu_model(double q, double A, double B, const MaterialTestConfig& config)
{
    check_q(q);
    if (q >= 1.0) return 0.0;
    if (!(A > 0.0) || !(B > 0.0)) {
        if (B == 0.0 || A == 0.0) throw std::domain_error("A and B must be nonzero");
        // Opposite signs or both negative: evaluate the bracket directly.
        const double g = config.gamma();
        const double k = (1.0 / q - 1.0) * std::pow(1.0 / q, g - 1.0) * std::pow(1.0 - config.psi(), -g);
        const double bracket = (B / A) * std::pow(config.freq, B) * k + 1.0;
        if (!(bracket > 0.0)) throw std::domain_error("stress-life bracket is not positive");
        return std::log(bracket) / B;
    }
    return softplus(log_excess(q, A, B, config)) / B;
}

Eigen::Vector2d mu_gradient(double q, double A, double B, const MaterialTestConfig& config)
{
    check_q(q);
    if (q >= 1.0) return Eigen::Vector2d::Zero();
    if (!(A > 0.0) || !(B > 0.0)) throw std::domain_error("gradient needs A > 0 and B > 0");
    const double le = log_excess(q, A, B, config);
    const double frac = logistic(le);  // (G - 1) / G
    const double mu = softplus(le) / B;
    return {-frac / (A * B), -mu / B + frac * (1.0 + B * std::log(config.freq)) / (B * B)};
}

double log_quantile(double p, double u, const AltParams& params, const MaterialTestConfig& config)
{
    return mu_model(u, params.A, params.B, config) + params.nu * dist::std_quantile(p, config.kind);
}

double alt_loglik(const AltParams& params, std::span<const AltTestDatum> data, const MaterialTestConfig& config)
{
    if (data.empty()) throw std::invalid_argument("no ALT observations");
    if (!(params.nu > 0.0)) return -kInf;
    double ll = 0.0;
    for (const auto& d : data) {
        const double lt = std::log(d.cycles);
        const double z = (lt - mu_model(d.q, params.A, params.B, config)) / params.nu;
        if (!std::isfinite(z)) return -kInf;
        if (d.censored)
            ll += dist::log_std_survival(z, config.kind);
        else
            ll += dist::log_std_pdf(z, config.kind) - lt - std::log(params.nu);
    }
    return ll;
}

AltTestDatum simulate_test(double q, const AltParams& truth, const MaterialTestConfig& config, Rng& rng)
{
    const double z = dist::std_quantile(rng.uniform(), config.kind);
    const double t = std::exp(mu_model(q, truth.A, truth.B, config) + truth.nu * z);
    if (t >= config.censor_cycles) return {q, config.censor_cycles, true};
    return {q, t, false};
}

MlFit fit_alt_ml(std::span<const AltTestDatum> data, const MaterialTestConfig& config)
{
    if (data.empty()) throw std::invalid_argument("no ALT observations");
    const numeric::Objective nll = [&](const Eigen::VectorXd& x) {
        if (x.cwiseAbs().maxCoeff() > 40.0) return kInf;
        const AltParams p{std::exp(x[0]), std::exp(x[1]), std::exp(x[2])};
        const double v = -alt_loglik(p, data, config);
        return std::isfinite(v) ? v : kInf;
    };
    std::vector<Eigen::VectorXd> starts;
    for (double a : {1e-4, 1e-3, 1e-2, 0.08})
        for (double b : {0.2, 0.5, 1.0})
            starts.push_back(Eigen::Vector3d(std::log(a), std::log(b), std::log(0.5)));
    numeric::MinimizeOptions opts;
    opts.max_iterations = 1000;
    const auto best = numeric::minimize_multistart(nll, starts, opts);
    MlFit out;
    out.params = {std::exp(best.x[0]), std::exp(best.x[1]), std::exp(best.x[2])};
    out.loglik = -best.value;
    out.converged = best.converged && std::isfinite(best.value);
    return out;
}

}  // namespace relikit::alt
