#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "relikit/lifetime/lifetime.hpp"
#include "relikit/numeric.hpp"

namespace relikit::lifetime {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Step representation of one unit's covariate on (0, t_i].
struct UnitSteps {
    std::vector<double> widths;
    std::vector<double> values;
    double value_at_event = 0.0;
    bool failed = false;
};

UnitSteps make_steps(const LifetimeUnitRecord& unit)
{
    unit.validate();
    const auto& c = unit.covariates;
    UnitSteps s;
    s.failed = unit.failed;
    double prev = 0.0;
    for (std::size_t k = 0; k < c.times.size() && prev < unit.event_time; ++k) {
        const double end = std::min(c.times[k], unit.event_time);
        s.widths.push_back(end - prev);
        s.values.push_back(c.values[k]);
        prev = end;
    }
    if (prev < unit.event_time) {
        s.widths.push_back(unit.event_time - prev);
        s.values.push_back(c.values.back());
    }
    s.value_at_event = c.value_at(unit.event_time);
    return s;
}

// Negative log-likelihood in (mu0, log sigma0, beta) with analytic gradient.
struct LifetimeObjective {
    std::vector<UnitSteps> units;
    dist::StdKind kind;

    double operator()(const Eigen::VectorXd& theta, Eigen::VectorXd* grad) const
    {
        const double mu = theta[0];
        const double log_sigma = theta[1];
        const double beta = theta[2];
        if (!std::isfinite(mu) || !std::isfinite(beta) || std::abs(log_sigma) > 30.0) return kInf;
        const double sigma = std::exp(log_sigma);
        double nll = 0.0;
        double g_mu = 0.0, g_ls = 0.0, g_beta = 0.0;
        for (const auto& u : units) {
            double ue = 0.0, due = 0.0;
            for (std::size_t k = 0; k < u.widths.size(); ++k) {
                const double e = u.widths[k] * std::exp(beta * u.values[k]);
                ue += e;
                due += e * u.values[k];
            }
            if (!(ue > 0.0) || !std::isfinite(ue)) return kInf;
            const double z = (std::log(ue) - mu) / sigma;
            if (!std::isfinite(z)) return kInf;
            const double dlogu = due / ue;
            if (u.failed) {
                const double g = dist::dlog_std_pdf(z, kind);
                nll -= beta * u.value_at_event + dist::log_std_pdf(z, kind) - log_sigma - std::log(ue);
                g_mu -= g * (-1.0 / sigma);
                g_ls -= g * (-z) - 1.0;
                g_beta -= u.value_at_event + g * dlogu / sigma - dlogu;
            } else {
                const double h = std::exp(dist::log_std_pdf(z, kind) - dist::log_std_survival(z, kind));
                nll -= dist::log_std_survival(z, kind);
                g_mu -= h / sigma;
                g_ls -= h * z;
                g_beta -= -h * dlogu / sigma;
            }
        }
        if (!std::isfinite(nll)) return kInf;
        if (grad) {
            grad->resize(3);
            *grad << g_mu, g_ls, g_beta;
        }
        return nll;
    }
};

}  // namespace

double lifetime_loglik(const LifetimeParams& params, std::span<const LifetimeUnitRecord> data, dist::StdKind kind)
{
    params.validate();
    LifetimeObjective obj{{}, kind};
    obj.units.reserve(data.size());
    for (const auto& u : data) obj.units.push_back(make_steps(u));
    Eigen::VectorXd theta(3);
    theta << params.mu0, std::log(params.sigma0), params.beta;
    return -obj(theta, nullptr);
}

LifetimeFit fit_lifetime(std::span<const LifetimeUnitRecord> data, dist::StdKind kind, const FitOptions& options)
{
    if (data.empty()) throw std::invalid_argument("no lifetime records");
    LifetimeObjective obj{{}, kind};
    obj.units.reserve(data.size());
    std::size_t failures = 0;
    double total_time = 0.0;
    for (const auto& u : data) {
        obj.units.push_back(make_steps(u));
        failures += u.failed ? 1 : 0;
        total_time += u.event_time;
    }
    if (failures == 0) throw std::invalid_argument("no failures");

    // Exponential-rate guess for the threshold location.
    const double mu_guess = std::log(total_time / static_cast<double>(failures));
    const bool free_beta = !options.fixed_beta.has_value();

    numeric::GradObjective f;
    if (free_beta) {
        f = [&](const Eigen::VectorXd& x, Eigen::VectorXd* g) { return obj(x, g); };
    } else {
        const double beta = *options.fixed_beta;
        f = [&obj, beta](const Eigen::VectorXd& x, Eigen::VectorXd* g) {
            Eigen::VectorXd full(3);
            full << x[0], x[1], beta;
            Eigen::VectorXd gf(3);
            const double v = obj(full, g ? &gf : nullptr);
            if (g) *g = gf.head(2);
            return v;
        };
    }

    const double start_sigma[] = {0.0, std::log(0.5), 0.0, std::log(2.0), std::log(0.5)};
    const double start_beta[] = {0.0, 0.0, 1.0, -1.0, 2.0};
    numeric::MinimizeOptions mo;
    mo.max_iterations = options.max_iterations;
    mo.gradient_tolerance = 1e-7;
    numeric::MinimizeResult best;
    best.value = kInf;
    const int starts = std::max(1, options.starts);
    for (int s = 0; s < starts; ++s) {
        Eigen::VectorXd x0(free_beta ? 3 : 2);
        x0[0] = mu_guess;
        x0[1] = start_sigma[s % 5];
        if (free_beta) x0[2] = start_beta[s % 5];
        auto r = numeric::minimize_bfgs(f, x0, mo);
        if (std::isfinite(r.value) && r.value < best.value) best = r;
    }
    if (!std::isfinite(best.value)) throw FitError("lifetime fit failed: objective not finite", best.x);
    if (!best.converged) throw FitError("lifetime fit did not converge", best.x);

    LifetimeFit fit;
    fit.kind = kind;
    fit.params.mu0 = best.x[0];
    fit.params.sigma0 = std::exp(best.x[1]);
    fit.params.beta = free_beta ? best.x[2] : *options.fixed_beta;
    fit.loglik = -best.value;
    fit.iterations = best.iterations;

    // Observed information on the natural (mu0, sigma0, beta) scale.
    const numeric::Objective natural = [&](const Eigen::VectorXd& v) {
        if (!(v[1] > 0.0)) return kInf;
        Eigen::VectorXd x(3);
        x << v[0], std::log(v[1]), free_beta ? v[2] : fit.params.beta;
        return obj(x, nullptr);
    };
    Eigen::VectorXd at(free_beta ? 3 : 2);
    at[0] = fit.params.mu0;
    at[1] = fit.params.sigma0;
    if (free_beta) at[2] = fit.params.beta;
    const Eigen::MatrixXd H = numeric::numeric_hessian(natural, at);
    Eigen::MatrixXd cov;
    try {
        cov = numeric::spd_inverse(H);
    } catch (const std::runtime_error&) {
        throw FitError("lifetime fit: observed information is not positive definite", best.x);
    }
    fit.covariance.setZero();
    fit.covariance.topLeftCorner(cov.rows(), cov.cols()) = cov;
    return fit;
}

}  // namespace relikit::lifetime
