#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "relikit/alt/alt.hpp"

namespace relikit::alt {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double log_prior(const AltParams& p, const AltPriors& pr)
{
    if (!(p.A > 0.0) || !(p.B > 0.0) || !(p.nu > 0.0)) return -kInf;
    const double s = p.nu * p.nu;
    // Density of log nu when nu^2 is inverse gamma.
    return -0.5 * (p.A - pr.mu_A) * (p.A - pr.mu_A) / pr.var_A - 0.5 * (p.B - pr.mu_B) * (p.B - pr.mu_B) / pr.var_B -
           pr.kappa_ig * std::log(s) - pr.gamma_ig / s;
}

}  // namespace

double log_posterior(const AltParams& params, const AltPriors& priors, std::span<const AltTestDatum> data,
                     const MaterialTestConfig& config)
{
    const double lp = log_prior(params, priors);
    if (!std::isfinite(lp)) return -kInf;
    if (data.empty()) return lp;
    const double ll = alt_loglik(params, data, config);
    return std::isfinite(ll) ? lp + ll : -kInf;
}

AltParams params_from_row(const PosteriorDraws& draws, std::size_t row)
{
    return {draws.values(static_cast<Eigen::Index>(row), 0), draws.values(static_cast<Eigen::Index>(row), 1),
            draws.values(static_cast<Eigen::Index>(row), 2)};
}

PosteriorDraws posterior_sample(const AltPriors& priors, std::span<const AltTestDatum> data,
                                const MaterialTestConfig& config, const Rng& stream, const SamplerOptions& options)
{
    priors.validate();
    config.validate();
    for (const auto& d : data) d.validate();
    if (options.draws == 0) throw std::invalid_argument("draws must be positive");
    Rng rng = stream;

    // State is (log A, B, log nu); the log-A Jacobian enters the target.
    auto eval = [&](const Eigen::Vector3d& v) {
        const double lp = log_posterior({std::exp(v[0]), v[1], std::exp(v[2])}, priors, data, config);
        return std::isfinite(lp) ? lp + v[0] : lp;
    };
    const double a0 = priors.mu_A > 0.0 ? priors.mu_A : std::sqrt(priors.var_A);
    Eigen::Vector3d x(std::log(a0), priors.mu_B > 0.0 ? priors.mu_B : 1.0,
                      0.5 * std::log(priors.gamma_ig / std::max(priors.kappa_ig - 1.0, 0.5)));
    double lp = eval(x);
    for (int k = 1; k < 50 && !std::isfinite(lp); ++k) {
        x = Eigen::Vector3d(std::log(a0), 1.0, std::log(1.0 + k));
        lp = eval(x);
    }
    if (!std::isfinite(lp)) throw std::runtime_error("posterior has no finite starting point");

    Eigen::Matrix3d chol = Eigen::Vector3d(0.5, 0.5 * std::sqrt(priors.var_B), 0.2).asDiagonal();
    double log_scale = 0.0;
    Eigen::Vector3d sum = Eigen::Vector3d::Zero();
    Eigen::Matrix3d cross = Eigen::Matrix3d::Zero();
    std::size_t n_hist = 0, window_acc = 0, kept_acc = 0;

    PosteriorDraws out;
    out.names = {"A", "B", "nu"};
    out.values.resize(static_cast<Eigen::Index>(options.draws), 3);
    out.chain.assign(options.draws, static_cast<int>(options.chain));
    out.iteration.resize(options.draws);

    const std::size_t total = options.burn_in + options.draws;
    for (std::size_t it = 0; it < total; ++it) {
        const Eigen::Vector3d step(rng.normal(), rng.normal(), rng.normal());
        const Eigen::Vector3d prop = x + std::exp(log_scale) * (chol * step);
        const double lp_prop = eval(prop);
        const bool accept = std::isfinite(lp_prop) && std::log(rng.uniform()) < lp_prop - lp;
        if (accept) {
            x = prop;
            lp = lp_prop;
        }
        if (it < options.burn_in) {
            window_acc += accept;
            // Only the second half of burn-in shapes the proposal covariance.
            if (2 * it >= options.burn_in) {
                sum += x;
                cross += x * x.transpose();
                ++n_hist;
            }
            if ((it + 1) % 50 == 0) {
                const double rate = static_cast<double>(window_acc) / 50.0;
                log_scale += (rate - options.target_acceptance) * 2.0 / std::sqrt(static_cast<double>((it + 1) / 50));
                window_acc = 0;
                if (n_hist >= 200) {
                    const double n = static_cast<double>(n_hist);
                    const Eigen::Vector3d m = sum / n;
                    Eigen::Matrix3d cov = cross / n - m * m.transpose();
                    cov += 1e-10 * Eigen::Matrix3d::Identity();
                    const Eigen::LLT<Eigen::Matrix3d> llt(2.38 * 2.38 / 3.0 * cov);
                    if (llt.info() == Eigen::Success) chol = llt.matrixL();
                }
            }
        } else {
            kept_acc += accept;
            const auto r = static_cast<Eigen::Index>(it - options.burn_in);
            out.values(r, 0) = std::exp(x[0]);
            out.values(r, 1) = x[1];
            out.values(r, 2) = std::exp(x[2]);
            out.iteration[static_cast<std::size_t>(r)] = static_cast<int>(it);
        }
    }
    const double rate = static_cast<double>(kept_acc) / static_cast<double>(options.draws);
    if (kept_acc == 0) {
        std::ostringstream msg;
        msg << "sampler accepted no proposals after adaptation (scale " << std::exp(log_scale)
            << ", proposal diagonal " << chol.diagonal().transpose() << ", log posterior " << lp << ")";
        throw std::runtime_error(msg.str());
    }
    out.acceptance.assign(3, rate);
    return out;
}

}  // namespace relikit::alt
