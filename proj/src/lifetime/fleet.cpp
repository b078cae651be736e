#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "relikit/lifetime/lifetime.hpp"
#include "relikit/numeric.hpp"

namespace relikit::lifetime {

namespace {

void check_probabilities(std::span<const double> rhos)
{
    for (double r : rhos)
        if (!(r >= 0.0 && r <= 1.0)) throw std::invalid_argument("probabilities must lie in [0, 1]");
}

std::size_t lower_count(const std::vector<double>& cdf, double level)
{
    for (std::size_t k = 0; k < cdf.size(); ++k)
        if (cdf[k] >= level - 1e-12) return k;
    return cdf.size() - 1;
}

}  // namespace

std::vector<double> poisson_binomial_pmf(std::span<const double> rhos)
{
    check_probabilities(rhos);
    std::vector<double> pmf(rhos.size() + 1, 0.0);
    pmf[0] = 1.0;
    for (std::size_t i = 0; i < rhos.size(); ++i) {
        const double p = rhos[i];
        for (std::size_t k = i + 1; k > 0; --k) pmf[k] = pmf[k] * (1.0 - p) + pmf[k - 1] * p;
        pmf[0] *= 1.0 - p;
    }
    return pmf;
}

std::vector<double> poisson_binomial_pmf_dft(std::span<const double> rhos)
{
    check_probabilities(rhos);
    const std::size_t n = rhos.size();
    const std::size_t m = n + 1;
    const double omega = 2.0 * std::numbers::pi / static_cast<double>(m);
    // Characteristic function on the m roots of unity, product in polar form.
    std::vector<std::complex<double>> chi(m);
    for (std::size_t l = 0; l < m; ++l) {
        const double a = omega * static_cast<double>(l);
        const std::complex<double> e(std::cos(a), std::sin(a));
        double log_mod = 0.0, arg = 0.0;
        for (double p : rhos) {
            const std::complex<double> f = 1.0 - p + p * e;
            const double mod = std::abs(f);
            if (mod == 0.0) {
                log_mod = -std::numeric_limits<double>::infinity();
                break;
            }
            log_mod += std::log(mod);
            arg += std::arg(f);
        }
        chi[l] = std::polar(std::exp(log_mod), arg);
    }
    std::vector<double> pmf(m);
    for (std::size_t k = 0; k < m; ++k) {
        std::complex<double> acc = 0.0;
        for (std::size_t l = 0; l < m; ++l) {
            const double a = -omega * static_cast<double>((l * k) % m);
            acc += chi[l] * std::complex<double>(std::cos(a), std::sin(a));
        }
        pmf[k] = std::max(0.0, acc.real() / static_cast<double>(m));
    }
    return pmf;
}

double fleet_count_cdf(std::span<const double> rhos, std::size_t n_k)
{
    const auto pmf = poisson_binomial_pmf(rhos);
    double acc = 0.0;
    for (std::size_t k = 0; k <= std::min(n_k, pmf.size() - 1); ++k) acc += pmf[k];
    return std::min(acc, 1.0);
}

FleetPrediction fleet_prediction(std::span<const LifetimeUnitRecord> data, const LifetimeFit& fit_t,
                                 const CovariateFit& fit_x, std::span<const double> horizons, double alpha,
                                 const Rng& stream, const FleetOptions& options)
{
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");
    if (options.resamples < 1) throw std::invalid_argument("at least one resample is required");
    std::vector<std::size_t> at_risk;
    for (std::size_t i = 0; i < data.size(); ++i)
        if (!data[i].failed) at_risk.push_back(i);
    if (at_risk.empty()) throw std::invalid_argument("empty risk set");

    const std::size_t H = horizons.size();
    const std::size_t n = at_risk.size();
    FleetPrediction out;
    out.risk_set_size = n;
    out.horizons.assign(horizons.begin(), horizons.end());
    out.expected.assign(H, 0.0);

    // Point prediction under the fitted parameters.
    std::vector<std::vector<double>> rho_hat(n);
    numeric::parallel_for(n, [&](std::size_t j) {
        rho_hat[j] = drl_curve(data[at_risk[j]], horizons, fit_t.params, fit_x.params, fit_t.kind,
                               stream.substream(at_risk[j]), options.drl);
    });
    for (std::size_t h = 0; h < H; ++h)
        for (std::size_t j = 0; j < n; ++j) out.expected[h] += rho_hat[j][h];

    // Mixture of Poisson-binomial laws over parameter draws.
    std::vector<std::vector<double>> mix(H, std::vector<double>(n + 1, 0.0));
    for (std::size_t b = 0; b < options.resamples; ++b) {
        Rng prng = stream.substream(1'000'000 + b);
        const auto [pt, px] = draw_parameters(fit_t, fit_x, prng);
        std::vector<std::vector<double>> rho(n);
        numeric::parallel_for(n, [&](std::size_t j) {
            rho[j] = drl_curve(data[at_risk[j]], horizons, pt, px, fit_t.kind, stream.substream(at_risk[j]),
                               options.drl);
        });
        std::vector<double> col(n);
        for (std::size_t h = 0; h < H; ++h) {
            for (std::size_t j = 0; j < n; ++j) col[j] = rho[j][h];
            const auto pmf = poisson_binomial_pmf(col);
            for (std::size_t k = 0; k <= n; ++k) mix[h][k] += pmf[k] / static_cast<double>(options.resamples);
        }
    }
    for (std::size_t h = 0; h < H; ++h) {
        std::vector<double> cdf(n + 1);
        double acc = 0.0;
        for (std::size_t k = 0; k <= n; ++k) cdf[k] = acc = std::min(1.0, acc + mix[h][k]);
        out.interval.push_back({static_cast<double>(lower_count(cdf, alpha / 2.0)),
                                static_cast<double>(lower_count(cdf, 1.0 - alpha / 2.0))});
        out.count_cdf.push_back(std::move(cdf));
    }
    return out;
}

}  // namespace relikit::lifetime
