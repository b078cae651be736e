#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "relikit/degradation/degradation.hpp"
#include "relikit/numeric.hpp"

namespace relikit::degradation {

void FailureSpec::validate() const
{
    if (!std::isfinite(threshold)) throw std::invalid_argument("failure threshold must be finite");
    if (!(horizon > 0.0)) throw std::invalid_argument("search horizon must be positive");
    if (!(grid_step > 0.0)) throw std::invalid_argument("grid step must be positive");
}

std::optional<double> failure_time_of_path(std::span<const double> path, const FailureSpec& spec)
{
    spec.validate();
    if (path.empty()) return std::nullopt;
    const double D = spec.threshold;
    const bool from_above = path[0] > D;
    if (path[0] == D) return 0.0;
    for (std::size_t k = 1; k < path.size(); ++k) {
        const double t = spec.grid_step * static_cast<double>(k);
        if (t > spec.horizon + 1e-12) break;
        const bool crossed = from_above ? path[k] <= D : path[k] >= D;
        if (crossed) {
            const double frac = (path[k - 1] - D) / (path[k - 1] - path[k]);
            return spec.grid_step * (static_cast<double>(k - 1) + frac);
        }
    }
    return std::nullopt;
}

std::vector<std::optional<double>> simulate_failure_times(const PathParams& params, const SplineEffectSpec& spec,
                                                          const CovariateProcessParams& covariate_params,
                                                          const FailureSpec& failure, const Rng& stream,
                                                          const FailureMcOptions& options)
{
    failure.validate();
    params.validate(spec);
    if (options.start_max < options.start_min) throw std::invalid_argument("empty start window");
    const Eigen::MatrixXd L = numeric::psd_factor(params.random_effect_cov());
    const auto days = static_cast<std::size_t>(std::ceil(failure.horizon));
    const FailureSpec daily{failure.threshold, failure.horizon, 1.0};
    const auto span = static_cast<std::uint64_t>(options.start_max - options.start_min + 1);
    std::vector<std::optional<double>> out(options.draws);
    numeric::parallel_for(options.draws, [&](std::size_t m) {
        Rng rng = stream.substream(m);
        const int start = options.start_min + static_cast<int>(rng.below(span));
        const double z0 = rng.normal(), z1 = rng.normal();
        const Eigen::Vector2d w = L * Eigen::Vector2d(z0, z1);
        const auto cov = simulate_covariate_process(covariate_params, days, rng, start);
        std::vector<double> path{params.beta0 + w[0]};
        path.reserve(days + 1);
        const bool from_above = path[0] > failure.threshold;
        double D = params.beta0;
        for (std::size_t k = 1; k <= days; ++k) {
            D += damage_rate(cov.values[k - 1], params, spec);
            const double v = D + w[0] + w[1] * static_cast<double>(k);
            path.push_back(v);
            if (from_above ? v <= failure.threshold : v >= failure.threshold) break;
        }
        out[m] = failure_time_of_path(path, daily);
    });
    return out;
}

namespace {

std::vector<double> empirical_cdf(const std::vector<std::optional<double>>& times, std::span<const double> grid)
{
    std::vector<double> cdf(grid.size(), 0.0);
    for (std::size_t g = 0; g < grid.size(); ++g) {
        std::size_t count = 0;
        for (const auto& t : times)
            if (t && *t <= grid[g]) ++count;
        cdf[g] = static_cast<double>(count) / static_cast<double>(times.size());
    }
    return cdf;
}

}  // namespace

FailureCdf failure_cdf_mc(const DegradationFit& fit, const CovariateProcessParams& covariate_params,
                          std::span<const PathParams> replicates, const FailureSpec& spec,
                          std::span<const double> grid, const Rng& stream, const FailureMcOptions& options)
{
    if (options.draws < 1) throw std::invalid_argument("at least one Monte Carlo draw is required");
    for (std::size_t g = 0; g < grid.size(); ++g)
        if (!(grid[g] >= 0.0) || (g > 0 && grid[g] < grid[g - 1]))
            throw std::invalid_argument("grid must be nonnegative and nondecreasing");
    FailureCdf out;
    out.few_draws = options.draws < 50;
    out.few_resamples = !replicates.empty() && replicates.size() < 100;
    out.grid.assign(grid.begin(), grid.end());
    const auto times = simulate_failure_times(fit.params, fit.spec, covariate_params, spec, stream, options);
    out.cdf = empirical_cdf(times, grid);
    for (const auto& t : times) {
        if (t)
            out.failure_times.push_back(*t);
        else
            ++out.censored;
    }
    std::sort(out.failure_times.begin(), out.failure_times.end());
    if (replicates.empty()) {
        out.lower = out.upper = out.cdf;
        return out;
    }
    std::vector<std::vector<double>> rep_cdf;
    rep_cdf.reserve(replicates.size());
    for (const auto& p : replicates)
        rep_cdf.push_back(empirical_cdf(simulate_failure_times(p, fit.spec, covariate_params, spec, stream, options), grid));
    const double a = 0.5 * (1.0 - options.level);
    for (std::size_t g = 0; g < grid.size(); ++g) {
        std::vector<double> col(rep_cdf.size());
        for (std::size_t b = 0; b < rep_cdf.size(); ++b) col[b] = rep_cdf[b][g];
        out.lower.push_back(numeric::quantile(col, a));
        out.upper.push_back(numeric::quantile(col, 1.0 - a));
    }
    return out;
}

double interval_overlap(double a_lo, double a_hi, double b_lo, double b_hi)
{
    if (a_hi < a_lo || b_hi < b_lo) throw std::invalid_argument("interval bounds out of order");
    const double inter = std::max(0.0, std::min(a_hi, b_hi) - std::max(a_lo, b_lo));
    const double uni = std::max(a_hi, b_hi) - std::min(a_lo, b_lo);
    return uni > 0.0 ? inter / uni : 1.0;
}

}  // namespace relikit::degradation
