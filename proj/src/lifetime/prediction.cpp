#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "relikit/lifetime/lifetime.hpp"
#include "relikit/numeric.hpp"

namespace relikit::lifetime {

namespace {

constexpr std::uint64_t kParamStreamBase = 1'000'000;
constexpr std::uint64_t kCalibrationStreamBase = 2'000'000;

// State of a surviving unit at its time in service under one parameter set.
struct SurvivorState {
    double log_survival = 0.0;  // log S0 of the exposure accrued so far
    double log_exposure = 0.0;
};

SurvivorState survivor_state(const LifetimeUnitRecord& unit, const LifetimeParams& theta, dist::StdKind kind)
{
    const double u = exposure(unit.event_time, theta.beta, unit.covariates);
    SurvivorState s;
    s.log_exposure = std::log(u);
    s.log_survival = dist::log_std_survival((s.log_exposure - theta.mu0) / theta.sigma0, kind);
    return s;
}

// rho* for a future exposure increment `added` on top of the accrued exposure.
double conditional_failure(const SurvivorState& s, double added, const LifetimeParams& theta, dist::StdKind kind)
{
    if (added <= 0.0) return 0.0;
    const double log_u = s.log_exposure + std::log1p(added / std::exp(s.log_exposure));
    const double log_surv = dist::log_std_survival((log_u - theta.mu0) / theta.sigma0, kind);
    return std::clamp(-std::expm1(log_surv - s.log_survival), 0.0, 1.0);
}

// Cumulative future exposure of one simulated covariate path, tabulated on
// the grid t_i + k * step.
struct FuturePath {
    std::vector<double> cumulative;  // cumulative[k] = exposure over (t_i, t_i + (k+1) step]
    std::vector<double> rates;
    double step = 1.0;

    double at(double s) const
    {
        if (s <= 0.0) return 0.0;
        const double pos = s / step;
        auto k = static_cast<std::size_t>(std::floor(pos));
        if (k >= cumulative.size()) return cumulative.back() + rates.back() * (s - step * cumulative.size());
        const double before = k == 0 ? 0.0 : cumulative[k - 1];
        return before + rates[k] * (s - step * static_cast<double>(k));
    }
};

FuturePath draw_future_path(const ConditionalCovariate& cond, double start, double beta, std::size_t steps,
                            double step, Rng& rng)
{
    FuturePath p;
    p.step = step;
    p.cumulative.resize(steps);
    p.rates.resize(steps);
    const Eigen::Vector2d w = cond.draw_effects(rng);
    double acc = 0.0;
    for (std::size_t k = 0; k < steps; ++k) {
        const double x = cond.value_given_effects(w, start + step * static_cast<double>(k + 1), rng);
        p.rates[k] = std::exp(beta * x);
        acc += p.rates[k] * step;
        p.cumulative[k] = acc;
    }
    return p;
}

std::size_t steps_for(double horizon, double step)
{
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(horizon / step - 1e-12)));
}

void require_survivor(const LifetimeUnitRecord& unit)
{
    unit.validate();
    if (unit.failed) throw std::invalid_argument("unit " + unit.unit_id + " has already failed");
}

}  // namespace

std::vector<double> drl_curve(const LifetimeUnitRecord& unit, std::span<const double> horizons,
                              const LifetimeParams& theta_t, const CovariateLmeParams& theta_x, dist::StdKind kind,
                              const Rng& stream, const DrlOptions& options)
{
    require_survivor(unit);
    theta_t.validate();
    if (options.draws < 1) throw std::invalid_argument("at least one Monte Carlo draw is required");
    if (!(options.step > 0.0)) throw std::invalid_argument("covariate step must be positive");
    double max_h = 0.0;
    for (double s : horizons) {
        if (!(s >= 0.0)) throw std::invalid_argument("horizons must be nonnegative");
        max_h = std::max(max_h, s);
    }
    std::vector<double> rho(horizons.size(), 0.0);
    if (max_h <= 0.0) return rho;

    const ConditionalCovariate cond(theta_x, unit.covariates);
    const SurvivorState state = survivor_state(unit, theta_t, kind);
    const std::size_t steps = steps_for(max_h, options.step);
    for (std::size_t m = 0; m < options.draws; ++m) {
        Rng rng = stream.substream(m);
        const FuturePath path = draw_future_path(cond, unit.event_time, theta_t.beta, steps, options.step, rng);
        for (std::size_t h = 0; h < horizons.size(); ++h)
            rho[h] += conditional_failure(state, path.at(horizons[h]), theta_t, kind);
    }
    for (double& r : rho) r /= static_cast<double>(options.draws);
    return rho;
}

double drl_estimate(const LifetimeUnitRecord& unit, double s, const LifetimeParams& theta_t,
                    const CovariateLmeParams& theta_x, dist::StdKind kind, const Rng& stream,
                    const DrlOptions& options)
{
    if (!(s > 0.0)) throw std::invalid_argument("horizon must be positive");
    const double h[] = {s};
    return drl_curve(unit, h, theta_t, theta_x, kind, stream, options)[0];
}

std::pair<LifetimeParams, CovariateLmeParams> draw_parameters(const LifetimeFit& fit_t, const CovariateFit& fit_x,
                                                              Rng& rng)
{
    Eigen::MatrixXd Lt, Lx;
    try {
        Lt = numeric::psd_factor(fit_t.covariance);
        Lx = numeric::psd_factor(fit_x.covariance);
    } catch (const std::runtime_error&) {
        throw std::runtime_error("parameter covariance is not positive semidefinite");
    }
    const Eigen::Vector3d mt = fit_t.params.as_vector();
    const Eigen::Matrix<double, 5, 1> mx = fit_x.params.as_vector();
    LifetimeParams pt;
    CovariateLmeParams px;
    for (int attempt = 0;; ++attempt) {
        if (attempt == 1000) throw std::runtime_error("could not draw valid lifetime parameters");
        Eigen::Vector3d z;
        for (int i = 0; i < 3; ++i) z[i] = rng.normal();
        pt = LifetimeParams::from_vector(mt + Lt * z);
        if (pt.sigma0 > 0.0) break;
    }
    for (int attempt = 0;; ++attempt) {
        if (attempt == 1000) throw std::runtime_error("could not draw valid covariate parameters");
        Eigen::Matrix<double, 5, 1> z;
        for (int i = 0; i < 5; ++i) z[i] = rng.normal();
        px = CovariateLmeParams::from_vector(mx + Lx * z);
        // A scale with no sampling variance keeps its fitted value, zero included.
        auto ok = [](double v, double fitted) { return v > 0.0 || (v == fitted && v >= 0.0); };
        if (ok(px.sigma1, mx[1]) && ok(px.sigma2, mx[2]) && ok(px.sigma_eps, mx[4]) && std::abs(px.rho) < 1.0) break;
    }
    return {pt, px};
}

Interval drl_ci(const LifetimeUnitRecord& unit, double s, const LifetimeFit& fit_t, const CovariateFit& fit_x,
                std::size_t resamples, double alpha, const Rng& stream, const DrlOptions& options)
{
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");
    if (static_cast<double>(resamples) < 2.0 / alpha) throw std::invalid_argument("need at least 2/alpha resamples");
    std::vector<double> reps(resamples);
    const double h[] = {s};
    numeric::parallel_for(resamples, [&](std::size_t b) {
        Rng prng = stream.substream(kParamStreamBase + b);
        const auto [pt, px] = draw_parameters(fit_t, fit_x, prng);
        reps[b] = drl_curve(unit, h, pt, px, fit_t.kind, stream, options)[0];
    });
    std::sort(reps.begin(), reps.end());
    const double B = static_cast<double>(resamples);
    return {reps[numeric::rounded_rank(alpha * B, resamples) - 1],
            reps[numeric::rounded_rank((1.0 - alpha) * B, resamples) - 1]};
}

RemainingLifeInterval remaining_life_pi(const LifetimeUnitRecord& unit, const LifetimeFit& fit_t,
                                        const CovariateFit& fit_x, double alpha, const Rng& stream,
                                        const PiOptions& options)
{
    require_survivor(unit);
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");
    const double step = options.drl.step;
    const double bound = options.search_bound.value_or(20.0 * unit.event_time);
    const std::size_t steps = steps_for(bound, step);
    const auto kind = fit_t.kind;

    // rho_i(s; theta_hat) from a fixed set of covariate draws.
    const ConditionalCovariate cond(fit_x.params, unit.covariates);
    const SurvivorState state = survivor_state(unit, fit_t.params, kind);
    std::vector<FuturePath> paths;
    paths.reserve(options.drl.draws);
    for (std::size_t m = 0; m < options.drl.draws; ++m) {
        Rng rng = stream.substream(m);
        paths.push_back(draw_future_path(cond, unit.event_time, fit_t.params.beta, steps, step, rng));
    }
    auto rho = [&](double s) {
        double acc = 0.0;
        for (const auto& p : paths) acc += conditional_failure(state, p.at(s), fit_t.params, kind);
        return acc / static_cast<double>(paths.size());
    };

    // Distribution of rho_i(S_i) with S_i simulated under parameter draws.
    std::vector<double> calibration(options.calibration_draws);
    for (std::size_t j = 0; j < options.calibration_draws; ++j) {
        Rng rng = stream.substream(kCalibrationStreamBase + j);
        const auto [pt, px] = draw_parameters(fit_t, fit_x, rng);
        const SurvivorState st = survivor_state(unit, pt, kind);
        const double log_target = st.log_survival + std::log(rng.uniform());
        double z_threshold;
        if (kind == dist::StdKind::SEV) {
            z_threshold = std::log(-log_target);
        } else {
            const double surv = std::exp(log_target);
            z_threshold = surv > 0.0 ? -dist::std_quantile(std::clamp(surv, 1e-300, 1.0 - 1e-16), kind) : 40.0;
        }
        const double log_u = pt.mu0 + pt.sigma0 * z_threshold;
        const double needed = std::exp(log_u) - std::exp(st.log_exposure);
        const ConditionalCovariate cj(px, unit.covariates);
        const Eigen::Vector2d w = cj.draw_effects(rng);
        double acc = 0.0, remaining = -1.0;
        for (std::size_t k = 0; k < steps; ++k) {
            const double x = cj.value_given_effects(w, unit.event_time + step * static_cast<double>(k + 1), rng);
            const double r = std::exp(pt.beta * x);
            if (acc + r * step >= needed) {
                remaining = step * static_cast<double>(k) + (needed - acc) / r;
                break;
            }
            acc += r * step;
        }
        // no failure inside the search bound: ranks above every reachable rho
        calibration[j] = remaining < 0.0 ? 1.0 : rho(std::max(remaining, 0.0));
    }

    RemainingLifeInterval out;
    out.v_lower = numeric::quantile(calibration, alpha / 2.0);
    out.v_upper = numeric::quantile(calibration, 1.0 - alpha / 2.0);

    auto solve = [&](double v, bool& open) {
        open = false;
        if (rho(bound) < v) {
            open = true;
            return bound;
        }
        if (v <= 0.0) return 0.0;
        return numeric::bisect([&](double s) { return rho(s) - v; }, 0.0, bound, options.tolerance);
    };
    bool open_lower = false;
    out.lower = solve(out.v_lower, open_lower);
    out.upper = solve(out.v_upper, out.upper_open);
    if (out.lower > out.upper) out.lower = out.upper;
    return out;
}

}  // namespace relikit::lifetime
