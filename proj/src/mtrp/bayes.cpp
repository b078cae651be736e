#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "core.hpp"
#include "relikit/mtrp/mtrp.hpp"
#include "relikit/numeric.hpp"

namespace relikit::mtrp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::size_t kScalars = 6;

// Per-unit precomputation for fast re-evaluation of the trend scale.
struct UnitGeometry {
    std::vector<double> log_knot;  // knots after 0, up to and including tau
    std::vector<double> log_usage; // usage on the step ending at each knot; last is open-ended
    std::vector<double> knot;
    std::vector<std::size_t> step;  // step index of each event time and tau
    std::vector<double> log_time;   // log of each event time and tau
    std::vector<EventType> types;
};

UnitGeometry geometry(const EventHistory& h)
{
    UnitGeometry g;
    for (std::size_t k = 0; k < h.usage.times.size(); ++k) {
        const double t = h.usage.times[k];
        if (t <= 0.0) continue;
        g.knot.push_back(t);
        g.log_knot.push_back(std::log(t));
        g.log_usage.push_back(std::log(h.usage.values[k]));
        if (t >= h.tau) break;
    }
    g.log_usage.push_back(std::log(h.usage.values.back()));
    auto add = [&](double t) {
        const auto it = std::lower_bound(g.knot.begin(), g.knot.end(), t);
        g.step.push_back(static_cast<std::size_t>(it - g.knot.begin()));
        g.log_time.push_back(std::log(t));
    };
    for (const auto& e : h.events) {
        add(e.time);
        g.types.push_back(e.type);
    }
    add(h.tau);
    return g;
}

void fill_transform(const UnitGeometry& g, double beta, double log_eta, double gamma, detail::UnitTransform& u)
{
    const std::size_t K = g.knot.size();
    thread_local std::vector<double> C, prefix, W;
    C.assign(K + 1, 0.0);
    prefix.assign(K + 1, 0.0);
    W.resize(K + 1);
    for (std::size_t k = 0; k < K; ++k) C[k + 1] = std::exp(beta * (g.log_knot[k] - log_eta));
    for (std::size_t k = 0; k <= K; ++k) W[k] = std::exp(gamma * g.log_usage[std::min(k, g.log_usage.size() - 1)]);
    for (std::size_t k = 0; k < K; ++k) prefix[k + 1] = prefix[k] + W[k] * (C[k + 1] - C[k]);
    const std::size_t m = g.log_time.size();
    u.types = g.types;
    u.cumulative.resize(m);
    u.intensity.resize(m - 1);
    for (std::size_t j = 0; j < m; ++j) {
        const std::size_t k = g.step[j];
        const double c = std::exp(beta * (g.log_time[j] - log_eta));
        u.cumulative[j] = prefix[k] + W[k] * (c - C[k]);
        if (j + 1 < m) u.intensity[j] = W[k] * beta * c / std::exp(g.log_time[j]);
    }
}

double log_normal_prior(double x, const Prior& p)
{
    const double z = (x - p.mean) / p.sd;
    return -0.5 * z * z;
}

// Sampling coordinates: log shapes, log trend shape, log mean trend-scale
// intensity at a reference time and usage level, gamma, log sigma_r.
struct Coordinates {
    double log_ref_time = 0.0;
    double log_ref_usage = 0.0;

    MtrpParams decode(const std::array<double, kScalars>& x) const
    {
        MtrpParams p;
        p.component.shape = std::exp(x[0]);
        p.subsystem.shape = std::exp(x[1]);
        p.trend_shape = std::exp(x[2]);
        p.gamma = x[4];
        p.trend_scale = std::exp(log_ref_time - (x[3] - p.gamma * log_ref_usage) / p.trend_shape);
        p.sigma_r = std::exp(x[5]);
        return p;
    }

    std::array<double, kScalars> encode(const MtrpParams& p) const
    {
        return {std::log(p.component.shape), std::log(p.subsystem.shape), std::log(p.trend_shape),
                p.trend_shape * (log_ref_time - std::log(p.trend_scale)) + p.gamma * log_ref_usage, p.gamma,
                std::log(std::max(p.sigma_r, 1e-6))};
    }
};

double log_prior(const std::array<double, kScalars>& x, const MtrpParams& p, const MtrpPriors& pr)
{
    double lp = log_normal_prior(x[0], pr.log_component_shape) + log_normal_prior(x[1], pr.log_subsystem_shape) +
                log_normal_prior(x[2], pr.log_trend_shape) + log_normal_prior(std::log(p.trend_scale), pr.log_trend_scale) +
                log_normal_prior(p.gamma, pr.gamma);
    // Jacobian of (log trend scale) with respect to the reference coordinate.
    lp -= x[2];
    // Half-normal on sigma_r, sampled on the log scale.
    lp += -0.5 * (p.sigma_r / pr.sigma_r_scale) * (p.sigma_r / pr.sigma_r_scale) + x[5];
    return lp;
}

double effects_prior(const std::vector<double>& w, double sigma)
{
    double s = 0.0;
    for (double v : w) s += v * v;
    return -0.5 * s / (sigma * sigma) - static_cast<double>(w.size()) * std::log(sigma);
}

struct ChainResult {
    std::vector<std::array<double, kScalars>> draws;
    std::vector<std::vector<double>> effects;
    std::vector<int> iteration;
    std::array<double, kScalars + 1> accepted{};
    std::size_t kept_iterations = 0;
};

ChainResult run_chain(std::span<const EventHistory> histories, const std::vector<UnitGeometry>& geo,
                      const MtrpPriors& priors, const McmcOptions& opt, const Coordinates& coords,
                      const MtrpParams& start, Rng rng)
{
    const std::size_t n = histories.size();
    std::array<double, kScalars> x = coords.encode(start);
    for (double& v : x) v += 0.05 * rng.normal();
    MtrpParams p = coords.decode(x);
    std::vector<double> w(n);
    for (double& v : w) v = 0.1 * p.sigma_r * rng.normal();

    std::vector<detail::UnitTransform> cache(n), trial(n);
    auto build = [&](const MtrpParams& q, std::vector<detail::UnitTransform>& into) {
        const double log_eta = std::log(q.trend_scale);
        for (std::size_t i = 0; i < n; ++i) fill_transform(geo[i], q.trend_shape, log_eta, q.gamma, into[i]);
    };
    build(p, cache);
    std::vector<double> unit_ll(n);
    auto total = [&](const std::vector<detail::UnitTransform>& c, const MtrpParams& q, std::vector<double>& ll) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            ll[i] = detail::loglik(c[i], q.component, q.subsystem, w[i]);
            s += ll[i];
        }
        return s;
    };
    double ll = total(cache, p, unit_ll);
    if (!std::isfinite(ll)) throw std::runtime_error("starting values give a non-finite likelihood");
    double lp = log_prior(x, p, priors);
    std::vector<double> trial_ll(n);

    std::array<double, kScalars> step{0.1, 0.1, 0.05, 0.1, 0.05, 0.2};
    std::vector<double> w_step(n, 0.5);
    std::array<double, kScalars> batch_acc{};
    std::vector<double> w_batch(n, 0.0);
    const std::size_t batch = 50;

    ChainResult out;
    const std::size_t total_iter = opt.burn_in + opt.iterations;
    for (std::size_t it = 0; it < total_iter; ++it) {
        const bool burning = it < opt.burn_in;
        for (std::size_t j = 0; j < kScalars; ++j) {
            auto y = x;
            y[j] += step[j] * rng.normal();
            const MtrpParams q = coords.decode(y);
            if (!invalid_reason(q).empty()) continue;
            const double lq = log_prior(y, q, priors);
            double llq;
            if (j == 2 || j == 3 || j == 4) {
                build(q, trial);
                llq = total(trial, q, trial_ll);
            } else if (j == 5) {
                llq = ll;
            } else {
                llq = total(cache, q, trial_ll);
            }
            double log_ratio = llq + lq - ll - lp;
            if (j == 5) log_ratio += effects_prior(w, q.sigma_r) - effects_prior(w, p.sigma_r);
            if (std::isfinite(log_ratio) && std::log(rng.uniform()) < log_ratio) {
                x = y;
                p = q;
                lp = lq;
                if (j != 5) {
                    ll = llq;
                    unit_ll.swap(trial_ll);
                    if (j == 2 || j == 3 || j == 4) cache.swap(trial);
                }
                batch_acc[j] += 1.0;
                if (!burning) out.accepted[j] += 1.0;
            }
        }
        double w_acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double v = w[i] + w_step[i] * rng.normal();
            const double lli = detail::loglik(cache[i], p.component, p.subsystem, v);
            const double log_ratio = lli - unit_ll[i] - 0.5 * (v * v - w[i] * w[i]) / (p.sigma_r * p.sigma_r);
            if (std::isfinite(log_ratio) && std::log(rng.uniform()) < log_ratio) {
                ll += lli - unit_ll[i];
                unit_ll[i] = lli;
                w[i] = v;
                w_batch[i] += 1.0;
                w_acc += 1.0;
            }
        }
        if (!burning) out.accepted[kScalars] += w_acc / static_cast<double>(std::max<std::size_t>(n, 1));

        if (burning && (it + 1) % batch == 0) {
            const double delta = std::min(0.1, 1.0 / std::sqrt(static_cast<double>((it + 1) / batch)));
            for (std::size_t j = 0; j < kScalars; ++j) {
                step[j] *= std::exp(batch_acc[j] / batch > 0.44 ? delta : -delta);
                batch_acc[j] = 0.0;
            }
            for (std::size_t i = 0; i < n; ++i) {
                w_step[i] *= std::exp(w_batch[i] / batch > 0.44 ? delta : -delta);
                w_batch[i] = 0.0;
            }
        }
        if (!burning) {
            ++out.kept_iterations;
            if ((it - opt.burn_in) % opt.thin == 0) {
                out.draws.push_back(x);
                out.effects.push_back(w);
                out.iteration.push_back(static_cast<int>(it - opt.burn_in));
            }
        }
        ll = total(cache, p, unit_ll);  // guards against drift in the running sum
    }
    return out;
}

}  // namespace

PosteriorDraws fit_mtrp_bayes(std::span<const EventHistory> histories, const MtrpPriors& priors,
                              const McmcOptions& options, const Rng& stream)
{
    if (histories.empty()) throw std::invalid_argument("no histories");
    if (options.chains < 1 || options.iterations < 1 || options.thin < 1)
        throw std::invalid_argument("chains, iterations and thinning must be positive");
    std::size_t n_comp = 0, n_events = 0;
    double log_tau = 0.0, log_usage = 0.0;
    for (const auto& h : histories) {
        h.validate();
        n_comp += h.count(EventType::COMPONENT);
        n_events += h.events.size();
        log_tau += std::log(std::max(h.tau, 1e-12));
        log_usage += std::log(h.usage.at(h.tau));
    }
    if (n_events == 0) throw std::invalid_argument("zero total events");
    const double n = static_cast<double>(histories.size());
    Coordinates coords{log_tau / n, log_usage / n};

    MtrpParams start;
    if (options.start) {
        start = *options.start;
    } else {
        start.trend_shape = 1.0;
        start.gamma = 0.0;
        start.sigma_r = 0.5;
        const double rate = std::max(static_cast<double>(n_comp), 1.0) / n;
        start.trend_scale = std::exp(coords.log_ref_time) / rate;
    }
    start.validate();

    std::vector<UnitGeometry> geo;
    geo.reserve(histories.size());
    for (const auto& h : histories) geo.push_back(geometry(h));

    std::vector<ChainResult> results(options.chains);
    numeric::parallel_for(options.chains, [&](std::size_t c) {
        results[c] = run_chain(histories, geo, priors, options, coords, start, stream.substream(c));
    });

    PosteriorDraws out;
    out.names = parameter_names();
    std::size_t rows = 0;
    for (const auto& r : results) rows += r.draws.size();
    out.values.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(kScalars));
    out.effects.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(histories.size()));
    std::vector<double> acc(kScalars + 1, 0.0);
    double kept = 0.0;
    Eigen::Index r = 0;
    for (std::size_t c = 0; c < results.size(); ++c) {
        const auto& res = results[c];
        for (std::size_t k = 0; k < res.draws.size(); ++k, ++r) {
            const MtrpParams p = coords.decode(res.draws[k]);
            out.values.row(r) << p.component.shape, p.subsystem.shape, p.trend_shape, p.trend_scale, p.gamma, p.sigma_r;
            for (std::size_t i = 0; i < histories.size(); ++i)
                out.effects(r, static_cast<Eigen::Index>(i)) = res.effects[k][i];
            out.chain.push_back(static_cast<int>(c));
            out.iteration.push_back(res.iteration[k]);
        }
        for (std::size_t j = 0; j <= kScalars; ++j) acc[j] += res.accepted[j];
        kept += static_cast<double>(res.kept_iterations);
    }
    for (double& a : acc) a /= kept;
    // Last entry is the mean acceptance of the per-unit effect updates.
    out.acceptance = acc;
    return out;
}

MtrpParams params_from_row(const PosteriorDraws& draws, std::size_t row)
{
    const auto r = static_cast<Eigen::Index>(row);
    MtrpParams p;
    p.component.shape = draws.values(r, static_cast<Eigen::Index>(draws.column("component_shape")));
    p.subsystem.shape = draws.values(r, static_cast<Eigen::Index>(draws.column("subsystem_shape")));
    p.trend_shape = draws.values(r, static_cast<Eigen::Index>(draws.column("trend_shape")));
    p.trend_scale = draws.values(r, static_cast<Eigen::Index>(draws.column("trend_scale")));
    p.gamma = draws.values(r, static_cast<Eigen::Index>(draws.column("gamma")));
    p.sigma_r = draws.values(r, static_cast<Eigen::Index>(draws.column("sigma_r")));
    return p;
}

UsagePath extrapolate_usage(const EventHistory& history, double until, UsageExtrapolation rule, double step,
                            std::size_t trend_window)
{
    if (!(step > 0.0)) throw std::invalid_argument("extrapolation step must be positive");
    UsagePath out;
    std::vector<double> ts, xs;
    for (std::size_t k = 0; k < history.usage.times.size(); ++k) {
        if (history.usage.times[k] > history.tau && !out.times.empty() && out.times.back() >= history.tau) break;
        out.times.push_back(history.usage.times[k]);
        out.values.push_back(history.usage.values[k]);
    }
    const double x_tau = history.usage.at(history.tau);
    double slope = 0.0;
    if (rule == UsageExtrapolation::LINEAR) {
        for (std::size_t k = 0; k < out.times.size(); ++k)
            if (out.times[k] <= history.tau) {
                ts.push_back(out.times[k]);
                xs.push_back(out.values[k]);
            }
        if (ts.size() > trend_window) {
            ts.erase(ts.begin(), ts.end() - static_cast<std::ptrdiff_t>(trend_window));
            xs.erase(xs.begin(), xs.end() - static_cast<std::ptrdiff_t>(trend_window));
        }
        if (ts.size() >= 2) {
            const double mt = numeric::mean(ts), mx = numeric::mean(xs);
            double sxy = 0.0, sxx = 0.0;
            for (std::size_t k = 0; k < ts.size(); ++k) {
                sxy += (ts[k] - mt) * (xs[k] - mx);
                sxx += (ts[k] - mt) * (ts[k] - mt);
            }
            slope = sxx > 0.0 ? std::max(0.0, sxy / sxx) : 0.0;
        }
    }
    double t = out.times.empty() ? history.tau : std::max(out.times.back(), history.tau);
    while (t < until) {
        t += step;
        out.times.push_back(t);
        out.values.push_back(std::max(x_tau + slope * (t - history.tau), out.values.empty() ? x_tau : out.values.back()));
    }
    return out;
}

CountPrediction predict_counts(const PosteriorDraws& draws, std::span<const EventHistory> histories,
                               std::span<const double> horizons, const Rng& stream, const PredictOptions& options)
{
    if (draws.size() == 0) throw std::invalid_argument("no posterior draws");
    if (options.replicates < 1 || options.max_draws < 1) throw std::invalid_argument("replicates and draws must be positive");
    double h_max = 0.0;
    for (double h : horizons) {
        if (!(h >= 0.0)) throw std::invalid_argument("horizons must be nonnegative");
        h_max = std::max(h_max, h);
    }
    const bool have_effects = draws.effects.rows() == draws.values.rows() &&
                              draws.effects.cols() == static_cast<Eigen::Index>(histories.size());
    const std::size_t D = std::min(options.max_draws, draws.size());
    std::vector<std::size_t> rows(D);
    for (std::size_t d = 0; d < D; ++d) rows[d] = d * draws.size() / D;

    std::vector<UsagePath> usage;
    for (const auto& h : histories) usage.push_back(extrapolate_usage(h, h.tau + h_max + 1.0, options.rule));

    const std::size_t S = D * options.replicates;
    const std::size_t H = horizons.size();
    std::vector<std::vector<double>> counts(S, std::vector<double>(H, 0.0));
    numeric::parallel_for(S, [&](std::size_t s) {
        const std::size_t row = rows[s / options.replicates];
        const MtrpParams p = params_from_row(draws, row);
        Rng rng = stream.substream(s);
        for (std::size_t i = 0; i < histories.size(); ++i) {
            const double w = have_effects ? draws.effects(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(i))
                                          : p.sigma_r * rng.normal();
            if (h_max <= 0.0) continue;
            const auto ev = simulate_continuation(histories[i], p, w, usage[i], histories[i].tau + h_max, rng);
            for (const auto& e : ev) {
                if (e.type != EventType::COMPONENT) continue;
                for (std::size_t k = 0; k < H; ++k)
                    if (e.time <= histories[i].tau + horizons[k]) counts[s][k] += 1.0;
            }
        }
    });

    CountPrediction out;
    out.horizons.assign(horizons.begin(), horizons.end());
    const double a = 0.5 * (1.0 - options.level);
    for (std::size_t k = 0; k < H; ++k) {
        std::vector<double> col(S);
        for (std::size_t s = 0; s < S; ++s) col[s] = counts[s][k];
        out.mean.push_back(numeric::mean(col));
        out.lower.push_back(numeric::quantile(col, a));
        out.upper.push_back(numeric::quantile(col, 1.0 - a));
        out.samples.push_back(std::move(col));
    }
    return out;
}

}  // namespace relikit::mtrp
