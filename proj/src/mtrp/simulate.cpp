#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "relikit/mtrp/mtrp.hpp"

namespace relikit::mtrp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct ProcessState {
    double time = 0.0;
    double trend_at = 0.0;        // trend scale at `time`
    double subsystem_age = 0.0;   // trend-scale age of the current subsystem gap
    double component_age = 0.0;   // subsystem-scale age since the last event
};

// Residual life on a cumulative-hazard scale for a unit of the given age.
double residual(const Renewal& r, double age, Rng& rng)
{
    const double target = r.cumulative_hazard(age) + rng.exponential();
    return r.inverse_cumulative_hazard(target) - age;
}

void run(ProcessState s, const MtrpParams& params, const TrendScale& ts, double until, Rng& rng,
         std::vector<Event>& out)
{
    const Renewal& rc = params.component;
    const Renewal& rs = params.subsystem;
    while (s.time < until) {
        const double d_sub = residual(rs, s.subsystem_age, rng);
        const double t_sub = ts.inverse(s.trend_at + d_sub);
        // Component residual on the subsystem scale, mapped back to the trend scale.
        const double y = residual(rc, s.component_age, rng);
        const double h0 = rs.cumulative_hazard(s.subsystem_age);
        const double d_comp = rs.inverse_cumulative_hazard(h0 + y) - s.subsystem_age;
        const double t_comp = ts.inverse(s.trend_at + d_comp);
        const double next = std::min(t_sub, t_comp);
        if (!(next < until)) break;
        if (!(next > s.time)) break;
        if (t_comp < t_sub) {
            out.push_back({t_comp, EventType::COMPONENT});
            s.subsystem_age += d_comp;
            s.trend_at += d_comp;
        } else {
            out.push_back({t_sub, EventType::SUBSYSTEM});
            s.subsystem_age = 0.0;
            s.trend_at += d_sub;
        }
        s.component_age = 0.0;
        s.time = next;
    }
}

}  // namespace

EventHistory simulate_mtrp(const MtrpParams& params, double tau, const UsagePath& usage, Rng& rng, double effect)
{
    params.validate();
    if (!(tau >= 0.0)) throw std::invalid_argument("tau must be nonnegative");
    usage.validate();
    EventHistory h;
    h.tau = tau;
    h.usage = usage;
    if (tau == 0.0) return h;
    const TrendScale ts(params, usage, effect);
    if (!(ts.cumulative(tau) > 0.0)) return h;
    run(ProcessState{}, params, ts, tau, rng, h.events);
    return h;
}

std::vector<Event> simulate_continuation(const EventHistory& history, const MtrpParams& params, double effect,
                                         const UsagePath& usage, double until, Rng& rng)
{
    params.validate();
    std::vector<Event> out;
    if (!(until > history.tau)) return out;
    const TrendScale ts(params, usage, effect);
    ProcessState s;
    s.time = history.tau;
    s.trend_at = ts.cumulative(history.tau);
    double L_sub = 0.0, S_sub = 0.0, S_prev = 0.0;
    for (const auto& e : history.events) {
        const double L = ts.cumulative(e.time);
        const double S = S_sub + params.subsystem.cumulative_hazard(L - L_sub);
        if (e.type == EventType::SUBSYSTEM) {
            L_sub = L;
            S_sub = S;
        }
        S_prev = S;
    }
    s.subsystem_age = s.trend_at - L_sub;
    s.component_age = S_sub + params.subsystem.cumulative_hazard(s.subsystem_age) - S_prev;
    run(s, params, ts, until, rng, out);
    return out;
}

}  // namespace relikit::mtrp
