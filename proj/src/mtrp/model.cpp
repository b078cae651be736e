#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "core.hpp"
#include "relikit/mtrp/mtrp.hpp"

namespace relikit::mtrp {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

void UsagePath::validate() const
{
    if (times.empty() || times.size() != values.size()) throw std::invalid_argument("usage path needs matching times and values");
    double prev_t = 0.0, prev_v = 0.0;
    for (std::size_t k = 0; k < times.size(); ++k) {
        if (!(times[k] > prev_t) && !(k == 0 && times[k] >= 0.0))
            throw std::invalid_argument("usage times must be increasing");
        if (!(values[k] > 0.0)) throw std::domain_error("usage must be positive");
        if (values[k] < prev_v) throw std::invalid_argument("cumulative usage must be nondecreasing");
        prev_t = times[k];
        prev_v = values[k];
    }
}

double UsagePath::at(double t) const
{
    const auto it = std::lower_bound(times.begin(), times.end(), t);
    if (it == times.end()) return values.back();
    return values[static_cast<std::size_t>(it - times.begin())];
}

void EventHistory::validate() const
{
    const std::string who = "unit " + unit_id + ": ";
    if (!(tau >= 0.0) || !std::isfinite(tau)) throw std::invalid_argument(who + "observation end must be nonnegative");
    double prev = 0.0;
    for (const auto& e : events) {
        if (!(e.time > prev)) throw std::invalid_argument(who + "event times must be positive and strictly increasing");
        prev = e.time;
    }
    if (!events.empty() && !(events.back().time < tau)) throw std::invalid_argument(who + "events must precede tau");
    try {
        usage.validate();
    } catch (const std::exception& ex) {
        throw std::invalid_argument(who + ex.what());
    }
}

std::size_t EventHistory::count(EventType type) const
{
    return static_cast<std::size_t>(std::count_if(events.begin(), events.end(), [&](const Event& e) { return e.type == type; }));
}

EventHistory EventHistory::truncated(double t) const
{
    EventHistory out;
    out.unit_id = unit_id;
    out.tau = std::min(tau, t);
    for (const auto& e : events)
        if (e.time < out.tau) out.events.push_back(e);
    for (std::size_t k = 0; k < usage.times.size(); ++k) {
        out.usage.times.push_back(usage.times[k]);
        out.usage.values.push_back(usage.values[k]);
        if (usage.times[k] >= out.tau) break;
    }
    return out;
}

double Renewal::scale() const
{
    return 1.0 / std::tgamma(1.0 + 1.0 / shape);
}

double Renewal::hazard(double x) const
{
    const double s = scale();
    if (x <= 0.0) return shape < 1.0 ? kInf : (shape == 1.0 ? 1.0 / s : 0.0);
    return shape / s * std::pow(x / s, shape - 1.0);
}

double Renewal::cumulative_hazard(double x) const
{
    if (x <= 0.0) return 0.0;
    return std::pow(x / scale(), shape);
}

double Renewal::inverse_cumulative_hazard(double h) const
{
    if (h <= 0.0) return 0.0;
    return scale() * std::pow(h, 1.0 / shape);
}

double Renewal::log_density(double x) const
{
    if (x <= 0.0) return -kInf;
    const double s = scale();
    const double z = std::log(x / s);
    return std::log(shape / s) + (shape - 1.0) * z - std::exp(shape * z);
}

std::string invalid_reason(const MtrpParams& p)
{
    auto pos = [](double v) { return std::isfinite(v) && v > 0.0; };
    if (!pos(p.component.shape)) return "component renewal shape must be positive";
    if (!pos(p.subsystem.shape)) return "subsystem renewal shape must be positive";
    if (!pos(p.trend_shape)) return "trend shape must be positive";
    if (!pos(p.trend_scale)) return "trend scale must be positive";
    if (!std::isfinite(p.gamma)) return "gamma must be finite";
    if (!(std::isfinite(p.sigma_r) && p.sigma_r >= 0.0)) return "sigma_r must be nonnegative";
    return {};
}

void MtrpParams::validate() const
{
    if (const auto r = invalid_reason(*this); !r.empty()) throw std::invalid_argument(r);
}

double MtrpParams::trend(double t) const
{
    if (t <= 0.0) return trend_shape < 1.0 ? kInf : (trend_shape == 1.0 ? 1.0 / trend_scale : 0.0);
    return trend_shape / trend_scale * std::pow(t / trend_scale, trend_shape - 1.0);
}

double MtrpParams::cumulative_trend(double t) const
{
    return t <= 0.0 ? 0.0 : std::pow(t / trend_scale, trend_shape);
}

TrendScale::TrendScale(const MtrpParams& params, const UsagePath& usage, double effect)
    : shape_(params.trend_shape), scale_(params.trend_scale), gamma_(params.gamma), effect_(effect)
{
    knots_.push_back(0.0);
    for (std::size_t k = 0; k < usage.times.size(); ++k) {
        if (!(usage.values[k] > 0.0)) throw std::domain_error("usage must be positive");
        const double w = std::exp(gamma_ * std::log(usage.values[k]) + effect_);
        if (usage.times[k] > knots_.back()) {
            weights_.push_back(w);
            knots_.push_back(usage.times[k]);
        }
    }
    // Open-ended last step carries the last usage value.
    weights_.push_back(std::exp(gamma_ * std::log(usage.values.back()) + effect_));
    prefix_.assign(knots_.size(), 0.0);
    for (std::size_t k = 1; k < knots_.size(); ++k)
        prefix_[k] = prefix_[k - 1] + weights_[k - 1] * (params.cumulative_trend(knots_[k]) - params.cumulative_trend(knots_[k - 1]));
}

double TrendScale::intensity(double t) const
{
    const auto it = std::lower_bound(knots_.begin() + 1, knots_.end(), t);
    const auto k = static_cast<std::size_t>(it - knots_.begin()) - 1;
    const double base = t <= 0.0 ? 0.0 : shape_ / scale_ * std::pow(t / scale_, shape_ - 1.0);
    return weights_[k] * base;
}

double TrendScale::cumulative(double t) const
{
    if (t <= 0.0) return 0.0;
    const auto it = std::lower_bound(knots_.begin() + 1, knots_.end(), t);
    const auto k = static_cast<std::size_t>(it - knots_.begin()) - 1;
    return prefix_[k] + weights_[k] * (std::pow(t / scale_, shape_) - std::pow(knots_[k] / scale_, shape_));
}

double TrendScale::inverse(double value) const
{
    if (value <= 0.0) return 0.0;
    if (!std::isfinite(value)) return kInf;
    const auto it = std::upper_bound(prefix_.begin(), prefix_.end(), value);
    const auto k = static_cast<std::size_t>(it - prefix_.begin()) - 1;
    if (!(weights_[k] > 0.0)) return kInf;
    const double c = std::pow(knots_[k] / scale_, shape_) + (value - prefix_[k]) / weights_[k];
    return scale_ * std::pow(c, 1.0 / shape_);
}

namespace detail {

UnitTransform transform(const EventHistory& h, const MtrpParams& params)
{
    const TrendScale ts(params, h.usage, 0.0);
    UnitTransform u;
    for (const auto& e : h.events) {
        u.types.push_back(e.type);
        u.cumulative.push_back(ts.cumulative(e.time));
        u.intensity.push_back(ts.intensity(e.time));
    }
    u.cumulative.push_back(ts.cumulative(h.tau));
    return u;
}

double loglik(const UnitTransform& u, const Renewal& component, const Renewal& subsystem, double effect)
{
    const double scale = std::exp(effect);
    double ll = 0.0;
    double L_sub = 0.0;   // trend scale at the last subsystem event
    double S_sub = 0.0;   // subsystem scale at the last subsystem event
    double S_prev = 0.0;  // subsystem scale at the last event of any type
    for (std::size_t j = 0; j < u.types.size(); ++j) {
        const double L = scale * u.cumulative[j];
        const double S = S_sub + subsystem.cumulative_hazard(L - L_sub);
        const double gap = S - S_prev;
        if (u.types[j] == EventType::COMPONENT) {
            const double lam_s = subsystem.hazard(L - L_sub) * scale * u.intensity[j];
            ll += component.log_density(gap) + std::log(lam_s);
        } else {
            ll -= component.cumulative_hazard(gap);
            L_sub = L;
            S_sub = S;
        }
        S_prev = S;
    }
    const double L = scale * u.cumulative.back();
    const double S = S_sub + subsystem.cumulative_hazard(L - L_sub);
    ll -= component.cumulative_hazard(S - S_prev);
    return std::isnan(ll) ? -kInf : ll;
}

}  // namespace detail

Intensities intensity_eval(double t, const EventHistory& history, const MtrpParams& params, double effect)
{
    params.validate();
    if (!(t > 0.0 && t <= history.tau)) throw std::invalid_argument("t must lie in (0, tau]");
    if (!(history.usage.at(t) > 0.0)) throw std::domain_error("usage must be positive");
    const TrendScale ts(params, history.usage, effect);
    const double L = ts.cumulative(t);
    double L_sub = 0.0, S_sub = 0.0, S_last = 0.0;
    for (const auto& e : history.events) {
        if (e.time >= t) break;
        const double Le = ts.cumulative(e.time);
        const double Se = S_sub + params.subsystem.cumulative_hazard(Le - L_sub);
        if (e.type == EventType::SUBSYSTEM) {
            L_sub = Le;
            S_sub = Se;
        }
        S_last = Se;
    }
    const double S = S_sub + params.subsystem.cumulative_hazard(L - L_sub);
    Intensities out;
    out.trend = ts.intensity(t);
    out.subsystem = params.subsystem.hazard(L - L_sub) * out.trend;
    out.component = params.component.hazard(S - S_last) * out.subsystem;
    return out;
}

double unit_loglik(const EventHistory& history, const MtrpParams& params, double effect)
{
    if (!invalid_reason(params).empty()) return -kInf;
    return detail::loglik(detail::transform(history, params), params.component, params.subsystem, effect);
}

double mtrp_loglik(const MtrpParams& params, std::span<const EventHistory> histories, std::span<const double> effects)
{
    if (!invalid_reason(params).empty()) return -kInf;
    if (!effects.empty() && effects.size() != histories.size())
        throw std::invalid_argument("one effect per history is required");
    double ll = 0.0;
    for (std::size_t i = 0; i < histories.size(); ++i)
        ll += unit_loglik(histories[i], params, effects.empty() ? 0.0 : effects[i]);
    return ll;
}

std::vector<double> compensator_increments(const EventHistory& history, const MtrpParams& params, double effect)
{
    params.validate();
    const TrendScale ts(params, history.usage, effect);
    std::vector<double> out;
    double L_sub = 0.0, S_sub = 0.0, S_prev = 0.0, acc = 0.0;
    for (const auto& e : history.events) {
        const double L = ts.cumulative(e.time);
        const double S = S_sub + params.subsystem.cumulative_hazard(L - L_sub);
        acc += params.component.cumulative_hazard(S - S_prev);
        if (e.type == EventType::COMPONENT) {
            out.push_back(acc);
            acc = 0.0;
        } else {
            L_sub = L;
            S_sub = S;
        }
        S_prev = S;
    }
    return out;
}

std::vector<std::string> parameter_names()
{
    return {"component_shape", "subsystem_shape", "trend_shape", "trend_scale", "gamma", "sigma_r"};
}

}  // namespace relikit::mtrp
