#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "relikit/lifetime/lifetime.hpp"

namespace relikit::lifetime {

void UseRateSeries::validate() const
{
    if (times.empty()) throw std::invalid_argument("covariate series has no observations");
    if (times.size() != values.size()) throw std::invalid_argument("covariate times/values size mismatch");
    if (!(baseline_rate > 0.0)) throw std::invalid_argument("baseline use rate must be positive");
    for (std::size_t k = 0; k < times.size(); ++k) {
        if (!(times[k] > 0.0) || !std::isfinite(times[k]))
            throw std::invalid_argument("covariate epochs must be positive");
        if (k > 0 && !(times[k] > times[k - 1]))
            throw std::invalid_argument("covariate epochs must be strictly increasing");
        if (!std::isfinite(values[k])) throw std::invalid_argument("covariate values must be finite");
    }
}

double UseRateSeries::value_at(double t) const
{
    if (times.empty()) throw std::invalid_argument("covariate series has no observations");
    const auto it = std::lower_bound(times.begin(), times.end(), t);
    if (it == times.end()) return values.back();
    return values[static_cast<std::size_t>(it - times.begin())];
}

UseRateSeries UseRateSeries::from_rates(std::vector<double> times, std::span<const double> rates,
                                        double baseline_rate)
{
    if (!(baseline_rate > 0.0)) throw std::invalid_argument("baseline use rate must be positive");
    if (times.size() != rates.size()) throw std::invalid_argument("times/rates size mismatch");
    UseRateSeries s;
    s.times = std::move(times);
    s.baseline_rate = baseline_rate;
    s.values.reserve(rates.size());
    for (double r : rates) {
        if (!(r > 0.0)) throw std::invalid_argument("use rates must be positive");
        s.values.push_back(std::log(r / baseline_rate));
    }
    s.rates.assign(rates.begin(), rates.end());
    return s;
}

void LifetimeUnitRecord::validate() const
{
    if (!(event_time > 0.0)) throw std::invalid_argument("unit " + unit_id + ": event time must be positive");
    covariates.validate();
    if (covariates.times.back() > event_time + 1e-9)
        throw std::invalid_argument("unit " + unit_id + ": covariate observed after event time");
}

void LifetimeParams::validate() const
{
    if (!std::isfinite(mu0) || !std::isfinite(beta)) throw std::invalid_argument("lifetime parameters must be finite");
    if (!(sigma0 > 0.0)) throw std::invalid_argument("sigma0 must be positive");
}

ExposureCurve::ExposureCurve(std::span<const double> times, std::span<const double> values, double beta)
{
    if (times.empty() || times.size() != values.size())
        throw std::invalid_argument("exposure needs a nonempty covariate path");
    times_.assign(times.begin(), times.end());
    rates_.resize(times.size());
    cumulative_.resize(times.size());
    double prev = 0.0, acc = 0.0;
    for (std::size_t k = 0; k < times.size(); ++k) {
        rates_[k] = std::exp(beta * values[k]);
        acc += rates_[k] * (times[k] - prev);
        cumulative_[k] = acc;
        prev = times[k];
    }
}

double ExposureCurve::at(double t) const
{
    if (t <= 0.0) return 0.0;
    const auto it = std::lower_bound(times_.begin(), times_.end(), t);
    if (it == times_.end()) return cumulative_.back() + rates_.back() * (t - times_.back());
    const auto k = static_cast<std::size_t>(it - times_.begin());
    return cumulative_[k] - rates_[k] * (times_[k] - t);
}

double ExposureCurve::rate_at(double t) const
{
    const auto it = std::lower_bound(times_.begin(), times_.end(), t);
    if (it == times_.end()) return rates_.back();
    return rates_[static_cast<std::size_t>(it - times_.begin())];
}

double ExposureCurve::inverse(double u) const
{
    if (u <= 0.0) return 0.0;
    const auto it = std::lower_bound(cumulative_.begin(), cumulative_.end(), u);
    if (it == cumulative_.end()) return times_.back() + (u - cumulative_.back()) / rates_.back();
    const auto k = static_cast<std::size_t>(it - cumulative_.begin());
    return times_[k] - (cumulative_[k] - u) / rates_[k];
}

double exposure(double t, double beta, const UseRateSeries& covariates)
{
    if (covariates.empty()) throw std::invalid_argument("exposure of an empty covariate series");
    if (t < 0.0) throw std::domain_error("exposure time must be nonnegative");
    return ExposureCurve(covariates.times, covariates.values, beta).at(t);
}

double lifetime_cdf(double t, const LifetimeParams& params, const UseRateSeries& covariates, dist::StdKind kind)
{
    params.validate();
    const double u = exposure(t, params.beta, covariates);
    if (u <= 0.0) return 0.0;
    return dist::std_cdf((std::log(u) - params.mu0) / params.sigma0, kind);
}

}  // namespace relikit::lifetime
