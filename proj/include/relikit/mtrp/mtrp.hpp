#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "relikit/posterior.hpp"
#include "relikit/rng.hpp"

namespace relikit::mtrp {

enum class EventType { SUBSYSTEM = 0, COMPONENT = 1 };

struct Event {
    double time = 0.0;
    EventType type = EventType::COMPONENT;
};

/// Cumulative usage as a step path: values[k] holds on (times[k-1], times[k]],
/// the first value before times[0] and the last one after times.back().
struct UsagePath {
    std::vector<double> times;
    std::vector<double> values;

    void validate() const;
    double at(double t) const;
};

struct EventHistory {
    std::string unit_id;
    double tau = 0.0;
    std::vector<Event> events;
    UsagePath usage;

    void validate() const;
    std::size_t count(EventType type) const;
    /// History restricted to (0, t].
    EventHistory truncated(double t) const;
};

/// Weibull renewal distribution with unit mean; the scale follows from the shape.
struct Renewal {
    double shape = 1.0;

    double scale() const;
    double hazard(double x) const;
    double cumulative_hazard(double x) const;
    double inverse_cumulative_hazard(double h) const;
    double log_density(double x) const;
};

struct MtrpParams {
    Renewal component;
    Renewal subsystem;
    /// Power-law trend (shape/scale)(t/scale)^(shape-1).
    double trend_shape = 1.0;
    double trend_scale = 1.0;
    double gamma = 0.0;
    double sigma_r = 0.0;

    void validate() const;
    double trend(double t) const;
    double cumulative_trend(double t) const;
};

/// Baseline cumulative intensity of one unit, closed form over usage steps.
class TrendScale {
  public:
    TrendScale(const MtrpParams& params, const UsagePath& usage, double effect);

    double intensity(double t) const;
    double cumulative(double t) const;
    /// Smallest t with cumulative(t) = value; +inf when never reached.
    double inverse(double value) const;

  private:
    double shape_, scale_, gamma_, effect_;
    std::vector<double> knots_;   // step boundaries, starting at 0
    std::vector<double> weights_; // exp(w) X^gamma on each step, last one open-ended
    std::vector<double> prefix_;  // cumulative intensity at each knot
};

struct Intensities {
    double trend = 0.0;      // lambda_i
    double subsystem = 0.0;  // lambda_i^s
    double component = 0.0;  // lambda_i^c
};

Intensities intensity_eval(double t, const EventHistory& history, const MtrpParams& params, double effect = 0.0);

/// Log-likelihood of one unit's component process; -inf for invalid parameters.
double unit_loglik(const EventHistory& history, const MtrpParams& params, double effect);
double mtrp_loglik(const MtrpParams& params, std::span<const EventHistory> histories,
                   std::span<const double> effects = {});
/// Reason the likelihood is -inf, empty when the parameters are valid.
std::string invalid_reason(const MtrpParams& params);

/// Compensator of the component process between consecutive component events
/// (and from the last one to tau). Unit exponential under the model.
std::vector<double> compensator_increments(const EventHistory& history, const MtrpParams& params, double effect);

EventHistory simulate_mtrp(const MtrpParams& params, double tau, const UsagePath& usage, Rng& rng,
                           double effect = 0.0);

/// Continues a history from its tau to `until`, returning the new events only.
std::vector<Event> simulate_continuation(const EventHistory& history, const MtrpParams& params, double effect,
                                         const UsagePath& usage, double until, Rng& rng);

struct Prior {
    double mean = 0.0;
    double sd = 10.0;
};

/// Normal priors on log shapes, log trend scale and gamma; half-normal on sigma_r.
struct MtrpPriors {
    Prior log_component_shape{0.0, 10.0};
    Prior log_subsystem_shape{0.0, 10.0};
    Prior log_trend_shape{0.0, 10.0};
    Prior log_trend_scale{0.0, 10.0};
    Prior gamma{0.0, 10.0};
    double sigma_r_scale = 5.0;
};

struct McmcOptions {
    std::size_t chains = 2;
    std::size_t burn_in = 2000;
    std::size_t iterations = 3000;
    std::size_t thin = 1;
    std::optional<MtrpParams> start;
};

PosteriorDraws fit_mtrp_bayes(std::span<const EventHistory> histories, const MtrpPriors& priors,
                              const McmcOptions& options, const Rng& stream);

MtrpParams params_from_row(const PosteriorDraws& draws, std::size_t row);

enum class UsageExtrapolation { CARRY_FORWARD, LINEAR };

/// Usage path extended beyond tau at the given spacing.
UsagePath extrapolate_usage(const EventHistory& history, double until, UsageExtrapolation rule, double step = 1.0,
                            std::size_t trend_window = 12);

struct CountPrediction {
    std::vector<double> horizons;
    std::vector<double> mean;
    std::vector<double> lower;
    std::vector<double> upper;
    std::vector<std::vector<double>> samples;  // per horizon
};

struct PredictOptions {
    std::size_t max_draws = 200;
    std::size_t replicates = 1;
    double level = 0.95;
    UsageExtrapolation rule = UsageExtrapolation::CARRY_FORWARD;
};

/// Predicted fleet count of component events in (tau_i, tau_i + t*] for each t*.
CountPrediction predict_counts(const PosteriorDraws& draws, std::span<const EventHistory> histories,
                               std::span<const double> horizons, const Rng& stream,
                               const PredictOptions& options = {});

std::vector<std::string> parameter_names();

}  // namespace relikit::mtrp
