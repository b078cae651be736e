#pragma once

#include <string_view>

#include "relikit/rng.hpp"

namespace relikit::dist {

/// Standard member of a log-location-scale family. SEV pairs with the Weibull
/// distribution on the original time scale, NORMAL with the lognormal.
enum class StdKind { SEV, NORMAL };

std::string_view to_string(StdKind kind);
StdKind kind_from_string(std::string_view name);

struct LocScaleParams {
    double mu = 0.0;
    double sigma = 1.0;
};

void validate(const LocScaleParams& params);

double std_cdf(double z, StdKind kind);
double std_pdf(double z, StdKind kind);
/// 1 - std_cdf, computed without cancellation in the upper tail.
double std_survival(double z, StdKind kind);
double log_std_pdf(double z, StdKind kind);
double log_std_survival(double z, StdKind kind);
/// d/dz log std_pdf(z).
double dlog_std_pdf(double z, StdKind kind);
double std_quantile(double p, StdKind kind);

/// exp(mu + sigma * Z) with Z drawn from the standard distribution of `kind`.
double sample_log_loc_scale(const LocScaleParams& params, StdKind kind, Rng& rng);

/// Draw from the standard distribution.
double sample_std(StdKind kind, Rng& rng);

}  // namespace relikit::dist
