#pragma once

#include <json.hpp>

#include "relikit/alt/alt.hpp"
#include "relikit/degradation/degradation.hpp"
#include "relikit/lifetime/lifetime.hpp"
#include "relikit/mtrp/mtrp.hpp"
#include "relikit/posterior.hpp"

/// JSON documents for fitted models, configs and campaign state. Doubles are
/// written in shortest round-trip form, so save followed by load is exact.
/// Non-finite values are written as null and read back as +inf.
namespace relikit::io {

using Json = nlohmann::json;

Json to_json(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_json(const Json& j);

Json to_json(const lifetime::LifetimeParams& p);
Json to_json(const lifetime::CovariateLmeParams& p);
Json to_json(const lifetime::LifetimeFit& f);
Json to_json(const lifetime::CovariateFit& f);

Json to_json(const degradation::ChannelSpline& c);
Json to_json(const degradation::SplineEffectSpec& s);
Json to_json(const degradation::PathParams& p);
Json to_json(const degradation::DegradationFit& f);
Json to_json(const degradation::CovariateProcessParams& p);
Json to_json(const degradation::CovariateProcessFit& f);

Json to_json(const mtrp::MtrpParams& p);
Json to_json(const PosteriorDraws& d);

Json to_json(const alt::MaterialTestConfig& c);
Json to_json(const alt::AltParams& p);
Json to_json(const alt::AltPriors& p);
Json to_json(const alt::UseProfile& p);
Json to_json(const alt::AltTestDatum& d);
Json to_json(const alt::SamplerOptions& s);
Json to_json(const alt::Proposal& p);
/// Campaign state without the posterior draws; the cache is summarized.
Json to_json(const alt::AltCampaignState& s);

template <class T>
T from_json(const Json& j);

template <> lifetime::LifetimeParams from_json(const Json& j);
template <> lifetime::CovariateLmeParams from_json(const Json& j);
template <> lifetime::LifetimeFit from_json(const Json& j);
template <> lifetime::CovariateFit from_json(const Json& j);
template <> degradation::ChannelSpline from_json(const Json& j);
template <> degradation::SplineEffectSpec from_json(const Json& j);
template <> degradation::PathParams from_json(const Json& j);
template <> degradation::DegradationFit from_json(const Json& j);
template <> degradation::CovariateProcessParams from_json(const Json& j);
template <> degradation::CovariateProcessFit from_json(const Json& j);
template <> mtrp::MtrpParams from_json(const Json& j);
template <> PosteriorDraws from_json(const Json& j);
template <> alt::MaterialTestConfig from_json(const Json& j);
template <> alt::AltParams from_json(const Json& j);
template <> alt::AltPriors from_json(const Json& j);
template <> alt::UseProfile from_json(const Json& j);
template <> alt::AltTestDatum from_json(const Json& j);
template <> alt::SamplerOptions from_json(const Json& j);
template <> alt::Proposal from_json(const Json& j);
template <> alt::AltCampaignState from_json(const Json& j);

/// Campaign settings accepted on creation; absent keys keep their defaults.
/// Keys: sigma_ult, R, freq, alpha, censor_cycles, q_lower, q_upper, grid,
/// priors, profile, p, seed, sampler, data.
alt::AltCampaignState campaign_from_config(const Json& config, const std::string& id);

/// Posterior draws as CSV: chain, iteration, then one column per parameter.
void write_draws_csv(const std::string& path, const PosteriorDraws& draws);
PosteriorDraws read_draws_csv(const std::string& path);

Json read_json_file(const std::string& path);
void write_json_file(const std::string& path, const Json& j);

}  // namespace relikit::io
