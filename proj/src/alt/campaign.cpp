#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "relikit/alt/alt.hpp"

namespace relikit::alt {

std::vector<double> AltCampaignState::design() const
{
    std::vector<double> out;
    out.reserve(data.size());
    for (const auto& d : data) out.push_back(d.q);
    return out;
}

const PosteriorDraws& ensure_posterior(AltCampaignState& state)
{
    if (!state.cache_fresh()) {
        const Rng stream(mix_seed(state.seed, static_cast<std::uint64_t>(state.data_version)));
        state.posterior = AltCampaignState::Cache{
            posterior_sample(state.priors, state.data, state.config, stream, state.sampler), state.data_version};
    }
    return state.posterior->draws;
}

Proposal propose_next(AltCampaignState& state)
{
    if (state.config.grid.empty()) throw std::invalid_argument("candidate grid is empty");
    const auto& draws = ensure_posterior(state);
    const auto design = state.design();
    const auto& grid = state.config.grid;
    Proposal prop;
    prop.round = static_cast<int>(state.data.size() - std::min(state.historical, state.data.size())) + 1;
    prop.objective_trace = sbd_objective_grid(grid, draws, design, state.profile, state.p, state.config);
    std::size_t best = grid.size();
    for (std::size_t g = 0; g < grid.size(); ++g) {
        if (best == grid.size()) {
            best = g;
            continue;
        }
        const double v = prop.objective_trace[g], b = prop.objective_trace[best];
        if (v < b || (v == b && grid[g] < grid[best])) best = g;
    }
    prop.q = grid[best];
    prop.objective = prop.objective_trace[best];
    // Re-proposing without new data replaces the pending proposal.
    if (!state.proposals.empty() && state.proposals.back().round >= prop.round)
        state.proposals.back() = prop;
    else
        state.proposals.push_back(prop);
    ++state.version;
    return prop;
}

bool record_result(AltCampaignState& state, double q, double cycles, bool censored)
{
    const AltTestDatum datum{q, cycles, censored};
    datum.validate();
    const bool matches = !state.proposals.empty() && std::abs(state.proposals.back().q - q) < 1e-9;
    state.data.push_back(datum);
    ++state.data_version;
    ++state.version;
    state.posterior.reset();
    return matches;
}

std::vector<AltTestDatum> simulate_history(const AltParams& truth, const MaterialTestConfig& config,
                                           std::span<const double> stresses, Rng& rng)
{
    std::vector<AltTestDatum> out;
    for (double x : stresses) out.push_back(simulate_test(x / config.sigma_ult, truth, config, rng));
    return out;
}

CampaignTrace run_campaign_sim(const AltParams& truth, const AltPriors& priors, const MaterialTestConfig& config,
                               int n_new, const Rng& stream, const CampaignSimOptions& options,
                               std::optional<std::vector<AltTestDatum>> history)
{
    if (n_new < 1) throw std::invalid_argument("n_new must be at least 1");
    truth.validate();
    config.validate();
    CampaignTrace trace;
    if (history) {
        trace.history = *history;
    } else {
        Rng hist_rng = stream.substream(0);
        trace.history = simulate_history(truth, config, options.historical_stress, hist_rng);
    }

    AltCampaignState state;
    state.config = config;
    state.priors = priors;
    state.profile = options.profile;
    state.p = options.p;
    state.sampler = options.sampler;
    state.seed = mix_seed(stream.seed(), 1);
    state.data = trace.history;
    state.historical = trace.history.size();

    Rng outcomes = stream.substream(2);
    for (int r = 0; r < n_new; ++r) {
        const Proposal prop = propose_next(state);
        const AltTestDatum datum = simulate_test(prop.q, truth, config, outcomes);
        record_result(state, datum.q, datum.cycles, datum.censored);
        trace.rounds.push_back({prop.round, prop.q, datum, prop.objective});
        trace.avar_path.push_back(prop.objective);
    }
    trace.final_fit = fit_alt_ml(state.data, config);
    trace.final_avar = weighted_avar(trace.final_fit.params, state.design(), options.profile, options.p, config).value;
    return trace;
}

LocalDesignTrace run_local_design_sim(const AltParams& truth, const MaterialTestConfig& config, int n_new,
                                      const Rng& stream, const CampaignSimOptions& options,
                                      const std::vector<AltTestDatum>& history)
{
    if (n_new < 1) throw std::invalid_argument("n_new must be at least 1");
    LocalDesignTrace out;
    out.history = history;
    out.planning_fit = fit_alt_ml(history, config);
    std::vector<double> base;
    for (const auto& d : history) base.push_back(d.q);
    out.allocation = local_c_optimal(out.planning_fit.params, config.grid, n_new, options.profile, options.p, config, base);
    out.data = history;
    Rng outcomes = stream.substream(3);
    for (std::size_t g = 0; g < out.allocation.grid.size(); ++g)
        for (int k = 0; k < out.allocation.counts[g]; ++k)
            out.data.push_back(simulate_test(out.allocation.grid[g], truth, config, outcomes));
    out.final_fit = fit_alt_ml(out.data, config);
    std::vector<double> design;
    for (const auto& d : out.data) design.push_back(d.q);
    out.final_avar = weighted_avar(out.final_fit.params, design, options.profile, options.p, config).value;
    return out;
}

}  // namespace relikit::alt
