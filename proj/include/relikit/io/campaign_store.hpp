#pragma once

#include <string>
#include <vector>

#include "relikit/alt/alt.hpp"
#include "relikit/io/serialize.hpp"

namespace relikit::io {

/// One line of a campaign log. `version` is the campaign version after the
/// event was applied.
struct CampaignEvent {
    std::string type;  ///< created | proposed | recorded | posterior-refreshed
    long version = 0;
    std::string timestamp;
    Json payload = Json::object();
};

Json to_json(const CampaignEvent& e);
CampaignEvent event_from_json(const Json& j);

/// Applies one logged event. Proposals are recomputed and checked against the
/// logged value, so a log that does not replay exactly is rejected.
void apply_event(alt::AltCampaignState& state, const CampaignEvent& event);

/// Rebuilds a campaign from its events.
alt::AltCampaignState replay(const std::vector<CampaignEvent>& events);

/// Refreshes the posterior cache when stale; counts as a state change.
bool refresh_posterior(alt::AltCampaignState& state);

/// Append-only JSON-lines logs, one file `<dir>/<id>.jsonl` per campaign.
class CampaignStore {
  public:
    explicit CampaignStore(std::string dir);

    const std::string& dir() const { return dir_; }
    std::string log_path(const std::string& id) const;
    bool exists(const std::string& id) const;
    std::vector<std::string> list() const;

    std::vector<CampaignEvent> read_log(const std::string& id) const;
    void append(const std::string& id, const CampaignEvent& event) const;
    alt::AltCampaignState load(const std::string& id) const;

    /// Creates a campaign from a config document and logs it. Throws when the
    /// id is taken.
    alt::AltCampaignState create(const Json& config, const std::string& id) const;
    /// Next free id of the form c<N>.
    std::string next_id() const;

  private:
    std::string dir_;
};

/// Operations that change a campaign and log the resulting events.
alt::Proposal logged_propose(const CampaignStore& store, alt::AltCampaignState& state);
bool logged_record(const CampaignStore& store, alt::AltCampaignState& state, const alt::AltTestDatum& datum);

bool valid_campaign_id(const std::string& id);
std::string utc_timestamp();

}  // namespace relikit::io
