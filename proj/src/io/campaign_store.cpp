#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "relikit/io/campaign_store.hpp"
#include "relikit/io/csv.hpp"

namespace relikit::io {

namespace fs = std::filesystem;

std::string utc_timestamp()
{
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
    char out[40];
    std::snprintf(out, sizeof out, "%s.%03dZ", buf, static_cast<int>(ms));
    return out;
}

bool valid_campaign_id(const std::string& id)
{
    if (id.empty() || id.size() > 64) return false;
    return std::all_of(id.begin(), id.end(), [](char c) {
        return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' || c == '_';
    });
}

Json to_json(const CampaignEvent& e)
{
    return {{"type", e.type}, {"version", e.version}, {"timestamp", e.timestamp}, {"payload", e.payload}};
}

CampaignEvent event_from_json(const Json& j)
{
    CampaignEvent e;
    e.type = j.at("type").get<std::string>();
    e.version = j.at("version").get<long>();
    e.timestamp = j.value("timestamp", std::string());
    if (j.contains("payload")) e.payload = j.at("payload");
    return e;
}

bool refresh_posterior(alt::AltCampaignState& state)
{
    if (state.cache_fresh()) return false;
    alt::ensure_posterior(state);
    ++state.version;
    return true;
}

void apply_event(alt::AltCampaignState& state, const CampaignEvent& e)
{
    if (e.type == "created") {
        state = campaign_from_config(e.payload.at("config"), e.payload.at("id").get<std::string>());
    } else if (e.type == "posterior-refreshed") {
        if (!refresh_posterior(state)) throw std::runtime_error("log refreshes a posterior that is already fresh");
    } else if (e.type == "proposed") {
        const auto prop = alt::propose_next(state);
        if (prop.q != e.payload.at("q").get<double>() || prop.round != e.payload.at("round").get<int>())
            throw std::runtime_error("replayed proposal differs from the logged one at version " +
                                     std::to_string(e.version));
    } else if (e.type == "recorded") {
        const auto d = from_json<alt::AltTestDatum>(e.payload);
        alt::record_result(state, d.q, d.cycles, d.censored);
    } else {
        throw std::runtime_error("unknown campaign event '" + e.type + "'");
    }
    if (state.version != e.version)
        throw std::runtime_error("event version " + std::to_string(e.version) + " does not match replayed version " +
                                 std::to_string(state.version));
}

alt::AltCampaignState replay(const std::vector<CampaignEvent>& events)
{
    if (events.empty() || events.front().type != "created") throw std::runtime_error("campaign log must start with 'created'");
    alt::AltCampaignState state;
    long prev = -1;
    for (const auto& e : events) {
        if (e.version <= prev) throw std::runtime_error("campaign log versions must be strictly increasing");
        prev = e.version;
        apply_event(state, e);
    }
    return state;
}

CampaignStore::CampaignStore(std::string dir) : dir_(std::move(dir))
{
    if (dir_.empty()) dir_ = ".";
    fs::create_directories(dir_);
}

std::string CampaignStore::log_path(const std::string& id) const
{
    if (!valid_campaign_id(id)) throw std::invalid_argument("invalid campaign id '" + id + "'");
    return (fs::path(dir_) / (id + ".jsonl")).string();
}

bool CampaignStore::exists(const std::string& id) const { return valid_campaign_id(id) && fs::exists(log_path(id)); }

std::vector<std::string> CampaignStore::list() const
{
    std::vector<std::string> out;
    for (const auto& entry : fs::directory_iterator(dir_)) {
        if (entry.path().extension() != ".jsonl") continue;
        const std::string id = entry.path().stem().string();
        if (valid_campaign_id(id)) out.push_back(id);
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<CampaignEvent> CampaignStore::read_log(const std::string& id) const
{
    const std::string path = log_path(id);
    std::ifstream in(path);
    if (!in) throw std::out_of_range("unknown campaign '" + id + "'");
    std::vector<CampaignEvent> out;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.empty()) continue;
        try {
            out.push_back(event_from_json(Json::parse(line)));
        } catch (const Json::exception& e) {
            throw DataError(path, n, 0, std::string("malformed event: ") + e.what());
        }
    }
    return out;
}

void CampaignStore::append(const std::string& id, const CampaignEvent& event) const
{
    std::ofstream out(log_path(id), std::ios::app | std::ios::binary);
    if (!out) throw std::runtime_error("cannot write campaign log " + log_path(id));
    out << to_json(event).dump() << '\n';
    out.flush();
    if (!out) throw std::runtime_error("failed writing campaign log " + log_path(id));
}

alt::AltCampaignState CampaignStore::load(const std::string& id) const { return replay(read_log(id)); }

std::string CampaignStore::next_id() const
{
    for (std::size_t n = 1;; ++n) {
        const std::string id = "c" + std::to_string(n);
        if (!exists(id)) return id;
    }
}

alt::AltCampaignState CampaignStore::create(const Json& config, const std::string& id) const
{
    if (!valid_campaign_id(id)) throw std::invalid_argument("invalid campaign id '" + id + "'");
    auto state = campaign_from_config(config, id);
    if (exists(id)) throw std::logic_error("campaign '" + id + "' already exists");
    append(id, {"created", state.version, utc_timestamp(), {{"id", id}, {"config", config}}});
    return state;
}

alt::Proposal logged_propose(const CampaignStore& store, alt::AltCampaignState& state)
{
    const auto data_version = state.data_version;
    if (refresh_posterior(state))
        store.append(state.id, {"posterior-refreshed", state.version, utc_timestamp(), {{"data_version", data_version}}});
    const auto prop = alt::propose_next(state);
    store.append(state.id, {"proposed", state.version, utc_timestamp(), to_json(prop)});
    return prop;
}

bool logged_record(const CampaignStore& store, alt::AltCampaignState& state, const alt::AltTestDatum& datum)
{
    const bool matches = alt::record_result(state, datum.q, datum.cycles, datum.censored);
    store.append(state.id, {"recorded", state.version, utc_timestamp(), to_json(datum)});
    return matches;
}

}  // namespace relikit::io
