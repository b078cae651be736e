#include <algorithm>
#include <cctype>
#include <stdexcept>
#include <thread>

#include "relikit/io/service.hpp"

#include <httplib.h>

namespace relikit::io {

namespace {

std::string lower(std::string s)
{
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

HttpResponse error(int status, const std::string& message)
{
    HttpResponse r;
    r.status = status;
    r.body = {{"error", message}};
    return r;
}

std::vector<std::string> split_path(const std::string& path)
{
    std::vector<std::string> out;
    std::string cur;
    const std::string p = path.substr(0, path.find('?'));
    for (char c : p) {
        if (c == '/') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

Json parse_body(const std::string& body)
{
    if (body.empty()) return Json::object();
    return Json::parse(body);
}

}  // namespace

std::optional<std::string> HttpRequest::header(const std::string& name) const
{
    const std::string want = lower(name);
    for (const auto& [k, v] : headers)
        if (lower(k) == want) return v;
    return std::nullopt;
}

Json campaign_view(const alt::AltCampaignState& s)
{
    Json view = to_json(s);
    Json rounds = Json::array();
    for (std::size_t i = 0; i < s.data.size(); ++i)
        rounds.push_back(i < s.historical ? 0 : static_cast<long>(i - s.historical + 1));
    Json avar = Json::array();
    for (const auto& p : s.proposals) avar.push_back(std::isfinite(p.objective) ? Json(p.objective) : Json(nullptr));
    Json trace{{"data_round", rounds}, {"avar_history", avar}, {"grid", s.config.grid}};
    if (s.proposals.empty()) {
        trace["q_next"] = nullptr;
        trace["objective"] = Json::array();
    } else {
        trace["q_next"] = s.proposals.back().q;
        trace["objective"] = to_json(s.proposals.back()).at("objective_trace");
    }
    view["trace"] = trace;
    return view;
}

struct CampaignService::Server {
    httplib::Server http;
    std::thread thread;
};

CampaignService::CampaignService(std::string data_dir) : store_(std::move(data_dir))
{
    for (const auto& id : store_.list()) {
        auto e = std::make_shared<Entry>();
        e->snapshot = std::make_shared<const alt::AltCampaignState>(store_.load(id));
        campaigns_[id] = std::move(e);
    }
}

CampaignService::~CampaignService() { stop(); }

std::shared_ptr<CampaignService::Entry> CampaignService::find(const std::string& id) const
{
    std::shared_lock lock(map_mutex_);
    const auto it = campaigns_.find(id);
    return it == campaigns_.end() ? nullptr : it->second;
}

HttpResponse CampaignService::handle(const HttpRequest& r)
{
    const auto parts = split_path(r.path);
    try {
        if (parts.empty() || parts[0] != "campaigns") return error(404, "no such route");
        if (parts.size() == 1) {
            if (r.method == "POST") return create(r);
            if (r.method == "GET") return list();
            return error(405, "method not allowed");
        }
        const std::string& id = parts[1];
        if (parts.size() == 2) {
            if (r.method == "GET") return get(id);
            return error(405, "method not allowed");
        }
        if (parts.size() == 3 && parts[2] == "propose") {
            if (r.method == "POST") return propose(id);
            return error(405, "method not allowed");
        }
        if (parts.size() == 3 && parts[2] == "results") {
            if (r.method == "POST") return record(id, r);
            return error(405, "method not allowed");
        }
        return error(404, "no such route");
    } catch (const Json::exception& e) {
        return error(400, std::string("invalid JSON: ") + e.what());
    } catch (const std::invalid_argument& e) {
        return error(400, e.what());
    } catch (const std::domain_error& e) {
        return error(400, e.what());
    } catch (const std::exception& e) {
        return error(500, e.what());
    }
}

HttpResponse CampaignService::create(const HttpRequest& r)
{
    const Json body = parse_body(r.body);
    if (!body.is_object()) return error(400, "campaign config must be a JSON object");
    Json config = body.contains("config") ? body.at("config") : body;
    std::lock_guard guard(create_mutex_);
    std::string id;
    if (body.contains("id")) {
        id = body.at("id").get<std::string>();
        if (!valid_campaign_id(id)) return error(400, "invalid campaign id");
        if (find(id)) return error(409, "campaign '" + id + "' already exists");
    } else {
        id = store_.next_id();
    }
    if (config.is_object()) config.erase("id");
    auto state = std::make_shared<const alt::AltCampaignState>(store_.create(config, id));
    auto entry = std::make_shared<Entry>();
    entry->snapshot = state;
    {
        std::unique_lock lock(map_mutex_);
        campaigns_[id] = entry;
    }
    HttpResponse out;
    out.status = 201;
    out.body = campaign_view(*state);
    out.headers["Location"] = "/campaigns/" + id;
    return out;
}

HttpResponse CampaignService::list() const
{
    Json ids = Json::array();
    std::shared_lock lock(map_mutex_);
    for (const auto& [id, e] : campaigns_) ids.push_back(id);
    return {200, {{"campaigns", ids}}, {}};
}

HttpResponse CampaignService::get(const std::string& id) const
{
    const auto e = find(id);
    if (!e) return error(404, "unknown campaign '" + id + "'");
    const auto snap = std::atomic_load(&e->snapshot);
    return {200, campaign_view(*snap), {}};
}

HttpResponse CampaignService::propose(const std::string& id)
{
    const auto e = find(id);
    if (!e) return error(404, "unknown campaign '" + id + "'");
    std::lock_guard guard(e->write);
    auto next = std::make_shared<alt::AltCampaignState>(*std::atomic_load(&e->snapshot));
    const auto prop = logged_propose(store_, *next);
    std::atomic_store(&e->snapshot, std::shared_ptr<const alt::AltCampaignState>(next));
    HttpResponse out;
    out.body = {{"q_next", prop.q},
                {"round", prop.round},
                {"objective", std::isfinite(prop.objective) ? Json(prop.objective) : Json(nullptr)},
                {"grid", next->config.grid},
                {"objective_trace", to_json(prop).at("objective_trace")},
                {"version", next->version}};
    return out;
}

HttpResponse CampaignService::record(const std::string& id, const HttpRequest& r)
{
    const auto e = find(id);
    if (!e) return error(404, "unknown campaign '" + id + "'");
    const auto expected = r.header("Expected-Version");
    if (!expected) return error(428, "Expected-Version header is required");
    long want = 0;
    try {
        std::size_t used = 0;
        want = std::stol(*expected, &used);
        if (used != expected->size()) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
        return error(400, "Expected-Version must be an integer");
    }
    const Json body = parse_body(r.body);
    const auto datum = from_json<alt::AltTestDatum>(body);
    datum.validate();

    std::lock_guard guard(e->write);
    const auto current = std::atomic_load(&e->snapshot);
    if (current->version != want) {
        HttpResponse out = error(409, "version conflict");
        out.body["current_version"] = current->version;
        return out;
    }
    auto next = std::make_shared<alt::AltCampaignState>(*current);
    const bool matches = logged_record(store_, *next, datum);
    std::atomic_store(&e->snapshot, std::shared_ptr<const alt::AltCampaignState>(next));
    HttpResponse out;
    out.body = {{"version", next->version}, {"data_version", next->data_version}, {"matches_proposal", matches}};
    return out;
}

namespace {

void bind_routes(httplib::Server& http, CampaignService& service)
{
    auto handler = [&service](const httplib::Request& req, httplib::Response& res) {
        HttpRequest r;
        r.method = req.method;
        r.path = req.path;
        r.body = req.body;
        for (const auto& [k, v] : req.headers) r.headers.emplace(k, v);
        const HttpResponse out = service.handle(r);
        res.status = out.status;
        for (const auto& [k, v] : out.headers) res.set_header(k, v);
        res.set_content(out.body.dump(), "application/json; charset=utf-8");
    };
    http.Get(".*", handler);
    http.Post(".*", handler);
    http.Put(".*", handler);
    http.Delete(".*", handler);
}

}  // namespace

void CampaignService::serve(const std::string& host, int port)
{
    server_ = std::make_unique<Server>();
    bind_routes(server_->http, *this);
    if (!server_->http.listen(host, port)) throw std::runtime_error("cannot listen on " + host + ":" + std::to_string(port));
}

int CampaignService::start_background(const std::string& host)
{
    server_ = std::make_unique<Server>();
    bind_routes(server_->http, *this);
    const int port = server_->http.bind_to_any_port(host);
    if (port <= 0) throw std::runtime_error("cannot bind to " + host);
    server_->thread = std::thread([this] { server_->http.listen_after_bind(); });
    server_->http.wait_until_ready();
    return port;
}

void CampaignService::stop()
{
    if (!server_) return;
    server_->http.stop();
    if (server_->thread.joinable()) server_->thread.join();
    server_.reset();
}

}  // namespace relikit::io
