#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <string>

#include "relikit/io/campaign_store.hpp"

namespace relikit::io {

struct HttpRequest {
    std::string method;
    std::string path;
    /// Header names are matched case-insensitively.
    std::map<std::string, std::string> headers;
    std::string body;

    std::optional<std::string> header(const std::string& name) const;
};

struct HttpResponse {
    int status = 200;
    Json body = Json::object();
    std::map<std::string, std::string> headers;
};

/// Campaign endpoints:
///   POST /campaigns                  create from a config document (201)
///   GET  /campaigns                  list ids
///   GET  /campaigns/{id}             state and trace
///   POST /campaigns/{id}/propose     next stress level
///   POST /campaigns/{id}/results     record an outcome; needs Expected-Version
///
/// Writes to one campaign are serialized and checked against the version the
/// client saw; reads use immutable snapshots.
class CampaignService {
  public:
    explicit CampaignService(std::string data_dir);

    HttpResponse handle(const HttpRequest& request);

    /// Blocks serving HTTP until stop() is called.
    void serve(const std::string& host, int port);
    /// Binds to an ephemeral port and returns it; serving runs on a background thread.
    int start_background(const std::string& host = "127.0.0.1");
    void stop();

    ~CampaignService();

  private:
    struct Entry {
        std::mutex write;
        std::shared_ptr<const alt::AltCampaignState> snapshot;
    };

    std::shared_ptr<Entry> find(const std::string& id) const;
    HttpResponse create(const HttpRequest& r);
    HttpResponse get(const std::string& id) const;
    HttpResponse propose(const std::string& id);
    HttpResponse record(const std::string& id, const HttpRequest& r);
    HttpResponse list() const;

    CampaignStore store_;
    mutable std::shared_mutex map_mutex_;
    std::mutex create_mutex_;
    std::map<std::string, std::shared_ptr<Entry>> campaigns_;

    struct Server;
    std::unique_ptr<Server> server_;
};

/// Campaign state plus the derived trace served on GET.
Json campaign_view(const alt::AltCampaignState& state);

}  // namespace relikit::io
