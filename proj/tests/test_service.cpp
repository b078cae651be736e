#include <doctest.h>

#include <filesystem>
#include <thread>
#include <unistd.h>

#include "relikit/io/service.hpp"

#include <httplib.h>

using namespace relikit;
using namespace relikit::io;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag)
        : path(fs::temp_directory_path() / ("relikit-svc-" + tag + "-" + std::to_string(::getpid())))
    {
        fs::remove_all(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

Json config()
{
    return {{"sampler", {{"burn_in", 300}, {"draws", 200}}},
            {"seed", 5},
            {"data", Json::array({{{"q", 621.0 / 1339.67}, {"cycles", 3.1e5}, {"failed", true}},
                                  {{"q", 690.0 / 1339.67}, {"cycles", 9.0e4}, {"failed", true}},
                                  {{"q", 965.0 / 1339.67}, {"cycles", 2.2e3}, {"failed", true}}})}};
}

HttpRequest req(std::string method, std::string path, Json body = nullptr, std::map<std::string, std::string> headers = {})
{
    return {std::move(method), std::move(path), std::move(headers), body.is_null() ? "" : body.dump()};
}

}  // namespace

TEST_CASE("campaign routes and status codes")
{
    TempDir dir("routes");
    CampaignService svc(dir.path.string());

    auto created = svc.handle(req("POST", "/campaigns", config()));
    REQUIRE(created.status == 201);
    CHECK(created.headers.at("Location") == "/campaigns/c1");
    CHECK(created.body.at("id") == "c1");

    auto fresh = svc.handle(req("GET", "/campaigns/c1"));
    CHECK(fresh.status == 200);
    CHECK(fresh.body.at("proposals").empty());
    CHECK(fresh.body.at("trace").at("q_next").is_null());
    CHECK(fresh.body.at("data").size() == 3);
    const long v0 = fresh.body.at("version");

    CHECK(svc.handle(req("GET", "/campaigns")).body.at("campaigns") == Json::array({"c1"}));
    CHECK(svc.handle(req("GET", "/campaigns/zz")).status == 404);
    CHECK(svc.handle(req("POST", "/campaigns/zz/propose")).status == 404);
    CHECK(svc.handle(req("GET", "/elsewhere")).status == 404);
    CHECK(svc.handle(req("DELETE", "/campaigns/c1")).status == 405);
    CHECK(svc.handle(req("GET", "/campaigns/c1/propose")).status == 405);
    CHECK(svc.handle(req("PUT", "/campaigns")).status == 405);

    auto bad = req("POST", "/campaigns");
    bad.body = "{oops";
    CHECK(svc.handle(bad).status == 400);
    CHECK(svc.handle(req("POST", "/campaigns", {{"id", "c1"}, {"config", config()}})).status == 409);
    CHECK(svc.handle(req("POST", "/campaigns", {{"id", "../x"}, {"config", config()}})).status == 400);
    CHECK(svc.handle(req("POST", "/campaigns", {{"p", 2.0}})).status == 400);
    auto named = svc.handle(req("POST", "/campaigns", {{"id", "lab-7"}, {"config", config()}}));
    CHECK(named.status == 201);
    CHECK(named.headers.at("Location") == "/campaigns/lab-7");

    auto prop = svc.handle(req("POST", "/campaigns/c1/propose"));
    REQUIRE(prop.status == 200);
    const double q = prop.body.at("q_next");
    CHECK(prop.body.at("round") == 1);
    CHECK(prop.body.at("objective_trace").size() == 9);
    const long v1 = prop.body.at("version");
    CHECK(v1 > v0);

    const Json outcome{{"q", q}, {"cycles", 4.0e4}, {"failed", true}};
    CHECK(svc.handle(req("POST", "/campaigns/c1/results", outcome)).status == 428);
    CHECK(svc.handle(req("POST", "/campaigns/c1/results", outcome, {{"Expected-Version", "x1"}})).status == 400);
    CHECK(svc.handle(req("POST", "/campaigns/c1/results", {{"q", q}, {"cycles", -1}, {"failed", true}},
                         {{"expected-version", std::to_string(v1)}}))
              .status == 400);

    const auto before = svc.handle(req("GET", "/campaigns/c1")).body;
    auto stale = svc.handle(req("POST", "/campaigns/c1/results", outcome, {{"Expected-Version", std::to_string(v0)}}));
    CHECK(stale.status == 409);
    CHECK(stale.body.at("current_version") == v1);
    CHECK(svc.handle(req("GET", "/campaigns/c1")).body == before);

    auto ok = svc.handle(req("POST", "/campaigns/c1/results", outcome, {{"expected-version", std::to_string(v1)}}));
    REQUIRE(ok.status == 200);
    CHECK(ok.body.at("matches_proposal") == true);
    CHECK(ok.body.at("version").get<long>() > v1);
    auto after = svc.handle(req("GET", "/campaigns/c1")).body;
    CHECK(after.at("data").size() == 4);
    CHECK(after.at("posterior").at("fresh") == false);
    CHECK(after.at("trace").at("data_round") == Json::array({0, 0, 0, 1}));

    // a restarted service replays the same state
    CampaignService again(dir.path.string());
    CHECK(again.handle(req("GET", "/campaigns/c1")).body == after);
}

TEST_CASE("an extreme outcome moves the recommendation")
{
    TempDir dir("extreme");
    CampaignService svc(dir.path.string());
    REQUIRE(svc.handle(req("POST", "/campaigns", config())).status == 201);
    auto first = svc.handle(req("POST", "/campaigns/c1/propose")).body;
    const double q1 = first.at("q_next");
    // a unit that ran to the censoring limit at the highest stress contradicts the history
    const Json extreme{{"q", 0.75}, {"cycles", 2e6}, {"failed", false}};
    auto rec = svc.handle(req("POST", "/campaigns/c1/results", extreme,
                              {{"Expected-Version", std::to_string(first.at("version").get<long>())}}));
    REQUIRE(rec.status == 200);
    CHECK(rec.body.at("matches_proposal") == (q1 == 0.75));
    auto second = svc.handle(req("POST", "/campaigns/c1/propose")).body;
    INFO("first " << q1 << " second " << second.at("q_next"));
    CHECK(second.at("q_next").get<double>() != q1);
    CHECK(second.at("objective_trace") != first.at("objective_trace"));
}

TEST_CASE("concurrent writers with the same version")
{
    TempDir dir("race");
    CampaignService svc(dir.path.string());
    REQUIRE(svc.handle(req("POST", "/campaigns", config())).status == 201);
    const long v = svc.handle(req("GET", "/campaigns/c1")).body.at("version");
    std::vector<int> status(4);
    std::vector<std::thread> threads;
    for (int i = 0; i < 4; ++i)
        threads.emplace_back([&, i] {
            status[i] = svc.handle(req("POST", "/campaigns/c1/results", {{"q", 0.5}, {"cycles", 1e4 + i}, {"failed", true}},
                                       {{"Expected-Version", std::to_string(v)}}))
                            .status;
        });
    for (auto& t : threads) t.join();
    CHECK(std::count(status.begin(), status.end(), 200) == 1);
    CHECK(std::count(status.begin(), status.end(), 409) == 3);
    CHECK(svc.handle(req("GET", "/campaigns/c1")).body.at("data").size() == 4);
}

TEST_CASE("round trip over a real socket")
{
    TempDir dir("http");
    CampaignService svc(dir.path.string());
    const int port = svc.start_background();
    httplib::Client cli("127.0.0.1", port);

    auto res = cli.Post("/campaigns", config().dump(), "application/json");
    REQUIRE(res);
    CHECK(res->status == 201);
    CHECK(res->get_header_value("Location") == "/campaigns/c1");
    CHECK(res->get_header_value("Content-Type").find("application/json") == 0);

    res = cli.Post("/campaigns/c1/propose", "", "application/json");
    REQUIRE(res);
    REQUIRE(res->status == 200);
    const Json prop = Json::parse(res->body);
    const long v = prop.at("version");

    const Json outcome{{"q", prop.at("q_next")}, {"cycles", 2e6}, {"failed", false}};
    res = cli.Post("/campaigns/c1/results", {{"Expected-Version", std::to_string(v - 1)}}, outcome.dump(),
                   "application/json");
    REQUIRE(res);
    CHECK(res->status == 409);
    CHECK(Json::parse(res->body).at("current_version") == v);

    res = cli.Post("/campaigns/c1/results", {{"Expected-Version", std::to_string(v)}}, outcome.dump(), "application/json");
    REQUIRE(res);
    CHECK(res->status == 200);

    res = cli.Get("/campaigns/c1");
    REQUIRE(res);
    const Json view = Json::parse(res->body);
    CHECK(view.at("data").size() == 4);
    CHECK(view.at("data").back().at("failed") == false);
    CHECK(view.at("trace").at("avar_history").size() == 1);

    res = cli.Get("/campaigns/none");
    REQUIRE(res);
    CHECK(res->status == 404);
    svc.stop();
}
