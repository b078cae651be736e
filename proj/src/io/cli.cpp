#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "relikit/io/cli.hpp"
#include "relikit/io/csv.hpp"
#include "relikit/io/datasets.hpp"
#include "relikit/io/service.hpp"
#include "relikit/io/synthetic.hpp"
#include "relikit/numeric.hpp"

namespace relikit::io {

namespace fs = std::filesystem;

namespace {

struct Common {
    bool json = false;
    std::uint64_t seed = 1;
    std::string config;
    std::string out;
};

void add_common(CLI::App* app, Common& c)
{
    app->add_flag("--json", c.json, "Machine-readable JSON on stdout");
    app->add_option("--seed", c.seed, "Random seed");
    app->add_option("--config", c.config, "JSON settings file");
    app->add_option("--out", c.out, "Output directory");
}

Json num(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }

void print_text(const Json& j, std::ostream& out, const std::string& prefix = "")
{
    for (const auto& [k, v] : j.items()) {
        if (v.is_object() && !v.empty()) {
            print_text(v, out, prefix + k + ".");
        } else if (v.is_string()) {
            out << prefix << k << ": " << v.get<std::string>() << '\n';
        } else {
            out << prefix << k << ": " << v.dump() << '\n';
        }
    }
}

void emit(const Json& result, const Common& c, std::ostream& out, const std::string& file_name)
{
    if (!c.out.empty() && !file_name.empty()) {
        fs::create_directories(c.out);
        write_json_file((fs::path(c.out) / file_name).string(), result);
    }
    if (c.json)
        out << result.dump(2) << '\n';
    else
        print_text(result, out);
}

Json summarize_draws(const PosteriorDraws& d)
{
    Json s = Json::object();
    for (std::size_t k = 0; k < d.names.size(); ++k) {
        const auto v = d.draws_of(d.names[k]);
        const double m = numeric::mean(v);
        double ss = 0.0;
        for (double x : v) ss += (x - m) * (x - m);
        s[d.names[k]] = {{"mean", m},
                         {"sd", std::sqrt(ss / static_cast<double>(std::max<std::size_t>(v.size(), 2) - 1))},
                         {"q025", numeric::quantile(v, 0.025)},
                         {"q50", numeric::quantile(v, 0.5)},
                         {"q975", numeric::quantile(v, 0.975)}};
    }
    Json acc = Json::array();
    for (double a : d.acceptance) acc.push_back(a);
    return {{"parameters", s}, {"draws", d.size()}, {"acceptance", acc}};
}

Json read_config(const Common& c)
{
    if (c.config.empty()) return Json::object();
    return read_json_file(c.config);
}

// ---- dataset sources

struct Source {
    std::string manifest;
    std::map<std::string, std::string> files;
};

DatasetManifest manifest_for(const Source& src, DatasetKind kind)
{
    if (!src.manifest.empty()) {
        auto m = load_manifest(src.manifest);
        if (m.kind != kind)
            throw std::invalid_argument("manifest describes a " + to_string(m.kind) + " dataset, not " + to_string(kind));
        return m;
    }
    DatasetManifest m;
    m.kind = kind;
    for (const auto& [role, path] : src.files) {
        if (path.empty()) throw std::invalid_argument("missing --" + role + " (or pass --manifest)");
        m.files[role] = fs::absolute(path).string();
    }
    return m;
}

void add_source(CLI::App* app, Source& src, std::initializer_list<const char*> roles)
{
    app->add_option("--manifest", src.manifest, "Dataset manifest.json");
    for (const char* role : roles) {
        src.files[role];
        app->add_option(std::string("--") + role, src.files[role], std::string(role) + " CSV file");
    }
}

template <class T>
T load_as(const Source& src, DatasetKind kind, Json* settings = nullptr)
{
    const auto m = manifest_for(src, kind);
    if (settings) *settings = m.settings;
    return std::get<T>(load_dataset(m).data);
}

// ---- lifetime

struct LifetimeOptions {
    Source src;
    std::string kind = "sev";
    double baseline_rate = 1.0;
    std::string fit;
    std::vector<double> horizons{4.0, 8.0, 12.0};
    double alpha = 0.10;
    std::size_t draws = 100;
    std::size_t resamples = 20;
    std::string unit;
};

LifetimeDataset load_lifetime_source(const LifetimeOptions& o)
{
    if (!o.src.manifest.empty()) return load_as<LifetimeDataset>(o.src, DatasetKind::LIFETIME);
    const auto m = manifest_for(o.src, DatasetKind::LIFETIME);
    return load_lifetime(m.path("units"), m.path("userate"), o.baseline_rate);
}

Json fit_lifetime_json(const LifetimeDataset& d, dist::StdKind kind)
{
    const auto fit_t = lifetime::fit_lifetime(d.units, kind);
    std::vector<lifetime::UseRateSeries> series;
    for (const auto& u : d.units) series.push_back(u.covariates);
    const auto fit_x = lifetime::fit_covariate(series);
    std::size_t failures = 0;
    for (const auto& u : d.units) failures += u.failed;
    return {{"model", "lifetime"},
            {"units", d.units.size()},
            {"failures", failures},
            {"lifetime", to_json(fit_t)},
            {"covariate", to_json(fit_x)}};
}

Json predict_lifetime_json(const LifetimeOptions& o, const Common& c)
{
    const auto d = load_lifetime_source(o);
    const Json fit = o.fit.empty() ? fit_lifetime_json(d, dist::kind_from_string(o.kind)) : read_json_file(o.fit);
    const auto fit_t = from_json<lifetime::LifetimeFit>(fit.at("lifetime"));
    const auto fit_x = from_json<lifetime::CovariateFit>(fit.at("covariate"));
    const Rng stream(c.seed);
    lifetime::FleetOptions fo;
    fo.drl.draws = o.draws;
    fo.resamples = o.resamples;
    const auto fleet = lifetime::fleet_prediction(d.units, fit_t, fit_x, o.horizons, o.alpha, stream, fo);
    Json lo = Json::array(), hi = Json::array();
    for (const auto& iv : fleet.interval) {
        lo.push_back(iv.lower);
        hi.push_back(iv.upper);
    }
    Json out{{"model", "lifetime"},
             {"fit", fit},
             {"fleet", {{"risk_set", fleet.risk_set_size}, {"horizons", o.horizons}, {"expected", fleet.expected}, {"lower", lo}, {"upper", hi}}}};
    if (!o.unit.empty()) {
        const auto it = std::find_if(d.units.begin(), d.units.end(), [&](const auto& u) { return u.unit_id == o.unit; });
        if (it == d.units.end()) throw std::invalid_argument("unknown unit '" + o.unit + "'");
        if (it->failed) throw std::invalid_argument("unit '" + o.unit + "' has already failed");
        lifetime::DrlOptions dopt;
        dopt.draws = o.draws;
        const auto rho = lifetime::drl_curve(*it, o.horizons, fit_t.params, fit_x.params, fit_t.kind, stream.substream(1), dopt);
        Json ci = Json::array();
        for (double s : o.horizons) {
            const auto iv = lifetime::drl_ci(*it, s, fit_t, fit_x, o.resamples, o.alpha, stream.substream(2), dopt);
            ci.push_back({iv.lower, iv.upper});
        }
        lifetime::PiOptions popt;
        popt.drl = dopt;
        double window = 0.0;
        for (const auto& u : d.units) window = std::max(window, u.event_time);
        popt.search_bound = 20.0 * window;
        const auto pi = lifetime::remaining_life_pi(*it, fit_t, fit_x, o.alpha, stream.substream(3), popt);
        out["unit"] = {{"id", o.unit},
                       {"time_in_service", it->event_time},
                       {"rho", rho},
                       {"rho_interval", ci},
                       {"remaining_life", {{"lower", pi.lower}, {"upper", num(pi.upper)}, {"upper_open", pi.upper_open}}}};
    }
    return out;
}

// ---- degradation

struct DegradationOptions {
    Source src;
    int knots = 3;
    std::size_t bootstrap = 0;
    double level = 0.95;
    std::string fit;
    double threshold = -0.4;
    std::size_t draws = 200;
    int start_min = 161;
    int start_max = 190;
    double horizon = 400.0;
    double grid_step = 10.0;
};

Json fit_degradation_json(const DegradationDataset& d, const DegradationOptions& o, const Common& c)
{
    const auto spec = degradation::SplineEffectSpec::from_data(d.units, o.knots);
    const auto fit = degradation::fit_degradation(d.units, spec);
    Json out{{"model", "degradation"}, {"units", d.units.size()}, {"path", to_json(fit)}};
    const auto weather = degradation::fit_covariate_process(degradation::calendar_series(d.units));
    out["covariate_process"] = to_json(weather);
    if (o.bootstrap > 0) {
        const auto boot = degradation::bootstrap_degradation(d.units, fit, o.bootstrap, o.level, Rng(c.seed));
        Json iv = Json::array();
        for (const auto& ci : boot.intervals)
            iv.push_back({{"name", ci.name}, {"estimate", ci.estimate}, {"lower", ci.lower}, {"upper", ci.upper}});
        Json reps = Json::array();
        for (const auto& p : boot.replicates) reps.push_back(to_json(p));
        out["bootstrap"] = {{"resamples", o.bootstrap}, {"level", o.level}, {"intervals", iv}, {"replicates", reps}};
    }
    return out;
}

Json predict_degradation_json(const DegradationOptions& o, const Common& c)
{
    Json fit;
    if (o.fit.empty()) {
        const auto d = load_as<DegradationDataset>(o.src, DatasetKind::DEGRADATION);
        fit = fit_degradation_json(d, o, c);
    } else {
        fit = read_json_file(o.fit);
    }
    const auto path_fit = from_json<degradation::DegradationFit>(fit.at("path"));
    const auto weather = from_json<degradation::CovariateProcessFit>(fit.at("covariate_process"));
    std::vector<degradation::PathParams> reps;
    if (fit.contains("bootstrap"))
        for (const auto& r : fit.at("bootstrap").at("replicates")) reps.push_back(from_json<degradation::PathParams>(r));
    degradation::FailureSpec spec{o.threshold, o.horizon, 1.0};
    degradation::FailureMcOptions mc;
    mc.draws = o.draws;
    mc.start_min = o.start_min;
    mc.start_max = o.start_max;
    mc.level = o.level;
    std::vector<double> grid;
    for (double t = 0.0; t <= o.horizon + 1e-9; t += o.grid_step) grid.push_back(t);
    const auto cdf = degradation::failure_cdf_mc(path_fit, weather.params, reps, spec, grid, Rng(c.seed), mc);
    Json pct = Json::object();
    if (!cdf.failure_times.empty())
        for (double p : {0.1, 0.5, 0.9})
            pct["p" + std::to_string(static_cast<int>(std::lround(p * 100)))] = numeric::quantile(cdf.failure_times, p);
    return {{"model", "degradation"},
            {"threshold", o.threshold},
            {"draws", o.draws},
            {"censored", cdf.censored},
            {"failure_percentiles", pct},
            {"cdf", {{"grid", cdf.grid}, {"cdf", cdf.cdf}, {"lower", cdf.lower}, {"upper", cdf.upper}}}};
}

// ---- recurrent

struct RecurrentOptions {
    Source src;
    std::size_t chains = 2;
    std::size_t burn_in = 2000;
    std::size_t iterations = 3000;
    std::size_t thin = 1;
    std::string draws_file;
    std::vector<double> horizons{5.0, 10.0, 15.0};
    std::size_t max_draws = 200;
    double level = 0.95;
    std::string rule = "carry";
};

PosteriorDraws fit_recurrent_draws(const RecurrentDataset& d, const RecurrentOptions& o, const Common& c)
{
    mtrp::McmcOptions mo;
    mo.chains = o.chains;
    mo.burn_in = o.burn_in;
    mo.iterations = o.iterations;
    mo.thin = o.thin;
    return mtrp::fit_mtrp_bayes(d.histories, mtrp::MtrpPriors{}, mo, Rng(c.seed));
}

Json recurrent_counts(const RecurrentDataset& d)
{
    std::size_t nc = 0, ns = 0;
    for (const auto& h : d.histories) {
        nc += h.count(mtrp::EventType::COMPONENT);
        ns += h.count(mtrp::EventType::SUBSYSTEM);
    }
    return {{"units", d.histories.size()}, {"component_events", nc}, {"subsystem_events", ns}};
}

Json predict_recurrent_json(const RecurrentOptions& o, const Common& c)
{
    const auto d = load_as<RecurrentDataset>(o.src, DatasetKind::RECURRENT);
    const PosteriorDraws draws = o.draws_file.empty() ? fit_recurrent_draws(d, o, c) : read_draws_csv(o.draws_file);
    mtrp::PredictOptions po;
    po.max_draws = o.max_draws;
    po.level = o.level;
    if (o.rule == "linear")
        po.rule = mtrp::UsageExtrapolation::LINEAR;
    else if (o.rule != "carry")
        throw std::invalid_argument("usage rule must be carry or linear");
    const auto pred = mtrp::predict_counts(draws, d.histories, o.horizons, Rng(c.seed).substream(1), po);
    return {{"model", "recurrent"},
            {"data", recurrent_counts(d)},
            {"horizons", pred.horizons},
            {"mean", pred.mean},
            {"lower", pred.lower},
            {"upper", pred.upper},
            {"level", o.level}};
}

// ---- alt

struct AltOptions {
    Source src;
    std::vector<double> levels;
    double p = 0.1;
    std::size_t burn_in = 2000;
    std::size_t draws = 4000;
};

AltDataset load_alt_source(const AltOptions& o, const Common& c)
{
    AltDataset d = !o.src.manifest.empty() ? load_as<AltDataset>(o.src, DatasetKind::ALT)
                                           : load_alt(manifest_for(o.src, DatasetKind::ALT).path("data"));
    const Json cfg = read_config(c);
    if (!cfg.empty()) d.config = from_json<alt::MaterialTestConfig>(cfg);
    return d;
}

Json fit_alt_json(const AltDataset& d, const AltOptions& o, const Common& c, PosteriorDraws* keep = nullptr)
{
    const auto ml = alt::fit_alt_ml(d.data, d.config);
    alt::SamplerOptions so;
    so.burn_in = o.burn_in;
    so.draws = o.draws;
    const Json cfg = read_config(c);
    const alt::AltPriors priors = cfg.contains("priors") ? from_json<alt::AltPriors>(cfg.at("priors")) : alt::AltPriors{};
    auto draws = alt::posterior_sample(priors, d.data, d.config, Rng(c.seed), so);
    std::size_t failed = 0;
    for (const auto& x : d.data) failed += !x.censored;
    Json out{{"model", "alt"},
             {"n", d.data.size()},
             {"failures", failed},
             {"config", to_json(d.config)},
             {"ml", {{"params", to_json(ml.params)}, {"loglik", ml.loglik}, {"converged", ml.converged}}},
             {"posterior", summarize_draws(draws)}};
    if (keep) *keep = std::move(draws);
    return out;
}

Json predict_alt_json(const AltOptions& o, const Common& c)
{
    const auto d = load_alt_source(o, c);
    PosteriorDraws draws;
    Json out = fit_alt_json(d, o, c, &draws);
    const std::vector<double> levels = o.levels.empty() ? alt::UseProfile{}.levels : o.levels;
    const auto ml = from_json<alt::AltParams>(out.at("ml").at("params"));
    Json rows = Json::array();
    for (double u : levels) {
        std::vector<double> lq(draws.size());
        for (std::size_t r = 0; r < draws.size(); ++r) lq[r] = alt::log_quantile(o.p, u, alt::params_from_row(draws, r), d.config);
        rows.push_back({{"q", u},
                        {"ml_log_quantile", alt::log_quantile(o.p, u, ml, d.config)},
                        {"posterior_mean", numeric::mean(lq)},
                        {"lower", numeric::quantile(lq, 0.025)},
                        {"upper", numeric::quantile(lq, 0.975)}});
    }
    out["p"] = o.p;
    out["log_quantiles"] = rows;
    return out;
}

// ---- plan

struct PlanOptions {
    std::string data_dir;
    std::string campaign;
    std::string id;
    double q = 0.0;
    double cycles = 0.0;
    bool censored = false;
    long expected_version = -1;
};

std::string data_dir_or_env(const std::string& given)
{
    if (!given.empty()) return given;
    if (const char* env = std::getenv("RELIKIT_DATA"); env && *env) return env;
    return "campaigns";
}

Json plan_summary(const alt::AltCampaignState& s)
{
    Json view = campaign_view(s);
    return {{"id", s.id},
            {"version", s.version},
            {"data_version", s.data_version},
            {"observations", s.data.size()},
            {"historical", s.historical},
            {"proposals", view.at("proposals")},
            {"q_next", view.at("trace").at("q_next")},
            {"avar_history", view.at("trace").at("avar_history")},
            {"posterior", view.at("posterior")}};
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Reliability prediction and test planning toolkit", "relikit"};
    app.require_subcommand(1);
    Common common;

    auto* simulate = app.add_subcommand("simulate", "Generate a synthetic dataset");
    std::string sim_kind;
    simulate->add_option("kind", sim_kind, "lifetime | degradation | recurrent | alt")
        ->required()
        ->check(CLI::IsMember({"lifetime", "degradation", "recurrent", "alt"}));
    add_common(simulate, common);

    auto* fit = app.add_subcommand("fit", "Fit a model to data");
    auto* predict = app.add_subcommand("predict", "Predict from a fitted model");
    fit->require_subcommand(1);
    predict->require_subcommand(1);

    LifetimeOptions lo;
    DegradationOptions dopt;
    RecurrentOptions ro;
    AltOptions ao;
    std::map<std::string, CLI::App*> fits, preds;
    for (auto* parent : {fit, predict}) {
        const bool is_pred = parent == predict;
        auto& reg = is_pred ? preds : fits;

        auto* l = parent->add_subcommand("lifetime", "Cumulative-exposure lifetime model");
        add_source(l, lo.src, {"units", "userate"});
        l->add_option("--kind", lo.kind, "sev | normal")->check(CLI::IsMember({"sev", "normal"}));
        l->add_option("--baseline-rate", lo.baseline_rate, "Baseline use rate R0");
        add_common(l, common);
        reg["lifetime"] = l;

        auto* g = parent->add_subcommand("degradation", "Degradation path model");
        add_source(g, dopt.src, {"measurements", "covariates"});
        g->add_option("--knots", dopt.knots, "Interior spline knots");
        g->add_option("--bootstrap", dopt.bootstrap, "Bootstrap resamples");
        g->add_option("--level", dopt.level, "Interval level");
        add_common(g, common);
        reg["degradation"] = g;

        auto* r = parent->add_subcommand("recurrent", "Recurrent component events");
        add_source(r, ro.src, {"events", "usage"});
        r->add_option("--chains", ro.chains, "MCMC chains");
        r->add_option("--burn-in", ro.burn_in, "Burn-in iterations per chain");
        r->add_option("--iterations", ro.iterations, "Retained iterations per chain");
        r->add_option("--thin", ro.thin, "Thinning interval");
        add_common(r, common);
        reg["recurrent"] = r;

        auto* a = parent->add_subcommand("alt", "Accelerated life test");
        add_source(a, ao.src, {"data"});
        a->add_option("--burn-in", ao.burn_in, "Sampler burn-in");
        a->add_option("--draws", ao.draws, "Posterior draws");
        add_common(a, common);
        reg["alt"] = a;

        if (is_pred) {
            l->add_option("--fit", lo.fit, "Fit JSON from `fit lifetime`");
            l->add_option("--horizons", lo.horizons, "Horizons (weeks)")->delimiter(',');
            l->add_option("--alpha", lo.alpha, "Interval miscoverage");
            l->add_option("--draws", lo.draws, "Covariate draws per unit");
            l->add_option("--resamples", lo.resamples, "Parameter resamples");
            l->add_option("--unit", lo.unit, "Also predict one unit");
            g->add_option("--fit", dopt.fit, "Fit JSON from `fit degradation`");
            g->add_option("--threshold", dopt.threshold, "Failure threshold");
            g->add_option("--draws", dopt.draws, "Simulated units");
            g->add_option("--start-min", dopt.start_min, "Earliest start day");
            g->add_option("--start-max", dopt.start_max, "Latest start day");
            g->add_option("--horizon", dopt.horizon, "Days simulated");
            g->add_option("--grid-step", dopt.grid_step, "CDF grid spacing (days)");
            r->add_option("--draws", ro.draws_file, "Posterior draws CSV from `fit recurrent --out`");
            r->add_option("--horizons", ro.horizons, "Horizons after tau")->delimiter(',');
            r->add_option("--max-draws", ro.max_draws, "Posterior draws used");
            r->add_option("--level", ro.level, "Interval level");
            r->add_option("--usage-rule", ro.rule, "carry | linear");
            a->add_option("--levels", ao.levels, "Use stress levels")->delimiter(',');
            a->add_option("--p", ao.p, "Quantile probability");
        }
    }

    auto* plan = app.add_subcommand("plan", "Sequential accelerated life test campaign");
    plan->require_subcommand(1);
    PlanOptions po;
    auto* create = plan->add_subcommand("create", "Create a campaign from --config");
    create->add_option("--id", po.id, "Campaign id (default c<N>)");
    auto* propose = plan->add_subcommand("propose", "Propose the next stress level");
    auto* record = plan->add_subcommand("record", "Record a test outcome");
    auto* status = plan->add_subcommand("status", "Show campaign state");
    for (auto* sub : {propose, record, status}) sub->add_option("--campaign", po.campaign, "Campaign id")->required();
    record->add_option("--q", po.q, "Standardized stress of the test")->required();
    record->add_option("--cycles", po.cycles, "Cycles to failure or censoring")->required();
    record->add_flag("--censored", po.censored, "Test was stopped before failure");
    record->add_option("--expected-version", po.expected_version, "Reject unless the campaign is at this version");
    for (auto* sub : {create, propose, record, status}) {
        sub->add_option("--data", po.data_dir, "Campaign directory (default $RELIKIT_DATA or ./campaigns)");
        add_common(sub, common);
    }

    auto* serve = app.add_subcommand("serve", "Run the HTTP campaign service");
    std::string host = "127.0.0.1";
    int port = 0;
    std::string serve_dir;
    serve->add_option("--host", host, "Bind address");
    serve->add_option("--port", port, "Port (default $RELIKIT_PORT or 8080)");
    serve->add_option("--data", serve_dir, "Campaign directory (default $RELIKIT_DATA or ./campaigns)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n";
        const CLI::App* sub = &app;
        for (const auto* s = sub; s != nullptr;) {
            const auto subs = s->get_subcommands();
            if (subs.empty()) break;
            s = subs.front();
            sub = s;
        }
        err << sub->help();
        return 2;
    }

    try {
        if (*simulate) {
            const auto kind = dataset_kind_from_string(sim_kind);
            const auto g = generate_synthetic(kind, read_config(common), common.seed, common.out);
            Json result{{"kind", sim_kind}, {"seed", common.seed}, {"summary", g.summary}, {"settings", g.manifest.settings}};
            if (common.out.empty()) {
                result["tables"] = g.tables;
            } else {
                result["manifest"] = (fs::path(common.out) / "manifest.json").string();
            }
            Common print = common;
            print.out.clear();
            emit(result, print, out, "");
            return 0;
        }
        if (*fit) {
            if (*fits["lifetime"]) {
                emit(fit_lifetime_json(load_lifetime_source(lo), dist::kind_from_string(lo.kind)), common, out, "fit.json");
            } else if (*fits["degradation"]) {
                emit(fit_degradation_json(load_as<DegradationDataset>(dopt.src, DatasetKind::DEGRADATION), dopt, common),
                     common, out, "fit.json");
            } else if (*fits["recurrent"]) {
                const auto d = load_as<RecurrentDataset>(ro.src, DatasetKind::RECURRENT);
                const auto draws = fit_recurrent_draws(d, ro, common);
                Json result{{"model", "recurrent"}, {"data", recurrent_counts(d)}, {"posterior", summarize_draws(draws)}};
                if (!common.out.empty()) {
                    fs::create_directories(common.out);
                    write_draws_csv((fs::path(common.out) / "draws.csv").string(), draws);
                }
                emit(result, common, out, "fit.json");
            } else {
                emit(fit_alt_json(load_alt_source(ao, common), ao, common), common, out, "fit.json");
            }
            return 0;
        }
        if (*predict) {
            if (*preds["lifetime"])
                emit(predict_lifetime_json(lo, common), common, out, "prediction.json");
            else if (*preds["degradation"])
                emit(predict_degradation_json(dopt, common), common, out, "prediction.json");
            else if (*preds["recurrent"])
                emit(predict_recurrent_json(ro, common), common, out, "prediction.json");
            else
                emit(predict_alt_json(ao, common), common, out, "prediction.json");
            return 0;
        }
        if (*plan) {
            const CampaignStore store(data_dir_or_env(po.data_dir));
            if (*create) {
                if (common.config.empty()) throw std::invalid_argument("plan create needs --config");
                const auto s = store.create(read_config(common), po.id.empty() ? store.next_id() : po.id);
                emit(plan_summary(s), common, out, "");
            } else if (*propose) {
                auto s = store.load(po.campaign);
                const auto prop = logged_propose(store, s);
                emit({{"q_next", prop.q}, {"round", prop.round}, {"objective", num(prop.objective)}, {"version", s.version}},
                     common, out, "");
            } else if (*record) {
                auto s = store.load(po.campaign);
                if (po.expected_version >= 0 && po.expected_version != s.version)
                    throw std::runtime_error("version conflict: campaign is at version " + std::to_string(s.version));
                const bool matches = logged_record(store, s, {po.q, po.cycles, po.censored});
                emit({{"version", s.version}, {"data_version", s.data_version}, {"matches_proposal", matches}}, common, out, "");
            } else {
                emit(plan_summary(store.load(po.campaign)), common, out, "");
            }
            return 0;
        }
        if (*serve) {
            if (port == 0) {
                const char* env = std::getenv("RELIKIT_PORT");
                port = env && *env ? std::stoi(env) : 8080;
            }
            CampaignService service(data_dir_or_env(serve_dir));
            err << "serving campaigns on http://" << host << ":" << port << '\n';
            service.serve(host, port);
            return 0;
        }
    } catch (const DataError& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}

}  // namespace relikit::io
