#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <unistd.h>

#include "relikit/io/synthetic.hpp"
#include "relikit/numeric.hpp"

namespace relikit::io {

namespace fs = std::filesystem;

namespace {

template <class T>
void read_if(const Json& j, const char* key, T& out)
{
    if (j.contains(key) && !j.at(key).is_null()) out = j.at(key).get<T>();
}

std::string unit_name(const char* prefix, std::size_t i)
{
    std::ostringstream s;
    s << prefix << (i + 1);
    return s.str();
}

std::string slurp(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

}  // namespace

degradation::CovariateProcessParams DegradationScenario::default_weather()
{
    degradation::CovariateProcessParams w;
    w.mu = {35.0, 15.0, 65.0};
    w.kappa = {15.0, 10.0, 10.0};
    w.eta = {91.0, 100.0, 273.0};
    w.nu = {0.3, 0.2};
    w.varsigma = {91.0, 91.0};
    w.Q1 << 0.5, 0.1, 0.0, 0.05, 0.6, 0.0, 0.0, -0.1, 0.4;
    w.Q2 = 0.1 * Eigen::Matrix3d::Identity();
    w.Sigma_e << 9.0, 1.2, -3.0, 1.2, 4.0, -1.5, -3.0, -1.5, 25.0;
    return w;
}

mtrp::MtrpParams RecurrentScenario::default_truth()
{
    mtrp::MtrpParams p;
    p.component.shape = 0.45;
    p.subsystem.shape = 1.0;
    p.trend_shape = 1.2;
    p.trend_scale = 2150.0;
    p.gamma = 0.5;
    p.sigma_r = 0.3;
    return p;
}

LifetimeScenario lifetime_scenario(const Json& j)
{
    LifetimeScenario s;
    read_if(j, "units", s.units);
    read_if(j, "study_weeks", s.study_weeks);
    if (j.contains("truth")) s.truth = from_json<lifetime::LifetimeParams>(j.at("truth"));
    if (j.contains("covariate")) s.covariate = from_json<lifetime::CovariateLmeParams>(j.at("covariate"));
    if (j.contains("kind")) s.kind = dist::kind_from_string(j.at("kind").get<std::string>());
    read_if(j, "baseline_rate", s.baseline_rate);
    if (s.units == 0) throw std::invalid_argument("scenario needs at least one unit");
    if (!(s.study_weeks > 0.0)) throw std::invalid_argument("study_weeks must be positive");
    s.truth.validate();
    s.covariate.validate(true);
    return s;
}

DegradationScenario degradation_scenario(const Json& j)
{
    DegradationScenario s;
    read_if(j, "units", s.units);
    read_if(j, "placement_days", s.placement_days);
    read_if(j, "observe_days", s.observe_days);
    read_if(j, "measure_every", s.measure_every);
    if (j.contains("weather")) s.weather = from_json<degradation::CovariateProcessParams>(j.at("weather"));
    read_if(j, "rate", s.rate);
    read_if(j, "channel_weight", s.channel_weight);
    read_if(j, "rh_linear", s.rh_linear);
    read_if(j, "beta0", s.beta0);
    read_if(j, "sigma0", s.sigma0);
    read_if(j, "sigma1", s.sigma1);
    read_if(j, "rho", s.rho);
    read_if(j, "sigma_eps", s.sigma_eps);
    if (s.units < 2) throw std::invalid_argument("scenario needs at least two units");
    if (s.placement_days < 0 || s.observe_days < 1 || s.measure_every < 1)
        throw std::invalid_argument("placement_days, observe_days and measure_every must be positive");
    for (double w : s.channel_weight)
        if (!(w >= 0.0)) throw std::invalid_argument("channel weights must be nonnegative");
    s.weather.validate();
    return s;
}

RecurrentScenario recurrent_scenario(const Json& j)
{
    RecurrentScenario s;
    read_if(j, "units", s.units);
    read_if(j, "tau", s.tau);
    if (j.contains("truth")) s.truth = from_json<mtrp::MtrpParams>(j.at("truth"));
    read_if(j, "usage_rate", s.usage_rate);
    read_if(j, "usage_log_sd", s.usage_log_sd);
    if (s.units == 0) throw std::invalid_argument("scenario needs at least one unit");
    if (!(s.tau >= 1.0)) throw std::invalid_argument("tau must be at least 1");
    if (!(s.usage_rate > 0.0) || !(s.usage_log_sd >= 0.0)) throw std::invalid_argument("invalid usage settings");
    s.truth.validate();
    return s;
}

AltScenario alt_scenario(const Json& j)
{
    AltScenario s;
    if (j.contains("config")) s.config = from_json<alt::MaterialTestConfig>(j.at("config"));
    if (j.contains("truth")) s.truth = from_json<alt::AltParams>(j.at("truth"));
    read_if(j, "stress", s.stress);
    read_if(j, "failures", s.failures);
    if (s.stress.empty()) throw std::invalid_argument("scenario needs at least one stress level");
    if (s.failures > static_cast<int>(s.stress.size())) throw std::invalid_argument("more failures than units");
    s.config.validate();
    s.truth.validate();
    return s;
}

LifetimeDataset simulate_lifetime(const LifetimeScenario& s, const Rng& stream)
{
    const Eigen::MatrixXd L = numeric::psd_factor(s.covariate.random_effect_cov());
    LifetimeDataset out;
    out.units.resize(s.units);
    for (std::size_t i = 0; i < s.units; ++i) {
        Rng rng = stream.substream(i);
        const double entry = rng.uniform(0.0, s.study_weeks);
        const double T = s.study_weeks - entry;
        std::vector<double> grid;
        for (double t = 1.0; t <= T; t += 1.0) grid.push_back(t);
        if (grid.empty()) grid.push_back(T);
        const Eigen::Vector2d w = L * Eigen::Vector2d(rng.normal(), rng.normal());
        std::vector<double> x(grid.size());
        for (std::size_t k = 0; k < grid.size(); ++k)
            x[k] = s.covariate.eta + w[0] + w[1] * std::log(grid[k]) + s.covariate.sigma_eps * rng.normal();
        const double threshold = std::exp(s.truth.mu0 + s.truth.sigma0 * dist::std_quantile(rng.uniform(), s.kind));
        const lifetime::ExposureCurve curve(grid, x, s.truth.beta);
        const double t_fail = curve.inverse(threshold);

        auto& u = out.units[i];
        u.unit_id = unit_name("U", i);
        std::vector<double> times, rates;
        if (t_fail <= T) {
            u.event_time = t_fail;
            u.failed = true;
            // Keep the epochs before failure and the value in force at failure.
            std::size_t k = 0;
            for (; k < grid.size() && grid[k] < t_fail; ++k) {
                times.push_back(grid[k]);
                rates.push_back(s.baseline_rate * std::exp(x[k]));
            }
            times.push_back(t_fail);
            rates.push_back(s.baseline_rate * std::exp(x[std::min(k, grid.size() - 1)]));
        } else {
            u.event_time = T;
            u.failed = false;
            times = grid;
            for (double v : x) rates.push_back(s.baseline_rate * std::exp(v));
        }
        u.covariates = lifetime::UseRateSeries::from_rates(std::move(times), rates, s.baseline_rate);
    }
    return out;
}

DegradationDataset simulate_degradation(const DegradationScenario& s, const Rng& stream,
                                        degradation::DegradationFit* truth)
{
    const int jitter = 7;
    Rng weather_rng = stream.substream(0);
    const auto weather_days = static_cast<std::size_t>(s.placement_days + jitter + s.observe_days);
    const auto weather = degradation::simulate_covariate_process(s.weather, weather_days, weather_rng, 0);

    DegradationDataset out;
    out.units.resize(s.units);
    Rng place = stream.substream(1);
    for (std::size_t i = 0; i < s.units; ++i) {
        auto& u = out.units[i];
        u.unit_id = unit_name("S", i);
        const double frac = static_cast<double>(i) / static_cast<double>(s.units - 1);
        u.start_day = static_cast<int>(std::lround(frac * s.placement_days)) + static_cast<int>(place.below(jitter + 1));
        for (int e = 1; e <= s.observe_days; ++e) {
            u.epochs.push_back(e);
            u.covariates.push_back(weather.values[static_cast<std::size_t>(u.start_day + e - weather.first_day)]);
        }
    }

    degradation::DegradationFit gen;
    gen.spec = degradation::SplineEffectSpec::from_data(out.units);
    auto& p = gen.params;
    p.beta0 = s.beta0;
    p.beta_free = {s.rate};
    for (std::size_t l = 0; l < gen.spec.channels.size(); ++l) {
        const auto& ch = gen.spec.channels[l];
        if (ch.free_count() == 1) p.beta_free.push_back(s.rh_linear);
        p.beta_constrained.insert(p.beta_constrained.end(), ch.constrained_count(), s.channel_weight[l]);
    }
    p.sigma0 = s.sigma0;
    p.sigma1 = s.sigma1;
    p.rho = s.rho;
    p.sigma_eps = s.sigma_eps;
    p.validate(gen.spec);

    const Eigen::MatrixXd L = numeric::psd_factor(p.random_effect_cov());
    for (std::size_t i = 0; i < s.units; ++i) {
        auto& u = out.units[i];
        Rng rng = stream.substream(2 + i);
        const Eigen::Vector2d w = L * Eigen::Vector2d(rng.normal(), rng.normal());
        double D = p.beta0;
        for (std::size_t k = 0; k < u.epochs.size(); ++k) {
            D += degradation::damage_rate(u.covariates[k], p, gen.spec);
            const int e = static_cast<int>(u.epochs[k]);
            if (e % s.measure_every != 0) continue;
            u.measurement_epochs.push_back(e);
            u.measurements.push_back(D + w[0] + w[1] * e + s.sigma_eps * rng.normal());
        }
        u.validate();
    }
    if (truth) *truth = std::move(gen);
    return out;
}

RecurrentDataset simulate_recurrent(const RecurrentScenario& s, const Rng& stream)
{
    RecurrentDataset out;
    out.histories.resize(s.units);
    for (std::size_t i = 0; i < s.units; ++i) {
        Rng rng = stream.substream(i);
        const double a = std::exp(s.usage_log_sd * rng.normal());
        const double effect = s.truth.sigma_r * rng.normal();
        mtrp::UsagePath usage;
        for (double t = 1.0; t <= s.tau + 1e-9; t += 1.0) {
            usage.times.push_back(t);
            usage.values.push_back(a * s.usage_rate * t);
        }
        auto h = mtrp::simulate_mtrp(s.truth, usage.times.back(), usage, rng, effect);
        h.unit_id = unit_name("V", i);
        out.histories[i] = std::move(h);
    }
    return out;
}

AltDataset simulate_alt(const AltScenario& s, const Rng& stream)
{
    AltDataset out;
    out.config = s.config;
    for (std::uint64_t attempt = 0; attempt < 10000; ++attempt) {
        Rng rng = stream.substream(attempt);
        auto data = alt::simulate_history(s.truth, s.config, s.stress, rng);
        const auto failed = std::count_if(data.begin(), data.end(), [](const alt::AltTestDatum& d) { return !d.censored; });
        if (s.failures < 0 || failed == s.failures) {
            out.data = std::move(data);
            return out;
        }
    }
    throw std::runtime_error("infeasible scenario: no draw with " + std::to_string(s.failures) + " failures in 10000 attempts");
}

GeneratedDataset generate_synthetic(DatasetKind kind, const Json& scenario, std::uint64_t seed,
                                    const std::string& out_dir)
{
    const Json sc = scenario.is_null() ? Json::object() : scenario;
    if (!sc.is_object()) throw std::invalid_argument("scenario must be a JSON object");
    const Rng stream(seed);
    GeneratedDataset g;
    auto& m = g.manifest;
    m.kind = kind;
    m.seed = seed;
    m.provenance = "synthetic";

    fs::path dir = out_dir;
    bool scratch = false;
    if (out_dir.empty()) {
        dir = fs::temp_directory_path() / ("relikit-" + to_string(kind) + "-" + std::to_string(seed) + "-" +
                                           std::to_string(static_cast<unsigned long long>(
                                               std::hash<std::string>{}(fs::current_path().string()) ^ ::getpid())));
        scratch = true;
    }
    fs::create_directories(dir);
    auto file = [&](const std::string& role, const std::string& name) {
        m.files[role] = name;
        return (dir / name).string();
    };

    switch (kind) {
    case DatasetKind::LIFETIME: {
        const auto s = lifetime_scenario(sc);
        const auto d = simulate_lifetime(s, stream);
        save_lifetime(d, file("units", "units.csv"), file("userate", "userate.csv"));
        std::size_t failed = 0;
        for (const auto& u : d.units) failed += u.failed;
        m.settings = {{"baseline_rate", s.baseline_rate},
                      {"kind", std::string(dist::to_string(s.kind))},
                      {"truth", to_json(s.truth)},
                      {"covariate_truth", to_json(s.covariate)}};
        g.summary = {{"units", d.units.size()},
                     {"failures", failed},
                     {"failure_fraction", static_cast<double>(failed) / static_cast<double>(d.units.size())}};
        break;
    }
    case DatasetKind::DEGRADATION: {
        const auto s = degradation_scenario(sc);
        degradation::DegradationFit truth;
        const auto d = simulate_degradation(s, stream, &truth);
        save_degradation(d, file("measurements", "measurements.csv"), file("covariates", "covariates.csv"));
        std::size_t n_meas = 0;
        for (const auto& u : d.units) n_meas += u.measurements.size();
        m.settings = {{"truth", to_json(truth)}, {"weather_truth", to_json(s.weather)}};
        g.summary = {{"units", d.units.size()}, {"measurements", n_meas}};
        break;
    }
    case DatasetKind::RECURRENT: {
        const auto s = recurrent_scenario(sc);
        const auto d = simulate_recurrent(s, stream);
        save_recurrent(d, file("events", "events.csv"), file("usage", "usage.csv"));
        std::size_t nc = 0, ns = 0;
        for (const auto& h : d.histories) {
            nc += h.count(mtrp::EventType::COMPONENT);
            ns += h.count(mtrp::EventType::SUBSYSTEM);
        }
        m.settings = {{"tau", s.tau}, {"truth", to_json(s.truth)}};
        g.summary = {{"units", d.histories.size()}, {"component_events", nc}, {"subsystem_events", ns}};
        break;
    }
    case DatasetKind::ALT: {
        const auto s = alt_scenario(sc);
        const auto d = simulate_alt(s, stream);
        save_alt(d, file("data", "data.csv"));
        std::size_t failed = 0;
        for (const auto& x : d.data) failed += !x.censored;
        m.settings = {{"config", to_json(s.config)}, {"truth", to_json(s.truth)}};
        g.summary = {{"n", d.data.size()}, {"failures", failed}, {"censored", d.data.size() - failed}};
        break;
    }
    }
    for (const auto& [role, name] : m.files) g.tables[role] = slurp((dir / name).string());
    if (scratch) {
        fs::remove_all(dir);
        m.base_dir = ".";
    } else {
        save_manifest((dir / "manifest.json").string(), m);
        m.base_dir = dir.string();
    }
    return g;
}

}  // namespace relikit::io
