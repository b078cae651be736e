#include "relikit/io/serialize.hpp"

#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "relikit/io/csv.hpp"

namespace relikit::io {

namespace {

Json num(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }

double get_num(const Json& j)
{
    if (j.is_null()) return std::numeric_limits<double>::infinity();
    return j.get<double>();
}

template <class T>
void read_if(const Json& j, const char* key, T& target)
{
    if (j.contains(key)) target = j.at(key).get<T>();
}

Json vec(std::span<const double> v)
{
    Json a = Json::array();
    for (double x : v) a.push_back(num(x));
    return a;
}

std::vector<double> vec_from(const Json& j)
{
    std::vector<double> out;
    for (const auto& x : j) out.push_back(get_num(x));
    return out;
}

template <std::size_t N>
Json arr(const std::array<double, N>& a)
{
    return vec(std::span<const double>(a.data(), N));
}

template <std::size_t N>
std::array<double, N> arr_from(const Json& j)
{
    std::array<double, N> out{};
    if (j.size() != N) throw std::invalid_argument("expected an array of length " + std::to_string(N));
    for (std::size_t i = 0; i < N; ++i) out[i] = get_num(j[i]);
    return out;
}

}  // namespace

Json to_json(const Eigen::MatrixXd& m)
{
    Json rows = Json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        Json row = Json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(num(m(r, c)));
        rows.push_back(std::move(row));
    }
    return rows;
}

Eigen::MatrixXd matrix_from_json(const Json& j)
{
    const auto rows = static_cast<Eigen::Index>(j.size());
    const auto cols = rows > 0 ? static_cast<Eigen::Index>(j[0].size()) : 0;
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        if (static_cast<Eigen::Index>(j[r].size()) != cols) throw std::invalid_argument("ragged matrix");
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = get_num(j[r][c]);
    }
    return m;
}

// ---- lifetime

Json to_json(const lifetime::LifetimeParams& p) { return {{"mu0", p.mu0}, {"sigma0", p.sigma0}, {"beta", p.beta}}; }

Json to_json(const lifetime::CovariateLmeParams& p)
{
    return {{"eta", p.eta}, {"sigma1", p.sigma1}, {"sigma2", p.sigma2}, {"rho", p.rho}, {"sigma_eps", p.sigma_eps}};
}

Json to_json(const lifetime::LifetimeFit& f)
{
    return {{"params", to_json(f.params)},
            {"kind", std::string(dist::to_string(f.kind))},
            {"covariance", to_json(Eigen::MatrixXd(f.covariance))},
            {"loglik", num(f.loglik)},
            {"iterations", f.iterations}};
}

Json to_json(const lifetime::CovariateFit& f)
{
    return {{"params", to_json(f.params)},
            {"covariance", to_json(Eigen::MatrixXd(f.covariance))},
            {"loglik", num(f.loglik)},
            {"iterations", f.iterations}};
}

template <>
lifetime::LifetimeParams from_json(const Json& j)
{
    return {j.at("mu0").get<double>(), j.at("sigma0").get<double>(), j.at("beta").get<double>()};
}

template <>
lifetime::CovariateLmeParams from_json(const Json& j)
{
    return {j.at("eta").get<double>(), j.at("sigma1").get<double>(), j.at("sigma2").get<double>(),
            j.at("rho").get<double>(), j.at("sigma_eps").get<double>()};
}

template <>
lifetime::LifetimeFit from_json(const Json& j)
{
    lifetime::LifetimeFit f;
    f.params = from_json<lifetime::LifetimeParams>(j.at("params"));
    f.kind = dist::kind_from_string(j.at("kind").get<std::string>());
    f.covariance = matrix_from_json(j.at("covariance"));
    f.loglik = get_num(j.at("loglik"));
    f.iterations = j.value("iterations", 0);
    return f;
}

template <>
lifetime::CovariateFit from_json(const Json& j)
{
    lifetime::CovariateFit f;
    f.params = from_json<lifetime::CovariateLmeParams>(j.at("params"));
    f.covariance = matrix_from_json(j.at("covariance"));
    f.loglik = get_num(j.at("loglik"));
    f.iterations = j.value("iterations", 0);
    return f;
}

// ---- degradation

Json to_json(const degradation::ChannelSpline& c)
{
    return {{"name", c.name},
            {"kind", degradation::to_string(c.kind)},
            {"knots", vec(c.knots)},
            {"degree", c.degree},
            {"sign", c.sign}};
}

Json to_json(const degradation::SplineEffectSpec& s)
{
    Json ch = Json::array();
    for (const auto& c : s.channels) ch.push_back(to_json(c));
    return {{"channels", ch}};
}

Json to_json(const degradation::PathParams& p)
{
    return {{"beta0", p.beta0},
            {"beta_free", vec(p.beta_free)},
            {"beta_constrained", vec(p.beta_constrained)},
            {"sigma0", p.sigma0},
            {"sigma1", p.sigma1},
            {"rho", p.rho},
            {"sigma_eps", p.sigma_eps}};
}

Json to_json(const degradation::DegradationFit& f)
{
    return {{"params", to_json(f.params)},
            {"spec", to_json(f.spec)},
            {"report",
             {{"iterations", f.report.iterations},
              {"converged", f.report.converged},
              {"objective_trace", vec(f.report.objective_trace)},
              {"loglik", num(f.report.loglik)}}}};
}

Json to_json(const degradation::CovariateProcessParams& p)
{
    return {{"mu", arr(p.mu)},
            {"kappa", arr(p.kappa)},
            {"eta", arr(p.eta)},
            {"nu", arr(p.nu)},
            {"varsigma", arr(p.varsigma)},
            {"Q1", to_json(Eigen::MatrixXd(p.Q1))},
            {"Q2", to_json(Eigen::MatrixXd(p.Q2))},
            {"Sigma_e", to_json(Eigen::MatrixXd(p.Sigma_e))}};
}

Json to_json(const degradation::CovariateProcessFit& f)
{
    Json se = Json::array();
    for (const auto& s : f.seasonal_se) se.push_back(arr(s));
    return {{"params", to_json(f.params)},
            {"var_se", to_json(Eigen::MatrixXd(f.var_se))},
            {"seasonal_se", se},
            {"days", f.days}};
}

template <>
degradation::ChannelSpline from_json(const Json& j)
{
    degradation::ChannelSpline c;
    c.name = j.at("name").get<std::string>();
    c.kind = degradation::basis_kind_from_string(j.at("kind").get<std::string>());
    c.knots = vec_from(j.at("knots"));
    c.degree = j.value("degree", 3);
    c.sign = j.value("sign", -1.0);
    return c;
}

template <>
degradation::SplineEffectSpec from_json(const Json& j)
{
    degradation::SplineEffectSpec s;
    for (const auto& c : j.at("channels")) s.channels.push_back(from_json<degradation::ChannelSpline>(c));
    return s;
}

template <>
degradation::PathParams from_json(const Json& j)
{
    degradation::PathParams p;
    p.beta0 = j.at("beta0").get<double>();
    p.beta_free = vec_from(j.at("beta_free"));
    p.beta_constrained = vec_from(j.at("beta_constrained"));
    p.sigma0 = j.at("sigma0").get<double>();
    p.sigma1 = j.at("sigma1").get<double>();
    p.rho = j.at("rho").get<double>();
    p.sigma_eps = j.at("sigma_eps").get<double>();
    return p;
}

template <>
degradation::DegradationFit from_json(const Json& j)
{
    degradation::DegradationFit f;
    f.params = from_json<degradation::PathParams>(j.at("params"));
    f.spec = from_json<degradation::SplineEffectSpec>(j.at("spec"));
    if (j.contains("report")) {
        const auto& r = j.at("report");
        f.report.iterations = r.value("iterations", 0);
        f.report.converged = r.value("converged", false);
        if (r.contains("objective_trace")) f.report.objective_trace = vec_from(r.at("objective_trace"));
        if (r.contains("loglik")) f.report.loglik = get_num(r.at("loglik"));
    }
    return f;
}

template <>
degradation::CovariateProcessParams from_json(const Json& j)
{
    degradation::CovariateProcessParams p;
    p.mu = arr_from<3>(j.at("mu"));
    p.kappa = arr_from<3>(j.at("kappa"));
    p.eta = arr_from<3>(j.at("eta"));
    p.nu = arr_from<2>(j.at("nu"));
    p.varsigma = arr_from<2>(j.at("varsigma"));
    p.Q1 = matrix_from_json(j.at("Q1"));
    p.Q2 = matrix_from_json(j.at("Q2"));
    p.Sigma_e = matrix_from_json(j.at("Sigma_e"));
    return p;
}

template <>
degradation::CovariateProcessFit from_json(const Json& j)
{
    degradation::CovariateProcessFit f;
    f.params = from_json<degradation::CovariateProcessParams>(j.at("params"));
    if (j.contains("var_se")) f.var_se = matrix_from_json(j.at("var_se"));
    if (j.contains("seasonal_se"))
        for (std::size_t k = 0; k < degradation::kChannels; ++k) f.seasonal_se[k] = arr_from<3>(j.at("seasonal_se")[k]);
    f.days = j.value("days", std::size_t{0});
    return f;
}

// ---- recurrent

Json to_json(const mtrp::MtrpParams& p)
{
    return {{"component_shape", p.component.shape},
            {"subsystem_shape", p.subsystem.shape},
            {"trend_shape", p.trend_shape},
            {"trend_scale", p.trend_scale},
            {"gamma", p.gamma},
            {"sigma_r", p.sigma_r}};
}

template <>
mtrp::MtrpParams from_json(const Json& j)
{
    mtrp::MtrpParams p;
    p.component.shape = j.at("component_shape").get<double>();
    p.subsystem.shape = j.at("subsystem_shape").get<double>();
    p.trend_shape = j.at("trend_shape").get<double>();
    p.trend_scale = j.at("trend_scale").get<double>();
    p.gamma = j.at("gamma").get<double>();
    p.sigma_r = j.at("sigma_r").get<double>();
    return p;
}

Json to_json(const PosteriorDraws& d)
{
    Json j{{"names", d.names},
           {"values", to_json(d.values)},
           {"chain", d.chain},
           {"iteration", d.iteration},
           {"acceptance", vec(d.acceptance)}};
    if (d.effects.size() > 0) j["effects"] = to_json(d.effects);
    return j;
}

template <>
PosteriorDraws from_json(const Json& j)
{
    PosteriorDraws d;
    d.names = j.at("names").get<std::vector<std::string>>();
    d.values = matrix_from_json(j.at("values"));
    d.chain = j.at("chain").get<std::vector<int>>();
    d.iteration = j.at("iteration").get<std::vector<int>>();
    d.acceptance = vec_from(j.at("acceptance"));
    if (j.contains("effects")) d.effects = matrix_from_json(j.at("effects"));
    return d;
}

// ---- alt

Json to_json(const alt::MaterialTestConfig& c)
{
    return {{"sigma_ult", c.sigma_ult},
            {"R", c.R},
            {"freq", c.freq},
            {"alpha", c.alpha_angle},
            {"censor_cycles", c.censor_cycles},
            {"q_lower", c.q_lower},
            {"q_upper", c.q_upper},
            {"grid", vec(c.grid)},
            {"kind", std::string(dist::to_string(c.kind))}};
}

template <>
alt::MaterialTestConfig from_json(const Json& j)
{
    alt::MaterialTestConfig c;
    read_if(j, "sigma_ult", c.sigma_ult);
    read_if(j, "R", c.R);
    read_if(j, "freq", c.freq);
    read_if(j, "alpha", c.alpha_angle);
    read_if(j, "censor_cycles", c.censor_cycles);
    read_if(j, "q_lower", c.q_lower);
    read_if(j, "q_upper", c.q_upper);
    if (j.contains("grid")) c.grid = vec_from(j.at("grid"));
    if (j.contains("kind")) c.kind = dist::kind_from_string(j.at("kind").get<std::string>());
    return c;
}

Json to_json(const alt::AltParams& p) { return {{"A", p.A}, {"B", p.B}, {"nu", p.nu}}; }

template <>
alt::AltParams from_json(const Json& j)
{
    return {j.at("A").get<double>(), j.at("B").get<double>(), j.at("nu").get<double>()};
}

Json to_json(const alt::AltPriors& p)
{
    return {{"mu_A", p.mu_A},   {"var_A", p.var_A},       {"mu_B", p.mu_B},
            {"var_B", p.var_B}, {"kappa_ig", p.kappa_ig}, {"gamma_ig", p.gamma_ig}};
}

template <>
alt::AltPriors from_json(const Json& j)
{
    alt::AltPriors p;
    read_if(j, "mu_A", p.mu_A);
    read_if(j, "var_A", p.var_A);
    read_if(j, "mu_B", p.mu_B);
    read_if(j, "var_B", p.var_B);
    read_if(j, "kappa_ig", p.kappa_ig);
    read_if(j, "gamma_ig", p.gamma_ig);
    return p;
}

Json to_json(const alt::UseProfile& p) { return {{"levels", vec(p.levels)}, {"weights", vec(p.weights)}}; }

template <>
alt::UseProfile from_json(const Json& j)
{
    alt::UseProfile p;
    p.levels = vec_from(j.at("levels"));
    p.weights = vec_from(j.at("weights"));
    return p;
}

Json to_json(const alt::AltTestDatum& d) { return {{"q", d.q}, {"cycles", d.cycles}, {"failed", !d.censored}}; }

template <>
alt::AltTestDatum from_json(const Json& j)
{
    alt::AltTestDatum d;
    d.q = j.at("q").get<double>();
    d.cycles = j.at("cycles").get<double>();
    if (j.contains("failed"))
        d.censored = !j.at("failed").get<bool>();
    else
        d.censored = j.at("censored").get<bool>();
    return d;
}

Json to_json(const alt::SamplerOptions& s)
{
    return {{"burn_in", s.burn_in}, {"draws", s.draws}, {"target_acceptance", s.target_acceptance}};
}

template <>
alt::SamplerOptions from_json(const Json& j)
{
    alt::SamplerOptions s;
    read_if(j, "burn_in", s.burn_in);
    read_if(j, "draws", s.draws);
    read_if(j, "target_acceptance", s.target_acceptance);
    return s;
}

Json to_json(const alt::Proposal& p)
{
    return {{"round", p.round}, {"q", p.q}, {"objective", num(p.objective)}, {"objective_trace", vec(p.objective_trace)}};
}

template <>
alt::Proposal from_json(const Json& j)
{
    alt::Proposal p;
    p.round = j.at("round").get<int>();
    p.q = j.at("q").get<double>();
    p.objective = get_num(j.at("objective"));
    p.objective_trace = vec_from(j.at("objective_trace"));
    return p;
}

Json to_json(const alt::AltCampaignState& s)
{
    Json data = Json::array();
    for (const auto& d : s.data) data.push_back(to_json(d));
    Json props = Json::array();
    for (const auto& p : s.proposals) props.push_back(to_json(p));
    Json posterior{{"fresh", s.cache_fresh()}};
    if (s.cache_fresh()) {
        Json summary = Json::object();
        const auto& d = s.posterior->draws;
        for (const auto& name : d.names) {
            const auto v = d.draws_of(name);
            double m = 0.0;
            for (double x : v) m += x;
            m /= static_cast<double>(v.size());
            double ss = 0.0;
            for (double x : v) ss += (x - m) * (x - m);
            summary[name] = {{"mean", m}, {"sd", std::sqrt(ss / static_cast<double>(v.size() > 1 ? v.size() - 1 : 1))}};
        }
        posterior["summary"] = summary;
        posterior["draws"] = d.size();
    }
    return {{"id", s.id},
            {"config", to_json(s.config)},
            {"priors", to_json(s.priors)},
            {"profile", to_json(s.profile)},
            {"p", s.p},
            {"seed", s.seed},
            {"sampler", to_json(s.sampler)},
            {"data", data},
            {"historical", s.historical},
            {"proposals", props},
            {"version", s.version},
            {"data_version", s.data_version},
            {"posterior", posterior}};
}

template <>
alt::AltCampaignState from_json(const Json& j)
{
    alt::AltCampaignState s;
    s.id = j.at("id").get<std::string>();
    s.config = from_json<alt::MaterialTestConfig>(j.at("config"));
    s.priors = from_json<alt::AltPriors>(j.at("priors"));
    s.profile = from_json<alt::UseProfile>(j.at("profile"));
    s.p = j.at("p").get<double>();
    s.seed = j.at("seed").get<std::uint64_t>();
    s.sampler = from_json<alt::SamplerOptions>(j.at("sampler"));
    for (const auto& d : j.at("data")) s.data.push_back(from_json<alt::AltTestDatum>(d));
    s.historical = j.at("historical").get<std::size_t>();
    for (const auto& p : j.at("proposals")) s.proposals.push_back(from_json<alt::Proposal>(p));
    s.version = j.at("version").get<long>();
    s.data_version = j.at("data_version").get<long>();
    return s;
}

alt::AltCampaignState campaign_from_config(const Json& config, const std::string& id)
{
    if (!config.is_object()) throw std::invalid_argument("campaign config must be a JSON object");
    alt::AltCampaignState s;
    s.id = id;
    s.config = from_json<alt::MaterialTestConfig>(config);
    if (config.contains("priors")) s.priors = from_json<alt::AltPriors>(config.at("priors"));
    if (config.contains("profile")) s.profile = from_json<alt::UseProfile>(config.at("profile"));
    read_if(config, "p", s.p);
    read_if(config, "seed", s.seed);
    if (config.contains("sampler")) s.sampler = from_json<alt::SamplerOptions>(config.at("sampler"));
    if (config.contains("data"))
        for (const auto& d : config.at("data")) s.data.push_back(from_json<alt::AltTestDatum>(d));
    s.historical = s.data.size();
    s.config.validate();
    s.priors.validate();
    s.profile.validate();
    if (!(s.p > 0.0 && s.p < 1.0)) throw std::invalid_argument("p must lie in (0, 1)");
    for (const auto& d : s.data) d.validate();
    return s;
}

void write_draws_csv(const std::string& path, const PosteriorDraws& draws)
{
    std::vector<std::string> header{"chain", "iteration"};
    header.insert(header.end(), draws.names.begin(), draws.names.end());
    std::vector<std::vector<std::string>> rows;
    for (std::size_t r = 0; r < draws.size(); ++r) {
        std::vector<std::string> row{std::to_string(draws.chain[r]), std::to_string(draws.iteration[r])};
        for (Eigen::Index c = 0; c < draws.values.cols(); ++c)
            row.push_back(format_double(draws.values(static_cast<Eigen::Index>(r), c)));
        rows.push_back(std::move(row));
    }
    write_csv_file(path, header, rows);
}

PosteriorDraws read_draws_csv(const std::string& path)
{
    const CsvTable t = read_csv(path);
    if (t.header.size() < 3 || t.header[0] != "chain" || t.header[1] != "iteration")
        throw DataError(path, 1, 0, "draws file must start with chain,iteration columns");
    PosteriorDraws d;
    d.names.assign(t.header.begin() + 2, t.header.end());
    d.values.resize(static_cast<Eigen::Index>(t.rows.size()), static_cast<Eigen::Index>(d.names.size()));
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        d.chain.push_back(static_cast<int>(t.integer(t.rows[r], 0)));
        d.iteration.push_back(static_cast<int>(t.integer(t.rows[r], 1)));
        for (std::size_t c = 0; c < d.names.size(); ++c)
            d.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = t.number(t.rows[r], c + 2);
    }
    return d;
}

Json read_json_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw DataError(path, 0, 0, "cannot open file");
    try {
        return Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw DataError(path, 0, 0, e.what());
    }
}

void write_json_file(const std::string& path, const Json& j)
{
    std::ofstream out(path);
    if (!out) throw DataError(path, 0, 0, "cannot write file");
    out << j.dump(2) << '\n';
}

}  // namespace relikit::io
