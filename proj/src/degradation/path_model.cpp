#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "relikit/degradation/degradation.hpp"
#include "relikit/degradation/lme.hpp"

namespace relikit::degradation {

void DegradationUnitRecord::validate() const
{
    const std::string who = "unit " + unit_id + ": ";
    if (epochs.empty()) throw std::invalid_argument(who + "no covariate epochs");
    if (epochs.size() != covariates.size()) throw std::invalid_argument(who + "epoch/covariate length mismatch");
    double prev = 0.0;
    for (double e : epochs) {
        if (!(e > prev)) throw std::invalid_argument(who + "epochs must be positive and strictly increasing");
        prev = e;
    }
    for (const auto& x : covariates)
        for (double v : x)
            if (!std::isfinite(v)) throw std::invalid_argument(who + "non-finite covariate value");
    if (measurement_epochs.size() != measurements.size())
        throw std::invalid_argument(who + "measurement length mismatch");
    prev = -1.0;
    for (std::size_t j = 0; j < measurement_epochs.size(); ++j) {
        const double t = measurement_epochs[j];
        if (!(t > prev)) throw std::invalid_argument(who + "measurement epochs must be strictly increasing");
        prev = t;
        if (!std::binary_search(epochs.begin(), epochs.end(), t))
            throw std::invalid_argument(who + "measurement epoch " + std::to_string(t) + " has no covariate record");
        if (!std::isfinite(measurements[j])) throw std::invalid_argument(who + "non-finite measurement");
    }
}

void PathParams::validate(const SplineEffectSpec& spec) const
{
    if (beta_free.size() + 1 != spec.free_count() || beta_constrained.size() != spec.constrained_count())
        throw std::invalid_argument("coefficient count does not match the spline spec");
    for (double b : beta_constrained)
        if (!(b >= 0.0)) throw std::invalid_argument("constrained coefficients must be nonnegative");
    if (!(sigma0 >= 0.0 && sigma1 >= 0.0 && sigma_eps > 0.0))
        throw std::invalid_argument("variance components must be positive");
    if (!(std::abs(rho) <= 1.0)) throw std::invalid_argument("rho must lie in [-1, 1]");
}

Eigen::Matrix2d PathParams::random_effect_cov() const
{
    Eigen::Matrix2d S;
    S << sigma0 * sigma0, rho * sigma0 * sigma1, rho * sigma0 * sigma1, sigma1 * sigma1;
    return S;
}

Eigen::VectorXd PathParams::coefficients() const
{
    Eigen::VectorXd b(static_cast<Eigen::Index>(1 + beta_free.size() + beta_constrained.size()));
    Eigen::Index k = 0;
    b[k++] = beta0;
    for (double v : beta_free) b[k++] = v;
    for (double v : beta_constrained) b[k++] = v;
    return b;
}

void PathParams::set_coefficients(const Eigen::VectorXd& beta, const SplineEffectSpec& spec)
{
    const std::size_t nf = spec.free_count() - 1, nc = spec.constrained_count();
    if (static_cast<std::size_t>(beta.size()) != 1 + nf + nc) throw std::invalid_argument("coefficient size mismatch");
    beta0 = beta[0];
    beta_free.assign(beta.data() + 1, beta.data() + 1 + nf);
    beta_constrained.assign(beta.data() + 1 + nf, beta.data() + 1 + nf + nc);
}

namespace {

// Rate-basis row for one epoch: [rate, free..., constrained...].
void rate_row(const std::array<double, kChannels>& x, const SplineEffectSpec& spec, std::vector<double>& free,
              std::vector<double>& cons)
{
    free.assign(1, 1.0);
    cons.clear();
    if (spec.channels.size() > kChannels) throw std::invalid_argument("spec has more channels than the data");
    for (std::size_t l = 0; l < spec.channels.size(); ++l) {
        const auto row = channel_row(x[l], spec.channels[l]);
        free.insert(free.end(), row.free.begin(), row.free.end());
        cons.insert(cons.end(), row.constrained.begin(), row.constrained.end());
    }
}

}  // namespace

double damage_rate(const std::array<double, kChannels>& x, const PathParams& params, const SplineEffectSpec& spec)
{
    std::vector<double> free, cons;
    rate_row(x, spec, free, cons);
    if (free.size() != params.beta_free.size() || cons.size() != params.beta_constrained.size())
        throw std::invalid_argument("coefficient count does not match the spline spec");
    double r = 0.0;
    for (std::size_t k = 0; k < free.size(); ++k) r += free[k] * params.beta_free[k];
    for (std::size_t k = 0; k < cons.size(); ++k) r += cons[k] * params.beta_constrained[k];
    return r;
}

double cumulative_damage(double t, const DegradationUnitRecord& unit, const PathParams& params,
                         const SplineEffectSpec& spec)
{
    const auto it = std::lower_bound(unit.epochs.begin(), unit.epochs.end(), t);
    if (t != 0.0 && (it == unit.epochs.end() || *it != t))
        throw std::invalid_argument("unit " + unit.unit_id + ": missing covariate epoch " + std::to_string(t));
    double D = params.beta0, prev = 0.0;
    for (std::size_t k = 0; k < unit.epochs.size() && unit.epochs[k] <= t; ++k) {
        D += damage_rate(unit.covariates[k], params, spec) * (unit.epochs[k] - prev);
        prev = unit.epochs[k];
    }
    return D;
}

Eigen::MatrixXd design_matrix(const DegradationUnitRecord& unit, const SplineEffectSpec& spec)
{
    const std::size_t nf = spec.free_count() - 1, nc = spec.constrained_count();
    const auto n = static_cast<Eigen::Index>(unit.measurement_epochs.size());
    Eigen::MatrixXd X(n, static_cast<Eigen::Index>(1 + nf + nc));
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(nf + nc));
    std::vector<double> free, cons;
    double prev = 0.0;
    Eigen::Index row = 0;
    for (std::size_t k = 0; k < unit.epochs.size() && row < n; ++k) {
        rate_row(unit.covariates[k], spec, free, cons);
        const double w = unit.epochs[k] - prev;
        prev = unit.epochs[k];
        for (std::size_t j = 0; j < nf; ++j) acc[static_cast<Eigen::Index>(j)] += free[j] * w;
        for (std::size_t j = 0; j < nc; ++j) acc[static_cast<Eigen::Index>(nf + j)] += cons[j] * w;
        if (unit.epochs[k] == unit.measurement_epochs[static_cast<std::size_t>(row)]) {
            X(row, 0) = 1.0;
            X.row(row).tail(acc.size()) = acc.transpose();
            ++row;
        }
    }
    if (row != n) throw std::invalid_argument("unit " + unit.unit_id + ": measurement epoch without covariates");
    return X;
}

double path_loglik(const PathParams& params, std::span<const DegradationUnitRecord> data,
                   const SplineEffectSpec& spec)
{
    params.validate(spec);
    const Eigen::VectorXd beta = params.coefficients();
    std::vector<lme::UnitStats> stats;
    std::size_t total = 0;
    for (const auto& u : data) {
        const Eigen::MatrixXd X = design_matrix(u, spec);
        const Eigen::Map<const Eigen::VectorXd> y(u.measurements.data(), static_cast<Eigen::Index>(u.measurements.size()));
        const Eigen::Map<const Eigen::VectorXd> t(u.measurement_epochs.data(), y.size());
        stats.push_back(lme::unit_stats(t, y - X * beta));
        total += u.measurements.size();
    }
    lme::VarianceComponents vc{params.sigma0, params.sigma1, params.rho, params.sigma_eps};
    return -0.5 * (lme::neg2_loglik(stats, vc) + static_cast<double>(total) * std::log(2.0 * std::numbers::pi));
}

std::vector<std::string> parameter_names(const SplineEffectSpec& spec)
{
    std::vector<std::string> names{"beta0", "rate"};
    for (const auto& ch : spec.channels)
        if (ch.kind == BasisKind::CSPLINE) names.push_back(ch.name + "_linear");
    for (const auto& ch : spec.channels)
        for (std::size_t q = 1; q <= ch.constrained_count(); ++q) names.push_back(ch.name + "_" + std::to_string(q));
    names.insert(names.end(), {"sigma0", "sigma1", "rho", "sigma_eps"});
    return names;
}

std::vector<double> parameter_vector(const PathParams& p)
{
    std::vector<double> v{p.beta0};
    v.insert(v.end(), p.beta_free.begin(), p.beta_free.end());
    v.insert(v.end(), p.beta_constrained.begin(), p.beta_constrained.end());
    v.insert(v.end(), {p.sigma0, p.sigma1, p.rho, p.sigma_eps});
    return v;
}

}  // namespace relikit::degradation
