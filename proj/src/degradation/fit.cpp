#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "relikit/degradation/degradation.hpp"
#include "relikit/degradation/lme.hpp"
#include "relikit/dist.hpp"
#include "relikit/numeric.hpp"

namespace relikit::degradation {

namespace {

struct UnitDesign {
    Eigen::MatrixXd X;
    Eigen::VectorXd y;
    Eigen::VectorXd t;
};

std::vector<UnitDesign> build_designs(std::span<const DegradationUnitRecord> data, const SplineEffectSpec& spec)
{
    std::vector<UnitDesign> out;
    out.reserve(data.size());
    for (const auto& u : data) {
        UnitDesign d;
        d.X = design_matrix(u, spec);
        d.y = Eigen::Map<const Eigen::VectorXd>(u.measurements.data(), static_cast<Eigen::Index>(u.measurements.size()));
        d.t = Eigen::Map<const Eigen::VectorXd>(u.measurement_epochs.data(), d.y.size());
        out.push_back(std::move(d));
    }
    return out;
}

Eigen::MatrixXd stacked(const std::vector<UnitDesign>& designs, Eigen::VectorXd* y)
{
    Eigen::Index rows = 0;
    for (const auto& d : designs) rows += d.X.rows();
    Eigen::MatrixXd X(rows, designs.front().X.cols());
    if (y) y->resize(rows);
    Eigen::Index r = 0;
    for (const auto& d : designs) {
        X.middleRows(r, d.X.rows()) = d.X;
        if (y) y->segment(r, d.y.size()) = d.y;
        r += d.X.rows();
    }
    return X;
}

Eigen::Index column_rank(const Eigen::MatrixXd& X)
{
    Eigen::MatrixXd S = X;
    for (Eigen::Index j = 0; j < S.cols(); ++j) {
        const double n = S.col(j).norm();
        if (n > 0.0) S.col(j) /= n;
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(S);
    qr.setThreshold(1e-10);
    return qr.rank();
}

void check_rank(const Eigen::MatrixXd& X, const SplineEffectSpec& spec)
{
    // Columns: intercept, rate, per-channel free, per-channel constrained.
    std::vector<Eigen::Index> cols{0, 1};
    if (column_rank(X(Eigen::all, cols)) < 2) throw std::invalid_argument("rank-deficient design: intercept and rate");
    Eigen::Index free_pos = 2;
    Eigen::Index cons_pos = static_cast<Eigen::Index>(spec.free_count());
    for (const auto& ch : spec.channels) {
        const auto before = static_cast<Eigen::Index>(cols.size());
        for (std::size_t k = 0; k < ch.free_count(); ++k) cols.push_back(free_pos++);
        for (std::size_t k = 0; k < ch.constrained_count(); ++k) cols.push_back(cons_pos++);
        if (column_rank(X(Eigen::all, cols)) < static_cast<Eigen::Index>(cols.size()))
            throw std::invalid_argument("rank-deficient design in channel " + ch.name + " (columns " +
                                        std::to_string(before) + "-" + std::to_string(cols.size() - 1) + ")");
    }
}

std::vector<lme::UnitStats> residual_stats(const std::vector<UnitDesign>& designs, const Eigen::VectorXd& beta)
{
    std::vector<lme::UnitStats> stats;
    stats.reserve(designs.size());
    for (const auto& d : designs) stats.push_back(lme::unit_stats(d.t, d.y - d.X * beta));
    return stats;
}

Eigen::VectorXd gls_step(const std::vector<UnitDesign>& designs, const lme::VarianceComponents& vc,
                         const std::vector<bool>& mask)
{
    Eigen::Index rows = 0;
    for (const auto& d : designs) rows += d.X.rows();
    const Eigen::Index p = designs.front().X.cols();
    Eigen::MatrixXd A(rows, p);
    Eigen::VectorXd b(rows);
    const Eigen::Matrix2d S = vc.cov();
    const double s2 = vc.sigma_eps * vc.sigma_eps;
    Eigen::Index r = 0;
    for (const auto& d : designs) {
        const Eigen::Index n = d.X.rows();
        Eigen::MatrixXd Z(n, 2);
        Z.col(0).setOnes();
        Z.col(1) = d.t;
        Eigen::MatrixXd V = Z * S * Z.transpose();
        V.diagonal().array() += s2;
        Eigen::LLT<Eigen::MatrixXd> llt(V);
        if (llt.info() != Eigen::Success) throw std::runtime_error("marginal covariance is not positive definite");
        A.middleRows(r, n) = llt.matrixL().solve(d.X);
        b.segment(r, n) = llt.matrixL().solve(d.y);
        r += n;
    }
    return numeric::partially_constrained_lsq(A, b, mask);
}

double relative_change(const Eigen::VectorXd& a, const Eigen::VectorXd& b)
{
    return (a - b).lpNorm<Eigen::Infinity>() / std::max(b.lpNorm<Eigen::Infinity>(), 1e-300);
}

Eigen::VectorXd state_vector(const Eigen::VectorXd& beta, const lme::VarianceComponents& vc)
{
    Eigen::VectorXd s(beta.size() + 4);
    s << beta, vc.sigma0, vc.sigma1, vc.rho, vc.sigma_eps;
    return s;
}

}  // namespace

DegradationFit fit_degradation(std::span<const DegradationUnitRecord> data, const SplineEffectSpec& spec,
                               const FitOptions& options)
{
    spec.validate();
    if (data.size() < 2) throw std::invalid_argument("at least two units are required");
    for (const auto& u : data) {
        u.validate();
        if (u.measurements.size() < 3)
            throw std::invalid_argument("unit " + u.unit_id + ": at least three measurements are required");
    }
    const auto designs = build_designs(data, spec);
    Eigen::VectorXd y_all;
    const Eigen::MatrixXd X_all = stacked(designs, &y_all);
    check_rank(X_all, spec);

    const std::size_t p = static_cast<std::size_t>(X_all.cols());
    std::vector<bool> mask(p, false);
    for (std::size_t j = spec.free_count(); j < p; ++j) mask[j] = true;

    const double scale = std::max(1.0, std::sqrt(y_all.squaredNorm() / static_cast<double>(y_all.size())));
    const double floor = 1e-10 * scale;

    // (1) unconstrained fit and mixed-model initialization
    Eigen::VectorXd beta = X_all.colPivHouseholderQr().solve(y_all);
    double t_mean = 0.0;
    for (const auto& d : designs) t_mean += d.t.mean() / static_cast<double>(designs.size());
    const Eigen::VectorXd res = y_all - X_all * beta;
    const double sd = std::sqrt(res.squaredNorm() / static_cast<double>(res.size()));
    lme::VarianceComponents vc{0.5 * sd, 0.5 * sd / std::max(t_mean, 1.0), 0.0, std::max(sd, floor)};
    vc = lme::fit(residual_stats(designs, beta), vc, floor, 4);

    DegradationFit out;
    out.spec = spec;
    Eigen::VectorXd state = state_vector(beta, vc);
    for (int it = 1; it <= options.max_iterations; ++it) {
        // (2)-(3) constrained generalized least squares under the current V
        beta = gls_step(designs, vc, mask);
        for (std::size_t j = spec.free_count(); j < p; ++j) beta[static_cast<Eigen::Index>(j)] = std::max(0.0, beta[static_cast<Eigen::Index>(j)]);
        // (4) variance components from the residuals
        const auto stats = residual_stats(designs, beta);
        vc = lme::fit(stats, vc, floor);
        out.report.objective_trace.push_back(lme::neg2_loglik(stats, vc));
        out.report.iterations = it;
        const Eigen::VectorXd next = state_vector(beta, vc);
        const double change = relative_change(next, state);
        state = next;
        if (change < options.tolerance) {
            out.report.converged = true;
            break;
        }
    }
    out.params.set_coefficients(beta, spec);
    out.params.sigma0 = vc.sigma0;
    out.params.sigma1 = vc.sigma1;
    out.params.rho = vc.rho;
    out.params.sigma_eps = vc.sigma_eps;
    out.report.loglik = -0.5 * (out.report.objective_trace.back() +
                                static_cast<double>(y_all.size()) * std::log(2.0 * std::numbers::pi));
    return out;
}

std::vector<Eigen::Vector2d> predict_random_effects(const DegradationFit& fit,
                                                    std::span<const DegradationUnitRecord> data)
{
    const auto designs = build_designs(data, fit.spec);
    const auto stats = residual_stats(designs, fit.params.coefficients());
    const lme::VarianceComponents vc{fit.params.sigma0, fit.params.sigma1, fit.params.rho, fit.params.sigma_eps};
    std::vector<Eigen::Vector2d> out;
    for (const auto& s : stats) out.push_back(lme::blup(s, vc));
    return out;
}

std::pair<double, double> bc_percentile(std::vector<double> replicates, double estimate, double level)
{
    if (replicates.empty()) throw std::invalid_argument("no bootstrap replicates");
    if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("level must lie in (0, 1)");
    const double B = static_cast<double>(replicates.size());
    double below = 0.0;
    for (double r : replicates) below += r < estimate ? 1.0 : (r == estimate ? 0.5 : 0.0);
    const double prop = std::clamp(below / B, 0.5 / B, 1.0 - 0.5 / B);
    const double z0 = dist::std_quantile(prop, dist::StdKind::NORMAL);
    const double zl = dist::std_quantile(0.5 * (1.0 - level), dist::StdKind::NORMAL);
    const double a1 = dist::std_cdf(2.0 * z0 + zl, dist::StdKind::NORMAL);
    const double a2 = dist::std_cdf(2.0 * z0 - zl, dist::StdKind::NORMAL);
    return {numeric::quantile(replicates, a1), numeric::quantile(std::move(replicates), a2)};
}

BootstrapResult bootstrap_degradation(std::span<const DegradationUnitRecord> data, const DegradationFit& fit,
                                      std::size_t resamples, double level, const Rng& stream,
                                      const FitOptions& options)
{
    if (resamples < 1) throw std::invalid_argument("at least one resample is required");
    BootstrapResult out;
    out.few_resamples = resamples < 100;
    const auto designs = build_designs(data, fit.spec);
    const Eigen::VectorXd beta = fit.params.coefficients();
    const auto effects = predict_random_effects(fit, data);
    const std::size_t n = data.size();

    // Centered predicted effects, rescaled to the fitted covariance.
    Eigen::Vector2d mean_w = Eigen::Vector2d::Zero();
    for (const auto& w : effects) mean_w += w / static_cast<double>(n);
    Eigen::Matrix2d emp = Eigen::Matrix2d::Zero();
    for (const auto& w : effects) emp += (w - mean_w) * (w - mean_w).transpose() / static_cast<double>(n);
    const Eigen::Matrix2d target = fit.params.random_effect_cov();
    Eigen::Matrix2d scale = Eigen::Matrix2d::Zero();
    if (target.trace() > 0.0 && emp.trace() > 0.0) {
        const Eigen::MatrixXd Lt = numeric::psd_factor(target);
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(emp);
        Eigen::Vector2d inv_sqrt;
        for (int k = 0; k < 2; ++k) {
            const double ev = es.eigenvalues()[k];
            inv_sqrt[k] = ev > 1e-14 * emp.trace() ? 1.0 / std::sqrt(ev) : 0.0;
        }
        scale = Lt * (es.eigenvectors() * inv_sqrt.asDiagonal() * es.eigenvectors().transpose());
    }
    out.effect_scale = scale;

    // Level-1 residuals, centered and rescaled to the fitted error sd.
    std::vector<double> resid;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& d = designs[i];
        const Eigen::VectorXd e = d.y - d.X * beta - (effects[i][0] + effects[i][1] * d.t.array()).matrix();
        resid.insert(resid.end(), e.data(), e.data() + e.size());
    }
    const double rmean = numeric::mean(resid);
    double rss = 0.0;
    for (double& e : resid) {
        e -= rmean;
        rss += e * e;
    }
    const double rsd = std::sqrt(rss / static_cast<double>(resid.size()));
    out.residual_scale = rsd > 0.0 ? fit.params.sigma_eps / rsd : 0.0;
    if (fit.params.sigma_eps <= 1e-9 * std::max(1.0, beta.cwiseAbs().maxCoeff())) out.residual_scale = 0.0;

    std::vector<Eigen::Vector2d> adj_w(n);
    for (std::size_t i = 0; i < n; ++i) adj_w[i] = scale * (effects[i] - mean_w);

    out.replicates.resize(resamples);
    numeric::parallel_for(resamples, [&](std::size_t b) {
        Rng rng = stream.substream(b);
        std::vector<DegradationUnitRecord> boot(data.begin(), data.end());
        for (std::size_t i = 0; i < n; ++i) {
            const Eigen::Vector2d& w = adj_w[rng.below(n)];
            const auto& d = designs[i];
            const Eigen::VectorXd mean = d.X * beta;
            for (Eigen::Index j = 0; j < d.y.size(); ++j) {
                const double e = out.residual_scale * resid[rng.below(resid.size())];
                boot[i].measurements[static_cast<std::size_t>(j)] = mean[j] + w[0] + w[1] * d.t[j] + e;
            }
        }
        out.replicates[b] = fit_degradation(boot, fit.spec, options).params;
    });

    const auto names = parameter_names(fit.spec);
    const auto est = parameter_vector(fit.params);
    for (std::size_t k = 0; k < names.size(); ++k) {
        std::vector<double> reps(resamples);
        for (std::size_t b = 0; b < resamples; ++b) reps[b] = parameter_vector(out.replicates[b])[k];
        const auto [lo, hi] = bc_percentile(std::move(reps), est[k], level);
        out.intervals.push_back({names[k], est[k], lo, hi});
    }
    return out;
}

}  // namespace relikit::degradation
