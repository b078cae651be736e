#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <stdexcept>

#include "relikit/degradation/degradation.hpp"
#include "relikit/numeric.hpp"

namespace relikit::degradation {

namespace {

constexpr double kOmega = 2.0 * std::numbers::pi / 365.0;

double wrap_phase(double angle)
{
    double d = angle / kOmega;
    d = std::fmod(d, 365.0);
    return d < 0.0 ? d + 365.0 : d;
}

struct SeasonalFit {
    double mu = 0.0, kappa = 0.0, eta = 0.0, nu = 0.0, varsigma = 0.0;
    std::array<double, 3> se{};
};

// Weighted least squares for the seasonal mean under volatility h; returns
// the profiled negative log-likelihood.
double profile_mean(const std::vector<double>& t, const std::vector<double>& x, const std::vector<double>& h,
                    Eigen::Vector3d* coef, Eigen::Matrix3d* cov)
{
    const std::size_t n = t.size();
    Eigen::Matrix3d XtX = Eigen::Matrix3d::Zero();
    Eigen::Vector3d Xty = Eigen::Vector3d::Zero();
    double log_h = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!(h[i] > 0.0)) return std::numeric_limits<double>::infinity();
        const Eigen::Vector3d row(1.0, std::sin(kOmega * t[i]), std::cos(kOmega * t[i]));
        const double w = 1.0 / (h[i] * h[i]);
        XtX += w * row * row.transpose();
        Xty += w * row * x[i];
        log_h += std::log(h[i]);
    }
    const Eigen::Vector3d b = XtX.ldlt().solve(Xty);
    double rss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double m = b[0] + b[1] * std::sin(kOmega * t[i]) + b[2] * std::cos(kOmega * t[i]);
        rss += (x[i] - m) * (x[i] - m) / (h[i] * h[i]);
    }
    const double s2 = rss / static_cast<double>(n);
    if (coef) *coef = b;
    if (cov) *cov = s2 * XtX.inverse();
    return 0.5 * static_cast<double>(n) * std::log(s2) + log_h;
}

std::vector<double> volatility_path(const std::vector<double>& t, double c, double d)
{
    const double nu = std::hypot(c, d);
    std::vector<double> h(t.size());
    for (std::size_t i = 0; i < t.size(); ++i)
        h[i] = 1.0 + nu + c * std::sin(kOmega * t[i]) + d * std::cos(kOmega * t[i]);
    return h;
}

SeasonalFit fit_seasonal(const std::vector<double>& t, const std::vector<double>& x, bool with_volatility)
{
    SeasonalFit out;
    double cv = 0.0, dv = 0.0;
    if (with_volatility) {
        auto f = [&](const Eigen::VectorXd& p) {
            return profile_mean(t, x, volatility_path(t, p[0], p[1]), nullptr, nullptr);
        };
        double best = std::numeric_limits<double>::infinity();
        for (const auto& s : {std::array<double, 2>{0.0, 0.0}, {0.3, 0.0}, {0.0, 0.3}, {-0.3, 0.0}, {0.0, -0.3}}) {
            const auto r = numeric::minimize_nelder_mead(f, Eigen::Vector2d(s[0], s[1]), 0.1, 2000, 1e-12);
            if (r.value < best) {
                best = r.value;
                cv = r.x[0];
                dv = r.x[1];
            }
        }
        out.nu = std::hypot(cv, dv);
        out.varsigma = out.nu > 0.0 ? wrap_phase(std::atan2(-dv, cv)) : 0.0;
    }
    Eigen::Vector3d b;
    Eigen::Matrix3d cov;
    profile_mean(t, x, volatility_path(t, cv, dv), &b, &cov);
    out.mu = b[0];
    out.kappa = std::hypot(b[1], b[2]);
    out.eta = out.kappa > 0.0 ? wrap_phase(std::atan2(-b[2], b[1])) : 0.0;
    // Delta method for (kappa, eta).
    Eigen::Matrix3d J = Eigen::Matrix3d::Zero();
    J(0, 0) = 1.0;
    if (out.kappa > 0.0) {
        const double k2 = out.kappa * out.kappa;
        J(1, 1) = b[1] / out.kappa;
        J(1, 2) = b[2] / out.kappa;
        J(2, 1) = (b[2] / k2) / kOmega;
        J(2, 2) = (-b[1] / k2) / kOmega;
    }
    const Eigen::Matrix3d c = J * cov * J.transpose();
    for (int k = 0; k < 3; ++k) out.se[static_cast<std::size_t>(k)] = std::sqrt(std::max(c(k, k), 0.0));
    return out;
}

}  // namespace

void CovariateProcessParams::validate() const
{
    for (std::size_t j = 0; j < kChannels; ++j)
        if (!std::isfinite(mu[j]) || !std::isfinite(kappa[j]) || !std::isfinite(eta[j]))
            throw std::invalid_argument("non-finite seasonal parameter");
    for (double v : nu)
        if (!(v > -0.5)) throw std::invalid_argument("volatility amplitude must exceed -1/2");
    if (!Sigma_e.allFinite() || !Q1.allFinite() || !Q2.allFinite())
        throw std::invalid_argument("non-finite autoregressive parameter");
    if ((Sigma_e - Sigma_e.transpose()).cwiseAbs().maxCoeff() > 1e-10 * (1.0 + Sigma_e.cwiseAbs().maxCoeff()))
        throw std::invalid_argument("innovation covariance must be symmetric");
    if (Eigen::LLT<Eigen::Matrix3d>(Sigma_e).info() != Eigen::Success)
        throw std::invalid_argument("innovation covariance must be positive definite");
    if (!(spectral_radius() < 1.0)) throw std::invalid_argument("VAR(2) process is not stationary");
}

double CovariateProcessParams::spectral_radius() const
{
    Eigen::Matrix<double, 6, 6> C = Eigen::Matrix<double, 6, 6>::Zero();
    C.topLeftCorner<3, 3>() = Q1;
    C.topRightCorner<3, 3>() = Q2;
    C.bottomLeftCorner<3, 3>().setIdentity();
    return C.eigenvalues().cwiseAbs().maxCoeff();
}

double CovariateProcessParams::seasonal_mean(std::size_t channel, double day) const
{
    return mu.at(channel) + kappa[channel] * std::sin(kOmega * (day - eta[channel]));
}

double CovariateProcessParams::volatility(std::size_t channel, double day) const
{
    if (channel >= 2) return 1.0;
    return 1.0 + nu[channel] * (1.0 + std::sin(kOmega * (day - varsigma[channel])));
}

CovariateProcessFit fit_covariate_process(const DailySeries& series)
{
    const std::size_t N = series.values.size();
    if (N < 730) throw std::invalid_argument("covariate series shorter than 730 days");
    for (const auto& v : series.values)
        for (double x : v)
            if (!std::isfinite(x)) throw std::invalid_argument("non-finite covariate value");
    std::vector<double> t(N);
    for (std::size_t i = 0; i < N; ++i) t[i] = static_cast<double>(series.first_day) + static_cast<double>(i);

    CovariateProcessFit out;
    out.days = N;
    auto& P = out.params;
    Eigen::MatrixXd eps(3, static_cast<Eigen::Index>(N));
    for (std::size_t j = 0; j < kChannels; ++j) {
        std::vector<double> x(N);
        for (std::size_t i = 0; i < N; ++i) x[i] = series.values[i][j];
        const auto s = fit_seasonal(t, x, j < 2);
        P.mu[j] = s.mu;
        P.kappa[j] = s.kappa;
        P.eta[j] = s.eta;
        if (j < 2) {
            P.nu[j] = s.nu;
            P.varsigma[j] = s.varsigma;
        }
        out.seasonal_se[j] = s.se;
        for (std::size_t i = 0; i < N; ++i)
            eps(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) =
                (x[i] - P.seasonal_mean(j, t[i])) / P.volatility(j, t[i]);
    }

    // VAR(2) by multivariate least squares, no intercept.
    const Eigen::Index T = static_cast<Eigen::Index>(N) - 2;
    Eigen::MatrixXd Y = eps.rightCols(T);
    Eigen::MatrixXd Z(6, T);
    Z.topRows(3) = eps.middleCols(1, T);
    Z.bottomRows(3) = eps.leftCols(T);
    const Eigen::MatrixXd ZZt = Z * Z.transpose();
    const Eigen::MatrixXd ZZinv = numeric::spd_inverse(ZZt);
    const Eigen::MatrixXd B = Y * Z.transpose() * ZZinv;
    const Eigen::MatrixXd U = Y - B * Z;
    P.Q1 = B.leftCols(3);
    P.Q2 = B.rightCols(3);
    P.Sigma_e = U * U.transpose() / static_cast<double>(T - 6);
    P.Sigma_e = 0.5 * (P.Sigma_e + P.Sigma_e.transpose()).eval();
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 6; ++c) out.var_se(r, c) = std::sqrt(ZZinv(c, c) * P.Sigma_e(r, r));
    return out;
}

DailySeries simulate_covariate_process(const CovariateProcessParams& params, std::size_t days, Rng& rng,
                                       int start_day, std::size_t burn_in)
{
    params.validate();
    const Eigen::Matrix3d L = Eigen::LLT<Eigen::Matrix3d>(params.Sigma_e).matrixL();
    Eigen::Vector3d e1 = Eigen::Vector3d::Zero(), e2 = Eigen::Vector3d::Zero();
    DailySeries out;
    out.first_day = start_day + 1;
    out.values.resize(days);
    for (std::size_t k = 0; k < burn_in + days; ++k) {
        const double z0 = rng.normal(), z1 = rng.normal(), z2 = rng.normal();
        const Eigen::Vector3d e = params.Q1 * e1 + params.Q2 * e2 + L * Eigen::Vector3d(z0, z1, z2);
        e2 = e1;
        e1 = e;
        if (k < burn_in) continue;
        const std::size_t i = k - burn_in;
        const double day = static_cast<double>(out.first_day) + static_cast<double>(i);
        for (std::size_t j = 0; j < kChannels; ++j)
            out.values[i][j] = params.seasonal_mean(j, day) + params.volatility(j, day) * e[static_cast<Eigen::Index>(j)];
    }
    return out;
}

DailySeries calendar_series(std::span<const DegradationUnitRecord> data)
{
    std::map<long, std::array<double, kChannels>> days;
    for (const auto& u : data) {
        for (std::size_t k = 0; k < u.epochs.size(); ++k) {
            const double e = u.epochs[k];
            if (e != std::floor(e)) throw std::invalid_argument("unit " + u.unit_id + ": epochs must be whole days");
            const long day = u.start_day + static_cast<long>(e);
            const auto [it, inserted] = days.emplace(day, u.covariates[k]);
            if (!inserted)
                for (std::size_t j = 0; j < kChannels; ++j)
                    if (std::abs(it->second[j] - u.covariates[k][j]) > 1e-9 * (1.0 + std::abs(it->second[j])))
                        throw std::invalid_argument("units disagree on calendar day " + std::to_string(day));
        }
    }
    if (days.empty()) throw std::invalid_argument("no records");
    DailySeries out;
    out.first_day = static_cast<int>(days.begin()->first);
    long expect = days.begin()->first;
    for (const auto& [day, v] : days) {
        if (day != expect) throw std::invalid_argument("calendar covariate series has a gap at day " + std::to_string(expect));
        out.values.push_back(v);
        ++expect;
    }
    return out;
}

}  // namespace relikit::degradation
