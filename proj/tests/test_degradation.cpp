#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "relikit/degradation/degradation.hpp"
#include "relikit/io/synthetic.hpp"
#include "relikit/numeric.hpp"

using namespace relikit;
using namespace relikit::degradation;

namespace {

constexpr double kOmega = 2.0 * std::numbers::pi / 365.0;

// Plain Cox-de Boor recursion for a single B-spline.
double bspline_oracle(const std::vector<double>& t, std::size_t j, int d, double x)
{
    if (d == 0) {
        const bool last = t[j + 1] == t.back() && x == t.back() && t[j] < t[j + 1];
        return (t[j] <= x && x < t[j + 1]) || last ? 1.0 : 0.0;
    }
    double v = 0.0;
    const double a = t[j + d] - t[j], b = t[j + d + 1] - t[j + 1];
    if (a > 0.0) v += (x - t[j]) / a * bspline_oracle(t, j, d - 1, x);
    if (b > 0.0) v += (t[j + d + 1] - x) / b * bspline_oracle(t, j + 1, d - 1, x);
    return v;
}

// I-spline q as the integral of its normalized M-spline from the lower knot.
double ispline_oracle(const std::vector<double>& knots, int degree, std::size_t q, double x)
{
    std::vector<double> t(static_cast<std::size_t>(degree + 1), knots.front());
    t.insert(t.end(), knots.begin() + 1, knots.end() - 1);
    t.insert(t.end(), static_cast<std::size_t>(degree + 1), knots.back());
    const std::size_t j = q + 1;
    const double span = t[j + static_cast<std::size_t>(degree)] - t[j];
    const auto& gl = numeric::gauss_legendre(20);
    double total = 0.0;
    for (std::size_t k = 0; k + 1 < t.size(); ++k) {
        const double a = t[k], b = std::min(t[k + 1], x);
        if (!(b > a)) continue;
        for (int i = 0; i < 20; ++i) {
            const double s = 0.5 * (a + b) + 0.5 * (b - a) * gl.nodes[i];
            total += 0.5 * (b - a) * gl.weights[i] * degree * bspline_oracle(t, j, degree - 1, s) / span;
        }
    }
    return total;
}

DegradationUnitRecord unit_with(std::vector<std::array<double, kChannels>> x)
{
    DegradationUnitRecord u;
    u.unit_id = "u";
    for (std::size_t k = 0; k < x.size(); ++k) u.epochs.push_back(static_cast<double>(k + 1));
    u.covariates = std::move(x);
    return u;
}

struct Scenario {
    std::vector<DegradationUnitRecord> units;
    DegradationFit truth;
};

Scenario generated(std::uint64_t seed, std::size_t n = 36)
{
    io::DegradationScenario sc;
    sc.units = n;
    Scenario s;
    s.units = io::simulate_degradation(sc, Rng(seed), &s.truth).units;
    return s;
}

// Whitened 2-D quadrature of one unit's random-effect integral.
double quadrature_path_lik(const PathParams& p, const Eigen::VectorXd& resid, const std::vector<double>& t)
{
    const Eigen::Matrix2d L = Eigen::LLT<Eigen::Matrix2d>(p.random_effect_cov()).matrixL();
    const auto& gl = numeric::gauss_legendre(40);
    const int panels = 8;
    const double lo = -9.0, width = 18.0 / panels;
    auto phi = [](double v) { return std::exp(-0.5 * v * v) / std::sqrt(2.0 * std::numbers::pi); };
    double total = 0.0;
    for (int a = 0; a < panels; ++a)
        for (int i = 0; i < 40; ++i)
            for (int b = 0; b < panels; ++b)
                for (int j = 0; j < 40; ++j) {
                    const double v0 = lo + width * (a + 0.5 * (gl.nodes[i] + 1.0));
                    const double v1 = lo + width * (b + 0.5 * (gl.nodes[j] + 1.0));
                    const Eigen::Vector2d w = L * Eigen::Vector2d(v0, v1);
                    double lik = phi(v0) * phi(v1);
                    for (std::size_t k = 0; k < t.size(); ++k)
                        lik *= phi((resid[static_cast<Eigen::Index>(k)] - w[0] - w[1] * t[k]) / p.sigma_eps) / p.sigma_eps;
                    total += 0.25 * width * width * gl.weights[i] * gl.weights[j] * lik;
                }
    return total;
}

}  // namespace

TEST_CASE("I-spline boundaries, range and monotonicity")
{
    const std::vector<double> knots{0.0, 0.2, 0.5, 0.7, 1.0};
    for (int degree : {1, 2, 3}) {
        for (double v : ispline_basis(0.0, knots, degree)) CHECK(v == doctest::Approx(0.0).epsilon(1e-14));
        for (double v : ispline_basis(1.0, knots, degree)) CHECK(v == doctest::Approx(1.0).epsilon(1e-14));
        auto prev = ispline_basis(0.0, knots, degree);
        for (double x = 0.01; x <= 1.0; x += 0.01) {
            const auto cur = ispline_basis(x, knots, degree);
            for (std::size_t q = 0; q < cur.size(); ++q) {
                CHECK(cur[q] >= prev[q] - 1e-15);
                CHECK(cur[q] >= 0.0);
                CHECK(cur[q] <= 1.0);
            }
            prev = cur;
        }
    }
    CHECK_THROWS(ispline_basis(0.5, std::vector<double>{1.0, 0.0}, 3));
    CHECK_THROWS(ispline_basis(0.5, std::vector<double>{0.0}, 3));
}

TEST_CASE("I-splines are integrals of M-splines")
{
    const std::vector<double> knots{-2.0, 0.5, 1.0, 4.0, 6.0};
    for (int degree : {2, 3}) {
        for (double x : {-2.0, -1.3, 0.0, 0.7, 2.2, 5.5, 6.0}) {
            const auto b = ispline_basis(x, knots, degree);
            for (std::size_t q = 0; q < b.size(); ++q) CHECK(std::abs(b[q] - ispline_oracle(knots, degree, q, x)) < 1e-8);
        }
    }
}

TEST_CASE("C-spline entries are concave and increasing")
{
    const std::vector<double> knots{10.0, 30.0, 55.0, 80.0, 100.0};
    const double h = 0.5;
    for (double x = 10.0 + h; x < 100.0 - h; x += 1.0) {
        const auto a = cspline_basis(x - h, knots, 3), b = cspline_basis(x, knots, 3), c = cspline_basis(x + h, knots, 3);
        for (std::size_t q = 0; q < b.size(); ++q) {
            CHECK(a[q] - 2.0 * b[q] + c[q] <= 1e-12);
            CHECK(c[q] >= a[q] - 1e-12);
        }
    }
    for (double v : cspline_basis(10.0, knots, 3)) CHECK(v == 0.0);
    for (double v : cspline_basis(100.0, knots, 3)) CHECK(v == doctest::Approx(1.0));
}

TEST_CASE("cumulative damage hand sums")
{
    SplineEffectSpec spec;
    spec.channels.push_back({"uv", BasisKind::ISPLINE, {0.0, 1.0}, 1, 1.0});
    const auto unit = unit_with({{0.3, 0, 0}, {0.4, 0, 0}, {0.9, 0, 0}});
    PathParams p{0.25, {0.0}, {1.0}, 0.0, 0.0, 0.0, 1.0};
    CHECK(cumulative_damage(2.0, unit, p, spec) == doctest::Approx(0.25 + 0.3 + 0.4).epsilon(1e-15));
    CHECK(cumulative_damage(3.0, unit, p, spec) - cumulative_damage(1.0, unit, p, spec) ==
          doctest::Approx(0.4 + 0.9).epsilon(1e-14));
    CHECK(cumulative_damage(0.0, unit, p, spec) == 0.25);
    CHECK_THROWS(cumulative_damage(2.5, unit, p, spec));

    PathParams zero{0.25, {0.0}, {0.0}, 0.0, 0.0, 0.0, 1.0};
    for (double t : {1.0, 2.0, 3.0}) CHECK(cumulative_damage(t, unit, zero, spec) == 0.25);
}

TEST_CASE("design matrix reproduces the damage path")
{
    auto s = generated(3, 4);
    const auto& spec = s.truth.spec;
    for (const auto& u : s.units) {
        const Eigen::MatrixXd X = design_matrix(u, spec);
        const Eigen::VectorXd d = X * s.truth.params.coefficients();
        for (std::size_t j = 0; j < u.measurement_epochs.size(); ++j)
            CHECK(d[static_cast<Eigen::Index>(j)] ==
                  doctest::Approx(cumulative_damage(u.measurement_epochs[j], u, s.truth.params, spec)).epsilon(1e-12));
    }
}

TEST_CASE("noiseless data is interpolated exactly")
{
    auto s = generated(5);
    for (auto& u : s.units)
        for (std::size_t j = 0; j < u.measurements.size(); ++j)
            u.measurements[j] = cumulative_damage(u.measurement_epochs[j], u, s.truth.params, s.truth.spec);
    const auto fit = fit_degradation(s.units, s.truth.spec);
    double worst = 0.0;
    for (const auto& u : s.units)
        for (std::size_t j = 0; j < u.measurements.size(); ++j)
            worst = std::max(worst, std::abs(cumulative_damage(u.measurement_epochs[j], u, fit.params, fit.spec) -
                                             u.measurements[j]));
    CHECK(worst <= 1e-8);

    const auto boot = bootstrap_degradation(s.units, fit, 10, 0.95, Rng(1));
    CHECK(boot.few_resamples);
    for (const auto& ci : boot.intervals) {
        if (ci.name.rfind("sigma", 0) == 0 || ci.name == "rho") continue;
        CHECK(ci.upper - ci.lower <= 1e-6 * (1.0 + std::abs(ci.estimate)));
    }
}

TEST_CASE("fit recovers the generating path and honours the constraints")
{
    const auto s = generated(11);
    const auto fit = fit_degradation(s.units, s.truth.spec);
    for (double b : fit.params.beta_constrained) CHECK(b >= 0.0);
    CHECK(fit.report.converged);
    const auto& tr = fit.report.objective_trace;
    for (std::size_t k = 1; k < tr.size(); ++k) CHECK(tr[k] <= tr[k - 1] + 1e-9 * std::max(1.0, std::abs(tr[k - 1])));

    double sq = 0.0, lo = 1e300, hi = -1e300;
    std::size_t n = 0;
    for (const auto& u : s.units)
        for (double t : u.measurement_epochs) {
            const double d0 = cumulative_damage(t, u, s.truth.params, s.truth.spec);
            const double d1 = cumulative_damage(t, u, fit.params, fit.spec);
            sq += (d1 - d0) * (d1 - d0);
            lo = std::min(lo, d0);
            hi = std::max(hi, d0);
            ++n;
        }
    CHECK(std::sqrt(sq / static_cast<double>(n)) < 0.05 * (hi - lo));

    // Damage moves one way on every unit: rate and effects all point down.
    for (const auto& u : s.units) {
        double prev = fit.params.beta0;
        for (double t : u.epochs) {
            const double d = cumulative_damage(t, u, fit.params, fit.spec);
            CHECK(d <= prev + 1e-12);
            prev = d;
        }
    }
}

TEST_CASE("marginal path likelihood matches quadrature")
{
    auto s = generated(7, 2);
    for (auto& u : s.units) {
        u.measurement_epochs.resize(6);
        u.measurements.resize(6);
    }
    PathParams p = s.truth.params;
    p.sigma0 = 0.01;
    p.sigma1 = 0.0009;
    p.rho = -0.2;
    p.sigma_eps = 0.005;
    double ref = 0.0;
    for (const auto& u : s.units) {
        const Eigen::VectorXd d = design_matrix(u, s.truth.spec) * p.coefficients();
        const Eigen::Map<const Eigen::VectorXd> y(u.measurements.data(), static_cast<Eigen::Index>(u.measurements.size()));
        ref += std::log(quadrature_path_lik(p, y - d, u.measurement_epochs));
    }
    CHECK(std::abs(path_loglik(p, s.units, s.truth.spec) - ref) < 1e-6);
}

TEST_CASE("failure time of a tabulated path")
{
    FailureSpec spec;
    std::vector<double> line(301);
    for (std::size_t k = 0; k < line.size(); ++k) line[k] = -0.004 * static_cast<double>(k);
    CHECK(*failure_time_of_path(line, spec) == doctest::Approx(100.0).epsilon(1e-12));

    std::vector<double> pair(80, -0.1);
    pair[70] = -0.39;
    pair[71] = -0.41;
    CHECK(*failure_time_of_path(pair, spec) == doctest::Approx(70.5).epsilon(1e-12));

    std::vector<double> flat(500, -0.1);
    CHECK_FALSE(failure_time_of_path(flat, spec).has_value());
    spec.horizon = 50.0;
    CHECK_FALSE(failure_time_of_path(line, spec).has_value());
}

TEST_CASE("interval overlap")
{
    CHECK(interval_overlap(0, 10, 5, 15) == doctest::Approx(5.0 / 15.0));
    CHECK(interval_overlap(0, 10, 0, 10) == 1.0);
    CHECK(interval_overlap(0, 1, 2, 3) == 0.0);
}

TEST_CASE("covariate process without noise follows the seasonal mean")
{
    auto p = io::DegradationScenario::default_weather();
    p.Sigma_e = 1e-24 * Eigen::Matrix3d::Identity();
    Rng rng(1);
    const auto s = simulate_covariate_process(p, 400, rng, 30);
    for (std::size_t i = 0; i < s.values.size(); ++i) {
        const double day = s.first_day + static_cast<double>(i);
        for (std::size_t j = 0; j < kChannels; ++j) CHECK(s.values[i][j] == doctest::Approx(p.seasonal_mean(j, day)).epsilon(1e-9));
    }
    auto bad = io::DegradationScenario::default_weather();
    bad.Q1 = 1.2 * Eigen::Matrix3d::Identity();
    CHECK_THROWS(simulate_covariate_process(bad, 10, rng));
}

TEST_CASE("VAR(2) estimation round trip")
{
    const auto truth = io::DegradationScenario::default_weather();
    Rng rng(42);
    const auto s = simulate_covariate_process(truth, 3650, rng);
    const auto fit = fit_covariate_process(s);
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) {
            CHECK(std::abs(fit.params.Q1(r, c) - truth.Q1(r, c)) < 3.0 * fit.var_se(r, c));
            CHECK(std::abs(fit.params.Q2(r, c) - truth.Q2(r, c)) < 3.0 * fit.var_se(r, c + 3));
        }

    DailySeries short_series{1, std::vector<std::array<double, kChannels>>(700, {1.0, 2.0, 3.0})};
    CHECK_THROWS_WITH(fit_covariate_process(short_series), doctest::Contains("730"));
}

TEST_CASE("seasonal terms recovered from a sinusoid in white noise")
{
    auto truth = io::DegradationScenario::default_weather();
    truth.Q1.setZero();
    truth.Q2.setZero();
    truth.nu = {0.0, 0.0};
    Rng rng(19);
    const auto fit = fit_covariate_process(simulate_covariate_process(truth, 1460, rng));
    for (std::size_t j = 0; j < kChannels; ++j) {
        CHECK(std::abs(fit.params.mu[j] - truth.mu[j]) < 3.0 * fit.seasonal_se[j][0]);
        CHECK(std::abs(fit.params.kappa[j] - truth.kappa[j]) < 3.0 * fit.seasonal_se[j][1]);
        // phase is defined modulo the period
        double d = std::fmod(std::abs(fit.params.eta[j] - truth.eta[j]), 365.0);
        d = std::min(d, 365.0 - d);
        CHECK(d < 3.0 * fit.seasonal_se[j][2]);
    }
}

TEST_CASE("VAR null case")
{
    auto truth = io::DegradationScenario::default_weather();
    truth.Q1.setZero();
    truth.Q2.setZero();
    Rng rng(9);
    const auto fit = fit_covariate_process(simulate_covariate_process(truth, 2000, rng));
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) {
            CHECK(std::abs(fit.params.Q1(r, c)) < 3.0 * fit.var_se(r, c));
            CHECK(std::abs(fit.params.Q2(r, c)) < 3.0 * fit.var_se(r, c + 3));
        }
}

TEST_CASE("standardized errors match Yule-Walker autocovariances")
{
    const auto p = io::DegradationScenario::default_weather();
    // Stationary companion covariance by fixed-point iteration.
    Eigen::Matrix<double, 6, 6> A = Eigen::Matrix<double, 6, 6>::Zero(), S = Eigen::Matrix<double, 6, 6>::Zero();
    A.topLeftCorner<3, 3>() = p.Q1;
    A.topRightCorner<3, 3>() = p.Q2;
    A.bottomLeftCorner<3, 3>().setIdentity();
    S.topLeftCorner<3, 3>() = p.Sigma_e;
    Eigen::Matrix<double, 6, 6> G = S;
    for (int it = 0; it < 2000; ++it) G = A * G * A.transpose() + S;
    const Eigen::Matrix3d g0 = G.topLeftCorner<3, 3>(), g1 = G.topRightCorner<3, 3>().transpose();
    const Eigen::Matrix3d g1y = p.Q1 * g0 + p.Q2 * g1.transpose();
    const Eigen::Matrix3d g2 = p.Q1 * g1y + p.Q2 * g0;

    Rng rng(77);
    const std::size_t n = 100000;
    const auto s = simulate_covariate_process(p, n, rng);
    std::vector<Eigen::Vector3d> e(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double day = s.first_day + static_cast<double>(i);
        for (std::size_t j = 0; j < kChannels; ++j)
            e[i][static_cast<Eigen::Index>(j)] = (s.values[i][j] - p.seasonal_mean(j, day)) / p.volatility(j, day);
    }
    auto autocov = [&](std::size_t lag) {
        Eigen::Matrix3d c = Eigen::Matrix3d::Zero();
        for (std::size_t i = lag; i < n; ++i) c += e[i] * e[i - lag].transpose();
        return Eigen::Matrix3d(c / static_cast<double>(n - lag));
    };
    const Eigen::Matrix3d c1 = autocov(1), c2 = autocov(2);
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) {
            const double scale = std::sqrt(g0(r, r) * g0(c, c));
            CHECK(std::abs(c1(r, c) - g1y(r, c)) < 0.05 * scale);
            CHECK(std::abs(c2(r, c) - g2(r, c)) < 0.05 * scale);
        }
}

TEST_CASE("simulated weather has annual periodicity")
{
    const auto p = io::DegradationScenario::default_weather();
    Rng rng(5);
    const auto s = simulate_covariate_process(p, 365 * 20, rng);
    // Mean temperature per 30-day bin of the year against the sinusoid.
    std::vector<double> sum(12, 0.0), cnt(12, 0.0);
    for (std::size_t i = 0; i < s.values.size(); ++i) {
        const double day = s.first_day + static_cast<double>(i);
        const auto bin = std::min<std::size_t>(11, static_cast<std::size_t>(std::fmod(day, 365.0) / (365.0 / 12.0)));
        sum[bin] += s.values[i][1];
        cnt[bin] += 1.0;
    }
    double ss_res = 0.0, ss_tot = 0.0, grand = 0.0;
    for (std::size_t b = 0; b < 12; ++b) grand += sum[b] / cnt[b] / 12.0;
    for (std::size_t b = 0; b < 12; ++b) {
        const double mid = (static_cast<double>(b) + 0.5) * 365.0 / 12.0;
        double ref = 0.0;
        for (int k = -15; k <= 15; ++k) ref += p.seasonal_mean(1, mid + k) / 31.0;
        const double m = sum[b] / cnt[b];
        ss_res += (m - ref) * (m - ref);
        ss_tot += (m - grand) * (m - grand);
    }
    CHECK(1.0 - ss_res / ss_tot > 0.95);
    CHECK(kOmega > 0.0);
}

TEST_CASE("failure cdf Monte Carlo properties")
{
    const auto s = generated(13);
    const auto fit = fit_degradation(s.units, s.truth.spec);
    const auto weather = fit_covariate_process(calendar_series(s.units));
    std::vector<double> grid;
    for (double t = 0.0; t <= 400.0; t += 10.0) grid.push_back(t);
    const auto boot = bootstrap_degradation(s.units, fit, 5, 0.95, Rng(2));
    const auto cdf = failure_cdf_mc(fit, weather.params, boot.replicates, FailureSpec{}, grid, Rng(3), {.draws = 40});
    CHECK(cdf.few_draws);
    CHECK(cdf.cdf.front() == 0.0);
    for (std::size_t k = 0; k < grid.size(); ++k) {
        CHECK(cdf.cdf[k] <= 1.0);
        CHECK(cdf.lower[k] <= cdf.upper[k]);
        if (k) CHECK(cdf.cdf[k] >= cdf.cdf[k - 1]);
    }
}
