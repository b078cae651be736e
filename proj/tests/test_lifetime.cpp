#include <doctest.h>

#include <cmath>
#include <numbers>

#include "relikit/io/synthetic.hpp"
#include "relikit/lifetime/lifetime.hpp"
#include "relikit/numeric.hpp"

using namespace relikit;
using namespace relikit::lifetime;
using dist::StdKind;

namespace {

UseRateSeries series(std::vector<double> t, std::vector<double> x)
{
    UseRateSeries s;
    s.times = std::move(t);
    s.values = std::move(x);
    return s;
}

double sev_cdf(double z) { return 1.0 - std::exp(-std::exp(z)); }
double sev_logpdf(double z) { return z - std::exp(z); }

// Marginal covariate likelihood of one unit by brute-force 2-D quadrature over
// whitened random effects.
double quadrature_unit_lik(const CovariateLmeParams& p, const UseRateSeries& s)
{
    Eigen::Matrix2d L = Eigen::LLT<Eigen::Matrix2d>(p.random_effect_cov()).matrixL();
    const auto& gl = numeric::gauss_legendre(40);
    const int panels = 8;
    const double lo = -9.0, width = 18.0 / panels;
    double total = 0.0;
    auto phi = [](double v) { return std::exp(-0.5 * v * v) / std::sqrt(2.0 * std::numbers::pi); };
    for (int a = 0; a < panels; ++a)
        for (int i = 0; i < 40; ++i) {
            const double v0 = lo + width * (a + 0.5 * (gl.nodes[i] + 1.0));
            const double w0 = 0.5 * width * gl.weights[i];
            for (int b = 0; b < panels; ++b)
                for (int j = 0; j < 40; ++j) {
                    const double v1 = lo + width * (b + 0.5 * (gl.nodes[j] + 1.0));
                    const double w1 = 0.5 * width * gl.weights[j];
                    const Eigen::Vector2d w = L * Eigen::Vector2d(v0, v1);
                    double lik = phi(v0) * phi(v1);
                    for (std::size_t k = 0; k < s.times.size(); ++k) {
                        const double r = s.values[k] - p.eta - w[0] - w[1] * std::log(s.times[k]);
                        lik *= phi(r / p.sigma_eps) / p.sigma_eps;
                    }
                    total += w0 * w1 * lik;
                }
        }
    return total;
}

double binomial_cdf_oracle(std::size_t n, double p, std::size_t k)
{
    double c = 0.0;
    for (std::size_t j = 0; j <= k; ++j) {
        const double lc = std::lgamma(n + 1.0) - std::lgamma(j + 1.0) - std::lgamma(n - j + 1.0);
        c += std::exp(lc + j * std::log(p) + (n - j) * std::log1p(-p));
    }
    return c;
}

LifetimeFit degenerate_fit(double mu0, double sigma0, double beta)
{
    LifetimeFit f;
    f.params = {mu0, sigma0, beta};
    return f;
}

CovariateFit constant_covariate(double c)
{
    CovariateFit f;
    f.params = {c, 0.0, 0.0, 0.0, 0.0};
    return f;
}

}  // namespace

TEST_CASE("exposure hand values")
{
    const auto s = series({1, 2, 3, 4, 5, 6, 7}, {0.3, -1, 2, 0.1, 0.4, 0.2, 0.9});
    CHECK(exposure(7.0, 0.0, s) == doctest::Approx(7.0).epsilon(1e-15));
    const auto c = series({1, 2, 3, 4, 5}, {0.7, 0.7, 0.7, 0.7, 0.7});
    CHECK(exposure(5.0, 1.0, c) == doctest::Approx(5.0 * std::exp(0.7)).epsilon(1e-15));
    const auto w = series({1, 2}, {0.2, 0.5});
    const double hand = std::exp(0.2) + std::exp(0.5);
    CHECK(exposure(2.0, 1.0, w) == hand);
    CHECK(hand == doctest::Approx(2.870124).epsilon(1e-6));
    CHECK(exposure(0.0, 1.0, w) == 0.0);
    CHECK(exposure(3.0, 1.0, w) == doctest::Approx(hand + std::exp(0.5)).epsilon(1e-15));
    CHECK_THROWS(exposure(1.0, 1.0, UseRateSeries{}));
}

TEST_CASE("exposure is additive over partitions")
{
    Rng rng(11);
    for (int rep = 0; rep < 20; ++rep) {
        std::vector<double> t, x;
        double acc = 0.0;
        for (int k = 0; k < 15; ++k) {
            acc += rng.uniform(0.2, 2.0);
            t.push_back(acc);
            x.push_back(rng.normal());
        }
        const auto s = series(t, x);
        const double beta = rng.uniform(-1.0, 1.5);
        const double t1 = rng.uniform(0.0, acc), t2 = t1 + rng.uniform(0.0, 5.0);
        // hand step sum over (t1, t2]
        double piece = 0.0, prev = t1;
        for (std::size_t k = 0; k < t.size() && prev < t2; ++k) {
            if (t[k] <= prev) continue;
            const double end = std::min(t[k], t2);
            piece += std::exp(beta * x[k]) * (end - prev);
            prev = end;
        }
        if (prev < t2) piece += std::exp(beta * x.back()) * (t2 - prev);
        CHECK(exposure(t2, beta, s) == doctest::Approx(exposure(t1, beta, s) + piece).epsilon(1e-12));
        CHECK(exposure(t2, beta, s) >= exposure(t1, beta, s));
    }
}

TEST_CASE("lifetime cdf reductions")
{
    const LifetimeParams p{2.0, 0.6, 0.0};
    const auto s = series({1, 2, 3}, {0.5, -0.2, 1.0});
    for (double t : {0.5, 2.5, 7.0, 30.0})
        CHECK(lifetime_cdf(t, p, s, StdKind::SEV) ==
              doctest::Approx(sev_cdf((std::log(t) - 2.0) / 0.6)).epsilon(1e-13));
    CHECK(lifetime_cdf(0.0, {2.0, 0.6, 1.0}, s, StdKind::SEV) == 0.0);

    // A constant effect c acts as a time scale factor exp(beta c).
    const double cshift = std::log(2.0);
    const auto doubled = series({1, 2, 3, 4}, {cshift, cshift, cshift, cshift});
    const auto base = series({1, 2, 3, 4}, {0, 0, 0, 0});
    for (double t : {0.3, 1.0, 2.2, 4.0})
        CHECK(lifetime_cdf(t, {2.0, 0.6, 1.0}, doubled, StdKind::NORMAL) ==
              doctest::Approx(lifetime_cdf(2.0 * t, {2.0, 0.6, 1.0}, base, StdKind::NORMAL)).epsilon(1e-13));
    double last = 0.0;
    for (double t = 0.1; t < 40.0; t += 0.7) {
        const double f = lifetime_cdf(t, {2.0, 0.6, 0.8}, s, StdKind::SEV);
        CHECK(f >= last);
        last = f;
    }
}

TEST_CASE("two-unit log-likelihood by hand")
{
    LifetimeUnitRecord a{"a", 2.0, true, series({1, 2}, {0.2, 0.5})};
    LifetimeUnitRecord b{"b", 3.0, false, series({1, 2, 3}, {-0.1, 0.0, 0.3})};
    const std::vector<LifetimeUnitRecord> data{a, b};
    const LifetimeParams p{1.5, 0.7, 0.8};
    const double ua = std::exp(0.8 * 0.2) + std::exp(0.8 * 0.5);
    const double ub = std::exp(-0.08) + 1.0 + std::exp(0.24);
    const double za = (std::log(ua) - 1.5) / 0.7, zb = (std::log(ub) - 1.5) / 0.7;
    // density of T: f0(log u) * u'(t) / u(t) / sigma, u'(t) = exp(beta x(t))
    const double la = sev_logpdf(za) + 0.8 * 0.5 - std::log(0.7) - std::log(ua);
    const double lb = -std::exp(zb);
    CHECK(std::abs(lifetime_loglik(p, data, StdKind::SEV) - (la + lb)) < 1e-10);
}

TEST_CASE("beta held at zero matches a plain Weibull fit")
{
    const auto ds = io::simulate_lifetime({.units = 400, .truth = {3.2, 0.5, 0.0}}, Rng(5));
    FitOptions opts;
    opts.fixed_beta = 0.0;
    const auto fit = fit_lifetime(ds.units, StdKind::SEV, opts);
    const numeric::Objective nll = [&](const Eigen::VectorXd& v) {
        const double sigma = std::exp(v[1]);
        double ll = 0.0;
        for (const auto& u : ds.units) {
            const double z = (std::log(u.event_time) - v[0]) / sigma;
            ll += u.failed ? sev_logpdf(z) - std::log(sigma) - std::log(u.event_time) : -std::exp(z);
        }
        return -ll;
    };
    const auto ref = numeric::minimize_nelder_mead(nll, Eigen::Vector2d(3.0, std::log(0.6)));
    CHECK(fit.params.beta == 0.0);
    CHECK(fit.params.mu0 == doctest::Approx(ref.x[0]).epsilon(1e-4));
    CHECK(fit.params.sigma0 == doctest::Approx(std::exp(ref.x[1])).epsilon(1e-4));
}

TEST_CASE("lifetime fit recovers truth and is a local maximum")
{
    const io::LifetimeScenario sc;
    const auto ds = io::simulate_lifetime(sc, Rng(2024));
    const auto fit = fit_lifetime(ds.units, sc.kind);
    const Eigen::Vector3d truth = sc.truth.as_vector(), est = fit.params.as_vector();
    for (int k = 0; k < 3; ++k) CHECK(std::abs(est[k] - truth[k]) < 3.0 * std::sqrt(fit.covariance(k, k)));
    CHECK(fit.loglik == doctest::Approx(lifetime_loglik(fit.params, ds.units, sc.kind)).epsilon(1e-12));

    Rng rng(3);
    for (int d = 0; d < 20; ++d) {
        Eigen::Vector3d dir(rng.normal(), rng.normal(), rng.normal());
        dir.normalize();
        const auto moved = LifetimeParams::from_vector(est + 1e-3 * dir);
        CHECK(lifetime_loglik(moved, ds.units, sc.kind) < fit.loglik);
    }
}

TEST_CASE("all-censored data is rejected")
{
    std::vector<LifetimeUnitRecord> data{{"a", 2.0, false, series({1, 2}, {0, 0})}};
    CHECK_THROWS_WITH(fit_lifetime(data, StdKind::SEV), doctest::Contains("no failures"));
}

TEST_CASE("baseline rescaling leaves fitted cdf unchanged")
{
    const auto ds = io::simulate_lifetime({.units = 900}, Rng(17));
    auto shifted = ds.units;
    for (auto& u : shifted)
        for (double& v : u.covariates.values) v -= std::log(3.0);
    const auto f1 = fit_lifetime(ds.units, StdKind::SEV);
    const auto f2 = fit_lifetime(shifted, StdKind::SEV);
    CHECK(f2.params.beta == doctest::Approx(f1.params.beta).epsilon(1e-3));
    for (std::size_t i = 0; i < 5; ++i) {
        const double t = 100.0;
        const double a = lifetime_cdf(t, f1.params, ds.units[i].covariates, StdKind::SEV);
        const double b = lifetime_cdf(t, f2.params, shifted[i].covariates, StdKind::SEV);
        CHECK(std::abs(a - b) < 1e-4);
    }
}

TEST_CASE("covariate marginal likelihood matches quadrature")
{
    const CovariateLmeParams p{0.1, 0.5, 0.2, 0.3, 0.3};
    const std::vector<UseRateSeries> data{series({1, 2, 5}, {0.4, 0.2, 0.9}), series({0.5, 3}, {-0.3, -0.1}),
                                          series({1, 4, 9, 16}, {0.0, 0.3, 0.2, 0.6})};
    double ref = 0.0;
    for (const auto& s : data) ref += std::log(quadrature_unit_lik(p, s));
    CHECK(std::abs(covariate_loglik(p, data) - ref) < 1e-6);
}

TEST_CASE("covariate model without random effects is iid normal")
{
    const std::vector<UseRateSeries> data{series({1, 2, 5}, {0.4, 0.2, 0.9}), series({0.5, 3}, {-0.3, -0.1})};
    const CovariateLmeParams p{0.2, 1e-9, 1e-9, 0.0, 0.4};
    double ref = 0.0;
    for (const auto& s : data)
        for (double x : s.values) ref += -0.5 * std::log(2.0 * std::numbers::pi * 0.16) - 0.5 * (x - 0.2) * (x - 0.2) / 0.16;
    CHECK(covariate_loglik(p, data) == doctest::Approx(ref).epsilon(1e-9));

    // No between-unit structure: eta-hat is the grand mean.
    Rng rng(8);
    std::vector<UseRateSeries> flat;
    double sum = 0.0, n = 0.0;
    for (int i = 0; i < 60; ++i) {
        UseRateSeries s;
        for (int k = 1; k <= 8; ++k) {
            s.times.push_back(k);
            s.values.push_back(1.5 + 0.2 * rng.normal());
            sum += s.values.back();
            n += 1.0;
        }
        flat.push_back(s);
    }
    const auto fit = fit_covariate(flat);
    CHECK(fit.params.eta == doctest::Approx(sum / n).epsilon(2e-3));
}

TEST_CASE("covariate fit recovers truth")
{
    const CovariateLmeParams truth{0.1, 0.3, 0.15, 0.3, 0.1};
    const Eigen::Matrix2d L = Eigen::LLT<Eigen::Matrix2d>(truth.random_effect_cov()).matrixL();
    Rng rng(99);
    std::vector<UseRateSeries> data;
    for (int i = 0; i < 200; ++i) {
        const Eigen::Vector2d w = L * Eigen::Vector2d(rng.normal(), rng.normal());
        UseRateSeries s;
        for (int k = 1; k <= 20; ++k) {
            s.times.push_back(k);
            s.values.push_back(truth.eta + w[0] + w[1] * std::log(k) + truth.sigma_eps * rng.normal());
        }
        data.push_back(s);
    }
    const auto fit = fit_covariate(data);
    const auto est = fit.params.as_vector(), tv = truth.as_vector();
    for (int k = 0; k < 5; ++k) CHECK(std::abs(est[k] - tv[k]) < 3.0 * std::sqrt(fit.covariance(k, k)));
    CHECK_THROWS(fit_covariate(std::vector<UseRateSeries>{series({2}, {0.1}), series({2}, {0.3})}));
}

TEST_CASE("conditional covariate law")
{
    const CovariateLmeParams p{0.2, 0.4, 0.25, -0.4, 0.15};
    const auto obs = series({2.0, 6.0}, {0.5, 0.9});
    const ConditionalCovariate cc(p, obs);

    // Joint Gaussian conditioning of x(t*) on the two observations.
    Eigen::Matrix2d Z;
    Z << 1, std::log(2.0), 1, std::log(6.0);
    const Eigen::Matrix2d S = p.random_effect_cov();
    const Eigen::Matrix2d V = Z * S * Z.transpose() + p.sigma_eps * p.sigma_eps * Eigen::Matrix2d::Identity();
    const double ts = 10.0;
    const Eigen::RowVector2d zs(1.0, std::log(ts));
    const Eigen::RowVector2d cross = zs * S * Z.transpose();
    const Eigen::Vector2d r(0.5 - 0.2, 0.9 - 0.2);
    const double mean = 0.2 + cross * V.inverse() * r;
    const double var = (zs * S * zs.transpose())(0, 0) + p.sigma_eps * p.sigma_eps - (cross * V.inverse() * cross.transpose())(0, 0);
    CHECK(cc.mean_at(ts) == doctest::Approx(mean).epsilon(1e-12));

    Rng rng(21);
    const double epochs[] = {ts};
    const int n = 10000;
    double s1 = 0.0;
    for (int i = 0; i < n; ++i) s1 += simulate_covariate_conditional(p, obs, epochs, rng)[0];
    CHECK(std::abs(s1 / n - mean) < 3.0 * std::sqrt(var / n));

    const double before[] = {5.0};
    CHECK_THROWS(simulate_covariate_conditional(p, obs, before, rng));

    const CovariateLmeParams flat{0.7, 0.0, 0.0, 0.0, 0.0};
    const double future[] = {7.0, 9.0, 30.0};
    for (double v : simulate_covariate_conditional(flat, obs, future, rng)) CHECK(v == 0.7);
}

TEST_CASE("remaining-life probability limits and closed form")
{
    const LifetimeUnitRecord unit{"u", 12.0, false, series({4, 8, 12}, {0.1, 0.3, -0.2})};
    const LifetimeParams tt{3.5, 0.5, 0.9};
    const CovariateLmeParams flat{0.25, 0.0, 0.0, 0.0, 0.0};
    const Rng stream(4);
    CHECK(drl_estimate(unit, 1e-12, tt, flat, StdKind::SEV, stream) < 1e-10);

    const double ut = exposure(12.0, 0.9, unit.covariates);
    const double st = sev_cdf((std::log(ut) - 3.5) / 0.5);
    for (double s : {1.0, 5.0, 13.0, 40.0}) {
        const double uf = ut + s * std::exp(0.9 * 0.25);
        const double ref = (sev_cdf((std::log(uf) - 3.5) / 0.5) - st) / (1.0 - st);
        CHECK(std::abs(drl_estimate(unit, s, tt, flat, StdKind::SEV, stream) - ref) < 1e-10);
    }

    const CovariateLmeParams noisy{0.0, 0.3, 0.1, 0.2, 0.1};
    CHECK(drl_estimate(unit, 5000.0, tt, noisy, StdKind::SEV, stream) > 0.999);
    const double hs[] = {1.0, 4.0, 9.0, 20.0, 60.0};
    const auto curve = drl_curve(unit, hs, tt, noisy, StdKind::SEV, stream);
    for (std::size_t k = 0; k < curve.size(); ++k) {
        CHECK(curve[k] >= 0.0);
        CHECK(curve[k] <= 1.0);
        if (k) CHECK(curve[k] >= curve[k - 1]);
    }
    LifetimeUnitRecord failed = unit;
    failed.failed = true;
    CHECK_THROWS(drl_estimate(failed, 1.0, tt, noisy, StdKind::SEV, stream));
}

TEST_CASE("Monte Carlo error of the remaining-life estimate shrinks with draws")
{
    const LifetimeUnitRecord unit{"u", 12.0, false, series({4, 8, 12}, {0.1, 0.3, -0.2})};
    const LifetimeParams tt{3.5, 0.5, 0.9};
    const CovariateLmeParams noisy{0.0, 0.6, 0.3, 0.2, 0.1};
    auto spread = [&](std::size_t m) {
        std::vector<double> est;
        for (std::uint64_t seed = 0; seed < 40; ++seed)
            est.push_back(drl_estimate(unit, 15.0, tt, noisy, StdKind::SEV, Rng(seed), {.draws = m}));
        return std::sqrt(numeric::variance(est));
    };
    const double s_small = spread(25), s_large = spread(400);
    // four-fold reduction expected; allow sampling slack
    CHECK(s_small / s_large > 2.5);
    CHECK(s_small / s_large < 6.5);
}

TEST_CASE("bootstrap interval rounding and degenerate collapse")
{
    CHECK(numeric::rounded_rank(0.05 * 40, 40) == 2);
    CHECK(numeric::rounded_rank(0.95 * 40, 40) == 38);

    const LifetimeUnitRecord unit{"u", 12.0, false, series({4, 8, 12}, {0.1, 0.3, -0.2})};
    LifetimeFit ft = degenerate_fit(3.5, 0.5, 0.9);
    CovariateFit fx;
    fx.params = {0.0, 0.3, 0.1, 0.2, 0.1};
    const Rng stream(6);
    const double rho = drl_estimate(unit, 10.0, ft.params, fx.params, StdKind::SEV, stream);
    const auto ci = drl_ci(unit, 10.0, ft, fx, 40, 0.05, stream);
    CHECK(ci.lower == doctest::Approx(rho).epsilon(1e-12));
    CHECK(ci.upper == doctest::Approx(rho).epsilon(1e-12));
    CHECK_THROWS(drl_ci(unit, 10.0, ft, fx, 10, 0.05, stream));
}

TEST_CASE("bootstrap interval brackets the point estimate")
{
    const auto ds = io::simulate_lifetime({.units = 600}, Rng(31));
    const auto ft = fit_lifetime(ds.units, StdKind::SEV);
    std::vector<UseRateSeries> cov;
    for (const auto& u : ds.units) cov.push_back(u.covariates);
    const auto fx = fit_covariate(cov);
    const LifetimeUnitRecord* unit = nullptr;
    for (const auto& u : ds.units)
        if (!u.failed && u.event_time > 40.0) {
            unit = &u;
            break;
        }
    REQUIRE(unit);
    int inside = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const Rng stream(seed);
        const DrlOptions o{.draws = 50};
        const double rho = drl_estimate(*unit, 20.0, ft.params, fx.params, StdKind::SEV, stream, o);
        const auto ci = drl_ci(*unit, 20.0, ft, fx, 40, 0.05, stream, o);
        CHECK(ci.lower <= ci.upper);
        inside += ci.lower <= rho && rho <= ci.upper;
    }
    CHECK(inside >= 8);
}

TEST_CASE("prediction interval of a deterministic lifetime")
{
    const LifetimeUnitRecord unit{"u", 10.0, false, series({5, 10}, {0.2, 0.4})};
    const auto ft = degenerate_fit(std::log(40.0), 1e-6, 1.0);
    const auto fx = constant_covariate(0.1);
    const double ut = exposure(10.0, 1.0, unit.covariates);
    const double remaining = (40.0 - ut) / std::exp(0.1);
    const auto pi = remaining_life_pi(unit, ft, fx, 0.1, Rng(2), {.drl = {.draws = 20}, .calibration_draws = 40, .search_bound = {}});
    CHECK(pi.lower == doctest::Approx(remaining).epsilon(1e-3));
    CHECK(pi.upper == doctest::Approx(remaining).epsilon(1e-3));
}

TEST_CASE("prediction interval bounds are ordered")
{
    const LifetimeUnitRecord unit{"u", 20.0, false, series({5, 10, 15, 20}, {0.2, 0.4, 0.1, 0.3})};
    LifetimeFit ft = degenerate_fit(4.0, 0.5, 1.0);
    ft.covariance = Eigen::Vector3d(0.01, 0.001, 0.01).asDiagonal();
    CovariateFit fx;
    fx.params = {0.0, 0.3, 0.1, 0.2, 0.1};
    fx.covariance.diagonal().setConstant(1e-4);
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
        const auto pi = remaining_life_pi(unit, ft, fx, 0.1, Rng(seed), {.drl = {.draws = 40}, .calibration_draws = 40, .search_bound = {}});
        CHECK(pi.lower <= pi.upper);
        CHECK(pi.lower >= 0.0);
    }
}

TEST_CASE("Poisson-binomial examples")
{
    const double half[] = {0.5, 0.5};
    CHECK(fleet_count_cdf(half, 0) == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(fleet_count_cdf(half, 1) == doctest::Approx(0.75).epsilon(1e-15));
    CHECK(fleet_count_cdf(half, 2) == doctest::Approx(1.0).epsilon(1e-15));
    const double three[] = {0.1, 0.2, 0.3};
    CHECK(poisson_binomial_pmf(three)[0] == doctest::Approx(0.504).epsilon(1e-15));
    std::vector<double> same(30, 0.37);
    for (std::size_t k = 0; k <= 30; ++k)
        CHECK(std::abs(fleet_count_cdf(same, k) - binomial_cdf_oracle(30, 0.37, k)) < 1e-12);
}

TEST_CASE("Poisson-binomial pmf matches subset enumeration")
{
    Rng rng(13);
    for (std::size_t n = 1; n <= 12; ++n) {
        std::vector<double> p(n);
        for (double& v : p) v = rng.uniform();
        std::vector<double> ref(n + 1, 0.0);
        for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
            double pr = 1.0;
            int k = 0;
            for (std::size_t i = 0; i < n; ++i) {
                const bool on = mask >> i & 1u;
                pr *= on ? p[i] : 1.0 - p[i];
                k += on;
            }
            ref[static_cast<std::size_t>(k)] += pr;
        }
        const auto pmf = poisson_binomial_pmf(p);
        for (std::size_t k = 0; k <= n; ++k) CHECK(std::abs(pmf[k] - ref[k]) <= 1e-12);
    }
}

TEST_CASE("Poisson-binomial convolution and transform agree")
{
    Rng rng(14);
    for (std::size_t n : {1u, 5u, 17u, 33u, 50u}) {
        std::vector<double> p(n);
        for (double& v : p) v = rng.uniform();
        const auto a = poisson_binomial_pmf(p), b = poisson_binomial_pmf_dft(p);
        REQUIRE(a.size() == b.size());
        double prev = 0.0;
        for (std::size_t k = 0; k <= n; ++k) {
            CHECK(std::abs(a[k] - b[k]) < 1e-10);
            const double c = fleet_count_cdf(p, k);
            CHECK(c >= prev - 1e-15);
            prev = c;
        }
        CHECK(prev == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("fleet prediction reductions")
{
    const LifetimeUnitRecord u{"u", 12.0, false, series({4, 8, 12}, {0.1, 0.3, -0.2})};
    std::vector<LifetimeUnitRecord> fleet(6, u);
    for (std::size_t i = 0; i < fleet.size(); ++i) fleet[i].unit_id = "u" + std::to_string(i);
    const auto ft = degenerate_fit(3.5, 0.5, 0.9);
    const auto fx = constant_covariate(0.25);
    const double hs[] = {0.0, 10.0};
    const auto pred = fleet_prediction(fleet, ft, fx, hs, 0.1, Rng(1), {.drl = {.draws = 20}, .resamples = 20});
    CHECK(pred.risk_set_size == 6);
    CHECK(pred.expected[0] == 0.0);
    CHECK(pred.count_cdf[0][0] == doctest::Approx(1.0).epsilon(1e-15));
    const double rho = drl_estimate(u, 10.0, ft.params, fx.params, StdKind::SEV, Rng(1), {.draws = 20});
    CHECK(pred.expected[1] == doctest::Approx(6.0 * rho).epsilon(1e-12));
    CHECK(pred.count_cdf[1].back() == doctest::Approx(1.0).epsilon(1e-12));

    std::vector<LifetimeUnitRecord> none;
    for (auto r : fleet) {
        r.failed = true;
        none.push_back(r);
    }
    CHECK_THROWS(fleet_prediction(none, ft, fx, hs, 0.1, Rng(1)));
}
