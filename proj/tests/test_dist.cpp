#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "relikit/dist.hpp"
#include "relikit/numeric.hpp"
#include "relikit/posterior.hpp"
#include "relikit/rng.hpp"

using namespace relikit;
using dist::StdKind;

namespace {

double normal_cdf_oracle(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

// Largest gap between an empirical cdf and a reference cdf.
double ks_oracle(std::vector<double> x, double (*cdf)(double))
{
    std::sort(x.begin(), x.end());
    const double n = static_cast<double>(x.size());
    double d = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double f = cdf(x[i]);
        d = std::max({d, f - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - f});
    }
    return d;
}

}  // namespace

TEST_CASE("standard cdf anchor values")
{
    CHECK(dist::std_cdf(0.0, StdKind::SEV) == doctest::Approx(1.0 - std::exp(-1.0)).epsilon(1e-15));
    CHECK(dist::std_cdf(0.0, StdKind::NORMAL) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(dist::std_cdf(std::log(std::log(2.0)), StdKind::SEV) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(dist::std_pdf(0.0, StdKind::SEV) == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
    CHECK(dist::std_pdf(0.0, StdKind::NORMAL) == doctest::Approx(1.0 / std::sqrt(2.0 * std::numbers::pi)).epsilon(1e-15));
}

TEST_CASE("normal cdf agrees with erfc across the tails")
{
    for (double z = -12.0; z <= 8.0; z += 0.125) {
        const double ref = normal_cdf_oracle(z);
        CHECK(std::abs(dist::std_cdf(z, StdKind::NORMAL) - ref) <= 1e-12 * std::max(ref, 1e-300) + 1e-300);
        const double sref = 0.5 * std::erfc(z / std::numbers::sqrt2);
        CHECK(std::abs(dist::std_survival(z, StdKind::NORMAL) - sref) <= 1e-12 * sref + 1e-300);
    }
}

TEST_CASE("pdf is the derivative of the cdf")
{
    for (auto kind : {StdKind::SEV, StdKind::NORMAL}) {
        for (double z : {-3.0, -1.0, 0.0, 0.7, 1.5}) {
            const double h = 1e-5;
            const double fd = (dist::std_cdf(z + h, kind) - dist::std_cdf(z - h, kind)) / (2.0 * h);
            CHECK(std::abs(fd - dist::std_pdf(z, kind)) < 1e-6);
            const double dl = (dist::log_std_pdf(z + h, kind) - dist::log_std_pdf(z - h, kind)) / (2.0 * h);
            CHECK(dist::dlog_std_pdf(z, kind) == doctest::Approx(dl).epsilon(1e-6));
        }
    }
}

TEST_CASE("quantile anchors")
{
    CHECK(std::abs(dist::std_quantile(1.0 - std::exp(-1.0), StdKind::SEV)) < 1e-14);
    CHECK(std::abs(dist::std_quantile(0.5, StdKind::NORMAL)) < 1e-15);
    // Bisection on the erfc-based cdf.
    double lo = 0.0, hi = 5.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (normal_cdf_oracle(mid) < 0.975 ? lo : hi) = mid;
    }
    CHECK(dist::std_quantile(0.975, StdKind::NORMAL) == doctest::Approx(0.5 * (lo + hi)).epsilon(1e-12));
    CHECK(dist::std_quantile(0.975, StdKind::NORMAL) == doctest::Approx(1.959964).epsilon(1e-6));
}

TEST_CASE("cdf and quantile round trip on (0.001, 0.999)")
{
    for (auto kind : {StdKind::SEV, StdKind::NORMAL})
        for (double p = 0.001; p < 0.999; p += 0.001) CHECK(std::abs(dist::std_cdf(dist::std_quantile(p, kind), kind) - p) < 1e-12);
}

TEST_CASE("pdf nonnegative and cdf monotone on a sorted grid")
{
    for (auto kind : {StdKind::SEV, StdKind::NORMAL}) {
        double prev = 0.0;
        for (double z = -30.0; z <= 6.0; z += 0.01) {
            CHECK(dist::std_pdf(z, kind) >= 0.0);
            const double c = dist::std_cdf(z, kind);
            CHECK(c >= prev);
            prev = c;
        }
    }
}

TEST_CASE("log-location-scale sampling")
{
    Rng a(11), b(11);
    const dist::LocScaleParams p{2.0, 0.5};
    CHECK(dist::sample_log_loc_scale(p, StdKind::SEV, a) == dist::sample_log_loc_scale(p, StdKind::SEV, b));

    Rng c(3);
    CHECK(dist::sample_log_loc_scale({1.5, 1e-12}, StdKind::SEV, c) == doctest::Approx(std::exp(1.5)).epsilon(1e-9));

    Rng r(2024);
    std::vector<double> z(100000);
    for (auto& v : z) v = (std::log(dist::sample_log_loc_scale(p, StdKind::SEV, r)) - p.mu) / p.sigma;
    CHECK(ks_oracle(z, [](double x) { return 1.0 - std::exp(-std::exp(x)); }) < 0.01);

    Rng s(77);
    for (auto& v : z) v = dist::sample_std(StdKind::NORMAL, s);
    CHECK(ks_oracle(z, normal_cdf_oracle) < 0.01);
}

TEST_CASE("invalid scale is rejected")
{
    CHECK_THROWS_AS(dist::validate({0.0, 0.0}), std::invalid_argument);
    CHECK_THROWS(dist::std_quantile(0.0, StdKind::NORMAL));
    CHECK_THROWS(dist::std_quantile(1.0, StdKind::SEV));
}

TEST_CASE("rng streams are reproducible and independent of scheduling")
{
    Rng root(5);
    Rng s1 = root.substream(3), s2 = Rng(5).substream(3);
    for (int i = 0; i < 100; ++i) CHECK(s1.next_u64() == s2.next_u64());
    CHECK(root.substream(1).seed() != root.substream(2).seed());
    Rng u(9);
    double m = 0.0, v = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double x = u.uniform();
        CHECK_FALSE((x <= 0.0 || x >= 1.0));
        const double z = u.normal();
        m += z;
        v += z * z;
    }
    CHECK(std::abs(m / n) < 0.01);
    CHECK(std::abs(v / n - 1.0) < 0.02);
    std::set<std::uint64_t> seen;
    for (int i = 0; i < 1000; ++i) seen.insert(u.below(7));
    CHECK(seen.size() == 7);
}

TEST_CASE("gauss-legendre integrates polynomials exactly")
{
    const auto& q = numeric::gauss_legendre(8);
    for (int deg = 0; deg <= 15; ++deg) {
        double s = 0.0;
        for (std::size_t i = 0; i < q.nodes.size(); ++i) s += q.weights[i] * std::pow(q.nodes[i], deg);
        const double exact = deg % 2 == 1 ? 0.0 : 2.0 / (deg + 1);
        CHECK(s == doctest::Approx(exact).epsilon(1e-13));
    }
}

TEST_CASE("nnls matches enumeration of active sets")
{
    Rng rng(4);
    for (int trial = 0; trial < 20; ++trial) {
        Eigen::MatrixXd A(8, 3);
        Eigen::VectorXd b(8);
        for (int i = 0; i < 8; ++i) {
            b[i] = rng.normal();
            for (int j = 0; j < 3; ++j) A(i, j) = rng.normal();
        }
        double best = INFINITY;
        for (int mask = 0; mask < 8; ++mask) {
            std::vector<int> cols;
            for (int j = 0; j < 3; ++j)
                if (mask & (1 << j)) cols.push_back(j);
            Eigen::VectorXd x = Eigen::VectorXd::Zero(3);
            if (!cols.empty()) {
                Eigen::MatrixXd As(8, static_cast<Eigen::Index>(cols.size()));
                for (std::size_t k = 0; k < cols.size(); ++k) As.col(static_cast<Eigen::Index>(k)) = A.col(cols[k]);
                const Eigen::VectorXd xs = As.colPivHouseholderQr().solve(b);
                if ((xs.array() < 0.0).any()) continue;
                for (std::size_t k = 0; k < cols.size(); ++k) x[cols[k]] = xs[static_cast<Eigen::Index>(k)];
            }
            best = std::min(best, (A * x - b).squaredNorm());
        }
        const Eigen::VectorXd x = numeric::nnls(A, b);
        CHECK((x.array() >= 0.0).all());
        CHECK((A * x - b).squaredNorm() == doctest::Approx(best).epsilon(1e-10));
    }
}

TEST_CASE("bfgs finds the minimum of a quadratic")
{
    const numeric::Objective f = [](const Eigen::VectorXd& x) {
        return (x[0] - 1.0) * (x[0] - 1.0) + 10.0 * (x[1] + 2.0) * (x[1] + 2.0) + x[0] * x[1];
    };
    const auto r = numeric::minimize_bfgs(f, Eigen::Vector2d(0.0, 0.0));
    // Stationary point of the quadratic by hand.
    Eigen::Matrix2d H;
    H << 2.0, 1.0, 1.0, 20.0;
    const Eigen::Vector2d x = H.ldlt().solve(Eigen::Vector2d(2.0, -40.0));
    CHECK(r.converged);
    CHECK((r.x - x).norm() < 1e-5);
}

TEST_CASE("quantile, rank rounding and summaries")
{
    CHECK(numeric::quantile({1.0, 2.0, 3.0, 4.0}, 0.5) == doctest::Approx(2.5));
    CHECK(numeric::quantile({5.0, 1.0, 3.0}, 0.25) == doctest::Approx(2.0));
    CHECK(numeric::rounded_rank(0.025 * 40, 40) == 1);
    CHECK(numeric::rounded_rank(2.5, 40) == 3);
    CHECK(numeric::rounded_rank(0.975 * 40, 40) == 39);
    CHECK(numeric::rounded_rank(-4.0, 40) == 1);
    CHECK(numeric::rounded_rank(100.0, 40) == 40);
    const std::vector<double> v{1.0, 2.0, 3.0, 4.0};
    CHECK(numeric::mean(v) == doctest::Approx(2.5));
    CHECK(numeric::variance(v) == doctest::Approx(5.0 / 3.0));
}

TEST_CASE("ks statistic and gelman-rubin")
{
    Rng rng(8);
    std::vector<double> u(2000);
    for (auto& x : u) x = rng.uniform();
    const auto ucdf = [](double x) { return std::clamp(x, 0.0, 1.0); };
    const double d = numeric::ks_statistic(u, ucdf);
    CHECK(d == doctest::Approx(ks_oracle(u, [](double x) { return std::clamp(x, 0.0, 1.0); })).epsilon(1e-12));
    CHECK(numeric::ks_pvalue(d, u.size()) > 0.01);
    CHECK(numeric::ks_pvalue(0.2, 2000) < 1e-6);

    std::vector<std::vector<double>> same(2, std::vector<double>(1000));
    for (auto& ch : same)
        for (auto& x : ch) x = rng.normal();
    CHECK(numeric::gelman_rubin(same) < 1.05);
    for (auto& x : same[1]) x += 5.0;
    CHECK(numeric::gelman_rubin(same) > 1.5);
}

TEST_CASE("parallel_for visits every index once")
{
    std::vector<int> hits(1000, 0);
    numeric::parallel_for(hits.size(), [&](std::size_t i) { hits[i] += 1; });
    CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
}

TEST_CASE("psd factor and bisection")
{
    Eigen::Matrix2d c;
    c << 4.0, 2.0, 2.0, 1.0;
    const Eigen::MatrixXd L = numeric::psd_factor(c);
    CHECK((L * L.transpose() - c).norm() < 1e-12);
    Eigen::Matrix2d bad;
    bad << 1.0, 0.0, 0.0, -1.0;
    CHECK_THROWS(numeric::psd_factor(bad));
    CHECK(numeric::bisect([](double x) { return x * x - 2.0; }, 0.0, 2.0, 1e-12) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-11));
}

TEST_CASE("posterior draws accessors")
{
    PosteriorDraws d;
    d.names = {"a", "b"};
    d.values.resize(4, 2);
    d.values << 1, 10, 2, 20, 3, 30, 4, 40;
    d.chain = {0, 0, 1, 1};
    d.iteration = {0, 1, 0, 1};
    CHECK(d.column("b") == 1);
    CHECK(d.draws_of("a") == std::vector<double>{1, 2, 3, 4});
    const auto ch = d.by_chain("b");
    REQUIRE(ch.size() == 2);
    CHECK(ch[1] == std::vector<double>{30, 40});
    CHECK_THROWS(d.column("zzz"));
}
