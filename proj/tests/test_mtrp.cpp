#include <doctest.h>

#include <cmath>

#include "relikit/io/synthetic.hpp"
#include "relikit/mtrp/mtrp.hpp"
#include "relikit/numeric.hpp"

using namespace relikit;
using namespace relikit::mtrp;

namespace {

MtrpParams hpp(double rate)
{
    MtrpParams p;
    p.component.shape = 1.0;
    p.subsystem.shape = 1.0;
    p.trend_shape = 1.0;
    p.trend_scale = 1.0 / rate;
    return p;
}

UsagePath unit_usage(double tau) { return {{std::max(tau, 1.0)}, {1.0}}; }

EventHistory history(double tau, std::vector<Event> ev, UsagePath usage)
{
    EventHistory h;
    h.unit_id = "v";
    h.tau = tau;
    h.events = std::move(ev);
    h.usage = std::move(usage);
    return h;
}

PosteriorDraws point_draws(const MtrpParams& p, std::size_t rows = 1)
{
    PosteriorDraws d;
    d.names = parameter_names();
    d.values.resize(static_cast<Eigen::Index>(rows), 6);
    for (Eigen::Index r = 0; r < d.values.rows(); ++r)
        d.values.row(r) << p.component.shape, p.subsystem.shape, p.trend_shape, p.trend_scale, p.gamma, p.sigma_r;
    d.chain.assign(rows, 0);
    d.iteration.assign(rows, 0);
    return d;
}

double weibull_mean_one_hazard(double shape, double x)
{
    const double s = 1.0 / std::tgamma(1.0 + 1.0 / shape);
    return shape / s * std::pow(x / s, shape - 1.0);
}

double weibull_mean_one_cumhaz(double shape, double x) { return std::pow(x * std::tgamma(1.0 + 1.0 / shape), shape); }

}  // namespace

TEST_CASE("renewal distributions have unit mean")
{
    for (double shape : {0.45, 1.0, 1.7, 3.0}) {
        const Renewal r{shape};
        const auto& gl = numeric::gauss_legendre(64);
        // mean = integral of the survivor function, on a mapped half line
        double m = 0.0;
        for (int i = 0; i < 64; ++i) {
            const double u = 0.5 * (gl.nodes[i] + 1.0);
            const double x = u / (1.0 - u);
            m += 0.5 * gl.weights[i] * std::exp(-r.cumulative_hazard(x)) / ((1.0 - u) * (1.0 - u));
        }
        CHECK(m == doctest::Approx(1.0).epsilon(shape < 0.5 ? 5e-3 : 1e-6));
        CHECK(r.inverse_cumulative_hazard(r.cumulative_hazard(0.8)) == doctest::Approx(0.8).epsilon(1e-12));
    }
}

TEST_CASE("homogeneous Poisson reduction of the intensities")
{
    const double lam = 0.7;
    const auto h = history(20.0, {{3.0, EventType::SUBSYSTEM}, {5.5, EventType::COMPONENT}, {9.0, EventType::COMPONENT}},
                           unit_usage(20.0));
    for (double t : {0.5, 3.0, 4.0, 7.2, 12.0, 20.0}) {
        const auto in = intensity_eval(t, h, hpp(lam));
        CHECK(in.trend == doctest::Approx(lam).epsilon(1e-14));
        CHECK(in.subsystem == doctest::Approx(lam).epsilon(1e-14));
        CHECK(in.component == doctest::Approx(lam).epsilon(1e-14));
    }
    CHECK_THROWS(intensity_eval(25.0, h, hpp(lam)));
}

TEST_CASE("intensities of a two-event toy history by hand")
{
    MtrpParams p;
    p.component.shape = 2.0;
    p.subsystem.shape = 1.5;
    p.trend_shape = 1.2;
    p.trend_scale = 5.0;
    p.gamma = 0.5;
    const auto h = history(4.0, {{1.0, EventType::SUBSYSTEM}, {2.5, EventType::COMPONENT}}, {{10.0}, {2.0}});
    const double w = std::sqrt(2.0);
    auto big_lambda = [&](double t) { return w * std::pow(t / 5.0, 1.2); };
    const double L1 = big_lambda(1.0), L2 = big_lambda(2.5), L = big_lambda(3.0);
    const double S1 = weibull_mean_one_cumhaz(1.5, L1);
    const double S2 = S1 + weibull_mean_one_cumhaz(1.5, L2 - L1);
    const double S = S1 + weibull_mean_one_cumhaz(1.5, L - L1);
    const double lam = w * 1.2 / 5.0 * std::pow(3.0 / 5.0, 0.2);
    const double lam_s = weibull_mean_one_hazard(1.5, L - L1) * lam;
    const double lam_c = weibull_mean_one_hazard(2.0, S - S2) * lam_s;
    const auto in = intensity_eval(3.0, h, p);
    CHECK(std::abs(in.trend - lam) < 1e-8);
    CHECK(std::abs(in.subsystem - lam_s) < 1e-8);
    CHECK(std::abs(in.component - lam_c) < 1e-8);

    // Same history on the log scale: component density at the transformed gap
    // plus survivor terms for the subsystem-terminated gap and the final one.
    const double Lt = big_lambda(4.0);
    const double St = S1 + weibull_mean_one_cumhaz(1.5, Lt - L1);
    const double lam2 = w * 1.2 / 5.0 * std::pow(2.5 / 5.0, 0.2);
    const double ll = -weibull_mean_one_cumhaz(2.0, S1) + std::log(weibull_mean_one_hazard(2.0, S2 - S1)) -
                      weibull_mean_one_cumhaz(2.0, S2 - S1) + std::log(weibull_mean_one_hazard(1.5, L2 - L1) * lam2) -
                      weibull_mean_one_cumhaz(2.0, St - S2);
    CHECK(std::abs(unit_loglik(h, p, 0.0) - ll) < 1e-10);
}

TEST_CASE("homogeneous Poisson likelihood")
{
    const double lam = 1.3, tau = 6.0;
    const auto one = history(tau, {{2.0, EventType::COMPONENT}}, unit_usage(tau));
    CHECK(unit_loglik(one, hpp(lam), 0.0) == doctest::Approx(std::log(lam) - lam * tau).epsilon(1e-13));
    const auto none = history(tau, {}, unit_usage(tau));
    CHECK(unit_loglik(none, hpp(lam), 0.0) == doctest::Approx(-lam * tau).epsilon(1e-13));

    MtrpParams bad = hpp(lam);
    bad.trend_scale = -1.0;
    CHECK(mtrp_loglik(bad, std::vector<EventHistory>{one}) == -std::numeric_limits<double>::infinity());
    CHECK_FALSE(invalid_reason(bad).empty());
}

TEST_CASE("likelihood is exchangeable over units")
{
    const io::RecurrentScenario sc;
    auto ds = io::simulate_recurrent({.units = 20}, Rng(4));
    const double a = mtrp_loglik(sc.truth, ds.histories);
    for (auto& h : ds.histories) h.unit_id += "_renamed";
    std::reverse(ds.histories.begin(), ds.histories.end());
    CHECK(mtrp_loglik(sc.truth, ds.histories) == doctest::Approx(a).epsilon(1e-12));
}

TEST_CASE("simulated homogeneous Poisson counts")
{
    Rng rng(1);
    const int reps = 10000;
    double total = 0.0;
    for (int r = 0; r < reps; ++r) total += static_cast<double>(simulate_mtrp(hpp(2.0), 10.0, unit_usage(10.0), rng).count(EventType::COMPONENT));
    CHECK(std::abs(total / reps - 20.0) < 3.0 * std::sqrt(20.0) / 100.0);
    CHECK(simulate_mtrp(hpp(2.0), 0.0, unit_usage(1.0), rng).events.empty());

    Rng ra(5), rb(5);
    const auto a = simulate_mtrp(hpp(2.0), 10.0, unit_usage(10.0), ra);
    const auto b = simulate_mtrp(hpp(2.0), 10.0, unit_usage(10.0), rb);
    REQUIRE(a.events.size() == b.events.size());
    for (std::size_t k = 0; k < a.events.size(); ++k) CHECK(a.events[k].time == b.events[k].time);
}

TEST_CASE("usage effect orders the event counts")
{
    UsagePath growing;
    for (int m = 1; m <= 50; ++m) {
        growing.times.push_back(m);
        growing.values.push_back(1.0 + 0.5 * m);
    }
    MtrpParams base = hpp(1.0), damped = hpp(1.0);
    damped.gamma = -1.5;
    Rng r1(2), r2(3);
    double n0 = 0.0, n1 = 0.0;
    for (int k = 0; k < 2000; ++k) {
        n0 += static_cast<double>(simulate_mtrp(base, 50.0, growing, r1).events.size());
        n1 += static_cast<double>(simulate_mtrp(damped, 50.0, growing, r2).events.size());
    }
    CHECK(n1 < n0);
}

TEST_CASE("time rescaling gives unit exponential compensator gaps")
{
    const io::RecurrentScenario sc;
    auto truth = sc.truth;
    truth.sigma_r = 0.0;
    // Many events per unit so the censored final gaps carry negligible weight.
    truth.trend_scale = 4.0;
    const auto ds = io::simulate_recurrent({.units = 30, .truth = truth}, Rng(8));
    std::vector<double> gaps;
    for (const auto& h : ds.histories)
        for (double g : compensator_increments(h, truth, 0.0)) gaps.push_back(g);
    REQUIRE(gaps.size() >= 1000);
    const double d = numeric::ks_statistic(gaps, [](double x) { return 1.0 - std::exp(-x); });
    CHECK(numeric::ks_pvalue(d, gaps.size()) > 0.01);
}

TEST_CASE("truth beats perturbed parameters on average")
{
    const io::RecurrentScenario sc;
    auto truth = sc.truth;
    truth.sigma_r = 0.0;
    std::vector<MtrpParams> perturbed;
    for (int k = 0; k < 5; ++k)
        for (double f : {0.8, 1.2}) {
            MtrpParams p = truth;
            double* field[] = {&p.component.shape, &p.subsystem.shape, &p.trend_shape, &p.trend_scale, &p.gamma};
            *field[k] *= f;
            perturbed.push_back(p);
        }
    std::vector<double> gain(perturbed.size(), 0.0);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto ds = io::simulate_recurrent({.truth = truth}, Rng(100 + seed));
        const double l0 = mtrp_loglik(truth, ds.histories);
        for (std::size_t k = 0; k < perturbed.size(); ++k) gain[k] += l0 - mtrp_loglik(perturbed[k], ds.histories);
    }
    for (double g : gain) CHECK(g > 0.0);
}

TEST_CASE("posterior draws respect constraints and chains agree")
{
    auto ds = io::simulate_recurrent({.units = 80, .truth = hpp(0.05)}, Rng(12));
    McmcOptions opts;
    opts.chains = 2;
    opts.burn_in = 1500;
    opts.iterations = 1500;
    const auto draws = fit_mtrp_bayes(ds.histories, {}, opts, Rng(77));
    CHECK(draws.size() == 3000);
    for (std::size_t r = 0; r < draws.size(); ++r) {
        const auto p = params_from_row(draws, r);
        CHECK(invalid_reason(p).empty());
    }
    for (double a : draws.acceptance) {
        CHECK(a > 0.0);
        CHECK(a < 1.0);
    }
    for (const auto& name : {"component_shape", "subsystem_shape"}) {
        auto v = draws.draws_of(name);
        const double lo = numeric::quantile(v, 0.025), hi = numeric::quantile(v, 0.975);
        CHECK(lo <= 1.0);
        CHECK(hi >= 1.0);
        CHECK(numeric::gelman_rubin(draws.by_chain(name)) < 1.1);
    }

    std::vector<EventHistory> empty{history(10.0, {}, unit_usage(10.0))};
    CHECK_THROWS(fit_mtrp_bayes(empty, {}, opts, Rng(1)));
}

TEST_CASE("count prediction reductions")
{
    const double lam = 0.4;
    std::vector<EventHistory> fleet;
    for (int i = 0; i < 25; ++i) fleet.push_back(history(30.0, {}, unit_usage(30.0)));
    const auto draws = point_draws(hpp(lam), 50);
    const double hs[] = {0.0, 10.0};
    const auto pred = predict_counts(draws, fleet, hs, Rng(3), {.max_draws = 50, .replicates = 20});
    CHECK(pred.mean[0] == 0.0);
    CHECK(pred.upper[0] == 0.0);
    const double expect = 25.0 * lam * 10.0;
    // Poisson total over 1000 simulated fleets
    CHECK(std::abs(pred.mean[1] - expect) < 4.0 * std::sqrt(expect / 1000.0));
    CHECK(pred.lower[1] <= pred.mean[1]);
    CHECK(pred.mean[1] <= pred.upper[1]);
}

TEST_CASE("usage extrapolation rules")
{
    auto h = history(4.0, {}, {{1, 2, 3, 4}, {1.0, 2.0, 3.0, 4.0}});
    const auto carry = extrapolate_usage(h, 8.0, UsageExtrapolation::CARRY_FORWARD);
    CHECK(carry.at(7.5) == 4.0);
    const auto lin = extrapolate_usage(h, 8.0, UsageExtrapolation::LINEAR);
    CHECK(lin.at(6.0) == doctest::Approx(6.0).epsilon(1e-9));
    CHECK(lin.at(2.0) == 2.0);
}
