#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "relikit/degradation/degradation.hpp"
#include "relikit/numeric.hpp"

namespace relikit::degradation {

namespace {

void check_knots(std::span<const double> knots, int degree)
{
    if (degree < 1) throw std::invalid_argument("spline degree must be at least 1");
    if (knots.size() < 2) throw std::invalid_argument("malformed knots: need at least two boundary knots");
    for (double k : knots)
        if (!std::isfinite(k)) throw std::invalid_argument("malformed knots: non-finite value");
    for (std::size_t i = 1; i < knots.size(); ++i)
        if (!(knots[i] >= knots[i - 1])) throw std::invalid_argument("malformed knots: not nondecreasing");
    if (!(knots.back() > knots.front())) throw std::invalid_argument("malformed knots: empty span");
}

// Knot vector with each boundary repeated `mult` times.
std::vector<double> augmented(std::span<const double> knots, int mult)
{
    std::vector<double> t(static_cast<std::size_t>(mult), knots.front());
    t.insert(t.end(), knots.begin() + 1, knots.end() - 1);
    t.insert(t.end(), static_cast<std::size_t>(mult), knots.back());
    return t;
}

// All B-splines of the given degree on knot vector t at x (Cox-de Boor).
std::vector<double> bsplines(double x, const std::vector<double>& t, int degree)
{
    const std::size_t m = t.size() - 1;
    std::vector<double> N(m, 0.0);
    // Degree 0: half-open intervals, the last nondegenerate one closed on the right.
    std::size_t last = 0;
    for (std::size_t j = 0; j < m; ++j)
        if (t[j] < t[j + 1]) last = j;
    for (std::size_t j = 0; j < m; ++j) {
        if (t[j] < t[j + 1] && ((x >= t[j] && x < t[j + 1]) || (j == last && x == t[j + 1]))) {
            N[j] = 1.0;
            break;
        }
    }
    for (int p = 1; p <= degree; ++p) {
        const std::size_t count = m - static_cast<std::size_t>(p);
        for (std::size_t j = 0; j < count; ++j) {
            double v = 0.0;
            const double d1 = t[j + p] - t[j];
            const double d2 = t[j + p + 1] - t[j + 1];
            if (d1 > 0.0) v += (x - t[j]) / d1 * N[j];
            if (d2 > 0.0) v += (t[j + p + 1] - x) / d2 * N[j + 1];
            N[j] = v;
        }
        N[count] = 0.0;
    }
    N.resize(t.size() - static_cast<std::size_t>(degree) - 1);
    return N;
}

double clamp_to(std::span<const double> knots, double x)
{
    if (!std::isfinite(x)) throw std::invalid_argument("covariate value must be finite");
    return std::clamp(x, knots.front(), knots.back());
}

// Integrals of the full I-spline set (constant included) from the lower knot.
std::vector<double> integrated_isplines(double x, std::span<const double> knots, int degree, std::vector<double>* at_hi)
{
    const auto t = augmented(knots, degree + 1);
    const auto tp = augmented(knots, degree + 2);
    const std::size_t n = t.size() - static_cast<std::size_t>(degree) - 1;
    std::vector<double> c(n);
    for (std::size_t m = 0; m < n; ++m) c[m] = (t[m + degree + 1] - t[m]) / (degree + 1);
    // Integral of B_m from lo to x = c_m * tail sum of degree+1 splines from m+1.
    const auto Bp = bsplines(x, tp, degree + 1);
    std::vector<double> tail(Bp.size() + 1, 0.0);
    for (std::size_t l = Bp.size(); l-- > 0;) tail[l] = tail[l + 1] + Bp[l];
    std::vector<double> intB(n);
    for (std::size_t m = 0; m < n; ++m) intB[m] = c[m] * tail[m + 1];
    std::vector<double> out(n, 0.0);
    double acc = 0.0;
    for (std::size_t j = n; j-- > 0;) out[j] = acc += intB[j];
    if (at_hi) {
        at_hi->assign(n, 0.0);
        double a = 0.0;
        for (std::size_t j = n; j-- > 0;) (*at_hi)[j] = a += c[j];
    }
    return out;
}

}  // namespace

std::vector<double> ispline_basis(double x, std::span<const double> knots, int degree)
{
    check_knots(knots, degree);
    x = clamp_to(knots, x);
    const auto B = bsplines(x, augmented(knots, degree + 1), degree);
    std::vector<double> out(B.size() - 1);
    double acc = 0.0;
    for (std::size_t j = B.size(); j-- > 1;) out[j - 1] = std::clamp(acc += B[j], 0.0, 1.0);
    return out;
}

std::vector<double> cspline_basis(double x, std::span<const double> knots, int degree)
{
    check_knots(knots, degree);
    x = clamp_to(knots, x);
    std::vector<double> full_hi;
    const auto full = integrated_isplines(x, knots, degree, &full_hi);
    const double lo = knots.front(), hi = knots.back();
    std::vector<double> out(full.size() - 1);
    for (std::size_t q = 1; q < full.size(); ++q) {
        // Integral of (1 - I_q): concave, increasing, 0 at lo.
        const double num = (x - lo) - full[q];
        const double den = (hi - lo) - full_hi[q];
        out[q - 1] = den > 0.0 ? std::clamp(num / den, 0.0, 1.0) : 0.0;
    }
    return out;
}

std::string to_string(BasisKind kind)
{
    return kind == BasisKind::ISPLINE ? "ispline" : "cspline";
}

BasisKind basis_kind_from_string(const std::string& s)
{
    if (s == "ispline" || s == "monotone") return BasisKind::ISPLINE;
    if (s == "cspline" || s == "concave") return BasisKind::CSPLINE;
    throw std::invalid_argument("unknown basis kind '" + s + "'");
}

void ChannelSpline::validate() const
{
    check_knots(knots, degree);
    if (kind == BasisKind::ISPLINE && !(sign == 1.0 || sign == -1.0))
        throw std::invalid_argument("channel " + name + ": sign must be +1 or -1");
}

std::size_t ChannelSpline::constrained_count() const
{
    return knots.size() - 2 + static_cast<std::size_t>(degree);
}

ChannelRow channel_row(double x, const ChannelSpline& ch)
{
    ChannelRow row;
    if (ch.kind == BasisKind::ISPLINE) {
        row.constrained = ispline_basis(x, ch.knots, ch.degree);
        for (double& v : row.constrained) v *= ch.sign;
    } else {
        row.constrained = cspline_basis(x, ch.knots, ch.degree);
        const double xc = clamp_to(ch.knots, x);
        row.free.push_back((xc - ch.knots.front()) / (ch.knots.back() - ch.knots.front()));
    }
    return row;
}

std::vector<double> spline_basis(double x, const ChannelSpline& ch)
{
    ch.validate();
    return ch.kind == BasisKind::ISPLINE ? ispline_basis(x, ch.knots, ch.degree)
                                         : cspline_basis(x, ch.knots, ch.degree);
}

void SplineEffectSpec::validate() const
{
    if (channels.empty()) throw std::invalid_argument("spline spec needs at least one channel");
    for (const auto& ch : channels) ch.validate();
}

std::size_t SplineEffectSpec::constrained_count() const
{
    std::size_t n = 0;
    for (const auto& ch : channels) n += ch.constrained_count();
    return n;
}

std::size_t SplineEffectSpec::free_count() const
{
    std::size_t n = 2;
    for (const auto& ch : channels) n += ch.free_count();
    return n;
}

SplineEffectSpec SplineEffectSpec::from_data(std::span<const DegradationUnitRecord> data, int interior_knots,
                                             int degree)
{
    if (data.empty()) throw std::invalid_argument("no records");
    if (interior_knots < 0) throw std::invalid_argument("interior knot count must be nonnegative");
    static const char* names[kChannels] = {"uv", "temp", "rh"};
    static const BasisKind kinds[kChannels] = {BasisKind::ISPLINE, BasisKind::ISPLINE, BasisKind::CSPLINE};
    SplineEffectSpec spec;
    for (std::size_t l = 0; l < kChannels; ++l) {
        std::vector<double> pooled;
        for (const auto& u : data)
            for (const auto& x : u.covariates) pooled.push_back(x[l]);
        ChannelSpline ch;
        ch.name = names[l];
        ch.kind = kinds[l];
        ch.degree = degree;
        const auto [lo, hi] = std::minmax_element(pooled.begin(), pooled.end());
        ch.knots.push_back(*lo);
        for (int k = 1; k <= interior_knots; ++k)
            ch.knots.push_back(numeric::quantile(pooled, static_cast<double>(k) / (interior_knots + 1)));
        ch.knots.push_back(*hi);
        if (!(*hi > *lo)) throw std::invalid_argument("malformed knots: channel " + ch.name + " is constant");
        spec.channels.push_back(std::move(ch));
    }
    return spec;
}

}  // namespace relikit::degradation
