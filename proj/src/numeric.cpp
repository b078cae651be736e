#include "relikit/numeric.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <thread>

namespace relikit::numeric {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double safe_eval(const Objective& f, const Eigen::VectorXd& x)
{
    const double v = f(x);
    return std::isfinite(v) ? v : kInf;
}

}  // namespace

Eigen::VectorXd numeric_gradient(const Objective& f, const Eigen::VectorXd& x, double rel_step)
{
    const Eigen::Index n = x.size();
    Eigen::VectorXd g(n);
    Eigen::VectorXd xp = x;
    const double f0 = safe_eval(f, x);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double h = rel_step * (1.0 + std::abs(x[i]));
        xp[i] = x[i] + h;
        const double fp = safe_eval(f, xp);
        xp[i] = x[i] - h;
        const double fm = safe_eval(f, xp);
        xp[i] = x[i];
        if (std::isfinite(fp) && std::isfinite(fm))
            g[i] = (fp - fm) / (2.0 * h);
        else if (std::isfinite(fp))
            g[i] = (fp - f0) / h;
        else if (std::isfinite(fm))
            g[i] = (f0 - fm) / h;
        else
            g[i] = 0.0;
    }
    return g;
}

Eigen::MatrixXd numeric_hessian(const Objective& f, const Eigen::VectorXd& x, double rel_step)
{
    const Eigen::Index n = x.size();
    Eigen::MatrixXd H(n, n);
    Eigen::VectorXd h(n);
    for (Eigen::Index i = 0; i < n; ++i) h[i] = rel_step * (1.0 + std::abs(x[i]));
    const double f0 = f(x);
    Eigen::VectorXd xp = x;
    for (Eigen::Index i = 0; i < n; ++i) {
        xp[i] = x[i] + h[i];
        const double fp = f(xp);
        xp[i] = x[i] - h[i];
        const double fm = f(xp);
        xp[i] = x[i];
        H(i, i) = (fp - 2.0 * f0 + fm) / (h[i] * h[i]);
        for (Eigen::Index j = 0; j < i; ++j) {
            xp[i] = x[i] + h[i];
            xp[j] = x[j] + h[j];
            const double fpp = f(xp);
            xp[j] = x[j] - h[j];
            const double fpm = f(xp);
            xp[i] = x[i] - h[i];
            const double fmm = f(xp);
            xp[j] = x[j] + h[j];
            const double fmp = f(xp);
            xp[i] = x[i];
            xp[j] = x[j];
            H(i, j) = H(j, i) = (fpp - fpm - fmp + fmm) / (4.0 * h[i] * h[j]);
        }
    }
    return H;
}

MinimizeResult minimize_bfgs(const Objective& f, Eigen::VectorXd x0, const MinimizeOptions& options)
{
    const GradObjective wrapped = [&](const Eigen::VectorXd& x, Eigen::VectorXd* grad) {
        if (grad) *grad = numeric_gradient(f, x, options.fd_step);
        return f(x);
    };
    return minimize_bfgs(wrapped, std::move(x0), options);
}

MinimizeResult minimize_bfgs(const GradObjective& fg, Eigen::VectorXd x, const MinimizeOptions& options)
{
    const Eigen::Index n = x.size();
    const Objective f = [&](const Eigen::VectorXd& v) { return fg(v, nullptr); };
    MinimizeResult result;
    Eigen::VectorXd g(n);
    double fx = fg(x, &g);
    if (!std::isfinite(fx)) {
        result.x = x;
        result.value = kInf;
        return result;
    }
    Eigen::MatrixXd Hinv = Eigen::MatrixXd::Identity(n, n);
    bool scaled = false;
    int it = 0;
    for (; it < options.max_iterations; ++it) {
        if (g.lpNorm<Eigen::Infinity>() < options.gradient_tolerance) {
            result.converged = true;
            break;
        }
        Eigen::VectorXd d = -Hinv * g;
        double slope = g.dot(d);
        if (!(slope < 0.0)) {
            Hinv.setIdentity();
            d = -g;
            slope = -g.squaredNorm();
        }
        double step = 1.0;
        Eigen::VectorXd xn;
        double fn = kInf;
        bool accepted = false;
        for (int k = 0; k < 60; ++k) {
            xn = x + step * d;
            fn = safe_eval(f, xn);
            if (fn <= fx + 1e-4 * step * slope) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            if (!Hinv.isIdentity()) {
                Hinv.setIdentity();
                continue;
            }
            // No descent possible at finite-difference resolution.
            result.converged = true;
            break;
        }
        Eigen::VectorXd gn(n);
        fg(xn, &gn);
        const Eigen::VectorXd s = xn - x;
        const Eigen::VectorXd y = gn - g;
        const double sy = s.dot(y);
        const double change = std::abs(fx - fn);
        x = xn;
        g = gn;
        const double f_prev = fx;
        fx = fn;
        if (sy > 1e-14 * s.norm() * y.norm()) {
            if (!scaled) {
                Hinv *= sy / y.squaredNorm();
                scaled = true;
            }
            const double rho = 1.0 / sy;
            const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
            Hinv = (I - rho * s * y.transpose()) * Hinv * (I - rho * y * s.transpose()) +
                   rho * s * s.transpose();
        }
        if (change <= options.value_tolerance * (1.0 + std::abs(f_prev)) &&
            s.lpNorm<Eigen::Infinity>() < 1e-8 * (1.0 + x.lpNorm<Eigen::Infinity>())) {
            result.converged = true;
            ++it;
            break;
        }
    }
    result.x = x;
    result.value = fx;
    result.iterations = it;
    return result;
}

MinimizeResult minimize_nelder_mead(const Objective& f, const Eigen::VectorXd& x0, double initial_step,
                                    int max_evaluations, double tolerance)
{
    const Eigen::Index n = x0.size();
    std::vector<Eigen::VectorXd> simplex(n + 1, x0);
    std::vector<double> values(n + 1);
    for (Eigen::Index i = 0; i < n; ++i) simplex[i + 1][i] += initial_step;
    int evals = 0;
    for (Eigen::Index i = 0; i <= n; ++i) {
        values[i] = safe_eval(f, simplex[i]);
        ++evals;
    }
    std::vector<std::size_t> order(n + 1);
    MinimizeResult result;
    int it = 0;
    while (evals < max_evaluations) {
        ++it;
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](auto a, auto b) { return values[a] < values[b]; });
        const std::size_t best = order.front(), worst = order.back(), second = order[n - 1];
        if (std::isfinite(values[worst]) &&
            std::abs(values[worst] - values[best]) <= tolerance * (1.0 + std::abs(values[best]))) {
            result.converged = true;
            break;
        }
        Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
        for (std::size_t i = 0; i < order.size() - 1; ++i) centroid += simplex[order[i]];
        centroid /= static_cast<double>(n);
        const Eigen::VectorXd reflected = centroid + (centroid - simplex[worst]);
        const double fr = safe_eval(f, reflected);
        ++evals;
        if (fr < values[best]) {
            const Eigen::VectorXd expanded = centroid + 2.0 * (centroid - simplex[worst]);
            const double fe = safe_eval(f, expanded);
            ++evals;
            if (fe < fr) {
                simplex[worst] = expanded;
                values[worst] = fe;
            } else {
                simplex[worst] = reflected;
                values[worst] = fr;
            }
        } else if (fr < values[second]) {
            simplex[worst] = reflected;
            values[worst] = fr;
        } else {
            const bool outside = fr < values[worst];
            const Eigen::VectorXd contracted =
                outside ? Eigen::VectorXd(centroid + 0.5 * (reflected - centroid))
                        : Eigen::VectorXd(centroid + 0.5 * (simplex[worst] - centroid));
            const double fc = safe_eval(f, contracted);
            ++evals;
            if (fc < std::min(fr, values[worst])) {
                simplex[worst] = contracted;
                values[worst] = fc;
            } else {
                for (std::size_t i = 1; i < order.size(); ++i) {
                    auto& v = simplex[order[i]];
                    v = simplex[best] + 0.5 * (v - simplex[best]);
                    values[order[i]] = safe_eval(f, v);
                    ++evals;
                }
            }
        }
    }
    const auto best = static_cast<std::size_t>(std::min_element(values.begin(), values.end()) - values.begin());
    result.x = simplex[best];
    result.value = values[best];
    result.iterations = it;
    return result;
}

MinimizeResult minimize_multistart(const Objective& f, std::span<const Eigen::VectorXd> starts,
                                   const MinimizeOptions& options)
{
    if (starts.empty()) throw std::invalid_argument("multistart needs at least one start");
    MinimizeResult best;
    best.value = kInf;
    for (const auto& s : starts) {
        auto r = minimize_bfgs(f, s, options);
        if (std::isfinite(r.value) && (!std::isfinite(best.value) || r.value < best.value)) best = r;
    }
    if (!std::isfinite(best.value)) {
        best.x = starts.front();
        best.converged = false;
    }
    return best;
}

const Quadrature& gauss_legendre(int n)
{
    static std::mutex mutex;
    static std::map<int, Quadrature> cache;
    std::lock_guard lock(mutex);
    if (auto it = cache.find(n); it != cache.end()) return it->second;
    if (n < 1) throw std::invalid_argument("quadrature needs at least one node");
    Quadrature q;
    q.nodes.resize(n);
    q.weights.resize(n);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = pk;
            }
            if (n == 1) {
                p1 = x;
                p0 = 1.0;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        q.nodes[i] = -x;
        q.nodes[n - 1 - i] = x;
        q.weights[i] = w;
        q.weights[n - 1 - i] = w;
    }
    if (n == 1) {
        q.nodes[0] = 0.0;
        q.weights[0] = 2.0;
    }
    return cache.emplace(n, std::move(q)).first->second;
}

double bisect(const std::function<double(double)>& f, double lo, double hi, double tol, int max_iterations)
{
    double flo = f(lo);
    if (flo == 0.0) return lo;
    for (int i = 0; i < max_iterations && hi - lo > tol; ++i) {
        const double mid = 0.5 * (lo + hi);
        const double fm = f(mid);
        if ((fm < 0.0) == (flo < 0.0) && fm != 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

Eigen::VectorXd nnls(const Eigen::MatrixXd& A_in, const Eigen::VectorXd& b, int max_iterations)
{
    const Eigen::Index n = A_in.cols();
    Eigen::VectorXd scale(n);
    for (Eigen::Index j = 0; j < n; ++j) {
        const double c = A_in.col(j).norm();
        scale[j] = c > 0.0 ? c : 1.0;
    }
    const Eigen::MatrixXd A = A_in * scale.cwiseInverse().asDiagonal();
    if (max_iterations <= 0) max_iterations = static_cast<int>(3 * n + 30);

    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    std::vector<bool> passive(n, false);
    Eigen::VectorXd w = A.transpose() * (b - A * x);
    const double tol = 1e-12 * std::max(1.0, A.norm() * b.norm());

    auto solve_passive = [&](Eigen::VectorXd& z) {
        std::vector<Eigen::Index> idx;
        for (Eigen::Index j = 0; j < n; ++j)
            if (passive[j]) idx.push_back(j);
        z.setZero(n);
        if (idx.empty()) return;
        Eigen::MatrixXd Ap(A.rows(), static_cast<Eigen::Index>(idx.size()));
        for (std::size_t k = 0; k < idx.size(); ++k) Ap.col(static_cast<Eigen::Index>(k)) = A.col(idx[k]);
        const Eigen::VectorXd zp = Ap.colPivHouseholderQr().solve(b);
        for (std::size_t k = 0; k < idx.size(); ++k) z[idx[k]] = zp[static_cast<Eigen::Index>(k)];
    };

    for (int outer = 0; outer < max_iterations; ++outer) {
        Eigen::Index best = -1;
        double best_w = tol;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (!passive[j] && w[j] > best_w) {
                best_w = w[j];
                best = j;
            }
        }
        if (best < 0) break;
        passive[best] = true;
        Eigen::VectorXd z;
        for (int inner = 0; inner < max_iterations; ++inner) {
            solve_passive(z);
            bool feasible = true;
            for (Eigen::Index j = 0; j < n; ++j)
                if (passive[j] && z[j] <= 0.0) feasible = false;
            if (feasible) break;
            double alpha = 1.0;
            for (Eigen::Index j = 0; j < n; ++j) {
                if (passive[j] && z[j] <= 0.0) alpha = std::min(alpha, x[j] / (x[j] - z[j]));
            }
            x += alpha * (z - x);
            for (Eigen::Index j = 0; j < n; ++j) {
                if (passive[j] && x[j] <= 1e-15) {
                    passive[j] = false;
                    x[j] = 0.0;
                }
            }
        }
        x = z;
        for (Eigen::Index j = 0; j < n; ++j)
            if (!passive[j]) x[j] = 0.0;
        w = A.transpose() * (b - A * x);
    }
    return x.cwiseQuotient(scale);
}

Eigen::VectorXd partially_constrained_lsq(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                                          const std::vector<bool>& constrained)
{
    const Eigen::Index n = A.cols();
    if (static_cast<Eigen::Index>(constrained.size()) != n)
        throw std::invalid_argument("constraint mask size mismatch");
    std::vector<Eigen::Index> free_cols, cons_cols;
    for (Eigen::Index j = 0; j < n; ++j) (constrained[j] ? cons_cols : free_cols).push_back(j);

    auto gather = [&](const std::vector<Eigen::Index>& cols) {
        Eigen::MatrixXd M(A.rows(), static_cast<Eigen::Index>(cols.size()));
        for (std::size_t k = 0; k < cols.size(); ++k) M.col(static_cast<Eigen::Index>(k)) = A.col(cols[k]);
        return M;
    };
    const Eigen::MatrixXd Af = gather(free_cols);
    const Eigen::MatrixXd Ac = gather(cons_cols);

    Eigen::VectorXd xc = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(cons_cols.size()));
    if (!cons_cols.empty()) {
        if (free_cols.empty()) {
            xc = nnls(Ac, b);
        } else {
            Eigen::HouseholderQR<Eigen::MatrixXd> qr(Af);
            const Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(A.rows(), Af.cols());
            const Eigen::MatrixXd PAc = Ac - Q * (Q.transpose() * Ac);
            const Eigen::VectorXd Pb = b - Q * (Q.transpose() * b);
            xc = nnls(PAc, Pb);
        }
    }
    Eigen::VectorXd xf;
    if (!free_cols.empty()) xf = Af.colPivHouseholderQr().solve(b - Ac * xc);

    Eigen::VectorXd x(n);
    for (std::size_t k = 0; k < free_cols.size(); ++k) x[free_cols[k]] = xf[static_cast<Eigen::Index>(k)];
    for (std::size_t k = 0; k < cons_cols.size(); ++k) x[cons_cols[k]] = xc[static_cast<Eigen::Index>(k)];
    return x;
}

Eigen::MatrixXd psd_factor(const Eigen::MatrixXd& cov, double tol)
{
    const Eigen::Index n = cov.rows();
    if (n == 0) return cov;
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() == Eigen::Success) return llt.matrixL();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (cov + cov.transpose()));
    Eigen::VectorXd vals = eig.eigenvalues();
    const double floor = -tol * std::max(1.0, std::abs(cov.trace()));
    for (Eigen::Index i = 0; i < n; ++i) {
        if (vals[i] < floor) throw std::runtime_error("covariance matrix is not positive semidefinite");
        vals[i] = std::max(vals[i], 0.0);
    }
    return eig.eigenvectors() * vals.cwiseSqrt().asDiagonal();
}

Eigen::MatrixXd spd_inverse(const Eigen::MatrixXd& m)
{
    Eigen::LLT<Eigen::MatrixXd> llt(0.5 * (m + m.transpose()));
    if (llt.info() != Eigen::Success) throw std::runtime_error("matrix is not positive definite");
    return llt.solve(Eigen::MatrixXd::Identity(m.rows(), m.cols()));
}

double quantile(std::vector<double> values, double p)
{
    if (values.empty()) throw std::invalid_argument("quantile of empty sample");
    std::sort(values.begin(), values.end());
    const double h = (static_cast<double>(values.size()) - 1.0) * std::clamp(p, 0.0, 1.0);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

double mean(std::span<const double> values)
{
    if (values.empty()) return 0.0;
    return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

double variance(std::span<const double> values)
{
    if (values.size() < 2) return 0.0;
    const double m = mean(values);
    double ss = 0.0;
    for (double v : values) ss += (v - m) * (v - m);
    return ss / static_cast<double>(values.size() - 1);
}

std::size_t rounded_rank(double x, std::size_t n)
{
    const double r = std::round(x);  // std::round is half away from zero
    if (r < 1.0) return 1;
    if (r > static_cast<double>(n)) return n;
    return static_cast<std::size_t>(r);
}

double ks_statistic(std::vector<double> sample, const std::function<double(double)>& cdf)
{
    if (sample.empty()) throw std::invalid_argument("KS statistic of empty sample");
    std::sort(sample.begin(), sample.end());
    const double n = static_cast<double>(sample.size());
    double d = 0.0;
    for (std::size_t i = 0; i < sample.size(); ++i) {
        const double F = cdf(sample[i]);
        d = std::max({d, F - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - F});
    }
    return d;
}

double ks_pvalue(double d, std::size_t n)
{
    const double sn = std::sqrt(static_cast<double>(n));
    const double lambda = (sn + 0.12 + 0.11 / sn) * d;
    if (lambda < 0.2) return 1.0;
    double p = 0.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = std::exp(-2.0 * k * k * lambda * lambda);
        p += (k % 2 == 1 ? 2.0 : -2.0) * term;
        if (term < 1e-16) break;
    }
    return std::clamp(p, 0.0, 1.0);
}

double gelman_rubin(const std::vector<std::vector<double>>& chains)
{
    const std::size_t m = chains.size();
    if (m < 2) throw std::invalid_argument("Gelman-Rubin needs at least two chains");
    const std::size_t n = chains.front().size();
    if (n < 2) throw std::invalid_argument("chains too short");
    std::vector<double> means, vars;
    for (const auto& c : chains) {
        if (c.size() != n) throw std::invalid_argument("chains must have equal length");
        means.push_back(mean(c));
        vars.push_back(variance(c));
    }
    const double W = mean(vars);
    const double B = static_cast<double>(n) * variance(means);
    if (W <= 0.0) return B <= 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
    const double nd = static_cast<double>(n);
    const double var_plus = (nd - 1.0) / nd * W + B / nd;
    return std::sqrt(var_plus / W);
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn)
{
    const std::size_t workers = std::min<std::size_t>(std::max(1u, std::thread::hardware_concurrency()), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> threads;
    for (std::size_t w = 0; w < workers; ++w) {
        threads.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= n) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    }
    for (auto& t : threads) t.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace relikit::numeric
