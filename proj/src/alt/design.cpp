#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

#include "relikit/alt/alt.hpp"
#include "relikit/numeric.hpp"

namespace relikit::alt {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<std::pair<double, int>> tally(std::span<const double> design)
{
    std::map<double, int> counts;
    for (double q : design) ++counts[q];
    return {counts.begin(), counts.end()};
}

Eigen::Matrix3d tallied_information(const AltParams& theta, const std::vector<std::pair<double, int>>& design,
                                    const MaterialTestConfig& config)
{
    Eigen::Matrix3d info = Eigen::Matrix3d::Zero();
    for (const auto& [q, n] : design) info += n * unit_information(theta, q, config);
    return info;
}

std::vector<std::size_t> ascending_order(std::span<const double> grid)
{
    std::vector<std::size_t> idx(grid.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return grid[a] < grid[b]; });
    return idx;
}

}  // namespace

std::vector<double> sbd_objective_grid(std::span<const double> grid, const PosteriorDraws& draws,
                                       std::span<const double> design, const UseProfile& profile, double p,
                                       const MaterialTestConfig& config)
{
    if (draws.size() == 0) throw std::invalid_argument("no posterior draws");
    if (grid.empty()) throw std::invalid_argument("candidate grid is empty");
    profile.validate();
    const auto base = tally(design);
    const std::size_t n_draws = draws.size(), n_grid = grid.size();
    std::vector<double> per_draw(n_draws * n_grid, 0.0);
    numeric::parallel_for(n_draws, [&](std::size_t d) {
        const AltParams theta = params_from_row(draws, d);
        const Eigen::Matrix3d info = tallied_information(theta, base, config);
        for (std::size_t g = 0; g < n_grid; ++g) {
            const Eigen::Matrix3d aug = info + unit_information(theta, grid[g], config);
            per_draw[d * n_grid + g] = weighted_avar_info(aug, theta, profile, p, config).value;
        }
    });
    std::vector<double> out(n_grid, 0.0);
    for (std::size_t d = 0; d < n_draws; ++d)
        for (std::size_t g = 0; g < n_grid; ++g) out[g] += per_draw[d * n_grid + g];
    for (double& v : out) v /= static_cast<double>(n_draws);
    return out;
}

double sbd_objective(double q_new, const PosteriorDraws& draws, std::span<const double> design,
                     const UseProfile& profile, double p, const MaterialTestConfig& config)
{
    const double grid[] = {q_new};
    return sbd_objective_grid(grid, draws, design, profile, p, config)[0];
}

Allocation local_c_optimal(const AltParams& planning, std::span<const double> grid, int n_units,
                           const UseProfile& profile, double p, const MaterialTestConfig& config,
                           std::span<const double> base_design)
{
    if (n_units < 1) throw std::invalid_argument("n_units must be at least 1");
    if (grid.empty()) throw std::invalid_argument("candidate grid is empty");
    planning.validate();
    profile.validate();
    const auto order = ascending_order(grid);
    std::vector<Eigen::Matrix3d> unit(grid.size());
    for (std::size_t g = 0; g < grid.size(); ++g) unit[g] = unit_information(planning, grid[g], config);
    Eigen::Matrix3d info = tallied_information(planning, tally(base_design), config);

    Allocation out;
    out.grid.assign(grid.begin(), grid.end());
    out.counts.assign(grid.size(), 0);
    double best = kInf;
    for (int n = 0; n < n_units; ++n) {
        std::size_t pick = order.front();
        best = kInf;
        for (std::size_t g : order) {
            const double v = weighted_avar_info(info + unit[g], planning, profile, p, config).value;
            if (v < best) {
                best = v;
                pick = g;
            }
        }
        info += unit[pick];
        ++out.counts[pick];
    }
    out.avar = best;
    return out;
}

Allocation exact_c_optimal(const AltParams& planning, std::span<const double> grid, int n_units,
                           const UseProfile& profile, double p, const MaterialTestConfig& config,
                           std::span<const double> base_design)
{
    if (n_units < 1) throw std::invalid_argument("n_units must be at least 1");
    if (grid.empty()) throw std::invalid_argument("candidate grid is empty");
    planning.validate();
    profile.validate();
    const auto order = ascending_order(grid);
    const std::size_t m = grid.size();
    std::vector<Eigen::Matrix3d> unit(m);
    for (std::size_t g = 0; g < m; ++g) unit[g] = unit_information(planning, grid[g], config);
    const Eigen::Matrix3d base = tallied_information(planning, tally(base_design), config);

    Allocation out;
    out.grid.assign(grid.begin(), grid.end());
    out.counts.assign(m, 0);
    out.avar = kInf;
    // Enumerate compositions in ascending-q order so ties keep the allocation
    // that is lexicographically heaviest on low stress.
    std::vector<int> counts(m, 0);
    auto recurse = [&](auto&& self, std::size_t pos, int left, const Eigen::Matrix3d& info) -> void {
        const std::size_t g = order[pos];
        if (pos + 1 == m) {
            counts[g] = left;
            const double v = weighted_avar_info(info + left * unit[g], planning, profile, p, config).value;
            if (v < out.avar) {
                out.avar = v;
                out.counts = counts;
            }
            counts[g] = 0;
            return;
        }
        for (int c = left; c >= 0; --c) {
            counts[g] = c;
            self(self, pos + 1, left - c, info + c * unit[g]);
        }
        counts[g] = 0;
    };
    recurse(recurse, 0, n_units, base);
    return out;
}

}  // namespace relikit::alt
