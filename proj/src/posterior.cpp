#include "relikit/posterior.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>

namespace relikit {

std::size_t PosteriorDraws::column(const std::string& name) const
{
    const auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) throw std::invalid_argument("no parameter named '" + name + "'");
    return static_cast<std::size_t>(it - names.begin());
}

std::vector<double> PosteriorDraws::draws_of(const std::string& name) const
{
    const auto c = static_cast<Eigen::Index>(column(name));
    std::vector<double> out(size());
    for (std::size_t r = 0; r < size(); ++r) out[r] = values(static_cast<Eigen::Index>(r), c);
    return out;
}

std::vector<std::vector<double>> PosteriorDraws::by_chain(const std::string& name) const
{
    const auto c = static_cast<Eigen::Index>(column(name));
    std::map<int, std::vector<double>> split;
    for (std::size_t r = 0; r < size(); ++r) split[chain.at(r)].push_back(values(static_cast<Eigen::Index>(r), c));
    std::vector<std::vector<double>> out;
    for (auto& [id, v] : split) out.push_back(std::move(v));
    return out;
}

}  // namespace relikit
