#include "paclab/oracle.hpp"

#include "paclab/errors.hpp"

namespace paclab {

const Label& ExpertOracle::query(const std::string& id) {
    auto it = cache_.find(id);
    if (it != cache_.end()) return it->second;
    return cache_.emplace(id, fetch(id)).first->second;
}

SimulatedOracle::SimulatedOracle(const Dataset& data, double cost_per_query)
    : ExpertOracle(cost_per_query) {
    truths_.reserve(data.size());
    for (const auto& p : data.points)
        if (p.truth) truths_.emplace(p.id, *p.truth);
}

Label SimulatedOracle::fetch(const std::string& id) {
    auto it = truths_.find(id);
    if (it == truths_.end())
        throw OracleError("no expert label available for id '" + id + "'");
    return it->second;
}

}  // namespace paclab
