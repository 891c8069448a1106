#pragma once

#include <cstddef>
#include <string>
#include <unordered_map>

#include "paclab/dataset.hpp"

namespace paclab {

// The costly ground-truth labeler. Repeated queries for an id hit the cache
// and are charged once. Safe to read concurrently; mutation (query) must be
// externally serialized — in practice each labeling run owns its oracle.
class ExpertOracle {
 public:
    virtual ~ExpertOracle() = default;

    const Label& query(const std::string& id);

    std::size_t distinct_queries() const { return cache_.size(); }
    double total_cost() const { return cost_per_query_ * static_cast<double>(cache_.size()); }
    double cost_per_query() const { return cost_per_query_; }

 protected:
    explicit ExpertOracle(double cost_per_query) : cost_per_query_(cost_per_query) {}
    virtual Label fetch(const std::string& id) = 0;

 private:
    double cost_per_query_;
    std::unordered_map<std::string, Label> cache_;
};

// Answers from the dataset's hidden truths. Used by the harness and tests.
class SimulatedOracle final : public ExpertOracle {
 public:
    explicit SimulatedOracle(const Dataset& data, double cost_per_query = 1.0);

 protected:
    Label fetch(const std::string& id) override;

 private:
    std::unordered_map<std::string, Label> truths_;
};

}  // namespace paclab
