#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "paclab/bounds.hpp"
#include "paclab/label.hpp"
#include "paclab/loss.hpp"

namespace paclab {

struct DataPoint {
    std::string id;
    std::vector<double> features;  // empty when absent
    Label predicted;
    double uncertainty = 0.0;      // only its ordering matters; must be finite
    std::optional<Label> truth;    // visible only to the oracle and the harness
};

struct Dataset {
    std::vector<DataPoint> points;

    std::size_t size() const { return points.size(); }
    bool has_truths() const;
    // Unique ids, finite uncertainties, homogeneous label kind.
    void validate() const;
};

struct PacConfig {
    double epsilon = 0.05;
    double alpha = 0.05;
    std::size_t m = 0;
    // One shared weight, or one weight per point. Empty means 0.5 everywhere.
    std::vector<double> sampling_weights;
    BoundMethod bound_method = BoundMethod::betting;
    std::uint64_t seed = 0;
    int betting_grid = 1000;

    double weight(std::size_t i) const;
    double min_weight(std::size_t n) const;
    void validate(std::size_t n) const;
};

enum class Provenance { expert, model };

// Threshold sentinel: no point met the stopping rule, only estimation-sample
// expert labels are kept.
inline constexpr double kNoThreshold = std::numeric_limits<double>::infinity();

struct LabeledOutput {
    std::vector<Label> labels;  // dataset order
    std::vector<Provenance> provenance;
    double threshold = kNoThreshold;
    std::size_t expert_count = 0;
    double total_cost = 0.0;
};

// (1/n) sum loss(Y_i, labels[i]); every point needs ground truth.
double empirical_error(const Dataset& data, const std::vector<Label>& labels,
                       const LossFn& loss);

}  // namespace paclab
