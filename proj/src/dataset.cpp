#include "paclab/dataset.hpp"

#include <cmath>
#include <string>
#include <unordered_set>

#include "paclab/errors.hpp"

namespace paclab {

bool Dataset::has_truths() const {
    for (const auto& p : points)
        if (!p.truth.has_value()) return false;
    return true;
}

void Dataset::validate() const {
    if (points.empty()) throw ValidationError("dataset is empty");
    std::unordered_set<std::string> seen;
    seen.reserve(points.size());
    const LabelKind kind = points.front().predicted.kind();
    const std::size_t dim = points.front().features.size();
    for (const auto& p : points) {
        if (!seen.insert(p.id).second)
            throw ValidationError("duplicate id '" + p.id + "'");
        if (!std::isfinite(p.uncertainty))
            throw ValidationError("non-finite uncertainty for id '" + p.id + "'");
        if (p.predicted.kind() != kind)
            throw KindMismatchError("mixed label kinds in dataset (id '" + p.id + "')");
        if (p.truth && p.truth->kind() != kind)
            throw KindMismatchError("truth label kind differs for id '" + p.id + "'");
        if (p.features.size() != dim)
            throw ValidationError("inconsistent feature dimension for id '" + p.id + "'");
    }
}

double PacConfig::weight(std::size_t i) const {
    if (sampling_weights.empty()) return 0.5;
    if (sampling_weights.size() == 1) return sampling_weights.front();
    return sampling_weights[i];
}

double PacConfig::min_weight(std::size_t n) const {
    double lo = 1.0;
    for (std::size_t i = 0; i < n; ++i) lo = std::min(lo, weight(i));
    return lo;
}

void PacConfig::validate(std::size_t n) const {
    if (!(epsilon > 0.0)) throw ValidationError("epsilon must be positive");
    if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("alpha must lie in (0,1)");
    if (m < 1) throw ValidationError("estimation sample size m must be at least 1");
    if (!sampling_weights.empty() && sampling_weights.size() != 1 &&
        sampling_weights.size() != n)
        throw ValidationError("sampling weights must be one shared value or one per point");
    for (std::size_t i = 0; i < n; ++i) {
        const double w = weight(i);
        if (!(w > 0.0 && w <= 1.0))
            throw ValidationError("sampling weights must lie in (0, 1]");
    }
    if (betting_grid < 2) throw ValidationError("betting grid needs at least 2 points");
}

double empirical_error(const Dataset& data, const std::vector<Label>& labels,
                       const LossFn& loss) {
    if (labels.size() != data.size())
        throw ValidationError("label count does not match the dataset");
    if (data.points.empty()) throw ValidationError("dataset is empty");
    double total = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto& p = data.points[i];
        if (!p.truth)
            throw MissingTruthError("point '" + p.id + "' has no ground truth");
        total += loss_eval(loss, *p.truth, labels[i]);
    }
    return total / static_cast<double>(data.size());
}

}  // namespace paclab
