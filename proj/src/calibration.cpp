#include "paclab/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "paclab/errors.hpp"

namespace paclab {

void ClusterSet::validate(std::size_t n_points) const {
    if (ids.size() != members.size())
        throw ValidationError("cluster ids and member lists differ in length");
    for (std::size_t c = 0; c < members.size(); ++c)
        for (std::size_t idx : members[c])
            if (idx >= n_points)
                throw ValidationError("cluster '" + ids[c] +
                                      "' references a point outside the dataset");
}

int calibration_bin(double u, int bins) {
    if (u < 0.0) return 1;
    if (u >= 1.0) return bins;
    const int j = static_cast<int>(std::floor(u * bins)) + 1;
    return std::clamp(j, 1, bins);
}

CalibrationResult multicalibrate(std::vector<double> uncertainties,
                                 const std::vector<Label>& expert,
                                 const std::vector<Label>& predicted,
                                 const ClusterSet& clusters, int bins, double tau,
                                 int max_iters) {
    const std::size_t m = uncertainties.size();
    if (expert.size() != m || predicted.size() != m)
        throw ValidationError("calibration inputs must all have the same length");
    if (bins < 1) throw ValidationError("bin count must be at least 1");
    if (!(tau > 0.0)) throw ValidationError("tolerance must be positive");
    if (max_iters < 1) throw ValidationError("max_iters must be at least 1");
    clusters.validate(m);

    std::vector<double> wrong(m);
    for (std::size_t i = 0; i < m; ++i)
        wrong[i] = expert[i] == predicted[i] ? 0.0 : 1.0;

    CalibrationResult result;
    result.trace.bins = bins;
    result.trace.tolerance = tau;
    result.trace.converged = false;

    std::vector<std::size_t> cell;
    for (int sweep = 0; sweep < max_iters; ++sweep) {
        bool updated = false;
        for (std::size_t c = 0; c < clusters.size(); ++c) {
            for (int j = 1; j <= bins; ++j) {
                cell.clear();
                for (std::size_t idx : clusters.members[c])
                    if (calibration_bin(uncertainties[idx], bins) == j)
                        cell.push_back(idx);
                if (cell.empty()) continue;
                double delta = 0.0;
                for (std::size_t idx : cell) delta += wrong[idx] - uncertainties[idx];
                delta /= static_cast<double>(cell.size());
                if (std::abs(delta) > tau) {
                    for (std::size_t idx : cell) uncertainties[idx] += delta;
                    result.trace.updates.push_back({clusters.ids[c], j, delta});
                    updated = true;
                }
            }
        }
        if (!updated) {
            result.trace.converged = true;
            break;
        }
    }

    for (double& u : uncertainties) u = std::clamp(u, 0.0, 1.0);
    result.uncertainties = std::move(uncertainties);
    return result;
}

std::vector<double> apply_calibration(const CalibrationTrace& trace,
                                      std::vector<double> uncertainties,
                                      const ClusterSet& clusters) {
    clusters.validate(uncertainties.size());
    std::unordered_map<std::string, std::size_t> by_id;
    for (std::size_t c = 0; c < clusters.size(); ++c) by_id.emplace(clusters.ids[c], c);

    for (const auto& update : trace.updates) {
        auto it = by_id.find(update.cluster_id);
        if (it == by_id.end())
            throw UnknownClusterError("trace references unknown cluster '" +
                                      update.cluster_id + "'");
        for (std::size_t idx : clusters.members[it->second])
            if (calibration_bin(uncertainties[idx], trace.bins) == update.bin)
                uncertainties[idx] += update.delta;
    }

    for (double& u : uncertainties) u = std::clamp(u, 0.0, 1.0);
    return uncertainties;
}

}  // namespace paclab
