#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "paclab/label.hpp"

namespace paclab {

// Possibly overlapping clusters over a point array. Identity is the string id,
// so a trace learned on one set of points can be replayed on another. Cluster
// order is the input order; the sweep depends on it.
struct ClusterSet {
    std::vector<std::string> ids;
    std::vector<std::vector<std::size_t>> members;  // parallel to ids

    std::size_t size() const { return ids.size(); }
    void validate(std::size_t n_points) const;
};

struct CalibrationUpdate {
    std::string cluster_id;
    int bin = 1;  // 1-based
    double delta = 0.0;
};

struct CalibrationTrace {
    int bins = 1;
    double tolerance = 0.02;
    bool converged = true;  // false when max_iters ran out
    std::vector<CalibrationUpdate> updates;  // in applied order
};

struct CalibrationResult {
    std::vector<double> uncertainties;  // clamped to [0,1]
    CalibrationTrace trace;
};

// Bin of u under B half-open bins [(j-1)/B, j/B). Total on the reals:
// u < 0 goes to bin 1, u >= 1 to bin B (updates can push values outside).
int calibration_bin(double u, int bins);

// Iterative cell sweeps: clusters in input order, bins ascending; each
// non-empty (cluster, bin) cell whose mean mismatch indicator differs from its
// mean uncertainty by more than tau gets the additive correction, until a full
// sweep applies none. Values are not clamped between sweeps; the returned
// values are clamped once at the end.
CalibrationResult multicalibrate(std::vector<double> uncertainties,
                                 const std::vector<Label>& expert,
                                 const std::vector<Label>& predicted,
                                 const ClusterSet& clusters, int bins,
                                 double tau = 0.02, int max_iters = 100);

// Replays the trace in recorded order: each update shifts the points of its
// cluster currently sitting in its bin, re-binning after every step. Clamps
// to [0,1] at the end. Replaying on the calibration set itself reproduces
// multicalibrate's own output exactly.
std::vector<double> apply_calibration(const CalibrationTrace& trace,
                                      std::vector<double> uncertainties,
                                      const ClusterSet& clusters);

}  // namespace paclab
