#pragma once

#include <functional>
#include <vector>

#include "paclab/dataset.hpp"
#include "paclab/oracle.hpp"
#include "paclab/rng.hpp"

namespace paclab {

struct EstimationDraw {
    std::size_t index = 0;     // into the dataset; uniform with replacement
    bool included = false;     // xi ~ Bern(pi)
    double weight = 1.0;       // pi at that point
    double loss = 0.0;         // observed loss, meaningful only when included
    double uncertainty = 0.0;
};

struct EstimationSample {
    std::vector<EstimationDraw> draws;  // exactly m, in draw order
};

// u -> Lhat^u(alpha), evaluated at every unique dataset uncertainty,
// breakpoints sorted ascending.
struct LubCurve {
    std::vector<double> breakpoints;
    std::vector<double> bounds;
};

// Hook for swapping the mean upper bound, e.g. the exact sample mean in tests.
using MeanUbFn = std::function<double(const BoundedSample&, double)>;

// Draws m indices uniformly with replacement, flips inclusion per weight, and
// collects the expert label (and its loss) for included draws.
EstimationSample draw_estimation_sample(const Dataset& data, const LossFn& loss,
                                        const PacConfig& config, ExpertOracle& oracle,
                                        SplitRng& rng);

// For each unique dataset uncertainty u, an upper bound on the mean of
// { loss_j * (xi_j / pi_j) * 1{U_j <= u} } over all m draws. Excluded draws
// contribute 0 through the xi factor. Breakpoints with identical masked
// multisets share one bound evaluation.
LubCurve compute_lub_curve(const EstimationSample& sample, const Dataset& data,
                           const LossFn& loss, const PacConfig& config,
                           const MeanUbFn& mean_ub_override = nullptr);

// Smallest breakpoint whose bound strictly exceeds epsilon; kNoThreshold when
// none does.
double select_threshold(const LubCurve& curve, double epsilon);

// The full pipeline: estimation sample, bound curve, threshold, then expert
// labels wherever U_i >= u_hat plus every included estimation draw.
LabeledOutput run_pac_labeling(const Dataset& data, const LossFn& loss,
                               const PacConfig& config, ExpertOracle& oracle,
                               SplitRng& rng);

// Convenience overload seeding the generator from config.seed.
LabeledOutput run_pac_labeling(const Dataset& data, const LossFn& loss,
                               const PacConfig& config, ExpertOracle& oracle);

}  // namespace paclab
