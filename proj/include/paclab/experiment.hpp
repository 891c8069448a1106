#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "paclab/calibration.hpp"
#include "paclab/dataset.hpp"
#include "paclab/labeler.hpp"
#include "paclab/router.hpp"

namespace paclab {

enum class Method { pac, pac_calibrated, naive, ai_only, router, router_cost };

Method parse_method(const std::string& name);
std::string method_name(Method method);

struct ExperimentSpec {
    Method method = Method::pac;
    PacConfig pac;
    std::size_t trials = 1000;
    int jobs = 1;

    double naive_cutoff = 0.05;
    double c_expert = 1.0;
    double model_cost = 0.0;  // per-label cost of the single model

    // Calibration (pac_calibrated): size of the expert-labeled calibration
    // subset (0 means pac.m), bins, tolerance, sweep cap.
    std::size_t calib_m = 0;
    int calib_bins = 3;
    double calib_tau = 0.02;
    int calib_max_iters = 100;

    RouterConfig router;

    std::size_t plot_trials = 50;  // subsample size for the plot-data file
    std::string out_dir;           // empty: keep everything in memory
};

struct TrialRow {
    std::size_t trial = 0;
    std::uint64_t seed = 0;
    double realized_error = 0.0;
    double budget_save_pct = 0.0;  // 100 * (1 - expert_count / n)
    std::size_t expert_count = 0;
    double total_cost = 0.0;
    double threshold = 0.0;
};

struct TrialReport {
    Method method = Method::pac;
    std::size_t n = 0;
    std::vector<TrialRow> trials;

    double budget_save_mean = 0.0;
    double budget_save_sd = 0.0;
    double error_quantile = 0.0;   // nearest-rank (1-alpha) quantile
    double exceed_fraction = 0.0;  // fraction of trials with error > epsilon
    double mean_expert_count = 0.0;
    double mean_total_cost = 0.0;
    double cost_save_vs_expert = 0.0;    // (full - total) / full
    double cost_save_vs_pipeline = 0.0;  // (full - total) / total
};

struct CostReport {
    double total = 0.0;
    double save_vs_expert = 0.0;
    double save_vs_pipeline = 0.0;
};

// Per point: c_expert for expert-labeled points, the point's model cost
// otherwise. Both save ratios are reported; the all-expert reference cost is
// n * c_expert.
CostReport compute_cost_metrics(const LabeledOutput& output,
                                const std::vector<double>& per_point_model_cost,
                                double c_expert);

// Expert labels exactly where U_i >= cutoff; no estimation sample. A +inf
// cutoff is the AI-only baseline.
LabeledOutput run_baseline_naive(const Dataset& data, double cutoff,
                                 ExpertOracle& oracle);
LabeledOutput run_baseline_ai_only(const Dataset& data);

// Repeated independent trials with per-trial derived seeds; `clusters` feeds
// pac_calibrated, `multi` + `routing_train` feed the router methods (the
// router is trained once on routing_train, then each trial labels the routed
// data). Writes trials.csv, summary.csv and plot.csv under out_dir when set.
TrialReport run_experiment(const Dataset& data, const LossFn& loss,
                           const ExperimentSpec& spec,
                           const ClusterSet* clusters = nullptr,
                           const RoutingDataset* multi = nullptr,
                           const RoutingDataset* routing_train = nullptr);

// Mean loss of the r lowest-uncertainty points, for r = 1..n (uncertainties
// replaced by their ranks; ties broken by dataset order).
struct LossCurve {
    std::string name;
    std::vector<double> values;
};
LossCurve rank_loss_curve(const Dataset& data, const LossFn& loss,
                          const std::string& name);
void write_loss_curves_csv(const std::string& path,
                           const std::vector<LossCurve>& curves);

}  // namespace paclab
