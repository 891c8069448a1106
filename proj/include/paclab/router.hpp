#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "paclab/dataset.hpp"
#include "paclab/loss.hpp"
#include "paclab/rng.hpp"

namespace paclab {

struct ModelSource {
    std::string name;
    double cost = 0.0;  // per-label cost
};

// One point with predictions and uncertainties from all k sources.
struct MultiPrediction {
    std::string id;
    std::vector<double> features;
    std::vector<Label> predicted;     // one per source
    std::vector<double> uncertainty;  // one per source
    std::optional<Label> truth;       // required on routing (training) data
};

struct RoutingDataset {
    std::vector<ModelSource> sources;
    std::vector<MultiPrediction> points;

    std::size_t k() const { return sources.size(); }
    std::size_t dim() const;
    void validate(bool require_truth) const;
};

struct RouterConfig {
    double temperature = 0.0;  // <= 0: auto, 0.1 x uncertainty interquartile range
    double learning_rate = 0.05;
    int steps = 500;
    bool uncertainty_head = false;
    double c_expert = 1.0;
    std::uint64_t seed = 0;
};

// Affine scorer with exponential normalization over k sources, plus an
// optional logistic uncertainty head shared across sources. Gradients are
// closed-form; there is no autodiff anywhere.
class RouterState {
 public:
    RouterState(std::size_t k, std::size_t dim, double temperature,
                bool head_enabled);

    std::size_t k() const { return k_; }
    std::size_t dim() const { return dim_; }

    std::vector<double> route_distribution(const std::vector<double>& x) const;
    // argmax of the routing weights; ties go to the smallest source index.
    std::size_t select(const std::vector<double>& x) const;
    double head_uncertainty(const std::vector<double>& x) const;

    // d log w_j(x) / d theta, laid out like theta: [W row-major (k x dim) | b (k)].
    std::vector<double> grad_log_weight(const std::vector<double>& x,
                                        std::size_t j) const;

    std::vector<double> theta_w;  // k x dim, row-major
    std::vector<double> theta_b;  // k
    std::vector<double> gamma_w;  // dim
    double gamma_b = 0.0;
    double temperature = 1.0;
    bool head_enabled = false;

    std::string to_json() const;
    static RouterState from_json(const std::string& text);

 private:
    std::size_t k_;
    std::size_t dim_;
};

// Root u~ of
//   (1/m) sum_i sum_j w_j(X_i) loss(Y_i, Yhat_i^j) sigmoid((u~ - U_i^j) / T) = epsilon,
// by bisection on [min U - 40T, max U + 40T], driven to machine precision.
// With the head enabled, u_gamma(X_i) replaces U_i^j inside every sigmoid.
// Returns kNoThreshold when even all-open sigmoids cannot reach epsilon.
double solve_smooth_threshold(const RouterState& state, const RoutingDataset& data,
                              const LossFn& loss, double epsilon);

// d u~ / d theta via the implicit function theorem, as the expectation over
// datapoint-source pairs (i,j) ~ eta with
//   eta(i,j) proportional to w_j(X_i) loss_ij sig_ij (1 - sig_ij):
//   grad = -T * E_eta[ grad_theta log w_j(X_i) / (1 - sig_ij) ].
// Layout matches grad_log_weight. Throws DegenerateGradientError when the
// normalizer falls below 1e-12 (saturated sigmoids / zero losses).
std::vector<double> implicit_grad_theta(const RouterState& state,
                                        const RoutingDataset& data,
                                        const LossFn& loss, double u_tilde);

// Same quantity through the direct ratio of the two implicit-differentiation
// sums; kept as an independent route for cross-checking.
std::vector<double> implicit_grad_theta_ratio(const RouterState& state,
                                              const RoutingDataset& data,
                                              const LossFn& loss, double u_tilde);

// d u~ / d gamma = E_eta[ grad_gamma u_gamma(X_i) ]; layout [w (dim) | b].
// Requires the head to be enabled.
std::vector<double> implicit_grad_gamma(const RouterState& state,
                                        const RoutingDataset& data,
                                        const LossFn& loss, double u_tilde);

struct TrainResult {
    RouterState state;
    double objective = 0.0;  // final training objective
};

// Full-batch gradient descent on the smoothed expected-expert-count objective
//   sum_i sum_j w_j(X_i) sigmoid((U_i^j - u~(theta)) / T),
// backpropagating through u~ with the implicit gradients. With the head
// enabled, descends (theta, gamma) jointly. A step whose threshold is
// infinite contributes zero expert labels and applies no update.
TrainResult train_router(const RoutingDataset& data, const LossFn& loss,
                         double epsilon, const RouterConfig& config, SplitRng& rng);

// Cost-sensitive variant: descends
//   sum_i sum_j w_j(X_i) [ c_j sigmoid((u~ - U_i^j)/T) + c_expert sigmoid((U_i^j - u~)/T) ].
TrainResult train_router_cost_sensitive(const RoutingDataset& data, const LossFn& loss,
                                        double epsilon, const RouterConfig& config,
                                        SplitRng& rng);

struct RoutedOutput {
    Dataset dataset;                  // single-model shaped, labeler-ready
    std::vector<std::size_t> chosen;  // selected source per point
    double source_cost = 0.0;         // sum of c_{j*} over points
};

// Per point: j* = argmax_j w_j(X_i), label and uncertainty of that source
// (or u_gamma(X_i) when the head is enabled).
RoutedOutput route_and_select(const RouterState& state, const RoutingDataset& data);

}  // namespace paclab
