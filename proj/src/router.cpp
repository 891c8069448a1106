#include "paclab/router.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include <json.hpp>

#include "paclab/errors.hpp"

namespace paclab {

namespace {

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

// Per-call working set: losses are fixed by the data; weights and head
// outputs are refreshed whenever the parameters change.
struct RouterProblem {
    std::size_t m = 0, k = 0, dim = 0;
    double temperature = 1.0;
    bool head = false;
    std::vector<double> losses;   // m x k
    std::vector<double> weights;  // m x k
    std::vector<double> heads;    // m, head outputs
    std::vector<double> unc;      // m x k, effective uncertainty in the sigmoids
    double unc_lo = 0.0, unc_hi = 0.0;

    RouterProblem(const RoutingDataset& data, const LossFn& loss,
                  const RouterState& state) {
        data.validate(/*require_truth=*/true);
        m = data.points.size();
        k = data.k();
        dim = data.dim();
        if (state.k() != k || state.dim() != dim)
            throw ValidationError("router state does not match the dataset shape");
        temperature = state.temperature;
        head = state.head_enabled;
        losses.resize(m * k);
        unc.resize(m * k);
        for (std::size_t i = 0; i < m; ++i) {
            const auto& p = data.points[i];
            for (std::size_t j = 0; j < k; ++j)
                losses[i * k + j] = loss_eval(loss, *p.truth, p.predicted[j]);
        }
        refresh(data, state);
    }

    void refresh(const RoutingDataset& data, const RouterState& state) {
        weights.resize(m * k);
        if (head) heads.resize(m);
        unc_lo = std::numeric_limits<double>::infinity();
        unc_hi = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < m; ++i) {
            const auto& p = data.points[i];
            const auto w = state.route_distribution(p.features);
            std::copy(w.begin(), w.end(), weights.begin() + i * k);
            const double h = head ? state.head_uncertainty(p.features) : 0.0;
            if (head) heads[i] = h;
            for (std::size_t j = 0; j < k; ++j) {
                const double u = head ? h : p.uncertainty[j];
                unc[i * k + j] = u;
                unc_lo = std::min(unc_lo, u);
                unc_hi = std::max(unc_hi, u);
            }
        }
    }

    // (1/m) sum_ij w_ij loss_ij sigmoid((u - U_ij) / T)
    double f_value(double u) const {
        double total = 0.0;
        for (std::size_t e = 0; e < m * k; ++e)
            total += weights[e] * losses[e] * sigmoid((u - unc[e]) / temperature);
        return total / static_cast<double>(m);
    }

    double f_sup() const {
        double total = 0.0;
        for (std::size_t e = 0; e < m * k; ++e) total += weights[e] * losses[e];
        return total / static_cast<double>(m);
    }

    double solve(double epsilon) const {
        if (!(epsilon > 0.0)) throw ValidationError("epsilon must be positive");
        if (f_sup() <= epsilon) return kNoThreshold;
        double lo = unc_lo - 40.0 * temperature;
        double hi = unc_hi + 40.0 * temperature;
        // Bisection to machine precision; the gradient checks differentiate
        // through this root, so it cannot be left loose.
        while (true) {
            const double mid = 0.5 * (lo + hi);
            if (!(mid > lo && mid < hi)) break;
            if (f_value(mid) < epsilon)
                lo = mid;
            else
                hi = mid;
        }
        return 0.5 * (lo + hi);
    }
};

void check_finite_threshold(double u_tilde) {
    if (!std::isfinite(u_tilde))
        throw DegenerateGradientError(
            "threshold is not finite; the sigmoids are saturated and the "
            "implicit gradient is undefined");
}

}  // namespace

std::size_t RoutingDataset::dim() const {
    return points.empty() ? 0 : points.front().features.size();
}

void RoutingDataset::validate(bool require_truth) const {
    if (points.empty()) throw ValidationError("routing dataset is empty");
    if (sources.empty()) throw ValidationError("routing dataset declares no sources");
    const std::size_t kk = sources.size();
    const std::size_t d = points.front().features.size();
    for (const auto& p : points) {
        if (p.predicted.size() != kk || p.uncertainty.size() != kk)
            throw ValidationError("point '" + p.id + "' is missing per-source entries");
        if (p.features.size() != d)
            throw ValidationError("inconsistent feature dimension at '" + p.id + "'");
        for (double u : p.uncertainty)
            if (!std::isfinite(u))
                throw ValidationError("non-finite uncertainty at '" + p.id + "'");
        if (require_truth && !p.truth)
            throw MissingTruthError("routing point '" + p.id + "' has no ground truth");
    }
    for (const auto& s : sources)
        if (!(s.cost >= 0.0)) throw ValidationError("source costs must be nonnegative");
}

RouterState::RouterState(std::size_t k, std::size_t dim, double temperature,
                         bool head)
    : theta_w(k * dim, 0.0),
      theta_b(k, 0.0),
      gamma_w(dim, 0.0),
      gamma_b(0.0),
      temperature(temperature),
      head_enabled(head),
      k_(k),
      dim_(dim) {
    if (k < 1) throw ValidationError("router needs at least one source");
    if (!(temperature > 0.0)) throw ValidationError("temperature must be positive");
}

std::vector<double> RouterState::route_distribution(const std::vector<double>& x) const {
    if (x.size() != dim_)
        throw ValidationError("feature dimension does not match the router");
    std::vector<double> scores(k_);
    for (std::size_t j = 0; j < k_; ++j) {
        double s = theta_b[j];
        for (std::size_t f = 0; f < dim_; ++f) s += theta_w[j * dim_ + f] * x[f];
        scores[j] = s;
    }
    const double top = *std::max_element(scores.begin(), scores.end());
    double denom = 0.0;
    for (std::size_t j = 0; j < k_; ++j) {
        scores[j] = std::exp(scores[j] - top);
        denom += scores[j];
    }
    for (double& s : scores) s /= denom;
    return scores;
}

std::size_t RouterState::select(const std::vector<double>& x) const {
    const auto w = route_distribution(x);
    std::size_t best = 0;
    for (std::size_t j = 1; j < w.size(); ++j)
        if (w[j] > w[best]) best = j;  // strict: ties keep the smallest index
    return best;
}

double RouterState::head_uncertainty(const std::vector<double>& x) const {
    if (x.size() != dim_)
        throw ValidationError("feature dimension does not match the router");
    double s = gamma_b;
    for (std::size_t f = 0; f < dim_; ++f) s += gamma_w[f] * x[f];
    return sigmoid(s);
}

std::vector<double> RouterState::grad_log_weight(const std::vector<double>& x,
                                                 std::size_t j) const {
    const auto w = route_distribution(x);
    std::vector<double> grad(k_ * dim_ + k_, 0.0);
    for (std::size_t l = 0; l < k_; ++l) {
        const double coef = (l == j ? 1.0 : 0.0) - w[l];
        for (std::size_t f = 0; f < dim_; ++f) grad[l * dim_ + f] = coef * x[f];
        grad[k_ * dim_ + l] = coef;
    }
    return grad;
}

double solve_smooth_threshold(const RouterState& state, const RoutingDataset& data,
                              const LossFn& loss, double epsilon) {
    RouterProblem problem(data, loss, state);
    return problem.solve(epsilon);
}

std::vector<double> implicit_grad_theta(const RouterState& state,
                                        const RoutingDataset& data,
                                        const LossFn& loss, double u_tilde) {
    check_finite_threshold(u_tilde);
    RouterProblem problem(data, loss, state);
    const std::size_t m = problem.m, k = problem.k;
    const double T = problem.temperature;

    std::vector<double> sig(m * k), eta(m * k);
    double norm = 0.0;
    for (std::size_t e = 0; e < m * k; ++e) {
        sig[e] = sigmoid((u_tilde - problem.unc[e]) / T);
        eta[e] = problem.weights[e] * problem.losses[e] * sig[e] * (1.0 - sig[e]);
        norm += eta[e];
    }
    if (norm < 1e-12)
        throw DegenerateGradientError(
            "implicit gradient undefined: every sigmoid is saturated or every "
            "loss is zero at the threshold");

    std::vector<double> grad(k * problem.dim + k, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
            const std::size_t e = i * k + j;
            if (eta[e] == 0.0) continue;
            const double coef = -T * (eta[e] / norm) / (1.0 - sig[e]);
            const auto glw = state.grad_log_weight(data.points[i].features, j);
            for (std::size_t p = 0; p < grad.size(); ++p) grad[p] += coef * glw[p];
        }
    }
    return grad;
}

std::vector<double> implicit_grad_theta_ratio(const RouterState& state,
                                              const RoutingDataset& data,
                                              const LossFn& loss, double u_tilde) {
    check_finite_threshold(u_tilde);
    RouterProblem problem(data, loss, state);
    const std::size_t m = problem.m, k = problem.k, dim = problem.dim;
    const double T = problem.temperature;

    std::vector<double> numer(k * dim + k, 0.0);
    double denom = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        const auto& x = data.points[i].features;
        const double* w = &problem.weights[i * k];
        for (std::size_t j = 0; j < k; ++j) {
            const std::size_t e = i * k + j;
            const double s = sigmoid((u_tilde - problem.unc[e]) / T);
            const double ls = problem.losses[e] * s;
            denom += w[j] * problem.losses[e] * s * (1.0 - s);
            // grad of w_j wrt scores: w_j (delta_jl - w_l), affine in x.
            for (std::size_t l = 0; l < k; ++l) {
                const double coef = w[j] * ((l == j ? 1.0 : 0.0) - w[l]) * ls;
                for (std::size_t f = 0; f < dim; ++f) numer[l * dim + f] += coef * x[f];
                numer[k * dim + l] += coef;
            }
        }
    }
    denom /= T;
    if (denom < 1e-12)
        throw DegenerateGradientError(
            "implicit gradient undefined: every sigmoid is saturated or every "
            "loss is zero at the threshold");
    for (double& g : numer) g = -g / denom;
    return numer;
}

std::vector<double> implicit_grad_gamma(const RouterState& state,
                                        const RoutingDataset& data,
                                        const LossFn& loss, double u_tilde) {
    check_finite_threshold(u_tilde);
    if (!state.head_enabled)
        throw ValidationError("gamma gradient needs the uncertainty head enabled");
    RouterProblem problem(data, loss, state);
    const std::size_t m = problem.m, k = problem.k, dim = problem.dim;
    const double T = problem.temperature;

    std::vector<double> eta(m * k);
    double norm = 0.0;
    for (std::size_t e = 0; e < m * k; ++e) {
        const double s = sigmoid((u_tilde - problem.unc[e]) / T);
        eta[e] = problem.weights[e] * problem.losses[e] * s * (1.0 - s);
        norm += eta[e];
    }
    if (norm < 1e-12)
        throw DegenerateGradientError(
            "implicit gradient undefined: every sigmoid is saturated or every "
            "loss is zero at the threshold");

    std::vector<double> grad(dim + 1, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        double point_eta = 0.0;
        for (std::size_t j = 0; j < k; ++j) point_eta += eta[i * k + j];
        if (point_eta == 0.0) continue;
        const double h = problem.heads[i];
        const double dh = h * (1.0 - h);  // logistic output unit
        const double coef = (point_eta / norm) * dh;
        const auto& x = data.points[i].features;
        for (std::size_t f = 0; f < dim; ++f) grad[f] += coef * x[f];
        grad[dim] += coef;
    }
    return grad;
}

namespace {

enum class Objective { expert_count, cost };

double pick_temperature(const RoutingDataset& data, const RouterConfig& config) {
    if (config.temperature > 0.0) return config.temperature;
    std::vector<double> all;
    for (const auto& p : data.points)
        all.insert(all.end(), p.uncertainty.begin(), p.uncertainty.end());
    std::sort(all.begin(), all.end());
    const double q1 = all[all.size() / 4];
    const double q3 = all[(all.size() * 3) / 4];
    const double iqr = q3 - q1;
    return iqr > 0.0 ? 0.1 * iqr : 0.05;
}

TrainResult train_common(const RoutingDataset& data, const LossFn& loss,
                         double epsilon, const RouterConfig& config,
                         Objective objective) {
    data.validate(/*require_truth=*/true);
    if (data.k() < 2) throw ValidationError("routing needs at least two sources");
    if (!(epsilon > 0.0)) throw ValidationError("epsilon must be positive");
    if (!(config.learning_rate > 0.0)) throw ValidationError("learning rate must be positive");
    if (config.steps < 0) throw ValidationError("step count must be nonnegative");
    if (objective == Objective::cost && !(config.c_expert > 0.0))
        throw ValidationError("expert cost must be positive");

    const std::size_t m = data.points.size(), k = data.k(), dim = data.dim();
    RouterState state(k, dim, pick_temperature(data, config), config.uncertainty_head);
    RouterProblem problem(data, loss, state);
    const double T = state.temperature;
    const bool head = state.head_enabled;

    std::vector<double> costs(k, 0.0);
    if (objective == Objective::cost)
        for (std::size_t j = 0; j < k; ++j) costs[j] = data.sources[j].cost;

    const auto eval_objective = [&](double u_tilde) {
        double total = 0.0;
        for (std::size_t e = 0; e < m * k; ++e) {
            const double keep =
                std::isfinite(u_tilde) ? sigmoid((u_tilde - problem.unc[e]) / T) : 1.0;
            if (objective == Objective::expert_count)
                total += problem.weights[e] * (1.0 - keep);
            else
                total += problem.weights[e] *
                         (costs[e % k] * keep + config.c_expert * (1.0 - keep));
        }
        return total;
    };

    const std::size_t theta_n = k * dim + k;
    std::vector<double> g_theta(theta_n), g_gamma(dim + 1);

    double objective_value = 0.0;
    for (int step = 0; step <= config.steps; ++step) {
        problem.refresh(data, state);
        const double u_tilde = problem.solve(epsilon);
        objective_value = eval_objective(u_tilde);
        if (!std::isfinite(objective_value))
            throw Error("training objective is not finite");
        if (step == config.steps) break;

        std::fill(g_theta.begin(), g_theta.end(), 0.0);
        std::fill(g_gamma.begin(), g_gamma.end(), 0.0);

        if (!std::isfinite(u_tilde)) {
            // No expert labels are needed at these parameters. The expert-count
            // objective is already optimal; the cost objective still descends
            // its direct source-cost term.
            if (objective == Objective::expert_count) continue;
        }

        const std::vector<double> grad_u_theta =
            std::isfinite(u_tilde) ? implicit_grad_theta(state, data, loss, u_tilde)
                                   : std::vector<double>(theta_n, 0.0);
        const std::vector<double> grad_u_gamma =
            head && std::isfinite(u_tilde)
                ? implicit_grad_gamma(state, data, loss, u_tilde)
                : std::vector<double>(dim + 1, 0.0);

        double du_coef = 0.0;  // scalar multiplying grad_u_theta
        for (std::size_t i = 0; i < m; ++i) {
            const auto& x = data.points[i].features;
            const double* w = &problem.weights[i * k];
            for (std::size_t j = 0; j < k; ++j) {
                const std::size_t e = i * k + j;
                const double keep =
                    std::isfinite(u_tilde) ? sigmoid((u_tilde - problem.unc[e]) / T) : 1.0;
                const double dkeep = keep * (1.0 - keep);
                double direct, through_u;
                if (objective == Objective::expert_count) {
                    direct = 1.0 - keep;
                    through_u = -dkeep / T;
                } else {
                    direct = costs[j] * keep + config.c_expert * (1.0 - keep);
                    through_u = (costs[j] - config.c_expert) * dkeep / T;
                }
                // d w_j / d theta, folded directly into the gradient.
                for (std::size_t l = 0; l < k; ++l) {
                    const double coef = w[j] * ((l == j ? 1.0 : 0.0) - w[l]) * direct;
                    for (std::size_t f = 0; f < dim; ++f)
                        g_theta[l * dim + f] += coef * x[f];
                    g_theta[k * dim + l] += coef;
                }
                du_coef += w[j] * through_u;
                if (head) {
                    // d keep / d gamma = dkeep/T * (d h_i - d u~)
                    const double c = -w[j] * through_u;  // sign flips for the head term
                    const double dh = problem.heads[i] * (1.0 - problem.heads[i]);
                    for (std::size_t f = 0; f < dim; ++f)
                        g_gamma[f] += c * (dh * x[f] - grad_u_gamma[f]);
                    g_gamma[dim] += c * (dh - grad_u_gamma[dim]);
                }
            }
        }
        for (std::size_t p = 0; p < theta_n; ++p)
            g_theta[p] += du_coef * grad_u_theta[p];

        for (std::size_t p = 0; p < theta_n; ++p) {
            const double v = p < k * dim ? state.theta_w[p] : state.theta_b[p - k * dim];
            const double nv = v - config.learning_rate * g_theta[p];
            if (p < k * dim)
                state.theta_w[p] = nv;
            else
                state.theta_b[p - k * dim] = nv;
        }
        if (head) {
            for (std::size_t f = 0; f < dim; ++f)
                state.gamma_w[f] -= config.learning_rate * g_gamma[f];
            state.gamma_b -= config.learning_rate * g_gamma[dim];
        }
    }

    return TrainResult{std::move(state), objective_value};
}

}  // namespace

TrainResult train_router(const RoutingDataset& data, const LossFn& loss,
                         double epsilon, const RouterConfig& config,
                         [[maybe_unused]] SplitRng& rng) {
    return train_common(data, loss, epsilon, config, Objective::expert_count);
}

TrainResult train_router_cost_sensitive(const RoutingDataset& data, const LossFn& loss,
                                        double epsilon, const RouterConfig& config,
                                        [[maybe_unused]] SplitRng& rng) {
    return train_common(data, loss, epsilon, config, Objective::cost);
}

RoutedOutput route_and_select(const RouterState& state, const RoutingDataset& data) {
    data.validate(/*require_truth=*/false);
    if (data.k() < 2) throw ValidationError("routing needs at least two sources");

    RoutedOutput out;
    out.dataset.points.reserve(data.points.size());
    out.chosen.reserve(data.points.size());
    for (const auto& p : data.points) {
        const std::size_t j = state.select(p.features);
        DataPoint dp;
        dp.id = p.id;
        dp.features = p.features;
        dp.predicted = p.predicted[j];
        dp.uncertainty =
            state.head_enabled ? state.head_uncertainty(p.features) : p.uncertainty[j];
        dp.truth = p.truth;
        out.dataset.points.push_back(std::move(dp));
        out.chosen.push_back(j);
        out.source_cost += data.sources[j].cost;
    }
    return out;
}

std::string RouterState::to_json() const {
    nlohmann::json j;
    j["version"] = 1;
    j["k"] = k_;
    j["dim"] = dim_;
    j["temperature"] = temperature;
    j["head"] = head_enabled;
    j["arrays"]["theta_w"] = theta_w;
    j["arrays"]["theta_b"] = theta_b;
    j["arrays"]["gamma_w"] = gamma_w;
    j["arrays"]["gamma_b"] = std::vector<double>{gamma_b};
    return j.dump(2);
}

RouterState RouterState::from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("bad router checkpoint: ") + e.what());
    }
    if (!j.contains("version") || j["version"].get<int>() != 1)
        throw ParseError("unsupported router checkpoint version");
    RouterState state(j.at("k").get<std::size_t>(), j.at("dim").get<std::size_t>(),
                      j.at("temperature").get<double>(), j.at("head").get<bool>());
    const auto& a = j.at("arrays");
    state.theta_w = a.at("theta_w").get<std::vector<double>>();
    state.theta_b = a.at("theta_b").get<std::vector<double>>();
    state.gamma_w = a.at("gamma_w").get<std::vector<double>>();
    state.gamma_b = a.at("gamma_b").get<std::vector<double>>().at(0);
    if (state.theta_w.size() != state.k() * state.dim() ||
        state.theta_b.size() != state.k() || state.gamma_w.size() != state.dim())
        throw ParseError("router checkpoint arrays have the wrong shape");
    return state;
}

}  // namespace paclab
