#include "paclab/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <numeric>
#include <thread>

#include "paclab/errors.hpp"
#include "paclab/io.hpp"
#include "paclab/oracle.hpp"

namespace paclab {

Method parse_method(const std::string& name) {
    if (name == "pac") return Method::pac;
    if (name == "pac-calibrated") return Method::pac_calibrated;
    if (name == "naive") return Method::naive;
    if (name == "ai-only") return Method::ai_only;
    if (name == "router") return Method::router;
    if (name == "router-cost") return Method::router_cost;
    throw ValidationError("unknown method '" + name + "'");
}

std::string method_name(Method method) {
    switch (method) {
        case Method::pac: return "pac";
        case Method::pac_calibrated: return "pac-calibrated";
        case Method::naive: return "naive";
        case Method::ai_only: return "ai-only";
        case Method::router: return "router";
        case Method::router_cost: return "router-cost";
    }
    throw Error("unreachable method");
}

CostReport compute_cost_metrics(const LabeledOutput& output,
                                const std::vector<double>& per_point_model_cost,
                                double c_expert) {
    const std::size_t n = output.labels.size();
    if (!per_point_model_cost.empty() && per_point_model_cost.size() != n)
        throw ValidationError("model cost vector does not match the output size");
    CostReport report;
    for (std::size_t i = 0; i < n; ++i) {
        if (output.provenance[i] == Provenance::expert)
            report.total += c_expert;
        else if (!per_point_model_cost.empty())
            report.total += per_point_model_cost[i];
    }
    const double full = c_expert * static_cast<double>(n);
    report.save_vs_expert = full > 0.0 ? (full - report.total) / full : 0.0;
    report.save_vs_pipeline = report.total > 0.0
                                  ? (full - report.total) / report.total
                                  : std::numeric_limits<double>::infinity();
    return report;
}

LabeledOutput run_baseline_naive(const Dataset& data, double cutoff,
                                 ExpertOracle& oracle) {
    data.validate();
    const std::size_t before = oracle.distinct_queries();
    LabeledOutput out;
    out.threshold = cutoff;
    out.labels.reserve(data.size());
    out.provenance.reserve(data.size());
    for (const auto& p : data.points) {
        if (p.uncertainty >= cutoff) {
            out.labels.push_back(oracle.query(p.id));
            out.provenance.push_back(Provenance::expert);
        } else {
            out.labels.push_back(p.predicted);
            out.provenance.push_back(Provenance::model);
        }
    }
    out.expert_count = oracle.distinct_queries() - before;
    out.total_cost = oracle.cost_per_query() * static_cast<double>(out.expert_count);
    return out;
}

LabeledOutput run_baseline_ai_only(const Dataset& data) {
    data.validate();
    LabeledOutput out;
    out.threshold = kNoThreshold;
    out.labels.reserve(data.size());
    for (const auto& p : data.points) out.labels.push_back(p.predicted);
    out.provenance.assign(data.size(), Provenance::model);
    return out;
}

namespace {

// Distinct random indices, Fisher-Yates on a prefix.
std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t count,
                                                    SplitRng& rng) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    count = std::min(count, n);
    for (std::size_t i = 0; i < count; ++i)
        std::swap(idx[i], idx[i + rng.next_index(n - i)]);
    idx.resize(count);
    return idx;
}

struct TrialContext {
    const Dataset& data;
    const LossFn& loss;
    const ExperimentSpec& spec;
    const ClusterSet* clusters;
    std::vector<double> per_point_cost;  // model cost per point (routed or flat)
};

TrialRow run_single_trial(const TrialContext& ctx, std::size_t trial) {
    const auto& spec = ctx.spec;
    TrialRow row;
    row.trial = trial;
    row.seed = SplitRng::derive(spec.pac.seed, trial);
    SplitRng rng(row.seed);
    SimulatedOracle oracle(ctx.data, spec.c_expert);

    LabeledOutput out;
    switch (spec.method) {
        case Method::pac:
        case Method::router:
        case Method::router_cost:
            out = run_pac_labeling(ctx.data, ctx.loss, spec.pac, oracle, rng);
            break;
        case Method::naive:
            out = run_baseline_naive(ctx.data, spec.naive_cutoff, oracle);
            break;
        case Method::ai_only:
            out = run_baseline_ai_only(ctx.data);
            break;
        case Method::pac_calibrated: {
            if (!ctx.clusters)
                throw ValidationError("pac-calibrated needs a cluster set");
            const std::size_t m_cal = spec.calib_m ? spec.calib_m : spec.pac.m;
            const auto cal_idx =
                sample_without_replacement(ctx.data.size(), m_cal, rng);

            std::vector<double> cal_u(cal_idx.size());
            std::vector<Label> cal_truth(cal_idx.size()), cal_pred(cal_idx.size());
            std::vector<std::size_t> position(ctx.data.size(), ctx.data.size());
            for (std::size_t s = 0; s < cal_idx.size(); ++s) {
                const auto& p = ctx.data.points[cal_idx[s]];
                cal_u[s] = p.uncertainty;
                cal_truth[s] = oracle.query(p.id);
                cal_pred[s] = p.predicted;
                position[cal_idx[s]] = s;
            }
            ClusterSet sub;
            sub.ids = ctx.clusters->ids;
            sub.members.resize(ctx.clusters->size());
            for (std::size_t c = 0; c < ctx.clusters->size(); ++c)
                for (std::size_t idx : ctx.clusters->members[c])
                    if (position[idx] < ctx.data.size())
                        sub.members[c].push_back(position[idx]);

            const auto calibrated =
                multicalibrate(cal_u, cal_truth, cal_pred, sub, spec.calib_bins,
                               spec.calib_tau, spec.calib_max_iters);

            std::vector<double> all_u(ctx.data.size());
            for (std::size_t i = 0; i < ctx.data.size(); ++i)
                all_u[i] = ctx.data.points[i].uncertainty;
            const auto new_u =
                apply_calibration(calibrated.trace, all_u, *ctx.clusters);

            Dataset adjusted = ctx.data;
            for (std::size_t i = 0; i < adjusted.size(); ++i)
                adjusted.points[i].uncertainty = new_u[i];

            out = run_pac_labeling(adjusted, ctx.loss, spec.pac, oracle, rng);
            // Calibration labels are already paid for; keep them.
            for (std::size_t idx : cal_idx) {
                out.labels[idx] = oracle.query(ctx.data.points[idx].id);
                out.provenance[idx] = Provenance::expert;
            }
            out.expert_count = oracle.distinct_queries();
            break;
        }
    }

    row.threshold = out.threshold;
    row.expert_count = out.expert_count;
    row.realized_error = empirical_error(ctx.data, out.labels, ctx.loss);
    row.budget_save_pct =
        100.0 * (1.0 - static_cast<double>(out.expert_count) /
                           static_cast<double>(ctx.data.size()));
    row.total_cost =
        compute_cost_metrics(out, ctx.per_point_cost, spec.c_expert).total;
    return row;
}

double nearest_rank_quantile(std::vector<double> values, double q) {
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    std::size_t rank = static_cast<std::size_t>(
        std::ceil(q * static_cast<double>(n)));
    rank = std::clamp<std::size_t>(rank, 1, n);
    return values[rank - 1];
}

void write_report_files(const TrialReport& report, const ExperimentSpec& spec) {
    namespace fs = std::filesystem;
    fs::create_directories(spec.out_dir);
    const auto path = [&](const char* name) {
        return (fs::path(spec.out_dir) / name).string();
    };

    std::ofstream trials(path("trials.csv"));
    trials << "trial,seed,threshold,expert_count,realized_error,budget_save_pct,"
              "total_cost\n";
    for (const auto& r : report.trials)
        trials << r.trial << ',' << r.seed << ',' << format_double(r.threshold) << ','
               << r.expert_count << ',' << format_double(r.realized_error) << ','
               << format_double(r.budget_save_pct) << ','
               << format_double(r.total_cost) << "\n";

    std::ofstream summary(path("summary.csv"));
    summary << "method,n,trials,epsilon,alpha,m,budget_save_mean,budget_save_sd,"
               "error_quantile,exceed_fraction,mean_expert_count,mean_total_cost,"
               "cost_save_vs_expert,cost_save_vs_pipeline\n";
    summary << method_name(report.method) << ',' << report.n << ','
            << report.trials.size() << ',' << format_double(spec.pac.epsilon) << ','
            << format_double(spec.pac.alpha) << ',' << spec.pac.m << ','
            << format_double(report.budget_save_mean) << ','
            << format_double(report.budget_save_sd) << ','
            << format_double(report.error_quantile) << ','
            << format_double(report.exceed_fraction) << ','
            << format_double(report.mean_expert_count) << ','
            << format_double(report.mean_total_cost) << ','
            << format_double(report.cost_save_vs_expert) << ','
            << format_double(report.cost_save_vs_pipeline) << "\n";

    // Plot data: realized error vs budget save for a random subsample.
    SplitRng plot_rng(SplitRng::derive(spec.pac.seed, report.trials.size()));
    auto chosen = sample_without_replacement(
        report.trials.size(), std::min(spec.plot_trials, report.trials.size()),
        plot_rng);
    std::sort(chosen.begin(), chosen.end());
    std::ofstream plot(path("plot.csv"));
    plot << "trial,realized_error,budget_save_pct\n";
    for (std::size_t t : chosen)
        plot << t << ',' << format_double(report.trials[t].realized_error) << ','
             << format_double(report.trials[t].budget_save_pct) << "\n";
}

}  // namespace

TrialReport run_experiment(const Dataset& data, const LossFn& loss,
                           const ExperimentSpec& spec, const ClusterSet* clusters,
                           const RoutingDataset* multi,
                           const RoutingDataset* routing_train) {
    if (spec.trials < 1) throw ValidationError("trials must be at least 1");
    if (!data.has_truths() &&
        !(spec.method == Method::router || spec.method == Method::router_cost))
        throw MissingTruthError("experiments need ground truth to audit the error");

    // Router methods: train once on the held-out routing set, then label the
    // routed dataset in every trial.
    Dataset routed_data;
    const Dataset* labeled = &data;
    std::vector<double> per_point_cost;
    if (spec.method == Method::router || spec.method == Method::router_cost) {
        if (!multi || !routing_train)
            throw ValidationError("router methods need multi-model data and a routing set");
        RouterConfig rc = spec.router;
        rc.c_expert = spec.c_expert;
        SplitRng train_rng(rc.seed);
        const TrainResult trained =
            spec.method == Method::router
                ? train_router(*routing_train, loss, spec.pac.epsilon, rc, train_rng)
                : train_router_cost_sensitive(*routing_train, loss, spec.pac.epsilon,
                                              rc, train_rng);
        RoutedOutput routed = route_and_select(trained.state, *multi);
        routed_data = std::move(routed.dataset);
        if (!routed_data.has_truths())
            throw MissingTruthError("experiments need ground truth to audit the error");
        labeled = &routed_data;
        per_point_cost.resize(routed_data.size());
        for (std::size_t i = 0; i < routed_data.size(); ++i)
            per_point_cost[i] = multi->sources[routed.chosen[i]].cost;
        if (!spec.out_dir.empty() && routed_data.has_truths()) {
            std::vector<LossCurve> curves;
            curves.push_back(rank_loss_curve(routed_data, loss, "router"));
            for (std::size_t j = 0; j < multi->k(); ++j) {
                Dataset view;
                for (const auto& p : multi->points) {
                    DataPoint dp;
                    dp.id = p.id;
                    dp.predicted = p.predicted[j];
                    dp.uncertainty = p.uncertainty[j];
                    dp.truth = p.truth;
                    view.points.push_back(std::move(dp));
                }
                curves.push_back(rank_loss_curve(view, loss, multi->sources[j].name));
            }
            std::filesystem::create_directories(spec.out_dir);
            write_loss_curves_csv(
                (std::filesystem::path(spec.out_dir) / "loss_curves.csv").string(),
                curves);
        }
    } else if (spec.model_cost > 0.0) {
        per_point_cost.assign(data.size(), spec.model_cost);
    }
    const TrialContext ctx{*labeled, loss, spec, clusters, std::move(per_point_cost)};

    TrialReport report;
    report.method = spec.method;
    report.n = ctx.data.size();
    report.trials.resize(spec.trials);

    const int jobs = std::max(1, spec.jobs);
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::string failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        while (!failed.load(std::memory_order_relaxed)) {
            const std::size_t t = next.fetch_add(1);
            if (t >= spec.trials) break;
            try {
                report.trials[t] = run_single_trial(ctx, t);
            } catch (const std::exception& e) {
                const std::lock_guard<std::mutex> lock(failure_mutex);
                failed = true;
                failure = "trial " + std::to_string(t) + ": " + e.what();
            }
        }
    };
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (failed) throw Error(failure);

    double save_sum = 0.0, expert_sum = 0.0, cost_sum = 0.0, exceed = 0.0;
    std::vector<double> errors;
    errors.reserve(spec.trials);
    for (const auto& r : report.trials) {
        save_sum += r.budget_save_pct;
        expert_sum += static_cast<double>(r.expert_count);
        cost_sum += r.total_cost;
        errors.push_back(r.realized_error);
        if (r.realized_error > spec.pac.epsilon) exceed += 1.0;
    }
    const double t = static_cast<double>(spec.trials);
    report.budget_save_mean = save_sum / t;
    double var = 0.0;
    for (const auto& r : report.trials) {
        const double d = r.budget_save_pct - report.budget_save_mean;
        var += d * d;
    }
    report.budget_save_sd = spec.trials > 1 ? std::sqrt(var / (t - 1.0)) : 0.0;
    report.error_quantile = nearest_rank_quantile(errors, 1.0 - spec.pac.alpha);
    report.exceed_fraction = exceed / t;
    report.mean_expert_count = expert_sum / t;
    report.mean_total_cost = cost_sum / t;
    const double full = spec.c_expert * static_cast<double>(ctx.data.size());
    report.cost_save_vs_expert =
        full > 0.0 ? (full - report.mean_total_cost) / full : 0.0;
    report.cost_save_vs_pipeline =
        report.mean_total_cost > 0.0
            ? (full - report.mean_total_cost) / report.mean_total_cost
            : std::numeric_limits<double>::infinity();

    if (!spec.out_dir.empty()) write_report_files(report, spec);
    return report;
}

LossCurve rank_loss_curve(const Dataset& data, const LossFn& loss,
                          const std::string& name) {
    data.validate();
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return data.points[a].uncertainty < data.points[b].uncertainty;
    });
    LossCurve curve;
    curve.name = name;
    curve.values.reserve(data.size());
    double acc = 0.0;
    for (std::size_t r = 0; r < order.size(); ++r) {
        const auto& p = data.points[order[r]];
        if (!p.truth)
            throw MissingTruthError("loss curve needs ground truth ('" + p.id + "')");
        acc += loss_eval(loss, *p.truth, p.predicted);
        curve.values.push_back(acc / static_cast<double>(data.size()));
    }
    return curve;
}

void write_loss_curves_csv(const std::string& path,
                           const std::vector<LossCurve>& curves) {
    if (curves.empty()) throw ValidationError("no curves to write");
    const std::size_t n = curves.front().values.size();
    for (const auto& c : curves)
        if (c.values.size() != n)
            throw ValidationError("loss curves must have equal length");
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot open '" + path + "' for writing");
    out << "rank";
    for (const auto& c : curves) out << ',' << c.name;
    out << "\n";
    for (std::size_t r = 0; r < n; ++r) {
        out << (r + 1);
        for (const auto& c : curves) out << ',' << format_double(c.values[r]);
        out << "\n";
    }
}

}  // namespace paclab
