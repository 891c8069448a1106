#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "paclab/experiment.hpp"
#include "paclab/io.hpp"
#include "paclab/labeler.hpp"
#include "paclab/oracle.hpp"
#include "paclab/synth.hpp"

namespace {

using namespace paclab;

struct CommonOpts {
    std::string loss = "zero-one";
    double range_lo = 0.0;
    double range_hi = 1.0;
    double epsilon = 0.05;
    double alpha = 0.05;
    std::size_t m = 0;
    double pi = 0.5;
    std::string bound = "betting";
    std::uint64_t seed = 0;
};

LossFn make_loss(const CommonOpts& opts) {
    if (opts.loss == "zero-one") return LossFn::zero_one();
    if (opts.loss == "squared") return LossFn::squared(opts.range_lo, opts.range_hi);
    throw ValidationError("unknown loss '" + opts.loss + "'");
}

LabelKind label_kind(const CommonOpts& opts) {
    return opts.loss == "squared" ? LabelKind::continuous : LabelKind::discrete;
}

BoundMethod parse_bound(const std::string& name) {
    if (name == "clt") return BoundMethod::clt;
    if (name == "hoeffding") return BoundMethod::hoeffding;
    if (name == "betting") return BoundMethod::betting;
    throw ValidationError("unknown bound method '" + name + "'");
}

PacConfig make_pac(const CommonOpts& opts) {
    PacConfig cfg;
    cfg.epsilon = opts.epsilon;
    cfg.alpha = opts.alpha;
    cfg.m = opts.m;
    cfg.sampling_weights = {opts.pi};
    cfg.bound_method = parse_bound(opts.bound);
    cfg.seed = opts.seed;
    return cfg;
}

void add_common(CLI::App* cmd, CommonOpts& opts, bool with_pac) {
    cmd->add_option("--loss", opts.loss, "Loss kind: zero-one or squared")
        ->check(CLI::IsMember({"zero-one", "squared"}));
    cmd->add_option("--lo", opts.range_lo, "Label range lower end (squared loss)");
    cmd->add_option("--hi", opts.range_hi, "Label range upper end (squared loss)");
    cmd->add_option("--seed", opts.seed, "Master seed");
    if (with_pac) {
        cmd->add_option("--epsilon", opts.epsilon, "Target average labeling error");
        cmd->add_option("--alpha", opts.alpha, "Error probability");
        cmd->add_option("--m", opts.m, "Estimation sample size")->required();
        cmd->add_option("--pi", opts.pi, "Shared sampling weight in (0,1]");
        cmd->add_option("--bound", opts.bound, "Mean upper bound: clt, hoeffding, betting")
            ->check(CLI::IsMember({"clt", "hoeffding", "betting"}));
    }
}

std::vector<double> parse_costs(const std::string& text) {
    std::vector<double> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        const std::size_t pos = text.find(',', start);
        const std::string part =
            pos == std::string::npos ? text.substr(start) : text.substr(start, pos - start);
        try {
            out.push_back(std::stod(part));
        } catch (...) {
            throw ValidationError("bad --costs entry '" + part + "'");
        }
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    return out;
}

int cmd_synth(const std::string& regime_name_str, std::size_t n, std::uint64_t seed,
              const std::string& out, const std::string& clusters_out) {
    SplitRng rng(seed);
    const SynthRegime regime = parse_regime(regime_name_str);
    switch (regime) {
        case SynthRegime::calibrated:
            write_dataset_csv(out, synth_calibrated(n, rng));
            break;
        case SynthRegime::miscalibrated_groups: {
            const GroupedSynth synth = synth_miscalibrated_groups(n, rng);
            write_dataset_csv(out, synth.data);
            if (!clusters_out.empty())
                write_clusters_jsonl(clusters_out, synth.data, synth.clusters);
            break;
        }
        case SynthRegime::complementary_sources:
            write_multi_jsonl(out, synth_complementary_sources(n, rng));
            break;
        case SynthRegime::continuous:
            write_dataset_csv(out, synth_continuous(n, rng));
            break;
    }
    std::cout << "wrote " << out << " (" << regime_name(regime) << ", n=" << n << ")\n";
    return 0;
}

void print_summary(const LabeledOutput& out, std::size_t n) {
    std::printf("threshold      %s\n", format_double(out.threshold).c_str());
    std::printf("expert labels  %zu of %zu (budget save %.2f%%)\n", out.expert_count, n,
                100.0 * (1.0 - static_cast<double>(out.expert_count) /
                                   static_cast<double>(n)));
    std::printf("expert cost    %s\n", format_double(out.total_cost).c_str());
}

int cmd_label(const CommonOpts& opts, const std::string& data_path,
              const std::string& out_path, double c_expert) {
    const Dataset data = read_dataset_csv(data_path, label_kind(opts));
    const LossFn loss = make_loss(opts);
    SimulatedOracle oracle(data, c_expert);
    const LabeledOutput out = run_pac_labeling(data, loss, make_pac(opts), oracle);
    if (!out_path.empty()) write_labeled_csv(out_path, data, out);
    print_summary(out, data.size());
    if (data.has_truths())
        std::printf("realized error %s\n",
                    format_double(empirical_error(data, out.labels, loss)).c_str());
    return 0;
}

struct CalibOpts {
    std::size_t m = 0;  // 0: same as the estimation sample size
    int bins = 3;
    double tau = 0.02;
    int max_iters = 100;
};

int cmd_experiment(const CommonOpts& opts, const std::string& method_str,
                   const std::string& data_path, const std::string& synth_regime,
                   std::size_t synth_n, std::size_t trials, int jobs, double cutoff,
                   const std::string& clusters_path, const std::string& multi_path,
                   const std::string& routing_path, const std::string& costs_str,
                   double temperature, int steps, double lr, bool head,
                   const CalibOpts& calib, std::size_t plot_trials,
                   const std::string& out_dir) {
    const LossFn loss = make_loss(opts);
    ExperimentSpec spec;
    spec.method = parse_method(method_str);
    spec.pac = make_pac(opts);
    spec.trials = trials;
    spec.jobs = jobs;
    spec.naive_cutoff = cutoff;
    spec.plot_trials = plot_trials;
    spec.out_dir = out_dir;
    spec.router.temperature = temperature;
    spec.router.steps = steps;
    spec.router.learning_rate = lr;
    spec.router.uncertainty_head = head;
    spec.router.seed = opts.seed;
    spec.calib_m = calib.m;
    spec.calib_bins = calib.bins;
    spec.calib_tau = calib.tau;
    spec.calib_max_iters = calib.max_iters;

    if (!costs_str.empty()) {
        const auto costs = parse_costs(costs_str);
        spec.c_expert = costs.at(0);
        if (costs.size() > 1) spec.model_cost = costs[1];
    }

    Dataset data;
    RoutingDataset multi, routing;
    const RoutingDataset* multi_ptr = nullptr;
    const RoutingDataset* routing_ptr = nullptr;
    ClusterSet clusters;
    const ClusterSet* clusters_ptr = nullptr;

    const bool router_method =
        spec.method == Method::router || spec.method == Method::router_cost;
    if (router_method) {
        if (multi_path.empty() || routing_path.empty())
            throw ValidationError("router methods need --multi and --routing files");
        multi = read_multi_jsonl(multi_path, label_kind(opts));
        routing = read_multi_jsonl(routing_path, label_kind(opts));
        multi_ptr = &multi;
        routing_ptr = &routing;
        if (!costs_str.empty()) {
            const auto costs = parse_costs(costs_str);
            for (std::size_t j = 0; 1 + j < costs.size() && j < multi.sources.size(); ++j) {
                multi.sources[j].cost = costs[1 + j];
                if (j < routing.sources.size()) routing.sources[j].cost = costs[1 + j];
            }
        }
    } else if (!data_path.empty()) {
        data = read_dataset_csv(data_path, label_kind(opts));
    } else if (!synth_regime.empty()) {
        SplitRng rng(SplitRng::derive(opts.seed, 0x5d47a));
        const SynthRegime regime = parse_regime(synth_regime);
        if (regime == SynthRegime::calibrated) data = synth_calibrated(synth_n, rng);
        else if (regime == SynthRegime::continuous) data = synth_continuous(synth_n, rng);
        else if (regime == SynthRegime::miscalibrated_groups) {
            GroupedSynth g = synth_miscalibrated_groups(synth_n, rng);
            data = std::move(g.data);
            clusters = std::move(g.clusters);
            clusters_ptr = &clusters;
        } else {
            throw ValidationError("use --multi/--routing for multi-source experiments");
        }
    } else {
        throw ValidationError("experiment needs --data, --synth or --multi");
    }

    if (!clusters_path.empty()) {
        clusters = read_clusters_jsonl(clusters_path, data);
        clusters_ptr = &clusters;
    }

    const TrialReport report =
        run_experiment(data, loss, spec, clusters_ptr, multi_ptr, routing_ptr);

    std::printf("method            %s\n", method_name(report.method).c_str());
    std::printf("trials            %zu\n", report.trials.size());
    std::printf("budget save       (%.2f +- %.2f)%%\n", report.budget_save_mean,
                report.budget_save_sd);
    std::printf("error quantile    %.4f (1-alpha rank)\n", report.error_quantile);
    std::printf("exceed fraction   %.4f (target <= %.4f)\n", report.exceed_fraction,
                spec.pac.alpha);
    std::printf("mean expert count %.1f\n", report.mean_expert_count);
    std::printf("mean total cost   %.3f\n", report.mean_total_cost);
    std::printf("cost save         %.2f%% of all-expert, %.2f%% of pipeline\n",
                100.0 * report.cost_save_vs_expert,
                100.0 * report.cost_save_vs_pipeline);
    if (!out_dir.empty()) std::printf("reports under     %s\n", out_dir.c_str());
    return 0;
}

int cmd_calibrate(const CommonOpts& opts, const std::string& data_path,
                  const std::string& clusters_path, std::size_t m_cal, int bins,
                  double tau, int max_iters, const std::string& out_dir) {
    const Dataset data = read_dataset_csv(data_path, label_kind(opts));
    const ClusterSet clusters = read_clusters_jsonl(clusters_path, data);
    SimulatedOracle oracle(data);
    SplitRng rng(opts.seed);

    std::vector<std::size_t> idx(data.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    m_cal = std::min(m_cal, data.size());
    for (std::size_t i = 0; i < m_cal; ++i)
        std::swap(idx[i], idx[i + rng.next_index(data.size() - i)]);
    idx.resize(m_cal);

    std::vector<double> cal_u(m_cal);
    std::vector<Label> cal_truth(m_cal), cal_pred(m_cal);
    std::vector<std::size_t> position(data.size(), data.size());
    for (std::size_t s = 0; s < m_cal; ++s) {
        const auto& p = data.points[idx[s]];
        cal_u[s] = p.uncertainty;
        cal_truth[s] = oracle.query(p.id);
        cal_pred[s] = p.predicted;
        position[idx[s]] = s;
    }
    ClusterSet sub;
    sub.ids = clusters.ids;
    sub.members.resize(clusters.size());
    for (std::size_t c = 0; c < clusters.size(); ++c)
        for (std::size_t i : clusters.members[c])
            if (position[i] < data.size()) sub.members[c].push_back(position[i]);

    const CalibrationResult result =
        multicalibrate(cal_u, cal_truth, cal_pred, sub, bins, tau, max_iters);
    std::vector<double> all_u(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) all_u[i] = data.points[i].uncertainty;
    const auto new_u = apply_calibration(result.trace, all_u, clusters);

    Dataset adjusted = data;
    for (std::size_t i = 0; i < data.size(); ++i)
        adjusted.points[i].uncertainty = new_u[i];

    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    write_dataset_csv((fs::path(out_dir) / "calibrated.csv").string(), adjusted);
    write_text_file((fs::path(out_dir) / "trace.json").string(),
                    trace_to_json(result.trace));
    std::printf("%zu updates, %s; calibration labels used: %zu\n",
                result.trace.updates.size(),
                result.trace.converged ? "converged" : "hit max iterations", m_cal);
    return 0;
}

int cmd_route_train(const CommonOpts& opts, const std::string& data_path,
                    double temperature, int steps, double lr, bool head,
                    bool cost_sensitive, const std::string& costs_str,
                    const std::string& out_path) {
    RoutingDataset routing = read_multi_jsonl(data_path, label_kind(opts));
    RouterConfig config;
    config.temperature = temperature;
    config.steps = steps;
    config.learning_rate = lr;
    config.uncertainty_head = head;
    config.seed = opts.seed;
    if (!costs_str.empty()) {
        const auto costs = parse_costs(costs_str);
        config.c_expert = costs.at(0);
        for (std::size_t j = 0; 1 + j < costs.size() && j < routing.sources.size(); ++j)
            routing.sources[j].cost = costs[1 + j];
    }
    const LossFn loss = make_loss(opts);
    SplitRng rng(config.seed);
    const TrainResult result =
        cost_sensitive
            ? train_router_cost_sensitive(routing, loss, opts.epsilon, config, rng)
            : train_router(routing, loss, opts.epsilon, config, rng);
    save_router(out_path, result.state);
    std::printf("trained %s router, final objective %.6f, checkpoint %s\n",
                cost_sensitive ? "cost-sensitive" : "expert-count",
                result.objective, out_path.c_str());
    return 0;
}

int cmd_route_label(const CommonOpts& opts, const std::string& data_path,
                    const std::string& router_path, const std::string& out_path) {
    const RoutingDataset multi = read_multi_jsonl(data_path, label_kind(opts));
    const RouterState state = load_router(router_path);
    const RoutedOutput routed = route_and_select(state, multi);
    write_dataset_csv(out_path, routed.dataset);
    std::printf("routed %zu points, source cost %s, wrote %s\n",
                routed.dataset.size(), format_double(routed.source_cost).c_str(),
                out_path.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"PAC labeling: expert/model dataset labeling with error guarantees"};
    app.require_subcommand(1);

    CommonOpts opts;

    // synth
    auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
    std::string synth_regime_name = "calibrated", synth_out = "synth.csv",
                synth_clusters_out;
    std::size_t synth_n = 1000;
    synth->add_option("--regime", synth_regime_name,
                      "calibrated, miscalibrated-groups, complementary-sources, continuous");
    synth->add_option("--n", synth_n, "Number of points");
    synth->add_option("--out", synth_out, "Output file (CSV or JSONL)")->required();
    synth->add_option("--clusters-out", synth_clusters_out,
                      "Cluster JSONL (miscalibrated-groups only)");
    synth->add_option("--seed", opts.seed, "Master seed");

    // label
    auto* label = app.add_subcommand("label", "One labeling run on a dataset");
    std::string label_data, label_out;
    double label_c_expert = 1.0;
    label->add_option("--data", label_data, "Input CSV")->required();
    label->add_option("--out", label_out, "Labeled output CSV");
    label->add_option("--c-expert", label_c_expert, "Cost per expert label");
    add_common(label, opts, true);

    // experiment
    auto* experiment = app.add_subcommand("experiment", "Repeated-trial evaluation");
    std::string exp_method = "pac", exp_data, exp_synth, exp_clusters, exp_multi,
                exp_routing, exp_costs, exp_out;
    std::size_t exp_n = 2000, exp_trials = 1000, exp_plot = 50;
    int exp_jobs = 1, exp_steps = 500;
    double exp_cutoff = 0.05, exp_temperature = 0.0, exp_lr = 0.05;
    bool exp_head = false;
    experiment->add_option("--method", exp_method,
                           "pac, pac-calibrated, naive, ai-only, router, router-cost");
    experiment->add_option("--data", exp_data, "Single-model CSV");
    experiment->add_option("--synth", exp_synth, "Synthetic regime instead of --data");
    experiment->add_option("--n", exp_n, "Synthetic dataset size");
    experiment->add_option("--trials", exp_trials, "Number of trials");
    experiment->add_option("--jobs", exp_jobs, "Concurrent trial workers");
    experiment->add_option("--cutoff", exp_cutoff, "Naive baseline cutoff");
    experiment->add_option("--clusters", exp_clusters, "Cluster JSONL (pac-calibrated)");
    experiment->add_option("--multi", exp_multi, "Multi-model JSONL to label (router)");
    experiment->add_option("--routing", exp_routing, "Routing training JSONL (router)");
    experiment->add_option("--costs", exp_costs,
                           "c_expert[,source costs...] e.g. 1,0.25,0.075");
    experiment->add_option("--temperature", exp_temperature, "Router sigmoid temperature");
    experiment->add_option("--steps", exp_steps, "Router training steps");
    experiment->add_option("--lr", exp_lr, "Router learning rate");
    experiment->add_flag("--head", exp_head, "Train the uncertainty head");
    CalibOpts exp_calib;
    experiment->add_option("--calib-m", exp_calib.m,
                           "Calibration subset size (pac-calibrated; 0 = --m)");
    experiment->add_option("--calib-bins", exp_calib.bins, "Calibration bins");
    experiment->add_option("--calib-tau", exp_calib.tau, "Calibration tolerance");
    experiment->add_option("--plot-trials", exp_plot, "Trials in the plot file");
    experiment->add_option("--out", exp_out, "Report directory");
    add_common(experiment, opts, true);

    // calibrate
    auto* calibrate = app.add_subcommand("calibrate", "Multicalibrate uncertainties");
    std::string cal_data, cal_clusters, cal_out = "calibration";
    std::size_t cal_m = 300;
    int cal_bins = 3, cal_max_iters = 100;
    double cal_tau = 0.02;
    calibrate->add_option("--data", cal_data, "Input CSV with ground truth")->required();
    calibrate->add_option("--clusters", cal_clusters, "Cluster JSONL")->required();
    calibrate->add_option("--m", cal_m, "Calibration subset size");
    calibrate->add_option("--bins", cal_bins, "Number of bins");
    calibrate->add_option("--tau", cal_tau, "Cell tolerance");
    calibrate->add_option("--max-iters", cal_max_iters, "Sweep cap");
    calibrate->add_option("--out", cal_out, "Output directory");
    add_common(calibrate, opts, false);

    // route-train
    auto* route_train = app.add_subcommand("route-train", "Train a router");
    std::string rt_data, rt_costs, rt_out = "router.json";
    double rt_temperature = 0.0, rt_lr = 0.05;
    int rt_steps = 500;
    bool rt_head = false, rt_cost_sensitive = false;
    route_train->add_option("--data", rt_data, "Routing JSONL with ground truth")
        ->required();
    route_train->add_option("--temperature", rt_temperature, "Sigmoid temperature");
    route_train->add_option("--steps", rt_steps, "Training steps");
    route_train->add_option("--lr", rt_lr, "Learning rate");
    route_train->add_flag("--head", rt_head, "Train the uncertainty head");
    route_train->add_flag("--cost-sensitive", rt_cost_sensitive,
                          "Descend the cost objective");
    route_train->add_option("--costs", rt_costs, "c_expert[,source costs...]");
    route_train->add_option("--epsilon", opts.epsilon, "Target average labeling error");
    route_train->add_option("--out", rt_out, "Checkpoint path");
    add_common(route_train, opts, false);

    // route-label
    auto* route_label = app.add_subcommand("route-label", "Apply a trained router");
    std::string rl_data, rl_router, rl_out = "routed.csv";
    route_label->add_option("--data", rl_data, "Multi-model JSONL")->required();
    route_label->add_option("--router", rl_router, "Checkpoint path")->required();
    route_label->add_option("--out", rl_out, "Routed single-model CSV");
    add_common(route_label, opts, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        app.exit(e);
        return 2;
    }

    if (const char* env_seed = std::getenv("PAC_LABEL_SEED")) {
        try {
            opts.seed = std::stoull(env_seed);
        } catch (...) {
            std::cerr << "PAC_LABEL_SEED is not an integer\n";
            return 2;
        }
    }

    try {
        if (synth->parsed())
            return cmd_synth(synth_regime_name, synth_n, opts.seed, synth_out,
                             synth_clusters_out);
        if (label->parsed()) return cmd_label(opts, label_data, label_out, label_c_expert);
        if (experiment->parsed())
            return cmd_experiment(opts, exp_method, exp_data, exp_synth, exp_n,
                                  exp_trials, exp_jobs, exp_cutoff, exp_clusters,
                                  exp_multi, exp_routing, exp_costs, exp_temperature,
                                  exp_steps, exp_lr, exp_head, exp_calib, exp_plot,
                                  exp_out);
        if (calibrate->parsed())
            return cmd_calibrate(opts, cal_data, cal_clusters, cal_m, cal_bins, cal_tau,
                                 cal_max_iters, cal_out);
        if (route_train->parsed())
            return cmd_route_train(opts, rt_data, rt_temperature, rt_steps, rt_lr,
                                   rt_head, rt_cost_sensitive, rt_costs, rt_out);
        if (route_label->parsed())
            return cmd_route_label(opts, rl_data, rl_router, rl_out);
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
