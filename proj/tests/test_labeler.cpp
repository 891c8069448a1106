#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "paclab/labeler.hpp"
#include "paclab/synth.hpp"

using namespace paclab;

namespace {

// n points with the given uncertainties; predictions wrong where indicated.
Dataset toy_dataset(const std::vector<double>& u, const std::vector<int>& wrong) {
    Dataset data;
    for (std::size_t i = 0; i < u.size(); ++i) {
        DataPoint p;
        p.id = "p" + std::to_string(i);
        p.uncertainty = u[i];
        p.truth = Label("a");
        p.predicted = wrong[i] ? Label("b") : Label("a");
        data.points.push_back(std::move(p));
    }
    return data;
}

double exact_mean(const BoundedSample& s, double) {
    double total = 0.0;
    for (double v : s.values) total += v;
    return total / static_cast<double>(s.values.size());
}

// Straight-line reimplementation of the curve + threshold rule: for every
// unique dataset uncertainty, average the masked weighted losses over all
// draws and pick the first strict crossing.
double brute_force_threshold(const EstimationSample& sample, const Dataset& data,
                             const PacConfig& config, const MeanUbFn& ub) {
    std::vector<double> breakpoints;
    for (const auto& p : data.points) breakpoints.push_back(p.uncertainty);
    std::sort(breakpoints.begin(), breakpoints.end());
    breakpoints.erase(std::unique(breakpoints.begin(), breakpoints.end()),
                      breakpoints.end());
    double min_pi = 1.0;
    for (std::size_t i = 0; i < data.size(); ++i)
        min_pi = std::min(min_pi, config.weight(i));
    for (double u : breakpoints) {
        BoundedSample masked;
        masked.support_max = 1.0 / min_pi;  // zero-one loss
        for (const auto& d : sample.draws)
            masked.values.push_back(
                d.included && d.uncertainty <= u ? d.loss / d.weight : 0.0);
        if (ub(masked, config.alpha) > config.epsilon) return u;
    }
    return kNoThreshold;
}

}  // namespace

TEST_SUITE("labeler") {

TEST_CASE("estimation sample with pi = 1 includes every draw") {
    SplitRng gen(3);
    Dataset data = synth_calibrated(50, gen);
    PacConfig cfg;
    cfg.m = 30;
    cfg.sampling_weights = {1.0};
    SimulatedOracle oracle(data);
    SplitRng rng(1);
    const auto sample = draw_estimation_sample(data, LossFn::zero_one(), cfg, oracle, rng);
    REQUIRE(sample.draws.size() == 30);
    std::set<std::size_t> distinct;
    for (const auto& d : sample.draws) {
        CHECK(d.included);
        distinct.insert(d.index);
    }
    CHECK(oracle.distinct_queries() == distinct.size());
    CHECK(oracle.distinct_queries() <= 30);
}

TEST_CASE("inclusion count concentrates at m * p") {
    SplitRng gen(5);
    Dataset data = synth_calibrated(40, gen);
    const double p = 0.3;
    const std::size_t m = 40, seeds = 1000;
    PacConfig cfg;
    cfg.m = m;
    cfg.sampling_weights = {p};
    double total_included = 0.0;
    for (std::size_t s = 0; s < seeds; ++s) {
        SimulatedOracle oracle(data);
        SplitRng rng(SplitRng::derive(42, s));
        const auto sample =
            draw_estimation_sample(data, LossFn::zero_one(), cfg, oracle, rng);
        for (const auto& d : sample.draws) total_included += d.included ? 1.0 : 0.0;
    }
    const double mean_count = total_included / static_cast<double>(seeds);
    const double expect = static_cast<double>(m) * p;
    const double slack =
        3.0 * std::sqrt(static_cast<double>(m) * p * (1 - p) / static_cast<double>(seeds));
    CHECK(std::abs(mean_count - expect) <= slack);
}

TEST_CASE("estimation sample is deterministic given the seed") {
    SplitRng gen(7);
    Dataset data = synth_calibrated(30, gen);
    PacConfig cfg;
    cfg.m = 25;
    const auto run = [&] {
        SimulatedOracle oracle(data);
        SplitRng rng(99);
        return draw_estimation_sample(data, LossFn::zero_one(), cfg, oracle, rng);
    };
    const auto a = run(), b = run();
    REQUIRE(a.draws.size() == b.draws.size());
    for (std::size_t j = 0; j < a.draws.size(); ++j) {
        CHECK(a.draws[j].index == b.draws[j].index);
        CHECK(a.draws[j].included == b.draws[j].included);
        CHECK(a.draws[j].loss == b.draws[j].loss);
    }
}

TEST_CASE("curve is identically zero when every observed loss is zero") {
    std::vector<double> u{0.1, 0.4, 0.7, 0.9};
    Dataset data = toy_dataset(u, {0, 0, 0, 0});
    PacConfig cfg;
    cfg.m = 4;
    cfg.sampling_weights = {1.0};
    cfg.bound_method = BoundMethod::clt;
    SimulatedOracle oracle(data);
    SplitRng rng(1);
    const auto sample = draw_estimation_sample(data, LossFn::zero_one(), cfg, oracle, rng);
    const auto curve = compute_lub_curve(sample, data, LossFn::zero_one(), cfg);
    for (double b : curve.bounds) CHECK(b == 0.0);
}

TEST_CASE("curve matches brute-force masked means") {
    Dataset data = toy_dataset({0.1, 0.2, 0.3, 0.4}, {1, 1, 0, 0});
    PacConfig cfg;
    cfg.m = 4;
    cfg.sampling_weights = {1.0};

    EstimationSample sample;
    const double losses[] = {1.0, 1.0, 0.0, 0.0};
    const double uncs[] = {0.1, 0.2, 0.3, 0.4};
    for (std::size_t j = 0; j < 4; ++j)
        sample.draws.push_back({j, true, 1.0, losses[j], uncs[j]});

    const auto curve = compute_lub_curve(sample, data, LossFn::zero_one(), cfg, exact_mean);
    REQUIRE(curve.breakpoints.size() == 4);
    CHECK(curve.bounds[0] == doctest::Approx(0.25));
    CHECK(curve.bounds[1] == doctest::Approx(0.5));
    CHECK(curve.bounds[2] == doctest::Approx(0.5));
    CHECK(curve.bounds[3] == doctest::Approx(0.5));
}

TEST_CASE("exact-mean curve is nondecreasing in u") {
    SplitRng gen(11);
    Dataset data = synth_calibrated(60, gen);
    PacConfig cfg;
    cfg.m = 40;
    SimulatedOracle oracle(data);
    SplitRng rng(2);
    const auto sample = draw_estimation_sample(data, LossFn::zero_one(), cfg, oracle, rng);
    const auto curve = compute_lub_curve(sample, data, LossFn::zero_one(), cfg, exact_mean);
    for (std::size_t i = 1; i < curve.bounds.size(); ++i)
        CHECK(curve.bounds[i] >= curve.bounds[i - 1]);
}

TEST_CASE("threshold selection crossings") {
    LubCurve curve;
    curve.breakpoints = {0.1, 0.2, 0.3, 0.4};
    curve.bounds = {0.0, 0.0, 0.2, 0.3};
    CHECK(select_threshold(curve, 0.1) == doctest::Approx(0.3));
    CHECK(select_threshold(curve, 0.5) == kNoThreshold);
    CHECK(select_threshold(curve, -1.0) == doctest::Approx(0.1));
    // Strict inequality: a bound exactly at epsilon does not trigger.
    CHECK(select_threshold(curve, 0.3) == kNoThreshold);
    CHECK(select_threshold(curve, 0.2) == doctest::Approx(0.4));
}

TEST_CASE("epsilon at the loss cap keeps only estimation labels") {
    SplitRng gen(13);
    Dataset data = synth_calibrated(40, gen);
    PacConfig cfg;
    cfg.m = 20;
    cfg.sampling_weights = {1.0};
    cfg.epsilon = 2.5;  // above any reachable bound at pi = 1
    cfg.bound_method = BoundMethod::clt;
    SimulatedOracle oracle(data);
    SplitRng rng(3);
    const auto out = run_pac_labeling(data, LossFn::zero_one(), cfg, oracle, rng);
    CHECK(out.threshold == kNoThreshold);
    CHECK(out.expert_count == oracle.distinct_queries());
    CHECK(out.expert_count <= 20);
    std::size_t expert_provenance = 0;
    for (auto prov : out.provenance)
        if (prov == Provenance::expert) ++expert_provenance;
    CHECK(expert_provenance >= out.expert_count);  // duplicates collapse in the count
}

TEST_CASE("all-wrong predictions drive the threshold to the smallest uncertainty") {
    SplitRng gen(17);
    std::vector<double> u;
    std::vector<int> wrong;
    for (int i = 0; i < 20; ++i) {
        u.push_back(gen.next_double());
        wrong.push_back(1);
    }
    Dataset data = toy_dataset(u, wrong);
    PacConfig cfg;
    cfg.m = 800;
    cfg.sampling_weights = {1.0};
    cfg.epsilon = 0.05;
    cfg.bound_method = BoundMethod::betting;
    cfg.seed = 5;
    SimulatedOracle oracle(data);
    SplitRng rng(cfg.seed);
    const auto sample = draw_estimation_sample(data, LossFn::zero_one(), cfg, oracle, rng);

    const MeanUbFn betting_ub = [&](const BoundedSample& s, double alpha) {
        return mean_ub_betting(s, alpha, cfg.betting_grid);
    };
    const auto curve = compute_lub_curve(sample, data, LossFn::zero_one(), cfg, betting_ub);
    const double u_hat = select_threshold(curve, cfg.epsilon);
    CHECK(u_hat == brute_force_threshold(sample, data, cfg, betting_ub));
    CHECK(u_hat == *std::min_element(u.begin(), u.end()));

    SimulatedOracle oracle2(data);
    SplitRng rng2(cfg.seed);
    const auto out = run_pac_labeling(data, LossFn::zero_one(), cfg, oracle2, rng2);
    CHECK(out.threshold == u_hat);
    CHECK(out.expert_count == 20);
    CHECK(empirical_error(data, out.labels, LossFn::zero_one()) == 0.0);
}

TEST_CASE("curve path agrees with brute force on random instances") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        SplitRng gen(SplitRng::derive(600, seed));
        Dataset data = synth_calibrated(25, gen);
        PacConfig cfg;
        cfg.m = 40;
        cfg.sampling_weights = {0.7};
        cfg.epsilon = 0.03 + 0.1 * gen.next_double();
        SimulatedOracle oracle(data);
        SplitRng rng(seed);
        const auto sample =
            draw_estimation_sample(data, LossFn::zero_one(), cfg, oracle, rng);
        const auto curve =
            compute_lub_curve(sample, data, LossFn::zero_one(), cfg, exact_mean);
        CHECK(select_threshold(curve, cfg.epsilon) ==
              brute_force_threshold(sample, data, cfg, exact_mean));
    }
}

TEST_CASE("pac labeling is deterministic") {
    SplitRng gen(23);
    Dataset data = synth_calibrated(120, gen);
    PacConfig cfg;
    cfg.m = 60;
    cfg.seed = 77;
    const auto run = [&] {
        SimulatedOracle oracle(data);
        return run_pac_labeling(data, LossFn::zero_one(), cfg, oracle);
    };
    const auto a = run(), b = run();
    CHECK(a.threshold == b.threshold);
    CHECK(a.expert_count == b.expert_count);
    REQUIRE(a.labels.size() == b.labels.size());
    for (std::size_t i = 0; i < a.labels.size(); ++i) {
        CHECK(a.labels[i] == b.labels[i]);
        CHECK((a.provenance[i] == b.provenance[i]));
    }
}

TEST_CASE("expert provenance matches oracle queries") {
    SplitRng gen(29);
    Dataset data = synth_calibrated(100, gen);
    PacConfig cfg;
    cfg.m = 50;
    cfg.epsilon = 0.1;
    SimulatedOracle oracle(data);
    SplitRng rng(4);
    const auto out = run_pac_labeling(data, LossFn::zero_one(), cfg, oracle, rng);
    std::set<std::string> expert_ids;
    for (std::size_t i = 0; i < data.size(); ++i)
        if (out.provenance[i] == Provenance::expert) expert_ids.insert(data.points[i].id);
    CHECK(expert_ids.size() == out.expert_count);
    CHECK(out.expert_count == oracle.distinct_queries());
    // Expert-labeled points carry the oracle's answer.
    for (std::size_t i = 0; i < data.size(); ++i)
        if (out.provenance[i] == Provenance::expert)
            CHECK(out.labels[i] == *data.points[i].truth);
}

TEST_CASE("smaller epsilon never decreases the expert count") {
    SplitRng gen(31);
    Dataset data = synth_calibrated(200, gen);
    std::size_t prev = data.size() + 1;
    for (double eps : {0.02, 0.05, 0.1, 0.2}) {
        PacConfig cfg;
        cfg.m = 80;
        cfg.sampling_weights = {1.0};
        cfg.epsilon = eps;
        cfg.seed = 12;
        SimulatedOracle oracle(data);
        const auto out = run_pac_labeling(data, LossFn::zero_one(), cfg, oracle);
        CHECK(out.expert_count <= prev);
        prev = out.expert_count;
    }
}

TEST_CASE("perfect model gives zero realized error at any threshold") {
    std::vector<double> u;
    SplitRng gen(37);
    for (int i = 0; i < 50; ++i) u.push_back(gen.next_double());
    Dataset data = toy_dataset(u, std::vector<int>(50, 0));
    for (double eps : {0.01, 0.5}) {
        PacConfig cfg;
        cfg.m = 30;
        cfg.epsilon = eps;
        SimulatedOracle oracle(data);
        const auto out = run_pac_labeling(data, LossFn::zero_one(), cfg, oracle);
        CHECK(empirical_error(data, out.labels, LossFn::zero_one()) == 0.0);
    }
}

TEST_CASE("threshold safety: u_hat under the oracle threshold keeps the error small") {
    SplitRng gen(41);
    Dataset data = synth_calibrated(400, gen);
    const LossFn loss = LossFn::zero_one();

    // True oracle threshold from the hidden losses.
    std::vector<std::pair<double, double>> pts;  // (u, loss)
    for (const auto& p : data.points)
        pts.emplace_back(p.uncertainty, loss_eval(loss, *p.truth, p.predicted));
    std::sort(pts.begin(), pts.end());
    const double epsilon = 0.05;
    double u_star = kNoThreshold, acc = 0.0;
    for (const auto& [u, l] : pts) {
        acc += l / static_cast<double>(pts.size());
        if (acc > epsilon) {
            u_star = u;
            break;
        }
    }

    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        PacConfig cfg;
        cfg.m = 150;
        cfg.epsilon = epsilon;
        cfg.seed = seed;
        SimulatedOracle oracle(data);
        const auto out = run_pac_labeling(data, loss, cfg, oracle);
        if (out.threshold <= u_star)
            CHECK(empirical_error(data, out.labels, loss) <= epsilon);
    }
}

TEST_CASE("coverage over repeated seeds") {
    SplitRng gen(43);
    Dataset data = synth_calibrated(500, gen);
    PacConfig cfg;
    cfg.m = 150;
    cfg.sampling_weights = {1.0};
    cfg.epsilon = 0.05;
    cfg.alpha = 0.05;
    cfg.bound_method = BoundMethod::betting;
    const std::size_t seeds = 100;
    std::size_t exceed = 0;
    for (std::size_t s = 0; s < seeds; ++s) {
        cfg.seed = SplitRng::derive(77, s);
        SimulatedOracle oracle(data);
        const auto out = run_pac_labeling(data, LossFn::zero_one(), cfg, oracle);
        if (empirical_error(data, out.labels, LossFn::zero_one()) > cfg.epsilon) ++exceed;
    }
    const double slack = 3.0 * std::sqrt(0.05 * 0.95 / static_cast<double>(seeds));
    CHECK(static_cast<double>(exceed) / static_cast<double>(seeds) <= 0.05 + slack);
}

}  // TEST_SUITE
