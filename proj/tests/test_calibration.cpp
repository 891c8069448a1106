#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "paclab/calibration.hpp"
#include "paclab/errors.hpp"
#include "paclab/rng.hpp"

using namespace paclab;

namespace {

std::vector<Label> tokens(const std::vector<int>& wrong) {
    std::vector<Label> out;
    for (int w : wrong) out.push_back(Label(w ? "b" : "a"));
    return out;
}

}  // namespace

TEST_SUITE("calibration") {

TEST_CASE("binning is total over the reals") {
    CHECK(calibration_bin(-0.3, 3) == 1);
    CHECK(calibration_bin(0.0, 3) == 1);
    CHECK(calibration_bin(0.25, 3) == 1);
    CHECK(calibration_bin(0.65, 3) == 2);
    CHECK(calibration_bin(0.99, 3) == 3);
    CHECK(calibration_bin(1.0, 3) == 3);
    CHECK(calibration_bin(1.7, 3) == 3);
    CHECK(calibration_bin(0.5, 1) == 1);
}

TEST_CASE("single cell correction in one sweep") {
    // One cluster, one bin, all uncertainties 0.2, half the predictions wrong.
    std::vector<double> u(10, 0.2);
    std::vector<int> wrong(10, 0);
    for (int i = 0; i < 5; ++i) wrong[i] = 1;
    ClusterSet clusters;
    clusters.ids = {"all"};
    clusters.members = {{0, 1, 2, 3, 4, 5, 6, 7, 8, 9}};

    const auto result = multicalibrate(u, tokens(wrong), tokens(std::vector<int>(10, 0)),
                                       clusters, 1, 0.02, 100);
    CHECK(result.trace.converged);
    REQUIRE(result.trace.updates.size() == 1);
    CHECK(result.trace.updates[0].delta == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(result.trace.updates[0].bin == 1);
    for (double v : result.uncertainties) CHECK(v == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("tolerance at or above one suppresses every update") {
    std::vector<double> u{0.1, 0.9, 0.4};
    std::vector<int> wrong{1, 0, 1};
    ClusterSet clusters;
    clusters.ids = {"all"};
    clusters.members = {{0, 1, 2}};
    const auto result = multicalibrate(u, tokens(wrong), tokens({0, 0, 0}), clusters, 3,
                                       1.0, 100);
    CHECK(result.trace.updates.empty());
    CHECK(result.trace.converged);
    for (std::size_t i = 0; i < u.size(); ++i) CHECK(result.uncertainties[i] == u[i]);
}

TEST_CASE("max_iters exhaustion is flagged") {
    std::vector<double> u(6, 0.2);
    std::vector<int> wrong(6, 1);
    ClusterSet clusters;
    clusters.ids = {"all"};
    clusters.members = {{0, 1, 2, 3, 4, 5}};
    // One sweep applies the update but never gets to verify quiescence.
    const auto result =
        multicalibrate(u, tokens(wrong), tokens(std::vector<int>(6, 0)), clusters, 1,
                       0.02, 1);
    CHECK_FALSE(result.trace.converged);
    CHECK(result.trace.updates.size() == 1);
}

TEST_CASE("non-empty cells settle within tolerance after convergence") {
    SplitRng rng(51);
    const std::size_t m = 120;
    std::vector<double> u(m);
    std::vector<int> wrong(m);
    for (std::size_t i = 0; i < m; ++i) {
        u[i] = rng.next_double();
        wrong[i] = rng.bernoulli(0.5) ? 1 : 0;
    }
    // Overlapping clusters.
    ClusterSet clusters;
    clusters.ids = {"even", "low", "all"};
    clusters.members.resize(3);
    for (std::size_t i = 0; i < m; ++i) {
        if (i % 2 == 0) clusters.members[0].push_back(i);
        if (u[i] < 0.6) clusters.members[1].push_back(i);
        clusters.members[2].push_back(i);
    }
    const int bins = 3;
    const double tau = 0.02;
    const auto result = multicalibrate(u, tokens(wrong), tokens(std::vector<int>(m, 0)),
                                       clusters, bins, tau, 200);
    if (result.trace.converged) {
        // Residual check on the unclamped trajectory: replay without clamping.
        std::vector<double> current = u;
        for (const auto& up : result.trace.updates) {
            std::size_t c = 0;
            while (clusters.ids[c] != up.cluster_id) ++c;
            for (std::size_t idx : clusters.members[c])
                if (calibration_bin(current[idx], bins) == up.bin) current[idx] += up.delta;
        }
        for (std::size_t c = 0; c < clusters.size(); ++c) {
            for (int j = 1; j <= bins; ++j) {
                double delta = 0.0;
                std::size_t count = 0;
                for (std::size_t idx : clusters.members[c]) {
                    if (calibration_bin(current[idx], bins) != j) continue;
                    delta += wrong[idx] - current[idx];
                    ++count;
                }
                if (count > 0) CHECK(std::abs(delta / count) <= tau + 1e-12);
            }
        }
    }
}

TEST_CASE("five disjoint clusters converge with three bins") {
    SplitRng rng(59);
    const std::size_t m = 250;
    std::vector<double> u(m);
    std::vector<int> wrong(m);
    ClusterSet clusters;
    clusters.members.resize(5);
    for (std::size_t c = 0; c < 5; ++c) clusters.ids.push_back("src" + std::to_string(c));
    for (std::size_t i = 0; i < m; ++i) {
        const std::size_t c = i % 5;
        clusters.members[c].push_back(i);
        // Each source has its own wrong rate and its own uncertainty bias.
        const double rate = 0.1 + 0.15 * static_cast<double>(c);
        wrong[i] = rng.bernoulli(rate) ? 1 : 0;
        u[i] = std::clamp(rate + rng.uniform(-0.3, 0.3), 0.0, 0.999);
    }
    const auto result = multicalibrate(u, tokens(wrong), tokens(std::vector<int>(m, 0)),
                                       clusters, 3, 0.02, 100);
    CHECK(result.trace.converged);
    CHECK(!result.trace.updates.empty());
    for (double v : result.uncertainties) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
}

TEST_CASE("empty trace replay is the identity") {
    CalibrationTrace trace;
    trace.bins = 3;
    ClusterSet clusters;
    clusters.ids = {"c"};
    clusters.members = {{0, 1}};
    const auto out = apply_calibration(trace, {0.2, 0.9}, clusters);
    CHECK(out[0] == 0.2);
    CHECK(out[1] == 0.9);
}

TEST_CASE("single replay step") {
    CalibrationTrace trace;
    trace.bins = 1;
    trace.updates = {{"c", 1, 0.3}};
    ClusterSet clusters;
    clusters.ids = {"c"};
    clusters.members = {{0}};
    const auto out = apply_calibration(trace, {0.2}, clusters);
    CHECK(out[0] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("replay re-bins between steps") {
    CalibrationTrace trace;
    trace.bins = 3;
    trace.updates = {{"c", 1, 0.4}, {"c", 2, 0.1}};
    ClusterSet clusters;
    clusters.ids = {"c"};
    clusters.members = {{0}};
    // 0.25 sits in bin 1, moves to 0.65 (bin 2), then to 0.75.
    const auto out = apply_calibration(trace, {0.25}, clusters);
    CHECK(out[0] == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("replay clamps to the unit interval") {
    CalibrationTrace trace;
    trace.bins = 1;
    trace.updates = {{"c", 1, 1.5}};
    ClusterSet clusters;
    clusters.ids = {"c"};
    clusters.members = {{0, 1}};
    const auto up = apply_calibration(trace, {0.2, 0.4}, clusters);
    CHECK(up[0] == 1.0);
    CHECK(up[1] == 1.0);
    trace.updates = {{"c", 1, -0.9}};
    const auto down = apply_calibration(trace, {0.2, 0.4}, clusters);
    CHECK(down[0] == 0.0);
    CHECK(down[1] == 0.0);
}

TEST_CASE("unknown cluster id in the trace is a typed error") {
    CalibrationTrace trace;
    trace.bins = 1;
    trace.updates = {{"mystery", 1, 0.1}};
    ClusterSet clusters;
    clusters.ids = {"c"};
    clusters.members = {{0}};
    CHECK_THROWS_AS(apply_calibration(trace, {0.5}, clusters), UnknownClusterError);
}

TEST_CASE("replaying the trace reproduces the calibration output bitwise") {
    SplitRng rng(53);
    const std::size_t m = 80;
    std::vector<double> u(m);
    std::vector<int> wrong(m);
    for (std::size_t i = 0; i < m; ++i) {
        u[i] = rng.next_double();
        wrong[i] = rng.bernoulli(0.4) ? 1 : 0;
    }
    ClusterSet clusters;
    clusters.ids = {"first", "odd", "mid"};
    clusters.members.resize(3);
    for (std::size_t i = 0; i < m; ++i) {
        if (i < 40) clusters.members[0].push_back(i);
        if (i % 2 == 1) clusters.members[1].push_back(i);
        if (u[i] > 0.3 && u[i] < 0.8) clusters.members[2].push_back(i);
    }
    const auto result = multicalibrate(u, tokens(wrong), tokens(std::vector<int>(m, 0)),
                                       clusters, 4, 0.01, 300);
    const auto replayed = apply_calibration(result.trace, u, clusters);
    REQUIRE(replayed.size() == result.uncertainties.size());
    for (std::size_t i = 0; i < m; ++i) CHECK(replayed[i] == result.uncertainties[i]);
}

}  // TEST_SUITE
