#include "paclab/synth.hpp"

#include <algorithm>
#include <cmath>

#include "paclab/errors.hpp"

namespace paclab {

namespace {

const char* kTokens[] = {"a", "b", "c"};

Label random_token(SplitRng& rng) { return Label(kTokens[rng.next_index(3)]); }

// A token different from `truth`, uniformly among the other two.
Label wrong_token(const Label& truth, SplitRng& rng) {
    std::size_t t = 0;
    while (Label(kTokens[t]) != truth) ++t;
    return Label(kTokens[(t + 1 + rng.next_index(2)) % 3]);
}

std::string point_id(std::size_t i) { return "p" + std::to_string(i); }

}  // namespace

SynthRegime parse_regime(const std::string& name) {
    if (name == "calibrated") return SynthRegime::calibrated;
    if (name == "miscalibrated-groups") return SynthRegime::miscalibrated_groups;
    if (name == "complementary-sources") return SynthRegime::complementary_sources;
    if (name == "continuous") return SynthRegime::continuous;
    throw ValidationError("unknown synthetic regime '" + name + "'");
}

std::string regime_name(SynthRegime regime) {
    switch (regime) {
        case SynthRegime::calibrated: return "calibrated";
        case SynthRegime::miscalibrated_groups: return "miscalibrated-groups";
        case SynthRegime::complementary_sources: return "complementary-sources";
        case SynthRegime::continuous: return "continuous";
    }
    throw Error("unreachable regime");
}

Dataset synth_calibrated(std::size_t n, SplitRng& rng) {
    Dataset data;
    data.points.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        DataPoint p;
        p.id = point_id(i);
        p.uncertainty = rng.next_double();
        const Label truth = random_token(rng);
        p.truth = truth;
        p.predicted = rng.bernoulli(p.uncertainty) ? wrong_token(truth, rng) : truth;
        data.points.push_back(std::move(p));
    }
    return data;
}

GroupedSynth synth_miscalibrated_groups(std::size_t n, SplitRng& rng) {
    GroupedSynth out;
    out.data.points.reserve(n);
    out.clusters.ids = {"overconfident", "underconfident"};
    out.clusters.members.resize(2);
    for (std::size_t i = 0; i < n; ++i) {
        DataPoint p;
        p.id = point_id(i);
        const bool overconfident = i % 2 == 0;
        const Label truth = random_token(rng);
        p.truth = truth;
        if (overconfident) {
            // Always wrong, yet confident.
            p.predicted = wrong_token(truth, rng);
            p.uncertainty = rng.uniform(0.0, 0.2);
        } else {
            // Always right, yet unsure.
            p.predicted = truth;
            p.uncertainty = rng.uniform(0.8, 1.0);
        }
        out.clusters.members[overconfident ? 0 : 1].push_back(i);
        out.data.points.push_back(std::move(p));
    }
    return out;
}

RoutingDataset synth_complementary_sources(std::size_t n, SplitRng& rng) {
    RoutingDataset data;
    data.sources = {{"alpha", 0.25}, {"beta", 0.075}};
    data.points.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        MultiPrediction p;
        p.id = point_id(i);
        const double x = rng.uniform(-1.0, 1.0);
        p.features = {x};
        const Label truth = random_token(rng);
        p.truth = truth;
        for (std::size_t j = 0; j < 2; ++j) {
            // Source strength flips across the feature sign: confident and
            // nearly always right on its own half, unsure and often wrong on
            // the other.
            const bool strong = (j == 0) ? x < 0.0 : x >= 0.0;
            const double u = strong ? rng.uniform(0.0, 0.25) : rng.uniform(0.5, 1.0);
            const double p_wrong = strong ? 0.2 * u : u;
            p.uncertainty.push_back(u);
            p.predicted.push_back(rng.bernoulli(p_wrong) ? wrong_token(truth, rng) : truth);
        }
        data.points.push_back(std::move(p));
    }
    return data;
}

Dataset synth_continuous(std::size_t n, SplitRng& rng) {
    Dataset data;
    data.points.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        DataPoint p;
        p.id = point_id(i);
        const double y = rng.next_double();
        p.truth = Label(y);
        p.uncertainty = rng.next_double();
        const double noise = 0.5 * p.uncertainty * rng.uniform(-1.0, 1.0);
        p.predicted = Label(std::clamp(y + noise, 0.0, 1.0));
        data.points.push_back(std::move(p));
    }
    return data;
}

}  // namespace paclab
