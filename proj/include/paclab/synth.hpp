#pragma once

#include <cstddef>
#include <string>

#include "paclab/calibration.hpp"
#include "paclab/dataset.hpp"
#include "paclab/rng.hpp"
#include "paclab/router.hpp"

namespace paclab {

enum class SynthRegime {
    calibrated,             // P(wrong | U = u) = u, U ~ Unif(0,1)
    miscalibrated_groups,   // overconfident half always wrong with low U,
                            // underconfident half always right with high U
    complementary_sources,  // two sources, each reliable on one half of the
                            // feature space
    continuous,             // real labels in [0,1], squared-loss regime
};

SynthRegime parse_regime(const std::string& name);
std::string regime_name(SynthRegime regime);

Dataset synth_calibrated(std::size_t n, SplitRng& rng);

struct GroupedSynth {
    Dataset data;
    ClusterSet clusters;  // one cluster per group
};
GroupedSynth synth_miscalibrated_groups(std::size_t n, SplitRng& rng);

RoutingDataset synth_complementary_sources(std::size_t n, SplitRng& rng);

Dataset synth_continuous(std::size_t n, SplitRng& rng);

}  // namespace paclab
