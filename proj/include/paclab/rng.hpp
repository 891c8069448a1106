#pragma once

#include <cstddef>
#include <cstdint>

namespace paclab {

// Deterministic splitmix64 generator. Identical seeds give identical streams
// on every platform; the std distributions are implementation-defined, so we
// roll the few draws we need by hand.
class SplitRng {
 public:
    explicit SplitRng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0,1), 53-bit resolution.
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform index in [0,n). Multiply-shift; bias is O(n / 2^64).
    std::size_t next_index(std::size_t n) {
        return static_cast<std::size_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    bool bernoulli(double p) { return next_double() < p; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    // Counter-based stream split: independent per-trial seeds from one master
    // seed, so trials can run in any order or in parallel.
    static std::uint64_t derive(std::uint64_t master, std::uint64_t stream) {
        SplitRng g(master ^ (0x9e3779b97f4a7c15ULL * (stream + 1)));
        g.next_u64();
        return g.next_u64();
    }

 private:
    std::uint64_t state_;
};

}  // namespace paclab
