#pragma once

#include <cmath>
#include <cstdint>

namespace efgnn {

/// Deterministic 64-bit generator (splitmix64 core). The output sequence
/// depends only on the seed, never on platform or standard-library version,
/// so frozen expectations and report reproducibility survive toolchain moves.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform on [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform on [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    bool bernoulli(double p) { return uniform() < p; }

    /// Standard normal via Box-Muller; the sine variate of each pair is cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();                      // 1 - u1 in (0, 1], no log(0)
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log1p(-u1));
        double theta = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// Stream purposes for derived sub-seeds. One stream per stochastic feature:
/// toggling a feature must not shift any other feature's draws.
enum class Stream : std::uint64_t {
    init = 0xA11CE501,
    perturb = 0xA11CE502,
    dropout = 0xA11CE503,
    sbm_edges = 0xA11CE504,
    sbm_features = 0xA11CE505,
    ood_noise = 0xA11CE506,
};

/// Mixes a base seed with a stream tag and up to three coordinates
/// (epoch, hop, row) into an independent sub-seed.
inline std::uint64_t derive_seed(std::uint64_t base, Stream stream, std::uint64_t a = 0,
                                 std::uint64_t b = 0, std::uint64_t c = 0) {
    std::uint64_t s = base;
    for (std::uint64_t coord : {static_cast<std::uint64_t>(stream), a, b, c}) {
        Rng mixer(s ^ (coord * 0xD1B54A32D192ED03ULL + 0x2545F4914F6CDD1DULL));
        s = mixer.next_u64();
    }
    return s;
}

}  // namespace efgnn
