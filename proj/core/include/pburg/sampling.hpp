#pragma once

#include <array>
#include <cstdint>
#include <functional>

#include "pburg/errors.hpp"

namespace pburg {

/// Deterministic, platform-independent PRNG. Each sample index gets its own
/// substream, so results do not depend on evaluation order or thread count.
class SplitMix64 {
  public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, 1) with full 53-bit mantissa.
    double uniform01() { return (double)(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    static SplitMix64 substream(std::uint64_t seed, std::uint64_t index) {
        SplitMix64 mixer(seed ^ (0xD1B54A32D192ED03ull * (index + 1)));
        mixer.next();
        return mixer;
    }

  private:
    std::uint64_t state_;
};

struct Interval {
    double lo = 0.0, hi = 1.0;
    double width() const { return hi - lo; }
    double mid() const { return 0.5 * (lo + hi); }
    bool valid() const { return hi > lo; }
};

/// Sampling region for the variables (t, x, w) with an optional excluded-
/// singularity predicate, sample count and seed. Points keep a small margin
/// from the boundary (a fraction of the box width per side).
struct SampleBox {
    Interval t{0.1, 0.9};
    Interval x{0.5, 1.5};
    Interval w{-1.0, 1.0};
    std::function<bool(double, double, double)> excluded;  // true -> rejected
    int n = 50;
    std::uint64_t seed = 1;
    double margin_frac = 1e-3;

    void check() const {
        if (!t.valid() || !x.valid() || !w.valid())
            throw ParamError("sample box intervals must have positive length");
        if (n < 1) throw ParamError("sample count must be >= 1");
    }

    /// Deterministic point for sample index i (before exclusion filtering).
    std::array<double, 3> point(std::uint64_t i) const {
        SplitMix64 rng = SplitMix64::substream(seed, i);
        auto draw = [&](const Interval& iv) {
            double m = margin_frac * iv.width();
            return rng.uniform(iv.lo + m, iv.hi - m);
        };
        double pt = draw(t), px = draw(x), pw = draw(w);
        return {pt, px, pw};
    }

    bool admitted(const std::array<double, 3>& p) const {
        return !excluded || !excluded(p[0], p[1], p[2]);
    }
};

}  // namespace pburg
