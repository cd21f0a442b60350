#ifndef HSI_RNG_HPP
#define HSI_RNG_HPP

#include <cmath>
#include <cstdint>

namespace hsi {

// Deterministic generator with hand-rolled distributions. std::*_distribution
// is not pinned across standard libraries, and simulator outputs must be pure
// functions of (spec, seeds), so everything here is spelled out.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ull) {}

    // Independent per-item stream (seed, index) for order-free parallelism.
    static Rng stream(uint64_t seed, uint64_t index) {
        Rng r(seed);
        r.state_ ^= 0xbf58476d1ce4e5b9ull * (index + 1);
        r.next();
        r.next();
        return r;
    }

    uint64_t next() { // splitmix64
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    double uniform01() { // in [0,1)
        return double(next() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Inclusive integer range.
    int64_t uniform_int(int64_t lo, int64_t hi) {
        uint64_t span = uint64_t(hi - lo) + 1;
        return lo + int64_t(next() % span);
    }

    double gaussian() { // Box-Muller, one value per call (cached pair)
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        while (u1 <= 1e-300) u1 = uniform01();
        double u2 = uniform01();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

private:
    uint64_t state_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

} // namespace hsi

#endif
