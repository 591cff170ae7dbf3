#pragma once

#include <cstdint>
#include <cmath>

namespace gpc {

// SplitMix64: 64-bit state advanced by a fixed odd increment, output produced
// by an avalanching finalizer. Deterministic across platforms, trivially
// splittable into independent substreams, which is what the samplers rely on
// to make output independent of loop partitioning.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

    std::uint64_t next() noexcept {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform on the open interval (0,1). The half-offset keeps both endpoints
    // strictly excluded, so log() and inverse-cdf transforms never see 0 or 1.
    double uniform_open01() noexcept {
        return (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53;
    }

    // Standard normal via Box-Muller; the second variate of each pair is cached.
    double standard_normal() noexcept {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = uniform_open01();
        const double u2 = uniform_open01();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 6.283185307179586476925286766559 * u2;
        spare_ = radius * std::sin(angle);
        have_spare_ = true;
        return radius * std::cos(angle);
    }

    // Substream keyed by (seed, index): the index is folded through the
    // finalizer so adjacent indices land in unrelated regions of the state
    // space. Rows drawn from substream(seed, i) do not depend on how many
    // draws other rows consumed.
    static SplitMix64 substream(std::uint64_t seed, std::uint64_t index) noexcept {
        std::uint64_t h = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
        h = (h ^ (h >> 30)) * 0xbf58476d1ce4e5b9ULL;
        h = (h ^ (h >> 27)) * 0x94d049bb133111ebULL;
        h ^= h >> 31;
        return SplitMix64(h);
    }

private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

} // namespace gpc
