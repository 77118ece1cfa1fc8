#pragma once

#include <cmath>
#include <cstdint>

#include "arw/common.hpp"

namespace arw {

// Counter-based random stream. Every stream is a pure function of its key, so
// any coefficient or replication can be regenerated without sequential draws.
// The state update and output mix follow the splitmix64 construction.
class Rng {
  public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    static uint64_t mix(uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Combine key words into a stream seed; order-sensitive.
    static uint64_t key(uint64_t a, uint64_t b = 0, uint64_t c = 0, uint64_t d = 0) {
        uint64_t h = mix(a);
        h = mix(h ^ (b + 0x9e3779b97f4a7c15ULL));
        h = mix(h ^ (c + 0xc2b2ae3d27d4eb4fULL));
        h = mix(h ^ (d + 0x165667b19e3779f9ULL));
        return h;
    }

    uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in (0,1]; never returns 0 so log() below is safe.
    double uniform() {
        return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
    }

    // Standard normal via Box-Muller; draws are paired and cached.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = kTwoPi * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    cplx normal_pair() {
        double u1 = uniform();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = kTwoPi * u2;
        return {r * std::cos(a), r * std::sin(a)};
    }

    // chi-squared(k) as a sum of k squared normals; k is small here.
    double chi_squared(int k) {
        double s = 0.0;
        for (int i = 0; i < k; ++i) s += sqr(normal());
        return s;
    }

  private:
    uint64_t state_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace arw
