#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace arw {

using cplx = std::complex<double>;
using ivec3 = std::array<int32_t, 3>;
using dvec3 = std::array<double, 3>;

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NotRepresentable : Error        { using Error::Error; };
struct MemoryBudgetExceeded : Error    { using Error::Error; };
struct AsymmetricOverride : Error      { using Error::Error; };
struct ResolutionTooLow : Error        { using Error::Error; };
struct EpsilonTooSmall : Error         { using Error::Error; };
struct IdenticalFields : Error         { using Error::Error; };
struct DegenerateCovariance : Error    { using Error::Error; };
struct RadiusRejected : Error          { using Error::Error; };
struct UnsupportedDegree : Error       { using Error::Error; };
struct ConfigInvalid : Error           { using Error::Error; };
struct InadmissibleN : Error           { using Error::Error; };
struct SymmetryViolation : Error       { using Error::Error; };

// Compensated accumulator for cancellation-heavy sums.
struct KahanSum {
    double sum = 0.0;
    double carry = 0.0;
    void add(double x) {
        double y = x - carry;
        double t = sum + y;
        carry = (t - sum) - y;
        sum = t;
    }
    double value() const { return sum; }
};

inline unsigned worker_count() {
    if (const char* env = std::getenv("ARW_THREADS")) {
        int k = std::atoi(env);
        if (k >= 1) return static_cast<unsigned>(k);
    }
    unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1u : hc;
}

// Runs body(i) for i in [0, count). Work is split into contiguous blocks so
// results indexed by i can be reduced afterwards in a fixed order.
inline void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body,
                         unsigned threads = 0) {
    if (threads == 0) threads = worker_count();
    if (threads <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, count));
    std::vector<std::thread> pool;
    pool.reserve(threads);
    std::size_t chunk = (count + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t) {
        std::size_t lo = t * chunk;
        std::size_t hi = std::min(count, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &body] {
            for (std::size_t i = lo; i < hi; ++i) body(i);
        });
    }
    for (auto& th : pool) th.join();
}

inline double sqr(double x) { return x * x; }

constexpr double kTwoPi = 6.283185307179586476925286766559;

}  // namespace arw
