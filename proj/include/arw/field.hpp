#pragma once

#include <fftw3.h>

#include <map>
#include <memory>
#include <mutex>
#include <optional>

#include "arw/lattice.hpp"
#include "arw/rng.hpp"

namespace arw::field {

using lattice::FrequencySet;

inline double eigenvalue(int64_t n) { return 4.0 * M_PI * M_PI * static_cast<double>(n); }

// ---------------------------------------------------------------------------
// Spectral coefficients of one wave sample
// ---------------------------------------------------------------------------

// Gaussian coefficients a_lambda, stored for every frequency with the
// Hermitian symmetry a_{-lambda} = conj(a_lambda) enforced, which keeps the
// synthesized field real. Values are a pure function of
// (seed, replication_index, n), independent of evaluation order.
struct WaveCoefficients {
    const FrequencySet* freq = nullptr;
    std::vector<cplx> a;  // aligned with freq->points
    uint64_t seed = 0;
    int64_t replication_index = 0;

    const cplx& at(int32_t idx) const { return a[idx]; }
};

inline WaveCoefficients make_coefficients(
    const FrequencySet& freq, uint64_t seed, int64_t replication_index,
    const std::optional<std::vector<cplx>>& override_values = std::nullopt) {
    WaveCoefficients wc;
    wc.freq = &freq;
    wc.seed = seed;
    wc.replication_index = replication_index;
    const int32_t N = freq.cardinality();
    wc.a.resize(N);
    if (override_values) {
        if (static_cast<int32_t>(override_values->size()) != N)
            throw AsymmetricOverride("override must cover every frequency");
        wc.a = *override_values;
        for (int32_t i = 0; i < N; ++i) {
            cplx mirror = std::conj(wc.a[freq.negation[i]]);
            if (std::abs(wc.a[i] - mirror) > 1e-12)
                throw AsymmetricOverride("override violates a(-l) = conj(a(l)) at index " +
                                         std::to_string(i));
        }
        return wc;
    }
    for (int32_t i = 0; i < N; ++i) {
        if (!freq.canonical[i]) continue;
        Rng stream(Rng::key(seed, static_cast<uint64_t>(replication_index),
                            static_cast<uint64_t>(freq.n), static_cast<uint64_t>(i)));
        // real and imaginary parts are independent N(0, 1/2)
        cplx z = stream.normal_pair() * M_SQRT1_2;
        wc.a[i] = z;
        wc.a[freq.negation[i]] = std::conj(z);
    }
    return wc;
}

// Multiplies every coefficient by exp(2*pi*i <lambda, t>), which translates
// the field by t on the torus.
inline WaveCoefficients translate(const WaveCoefficients& wc, const dvec3& t) {
    WaveCoefficients out = wc;
    const auto& pts = wc.freq->points;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        double phase = kTwoPi * (pts[i][0] * t[0] + pts[i][1] * t[1] + pts[i][2] * t[2]);
        out.a[i] *= cplx(std::cos(phase), std::sin(phase));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Point evaluation
// ---------------------------------------------------------------------------

struct PointValue {
    double value = 0.0;
    dvec3 normalized_gradient{};  // components have unit variance
};

inline PointValue evaluate_point(const WaveCoefficients& wc, const dvec3& x) {
    const FrequencySet& fs = *wc.freq;
    const double N = fs.cardinality();
    const double grad_scale = std::sqrt(3.0 / (fs.n * N));
    cplx val(0, 0);
    cplx grad[3] = {};
    for (std::size_t i = 0; i < fs.points.size(); ++i) {
        const ivec3& l = fs.points[i];
        double phase = kTwoPi * (l[0] * x[0] + l[1] * x[1] + l[2] * x[2]);
        cplx e(std::cos(phase), std::sin(phase));
        cplx term = wc.a[i] * e;
        val += term;
        for (int k = 0; k < 3; ++k) grad[k] += double(l[k]) * term;
    }
    val /= std::sqrt(N);
    double resid = std::abs(val.imag());
    PointValue out;
    out.value = val.real();
    for (int k = 0; k < 3; ++k) {
        cplx g = cplx(0, 1) * grad_scale * grad[k];
        resid = std::max(resid, std::abs(g.imag()));
        out.normalized_gradient[k] = g.real();
    }
    if (resid > 1e-9)
        throw SymmetryViolation("imaginary residue " + std::to_string(resid) +
                                " exceeds 1e-9; coefficient symmetry is broken");
    return out;
}

// ---------------------------------------------------------------------------
// Grid synthesis
// ---------------------------------------------------------------------------

// Sampled field values and normalized gradients on the uniform periodic grid
// x = k / resolution. Channel 0 is the value, channels 1..3 the normalized
// partial derivatives.
struct FieldGrid {
    int64_t n = 0;
    int resolution = 0;
    std::vector<double> values;
    std::array<std::vector<double>, 3> gradients;
    bool has_gradients = false;

    std::size_t nodes() const { return values.size(); }
    std::size_t index(int i, int j, int k) const {
        return (static_cast<std::size_t>(i) * resolution + j) * resolution + k;
    }
};

inline int default_resolution(int64_t n, int cells_per_wavelength = 16) {
    auto root = static_cast<double>(lattice::isqrt64(n));
    int lower = 2 * static_cast<int>(root) + 1;
    int target = static_cast<int>(std::ceil(cells_per_wavelength * std::sqrt(double(n))));
    return std::max(lower, target);
}

namespace detail {

// FFTW plans are cached per grid size; creation is serialized, execution on
// private buffers is thread safe via the new-array interface.
class FftwWorkspace {
  public:
    explicit FftwWorkspace(int m) : m_(m) {
        std::size_t sz = static_cast<std::size_t>(m) * m * m;
        in_ = fftw_alloc_complex(sz);
        out_ = fftw_alloc_complex(sz);
        std::lock_guard<std::mutex> lock(plan_mutex());
        auto& plans = plan_cache();
        auto it = plans.find(m);
        if (it == plans.end()) {
            fftw_plan p = fftw_plan_dft_3d(m, m, m, in_, out_, FFTW_BACKWARD, FFTW_ESTIMATE);
            it = plans.emplace(m, p).first;
        }
        plan_ = it->second;
    }
    ~FftwWorkspace() {
        fftw_free(in_);
        fftw_free(out_);
    }
    FftwWorkspace(const FftwWorkspace&) = delete;
    FftwWorkspace& operator=(const FftwWorkspace&) = delete;

    fftw_complex* in() { return in_; }
    const fftw_complex* out() const { return out_; }
    void clear() {
        std::size_t sz = static_cast<std::size_t>(m_) * m_ * m_;
        std::memset(in_, 0, sz * sizeof(fftw_complex));
    }
    void execute() { fftw_execute_dft(plan_, in_, out_); }

  private:
    static std::mutex& plan_mutex() {
        static std::mutex m;
        return m;
    }
    static std::map<int, fftw_plan>& plan_cache() {
        static std::map<int, fftw_plan> c;
        return c;
    }
    int m_;
    fftw_complex* in_;
    fftw_complex* out_;
    fftw_plan plan_;
};

}  // namespace detail

// Places the spectral coefficients into an M^3 frequency array and applies an
// inverse FFT; node (i,j,k) receives T(i/M, j/M, k/M). The resolution must
// exceed twice the coordinate bound so distinct frequencies stay distinct
// modulo M.
inline FieldGrid synthesize_grid(const WaveCoefficients& wc, int resolution,
                                 bool with_gradients = true) {
    const FrequencySet& fs = *wc.freq;
    int root = static_cast<int>(lattice::isqrt64(fs.n));
    if (resolution <= 2 * root)
        throw ResolutionTooLow("resolution " + std::to_string(resolution) +
                               " aliases frequencies of norm sqrt(" + std::to_string(fs.n) + ")");
    FieldGrid g;
    g.n = fs.n;
    g.resolution = resolution;
    g.has_gradients = with_gradients;
    const int M = resolution;
    const std::size_t nodes = static_cast<std::size_t>(M) * M * M;
    const double inv_sqrt_n = 1.0 / std::sqrt(static_cast<double>(fs.cardinality()));
    const double grad_scale = std::sqrt(3.0 / static_cast<double>(fs.n));

    detail::FftwWorkspace ws(M);
    auto wrap = [M](int32_t c) { return ((c % M) + M) % M; };
    auto synth_channel = [&](int channel, std::vector<double>& dst) {
        ws.clear();
        for (std::size_t i = 0; i < fs.points.size(); ++i) {
            const ivec3& l = fs.points[i];
            cplx coef = wc.a[i] * inv_sqrt_n;
            if (channel > 0) coef *= cplx(0, 1) * grad_scale * double(l[channel - 1]);
            std::size_t idx =
                (static_cast<std::size_t>(wrap(l[0])) * M + wrap(l[1])) * M + wrap(l[2]);
            ws.in()[idx][0] += coef.real();
            ws.in()[idx][1] += coef.imag();
        }
        ws.execute();
        dst.resize(nodes);
        double worst = 0.0;
        for (std::size_t i = 0; i < nodes; ++i) {
            dst[i] = ws.out()[i][0];
            worst = std::max(worst, std::abs(ws.out()[i][1]));
        }
        if (worst > 1e-9)
            throw SymmetryViolation("grid synthesis imaginary residue " + std::to_string(worst));
    };
    synth_channel(0, g.values);
    if (with_gradients)
        for (int k = 0; k < 3; ++k) synth_channel(k + 1, g.gradients[k]);
    return g;
}

// Flat little-endian f64 dump with a 32-byte header.
inline void dump_grid_channel(const FieldGrid& g, int channel, const std::string& path) {
    if (channel < 0 || channel > 3) throw Error("channel must be 0..3");
    const std::vector<double>& src = channel == 0 ? g.values : g.gradients[channel - 1];
    if (src.empty()) throw Error("requested channel was not synthesized");
    std::string buf;
    buf.append("ARWG", 4);
    lattice::detail::put<uint16_t>(buf, lattice::kCacheFormatVersion);
    lattice::detail::put<uint16_t>(buf, static_cast<uint16_t>(channel));
    lattice::detail::put<uint32_t>(buf, static_cast<uint32_t>(g.resolution));
    lattice::detail::put<uint64_t>(buf, static_cast<uint64_t>(g.n));
    buf.append(32 - buf.size(), '\0');
    buf.reserve(buf.size() + src.size() * sizeof(double));
    for (double v : src) lattice::detail::put<double>(buf, v);
    lattice::detail::atomic_write(path, buf);
}

// ---------------------------------------------------------------------------
// Covariance function
// ---------------------------------------------------------------------------

// r_n and its derivatives at one lag, together with the 4 x 4 covariance
// table of (T, normalized gradient) between x+z and x.
struct CovarianceProfile {
    double value = 0.0;
    dvec3 gradient{};
    std::array<std::array<double, 3>, 3> hessian{};
    std::array<std::array<double, 4>, 4> normalized_pairs{};
};

inline CovarianceProfile covariance_profile(const FrequencySet& fs, const dvec3& z) {
    CovarianceProfile p;
    const double N = fs.cardinality();
    double c0 = 0, c1[3] = {}, c2[3][3] = {};
    for (const auto& l : fs.points) {
        double phase = kTwoPi * (l[0] * z[0] + l[1] * z[1] + l[2] * z[2]);
        double ca = std::cos(phase), sa = std::sin(phase);
        c0 += ca;
        for (int a = 0; a < 3; ++a) {
            c1[a] += -kTwoPi * l[a] * sa;
            for (int b = 0; b < 3; ++b) c2[a][b] += -kTwoPi * kTwoPi * l[a] * l[b] * ca;
        }
    }
    p.value = c0 / N;
    for (int a = 0; a < 3; ++a) {
        p.gradient[a] = c1[a] / N;
        for (int b = 0; b < 3; ++b) p.hessian[a][b] = c2[a][b] / N;
    }
    const double e3 = eigenvalue(fs.n) / 3.0;
    p.normalized_pairs[0][0] = p.value;
    for (int a = 0; a < 3; ++a) {
        // cov(d_a T(x+z), T(x)) and its mirror
        p.normalized_pairs[a + 1][0] = p.gradient[a] / std::sqrt(e3);
        p.normalized_pairs[0][a + 1] = -p.gradient[a] / std::sqrt(e3);
        for (int b = 0; b < 3; ++b) p.normalized_pairs[a + 1][b + 1] = -p.hessian[a][b] / e3;
    }
    return p;
}

// ---------------------------------------------------------------------------
// Parseval functionals
// ---------------------------------------------------------------------------

struct ParsevalFunctionals {
    double mean_functional = 0.0;  // integral of T; identically zero
    double energy_defect = 0.0;    // (1/3) int |grad~ T|^2 - int T^2
    double centred_energy = 0.0;   // int (T^2 - 1)
};

inline ParsevalFunctionals parseval_functionals(const WaveCoefficients& wc) {
    const FrequencySet& fs = *wc.freq;
    const double N = fs.cardinality();
    const double e3 = eigenvalue(fs.n) / 3.0;
    ParsevalFunctionals out;
    double grad_energy = 0.0, energy = 0.0;
    for (std::size_t i = 0; i < fs.points.size(); ++i) {
        double mod2 = std::norm(wc.a[i]);
        energy += mod2;
        const ivec3& l = fs.points[i];
        for (int k = 0; k < 3; ++k)
            grad_energy += (kTwoPi * kTwoPi / e3) * double(l[k]) * double(l[k]) * mod2;
    }
    out.mean_functional = 0.0;  // 0 is never a frequency
    out.energy_defect = grad_energy / (3.0 * N) - energy / N;
    out.centred_energy = energy / N - 1.0;
    return out;
}

}  // namespace arw::field
