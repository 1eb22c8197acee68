#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace curesimex {

// splitmix64 finalizer: the mixing step shared by the stream and the
// substream derivation below.
inline std::uint64_t splitmix64_mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

// Deterministic random stream.  Distributions are built from uniforms only,
// with a fixed number of draws per call (the normal generator does not cache
// its second Box-Muller value), so results are bit-identical no matter how
// streams are scheduled across threads.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ull;
        return splitmix64_mix(state_);
    }

    // uniform on the open interval (0,1); never returns 0 or 1
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53 + 0x1.0p-54;
    }

    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    double exponential(double rate) {
        if (rate <= 0.0) throw std::invalid_argument("exponential rate must be positive");
        return -std::log(uniform()) / rate;
    }

    int bernoulli(double p) { return uniform() < p ? 1 : 0; }

    double uniform_ab(double a, double b) { return a + (b - a) * uniform(); }

    double chi_squared(int df) {
        if (df < 1) throw std::invalid_argument("chi_squared needs df >= 1");
        double s = 0.0;
        for (int i = 0; i < df; ++i) {
            double z = normal();
            s += z * z;
        }
        return s;
    }

    double student_t(int df) {
        if (df < 3) throw std::invalid_argument("student_t needs df >= 3 for finite variance");
        return normal() / std::sqrt(chi_squared(df) / df);
    }

private:
    std::uint64_t state_;
};

// Substream derivation: fold up to three ids into the master seed through the
// splitmix64 mixer.  Stateless, so cell (a,b,c) can be opened from any thread
// in any order and always yields the same stream.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a,
                                 std::uint64_t b = 0, std::uint64_t c = 0) {
    std::uint64_t s = splitmix64_mix(master ^ 0x9E3779B97F4A7C15ull);
    s = splitmix64_mix(s ^ (a + 0xD1B54A32D192ED03ull));
    s = splitmix64_mix(s ^ (b + 0x8CB92BA72F3D8DD7ull));
    s = splitmix64_mix(s ^ (c + 0xA24BAED4963EE407ull));
    return s;
}

inline RngStream substream(std::uint64_t master, std::uint64_t a,
                           std::uint64_t b = 0, std::uint64_t c = 0) {
    return RngStream(derive_seed(master, a, b, c));
}

}  // namespace curesimex
