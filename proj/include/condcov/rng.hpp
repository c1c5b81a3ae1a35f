#pragma once

#include <cstdint>
#include <cmath>

#include "condcov/special.hpp"

// Self-contained, platform-stable random number generation.  Streams are
// derived from (master seed, purpose, replication) by splitmix64 chaining, so
// any replication can be generated independently of thread scheduling and two
// distinct (purpose, replication) pairs never share a stream.  Normal draws go
// through the inverse CDF, which keeps results bit-identical across standard
// library implementations.

namespace condcov {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Identifier of an independent random stream.
struct StreamKey {
    std::uint64_t master = 0;
    std::uint64_t purpose = 0;
    std::uint64_t replication = 0;

    std::uint64_t id() const {
        std::uint64_t s = master;
        std::uint64_t a = splitmix64(s);
        s ^= purpose * 0x9e3779b97f4a7c15ULL;
        a ^= splitmix64(s);
        s ^= replication * 0xd1342543de82ef95ULL;
        a ^= splitmix64(s);
        return a;
    }
};

/// xoshiro256++ seeded from a StreamKey.
class Rng {
  public:
    explicit Rng(StreamKey key) {
        std::uint64_t s = key.id();
        for (auto& w : state_) w = splitmix64(s);
    }
    Rng(std::uint64_t master, std::uint64_t purpose, std::uint64_t replication)
        : Rng(StreamKey{master, purpose, replication}) {}

    std::uint64_t next_u64() {
        auto rotl = [](std::uint64_t x, int k) {
            return (x << k) | (x >> (64 - k));
        };
        const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    /// Uniform on the open interval (0,1): bin midpoints of a 2^53 grid.
    double uniform() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Standard normal by inversion.
    double normal() { return norm_quantile(uniform()); }

    /// Gamma(shape, 1) via Marsaglia-Tsang; shape boosting below 1.
    double gamma(double shape) {
        if (shape < 1.0) {
            const double u = uniform();
            return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
        }
        const double d = shape - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x, v;
            do {
                x = normal();
                v = 1.0 + c * x;
            } while (v <= 0.0);
            v = v * v * v;
            const double u = uniform();
            if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
            if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
        }
    }

    double chi_square(double dof) { return 2.0 * gamma(0.5 * dof); }

  private:
    std::uint64_t state_[4];
};

/// Purpose tags; keep values stable, they are part of the reproducibility
/// contract of every serialized artifact.
namespace purpose {
inline constexpr std::uint64_t kNullSim = 1;
inline constexpr std::uint64_t kPowerSim = 2;
inline constexpr std::uint64_t kFixture = 3;
inline constexpr std::uint64_t kOracle = 4;
}  // namespace purpose

}  // namespace condcov
