#ifndef FEDFDP_RNG_HPP
#define FEDFDP_RNG_HPP

#include <cmath>
#include <cstdint>
#include <vector>

#include "fedfdp/errors.hpp"

namespace fedfdp {

namespace detail {
// splitmix64 finalizer (Vigna 2015). Also used to mix substream keys.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += UINT64_C(0x9E3779B97F4A7C15));
  z = (z ^ (z >> 30)) * UINT64_C(0xBF58476D1CE4E5B9);
  z = (z ^ (z >> 27)) * UINT64_C(0x94D049BB133111EB);
  return z ^ (z >> 31);
}
}  // namespace detail

// Deterministic 64-bit generator. One instance per (client, round, purpose)
// substream so that client execution order never changes the numbers drawn.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() { return detail::splitmix64(state_); }

  // Uniform in [0, 1), 53 random bits.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in (0, 1]; safe as a log() argument.
  double next_double_open() { return 1.0 - next_double(); }

  // Standard normal via Box-Muller; the spare value is cached.
  double next_gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = next_double_open();
    const double u2 = next_double();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  // Gamma(shape, 1) via Marsaglia-Tsang, with the shape < 1 boost.
  double next_gamma(double shape) {
    if (!(shape > 0.0)) throw ArgumentError("gamma shape must be > 0");
    if (shape < 1.0) {
      const double u = next_double_open();
      return next_gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x, v;
      do {
        x = next_gaussian();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = next_double_open();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
      if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
  }

  // Symmetric Dirichlet(conc, ..., conc) over n components.
  std::vector<double> next_dirichlet(double conc, std::size_t n) {
    std::vector<double> draws(n);
    double sum = 0.0;
    for (auto& g : draws) {
      g = next_gamma(conc);
      sum += g;
    }
    if (sum <= 0.0) {
      // All gamma draws underflowed (tiny conc); fall back to a point mass.
      draws.assign(n, 0.0);
      draws[next_u64() % n] = 1.0;
      return draws;
    }
    for (auto& g : draws) g /= sum;
    return draws;
  }

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(next_u64() % i);
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// Purpose tags keep substreams for different uses of randomness disjoint.
enum class StreamPurpose : std::uint64_t {
  kPartition = 1,
  kParamInit = 2,
  kBatchSample = 3,
  kGradNoise = 4,
  kLossNoise = 5,
  kBoundNoise = 6,
  kHoldout = 7,
  kSynthData = 8,
  kShuffle = 9,
  kInitialLoss = 10,
};

// Substream key: fold (master, client, round, purpose) through splitmix64.
// Documented so external tooling can reproduce any stream in isolation.
inline std::uint64_t substream_seed(std::uint64_t master_seed, std::uint64_t client_id,
                                    std::uint64_t round, StreamPurpose purpose) {
  std::uint64_t s = master_seed;
  detail::splitmix64(s);
  s ^= client_id * UINT64_C(0xBF58476D1CE4E5B9);
  detail::splitmix64(s);
  s ^= round * UINT64_C(0x94D049BB133111EB);
  detail::splitmix64(s);
  s ^= static_cast<std::uint64_t>(purpose) * UINT64_C(0x2545F4914F6CDD1D);
  return detail::splitmix64(s);
}

inline Rng substream(std::uint64_t master_seed, std::uint64_t client_id, std::uint64_t round,
                     StreamPurpose purpose) {
  return Rng(substream_seed(master_seed, client_id, round, purpose));
}

}  // namespace fedfdp

#endif  // FEDFDP_RNG_HPP
