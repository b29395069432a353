#ifndef AIRFI_RNG_HPP
#define AIRFI_RNG_HPP

#include "airfi/common.hpp"

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace airfi {

// Deterministic random stream. All sampling (normal, Laplace, uniform) is
// implemented on top of the raw mt19937_64 output so that sequences are
// bit-identical across platforms; libm only enters through log/cos/sqrt,
// which keeps cross-platform drift well below the 1e-6 reproducibility bar.
//
// fork(label, ids...) derives an independent child stream from the *original*
// seed of this stream plus the label and ids, so fork results do not depend on
// how many draws the parent has already made.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller; the second deviate of each pair is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 1.0 - uniform();  // (0, 1], keeps log finite
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double t = 2.0 * M_PI * u2;
    spare_ = r * std::sin(t);
    has_spare_ = true;
    return r * std::cos(t);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // Laplace(0, scale) by inverse CDF: x = -scale * sgn(v) * log(1 - 2|v|),
  // v = u - 1/2. Variance is 2 * scale^2.
  double laplace(double scale) {
    double u = uniform();
    if (u <= 0.0) u = 0x1.0p-53;
    double v = u - 0.5;
    double a = 1.0 - 2.0 * std::abs(v);
    double x = -std::log(a);
    return scale * (v < 0.0 ? x : -x);
  }

  Rng fork(std::string_view label) const {
    std::uint64_t h = fnv1a64(&seed_, sizeof(seed_));
    h = fnv1a64(label.data(), label.size(), h);
    return Rng(h);
  }

  Rng fork(std::string_view label, std::uint64_t a) const {
    std::uint64_t h = fnv1a64(&seed_, sizeof(seed_));
    h = fnv1a64(label.data(), label.size(), h);
    h = fnv1a64(&a, sizeof(a), h);
    return Rng(h);
  }

  Rng fork(std::string_view label, std::uint64_t a, std::uint64_t b) const {
    std::uint64_t h = fnv1a64(&seed_, sizeof(seed_));
    h = fnv1a64(label.data(), label.size(), h);
    h = fnv1a64(&a, sizeof(a), h);
    h = fnv1a64(&b, sizeof(b), h);
    return Rng(h);
  }

  Rng fork(std::string_view label, std::uint64_t a, std::uint64_t b,
           std::uint64_t c) const {
    std::uint64_t h = fnv1a64(&seed_, sizeof(seed_));
    h = fnv1a64(label.data(), label.size(), h);
    h = fnv1a64(&a, sizeof(a), h);
    h = fnv1a64(&b, sizeof(b), h);
    h = fnv1a64(&c, sizeof(c), h);
    return Rng(h);
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace airfi

#endif  // AIRFI_RNG_HPP
