#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace flowlab {

// splitmix64 step; used to derive independent streams from one user seed so
// that e.g. dataset draws and weight draws do not share state.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (tag + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// Deterministic normal/uniform source. std::normal_distribution is not
// bit-reproducible across standard libraries, so draws are generated with an
// explicit Box-Muller transform on top of mt19937_64; given a seed the stream
// is identical on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  // Uniform on (0, 1]; never returns 0 so log() below is safe.
  double uniform() {
    const std::uint64_t bits = gen_() >> 11;  // 53 random bits
    return 1.0 - static_cast<double>(bits) * 0x1.0p-53;
  }

  double gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(angle);
    has_spare_ = true;
    return r * std::cos(angle);
  }

  std::uint64_t raw() { return gen_(); }

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace flowlab
