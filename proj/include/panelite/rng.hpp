#ifndef PANELITE_RNG_HPP
#define PANELITE_RNG_HPP

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

namespace panelite {

/*
 * Splittable pseudorandom generator built on the splitmix64 sequence.
 *
 * split(stream) derives an independent child generator as a pure function of
 * the seed this instance was constructed with and the stream id; it does not
 * depend on how many values have been drawn. Work item b can therefore be
 * given rng.split(b) and produce the same values regardless of scheduling.
 */
class SplitRng {
 public:
  using result_type = std::uint64_t;

  explicit SplitRng(std::uint64_t seed) : root_(seed), state_(seed) {}

  SplitRng split(std::uint64_t stream) const {
    return SplitRng(mix64(mix64(root_ + 0x9E3779B97F4A7C15ull) ^
                          mix64(stream + 0xD1B54A32D192ED03ull)));
  }

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ull;
    return mix64(state_);
  }

  // Uniform on [0, 1) with 53 random bits.
  double next_unit() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller; one spare is cached.
  double next_normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 1.0 - next_unit();  // (0, 1]
    double u2 = next_unit();
    double radius = std::sqrt(-2.0 * std::log(u1));
    double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  // Uniform on {0, ..., n-1}; unbiased via rejection of the short cycle.
  std::uint64_t next_below(std::uint64_t n) {
    const std::uint64_t threshold = (0 - n) % n;  // 2^64 mod n
    for (;;) {
      std::uint64_t x = next_u64();
      if (x >= threshold) return x % n;
    }
  }

  std::uint64_t operator()() { return next_u64(); }
  static constexpr std::uint64_t min() { return 0; }
  static constexpr std::uint64_t max() {
    return std::numeric_limits<std::uint64_t>::max();
  }

 private:
  static std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  std::uint64_t root_;
  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace panelite

#endif  // PANELITE_RNG_HPP
