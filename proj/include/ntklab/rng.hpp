#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace ntklab {

// Deterministic random source used everywhere in the library.
//
// The generator is pinned so that a seed fully determines every draw:
//   * raw 64-bit words come from std::mt19937_64 (bit-exact per the C++
//     standard on every platform),
//   * uniform doubles are (word >> 11) * 2^-53, i.e. 53 random mantissa
//     bits in [0, 1),
//   * each Gaussian consumes exactly two words via the Box-Muller map
//     z = sqrt(-2 ln u1) * cos(2 pi u2), with u1 shifted into (0, 1],
//   * child streams are derived from the seed with SplitMix64, so
//     stream k of seed s is reproducible without sharing state.
//
// A reimplementation in another language that follows the recipe above
// reproduces the streams verbatim.
class Rng {
 public:
  static constexpr std::string_view algorithm = "mt19937_64+box-muller/v1";

  explicit Rng(std::uint64_t seed) : seed_(seed), gen_(seed) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t draws() const { return draws_; }

  std::uint64_t next_u64() {
    ++draws_;
    return gen_();
  }

  // Uniform on [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform on (0, 1]; used where log(u) must stay finite.
  double uniform_pos() {
    return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller.  Exactly two words per call; the sine
  // branch is discarded to keep the stream position independent of any
  // caching policy.
  double normal() {
    const double u1 = uniform_pos();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
  }

  // Independent substream.  Distinct indices give distinct seeds with
  // overwhelming probability; the derivation is pure arithmetic on the
  // root seed, so parent state does not leak into children.
  Rng child(std::uint64_t stream) const {
    std::uint64_t z = seed_ + (stream + 1) * 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    z = z ^ (z >> 31);
    return Rng(z);
  }

 private:
  static constexpr double kPi = 3.14159265358979323846;

  std::uint64_t seed_ = 0;
  std::uint64_t draws_ = 0;
  std::mt19937_64 gen_;
};

}  // namespace ntklab
