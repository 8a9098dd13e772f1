#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace wozlab {

/// SplitMix64 finalizer. Used to derive independent child seeds from a
/// parent seed and a counter.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t index) noexcept {
  return splitmix64(parent ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

// std::mt19937_64's output sequence is fixed by the standard, but the
// standard distributions are not. All draws go through these helpers so
// results are bitwise reproducible across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 bits of precision.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n). Lemire-free rejection keeps it unbiased.
  std::uint64_t below(std::uint64_t n);

  /// Index drawn from unnormalized non-negative weights.
  std::size_t categorical(std::span<const double> weights);

  bool coin() { return (engine_() >> 63) != 0; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace wozlab
