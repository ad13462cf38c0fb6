#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace mpsim {

namespace detail {

// Murmur3-style 64-bit finalizer. Bijective, well mixed.
inline constexpr std::uint64_t fmix64(std::uint64_t h) {
  h ^= h >> 33;
  h *= 0xff51afd7ed558ccdULL;
  h ^= h >> 33;
  h *= 0xc4ceb9fe1a85ec53ULL;
  h ^= h >> 33;
  return h;
}

inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

}  // namespace detail

/// Stream labels for seed splitting. Distinct labels guarantee that the
/// random draws of unrelated pipeline stages never alias even when their
/// stream indices coincide.
enum class SeedPurpose : std::uint64_t {
  kSample = 1,    // outer-loop sample k
  kStep = 2,      // replanning step within a sample
  kProposal = 3,  // proposal draw for rollout j
  kSelection = 4, // rollout selection draw
  kAgent = 5,     // per-agent noise stream inside one proposal
  kHarness = 6,   // test/benchmark scaffolding
};

/// Deterministic seed derivation: same (master, stream, purpose) always
/// yields the same child seed, on every platform, regardless of how many
/// threads consume the streams.
inline constexpr std::uint64_t split_seed(std::uint64_t master, std::uint64_t stream,
                                          SeedPurpose purpose) {
  std::uint64_t h = detail::fmix64(master + detail::kGolden);
  h = detail::fmix64(h ^ (stream * 0xbf58476d1ce4e5b9ULL + 1));
  h = detail::fmix64(h ^ (static_cast<std::uint64_t>(purpose) * 0x94d049bb133111ebULL + 1));
  return h;
}

/// Small PRNG (SplitMix64). Used instead of <random> engines so integer and
/// uniform draws never depend on the standard library implementation;
/// normal() additionally goes through libm, so its bits are fixed per
/// platform rather than universally.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += detail::kGolden);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform double in [0, 1), 53 bits of resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller. Consumes two uniforms per draw.
  double normal() {
    const double u1 = uniform();
    const double u2 = uniform();
    // 1 - u1 lies in (0, 1], so the log is finite.
    const double r = std::sqrt(-2.0 * std::log(1.0 - u1));
    return r * std::cos(2.0 * std::numbers::pi * u2);
  }

  /// Uniform index in [0, n).
  int uniform_index(int n) {
    const int i = static_cast<int>(uniform() * static_cast<double>(n));
    return i < n ? i : n - 1;
  }

 private:
  std::uint64_t state_;
};

}  // namespace mpsim
