#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace bornseq {

/// SplitMix64 finalizer. Used to derive independent stream seeds.
std::uint64_t splitmix64(std::uint64_t x);

/// Seedable generator with platform-independent output.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the C++
/// standard. All derived variates (uniforms, normals, bounded integers) are
/// computed here rather than through <random> distributions, whose algorithms
/// are implementation-defined. `split(k)` returns a child generator seeded by
/// mixing the parent seed with `k` through SplitMix64, so streams can be
/// handed to independent consumers without sharing state.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t seed() const { return seed_; }
  Rng split(std::uint64_t stream) const;

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Standard normal via Box-Muller (one variate per call, the pair's partner is cached).
  double normal();
  /// Uniform integer in [0, bound), rejection sampled (no modulo bias).
  std::uint64_t below(std::uint64_t bound);

  /// Fisher-Yates shuffle driven by `below`.
  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace bornseq
