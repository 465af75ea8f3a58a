#pragma once

#include <map>
#include <span>
#include <vector>

#include "bornseq/mps.hpp"
#include "bornseq/povm.hpp"
#include "bornseq/rng.hpp"

namespace bornseq {

/// Observed tokens at a subset of sites; all other sites are marginalized.
struct PartialAssignment {
  int n = 0;
  std::map<int, int> assigned;  // site -> token

  PartialAssignment() = default;
  explicit PartialAssignment(int length, std::map<int, int> fixed = {})
      : n(length), assigned(std::move(fixed)) {}

  bool contains(int site) const { return assigned.count(site) != 0; }
  PartialAssignment with(int site, int token) const;
};

/// Probabilities at or below this count as a null event when conditioning.
inline constexpr double kNullEventFloor = 1e-300;

/// p(x_A): effects at assigned sites, identity elsewhere. The sweep stops at
/// the last assigned site because the right-canonical suffix contracts to the
/// identity.
double joint_marginal(const IsometricMps& mps, const Povm& povm, const PartialAssignment& assign);

/// p(x_site = x | x_assigned) for x = 0..v-1.
std::vector<double> conditional_distribution(const IsometricMps& mps, const Povm& povm,
                                             const PartialAssignment& assign, int site);

/// Post-measurement state (prod_{i in A} Q(x_i)) |Psi> / sqrt(Z), Z = p(x_A).
class CollapsedState {
 public:
  CollapsedState(const IsometricMps& mps, const Povm& povm, const PartialAssignment& assign);

  int n() const { return static_cast<int>(slices_.size()); }
  double normalization() const { return z_; }
  const std::vector<Mat>& slices(int site) const { return slices_.at(site); }

  /// <Psi(x_A)|Psi(x_A)>
  double norm_squared() const;
  /// <Psi(x_A)| M(x_B) |Psi(x_A)> with identity on every site outside B.
  double expectation(const Povm& povm, const PartialAssignment& measured) const;

 private:
  std::vector<std::vector<Mat>> slices_;
  double z_ = 1.0;
};

CollapsedState collapsed_state(const IsometricMps& mps, const Povm& povm, const PartialAssignment& assign);

/// Draws index x with probability probs[x] by inverse CDF on a single uniform.
/// Cumulative sums are clamped to [0, 1]; zero-mass entries are never chosen
/// and a draw that lands exactly on a boundary goes to the lower index.
int draw_from(std::span<const double> probs, double u);

/// Visits sites in `order` and draws each token from its conditional given
/// the tokens already placed. `order` must be a permutation of 0..n-1.
std::vector<int> sample(const IsometricMps& mps, const Povm& povm, std::span<const int> order, Rng& rng);

enum class FillMode { stochastic, greedy };

/// Marks a position of a masked_fill template as unknown.
inline constexpr int kHole = -1;

/// Keeps fixed template positions and fills holes left to right from the
/// model's conditionals (sampling or argmax with lowest-index tie-break).
std::vector<int> masked_fill(const IsometricMps& mps, const Povm& povm, std::span<const int> tmpl,
                             Rng& rng, FillMode mode);

/// Product of conditionals along `order` for a complete sequence.
double chain_rule_probability(const IsometricMps& mps, const Povm& povm, std::span<const int> tokens,
                              std::span<const int> order);

}  // namespace bornseq
