#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "bornseq/tensor.hpp"

namespace bornseq {

/// Trainable embedding parameters: a (v*p) x p complex matrix whose Q factor,
/// cut into v stacked p x p blocks, gives the Kraus factor of each token.
struct EmbeddingParams {
  int v = 0;
  int p = 0;
  Mat gamma;

  /// i.i.d. complex Gaussian entries with standard deviation 1/sqrt(p).
  static EmbeddingParams random(int v, int p, std::uint64_t seed);
};

/// A positive operator-valued measure over a vocabulary of v tokens acting on a
/// p-dimensional local space. effects[x] = kraus[x]^H kraus[x].
struct Povm {
  int v = 0;
  int p = 0;
  std::vector<Mat> kraus;
  std::vector<Mat> effects;
};

Povm build_povm(const EmbeddingParams& params);

/// Diagonal basis projectors |x><x|, with p = v. Not trainable.
Povm one_hot_povm(int v);

struct PovmReport {
  double max_hermiticity_dev = 0.0;
  double min_eigenvalue = 0.0;
  double completeness_dev = 0.0;  // max-entry of sum_x M(x) - I
  bool pass = false;
};

/// Never throws; malformed or non-finite effects simply fail.
PovmReport validate_povm(const Povm& povm, double tol);

/// Reverse-mode derivative of Q = qr_reduced(gamma).q.
///
/// Gradients follow the convention G = dL/dRe + i dL/dIm (twice the Wirtinger
/// derivative with respect to the conjugate), so that dL = Re tr(G^H dX).
/// Given G_Q, returns G_gamma under the positive-diagonal R normalization.
Mat qr_backward(const Mat& gamma, const Mat& grad_q);

/// Token embedding used by a model: either trainable parameters or the frozen
/// one-hot baseline.
class Embedding {
 public:
  static Embedding trainable(EmbeddingParams params);
  static Embedding one_hot(int v);

  bool is_trainable() const { return params_.has_value(); }
  int v() const { return v_; }
  int p() const { return p_; }

  const EmbeddingParams& params() const;
  EmbeddingParams& params();

  Povm povm() const;

 private:
  Embedding(int v, int p, std::optional<EmbeddingParams> params)
      : v_(v), p_(p), params_(std::move(params)) {}

  int v_ = 0;
  int p_ = 0;
  std::optional<EmbeddingParams> params_;
};

}  // namespace bornseq
