#include "bornseq/povm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "bornseq/errors.hpp"
#include "bornseq/linalg.hpp"

namespace bornseq {

EmbeddingParams EmbeddingParams::random(int v, int p, std::uint64_t seed) {
  if (v < 1 || p < 1) throw InputError("EmbeddingParams: v and p must be >= 1");
  return {v, p, random_complex_gaussian(v * p, p, 1.0 / p, seed)};
}

Povm build_povm(const EmbeddingParams& params) {
  const int v = params.v;
  const int p = params.p;
  if (v < 1 || p < 1 || params.gamma.rows() != v * p || params.gamma.cols() != p) {
    std::ostringstream msg;
    msg << "build_povm: gamma must be " << v * p << "x" << p << ", got " << params.gamma.rows()
        << "x" << params.gamma.cols();
    throw DimensionError(msg.str());
  }
  const Mat q = qr_reduced(params.gamma).q;
  Povm povm{v, p, {}, {}};
  povm.kraus.reserve(v);
  povm.effects.reserve(v);
  for (int x = 0; x < v; ++x) {
    Mat block = q.middleRows(x * p, p);
    povm.effects.push_back(block.adjoint() * block);
    povm.kraus.push_back(std::move(block));
  }
  return povm;
}

Povm one_hot_povm(int v) {
  if (v < 1) throw InputError("one_hot_povm: v must be >= 1");
  Povm povm{v, v, {}, {}};
  for (int x = 0; x < v; ++x) {
    Mat proj = Mat::Zero(v, v);
    proj(x, x) = 1.0;
    povm.kraus.push_back(proj);
    povm.effects.push_back(std::move(proj));
  }
  return povm;
}

PovmReport validate_povm(const Povm& povm, double tol) {
  PovmReport report;
  const double inf = std::numeric_limits<double>::infinity();
  const bool shaped = povm.p >= 1 && povm.v >= 1 &&
                      static_cast<int>(povm.effects.size()) == povm.v &&
                      std::all_of(povm.effects.begin(), povm.effects.end(), [&](const Mat& m) {
                        return m.rows() == povm.p && m.cols() == povm.p;
                      });
  if (!shaped) {
    report.max_hermiticity_dev = inf;
    report.min_eigenvalue = -inf;
    report.completeness_dev = inf;
    return report;
  }

  report.min_eigenvalue = inf;
  Mat total = Mat::Zero(povm.p, povm.p);
  bool finite = true;
  for (const auto& m : povm.effects) {
    finite = finite && m.allFinite();
    report.max_hermiticity_dev =
        std::max(report.max_hermiticity_dev, (m - m.adjoint()).cwiseAbs().maxCoeff());
    const Mat herm = 0.5 * (m + m.adjoint());
    if (herm.allFinite()) {
      Eigen::SelfAdjointEigenSolver<Mat> eig(herm, Eigen::EigenvaluesOnly);
      report.min_eigenvalue = std::min(report.min_eigenvalue, eig.eigenvalues().minCoeff());
    } else {
      report.min_eigenvalue = -inf;
    }
    total += m;
  }
  report.completeness_dev = (total - Mat::Identity(povm.p, povm.p)).cwiseAbs().maxCoeff();
  report.pass = finite && report.max_hermiticity_dev <= tol && report.min_eigenvalue >= -tol &&
                report.completeness_dev <= tol;
  return report;
}

Mat qr_backward(const Mat& gamma, const Mat& grad_q) {
  if (grad_q.rows() != gamma.rows() || grad_q.cols() != gamma.cols())
    throw DimensionError("qr_backward: grad_Q shape must match gamma");
  const auto [q, r] = qr_reduced(gamma);

  // With X = Q^H dA R^{-1}, the skew-Hermitian part of Q^H dQ is
  // tril_strict(X) - tril_strict(X)^H + i Im diag(X). Its adjoint applied to
  // M = Q^H G is tril(M - M^H) with the diagonal halved.
  const Mat m = q.adjoint() * grad_q;
  Mat skew = m - m.adjoint();
  Mat lower = skew.triangularView<Eigen::StrictlyLower>();
  lower.diagonal() = 0.5 * skew.diagonal();

  const Mat pre = grad_q - q * m + q * lower;
  // pre * R^{-H} = (R^{-1} pre^H)^H
  return r.triangularView<Eigen::Upper>().solve(pre.adjoint()).adjoint();
}

Embedding Embedding::trainable(EmbeddingParams params) {
  const int v = params.v;
  const int p = params.p;
  if (v < 1 || p < 1 || params.gamma.rows() != v * p || params.gamma.cols() != p)
    throw DimensionError("Embedding: gamma shape does not match (v*p) x p");
  return Embedding(v, p, std::move(params));
}

Embedding Embedding::one_hot(int v) {
  if (v < 1) throw InputError("Embedding: v must be >= 1");
  return Embedding(v, v, std::nullopt);
}

const EmbeddingParams& Embedding::params() const {
  if (!params_) throw StateError("Embedding: one-hot embedding has no trainable parameters");
  return *params_;
}

EmbeddingParams& Embedding::params() {
  if (!params_) throw StateError("Embedding: one-hot embedding has no trainable parameters");
  return *params_;
}

Povm Embedding::povm() const { return params_ ? build_povm(*params_) : one_hot_povm(v_); }

}  // namespace bornseq
