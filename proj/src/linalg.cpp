#include "bornseq/linalg.hpp"

#include <cmath>
#include <sstream>

#include "bornseq/errors.hpp"
#include "bornseq/rng.hpp"

namespace bornseq {

QrResult qr_reduced(const Mat& m) {
  const auto rows = m.rows();
  const auto cols = m.cols();
  if (rows < cols) {
    std::ostringstream msg;
    msg << "qr_reduced: need rows >= cols, got " << rows << "x" << cols;
    throw DimensionError(msg.str());
  }
  Eigen::HouseholderQR<Mat> qr(m);
  Mat q = qr.householderQ() * Mat::Identity(rows, cols);
  Mat r = qr.matrixQR().topRows(cols).triangularView<Eigen::Upper>();

  // Rotate each column of Q / row of R so that R_kk becomes real positive.
  for (Eigen::Index k = 0; k < cols; ++k) {
    const double mag = std::abs(r(k, k));
    if (!(mag >= kRankTolerance)) {
      std::ostringstream msg;
      msg << "qr_reduced: rank deficient input, |R(" << k << "," << k << ")| = " << mag;
      throw RankError(msg.str());
    }
    const cplx phase = r(k, k) / mag;
    if (phase != cplx{1.0, 0.0}) {
      q.col(k) *= phase;
      r.row(k) *= std::conj(phase);
    }
    r(k, k) = cplx{r(k, k).real(), 0.0};
  }
  return {std::move(q), std::move(r)};
}

Mat random_complex_gaussian(int rows, int cols, double variance, std::uint64_t seed) {
  Rng rng(seed);
  const double scale = std::sqrt(variance / 2.0);
  Mat m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      const double re = rng.normal();
      const double im = rng.normal();
      m(r, c) = cplx{scale * re, scale * im};
    }
  return m;
}

Mat random_isometry(int rows, int cols, std::uint64_t seed) {
  if (rows < cols || cols < 1) {
    std::ostringstream msg;
    msg << "random_isometry: need rows >= cols >= 1, got " << rows << "x" << cols;
    throw DimensionError(msg.str());
  }
  return qr_reduced(random_complex_gaussian(rows, cols, 1.0, seed)).q;
}

double isometry_deviation(const Mat& w) {
  const Mat gram = w.adjoint() * w;
  return (gram - Mat::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff();
}

}  // namespace bornseq
