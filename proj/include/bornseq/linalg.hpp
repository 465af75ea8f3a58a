#pragma once

#include <cstdint>

#include "bornseq/tensor.hpp"

namespace bornseq {

struct QrResult {
  Mat q;  // r x c, orthonormal columns
  Mat r;  // c x c, upper triangular, real positive diagonal
};

/// Reduced Householder QR of an r x c matrix (r >= c), normalized so that
/// diag(R) is real and strictly positive. The normalization makes the
/// factorization unique for full-rank input.
///
/// Throws DimensionError when r < c and RankError when some |R_kk| < 1e-12.
QrResult qr_reduced(const Mat& m);

/// Threshold below which a diagonal entry of R counts as rank deficiency.
inline constexpr double kRankTolerance = 1e-12;

/// Q factor of a seeded standard complex Gaussian matrix (E|z|^2 = 1).
Mat random_isometry(int rows, int cols, std::uint64_t seed);

/// Matrix of i.i.d. complex Gaussian entries with E|z|^2 = variance.
Mat random_complex_gaussian(int rows, int cols, double variance, std::uint64_t seed);

/// max_ij |W^H W - I|_ij
double isometry_deviation(const Mat& w);

}  // namespace bornseq
