#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace bornseq {

using cplx = std::complex<double>;
using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;
using RowMat = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Dense complex array with row-major storage.
class ComplexTensor {
 public:
  ComplexTensor() = default;
  explicit ComplexTensor(std::vector<std::size_t> shape);
  ComplexTensor(std::vector<std::size_t> shape, std::vector<cplx> data);

  static ComplexTensor from_matrix(const Mat& m);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }

  std::span<cplx> data() { return data_; }
  std::span<const cplx> data() const { return data_; }

  cplx& operator[](std::size_t flat) { return data_[flat]; }
  const cplx& operator[](std::size_t flat) const { return data_[flat]; }

  cplx& at(std::span<const std::size_t> index);
  const cplx& at(std::span<const std::size_t> index) const;
  cplx& at(std::initializer_list<std::size_t> index) {
    return at(std::span<const std::size_t>(index.begin(), index.size()));
  }
  const cplx& at(std::initializer_list<std::size_t> index) const {
    return at(std::span<const std::size_t>(index.begin(), index.size()));
  }

  /// Rank-2 tensors only.
  Mat to_matrix() const;

  ComplexTensor& operator*=(cplx alpha);
  bool all_finite() const;

  friend bool operator==(const ComplexTensor&, const ComplexTensor&) = default;

 private:
  std::size_t flat_index(std::span<const std::size_t> index) const;

  std::vector<std::size_t> shape_;
  std::vector<cplx> data_;
};

using AxisPairs = std::vector<std::pair<std::size_t, std::size_t>>;

/// Sums over the paired axes. Result axes are the free axes of `a` followed by
/// the free axes of `b`, each in their original order. An empty pair list gives
/// the outer product.
ComplexTensor contract(const ComplexTensor& a, const ComplexTensor& b, const AxisPairs& axis_pairs);

}  // namespace bornseq
