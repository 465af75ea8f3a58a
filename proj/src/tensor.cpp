#include "bornseq/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

#include "bornseq/errors.hpp"

namespace bornseq {

namespace {

std::size_t volume(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::vector<std::size_t> strides_of(const std::vector<std::size_t>& shape) {
  std::vector<std::size_t> strides(shape.size(), 1);
  for (std::size_t k = shape.size(); k-- > 1;) strides[k - 1] = strides[k] * shape[k];
  return strides;
}

// Copies `t` into a matrix whose rows run over `row_axes` and columns over
// `col_axes` (both row-major in the order given).
RowMat flatten(const ComplexTensor& t, const std::vector<std::size_t>& row_axes,
               const std::vector<std::size_t>& col_axes) {
  const auto strides = strides_of(t.shape());
  std::size_t rows = 1, cols = 1;
  for (auto ax : row_axes) rows *= t.dim(ax);
  for (auto ax : col_axes) cols *= t.dim(ax);

  auto offsets = [&](const std::vector<std::size_t>& axes, std::size_t count) {
    std::vector<std::size_t> out(count, 0);
    std::vector<std::size_t> idx(axes.size(), 0);
    for (std::size_t k = 0; k < count; ++k) {
      std::size_t off = 0;
      for (std::size_t q = 0; q < axes.size(); ++q) off += idx[q] * strides[axes[q]];
      out[k] = off;
      for (std::size_t q = axes.size(); q-- > 0;) {
        if (++idx[q] < t.dim(axes[q])) break;
        idx[q] = 0;
      }
    }
    return out;
  };
  const auto row_off = offsets(row_axes, rows);
  const auto col_off = offsets(col_axes, cols);

  RowMat m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = t[row_off[r] + col_off[c]];
  return m;
}

}  // namespace

ComplexTensor::ComplexTensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), data_(volume(shape_), cplx{0.0, 0.0}) {
  for (auto d : shape_)
    if (d == 0) throw DimensionError("ComplexTensor: axis lengths must be positive");
}

ComplexTensor::ComplexTensor(std::vector<std::size_t> shape, std::vector<cplx> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  for (auto d : shape_)
    if (d == 0) throw DimensionError("ComplexTensor: axis lengths must be positive");
  if (volume(shape_) != data_.size()) {
    std::ostringstream msg;
    msg << "ComplexTensor: shape volume " << volume(shape_) << " does not match data length "
        << data_.size();
    throw DimensionError(msg.str());
  }
}

ComplexTensor ComplexTensor::from_matrix(const Mat& m) {
  ComplexTensor t({static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())});
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) t.data_[r * m.cols() + c] = m(r, c);
  return t;
}

std::size_t ComplexTensor::flat_index(std::span<const std::size_t> index) const {
  if (index.size() != shape_.size()) throw DimensionError("ComplexTensor: index rank mismatch");
  std::size_t flat = 0;
  for (std::size_t k = 0; k < index.size(); ++k) {
    if (index[k] >= shape_[k]) throw InputError("ComplexTensor: index out of range");
    flat = flat * shape_[k] + index[k];
  }
  return flat;
}

cplx& ComplexTensor::at(std::span<const std::size_t> index) { return data_[flat_index(index)]; }

const cplx& ComplexTensor::at(std::span<const std::size_t> index) const {
  return data_[flat_index(index)];
}

Mat ComplexTensor::to_matrix() const {
  if (rank() != 2) throw DimensionError("ComplexTensor::to_matrix: tensor is not rank 2");
  return Eigen::Map<const RowMat>(data_.data(), shape_[0], shape_[1]);
}

ComplexTensor& ComplexTensor::operator*=(cplx alpha) {
  for (auto& z : data_) z *= alpha;
  return *this;
}

bool ComplexTensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](const cplx& z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); });
}

ComplexTensor contract(const ComplexTensor& a, const ComplexTensor& b, const AxisPairs& axis_pairs) {
  std::vector<bool> a_used(a.rank(), false), b_used(b.rank(), false);
  std::vector<std::size_t> a_sum, b_sum;
  for (const auto& [ax, bx] : axis_pairs) {
    if (ax >= a.rank() || bx >= b.rank()) {
      std::ostringstream msg;
      msg << "contract: axis pair (" << ax << ", " << bx << ") out of range";
      throw DimensionError(msg.str());
    }
    if (a_used[ax] || b_used[bx]) {
      std::ostringstream msg;
      msg << "contract: axis pair (" << ax << ", " << bx << ") reuses an axis";
      throw DimensionError(msg.str());
    }
    if (a.dim(ax) != b.dim(bx)) {
      std::ostringstream msg;
      msg << "contract: axis " << ax << " of a has length " << a.dim(ax) << " but axis " << bx
          << " of b has length " << b.dim(bx);
      throw DimensionError(msg.str());
    }
    a_used[ax] = b_used[bx] = true;
    a_sum.push_back(ax);
    b_sum.push_back(bx);
  }
  std::vector<std::size_t> a_free, b_free, out_shape;
  for (std::size_t k = 0; k < a.rank(); ++k)
    if (!a_used[k]) {
      a_free.push_back(k);
      out_shape.push_back(a.dim(k));
    }
  for (std::size_t k = 0; k < b.rank(); ++k)
    if (!b_used[k]) {
      b_free.push_back(k);
      out_shape.push_back(b.dim(k));
    }

  const RowMat lhs = flatten(a, a_free, a_sum);
  const RowMat rhs = flatten(b, b_sum, b_free);
  const RowMat prod = lhs * rhs;
  std::vector<cplx> data(prod.data(), prod.data() + prod.size());
  return ComplexTensor(std::move(out_shape), std::move(data));
}

}  // namespace bornseq
