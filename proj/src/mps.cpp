#include "bornseq/mps.hpp"

#include <algorithm>
#include <sstream>

#include "bornseq/errors.hpp"
#include "bornseq/linalg.hpp"
#include "bornseq/rng.hpp"

namespace bornseq {

IsometricMps IsometricMps::from_tensors(std::vector<ComplexTensor> tensors) {
  if (tensors.empty()) throw DimensionError("IsometricMps: need at least one site");
  IsometricMps mps;
  mps.p_ = static_cast<int>(tensors.front().rank() == 3 ? tensors.front().dim(1) : 0);
  mps.bond_dims_.push_back(1);
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    const auto& t = tensors[i];
    std::ostringstream where;
    where << "IsometricMps: site " << i << ": ";
    if (t.rank() != 3) throw DimensionError(where.str() + "tensor must have rank 3");
    if (static_cast<int>(t.dim(1)) != mps.p_)
      throw DimensionError(where.str() + "physical dimension differs from site 0");
    if (static_cast<int>(t.dim(0)) != mps.bond_dims_.back())
      throw DimensionError(where.str() + "left bond does not match previous right bond");
    mps.bond_dims_.push_back(static_cast<int>(t.dim(2)));
  }
  if (mps.bond_dims_.back() != 1) throw DimensionError("IsometricMps: last right bond must be 1");
  mps.tensors_ = std::move(tensors);
  mps.slices_.resize(mps.tensors_.size());
  for (int i = 0; i < mps.n(); ++i) mps.refresh_slices(i);
  return mps;
}

int IsometricMps::max_bond() const { return *std::max_element(bond_dims_.begin(), bond_dims_.end()); }

void IsometricMps::set_tensor(int site, ComplexTensor t) {
  const auto& old = tensors_.at(site);
  if (t.shape() != old.shape()) {
    std::ostringstream msg;
    msg << "IsometricMps::set_tensor: shape mismatch at site " << site;
    throw DimensionError(msg.str());
  }
  tensors_[site] = std::move(t);
  refresh_slices(site);
}

void IsometricMps::refresh_slices(int site) {
  const auto& t = tensors_[site];
  const int dl = static_cast<int>(t.dim(0));
  const int dr = static_cast<int>(t.dim(2));
  auto& out = slices_[site];
  out.assign(p_, Mat(dl, dr));
  for (int a = 0; a < dl; ++a)
    for (int s = 0; s < p_; ++s)
      for (int b = 0; b < dr; ++b) out[s](a, b) = t[(static_cast<std::size_t>(a) * p_ + s) * dr + b];
}

Mat IsometricMps::w_matrix(int site) const {
  const auto& sl = slices_.at(site);
  const int dl = bond_dims_[site];
  const int dr = bond_dims_[site + 1];
  Mat w(p_ * dr, dl);
  for (int s = 0; s < p_; ++s) w.middleRows(s * dr, dr) = sl[s].transpose();
  return w;
}

ComplexTensor IsometricMps::tensor_from_w(const Mat& w, int left, int phys, int right) {
  if (w.rows() != phys * right || w.cols() != left)
    throw DimensionError("IsometricMps::tensor_from_w: W shape does not match bonds");
  ComplexTensor t({static_cast<std::size_t>(left), static_cast<std::size_t>(phys),
                   static_cast<std::size_t>(right)});
  for (int a = 0; a < left; ++a)
    for (int s = 0; s < phys; ++s)
      for (int b = 0; b < right; ++b)
        t[(static_cast<std::size_t>(a) * phys + s) * right + b] = w(s * right + b, a);
  return t;
}

Mat IsometricMps::w_from_tensor(const ComplexTensor& t) {
  if (t.rank() != 3) throw DimensionError("IsometricMps::w_from_tensor: tensor must have rank 3");
  const auto left = static_cast<Eigen::Index>(t.dim(0));
  const auto phys = static_cast<Eigen::Index>(t.dim(1));
  const auto right = static_cast<Eigen::Index>(t.dim(2));
  Mat w(phys * right, left);
  for (Eigen::Index a = 0; a < left; ++a)
    for (Eigen::Index s = 0; s < phys; ++s)
      for (Eigen::Index b = 0; b < right; ++b) w(s * right + b, a) = t[(a * phys + s) * right + b];
  return w;
}

void IsometricMps::set_w_matrix(int site, const Mat& w) {
  set_tensor(site, tensor_from_w(w, bond_dims_.at(site), p_, bond_dims_.at(site + 1)));
}

std::vector<int> capped_bond_profile(int n, int p, int d_max) {
  std::vector<int> dims(n + 1);
  for (int i = 0; i <= n; ++i) {
    // p^min(i, n-i), saturating at d_max
    long long d = 1;
    for (int k = 0; k < std::min(i, n - i) && d < d_max; ++k) d *= p;
    dims[i] = static_cast<int>(std::min<long long>(d, d_max));
  }
  return dims;
}

IsometricMps init_random_mps(int n, int p, int d_max, std::uint64_t seed) {
  if (n < 1 || p < 1 || d_max < 1) throw InputError("init_random_mps: n, p, d_max must be >= 1");
  const auto dims = capped_bond_profile(n, p, d_max);
  const Rng root(seed);
  std::vector<ComplexTensor> tensors;
  tensors.reserve(n);
  for (int i = 0; i < n; ++i) {
    const Mat w = random_isometry(p * dims[i + 1], dims[i], root.split(i).next_u64());
    tensors.push_back(IsometricMps::tensor_from_w(w, dims[i], p, dims[i + 1]));
  }
  return IsometricMps::from_tensors(std::move(tensors));
}

IsometryReport check_isometry(const IsometricMps& mps, double tol) {
  IsometryReport report;
  bool finite = true;
  for (int i = 0; i < mps.n(); ++i) {
    const Mat w = mps.w_matrix(i);
    finite = finite && w.allFinite();
    const double dev = isometry_deviation(w);
    report.site_deviation.push_back(dev);
    report.max_deviation = std::max(report.max_deviation, dev);
  }
  report.pass = finite && report.max_deviation <= tol;
  return report;
}

cplx amplitude(const IsometricMps& mps, std::span<const int> basis) {
  if (static_cast<int>(basis.size()) != mps.n())
    throw InputError("amplitude: basis length must equal the number of sites");
  Mat row = Mat::Identity(1, 1);
  for (int i = 0; i < mps.n(); ++i) {
    if (basis[i] < 0 || basis[i] >= mps.p()) {
      std::ostringstream msg;
      msg << "amplitude: basis index " << basis[i] << " at site " << i << " out of range";
      throw InputError(msg.str());
    }
    row = row * mps.slices(i)[basis[i]];
  }
  return row(0, 0);
}

double sequence_probability(const IsometricMps& mps, const Povm& povm, std::span<const int> tokens) {
  if (povm.p != mps.p()) {
    std::ostringstream msg;
    msg << "sequence_probability: POVM acts on dimension " << povm.p << " but MPS has p = " << mps.p();
    throw ConfigError(msg.str());
  }
  if (static_cast<int>(tokens.size()) != mps.n())
    throw InputError("sequence_probability: sequence length must equal the number of sites");
  Mat env = Mat::Identity(1, 1);
  for (int i = 0; i < mps.n(); ++i) {
    if (tokens[i] < 0 || tokens[i] >= povm.v) {
      std::ostringstream msg;
      msg << "sequence_probability: token " << tokens[i] << " at site " << i << " out of range";
      throw InputError(msg.str());
    }
    env = transfer::left(env, mps.slices(i), &povm.effects[tokens[i]]);
  }
  return env(0, 0).real();
}

namespace transfer {

Mat left(const Mat& env, const std::vector<Mat>& slices, const Mat* effect) {
  const auto p = static_cast<Eigen::Index>(slices.size());
  const auto dr = slices.front().cols();
  Mat out = Mat::Zero(dr, dr);
  if (effect == nullptr) {
    for (const auto& a : slices) out.noalias() += a.adjoint() * (env * a);
    return out;
  }
  Mat mixed(slices.front().rows(), dr);
  for (Eigen::Index s = 0; s < p; ++s) {
    mixed.setZero();
    for (Eigen::Index t = 0; t < p; ++t) {
      const cplx m = (*effect)(s, t);
      if (m != cplx{0.0, 0.0}) mixed += m * slices[t];
    }
    out.noalias() += slices[s].adjoint() * (env * mixed);
  }
  return out;
}

Mat right(const Mat& env, const std::vector<Mat>& slices, const Mat* effect) {
  const auto p = static_cast<Eigen::Index>(slices.size());
  const auto dl = slices.front().rows();
  Mat out = Mat::Zero(dl, dl);
  if (effect == nullptr) {
    for (const auto& a : slices) out.noalias() += a.conjugate() * (env * a.transpose());
    return out;
  }
  Mat mixed(dl, slices.front().cols());
  for (Eigen::Index s = 0; s < p; ++s) {
    mixed.setZero();
    for (Eigen::Index t = 0; t < p; ++t) {
      const cplx m = (*effect)(s, t);
      if (m != cplx{0.0, 0.0}) mixed += m * slices[t];
    }
    out.noalias() += slices[s].conjugate() * (env * mixed.transpose());
  }
  return out;
}

Mat site_kernel(const Mat& left_env, const Mat& right_env, const std::vector<Mat>& slices) {
  const auto p = static_cast<Eigen::Index>(slices.size());
  Mat kernel(p, p);
  const Mat right_t = right_env.transpose();
  for (Eigen::Index t = 0; t < p; ++t) {
    const Mat c = left_env * slices[t] * right_t;
    for (Eigen::Index s = 0; s < p; ++s) kernel(s, t) = slices[s].conjugate().cwiseProduct(c).sum();
  }
  return kernel;
}

cplx pair(const Mat& effect, const Mat& kernel) { return effect.cwiseProduct(kernel).sum(); }

}  // namespace transfer

}  // namespace bornseq
