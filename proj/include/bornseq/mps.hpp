#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "bornseq/povm.hpp"
#include "bornseq/tensor.hpp"

namespace bornseq {

/// Right-canonical open-boundary matrix product state.
///
/// Site i (0-based) holds a tensor of shape (D_i, p, D_{i+1}) with
/// D_0 = D_n = 1. Reshaped to W_i with rows (s, b) and columns a, i.e.
/// W_i[s*D_{i+1} + b, a] = A_i[a, s, b], each site is an isometry
/// W_i^H W_i = I. Summing a site's physical leg against the identity therefore
/// collapses everything to its right, which is what makes suffix marginals free.
///
/// The per-site physical slices A_i[:, s, :] are cached alongside the tensors.
class IsometricMps {
 public:
  /// Checks shapes and bond consistency only; isometry is reported by check_isometry.
  static IsometricMps from_tensors(std::vector<ComplexTensor> tensors);

  int n() const { return static_cast<int>(tensors_.size()); }
  int p() const { return p_; }
  /// D_0 .. D_n
  const std::vector<int>& bond_dims() const { return bond_dims_; }
  int max_bond() const;

  const ComplexTensor& tensor(int site) const { return tensors_.at(site); }
  const std::vector<ComplexTensor>& tensors() const { return tensors_; }
  void set_tensor(int site, ComplexTensor t);

  /// p matrices of shape D_site x D_{site+1}.
  const std::vector<Mat>& slices(int site) const { return slices_.at(site); }

  Mat w_matrix(int site) const;
  void set_w_matrix(int site, const Mat& w);

  static ComplexTensor tensor_from_w(const Mat& w, int left, int phys, int right);
  static Mat w_from_tensor(const ComplexTensor& t);

 private:
  void refresh_slices(int site);

  int p_ = 0;
  std::vector<int> bond_dims_;
  std::vector<ComplexTensor> tensors_;
  std::vector<std::vector<Mat>> slices_;
};

/// min(d_max, p^i, p^(n-i)) for i = 0..n
std::vector<int> capped_bond_profile(int n, int p, int d_max);

IsometricMps init_random_mps(int n, int p, int d_max, std::uint64_t seed);

struct IsometryReport {
  std::vector<double> site_deviation;
  double max_deviation = 0.0;
  bool pass = false;
};

IsometryReport check_isometry(const IsometricMps& mps, double tol);

cplx amplitude(const IsometricMps& mps, std::span<const int> basis);

/// <Psi| M(x_1) x ... x M(x_n) |Psi> by one left-to-right transfer sweep.
double sequence_probability(const IsometricMps& mps, const Povm& povm, std::span<const int> tokens);

namespace transfer {

/// sum_{s,t} M[s,t] A_s^H L A_t, or sum_s A_s^H L A_s when effect is null.
Mat left(const Mat& env, const std::vector<Mat>& slices, const Mat* effect);

/// sum_{s,t} M[s,t] conj(A_s) R A_t^T, or the identity-effect variant.
Mat right(const Mat& env, const std::vector<Mat>& slices, const Mat* effect);

/// K[s,t] = tr(A_s^H L A_t R^T); the probability is sum_{s,t} M[s,t] K[s,t].
Mat site_kernel(const Mat& left_env, const Mat& right_env, const std::vector<Mat>& slices);

/// sum_{s,t} M[s,t] K[s,t]
cplx pair(const Mat& effect, const Mat& kernel);

}  // namespace transfer

}  // namespace bornseq
