#ifndef FREEDECAY_FOCK_HPP
#define FREEDECAY_FOCK_HPP

#include <complex>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "freedecay/freeword.hpp"

namespace freedecay {

using SparseMatrixXcd = Eigen::SparseMatrix<std::complex<double>>;

/// Index tables for the basis of the free-product Hilbert space truncated at
/// a given depth. Basis tensor t is Omega (t = 0) or e^{j}_k (x) tail(t), where
/// e^{j}_k runs over a basis of the centered part of factor j and tail(t) does
/// not start in factor j. Tensors are enumerated layer by layer, so the first
/// dimension(L) indices of a deeper index are the indices of depth L.
class FockIndex {
 public:
  FockIndex(std::vector<int> centered_dims, int depth, long cap);

  int depth() const { return depth_; }
  long size() const { return static_cast<long>(length_.size()); }
  /// Number of tensors of length <= l.
  long size_upto(int l) const { return layer_end_.at(std::min(l, depth_)); }
  int length(long t) const { return length_[t]; }
  int lead_factor(long t) const { return lead_factor_[t]; }
  int lead_index(long t) const { return lead_index_[t]; }
  long tail(long t) const { return tail_[t]; }
  /// Index of e^{j}_k (x) t, or -1 past the depth. Requires lead_factor(t) != j.
  long prepend(int j, int k, long t) const {
    long base = child_[static_cast<std::size_t>(t) * m_ + j];
    return base < 0 ? -1 : base + k;
  }
  /// Slots (factor, basis index) from the leading one.
  std::vector<std::pair<int, int>> slots(long t) const;
  long find(const std::vector<std::pair<int, int>>& slots) const;

  /// 1 + sum over lengths and alternating patterns of the products of dims.
  static double count(const std::vector<int>& centered_dims, int depth);

 private:
  int m_;
  std::vector<int> dims_;
  int depth_;
  std::vector<long> layer_end_;
  std::vector<std::int8_t> length_;
  std::vector<std::int8_t> lead_factor_;
  std::vector<std::int32_t> lead_index_;
  std::vector<std::int32_t> tail_;
  std::vector<std::int32_t> child_;
};

/// Truncated free-product Hilbert space over the factors of an ambient.
/// Coordinates refer to the orthonormal basis built from orthogonal_complement
/// of each factor, normalized.
class TruncatedFock {
 public:
  static constexpr long kDefaultCap = 200000;

  TruncatedFock(AmbientPtr ambient, int depth, long cap = kDefaultCap);

  const AmbientPtr& ambient() const { return ambient_; }
  int depth() const { return depth_; }
  long dimension() const { return index_->size(); }
  long cap() const { return cap_; }
  const FockIndex& index() const { return *index_; }
  /// Orthogonal basis of the centered part of factor j (exact when possible).
  const OrthogonalBasis& factor_basis(int j) const { return bases_.at(j); }
  /// Normalized basis vector k of the centered part of factor j.
  AlgebraElement onb_vector(int j, int k) const;
  /// Index tables at a larger depth over the same factors; the internal cap is
  /// ten times the public one.
  std::shared_ptr<const FockIndex> index_at(int depth) const;

 private:
  AmbientPtr ambient_;
  int depth_;
  long cap_;
  std::vector<OrthogonalBasis> bases_;
  std::shared_ptr<const FockIndex> index_;
};

TruncatedFock build_fock(const AmbientPtr& ambient, int depth, long cap = TruncatedFock::kDefaultCap);

/// P_L lambda(x) P_L in orthonormal coordinates. Words are applied on the
/// untruncated space (internal depth L + max word length) before projecting,
/// so this is the true compression rather than a product of compressions.
SparseMatrixXcd represent(const TruncatedFock& f, const FreeElement& x);
Eigen::MatrixXcd represent_dense(const TruncatedFock& f, const FreeElement& x);

/// lambda(x) Omega in the orthogonal (unnormalized) tensor basis, exact for
/// exact inputs. Tensors longer than the depth are dropped after each letter.
struct FockVector {
  std::map<long, Scalar> coeffs;
};
FockVector apply_to_vacuum(const TruncatedFock& f, const FreeElement& x);
/// Squared norm of basis tensor t in the orthogonal basis.
Scalar basis_norm2(const TruncatedFock& f, long t);
Scalar fock_inner(const TruncatedFock& f, const FockVector& a, const FockVector& b);
/// <lambda(x) Omega, Omega>; equals free_state(x) once depth >= word length.
Scalar vacuum_expectation(const TruncatedFock& f, const FreeElement& x);

/// Largest singular value: dense below 600 rows, otherwise Lanczos on X* X
/// with full reorthogonalization. Ritz values never exceed the true value.
double spectral_norm_sparse(const SparseMatrixXcd& x);

/// Depth max(4, 2 * max word length).
int default_depth(const FreeElement& x);
/// ||P_L lambda(x) P_L||, a lower bound for the reduced norm of x.
double norm_lower_bound(const TruncatedFock& f, const FreeElement& x);
double norm_lower_bound(const FreeElement& x, long cap = TruncatedFock::kDefaultCap);

struct MomentEstimate {
  std::vector<double> moments;  // free_state((x*x)^r), r = 1..r_max
  std::vector<double> s;        // moments[r-1]^{1/(2r)}
  /// (m_r / m_{r-1})^{1/2} with m_0 = 1: nondecreasing, also lower bounds of ||x||.
  std::vector<double> ratio;
  double max = 0.0;
  std::string engine;           // "cumulant", "fock" or "symbolic"
};
/// s_r = free_state((x*x)^r)^{1/(2r)} for r = 1..r_max. Self-adjoint sums of
/// single letters go through free cumulants; otherwise the vacuum vector is
/// propagated on the Fock space, and the symbolic normal form is the last resort.
MomentEstimate moment_norm_estimate(const FreeElement& x, int r_max, long cap = 2000000);

/// Moments m_0..m_n of the free sum c + b_1 + ... + b_k (b_j in factor j),
/// from the factor moments by adding free cumulants. Exact for exact input.
std::vector<Scalar> free_sum_moments(const std::vector<std::vector<Scalar>>& factor_moments, const Scalar& c);
std::vector<Scalar> moments_to_free_cumulants(const std::vector<Scalar>& m);
std::vector<Scalar> free_cumulants_to_moments(const std::vector<Scalar>& k);

}  // namespace freedecay

#endif  // FREEDECAY_FOCK_HPP
