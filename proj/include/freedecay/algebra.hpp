#ifndef FREEDECAY_ALGEBRA_HPP
#define FREEDECAY_ALGEBRA_HPP

#include <memory>
#include <string>
#include <vector>

#include "freedecay/cmatrix.hpp"
#include "freedecay/scalar.hpp"

namespace freedecay {

class MatrixBlockAlgebra;
class AlgebraElement;
using AlgebraPtr = std::shared_ptr<const MatrixBlockAlgebra>;

/// A finite-dimensional C*-probability space: a direct sum of full matrix
/// blocks M_{n_1} + ... + M_{n_B} with the faithful state
/// rho(x) = sum_b trace(D_b x_b).
class MatrixBlockAlgebra : public std::enable_shared_from_this<MatrixBlockAlgebra> {
 public:
  /// Validates that the densities are Hermitian, positive definite and of
  /// total trace one; throws PreconditionError otherwise.
  static AlgebraPtr make(std::vector<CMatrix> densities);
  /// C^m with atom weights w_1..w_m.
  static AlgebraPtr abelian(const std::vector<Scalar>& weights);
  /// C^m with uniform weights.
  static AlgebraPtr uniform_abelian(int m);
  /// (M_n, tr) with the normalized trace.
  static AlgebraPtr matrix_tracial(int n);
  /// Single block M_n with a diagonal density.
  static AlgebraPtr matrix_diagonal_state(const std::vector<Scalar>& diag);

  int num_blocks() const { return static_cast<int>(dims_.size()); }
  const std::vector<int>& block_dims() const { return dims_; }
  int block_dim(int b) const { return dims_[b]; }
  const CMatrix& density(int b) const { return densities_[b]; }
  /// Total weight trace(D_b) of block b.
  const Scalar& block_weight(int b) const { return weights_[b]; }
  /// Vector-space dimension sum n_b^2.
  int dimension() const { return dimension_; }
  bool is_exact() const;
  /// True when each density is a scalar multiple of the identity.
  bool is_tracial() const { return tracial_; }
  bool is_abelian() const;
  std::string key() const { return key_; }
  std::string describe() const;

  AlgebraElement one() const;
  AlgebraElement zero() const;
  /// Matrix unit E_{ij} of block b.
  AlgebraElement unit(int b, int i, int j) const;
  /// Element with the given blocks; shapes are checked.
  AlgebraElement element(std::vector<CMatrix> blocks) const;
  /// Abelian shorthand: element (x_1,..,x_m) of C^m (all blocks 1x1).
  AlgebraElement abelian_element(const std::vector<Scalar>& entries) const;

 private:
  MatrixBlockAlgebra() = default;
  std::vector<int> dims_;
  std::vector<CMatrix> densities_;
  std::vector<Scalar> weights_;
  int dimension_ = 0;
  bool tracial_ = false;
  std::string key_;
};

bool same_algebra(const AlgebraPtr& a, const AlgebraPtr& b);

class AlgebraElement {
 public:
  AlgebraElement() = default;
  AlgebraElement(AlgebraPtr owner, std::vector<CMatrix> blocks);

  const AlgebraPtr& owner() const { return owner_; }
  const std::vector<CMatrix>& blocks() const { return blocks_; }
  const CMatrix& block(int b) const { return blocks_[b]; }
  CMatrix& block(int b) { return blocks_[b]; }

  bool is_exact() const;
  bool is_zero() const;
  bool exactly_equal(const AlgebraElement& o) const;
  AlgebraElement adjoint() const;
  AlgebraElement to_floating() const;
  /// Coordinates concatenated block by block in row-major order.
  std::vector<Scalar> coordinates() const;
  std::string key() const;

  AlgebraElement& operator+=(const AlgebraElement& o);
  AlgebraElement& operator-=(const AlgebraElement& o);
  AlgebraElement& operator*=(const Scalar& s);
  friend AlgebraElement operator+(AlgebraElement a, const AlgebraElement& b) { return a += b; }
  friend AlgebraElement operator-(AlgebraElement a, const AlgebraElement& b) { return a -= b; }
  friend AlgebraElement operator*(AlgebraElement a, const Scalar& s) { return a *= s; }
  friend AlgebraElement operator*(const Scalar& s, AlgebraElement a) { return a *= s; }
  friend AlgebraElement operator*(const AlgebraElement& a, const AlgebraElement& b);
  AlgebraElement operator-() const { return *this * Scalar(-1); }

 private:
  AlgebraPtr owner_;
  std::vector<CMatrix> blocks_;
};

/// rho(x) = sum_b trace(D_b x_b).
Scalar state(const AlgebraElement& x);
/// <x, y> = rho(y* x).
Scalar l2_inner(const AlgebraElement& x, const AlgebraElement& y);
/// ||x||_2 = rho(x* x)^{1/2}, in double precision.
double l2_norm(const AlgebraElement& x);
/// Max over blocks of the spectral norm (double precision).
double op_norm(const AlgebraElement& x);
AlgebraElement center(const AlgebraElement& x);

/// Orthogonal (unnormalized) basis of A minus C1 from Gram-Schmidt over the
/// matrix units, together with the squared l2 norms. Exact for exact algebras.
struct OrthogonalBasis {
  std::vector<AlgebraElement> vectors;
  std::vector<Scalar> norms2;
};
OrthogonalBasis orthogonal_complement(const AlgebraPtr& a);

/// Orthonormal basis of A minus C1; entries stay exact where the squared
/// norms are rational squares.
std::vector<AlgebraElement> onb_complement(const AlgebraPtr& a);

/// Gram-Schmidt with respect to l2_inner on an arbitrary spanning list;
/// residuals with ||.||_2 < 1e-12 are dropped. Result is orthonormal.
std::vector<AlgebraElement> orthonormalize(const std::vector<AlgebraElement>& span);

/// ||sum_i x_i x_i^*||^{1/2}; 0 for an empty list.
double dn_norm(const std::vector<AlgebraElement>& vectors);

/// ||x* x - 1|| and ||x x* - 1|| both below tol (exactly zero for exact x
/// when tol is 0).
bool is_unitary(const AlgebraElement& x, double tol = 1e-12);
/// x commutes with every density, i.e. x lies in the centralizer of rho.
bool in_centralizer(const AlgebraElement& x, double tol = 1e-12);

/// Numerical Hermitian-part eigendecomposition of block b's density:
/// columns are eigenvectors, sorted by eigenvalue.
Eigen::MatrixXcd density_eigenbasis(const AlgebraPtr& a, int b, Eigen::VectorXd* eigenvalues = nullptr);

}  // namespace freedecay

#endif  // FREEDECAY_ALGEBRA_HPP
