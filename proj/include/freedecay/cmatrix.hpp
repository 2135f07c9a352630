#ifndef FREEDECAY_CMATRIX_HPP
#define FREEDECAY_CMATRIX_HPP

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "freedecay/scalar.hpp"

namespace freedecay {

/// Small dense row-major matrix of Scalar entries.
class CMatrix {
 public:
  CMatrix() = default;
  CMatrix(int rows, int cols) : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols) {}

  static CMatrix identity(int n);
  static CMatrix unit(int n, int i, int j);
  static CMatrix diagonal(const std::vector<Scalar>& diag);
  static CMatrix from_eigen(const Eigen::MatrixXcd& m);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  Scalar& operator()(int i, int j) { return data_[static_cast<std::size_t>(i) * cols_ + j]; }
  const Scalar& operator()(int i, int j) const { return data_[static_cast<std::size_t>(i) * cols_ + j]; }

  bool is_exact() const;
  bool is_zero() const;
  bool exactly_equal(const CMatrix& o) const;

  CMatrix adjoint() const;
  Scalar trace() const;
  CMatrix to_floating() const;
  Eigen::MatrixXcd to_eigen() const;

  CMatrix& operator+=(const CMatrix& o);
  CMatrix& operator-=(const CMatrix& o);
  CMatrix& operator*=(const Scalar& s);
  friend CMatrix operator+(CMatrix a, const CMatrix& b) { return a += b; }
  friend CMatrix operator-(CMatrix a, const CMatrix& b) { return a -= b; }
  friend CMatrix operator*(CMatrix a, const Scalar& s) { return a *= s; }
  friend CMatrix operator*(const Scalar& s, CMatrix a) { return a *= s; }
  friend CMatrix operator*(const CMatrix& a, const CMatrix& b);

  /// trace(a * b) without forming the product.
  friend Scalar trace_of_product(const CMatrix& a, const CMatrix& b);

  std::string key() const;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<Scalar> data_;
};

/// Largest singular value, from the Hermitian eigendecomposition of m*m for
/// dimension <= 512 and deterministic power iteration above that.
double spectral_norm(const Eigen::MatrixXcd& m);

}  // namespace freedecay

#endif  // FREEDECAY_CMATRIX_HPP
