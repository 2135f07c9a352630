#include "freedecay/cmatrix.hpp"

#include <cmath>
#include <random>

#include "freedecay/errors.hpp"

namespace freedecay {

CMatrix CMatrix::identity(int n) {
  CMatrix m(n, n);
  for (int i = 0; i < n; ++i) m(i, i) = Scalar(1);
  return m;
}

CMatrix CMatrix::unit(int n, int i, int j) {
  CMatrix m(n, n);
  m(i, j) = Scalar(1);
  return m;
}

CMatrix CMatrix::diagonal(const std::vector<Scalar>& diag) {
  const int n = static_cast<int>(diag.size());
  CMatrix m(n, n);
  for (int i = 0; i < n; ++i) m(i, i) = diag[i];
  return m;
}

CMatrix CMatrix::from_eigen(const Eigen::MatrixXcd& e) {
  CMatrix m(static_cast<int>(e.rows()), static_cast<int>(e.cols()));
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) m(i, j) = Scalar(e(i, j));
  return m;
}

bool CMatrix::is_exact() const {
  for (const auto& s : data_)
    if (!s.is_exact()) return false;
  return true;
}

bool CMatrix::is_zero() const {
  for (const auto& s : data_)
    if (!s.is_zero()) return false;
  return true;
}

bool CMatrix::exactly_equal(const CMatrix& o) const {
  if (rows_ != o.rows_ || cols_ != o.cols_) return false;
  for (std::size_t k = 0; k < data_.size(); ++k)
    if (data_[k] != o.data_[k]) return false;
  return true;
}

CMatrix CMatrix::adjoint() const {
  CMatrix m(cols_, rows_);
  for (int i = 0; i < rows_; ++i)
    for (int j = 0; j < cols_; ++j) m(j, i) = (*this)(i, j).conj();
  return m;
}

Scalar CMatrix::trace() const {
  Scalar t;
  for (int i = 0; i < std::min(rows_, cols_); ++i) t += (*this)(i, i);
  return t;
}

CMatrix CMatrix::to_floating() const {
  CMatrix m = *this;
  for (auto& s : m.data_) s = s.to_floating();
  return m;
}

Eigen::MatrixXcd CMatrix::to_eigen() const {
  Eigen::MatrixXcd e(rows_, cols_);
  for (int i = 0; i < rows_; ++i)
    for (int j = 0; j < cols_; ++j) e(i, j) = (*this)(i, j).to_complex();
  return e;
}

CMatrix& CMatrix::operator+=(const CMatrix& o) {
  if (rows_ != o.rows_ || cols_ != o.cols_) throw StructuralError("CMatrix +: shape mismatch");
  for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += o.data_[k];
  return *this;
}

CMatrix& CMatrix::operator-=(const CMatrix& o) {
  if (rows_ != o.rows_ || cols_ != o.cols_) throw StructuralError("CMatrix -: shape mismatch");
  for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= o.data_[k];
  return *this;
}

CMatrix& CMatrix::operator*=(const Scalar& s) {
  for (auto& d : data_) d *= s;
  return *this;
}

CMatrix operator*(const CMatrix& a, const CMatrix& b) {
  if (a.cols_ != b.rows_) throw StructuralError("CMatrix *: shape mismatch");
  CMatrix m(a.rows_, b.cols_);
  for (int i = 0; i < a.rows_; ++i)
    for (int k = 0; k < a.cols_; ++k) {
      const Scalar& aik = a(i, k);
      if (aik.is_exact() && aik.re_q() == 0 && aik.im_q() == 0) continue;
      for (int j = 0; j < b.cols_; ++j) {
        const Scalar& bkj = b(k, j);
        if (bkj.is_exact() && bkj.re_q() == 0 && bkj.im_q() == 0) continue;
        m(i, j) += aik * bkj;
      }
    }
  return m;
}

Scalar trace_of_product(const CMatrix& a, const CMatrix& b) {
  if (a.cols_ != b.rows_ || a.rows_ != b.cols_) throw StructuralError("trace_of_product: shape mismatch");
  Scalar t;
  for (int i = 0; i < a.rows_; ++i)
    for (int k = 0; k < a.cols_; ++k) {
      const Scalar& aik = a(i, k);
      if (aik.is_exact() && aik.re_q() == 0 && aik.im_q() == 0) continue;
      t += aik * b(k, i);
    }
  return t;
}

std::string CMatrix::key() const {
  std::string k = std::to_string(rows_) + "x" + std::to_string(cols_) + ":";
  for (const auto& s : data_) {
    k += s.key();
    k.push_back(';');
  }
  return k;
}

namespace {

double power_iteration_norm(const Eigen::MatrixXcd& m) {
  std::mt19937_64 rng(0x5eed);
  std::normal_distribution<double> g;
  Eigen::VectorXcd v(m.cols());
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = {g(rng), g(rng)};
  v.normalize();
  double prev = 0.0;
  for (int it = 0; it < 10000; ++it) {
    Eigen::VectorXcd w = m.adjoint() * (m * v);
    double lambda = w.norm();
    if (lambda == 0.0) return 0.0;
    v = w / lambda;
    if (std::abs(lambda - prev) <= 1e-12 * lambda) return std::sqrt(lambda);
    prev = lambda;
  }
  return std::sqrt(prev);
}

}  // namespace

double spectral_norm(const Eigen::MatrixXcd& m) {
  if (m.size() == 0) return 0.0;
  const Eigen::Index small = std::min(m.rows(), m.cols());
  if (small > 512) return power_iteration_norm(m);
  Eigen::MatrixXcd gram = m.rows() <= m.cols() ? Eigen::MatrixXcd(m * m.adjoint())
                                               : Eigen::MatrixXcd(m.adjoint() * m);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(gram, Eigen::EigenvaluesOnly);
  double top = es.eigenvalues().maxCoeff();
  return std::sqrt(std::max(0.0, top));
}

}  // namespace freedecay
