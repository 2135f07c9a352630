#include "freedecay/algebra.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "freedecay/errors.hpp"

namespace freedecay {

namespace {

constexpr double kTol = 1e-12;

bool hermitian(const CMatrix& d) {
  for (int i = 0; i < d.rows(); ++i)
    for (int j = 0; j <= i; ++j) {
      const Scalar& a = d(i, j);
      Scalar b = d(j, i).conj();
      if (a.is_exact() && b.is_exact()) {
        if (a != b) return false;
      } else if (std::abs(a.to_complex() - b.to_complex()) > kTol) {
        return false;
      }
    }
  return true;
}

void check_owner(const AlgebraElement& x, const AlgebraElement& y, const char* what) {
  if (!same_algebra(x.owner(), y.owner())) throw StructuralError(std::string(what) + ": owner mismatch");
}

}  // namespace

AlgebraPtr MatrixBlockAlgebra::make(std::vector<CMatrix> densities) {
  if (densities.empty()) throw PreconditionError("algebra needs at least one block");
  std::shared_ptr<MatrixBlockAlgebra> a(new MatrixBlockAlgebra());
  Scalar total;
  a->tracial_ = true;
  std::ostringstream key;
  for (auto& d : densities) {
    if (d.rows() < 1 || d.rows() != d.cols()) throw PreconditionError("density must be a nonempty square matrix");
    if (!hermitian(d)) throw PreconditionError("density is not Hermitian");
    Eigen::LLT<Eigen::MatrixXcd> llt(d.to_eigen());
    if (llt.info() != Eigen::Success) throw PreconditionError("density is not positive definite (state not faithful)");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(d.to_eigen(), Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() <= 0.0) throw PreconditionError("density is not positive definite (state not faithful)");
    Scalar w = d.trace();
    total += w;
    a->dims_.push_back(d.rows());
    a->weights_.push_back(w);
    a->dimension_ += d.rows() * d.rows();
    for (int i = 0; i < d.rows() && a->tracial_; ++i)
      for (int j = 0; j < d.rows(); ++j) {
        Scalar expect = i == j ? d(0, 0) : Scalar(0);
        if (d(i, j).is_exact() && expect.is_exact() ? d(i, j) != expect
                                                    : std::abs(d(i, j).to_complex() - expect.to_complex()) > kTol) {
          a->tracial_ = false;
          break;
        }
      }
    key << "[" << d.key() << "]";
  }
  if (total.is_exact() ? total != Scalar(1) : std::abs(total.to_complex() - 1.0) > kTol)
    throw PreconditionError("densities must have total trace 1, got " + total.str());
  a->densities_ = std::move(densities);
  a->key_ = key.str();
  return a;
}

AlgebraPtr MatrixBlockAlgebra::abelian(const std::vector<Scalar>& weights) {
  std::vector<CMatrix> ds;
  for (const auto& w : weights) {
    CMatrix d(1, 1);
    d(0, 0) = w;
    ds.push_back(d);
  }
  return make(std::move(ds));
}

AlgebraPtr MatrixBlockAlgebra::uniform_abelian(int m) {
  return abelian(std::vector<Scalar>(m, Scalar::rational(1, m)));
}

AlgebraPtr MatrixBlockAlgebra::matrix_tracial(int n) {
  return make({CMatrix::identity(n) * Scalar::rational(1, n)});
}

AlgebraPtr MatrixBlockAlgebra::matrix_diagonal_state(const std::vector<Scalar>& diag) {
  return make({CMatrix::diagonal(diag)});
}

bool MatrixBlockAlgebra::is_exact() const {
  for (const auto& d : densities_)
    if (!d.is_exact()) return false;
  return true;
}

bool MatrixBlockAlgebra::is_abelian() const {
  for (int n : dims_)
    if (n != 1) return false;
  return true;
}

std::string MatrixBlockAlgebra::describe() const {
  std::ostringstream os;
  if (is_abelian()) {
    os << "C^" << dims_.size() << "(";
    for (std::size_t b = 0; b < weights_.size(); ++b) os << (b ? "," : "") << weights_[b].str();
    os << ")";
    return os.str();
  }
  for (std::size_t b = 0; b < dims_.size(); ++b) os << (b ? "+" : "") << "M" << dims_[b];
  os << (tracial_ ? " tracial" : " nontracial");
  return os.str();
}

AlgebraElement MatrixBlockAlgebra::one() const {
  std::vector<CMatrix> bl;
  for (int n : dims_) bl.push_back(CMatrix::identity(n));
  return AlgebraElement(shared_from_this(), std::move(bl));
}

AlgebraElement MatrixBlockAlgebra::zero() const {
  std::vector<CMatrix> bl;
  for (int n : dims_) bl.emplace_back(n, n);
  return AlgebraElement(shared_from_this(), std::move(bl));
}

AlgebraElement MatrixBlockAlgebra::unit(int b, int i, int j) const {
  AlgebraElement z = zero();
  z.block(b)(i, j) = Scalar(1);
  return z;
}

AlgebraElement MatrixBlockAlgebra::element(std::vector<CMatrix> blocks) const {
  return AlgebraElement(shared_from_this(), std::move(blocks));
}

AlgebraElement MatrixBlockAlgebra::abelian_element(const std::vector<Scalar>& entries) const {
  if (!is_abelian() || entries.size() != dims_.size())
    throw StructuralError("abelian_element: algebra is not C^m of matching size");
  std::vector<CMatrix> bl;
  for (const auto& e : entries) {
    CMatrix m(1, 1);
    m(0, 0) = e;
    bl.push_back(m);
  }
  return element(std::move(bl));
}

bool same_algebra(const AlgebraPtr& a, const AlgebraPtr& b) {
  if (a == b) return true;
  return a && b && a->key() == b->key();
}

AlgebraElement::AlgebraElement(AlgebraPtr owner, std::vector<CMatrix> blocks)
    : owner_(std::move(owner)), blocks_(std::move(blocks)) {
  if (!owner_) throw StructuralError("element without an owner algebra");
  if (static_cast<int>(blocks_.size()) != owner_->num_blocks())
    throw StructuralError("element has the wrong number of blocks");
  for (int b = 0; b < owner_->num_blocks(); ++b)
    if (blocks_[b].rows() != owner_->block_dim(b) || blocks_[b].cols() != owner_->block_dim(b))
      throw StructuralError("element block shape does not match the algebra");
}

bool AlgebraElement::is_exact() const {
  for (const auto& b : blocks_)
    if (!b.is_exact()) return false;
  return true;
}

bool AlgebraElement::is_zero() const {
  for (const auto& b : blocks_)
    if (!b.is_zero()) return false;
  return true;
}

bool AlgebraElement::exactly_equal(const AlgebraElement& o) const {
  if (!same_algebra(owner_, o.owner_)) return false;
  for (std::size_t b = 0; b < blocks_.size(); ++b)
    if (!blocks_[b].exactly_equal(o.blocks_[b])) return false;
  return true;
}

AlgebraElement AlgebraElement::adjoint() const {
  std::vector<CMatrix> bl;
  for (const auto& b : blocks_) bl.push_back(b.adjoint());
  return AlgebraElement(owner_, std::move(bl));
}

AlgebraElement AlgebraElement::to_floating() const {
  std::vector<CMatrix> bl;
  for (const auto& b : blocks_) bl.push_back(b.to_floating());
  return AlgebraElement(owner_, std::move(bl));
}

std::vector<Scalar> AlgebraElement::coordinates() const {
  std::vector<Scalar> c;
  for (const auto& b : blocks_)
    for (int i = 0; i < b.rows(); ++i)
      for (int j = 0; j < b.cols(); ++j) c.push_back(b(i, j));
  return c;
}

std::string AlgebraElement::key() const {
  std::string k;
  for (const auto& b : blocks_) {
    k += b.key();
    k.push_back('|');
  }
  return k;
}

AlgebraElement& AlgebraElement::operator+=(const AlgebraElement& o) {
  check_owner(*this, o, "element +");
  for (std::size_t b = 0; b < blocks_.size(); ++b) blocks_[b] += o.blocks_[b];
  return *this;
}

AlgebraElement& AlgebraElement::operator-=(const AlgebraElement& o) {
  check_owner(*this, o, "element -");
  for (std::size_t b = 0; b < blocks_.size(); ++b) blocks_[b] -= o.blocks_[b];
  return *this;
}

AlgebraElement& AlgebraElement::operator*=(const Scalar& s) {
  for (auto& b : blocks_) b *= s;
  return *this;
}

AlgebraElement operator*(const AlgebraElement& a, const AlgebraElement& b) {
  check_owner(a, b, "element *");
  std::vector<CMatrix> bl;
  for (std::size_t k = 0; k < a.blocks_.size(); ++k) bl.push_back(a.blocks_[k] * b.blocks_[k]);
  return AlgebraElement(a.owner_, std::move(bl));
}

Scalar state(const AlgebraElement& x) {
  const auto& a = x.owner();
  Scalar s;
  for (int b = 0; b < a->num_blocks(); ++b) s += trace_of_product(a->density(b), x.block(b));
  return s;
}

Scalar l2_inner(const AlgebraElement& x, const AlgebraElement& y) {
  check_owner(x, y, "l2_inner");
  return state(y.adjoint() * x);
}

double l2_norm(const AlgebraElement& x) { return std::sqrt(std::max(0.0, l2_inner(x, x).real_double())); }

double op_norm(const AlgebraElement& x) {
  double n = 0.0;
  for (const auto& b : x.blocks()) n = std::max(n, spectral_norm(b.to_eigen()));
  return n;
}

AlgebraElement center(const AlgebraElement& x) { return x - state(x) * x.owner()->one(); }

namespace {

bool negligible(const Scalar& norm2) {
  if (norm2.is_exact()) return norm2.re_q() == 0 && norm2.im_q() == 0;
  return norm2.real_double() < kTol * kTol;
}

// Gram-Schmidt against an orthogonal family with known squared norms.
AlgebraElement residual(const AlgebraElement& v, const std::vector<AlgebraElement>& basis,
                        const std::vector<Scalar>& norms2) {
  AlgebraElement r = v;
  for (std::size_t p = 0; p < basis.size(); ++p) {
    Scalar c = l2_inner(v, basis[p]);
    if (c.is_zero()) continue;
    r -= (c / norms2[p]) * basis[p];
  }
  return r;
}

}  // namespace

OrthogonalBasis orthogonal_complement(const AlgebraPtr& a) {
  std::vector<AlgebraElement> basis{a->one()};
  std::vector<Scalar> norms2{Scalar(1)};
  for (int b = 0; b < a->num_blocks(); ++b)
    for (int i = 0; i < a->block_dim(b); ++i)
      for (int j = 0; j < a->block_dim(b); ++j) {
        AlgebraElement r = residual(a->unit(b, i, j), basis, norms2);
        Scalar n2 = l2_inner(r, r);
        if (negligible(n2)) continue;
        basis.push_back(std::move(r));
        norms2.push_back(n2);
      }
  OrthogonalBasis out;
  out.vectors.assign(basis.begin() + 1, basis.end());
  out.norms2.assign(norms2.begin() + 1, norms2.end());
  return out;
}

std::vector<AlgebraElement> onb_complement(const AlgebraPtr& a) {
  OrthogonalBasis ob = orthogonal_complement(a);
  std::vector<AlgebraElement> out;
  for (std::size_t k = 0; k < ob.vectors.size(); ++k) out.push_back(ob.vectors[k] * (Scalar(1) / ob.norms2[k].sqrt_real()));
  return out;
}

std::vector<AlgebraElement> orthonormalize(const std::vector<AlgebraElement>& span) {
  std::vector<AlgebraElement> basis;
  std::vector<Scalar> ones;
  for (const auto& v : span) {
    AlgebraElement r = residual(v, basis, ones);
    Scalar n2 = l2_inner(r, r);
    if (negligible(n2)) continue;
    basis.push_back(r * (Scalar(1) / n2.sqrt_real()));
    ones.push_back(Scalar(1));
  }
  return basis;
}

double dn_norm(const std::vector<AlgebraElement>& vectors) {
  if (vectors.empty()) return 0.0;
  AlgebraElement s = vectors.front().owner()->zero();
  for (const auto& x : vectors) s += x * x.adjoint();
  return std::sqrt(op_norm(s));
}

bool is_unitary(const AlgebraElement& x, double tol) {
  AlgebraElement one = x.owner()->one();
  AlgebraElement a = x.adjoint() * x - one;
  AlgebraElement b = x * x.adjoint() - one;
  if (a.is_exact() && b.is_exact() && (a.is_zero() && b.is_zero())) return true;
  return op_norm(a) <= tol && op_norm(b) <= tol;
}

bool in_centralizer(const AlgebraElement& x, double tol) {
  const auto& a = x.owner();
  for (int b = 0; b < a->num_blocks(); ++b) {
    CMatrix c = a->density(b) * x.block(b) - x.block(b) * a->density(b);
    if (c.is_exact()) {
      if (!c.is_zero()) return false;
    } else if (spectral_norm(c.to_eigen()) > tol) {
      return false;
    }
  }
  return true;
}

Eigen::MatrixXcd density_eigenbasis(const AlgebraPtr& a, int b, Eigen::VectorXd* eigenvalues) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(a->density(b).to_eigen());
  if (eigenvalues) *eigenvalues = es.eigenvalues();
  return es.eigenvectors();
}

}  // namespace freedecay
