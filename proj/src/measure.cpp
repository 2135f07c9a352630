#include "freedecay/measure.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "freedecay/errors.hpp"

namespace freedecay {

// ---------------------------------------------------------------- Polynomial

Polynomial::Polynomial(std::vector<Scalar> coeffs) : c_(std::move(coeffs)) { trim(); }

Polynomial Polynomial::monomial(int k, Scalar c) {
  std::vector<Scalar> v(k + 1);
  v[k] = std::move(c);
  return Polynomial(std::move(v));
}

void Polynomial::trim() {
  while (!c_.empty() && c_.back().is_exact() && c_.back().is_zero()) c_.pop_back();
}

bool Polynomial::is_exact() const {
  for (const auto& c : c_)
    if (!c.is_exact()) return false;
  return true;
}

Scalar Polynomial::eval(const Scalar& t) const {
  Scalar acc;
  for (auto it = c_.rbegin(); it != c_.rend(); ++it) acc = acc * t + *it;
  return acc;
}

long double Polynomial::eval(long double t) const {
  long double acc = 0;
  for (auto it = c_.rbegin(); it != c_.rend(); ++it) acc = acc * t + static_cast<long double>(it->real_double());
  return acc;
}

Polynomial& Polynomial::operator+=(const Polynomial& o) {
  if (o.c_.size() > c_.size()) c_.resize(o.c_.size());
  for (std::size_t k = 0; k < o.c_.size(); ++k) c_[k] += o.c_[k];
  trim();
  return *this;
}

Polynomial& Polynomial::operator-=(const Polynomial& o) {
  if (o.c_.size() > c_.size()) c_.resize(o.c_.size());
  for (std::size_t k = 0; k < o.c_.size(); ++k) c_[k] -= o.c_[k];
  trim();
  return *this;
}

Polynomial& Polynomial::operator*=(const Scalar& s) {
  for (auto& c : c_) c *= s;
  trim();
  return *this;
}

Polynomial operator*(const Polynomial& a, const Polynomial& b) {
  if (a.c_.empty() || b.c_.empty()) return Polynomial();
  std::vector<Scalar> out(a.c_.size() + b.c_.size() - 1);
  for (std::size_t i = 0; i < a.c_.size(); ++i) {
    if (a.c_[i].is_exact() && a.c_[i].is_zero()) continue;
    for (std::size_t j = 0; j < b.c_.size(); ++j) out[i + j] += a.c_[i] * b.c_[j];
  }
  return Polynomial(std::move(out));
}

Polynomial Polynomial::shift_up() const {
  if (c_.empty()) return *this;
  std::vector<Scalar> v(c_.size() + 1);
  std::copy(c_.begin(), c_.end(), v.begin() + 1);
  return Polynomial(std::move(v));
}

bool Polynomial::exactly_equal(const Polynomial& o) const {
  if (c_.size() != o.c_.size()) return false;
  for (std::size_t k = 0; k < c_.size(); ++k)
    if (c_[k] != o.c_[k]) return false;
  return true;
}

std::string Polynomial::str() const {
  std::ostringstream os;
  bool first = true;
  for (int k = degree(); k >= 0; --k) {
    if (c_[k].is_exact() && c_[k].is_zero()) continue;
    if (!first) os << " + ";
    os << "(" << c_[k].str() << ")";
    if (k > 0) os << "t^" << k;
    first = false;
  }
  return first ? "0" : os.str();
}

// -------------------------------------------------------- OrthoPolySequence

Polynomial OrthoPolySequence::orthonormal(int k) const {
  if (k < 0 || k > degree()) throw PreconditionError("orthonormal: degree out of range");
  Scalar norm2(1);
  for (int i = 0; i <= k; ++i) norm2 *= beta[i];
  return monic[k] * (Scalar(1) / norm2.sqrt_real());
}

std::vector<long double> OrthoPolySequence::eval_all(int n, long double t) const {
  if (n < 0 || n > degree()) throw PreconditionError("eval_all: degree out of range");
  std::vector<long double> p(n + 1);
  long double prev = 0;
  p[0] = 1.0L / std::sqrt(static_cast<long double>(beta[0].real_double()));
  for (int k = 0; k < n; ++k) {
    long double sb_k = k == 0 ? 0.0L : std::sqrt(static_cast<long double>(beta[k].real_double()));
    long double sb_next = std::sqrt(static_cast<long double>(beta[k + 1].real_double()));
    long double next = ((t - static_cast<long double>(alpha[k].real_double())) * p[k] - sb_k * prev) / sb_next;
    prev = p[k];
    p[k + 1] = next;
  }
  return p;
}

long double OrthoPolySequence::eval_orthonormal(int k, long double t) const { return eval_all(k, t)[k]; }

// ----------------------------------------------------------- CompactMeasure

namespace {

mpz_class binom(unsigned long n, unsigned long k) {
  mpz_class r;
  mpz_bin_uiui(r.get_mpz_t(), n, k);
  return r;
}

Scalar catalan_moment(int k) {
  if (k % 2) return Scalar(0);
  unsigned long h = k / 2;
  return Scalar::exact(mpq_class(binom(2 * h, h), mpz_class(h + 1)));
}

Scalar arcsine_moment(int k) {
  if (k % 2) return Scalar(0);
  unsigned long h = k / 2;
  mpz_class four_pow;
  mpz_ui_pow_ui(four_pow.get_mpz_t(), 4, h);
  return Scalar::exact(mpq_class(binom(2 * h, h), four_pow));
}

}  // namespace

CompactMeasure::CompactMeasure(std::string name, double a, double b, MomentFn moments, int max_moment,
                               DensityFn density, bool atomless)
    : name_(std::move(name)),
      a_(a),
      b_(b),
      moments_(std::move(moments)),
      max_moment_(max_moment),
      density_(std::move(density)),
      atomless_(atomless),
      cache_(std::make_shared<Cache>()) {
  if (!(a < b)) throw PreconditionError("measure support needs a < b");
  Scalar m0 = moment(0);
  if (m0.is_exact() ? m0 != Scalar(1) : std::abs(m0.to_complex() - 1.0) > 1e-12)
    throw PreconditionError("probability measure needs m_0 = 1, got " + m0.str());
}

CompactMeasure CompactMeasure::semicircle() {
  return CompactMeasure(
      "semicircle", -2.0, 2.0, catalan_moment, -1,
      [](double t) { return std::abs(t) >= 2 ? 0.0 : std::sqrt(4 - t * t) / (2 * std::numbers::pi); });
}

CompactMeasure CompactMeasure::lebesgue_symmetric() {
  return CompactMeasure(
      "lebesgue", -1.0, 1.0, [](int k) { return k % 2 ? Scalar(0) : Scalar::rational(1, k + 1); }, -1,
      [](double t) { return std::abs(t) > 1 ? 0.0 : 0.5; });
}

CompactMeasure CompactMeasure::lebesgue_unit() {
  return CompactMeasure(
      "lebesgue01", 0.0, 1.0, [](int k) { return Scalar::rational(1, k + 1); }, -1,
      [](double t) { return (t < 0 || t > 1) ? 0.0 : 1.0; });
}

CompactMeasure CompactMeasure::cosine() {
  return CompactMeasure("cosine", -1.0, 1.0, arcsine_moment, -1, [](double t) {
    return std::abs(t) >= 1 ? 0.0 : 1.0 / (std::numbers::pi * std::sqrt(1 - t * t));
  });
}

CompactMeasure CompactMeasure::uniform_atoms(const std::vector<Scalar>& atoms) {
  if (atoms.empty()) throw PreconditionError("uniform_atoms needs at least one atom");
  double lo = atoms[0].real_double(), hi = lo;
  for (const auto& x : atoms) {
    lo = std::min(lo, x.real_double());
    hi = std::max(hi, x.real_double());
  }
  if (lo == hi) hi = lo + 1.0;
  auto moments = [atoms](int k) {
    Scalar s;
    for (const auto& x : atoms) {
      Scalar p(1);
      for (int i = 0; i < k; ++i) p *= x;
      s += p;
    }
    return s / Scalar(static_cast<long>(atoms.size()));
  };
  return CompactMeasure("atoms", lo, hi, moments, -1, nullptr, false);
}

CompactMeasure CompactMeasure::from_moments(double a, double b, std::vector<Scalar> moments) {
  if (moments.empty()) throw PreconditionError("moment list is empty");
  int max_k = static_cast<int>(moments.size()) - 1;
  auto fn = [m = std::move(moments)](int k) { return m[k]; };
  return CompactMeasure("moments", a, b, fn, max_k, nullptr, true);
}

std::optional<CompactMeasure> CompactMeasure::builtin(const std::string& name) {
  if (name == "semicircle") return semicircle();
  if (name == "lebesgue" || name == "legendre") return lebesgue_symmetric();
  if (name == "lebesgue01") return lebesgue_unit();
  if (name == "cosine") return cosine();
  return std::nullopt;
}

Scalar CompactMeasure::moment(int k) const {
  if (k < 0) throw PreconditionError("negative moment index");
  if (max_moment_ >= 0 && k > max_moment_)
    throw PreconditionError("moment m_" + std::to_string(k) + " requested but only " +
                            std::to_string(max_moment_ + 1) + " moments are known");
  return moments_(k);
}

Scalar CompactMeasure::integrate(const Polynomial& p) const {
  Scalar s;
  for (int k = 0; k <= p.degree(); ++k) {
    const Scalar& c = p.coeffs()[k];
    if (c.is_exact() && c.is_zero()) continue;
    s += c * moment(k);
  }
  return s;
}

OrthoPolySequence CompactMeasure::ortho_polys(int n) const {
  if (n < 0) throw PreconditionError("ortho_polys: negative degree");
  std::lock_guard<std::mutex> lock(cache_->mu);
  OrthoPolySequence& seq = cache_->seq;
  auto& norms2 = cache_->norms2;
  if (seq.monic.empty()) {
    seq.monic.push_back(Polynomial::constant(Scalar(1)));
    norms2.push_back(moment(0));
    seq.beta.push_back(moment(0));
  }
  // Stieltjes procedure; alpha_k is only formed when degree k + 1 is needed.
  while (seq.degree() < n) {
    int k = seq.degree();
    if (static_cast<int>(seq.alpha.size()) == k)
      seq.alpha.push_back(integrate((seq.monic[k] * seq.monic[k]).shift_up()) / norms2[k]);
    Polynomial next = seq.monic[k].shift_up() - seq.alpha[k] * seq.monic[k];
    if (k > 0) next -= seq.beta[k] * seq.monic[k - 1];
    Scalar nn = integrate(next * next);
    Scalar beta = nn / norms2[k];
    bool degenerate = beta.is_exact() ? beta.re_q() <= 0 || beta.real_double() <= 1e-13 : beta.real_double() <= 1e-13;
    if (degenerate)
      throw FinitelySupportedError(k + 1, "measure has <= " + std::to_string(k + 1) +
                                              " atoms: recurrence breaks down at degree " + std::to_string(k + 1));
    seq.monic.push_back(std::move(next));
    seq.beta.push_back(beta);
    norms2.push_back(nn);
  }
  OrthoPolySequence out;
  out.monic.assign(seq.monic.begin(), seq.monic.begin() + n + 1);
  out.alpha.assign(seq.alpha.begin(), seq.alpha.begin() + n);
  out.beta.assign(seq.beta.begin(), seq.beta.begin() + n + 1);
  return out;
}

// --------------------------------------------------------------- sup norms

SupEstimate sup_estimate(const std::function<long double(long double)>& f, double a, double b, int grid) {
  grid = std::max(grid, 2);
  std::vector<long double> xs(grid);
  const long double mid = (static_cast<long double>(a) + b) / 2, half = (static_cast<long double>(b) - a) / 2;
  for (int j = 0; j < grid; ++j) {
    // Ascending Chebyshev-Lobatto points with exact endpoints.
    if (j == 0) xs[j] = a;
    else if (j == grid - 1) xs[j] = b;
    else xs[j] = mid - half * std::cos(std::numbers::pi_v<long double> * j / (grid - 1));
  }
  int best = 0;
  long double best_val = -1;
  for (int j = 0; j < grid; ++j) {
    long double v = std::fabs(f(xs[j]));
    if (v > best_val) {
      best_val = v;
      best = j;
    }
  }
  long double lo = xs[std::max(0, best - 1)], hi = xs[std::min(grid - 1, best + 1)];
  long double best_x = xs[best];
  const long double g = (std::sqrt(5.0L) - 1) / 2;
  long double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
  long double f1 = std::fabs(f(x1)), f2 = std::fabs(f(x2));
  for (int it = 0; it < 200 && hi - lo > 1e-13L * (b - a); ++it) {
    if (f1 > f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - g * (hi - lo);
      f1 = std::fabs(f(x1));
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + g * (hi - lo);
      f2 = std::fabs(f(x2));
    }
  }
  if (f1 > best_val) {
    best_val = f1;
    best_x = x1;
  }
  if (f2 > best_val) {
    best_val = f2;
    best_x = x2;
  }
  return {static_cast<double>(best_val), static_cast<double>(best_x), grid};
}

SupEstimate sup_norm(const Polynomial& p, double a, double b) {
  int deg = std::max(0, p.degree());
  return sup_estimate([&](long double t) { return p.eval(t); }, a, b, 64 * (deg + 1));
}

SupEstimate sup_norm_orthonormal(const OrthoPolySequence& seq, int k, double a, double b) {
  return sup_estimate([&](long double t) { return seq.eval_orthonormal(k, t); }, a, b, 64 * (k + 1));
}

// ------------------------------------------------------------------ Gauss

AlgebraElement GaussDiscretization::embed(const Polynomial& p) const {
  return embed([&](long double t) { return p.eval(t); });
}

AlgebraElement GaussDiscretization::embed(const std::function<long double(long double)>& f) const {
  std::vector<Scalar> vals;
  for (double x : nodes) vals.push_back(Scalar::floating(static_cast<double>(f(x))));
  return algebra->abelian_element(vals);
}

GaussDiscretization gauss_discretize(const CompactMeasure& mu, int n) {
  if (n < 1) throw PreconditionError("gauss_discretize needs N >= 1");
  OrthoPolySequence seq = mu.ortho_polys(n);
  Eigen::MatrixXd j = Eigen::MatrixXd::Zero(n, n);
  for (int k = 0; k < n; ++k) {
    j(k, k) = seq.alpha[k].real_double();
    if (k + 1 < n) j(k, k + 1) = j(k + 1, k) = std::sqrt(seq.beta[k + 1].real_double());
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(j);
  GaussDiscretization out;
  std::vector<Scalar> weights;
  double m0 = seq.beta[0].real_double();
  for (int k = 0; k < n; ++k) {
    double v0 = es.eigenvectors()(0, k);
    out.nodes.push_back(es.eigenvalues()(k));
    out.weights.push_back(m0 * v0 * v0);
  }
  // Renormalize the rounding drift so the weights sum to one.
  double total = 0;
  for (double w : out.weights) total += w;
  for (double& w : out.weights) {
    w /= total;
    weights.push_back(Scalar::floating(w));
  }
  out.algebra = MatrixBlockAlgebra::abelian(weights);
  return out;
}

SupEstimate degree_rd_constant(const CompactMeasure& mu, int n) {
  if (n == 0) return {1.0, mu.lower(), 1};
  OrthoPolySequence seq = mu.ortho_polys(n);
  auto f = [&](long double t) {
    long double s = 0;
    for (long double p : seq.eval_all(n, t)) s += p * p;
    return std::sqrt(s);
  };
  return sup_estimate(f, mu.lower(), mu.upper(), 64 * (2 * n + 1));
}

double semicircle_cdf(double t) {
  if (t <= -2) return 0.0;
  if (t >= 2) return 1.0;
  return 0.5 + t * std::sqrt(4 - t * t) / (4 * std::numbers::pi) + std::asin(t / 2) / std::numbers::pi;
}

}  // namespace freedecay
