#ifndef FREEDECAY_MEASURE_HPP
#define FREEDECAY_MEASURE_HPP

#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "freedecay/algebra.hpp"
#include "freedecay/scalar.hpp"

namespace freedecay {

/// Dense univariate polynomial, coefficients in ascending degree.
class Polynomial {
 public:
  Polynomial() = default;
  explicit Polynomial(std::vector<Scalar> coeffs);
  static Polynomial monomial(int k, Scalar c = Scalar(1));
  static Polynomial constant(Scalar c) { return Polynomial({std::move(c)}); }

  /// -1 for the zero polynomial.
  int degree() const { return static_cast<int>(c_.size()) - 1; }
  const std::vector<Scalar>& coeffs() const { return c_; }
  Scalar coeff(int k) const { return k < static_cast<int>(c_.size()) ? c_[k] : Scalar(0); }
  bool is_exact() const;
  bool is_zero() const { return c_.empty(); }

  Scalar eval(const Scalar& t) const;
  long double eval(long double t) const;

  Polynomial& operator+=(const Polynomial& o);
  Polynomial& operator-=(const Polynomial& o);
  Polynomial& operator*=(const Scalar& s);
  friend Polynomial operator+(Polynomial a, const Polynomial& b) { return a += b; }
  friend Polynomial operator-(Polynomial a, const Polynomial& b) { return a -= b; }
  friend Polynomial operator*(Polynomial a, const Scalar& s) { return a *= s; }
  friend Polynomial operator*(const Scalar& s, Polynomial a) { return a *= s; }
  friend Polynomial operator*(const Polynomial& a, const Polynomial& b);
  /// t * p(t).
  Polynomial shift_up() const;
  bool exactly_equal(const Polynomial& o) const;
  std::string str() const;

 private:
  void trim();
  std::vector<Scalar> c_;
};

/// Three-term recurrence data of the monic orthogonal polynomials
///   pi_{k+1}(t) = (t - alpha_k) pi_k(t) - beta_k pi_{k-1}(t),
/// with beta_0 = m_0 = 1 so that ||pi_k||^2 = beta_0 * ... * beta_k.
struct OrthoPolySequence {
  std::vector<Scalar> alpha;  // alpha_0..alpha_{n-1}
  std::vector<Scalar> beta;   // beta_0..beta_{n}
  std::vector<Polynomial> monic;  // pi_0..pi_n
  int degree() const { return static_cast<int>(monic.size()) - 1; }

  /// Orthonormal p_k = pi_k / ||pi_k||, exact when ||pi_k||^2 is a rational square.
  Polynomial orthonormal(int k) const;
  /// p_k(t) through the orthonormal recurrence in extended precision.
  long double eval_orthonormal(int k, long double t) const;
  /// p_0(t)..p_n(t) in one sweep.
  std::vector<long double> eval_all(int n, long double t) const;
};

/// Compactly supported probability measure on [a, b], presented by moments.
class CompactMeasure {
 public:
  using MomentFn = std::function<Scalar(int)>;
  using DensityFn = std::function<double(double)>;

  CompactMeasure(std::string name, double a, double b, MomentFn moments, int max_moment = -1,
                 DensityFn density = nullptr, bool atomless = true);

  static CompactMeasure semicircle();
  static CompactMeasure lebesgue_symmetric();  // uniform on [-1,1]
  static CompactMeasure lebesgue_unit();       // uniform on [0,1]
  /// Pushforward of normalized Lebesgue measure on [0, pi] under cos: the
  /// arcsine law on [-1,1], moments binom(2k,k)/4^k.
  static CompactMeasure cosine();
  /// Uniform measure on finitely many rational atoms.
  static CompactMeasure uniform_atoms(const std::vector<Scalar>& atoms);
  /// User measure from a finite moment list (m_0 must be 1).
  static CompactMeasure from_moments(double a, double b, std::vector<Scalar> moments);
  static std::optional<CompactMeasure> builtin(const std::string& name);

  const std::string& name() const { return name_; }
  double lower() const { return a_; }
  double upper() const { return b_; }
  bool atomless() const { return atomless_; }
  bool has_density() const { return static_cast<bool>(density_); }
  double density(double t) const { return density_(t); }
  /// Largest moment index available, or -1 when unbounded.
  int max_moment() const { return max_moment_; }
  Scalar moment(int k) const;
  /// Integral of p against the measure through the moment functional.
  Scalar integrate(const Polynomial& p) const;

  /// Recurrence up to degree n (cached and extended lazily, thread safe).
  /// Throws FinitelySupportedError when beta_k <= 1e-13.
  OrthoPolySequence ortho_polys(int n) const;

 private:
  struct Cache {
    std::mutex mu;
    OrthoPolySequence seq;
    std::vector<Scalar> norms2;  // L(pi_k^2)
  };
  std::string name_;
  double a_, b_;
  MomentFn moments_;
  int max_moment_;
  DensityFn density_;
  bool atomless_;
  std::shared_ptr<Cache> cache_;
};

/// sup |f| on [a,b]: Chebyshev-Lobatto grid of `grid` points (endpoints
/// included) and a golden-section refinement around the grid maximum. The
/// value is a lower estimate of the true maximum.
struct SupEstimate {
  double value = 0.0;
  double argmax = 0.0;
  int grid_points = 0;
};
SupEstimate sup_estimate(const std::function<long double(long double)>& f, double a, double b, int grid);
/// Grid of 64 * (deg + 1) points.
SupEstimate sup_norm(const Polynomial& p, double a, double b);
/// sup of |p_k| for the orthonormal polynomial of degree k, grid 64(k+1).
SupEstimate sup_norm_orthonormal(const OrthoPolySequence& seq, int k, double a, double b);

/// Gauss rule with N nodes from the Jacobi matrix (Golub-Welsch) as the abelian
/// algebra C^N weighted by the Gauss weights.
struct GaussDiscretization {
  AlgebraPtr algebra;
  std::vector<double> nodes;
  std::vector<double> weights;
  /// (p(node_1), ..., p(node_N)).
  AlgebraElement embed(const Polynomial& p) const;
  AlgebraElement embed(const std::function<long double(long double)>& f) const;
};
GaussDiscretization gauss_discretize(const CompactMeasure& mu, int n);

/// C_n = sup_t (sum_{k<=n} p_k(t)^2)^{1/2}: the RD constant of the degree
/// filtration V_n = polynomials of degree <= n.
SupEstimate degree_rd_constant(const CompactMeasure& mu, int n);

/// Distribution function of the semicircle law on [-2,2].
double semicircle_cdf(double t);

}  // namespace freedecay

#endif  // FREEDECAY_MEASURE_HPP
