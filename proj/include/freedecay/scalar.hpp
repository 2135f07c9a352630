#ifndef FREEDECAY_SCALAR_HPP
#define FREEDECAY_SCALAR_HPP

#include <complex>
#include <optional>
#include <ostream>
#include <string>

#include <gmpxx.h>

namespace freedecay {

/// Complex scalar that is either an exact Gaussian rational or a double.
///
/// Arithmetic between two exact values stays exact; any operation touching a
/// floating value produces a floating value. Exactness is what lets the
/// free-product identities be checked as equalities instead of tolerances.
class Scalar {
 public:
  /// Floating magnitudes at or below this are treated as zero by is_zero().
  static constexpr double kFloatZero = 1e-14;

  Scalar() = default;
  Scalar(int v) : re_(v) {}  // NOLINT(google-explicit-constructor)
  Scalar(long v) : re_(v) {}  // NOLINT(google-explicit-constructor)
  Scalar(std::complex<double> z);  // NOLINT(google-explicit-constructor)

  static Scalar rational(long num, long den = 1);
  static Scalar exact(const mpq_class& re, const mpq_class& im = 0);
  static Scalar floating(double re, double im = 0.0);
  /// Parses "3/5", "-0.25", "1e-3" into an exact rational.
  static Scalar from_decimal(const std::string& text);
  static Scalar imag_unit() { return exact(0, 1); }

  bool is_exact() const { return exact_; }
  std::complex<double> to_complex() const;
  double real_double() const { return to_complex().real(); }
  const mpq_class& re_q() const { return re_; }
  const mpq_class& im_q() const { return im_; }

  /// Exact values: exactly zero. Floating values: |z| <= kFloatZero.
  bool is_zero() const;
  bool is_real() const;

  Scalar conj() const;
  /// |z|^2, exact when the value is exact.
  Scalar abs2() const;
  double abs() const { return std::abs(to_complex()); }
  /// Square root of a nonnegative real value; exact when it is a rational
  /// square, otherwise floating.
  Scalar sqrt_real() const;
  Scalar to_floating() const;

  Scalar& operator+=(const Scalar& o);
  Scalar& operator-=(const Scalar& o);
  Scalar& operator*=(const Scalar& o);
  Scalar& operator/=(const Scalar& o);
  Scalar operator-() const;

  friend Scalar operator+(Scalar a, const Scalar& b) { return a += b; }
  friend Scalar operator-(Scalar a, const Scalar& b) { return a -= b; }
  friend Scalar operator*(Scalar a, const Scalar& b) { return a *= b; }
  friend Scalar operator/(Scalar a, const Scalar& b) { return a /= b; }

  /// Exact equality for exact pairs, bitwise complex equality otherwise.
  bool operator==(const Scalar& o) const;
  bool operator!=(const Scalar& o) const { return !(*this == o); }

  /// Canonical text used as a hashing/ordering key.
  std::string key() const;
  std::string str() const;

 private:
  bool exact_ = true;
  mpq_class re_ = 0;
  mpq_class im_ = 0;
  std::complex<double> z_{0.0, 0.0};
};

inline std::ostream& operator<<(std::ostream& os, const Scalar& s) { return os << s.str(); }

/// Exact square root of a nonnegative rational if it is a perfect square.
std::optional<mpq_class> exact_sqrt(const mpq_class& q);

}  // namespace freedecay

#endif  // FREEDECAY_SCALAR_HPP
