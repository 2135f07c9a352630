#include "freedecay/scalar.hpp"

#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <sstream>
#include <stdexcept>

namespace freedecay {

namespace {

std::string double_bits(double d) {
  if (d == 0.0) d = 0.0;  // fold -0 into +0
  std::uint64_t u = 0;
  std::memcpy(&u, &d, sizeof u);
  std::ostringstream os;
  os << std::hex << u;
  return os.str();
}

}  // namespace

Scalar::Scalar(std::complex<double> z) : exact_(false), z_(z) {}

Scalar Scalar::rational(long num, long den) {
  if (den == 0) throw std::invalid_argument("Scalar::rational: zero denominator");
  Scalar s;
  s.re_ = mpq_class(num, den);
  s.re_.canonicalize();
  return s;
}

Scalar Scalar::exact(const mpq_class& re, const mpq_class& im) {
  Scalar s;
  s.re_ = re;
  s.im_ = im;
  s.re_.canonicalize();
  s.im_.canonicalize();
  return s;
}

Scalar Scalar::floating(double re, double im) { return Scalar(std::complex<double>(re, im)); }

Scalar Scalar::from_decimal(const std::string& raw) {
  std::string text;
  for (char c : raw)
    if (!std::isspace(static_cast<unsigned char>(c))) text.push_back(c);
  if (text.empty()) throw std::invalid_argument("empty numeric literal");
  auto slash = text.find('/');
  if (slash != std::string::npos) {
    mpz_class num(text.substr(0, slash)), den(text.substr(slash + 1));
    if (den == 0) throw std::invalid_argument("zero denominator in '" + raw + "'");
    return exact(mpq_class(num, den));
  }
  std::size_t pos = 0;
  bool negative = false;
  if (text[pos] == '+' || text[pos] == '-') negative = text[pos++] == '-';
  std::string digits;
  long frac_digits = 0;
  bool seen_point = false;
  for (; pos < text.size(); ++pos) {
    char c = text[pos];
    if (std::isdigit(static_cast<unsigned char>(c))) {
      digits.push_back(c);
      if (seen_point) ++frac_digits;
    } else if (c == '.' && !seen_point) {
      seen_point = true;
    } else {
      break;
    }
  }
  long exponent = 0;
  if (pos < text.size()) {
    if (text[pos] != 'e' && text[pos] != 'E')
      throw std::invalid_argument("malformed numeric literal '" + raw + "'");
    exponent = std::stol(text.substr(pos + 1));
  }
  if (digits.empty()) throw std::invalid_argument("malformed numeric literal '" + raw + "'");
  mpz_class mant(digits);
  long shift = exponent - frac_digits;
  mpz_class ten_pow;
  mpz_ui_pow_ui(ten_pow.get_mpz_t(), 10, static_cast<unsigned long>(shift < 0 ? -shift : shift));
  mpq_class q = shift < 0 ? mpq_class(mant, ten_pow) : mpq_class(mant * ten_pow);
  q.canonicalize();
  if (negative) q = -q;
  return exact(q);
}

std::complex<double> Scalar::to_complex() const {
  if (!exact_) return z_;
  return {re_.get_d(), im_.get_d()};
}

bool Scalar::is_zero() const {
  if (exact_) return re_ == 0 && im_ == 0;
  return std::abs(z_) <= kFloatZero;
}

bool Scalar::is_real() const { return exact_ ? im_ == 0 : z_.imag() == 0.0; }

Scalar Scalar::conj() const {
  if (exact_) return exact(re_, -im_);
  return Scalar(std::conj(z_));
}

Scalar Scalar::abs2() const {
  if (exact_) return exact(re_ * re_ + im_ * im_);
  return Scalar(std::complex<double>(std::norm(z_), 0.0));
}

Scalar Scalar::sqrt_real() const {
  if (exact_) {
    if (im_ != 0 || re_ < 0) throw std::domain_error("sqrt_real of a non-(nonnegative real) value");
    if (auto r = exact_sqrt(re_)) return exact(*r);
    return floating(std::sqrt(re_.get_d()));
  }
  return floating(std::sqrt(std::max(0.0, z_.real())));
}

Scalar Scalar::to_floating() const { return Scalar(to_complex()); }

Scalar& Scalar::operator+=(const Scalar& o) {
  if (exact_ && o.exact_) {
    re_ += o.re_;
    im_ += o.im_;
  } else {
    z_ = to_complex() + o.to_complex();
    exact_ = false;
  }
  return *this;
}

Scalar& Scalar::operator-=(const Scalar& o) {
  if (exact_ && o.exact_) {
    re_ -= o.re_;
    im_ -= o.im_;
  } else {
    z_ = to_complex() - o.to_complex();
    exact_ = false;
  }
  return *this;
}

Scalar& Scalar::operator*=(const Scalar& o) {
  if (exact_ && o.exact_) {
    if (im_ == 0 && o.im_ == 0) {
      re_ *= o.re_;
    } else {
      mpq_class re = re_ * o.re_ - im_ * o.im_;
      mpq_class im = re_ * o.im_ + im_ * o.re_;
      re_ = std::move(re);
      im_ = std::move(im);
    }
  } else {
    z_ = to_complex() * o.to_complex();
    exact_ = false;
  }
  return *this;
}

Scalar& Scalar::operator/=(const Scalar& o) {
  if (o.exact_ ? (o.re_ == 0 && o.im_ == 0) : o.z_ == std::complex<double>(0.0, 0.0))
    throw std::domain_error("Scalar division by zero");
  if (exact_ && o.exact_) {
    mpq_class den = o.re_ * o.re_ + o.im_ * o.im_;
    mpq_class re = (re_ * o.re_ + im_ * o.im_) / den;
    mpq_class im = (im_ * o.re_ - re_ * o.im_) / den;
    re_ = std::move(re);
    im_ = std::move(im);
  } else {
    z_ = to_complex() / o.to_complex();
    exact_ = false;
  }
  return *this;
}

Scalar Scalar::operator-() const {
  if (exact_) return exact(-re_, -im_);
  return Scalar(-z_);
}

bool Scalar::operator==(const Scalar& o) const {
  if (exact_ && o.exact_) return re_ == o.re_ && im_ == o.im_;
  return to_complex() == o.to_complex();
}

std::string Scalar::key() const {
  if (exact_) return re_.get_str() + "," + im_.get_str();
  return "f" + double_bits(z_.real()) + "," + double_bits(z_.imag());
}

std::string Scalar::str() const {
  std::ostringstream os;
  if (exact_) {
    os << re_.get_str();
    if (im_ != 0) os << (im_ > 0 ? "+" : "-") << mpq_class(::abs(im_)).get_str() << "i";
  } else {
    os.precision(17);
    os << z_.real();
    if (z_.imag() != 0.0) os << (z_.imag() > 0 ? "+" : "-") << std::abs(z_.imag()) << "i";
  }
  return os.str();
}

std::optional<mpq_class> exact_sqrt(const mpq_class& q) {
  if (q < 0) return std::nullopt;
  const mpz_class& num = q.get_num();
  const mpz_class& den = q.get_den();
  if (!mpz_perfect_square_p(num.get_mpz_t()) || !mpz_perfect_square_p(den.get_mpz_t()))
    return std::nullopt;
  mpz_class rn, rd;
  mpz_sqrt(rn.get_mpz_t(), num.get_mpz_t());
  mpz_sqrt(rd.get_mpz_t(), den.get_mpz_t());
  return mpq_class(rn, rd);
}

}  // namespace freedecay
