#ifndef FREEDECAY_FREEWORD_HPP
#define FREEDECAY_FREEWORD_HPP

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "freedecay/algebra.hpp"

namespace freedecay {

/// Ordered list of factor algebras of an algebraic free product.
class FreeAmbient {
 public:
  explicit FreeAmbient(std::vector<AlgebraPtr> factors);
  int size() const { return static_cast<int>(factors_.size()); }
  const AlgebraPtr& factor(int j) const { return factors_.at(j); }
  const std::vector<AlgebraPtr>& factors() const { return factors_; }
  const std::string& key() const { return key_; }

 private:
  std::vector<AlgebraPtr> factors_;
  std::string key_;
};
using AmbientPtr = std::shared_ptr<const FreeAmbient>;
AmbientPtr make_ambient(std::vector<AlgebraPtr> factors);
bool same_ambient(const AmbientPtr& a, const AmbientPtr& b);

/// iota_factor(elem). Factor indices are 0-based.
struct Letter {
  int factor = 0;
  AlgebraElement elem;
  std::string key() const;
};
using Word = std::vector<Letter>;
std::string word_key(const Word& w);

/// Finite linear combination of words. Terms are kept in a map keyed by the
/// canonical word text, so iteration order is deterministic. Letters are
/// stored canonically scaled (first nonzero coordinate equal to 1).
class FreeElement {
 public:
  struct Term {
    Word word;
    Scalar coeff;
  };

  explicit FreeElement(AmbientPtr ambient) : ambient_(std::move(ambient)) {}
  static FreeElement scalar(const AmbientPtr& ambient, const Scalar& c);
  static FreeElement letter(const AmbientPtr& ambient, int factor, const AlgebraElement& a);
  /// Raw (unnormalized) product of the given letters times c.
  static FreeElement word(const AmbientPtr& ambient, const Word& w, const Scalar& c = Scalar(1));

  const AmbientPtr& ambient() const { return ambient_; }
  const std::map<std::string, Term>& terms() const { return terms_; }
  std::size_t size() const { return terms_.size(); }
  bool is_zero() const { return terms_.empty(); }
  int max_length() const;
  bool is_exact() const;
  /// Every word alternates and every letter is centered.
  bool is_normalized() const;
  /// Coefficient of a word given by its letters (0 when absent).
  Scalar coefficient(const Word& w) const;
  Scalar scalar_part() const { return coefficient({}); }

  /// Adds c * w (the word is stored as given, letters canonicalized).
  void add_term(const Word& w, const Scalar& c);

  FreeElement& operator+=(const FreeElement& o);
  FreeElement& operator-=(const FreeElement& o);
  FreeElement& operator*=(const Scalar& s);
  friend FreeElement operator+(FreeElement a, const FreeElement& b) { return a += b; }
  friend FreeElement operator-(FreeElement a, const FreeElement& b) { return a -= b; }
  friend FreeElement operator*(FreeElement a, const Scalar& s) { return a *= s; }
  friend FreeElement operator*(const Scalar& s, FreeElement a) { return a *= s; }

  std::string str() const;

 private:
  AmbientPtr ambient_;
  std::map<std::string, Term> terms_;
};

/// c*1 + sum of alternating centered words, equal to x in the free product.
FreeElement normalize(const FreeElement& x);
/// Normalized product.
FreeElement multiply(const FreeElement& x, const FreeElement& y);
FreeElement adjoint(const FreeElement& x);
/// Free product state: the scalar part of the normal form.
Scalar free_state(const FreeElement& x);
/// <x, y> = free_state(y* x), evaluated on normal forms with the product
/// formula for alternating centered words.
Scalar l2_inner_free(const FreeElement& x, const FreeElement& y);
double l2_norm_free(const FreeElement& x);
/// Reference path: free_state(multiply(adjoint(y), x)).
Scalar l2_inner_free_direct(const FreeElement& x, const FreeElement& y);

/// Letters of factor 2 (third factor) become left * c * right; factors 0 and 1
/// map identically. x lives over [A1, A2, A1]; the result over [A1, A2].
FreeElement conjugate_third_factor(const FreeElement& x, const AmbientPtr& target, const FreeElement& left,
                                   const FreeElement& right);

/// phi_v: identity on the first two factors, c -> v c v* on the third.
FreeElement phi_conjugation(const AlgebraElement& v, const FreeElement& x, const AmbientPtr& target);

/// Unitaries u in A1, v, w in A2 for the Avitzour maps.
struct AvitzourTriple {
  AlgebraElement u, v, w;
};
/// Throws AvitzourConditionError naming the first failing condition.
void check_avitzour(const AvitzourTriple& t, double tol = 1e-12);
/// x_n = (w u w)(u v)^n as a raw word over [A1, A2].
Word avitzour_xn(const AvitzourTriple& t, int n);
/// phi_n: conjugation by x_n^* on the third factor, c -> x_n^* c x_n.
FreeElement avitzour_phi(int n, const AvitzourTriple& t, const FreeElement& x, const AmbientPtr& target);

/// Structural image of phi_v on one alternating centered word: letters merged
/// inside each factor without centering.
struct ConjugationShape {
  int ell = 0;
  int p = 0;
  std::vector<int> pattern;
  bool pattern_independent_of_v = true;
  bool letter_classes_ok = true;
  bool length_bound_ok = true;
  int normalized_max_length = 0;
  std::string failure;
  bool ok() const { return pattern_independent_of_v && letter_classes_ok && length_bound_ok && normalized_max_length <= p; }
};
/// `v_alt` is a second unitary used to test that the shape does not depend on v.
ConjugationShape conjugation_shape(const Word& a, const AlgebraElement& v, const AlgebraElement& v_alt,
                                   const AmbientPtr& source, const AmbientPtr& target);

/// Front multiplication x_n a, back multiplication a x_n^*, or both.
enum class ShapeMode { Front, Back, Both };
struct AvitzourShapeReport {
  bool ok = true;
  int words_checked = 0;
  std::string failure;
  Word offending;
};
/// `a` is an alternating word over [A1, A2] with centered letters.
AvitzourShapeReport avitzour_shape_check(int n, const AvitzourTriple& t, const Word& a, ShapeMode mode,
                                         const AmbientPtr& target);

}  // namespace freedecay

#endif  // FREEDECAY_FREEWORD_HPP
