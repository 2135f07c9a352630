#include "freedecay/freeword.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_map>

#include "freedecay/errors.hpp"

namespace freedecay {

FreeAmbient::FreeAmbient(std::vector<AlgebraPtr> factors) : factors_(std::move(factors)) {
  for (const auto& f : factors_) {
    if (!f) throw StructuralError("free product: null factor");
    key_ += f->key();
    key_ += "#";
  }
}

AmbientPtr make_ambient(std::vector<AlgebraPtr> factors) {
  return std::make_shared<const FreeAmbient>(std::move(factors));
}

bool same_ambient(const AmbientPtr& a, const AmbientPtr& b) {
  if (a == b) return true;
  if (!a || !b || a->size() != b->size()) return false;
  for (int j = 0; j < a->size(); ++j)
    if (!same_algebra(a->factor(j), b->factor(j))) return false;
  return true;
}

std::string Letter::key() const { return std::to_string(factor) + ":" + elem.key(); }

std::string word_key(const Word& w) {
  std::string k;
  for (const auto& l : w) {
    k += l.key();
    k.push_back('/');
  }
  return k;
}

namespace {

void check_same(const AmbientPtr& a, const AmbientPtr& b, const char* op) {
  if (!same_ambient(a, b)) throw StructuralError(std::string(op) + ": ambient mismatch");
}

bool scalar_negligible(const Scalar& s) { return s.is_zero(); }

// Scales the letter so its first significant coordinate is 1; returns the
// factor pulled out, or 0 when the letter vanishes.
Scalar canonicalize(Letter& l) {
  std::vector<Scalar> coords = l.elem.coordinates();
  double biggest = 0;
  for (const auto& c : coords) biggest = std::max(biggest, c.abs());
  for (const auto& c : coords) {
    if (c.is_zero()) continue;
    if (!c.is_exact() && c.abs() <= 1e-9 * biggest) continue;
    if (c == Scalar(1)) return Scalar(1);
    l.elem *= Scalar(1) / c;
    return c;
  }
  return Scalar(0);
}

bool centered(const AlgebraElement& a) { return state(a).is_zero(); }

// E * iota_j(b) for E already in normal form.
FreeElement mul_right(const FreeElement& e, const Letter& b) {
  FreeElement out(e.ambient());
  const AlgebraPtr& alg = e.ambient()->factor(b.factor);
  Scalar rho = state(b.elem);
  AlgebraElement bc = b.elem - rho * alg->one();
  bool has_center = !bc.is_zero();
  for (const auto& [k, t] : e.terms()) {
    if (!scalar_negligible(rho)) out.add_term(t.word, t.coeff * rho);
    if (!has_center) continue;
    if (t.word.empty() || t.word.back().factor != b.factor) {
      Word w = t.word;
      w.push_back({b.factor, bc});
      out.add_term(w, t.coeff);
      continue;
    }
    AlgebraElement prod = t.word.back().elem * bc;
    Scalar sigma = state(prod);
    AlgebraElement pc = prod - sigma * alg->one();
    Word head(t.word.begin(), t.word.end() - 1);
    if (!pc.is_zero()) {
      Word w = head;
      w.push_back({b.factor, pc});
      out.add_term(w, t.coeff);
    }
    if (!scalar_negligible(sigma)) {
      // head is a prefix of a normal word, hence already normal.
      out.add_term(head, t.coeff * sigma);
    }
  }
  return out;
}

// Sums words that agree up to the last letter into one word, using
// linearity in the last slot. Keeps normal forms small and canonical.
FreeElement compact(const FreeElement& x) {
  struct Group {
    Word head;
    int factor;
    AlgebraElement sum;
  };
  std::map<std::string, Group> groups;
  FreeElement out(x.ambient());
  for (const auto& [k, t] : x.terms()) {
    if (t.word.empty()) {
      out.add_term({}, t.coeff);
      continue;
    }
    Word head(t.word.begin(), t.word.end() - 1);
    const Letter& last = t.word.back();
    std::string gk = word_key(head) + "#" + std::to_string(last.factor);
    auto it = groups.find(gk);
    if (it == groups.end())
      groups.emplace(gk, Group{std::move(head), last.factor, t.coeff * last.elem});
    else
      it->second.sum += t.coeff * last.elem;
  }
  for (auto& [k, g] : groups) {
    Word w = std::move(g.head);
    w.push_back({g.factor, std::move(g.sum)});
    out.add_term(w, Scalar(1));
  }
  return out;
}

// Normal form of a single raw word, reusing normalized prefixes.
class PrefixNormalizer {
 public:
  explicit PrefixNormalizer(AmbientPtr amb) : amb_(std::move(amb)) {}

  const FreeElement& run(const Word& w) {
    std::vector<std::string> keys(w.size() + 1);
    for (std::size_t i = 0; i < w.size(); ++i) keys[i + 1] = keys[i] + w[i].key() + "/";
    std::size_t start = w.size();
    while (start > 0 && !memo_.count(keys[start])) --start;
    if (start == 0 && !memo_.count(keys[0])) {
      FreeElement one(amb_);
      one.add_term({}, Scalar(1));
      memo_.emplace(keys[0], std::move(one));
    }
    for (std::size_t i = start; i < w.size(); ++i) {
      FreeElement next = compact(mul_right(memo_.at(keys[i]), w[i]));
      memo_.emplace(keys[i + 1], std::move(next));
    }
    return memo_.at(keys[w.size()]);
  }

 private:
  AmbientPtr amb_;
  std::unordered_map<std::string, FreeElement> memo_;
};

void check_word(const AmbientPtr& amb, const Word& w) {
  for (const auto& l : w) {
    if (l.factor < 0 || l.factor >= amb->size()) throw StructuralError("letter: factor index out of range");
    if (!same_algebra(l.elem.owner(), amb->factor(l.factor)))
      throw StructuralError("letter: payload does not belong to factor " + std::to_string(l.factor));
  }
}

std::string pattern_key(const Word& w) {
  std::string k;
  for (const auto& l : w) k += std::to_string(l.factor) + ",";
  return k;
}

}  // namespace

FreeElement FreeElement::scalar(const AmbientPtr& ambient, const Scalar& c) {
  FreeElement x(ambient);
  x.add_term({}, c);
  return x;
}

FreeElement FreeElement::letter(const AmbientPtr& ambient, int factor, const AlgebraElement& a) {
  return word(ambient, {{factor, a}});
}

FreeElement FreeElement::word(const AmbientPtr& ambient, const Word& w, const Scalar& c) {
  FreeElement x(ambient);
  x.add_term(w, c);
  return x;
}

int FreeElement::max_length() const {
  int m = 0;
  for (const auto& [k, t] : terms_) m = std::max(m, static_cast<int>(t.word.size()));
  return m;
}

bool FreeElement::is_exact() const {
  for (const auto& [k, t] : terms_) {
    if (!t.coeff.is_exact()) return false;
    for (const auto& l : t.word)
      if (!l.elem.is_exact()) return false;
  }
  return true;
}

bool FreeElement::is_normalized() const {
  for (const auto& [k, t] : terms_) {
    for (std::size_t i = 0; i < t.word.size(); ++i) {
      if (i > 0 && t.word[i].factor == t.word[i - 1].factor) return false;
      if (!centered(t.word[i].elem)) return false;
    }
  }
  return true;
}

Scalar FreeElement::coefficient(const Word& w) const {
  Word c = w;
  Scalar scale(1);
  for (auto& l : c) {
    Scalar s = canonicalize(l);
    if (s.is_zero()) return Scalar(0);
    scale *= s;
  }
  auto it = terms_.find(word_key(c));
  if (it == terms_.end()) return Scalar(0);
  return it->second.coeff / scale;
}

void FreeElement::add_term(const Word& w, const Scalar& c) {
  if (c.is_zero()) return;
  check_word(ambient_, w);
  Word cw = w;
  Scalar coeff = c;
  for (auto& l : cw) {
    Scalar s = canonicalize(l);
    if (s.is_zero()) return;
    coeff *= s;
  }
  std::string k = word_key(cw);
  auto it = terms_.find(k);
  if (it == terms_.end()) {
    if (!coeff.is_zero()) terms_.emplace(std::move(k), Term{std::move(cw), std::move(coeff)});
    return;
  }
  it->second.coeff += coeff;
  if (it->second.coeff.is_zero()) terms_.erase(it);
}

FreeElement& FreeElement::operator+=(const FreeElement& o) {
  check_same(ambient_, o.ambient_, "free +");
  for (const auto& [k, t] : o.terms_) add_term(t.word, t.coeff);
  return *this;
}

FreeElement& FreeElement::operator-=(const FreeElement& o) {
  check_same(ambient_, o.ambient_, "free -");
  for (const auto& [k, t] : o.terms_) add_term(t.word, -t.coeff);
  return *this;
}

FreeElement& FreeElement::operator*=(const Scalar& s) {
  if (s.is_zero()) {
    terms_.clear();
    return *this;
  }
  for (auto it = terms_.begin(); it != terms_.end();) {
    it->second.coeff *= s;
    if (it->second.coeff.is_zero())
      it = terms_.erase(it);
    else
      ++it;
  }
  return *this;
}

std::string FreeElement::str() const {
  if (terms_.empty()) return "0";
  std::ostringstream os;
  bool first = true;
  for (const auto& [k, t] : terms_) {
    if (!first) os << " + ";
    first = false;
    os << "(" << t.coeff.str() << ")";
    for (const auto& l : t.word) os << " i" << (l.factor + 1) << "[" << l.elem.key() << "]";
  }
  return os.str();
}

FreeElement normalize(const FreeElement& x) {
  FreeElement out(x.ambient());
  PrefixNormalizer norm(x.ambient());
  for (const auto& [k, t] : x.terms()) {
    const FreeElement& nf = norm.run(t.word);
    for (const auto& [k2, t2] : nf.terms()) out.add_term(t2.word, t2.coeff * t.coeff);
  }
  return compact(out);
}

FreeElement multiply(const FreeElement& x, const FreeElement& y) {
  check_same(x.ambient(), y.ambient(), "multiply");
  FreeElement nx = normalize(x);
  FreeElement out(x.ambient());
  for (const auto& [k, t] : y.terms()) {
    FreeElement e = nx;
    for (const auto& l : t.word) e = compact(mul_right(e, l));
    e *= t.coeff;
    out += e;
  }
  return compact(out);
}

FreeElement adjoint(const FreeElement& x) {
  FreeElement out(x.ambient());
  for (const auto& [k, t] : x.terms()) {
    Word w;
    w.reserve(t.word.size());
    for (auto it = t.word.rbegin(); it != t.word.rend(); ++it) w.push_back({it->factor, it->elem.adjoint()});
    out.add_term(w, t.coeff.conj());
  }
  return out;
}

Scalar free_state(const FreeElement& x) { return normalize(x).scalar_part(); }

Scalar l2_inner_free(const FreeElement& x, const FreeElement& y) {
  check_same(x.ambient(), y.ambient(), "l2_inner_free");
  FreeElement nx = normalize(x);
  FreeElement ny = normalize(y);
  std::unordered_map<std::string, std::vector<const FreeElement::Term*>> by_pattern;
  for (const auto& [k, t] : ny.terms()) by_pattern[pattern_key(t.word)].push_back(&t);
  Scalar total(0);
  bool any_float = !nx.is_exact() || !ny.is_exact();
  for (const auto& [k, t] : nx.terms()) {
    auto it = by_pattern.find(pattern_key(t.word));
    if (it == by_pattern.end()) continue;
    for (const auto* s : it->second) {
      Scalar p = t.coeff * s->coeff.conj();
      for (std::size_t i = 0; i < t.word.size() && !p.is_zero(); ++i) p *= l2_inner(t.word[i].elem, s->word[i].elem);
      total += p;
    }
  }
  if (any_float) total = total.to_floating();
  return total;
}

double l2_norm_free(const FreeElement& x) { return std::sqrt(std::max(0.0, l2_inner_free(x, x).real_double())); }

Scalar l2_inner_free_direct(const FreeElement& x, const FreeElement& y) {
  check_same(x.ambient(), y.ambient(), "l2_inner_free");
  return free_state(multiply(adjoint(y), x));
}

namespace {

// Concatenation of raw words, without normalizing.
FreeElement raw_product(const FreeElement& x, const FreeElement& y) {
  FreeElement out(x.ambient());
  for (const auto& [k, t] : x.terms())
    for (const auto& [k2, t2] : y.terms()) {
      Word w = t.word;
      w.insert(w.end(), t2.word.begin(), t2.word.end());
      out.add_term(w, t.coeff * t2.coeff);
    }
  return out;
}

void check_three_to_two(const AmbientPtr& source, const AmbientPtr& target) {
  if (source->size() != 3 || target->size() != 2)
    throw PreconditionError("conjugation map: expected a three-factor source and two-factor target");
  if (!same_algebra(source->factor(0), target->factor(0)) || !same_algebra(source->factor(2), target->factor(0)) ||
      !same_algebra(source->factor(1), target->factor(1)))
    throw PreconditionError("conjugation map: source must be A1 * A2 * A1 over the target A1 * A2");
}

bool exact_or_small(const Scalar& s, double tol) {
  if (s.is_exact()) return s.is_zero();
  return s.abs() <= tol;
}

bool unitary_checked(const AlgebraElement& x, double tol) {
  return is_unitary(x, x.is_exact() ? 0.0 : tol);
}

}  // namespace

FreeElement conjugate_third_factor(const FreeElement& x, const AmbientPtr& target, const FreeElement& left,
                                   const FreeElement& right) {
  check_three_to_two(x.ambient(), target);
  check_same(left.ambient(), target, "conjugation map");
  check_same(right.ambient(), target, "conjugation map");
  FreeElement raw(target);
  for (const auto& [k, t] : x.terms()) {
    FreeElement img = FreeElement::scalar(target, t.coeff);
    for (const auto& l : t.word) {
      if (l.factor == 2) {
        img = raw_product(img, left);
        img = raw_product(img, FreeElement::letter(target, 0, l.elem));
        img = raw_product(img, right);
      } else {
        img = raw_product(img, FreeElement::letter(target, l.factor, l.elem));
      }
    }
    raw += img;
  }
  return normalize(raw);
}

FreeElement phi_conjugation(const AlgebraElement& v, const FreeElement& x, const AmbientPtr& target) {
  check_three_to_two(x.ambient(), target);
  if (!same_algebra(v.owner(), target->factor(1))) throw StructuralError("phi_conjugation: v must lie in A2");
  if (!unitary_checked(v, 1e-12)) throw PreconditionError("phi_conjugation: v is not unitary");
  return conjugate_third_factor(x, target, FreeElement::letter(target, 1, v),
                                FreeElement::letter(target, 1, v.adjoint()));
}

void check_avitzour(const AvitzourTriple& t, double tol) {
  auto fail = [](const std::string& cond) {
    throw AvitzourConditionError(cond, "Avitzour condition violated: " + cond);
  };
  if (!same_algebra(t.v.owner(), t.w.owner())) throw StructuralError("Avitzour triple: v and w in different algebras");
  if (!unitary_checked(t.u, tol)) fail("u unitary");
  if (!unitary_checked(t.v, tol)) fail("v unitary");
  if (!unitary_checked(t.w, tol)) fail("w unitary");
  if (!exact_or_small(state(t.u), tol)) fail("rho(u) = 0");
  if (!exact_or_small(state(t.v), tol)) fail("tau(v) = 0");
  if (!exact_or_small(state(t.w), tol)) fail("tau(w) = 0");
  if (!exact_or_small(state(t.v.adjoint() * t.w), tol)) fail("tau(v* w) = 0");
  if (!t.v.owner()->is_tracial() && !in_centralizer(t.v, t.v.is_exact() ? 0.0 : tol)) fail("v in centralizer");
}

Word avitzour_xn(const AvitzourTriple& t, int n) {
  if (n < 0) throw PreconditionError("x_n: n must be nonnegative");
  Word w{{1, t.w}, {0, t.u}, {1, t.w}};
  for (int i = 0; i < n; ++i) {
    w.push_back({0, t.u});
    w.push_back({1, t.v});
  }
  return w;
}

namespace {

Word word_adjoint(const Word& w) {
  Word out;
  for (auto it = w.rbegin(); it != w.rend(); ++it) out.push_back({it->factor, it->elem.adjoint()});
  return out;
}

void check_target_triple(const AvitzourTriple& t, const AmbientPtr& target) {
  if (target->size() != 2) throw PreconditionError("Avitzour map: target must have two factors");
  if (!same_algebra(t.u.owner(), target->factor(0)) || !same_algebra(t.v.owner(), target->factor(1)))
    throw StructuralError("Avitzour triple: u must lie in A1 and v, w in A2");
}

}  // namespace

FreeElement avitzour_phi(int n, const AvitzourTriple& t, const FreeElement& x, const AmbientPtr& target) {
  if (n < 1) throw PreconditionError("avitzour_phi: n must be positive");
  check_target_triple(t, target);
  check_avitzour(t);
  Word xn = avitzour_xn(t, n);
  return conjugate_third_factor(x, target, FreeElement::word(target, word_adjoint(xn)), FreeElement::word(target, xn));
}

namespace {

void check_alternating_centered(const Word& a, const AmbientPtr& amb, const char* op) {
  check_word(amb, a);
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (i > 0 && a[i].factor == a[i - 1].factor)
      throw PreconditionError(std::string(op) + ": word is not alternating");
    if (!centered(a[i].elem)) throw PreconditionError(std::string(op) + ": letter " + std::to_string(i) + " is not centered");
  }
}

bool same_element(const AlgebraElement& a, const AlgebraElement& b) {
  if (a.is_exact() && b.is_exact()) return a.exactly_equal(b);
  return op_norm(a - b) <= 1e-10 * (1.0 + op_norm(a));
}

// Letters of phi_v(a) with adjacent same-factor letters multiplied in place.
std::vector<Letter> merged_image(const Word& a, const AlgebraElement& v) {
  std::vector<Letter> raw;
  for (const auto& l : a) {
    if (l.factor == 2) {
      raw.push_back({1, v});
      raw.push_back({0, l.elem});
      raw.push_back({1, v.adjoint()});
    } else {
      raw.push_back(l);
    }
  }
  std::vector<Letter> out;
  for (auto& l : raw) {
    if (!out.empty() && out.back().factor == l.factor)
      out.back().elem = out.back().elem * l.elem;
    else
      out.push_back(l);
  }
  return out;
}

}  // namespace

ConjugationShape conjugation_shape(const Word& a, const AlgebraElement& v, const AlgebraElement& v_alt,
                                   const AmbientPtr& source, const AmbientPtr& target) {
  check_three_to_two(source, target);
  if (a.empty()) throw PreconditionError("conjugation_shape: word must have positive length");
  check_alternating_centered(a, source, "conjugation_shape");
  if (!unitary_checked(v, 1e-12) || !unitary_checked(v_alt, 1e-12))
    throw PreconditionError("conjugation_shape: v is not unitary");

  ConjugationShape rep;
  rep.ell = static_cast<int>(a.size());
  std::vector<Letter> b = merged_image(a, v);
  std::vector<Letter> b_alt = merged_image(a, v_alt);
  rep.p = static_cast<int>(b.size());
  for (const auto& l : b) rep.pattern.push_back(l.factor);
  std::vector<int> alt_pattern;
  for (const auto& l : b_alt) alt_pattern.push_back(l.factor);
  rep.pattern_independent_of_v = (alt_pattern == rep.pattern);
  if (!rep.pattern_independent_of_v) rep.failure = "letter pattern changes with v";
  for (std::size_t i = 1; i < b.size(); ++i)
    if (b[i].factor == b[i - 1].factor) rep.pattern_independent_of_v = false;

  std::vector<AlgebraElement> ups1, ups2;
  for (const auto& l : a) (l.factor == 1 ? ups2 : ups1).push_back(l.elem);
  std::vector<AlgebraElement> tilde;
  AlgebraElement vs = v.adjoint();
  std::vector<AlgebraElement> ups2_one = ups2;
  ups2_one.push_back(target->factor(1)->one());
  for (const auto& y : ups2_one) {
    tilde.push_back(y * v);
    tilde.push_back(vs * y);
  }
  for (const auto& y : ups2) {
    tilde.push_back(vs * y * v);
    tilde.push_back(y);
  }
  for (std::size_t i = 0; i < b.size(); ++i) {
    const auto& pool = b[i].factor == 0 ? ups1 : tilde;
    bool found = std::any_of(pool.begin(), pool.end(), [&](const AlgebraElement& c) { return same_element(b[i].elem, c); });
    if (!found) {
      rep.letter_classes_ok = false;
      if (rep.failure.empty()) rep.failure = "letter " + std::to_string(i) + " outside its class";
    }
  }
  rep.length_bound_ok = rep.p <= 3 * rep.ell + 2;
  if (!rep.length_bound_ok && rep.failure.empty()) rep.failure = "length exceeds 3*ell+2";
  rep.normalized_max_length = phi_conjugation(v, FreeElement::word(source, a), target).max_length();
  if (rep.normalized_max_length > rep.p && rep.failure.empty()) rep.failure = "normal form longer than p";
  return rep;
}

AvitzourShapeReport avitzour_shape_check(int n, const AvitzourTriple& t, const Word& a, ShapeMode mode,
                                         const AmbientPtr& target) {
  const int ell = static_cast<int>(a.size());
  if (!(ell > 0 && 2 * n > ell))
    throw PreconditionError("avitzour_shape_check: requires n > ell/2 > 0 (n=" + std::to_string(n) +
                            ", ell=" + std::to_string(ell) + ")");
  check_target_triple(t, target);
  check_avitzour(t);
  check_alternating_centered(a, target, "avitzour_shape_check");

  Word xn = avitzour_xn(t, n);
  Word full;
  if (mode != ShapeMode::Back) full = xn;
  full.insert(full.end(), a.begin(), a.end());
  if (mode != ShapeMode::Front) {
    Word xs = word_adjoint(xn);
    full.insert(full.end(), xs.begin(), xs.end());
  }
  FreeElement nf = normalize(FreeElement::word(target, full));

  AvitzourShapeReport rep;
  auto pairs = [](const AlgebraElement& x, const AlgebraElement& y) {
    Scalar s = l2_inner(x, y);
    if (s.is_exact()) return !s.is_zero();
    return s.abs() > 1e-9 * (1.0 + l2_norm(x) * l2_norm(y));
  };
  AlgebraElement ws = t.w.adjoint();
  for (const auto& [k, term] : nf.terms()) {
    ++rep.words_checked;
    const Word& w = term.word;
    std::string why;
    if (w.empty())
      why = "scalar term survives";
    else if (mode != ShapeMode::Back && (w.front().factor != 1 || !pairs(w.front().elem, t.w)))
      why = "word does not start with w";
    else if (mode != ShapeMode::Front && (w.back().factor != 1 || !pairs(w.back().elem, ws)))
      why = "word does not end with w*";
    if (!why.empty()) {
      rep.ok = false;
      rep.failure = why;
      rep.offending = w;
      break;
    }
  }
  if (rep.ok && !nf.is_normalized()) {
    rep.ok = false;
    rep.failure = "expansion is not alternating centered";
  }
  return rep;
}

}  // namespace freedecay
