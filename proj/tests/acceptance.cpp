// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.

#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "freedecay/cli.hpp"
#include "freedecay/errors.hpp"
#include "freedecay/fock.hpp"
#include "freedecay/khintchine.hpp"
#include "freedecay/measure.hpp"
#include "freedecay/rdcert.hpp"
#include "word_support.hpp"

using namespace freedecay;
using namespace testing_support;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string fmt(double v) { return cli::format_double(v); }

// Chebyshev U_n(t/2) from its own recurrence.
std::vector<Polynomial> chebyshev_g(int n) {
  std::vector<Polynomial> g{Polynomial::constant(Scalar(1)), Polynomial::monomial(1)};
  for (int k = 1; k < n; ++k) g.push_back(g[k].shift_up() - g[k - 1]);
  return g;
}

Outcome semicircle_bound() {
  auto seq = CompactMeasure::semicircle().ortho_polys(51);
  auto g = chebyshev_g(50);
  Outcome o;
  double worst_gap = 0.0;
  int nonzero_residuals = 0, oracle_mismatch = 0;
  for (int n = 0; n <= 50; ++n) {
    double s = sup_norm_orthonormal(seq, n, -2, 2).value;
    worst_gap = std::max(worst_gap, std::abs(s - (n + 1)));
    if (s > n + 1.0 || s < n + 1.0 - 1e-6) o.pass = false;
    Polynomial p = seq.orthonormal(n);
    if (!p.is_exact() || !p.exactly_equal(g[n])) ++oracle_mismatch;
    if (n >= 1) {
      Polynomial r = seq.orthonormal(n + 1) - p.shift_up() + seq.orthonormal(n - 1);
      if (!r.is_zero()) ++nonzero_residuals;
    }
  }
  o.pass = o.pass && nonzero_residuals == 0 && oracle_mismatch == 0;
  o.detail = "n<=50: max |sup G_n - (n+1)| = " + fmt(worst_gap) + ", nonzero exact recurrence residuals = " +
             std::to_string(nonzero_residuals) + ", mismatches with U_n(t/2) = " + std::to_string(oracle_mismatch);
  return o;
}

Outcome legendre_bound() {
  auto seq = CompactMeasure::lebesgue_symmetric().ortho_polys(50);
  Outcome o;
  double worst_q = 0.0, worst_p = 0.0;
  for (int n = 0; n <= 50; ++n) {
    double q = sup_norm_orthonormal(seq, n, -1, 1).value;
    worst_q = std::max(worst_q, std::abs(q - std::sqrt(2.0 * n + 1)));
    double scale = 1.0 / std::sqrt(2.0 * n + 1);
    double p = sup_estimate([&](long double t) { return seq.eval_orthonormal(n, t) * scale; }, -1, 1, 64 * (n + 1)).value;
    worst_p = std::max(worst_p, p);
  }
  o.pass = worst_q <= 1e-6 && worst_p <= 1.0 + 1e-9;
  o.detail = "n<=50: max |sup Q_n - sqrt(2n+1)| = " + fmt(worst_q) + ", max sup P_n = " + fmt(worst_p);
  return o;
}

Outcome rd_exponents() {
  Outcome o;
  std::ostringstream d;
  struct Case {
    CompactMeasure mu;
    double target, tol;
  };
  std::vector<Case> cases = {{CompactMeasure::semicircle(), 1.5, 0.1}, {CompactMeasure::lebesgue_symmetric(), 1.0, 0.05}};
  for (const auto& c : cases) {
    RDReport rep = rd_report(c.mu, 40);
    double alpha = rep.fit ? rep.fit->alpha : NAN;
    bool fit_ok = rep.fit && std::abs(alpha - c.target) <= c.tol;
    // Polynomial growth on the tested range: dim V_n = n + 1 and
    // C_n / (n + 1)^alpha stays within a bounded band.
    double lo = INFINITY, hi = 0.0;
    bool dims_ok = true;
    for (const RDRow& r : rep.rows) {
      dims_ok = dims_ok && r.dim == r.n + 1;
      if (r.n == 0) continue;
      double k = r.c / std::pow(r.n + 1.0, alpha);
      lo = std::min(lo, k);
      hi = std::max(hi, k);
    }
    bool growth_ok = dims_ok && hi / lo <= 2.0;
    o.pass = o.pass && fit_ok && growth_ok;
    d << c.mu.name() << " alpha=" << fmt(alpha) << " (target " << c.target << " +- " << c.tol
      << "), C_n/(n+1)^alpha in [" << fmt(lo) << ", " << fmt(hi) << "]; ";
  }
  o.detail = d.str();
  return o;
}

Outcome freeness_oracle() {
  auto amb = make_ambient({MatrixBlockAlgebra::matrix_tracial(2),
                           MatrixBlockAlgebra::abelian({Scalar::rational(3, 5), Scalar::rational(1, 5),
                                                        Scalar::rational(1, 5)})});
  TruncatedFock fock(amb, 6);
  std::mt19937_64 rng(2024);
  int exact_bad = 0, oracle_bad = 0, float_bad = 0;
  double worst_float = 0.0;
  for (int trial = 0; trial < 500; ++trial) {
    int len = std::uniform_int_distribution<int>(0, 6)(rng);
    Word w = random_raw_word(amb, len, rng);
    FreeElement x = FreeElement::word(amb, w);
    Scalar sym = free_state(x);
    if (!(vacuum_expectation(fock, x) == sym)) ++exact_bad;
    if (!(oracle_free_state(x) == sym)) ++oracle_bad;
    Word wf = w;
    for (auto& l : wf) l.elem = l.elem.to_floating();
    FreeElement xf = FreeElement::word(amb, wf);
    double err = std::abs(vacuum_expectation(fock, xf).to_complex() - sym.to_complex()) / std::max(1.0, sym.abs());
    worst_float = std::max(worst_float, err);
    if (err > 1e-12) ++float_bad;
  }
  Outcome o;
  o.pass = exact_bad == 0 && oracle_bad == 0 && float_bad == 0;
  o.detail = "500 words: exact mismatches = " + std::to_string(exact_bad) + ", moment-oracle mismatches = " +
             std::to_string(oracle_bad) + ", worst float error = " + fmt(worst_float);
  return o;
}

Outcome avitzour_identities() {
  auto m2 = MatrixBlockAlgebra::matrix_tracial(2);
  AvitzourSearch s = find_avitzour_triple(m2, m2);
  Outcome o;
  if (!s.triple) return {false, "no unitary triple found for (M_2, tr) * (M_2, tr)"};
  const AvitzourTriple& t = *s.triple;
  check_avitzour(t, 0.0);
  auto two = make_ambient({m2, m2});
  auto three = make_ambient({m2, m2, m2});
  auto p = paulis(m2);
  AlgebraElement v_alt = p[1] * Scalar::imag_unit();
  std::mt19937_64 rng(55);
  int trace_bad = 0, iso_bad = 0, shape_bad = 0, length_bad = 0, checks = 0;
  int worst_excess = -1000;
  for (int trial = 0; trial < 200; ++trial) {
    int ell = std::uniform_int_distribution<int>(1, 4)(rng);
    FreeElement x = FreeElement::word(three, random_centered_word(three, ell, rng));
    for (int n = ell / 2 + 1; n <= ell / 2 + 2; ++n) {
      ++checks;
      if (!(free_state(avitzour_phi(n, t, x, two)) == free_state(x))) ++trace_bad;
    }
    FreeElement y = avitzour_phi(ell + 1, t, x, two);
    if (!(l2_inner_free(y, y) == l2_inner_free(x, x))) ++iso_bad;

    Word a = random_centered_word(two, ell, rng);
    for (ShapeMode m : {ShapeMode::Front, ShapeMode::Back, ShapeMode::Both})
      if (!avitzour_shape_check(ell / 2 + 1, t, a, m, two).ok) ++shape_bad;

    Word c = random_centered_word(three, ell, rng);
    ConjugationShape cs = conjugation_shape(c, t.v, v_alt, three, two);
    worst_excess = std::max(worst_excess, cs.p - 3 * ell);
    if (!cs.ok() || cs.p > 3 * ell + 2) ++length_bad;
  }
  o.pass = s.triple->u.is_exact() && trace_bad == 0 && iso_bad == 0 && shape_bad == 0 && length_bad == 0;
  o.detail = "triple via " + s.method + "; 200 words: trace failures " + std::to_string(trace_bad) + "/" +
             std::to_string(checks) + ", isometry failures " + std::to_string(iso_bad) + ", shape failures " +
             std::to_string(shape_bad) + ", length-bound violations " + std::to_string(length_bad) +
             " (max p - 3l = " + std::to_string(worst_excess) + ")";
  return o;
}

FactorBases pauli_bases(const AmbientPtr& amb) {
  FactorBases b;
  for (int j = 0; j < amb->size(); ++j) b.push_back(paulis(amb->factor(j)));
  return b;
}

Outcome khintchine_bound() {
  auto m2 = MatrixBlockAlgebra::matrix_tracial(2);
  auto amb = make_ambient({m2, m2});
  FactorBases bases = pauli_bases(amb);
  std::mt19937_64 rng(66);
  int rx_bad = 0;
  double min_margin = INFINITY;
  for (int trial = 0; trial < 50; ++trial) {
    auto x = HomogeneousElement::random(amb, bases, 1 + trial % 3, rng, false);
    RxReport r = rx_check(x, 2);
    min_margin = std::min(min_margin, r.margin);
    if (!r.pass || r.margin < 0) ++rx_bad;
  }
  int hs_bad = 0;
  for (int trial = 0; trial < 12; ++trial) {
    int len = 1 + trial % 3;
    auto x = HomogeneousElement::random(amb, bases, len, rng, true);
    FreeElement fx = x.to_free();
    Scalar n2 = l2_inner_free(fx, fx);
    for (int r = 0; r <= len; ++r) {
      Scalar hs = sr_hs2(x, r);
      if (!hs.is_exact() || !n2.is_exact() || !(hs == n2)) ++hs_bad;
    }
  }
  std::vector<AlgebraPtr> algs = {m2,
                                  MatrixBlockAlgebra::make({CMatrix::identity(2) * Scalar::rational(1, 4),
                                                            CMatrix::identity(1) * Scalar::rational(1, 2)}),
                                  MatrixBlockAlgebra::uniform_abelian(3)};
  int cs_bad = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const AlgebraPtr& a = algs[trial % algs.size()];
    int nr = 1 + trial % 4, nc = 1 + (trial / 4) % 3;
    std::vector<std::vector<AlgebraElement>> blocks(nr);
    for (auto& row : blocks)
      for (int s = 0; s < nc; ++s) row.push_back(random_float_element(a, rng));
    auto [norm, cs] = block_matrix_norms(blocks);
    if (norm > cs * (1 + 1e-12)) ++cs_bad;
  }
  Outcome o;
  o.pass = rx_bad == 0 && hs_bad == 0 && cs_bad == 0;
  o.detail = "50 elements: failures " + std::to_string(rx_bad) + ", min margin " + fmt(min_margin) +
             "; exact HS identity failures " + std::to_string(hs_bad) + "; block inequality failures " +
             std::to_string(cs_bad) + "/100";
  return o;
}

Outcome layer_estimate() {
  auto m2 = MatrixBlockAlgebra::matrix_tracial(2);
  auto amb = make_ambient({m2, m2});
  FactorBases bases = pauli_bases(amb);
  std::vector<double> constants;
  for (const auto& b : bases) constants.push_back(dn_norm(b));
  std::mt19937_64 rng(77);
  int bad = 0;
  double min_margin = INFINITY;
  for (int trial = 0; trial < 50; ++trial) {
    auto y = HomogeneousElement::random(amb, bases, 1 + trial % 3, rng, false);
    LayerReport r = layer_estimate_check(y, constants, 2);
    min_margin = std::min(min_margin, r.margin);
    if (!r.pass || r.margin < 0) ++bad;
  }
  return {bad == 0, "50 elements, C_j = " + fmt(constants[0]) + ": failures " + std::to_string(bad) +
                        ", min margin " + fmt(min_margin)};
}

Outcome kesten() {
  const int n = 24;
  auto cn = MatrixBlockAlgebra::uniform_abelian(n);
  auto amb = make_ambient({cn, cn});
  std::vector<Scalar> u, us;
  for (int k = 0; k < n; ++k) {
    std::complex<double> z = std::polar(1.0, 2 * M_PI * k / n);
    u.push_back(Scalar(z));
    us.push_back(Scalar(std::conj(z)));
  }
  FreeElement x(amb);
  for (int j = 0; j < 2; ++j) {
    x += FreeElement::letter(amb, j, cn->abelian_element(u));
    x += FreeElement::letter(amb, j, cn->abelian_element(us));
  }
  MomentEstimate est = moment_norm_estimate(x, 12);

  // Closed walks on the 4-regular tree; words of length < 24 cannot use u^24 = 1.
  std::vector<double> at(26, 0.0), walks(25, 0.0);
  at[0] = walks[0] = 1;
  for (int step = 1; step <= 24; ++step) {
    std::vector<double> next(26, 0.0);
    for (int d = 0; d <= 24; ++d) {
      if (at[d] == 0) continue;
      if (d == 0) next[1] += 4 * at[0];
      else {
        next[d - 1] += at[d];
        next[d + 1] += 3 * at[d];
      }
    }
    at = next;
    walks[step] = at[0];
  }
  bool oracle_ok = true, monotone = true;
  for (int r = 1; r < 12; ++r) oracle_ok = oracle_ok && std::abs(est.moments[r - 1] - walks[2 * r]) <= 1e-9 * walks[2 * r];
  for (int r = 1; r < 12; ++r) monotone = monotone && est.s[r] >= est.s[r - 1];
  double s12 = est.s[11];
  bool in_range = s12 >= 3.2 && s12 <= 4.0;
  return {in_range && monotone && oracle_ok,
          "s_12 = " + fmt(s12) + " (required [3.2, 4.0], limit 2 sqrt 3 = " + fmt(2 * std::sqrt(3.0)) +
              "), nondecreasing " + (monotone ? "yes" : "no") + ", tree-walk oracle " + (oracle_ok ? "agrees" : "disagrees") +
              "; ratio bound sqrt(m_12/m_11) = " + fmt(est.ratio[11])};
}

Outcome classification() {
  auto h = Scalar::rational(1, 2), t = Scalar::rational(1, 3);
  bool examples = !classify_abelian({h, h}, {h, h}).selfless && classify_abelian({t, t, t}, {h, h}).selfless &&
                  !classify_abelian({Scalar::rational(3, 5), Scalar::rational(1, 5), Scalar::rational(1, 5)}, {h, h}).selfless;
  std::set<std::vector<std::string>> seen;
  std::vector<std::vector<Scalar>> all;
  std::function<void(int, int, std::vector<int>&)> rec = [&](int den, int left, std::vector<int>& cur) {
    if (left == 0) {
      std::vector<Scalar> w;
      std::vector<std::string> key;
      for (int c : cur) {
        w.push_back(Scalar::rational(c, den));
        key.push_back(w.back().key());
      }
      if (seen.insert(key).second) all.push_back(w);
      return;
    }
    if (cur.size() == 4) return;
    for (int c = 1; c <= left; ++c) {
      cur.push_back(c);
      rec(den, left - c, cur);
      cur.pop_back();
    }
  };
  for (int den = 1; den <= 6; ++den) {
    std::vector<int> cur;
    rec(den, den, cur);
  }
  int mismatches = 0, pairs = 0;
  for (const auto& a : all)
    for (const auto& b : all) {
      mpq_class ma = 0, mb = 0;
      for (const auto& x : a) ma = std::max(ma, x.re_q());
      for (const auto& x : b) mb = std::max(mb, x.re_q());
      bool want = a.size() + b.size() >= 5 && ma + mb < 1;
      mismatches += want != classify_abelian(a, b).selfless;
      ++pairs;
    }
  return {examples && mismatches == 0, std::string("worked examples ") + (examples ? "match" : "differ") + "; " +
                                           std::to_string(pairs) + " weight pairs swept, discrepancies " +
                                           std::to_string(mismatches)};
}

std::string run_capture(std::vector<std::string> args, int* code) {
  args.insert(args.begin(), "freedecay");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  *code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return out.str();
}

Outcome determinism() {
  std::vector<std::vector<std::string>> configs = {
      {"rd-certify", "--builtin", "semicircle", "--max-n", "20", "--seed", "1"},
      {"kh-norm", "--length", "2", "--trials", "6", "--seed", "3"},
      {"avitzour-find", "--a", R"({"type":"uniform_abelian","n":3})", "--b",
       R"({"type":"diagonal_state","diag":["1/2","3/10","1/5"]})", "--seed", "8"},
      {"classify-abelian", "--a", "0.6,0.2,0.2", "--b", "0.5,0.5"},
  };
  int differ = 0, failed = 0;
  for (const auto& c : configs) {
    int c1 = 0, c2 = 0, c3 = 0;
    std::string a = run_capture(c, &c1), b = run_capture(c, &c2);
    auto threaded = c;
    threaded.insert(threaded.end(), {"--threads", "2"});
    std::string t = run_capture(threaded, &c3);
    if (a != b || a != t) ++differ;
    if (c1 != 0 || c2 != 0 || c3 != 0 || a.empty()) ++failed;
  }
  return {differ == 0 && failed == 0, std::to_string(configs.size()) + " configurations run three times (one with 2 threads): " +
                                          std::to_string(differ) + " differing, " + std::to_string(failed) + " failing"};
}

}  // namespace

int main() {
  struct Entry {
    int id;
    const char* name;
    std::function<Outcome()> run;
  };
  std::vector<Entry> entries = {
      {1, "semicircle orthonormal sup norms", semicircle_bound},
      {2, "Legendre sup norms", legendre_bound},
      {3, "RD exponent fits", rd_exponents},
      {4, "free state vs Fock vacuum", freeness_oracle},
      {5, "Avitzour identities", avitzour_identities},
      {6, "Khintchine norm bound", khintchine_bound},
      {7, "layer estimate", layer_estimate},
      {8, "Kesten moment convergence", kesten},
      {9, "abelian classification", classification},
      {10, "determinism", determinism},
  };
  int failures = 0;
  for (const auto& e : entries) {
    Outcome o;
    try {
      o = e.run();
    } catch (const std::exception& ex) {
      o = {false, std::string("exception: ") + ex.what()};
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " " << e.id << " " << e.name << ": " << o.detail << std::endl;
  }
  std::cout << (entries.size() - failures) << "/" << entries.size() << " criteria pass" << std::endl;
  return failures == 0 ? 0 : 1;
}
