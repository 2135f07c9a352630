#include <random>

#include <gtest/gtest.h>

#include "freedecay/errors.hpp"
#include "freedecay/freeword.hpp"
#include "word_support.hpp"

using namespace freedecay;
using namespace testing_support;

namespace {

struct M2Setting {
  AlgebraPtr m2 = MatrixBlockAlgebra::matrix_tracial(2);
  AmbientPtr two = make_ambient({m2, m2});
  AmbientPtr three = make_ambient({m2, m2, m2});
  AvitzourTriple triple() const {
    auto p = paulis(m2);
    return {p[0], p[2], p[0]};  // u = w = flip, v = diag(1,-1)
  }
};

AlgebraPtr weighted_c3() {
  return MatrixBlockAlgebra::abelian({Scalar::rational(1, 2), Scalar::rational(1, 3), Scalar::rational(1, 6)});
}

// A non-tracial factor: M_2 with density diag(2/3, 1/3).
AlgebraPtr skew_m2() { return MatrixBlockAlgebra::matrix_diagonal_state({Scalar::rational(2, 3), Scalar::rational(1, 3)}); }

}  // namespace

TEST(FreeWord, SameFactorMerge) {
  std::mt19937_64 rng(1);
  auto a1 = weighted_c3();
  auto amb = make_ambient({a1, MatrixBlockAlgebra::matrix_tracial(2)});
  AlgebraElement a = random_exact_element(a1, rng), b = random_exact_element(a1, rng);
  FreeElement x = normalize(FreeElement::word(amb, {{0, a}, {0, b}}));
  AlgebraElement ab = a * b;
  FreeElement expect = FreeElement::scalar(amb, state(ab)) + FreeElement::letter(amb, 0, center(ab));
  EXPECT_TRUE(free_equal(x, expect));
  EXPECT_TRUE(x.is_normalized());
  EXPECT_LE(x.size(), 2u);
}

TEST(FreeWord, AlternatingCenteredUnchanged) {
  M2Setting s;
  auto p = paulis(s.m2);
  FreeElement x = FreeElement::word(s.two, {{0, p[0]}, {1, p[2]}});
  FreeElement n = normalize(x);
  ASSERT_EQ(n.size(), 1u);
  EXPECT_EQ(n.coefficient({{0, p[0]}, {1, p[2]}}), Scalar(1));
}

TEST(FreeWord, MultilinearCenteringExpansion) {
  std::mt19937_64 rng(2);
  auto a1 = weighted_c3();
  auto a2 = skew_m2();
  auto amb = make_ambient({a1, a2});
  for (int trial = 0; trial < 20; ++trial) {
    AlgebraElement a = random_exact_element(a1, rng), b = random_exact_element(a2, rng);
    Scalar ra = state(a), tb = state(b);
    AlgebraElement ac = center(a), bc = center(b);
    FreeElement n = normalize(FreeElement::word(amb, {{0, a}, {1, b}}));
    EXPECT_EQ(n.scalar_part(), ra * tb);
    EXPECT_EQ(n.coefficient({{0, ac}}), ac.is_zero() ? Scalar(0) : tb);
    EXPECT_EQ(n.coefficient({{1, bc}}), bc.is_zero() ? Scalar(0) : ra);
    EXPECT_EQ(n.coefficient({{0, ac}, {1, bc}}), Scalar(1));
    EXPECT_LE(n.size(), 4u);
  }
}

TEST(FreeWord, FourLetterStateFormula) {
  std::mt19937_64 rng(3);
  auto a1 = weighted_c3();
  auto a2 = skew_m2();
  auto amb = make_ambient({a1, a2});
  for (int trial = 0; trial < 20; ++trial) {
    AlgebraElement x1 = random_exact_element(a1, rng), x2 = random_exact_element(a1, rng);
    AlgebraElement y1 = random_exact_element(a2, rng), y2 = random_exact_element(a2, rng);
    Scalar got = free_state(FreeElement::word(amb, {{0, x1}, {1, y1}, {0, x2}, {1, y2}}));
    Scalar expect = state(x1 * x2) * state(y1) * state(y2) + state(x1) * state(x2) * state(y1 * y2) -
                    state(x1) * state(x2) * state(y1) * state(y2);
    EXPECT_EQ(got, expect);
  }
}

TEST(FreeWord, StateMatchesRecursionOracle) {
  std::mt19937_64 rng(4);
  auto amb = make_ambient({weighted_c3(), skew_m2(), MatrixBlockAlgebra::matrix_tracial(2)});
  for (int trial = 0; trial < 60; ++trial) {
    std::uniform_int_distribution<int> len(0, 6);
    FreeElement x = FreeElement::word(amb, random_raw_word(amb, len(rng), rng), random_gaussian_rational(rng));
    EXPECT_EQ(free_state(x), oracle_free_state(x)) << x.str();
  }
}

TEST(FreeWord, CenteredWordsHaveStateZero) {
  std::mt19937_64 rng(5);
  auto amb = make_ambient({weighted_c3(), skew_m2(), MatrixBlockAlgebra::matrix_tracial(2)});
  for (int len = 1; len <= 7; ++len) EXPECT_EQ(free_state(FreeElement::word(amb, random_centered_word(amb, len, rng))), Scalar(0));
}

TEST(FreeWord, StateAxioms) {
  std::mt19937_64 rng(6);
  auto a1 = weighted_c3();
  auto a2 = skew_m2();
  auto amb = make_ambient({a1, a2});
  EXPECT_EQ(free_state(FreeElement::scalar(amb, 1)), Scalar(1));
  EXPECT_EQ(l2_inner_free(FreeElement::scalar(amb, 1), FreeElement::scalar(amb, 1)), Scalar(1));
  for (int trial = 0; trial < 15; ++trial) {
    AlgebraElement a = random_exact_element(a1, rng), b = random_exact_element(a2, rng);
    EXPECT_EQ(free_state(FreeElement::letter(amb, 0, a)), state(a));
    EXPECT_EQ(free_state(FreeElement::letter(amb, 1, b)), state(b));
    FreeElement x = random_free_element(amb, 3, 3, rng);
    Scalar pos = free_state(multiply(adjoint(x), x));
    ASSERT_TRUE(pos.is_exact());
    EXPECT_EQ(pos.im_q(), 0);
    EXPECT_GE(pos.re_q(), 0);
  }
}

TEST(FreeWord, TracialityTransfers) {
  std::mt19937_64 rng(7);
  auto amb = make_ambient({MatrixBlockAlgebra::uniform_abelian(3), MatrixBlockAlgebra::matrix_tracial(2)});
  for (int trial = 0; trial < 15; ++trial) {
    FreeElement x = random_free_element(amb, 2, 3, rng), y = random_free_element(amb, 2, 3, rng);
    EXPECT_EQ(free_state(multiply(x, y)), free_state(multiply(y, x)));
  }
}

TEST(FreeWord, NormalizePreservesStateAndNorm) {
  std::mt19937_64 rng(8);
  auto amb = make_ambient({weighted_c3(), skew_m2()});
  for (int trial = 0; trial < 15; ++trial) {
    FreeElement x = random_free_element(amb, 3, 4, rng);
    FreeElement n = normalize(x);
    EXPECT_TRUE(n.is_normalized());
    EXPECT_EQ(free_state(x), oracle_free_state(x));
    EXPECT_EQ(free_state(n), free_state(x));
    EXPECT_EQ(l2_inner_free(x, x), l2_inner_free_direct(x, x));
    EXPECT_EQ(l2_inner_free(n, n), l2_inner_free(x, x));
    EXPECT_TRUE(free_equal(normalize(n), n));
    FreeElement y = random_free_element(amb, 2, 3, rng);
    Scalar c = random_gaussian_rational(rng);
    EXPECT_TRUE(free_equal(normalize(x + c * y), normalize(x) + c * normalize(y)));
  }
}

TEST(FreeWord, InnerProductAgreesWithDirectPath) {
  std::mt19937_64 rng(9);
  auto amb = make_ambient({weighted_c3(), skew_m2(), MatrixBlockAlgebra::matrix_tracial(2)});
  for (int trial = 0; trial < 15; ++trial) {
    FreeElement x = random_free_element(amb, 3, 3, rng), y = random_free_element(amb, 3, 3, rng);
    EXPECT_EQ(l2_inner_free(x, y), l2_inner_free_direct(x, y));
    EXPECT_EQ(l2_inner_free(x, y), l2_inner_free(y, x).conj());
  }
}

TEST(FreeWord, OnbWordsAreOrthonormal) {
  M2Setting s;
  auto p = paulis(s.m2);
  std::vector<FreeElement> words;
  // All alternating words of length <= 3 in the Pauli letters of two factors.
  std::vector<Word> frontier{{}};
  for (int len = 0; len <= 3; ++len) {
    std::vector<Word> next;
    for (const auto& w : frontier) {
      words.push_back(FreeElement::word(s.two, w));
      for (int f = 0; f < 2; ++f) {
        if (!w.empty() && w.back().factor == f) continue;
        for (const auto& q : p) {
          Word e = w;
          e.push_back({f, q});
          next.push_back(e);
        }
      }
    }
    frontier = next;
  }
  ASSERT_EQ(words.size(), 1u + 6u + 18u + 54u);
  for (std::size_t i = 0; i < words.size(); ++i)
    for (std::size_t j = 0; j < words.size(); j += 7)
      EXPECT_EQ(l2_inner_free(words[i], words[j]), Scalar(i == j ? 1 : 0));
  for (std::size_t i = 0; i < words.size(); i += 5) EXPECT_EQ(l2_inner_free_direct(words[i], words[i]), Scalar(1));
}

TEST(FreeWord, AdjointReversesProducts) {
  std::mt19937_64 rng(10);
  auto amb = make_ambient({weighted_c3(), skew_m2()});
  for (int trial = 0; trial < 15; ++trial) {
    FreeElement x = random_free_element(amb, 2, 3, rng), y = random_free_element(amb, 2, 3, rng);
    EXPECT_TRUE(free_equal(adjoint(multiply(x, y)), multiply(adjoint(y), adjoint(x))));
    EXPECT_TRUE(free_equal(adjoint(adjoint(x)), x));
  }
}

TEST(FreeWord, AmbientMismatchIsStructural) {
  auto a = make_ambient({weighted_c3(), skew_m2()});
  auto b = make_ambient({skew_m2(), weighted_c3()});
  EXPECT_THROW(multiply(FreeElement::scalar(a, 1), FreeElement::scalar(b, 1)), StructuralError);
  EXPECT_THROW(l2_inner_free(FreeElement::scalar(a, 1), FreeElement::scalar(b, 1)), StructuralError);
  EXPECT_THROW(FreeElement::letter(a, 0, skew_m2()->one()), StructuralError);
}

TEST(FreeWord, FloatingPathAgrees) {
  std::mt19937_64 rng(11);
  auto amb = make_ambient({weighted_c3(), skew_m2()});
  for (int trial = 0; trial < 10; ++trial) {
    Word w = random_raw_word(amb, 5, rng);
    Word wf = w;
    for (auto& l : wf) l.elem = l.elem.to_floating();
    Scalar exact = free_state(FreeElement::word(amb, w));
    Scalar flt = free_state(FreeElement::word(amb, wf));
    EXPECT_FALSE(flt.is_exact());
    EXPECT_NEAR(std::abs(exact.to_complex() - flt.to_complex()), 0.0, 1e-10 * (1 + exact.abs()));
  }
}

TEST(Conjugation, IdentityOnFirstTwoFactors) {
  M2Setting s;
  std::mt19937_64 rng(12);
  auto v = s.triple().v;
  for (int trial = 0; trial < 10; ++trial) {
    Word w;
    for (int f : random_pattern(2, 3, rng)) w.push_back({f, random_exact_element(s.m2, rng)});
    FreeElement x3 = FreeElement::word(s.three, w);
    FreeElement x2 = FreeElement::word(s.two, w);
    EXPECT_TRUE(free_equal(phi_conjugation(v, x3, s.two), x2));
  }
}

TEST(Conjugation, ThirdFactorLetterBecomesThreeLetters) {
  M2Setting s;
  auto p = paulis(s.m2);
  AlgebraElement v = p[2];
  AlgebraElement c = p[1];
  FreeElement img = phi_conjugation(v, FreeElement::letter(s.three, 2, c), s.two);
  ASSERT_EQ(img.size(), 1u);
  EXPECT_EQ(img.coefficient({{1, v}, {0, c}, {1, v.adjoint()}}), Scalar(1));
}

TEST(Conjugation, RejectsNonUnitary) {
  M2Setting s;
  EXPECT_THROW(phi_conjugation(s.m2->one() * Scalar(2), FreeElement::scalar(s.three, 1), s.two), PreconditionError);
}

TEST(Conjugation, Multiplicative) {
  M2Setting s;
  std::mt19937_64 rng(13);
  auto v = s.triple().v;
  for (int trial = 0; trial < 10; ++trial) {
    FreeElement x = random_free_element(s.three, 2, 3, rng), y = random_free_element(s.three, 2, 3, rng);
    FreeElement lhs = phi_conjugation(v, multiply(x, y), s.two);
    FreeElement rhs = multiply(phi_conjugation(v, x, s.two), phi_conjugation(v, y, s.two));
    EXPECT_TRUE(free_equal(lhs, rhs));
  }
}

TEST(Conjugation, ShapeOfImageWords) {
  M2Setting s;
  std::mt19937_64 rng(14);
  auto p = paulis(s.m2);
  AlgebraElement v = p[2];
  // A second unitary: the Hadamard-like rotation has irrational entries, so
  // use i*sigma_y instead.
  AlgebraElement v_alt = p[1] * Scalar::imag_unit();
  int worst = 0;
  for (int trial = 0; trial < 200; ++trial) {
    std::uniform_int_distribution<int> len(1, 5);
    int ell = len(rng);
    Word a = random_centered_word(s.three, ell, rng);
    ConjugationShape rep = conjugation_shape(a, v, v_alt, s.three, s.two);
    EXPECT_TRUE(rep.ok()) << rep.failure;
    EXPECT_LE(rep.p, 3 * ell + 2);
    worst = std::max(worst, rep.p - 3 * ell);
  }
  EXPECT_LE(worst, 2);
}

TEST(Avitzour, ConditionsAreTyped) {
  M2Setting s;
  auto t = s.triple();
  EXPECT_NO_THROW(check_avitzour(t));
  AvitzourTriple bad = t;
  bad.w = t.v;  // tau(v* w) = 1
  try {
    check_avitzour(bad);
    FAIL();
  } catch (const AvitzourConditionError& e) {
    EXPECT_EQ(e.condition(), "tau(v* w) = 0");
  }
  bad = t;
  bad.u = s.m2->one();
  try {
    check_avitzour(bad);
    FAIL();
  } catch (const AvitzourConditionError& e) {
    EXPECT_EQ(e.condition(), "rho(u) = 0");
  }
  bad = t;
  bad.v = t.v * Scalar(2);
  EXPECT_THROW(check_avitzour(bad), AvitzourConditionError);
}

TEST(Avitzour, CentralizerCheckedWhenNotTracial) {
  auto a1 = MatrixBlockAlgebra::uniform_abelian(2);
  auto a2 = MatrixBlockAlgebra::matrix_diagonal_state({Scalar::rational(1, 2), Scalar::rational(1, 4), Scalar::rational(1, 4)});
  CMatrix cyc(3, 3);
  cyc(1, 0) = Scalar(1);
  cyc(2, 1) = Scalar(1);
  cyc(0, 2) = Scalar(1);
  AlgebraElement v = a2->element({cyc});
  // Every moment condition holds with w = v^2, but v mixes eigenspaces of the density.
  AvitzourTriple t{a1->abelian_element({1, -1}), v, v * v};
  try {
    check_avitzour(t);
    FAIL();
  } catch (const AvitzourConditionError& e) {
    EXPECT_EQ(e.condition(), "v in centralizer");
  }
}

TEST(Avitzour, UnitalAndTraceZeroExample) {
  M2Setting s;
  auto t = s.triple();
  FreeElement one = avitzour_phi(1, t, FreeElement::scalar(s.three, 1), s.two);
  EXPECT_TRUE(free_equal(one, FreeElement::scalar(s.two, 1)));
  auto p = paulis(s.m2);
  FreeElement img = avitzour_phi(1, t, FreeElement::letter(s.three, 2, p[1]), s.two);
  EXPECT_EQ(free_state(img), Scalar(0));
  EXPECT_EQ(img.max_length(), 2 * 5 + 1);
}

TEST(Avitzour, TraceIdentityBelowTwiceN) {
  M2Setting s;
  auto t = s.triple();
  std::mt19937_64 rng(15);
  for (int n = 1; n <= 3; ++n) {
    for (int trial = 0; trial < 6; ++trial) {
      FreeElement x(s.three);
      for (int k = 0; k < 3; ++k) {
        std::uniform_int_distribution<int> len(0, 2 * n - 1);
        x.add_term(random_centered_word(s.three, len(rng), rng), random_gaussian_rational(rng));
      }
      EXPECT_EQ(free_state(avitzour_phi(n, t, x, s.two)), free_state(x));
    }
  }
}

TEST(Avitzour, IsometryAboveLength) {
  M2Setting s;
  auto t = s.triple();
  std::mt19937_64 rng(16);
  for (int trial = 0; trial < 6; ++trial) {
    FreeElement x(s.three);
    for (int k = 0; k < 3; ++k) {
      std::uniform_int_distribution<int> len(0, 2);
      x.add_term(random_centered_word(s.three, len(rng), rng), random_gaussian_rational(rng));
    }
    FreeElement y = avitzour_phi(3, t, x, s.two);
    EXPECT_EQ(l2_inner_free(y, y), l2_inner_free(x, x));
  }
}

TEST(Avitzour, WordsStartWithW) {
  M2Setting s;
  auto t = s.triple();
  auto p = paulis(s.m2);
  auto rep = avitzour_shape_check(1, t, {{1, p[1]}}, ShapeMode::Front, s.two);
  EXPECT_TRUE(rep.ok) << rep.failure;
  EXPECT_GT(rep.words_checked, 0);
  std::mt19937_64 rng(17);
  for (int ell = 1; ell <= 4; ++ell) {
    int n = ell / 2 + 1;
    for (int trial = 0; trial < 5; ++trial) {
      Word a = random_centered_word(s.two, ell, rng);
      for (ShapeMode m : {ShapeMode::Front, ShapeMode::Back, ShapeMode::Both}) {
        auto r = avitzour_shape_check(n, t, a, m, s.two);
        EXPECT_TRUE(r.ok) << "ell=" << ell << " mode=" << static_cast<int>(m) << " " << r.failure;
      }
    }
  }
}

TEST(Avitzour, ShapeGuard) {
  M2Setting s;
  auto t = s.triple();
  std::mt19937_64 rng(18);
  Word a = random_centered_word(s.two, 3, rng);
  EXPECT_THROW(avitzour_shape_check(1, t, a, ShapeMode::Front, s.two), PreconditionError);
  EXPECT_THROW(avitzour_shape_check(1, t, {}, ShapeMode::Front, s.two), PreconditionError);
}
