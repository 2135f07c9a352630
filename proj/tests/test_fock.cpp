#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include "freedecay/errors.hpp"
#include "freedecay/fock.hpp"
#include "freedecay/measure.hpp"
#include "word_support.hpp"

using namespace freedecay;
using namespace testing_support;

namespace {

AlgebraPtr c3_skew() {
  return MatrixBlockAlgebra::abelian({Scalar::rational(3, 5), Scalar::rational(1, 5), Scalar::rational(1, 5)});
}

AmbientPtr m2_c3() { return make_ambient({MatrixBlockAlgebra::matrix_tracial(2), c3_skew()}); }

// Closed walks of length n from the root of the 4-regular tree.
std::vector<double> tree_walks(int n) {
  std::vector<double> at(n + 2, 0.0), out(n + 1, 0.0);
  at[0] = 1;
  out[0] = 1;
  for (int step = 1; step <= n; ++step) {
    std::vector<double> next(n + 2, 0.0);
    for (int d = 0; d <= n; ++d) {
      if (at[d] == 0) continue;
      if (d == 0) {
        next[1] += 4 * at[0];
      } else {
        next[d - 1] += at[d];
        next[d + 1] += 3 * at[d];
      }
    }
    at = next;
    out[step] = at[0];
  }
  return out;
}

FreeElement cyclic_sum(int n) {
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
  return x;
}

}  // namespace

TEST(Fock, DimensionExamples) {
  auto c2 = MatrixBlockAlgebra::uniform_abelian(2);
  EXPECT_EQ(build_fock(make_ambient({c2}), 1).dimension(), 2);
  auto m2 = MatrixBlockAlgebra::matrix_tracial(2);
  EXPECT_EQ(build_fock(make_ambient({m2, m2}), 2).dimension(), 25);
  EXPECT_EQ(build_fock(make_ambient({m2, m2}), 0).dimension(), 1);
  EXPECT_THROW(build_fock(make_ambient({m2, m2}), 12), ResourceError);
}

TEST(Fock, DimensionFormulaMatchesEnumeration) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    std::uniform_int_distribution<int> nm(1, 4), nd(0, 4), nl(0, 4);
    std::vector<int> dims(nm(rng));
    for (auto& d : dims) d = nd(rng);
    int depth = nl(rng);
    // Brute force: sum over alternating patterns.
    double brute = 1;
    std::vector<std::vector<int>> patterns{{}};
    for (int l = 1; l <= depth; ++l) {
      std::vector<std::vector<int>> next;
      for (const auto& p : patterns)
        for (int j = 0; j < static_cast<int>(dims.size()); ++j)
          if (p.empty() || p.back() != j) {
            auto q = p;
            q.push_back(j);
            next.push_back(q);
          }
      for (const auto& p : next) {
        double prod = 1;
        for (int j : p) prod *= dims[j];
        brute += prod;
      }
      patterns = next;
    }
    FockIndex idx(dims, depth, 10000000);
    EXPECT_EQ(static_cast<double>(idx.size()), brute);
    EXPECT_EQ(FockIndex::count(dims, depth), brute);
    for (long t = 0; t < idx.size(); t += 7) EXPECT_EQ(idx.find(idx.slots(t)), t);
  }
}

TEST(Fock, LetterOnVacuum) {
  std::mt19937_64 rng(2);
  auto amb = m2_c3();
  TruncatedFock f(amb, 2);
  for (int j = 0; j < 2; ++j) {
    AlgebraElement a = random_exact_element(amb->factor(j), rng);
    FockVector v = apply_to_vacuum(f, FreeElement::letter(amb, j, a));
    EXPECT_EQ(v.coeffs.count(0) ? v.coeffs.at(0) : Scalar(0), state(a));
    AlgebraElement rebuilt = amb->factor(j)->zero();
    for (const auto& [t, c] : v.coeffs) {
      if (t == 0) continue;
      ASSERT_EQ(f.index().length(t), 1);
      ASSERT_EQ(f.index().lead_factor(t), j);
      rebuilt += c * f.factor_basis(j).vectors[f.index().lead_index(t)];
    }
    EXPECT_TRUE(rebuilt.exactly_equal(center(a)));
  }
}

TEST(Fock, VacuumMatchesFreeStateExactly) {
  std::mt19937_64 rng(3);
  auto amb = m2_c3();
  TruncatedFock f(amb, 6);
  for (int trial = 0; trial < 200; ++trial) {
    std::uniform_int_distribution<int> len(0, 6);
    FreeElement x = FreeElement::word(amb, random_raw_word(amb, len(rng), rng));
    EXPECT_EQ(vacuum_expectation(f, x), free_state(x));
  }
}

TEST(Fock, VacuumMatchesFreeStateFloat) {
  std::mt19937_64 rng(4);
  auto amb = m2_c3();
  TruncatedFock f(amb, 6);
  for (int trial = 0; trial < 50; ++trial) {
    std::uniform_int_distribution<int> len(0, 6);
    Word w = random_raw_word(amb, len(rng), rng);
    for (auto& l : w) l.elem = l.elem.to_floating();
    FreeElement x = FreeElement::word(amb, w);
    Scalar a = vacuum_expectation(f, x), b = free_state(x);
    EXPECT_LE(std::abs(a.to_complex() - b.to_complex()), 1e-12 * std::max(1.0, b.abs()));
  }
}

TEST(Fock, RepresentIdentityAndAdjoint) {
  std::mt19937_64 rng(5);
  auto amb = m2_c3();
  TruncatedFock f(amb, 3);
  Eigen::MatrixXcd one = represent_dense(f, FreeElement::scalar(amb, 1));
  EXPECT_LE((one - Eigen::MatrixXcd::Identity(f.dimension(), f.dimension())).norm(), 1e-14);
  for (int trial = 0; trial < 8; ++trial) {
    FreeElement x = random_free_element(amb, 3, 3, rng);
    Eigen::MatrixXcd a = represent_dense(f, x);
    Eigen::MatrixXcd b = represent_dense(f, adjoint(x));
    EXPECT_LE((a.adjoint() - b).norm(), 1e-12 * (1 + a.norm()));
    FreeElement h = x + adjoint(x);
    Eigen::MatrixXcd hm = represent_dense(f, h);
    EXPECT_LE((hm - hm.adjoint()).norm(), 1e-12 * (1 + hm.norm()));
  }
}

TEST(Fock, RepresentIsLinear) {
  std::mt19937_64 rng(6);
  auto amb = m2_c3();
  TruncatedFock f(amb, 3);
  FreeElement x = random_free_element(amb, 3, 3, rng), y = random_free_element(amb, 3, 3, rng);
  Scalar c = random_gaussian_rational(rng);
  Eigen::MatrixXcd lhs = represent_dense(f, x + c * y);
  Eigen::MatrixXcd rhs = represent_dense(f, x) + c.to_complex() * represent_dense(f, y);
  EXPECT_LE((lhs - rhs).norm(), 1e-10 * (1 + lhs.norm()));
}

TEST(Fock, CompressionAgreesWithProductsInsideDepth) {
  // <lambda(x) lambda(y) Omega, Omega> from matrices matches free_state(xy)
  // when the compression is deep enough for both factors.
  std::mt19937_64 rng(7);
  auto amb = m2_c3();
  TruncatedFock f(amb, 4);
  for (int trial = 0; trial < 5; ++trial) {
    FreeElement x = random_free_element(amb, 2, 2, rng), y = random_free_element(amb, 2, 2, rng);
    Eigen::MatrixXcd p = represent_dense(f, x) * represent_dense(f, y);
    Scalar s = free_state(multiply(x, y));
    EXPECT_LE(std::abs(p(0, 0) - s.to_complex()), 1e-10 * (1 + s.abs()));
  }
}

TEST(Fock, LayersAreOrthogonal) {
  auto m2 = MatrixBlockAlgebra::matrix_tracial(2);
  auto amb = make_ambient({m2, m2});
  TruncatedFock f(amb, 4);
  auto p = paulis(m2);
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<int> pick(0, 2);
  for (int trial = 0; trial < 30; ++trial) {
    std::uniform_int_distribution<int> len(0, 4);
    int la = len(rng), lb = len(rng);
    auto make = [&](int l) {
      Word w;
      for (int f2 : random_pattern(2, l, rng)) w.push_back({f2, p[pick(rng)]});
      return FreeElement::word(amb, w);
    };
    FreeElement a = make(la), b = make(lb);
    Scalar ip = fock_inner(f, apply_to_vacuum(f, a), apply_to_vacuum(f, b));
    if (la != lb) EXPECT_EQ(ip, Scalar(0));
    EXPECT_EQ(ip, l2_inner_free(a, b));
  }
}

TEST(Fock, NormBoundsForLetters) {
  std::mt19937_64 rng(9);
  auto amb = m2_c3();
  for (int j = 0; j < 2; ++j) {
    AlgebraElement a = random_exact_element(amb->factor(j), rng);
    FreeElement x = FreeElement::letter(amb, j, a);
    double want = op_norm(a);
    EXPECT_NEAR(norm_lower_bound(build_fock(amb, 1), x), want, 1e-9 * want);
    EXPECT_NEAR(norm_lower_bound(x), want, 1e-9 * want);
  }
  EXPECT_NEAR(norm_lower_bound(FreeElement::scalar(amb, 1)), 1.0, 1e-12);
  auto est = moment_norm_estimate(FreeElement::scalar(amb, 1), 4);
  for (double s : est.s) EXPECT_NEAR(s, 1.0, 1e-12);
}

TEST(Fock, UnitaryLetterMomentsAreOne) {
  auto m2 = MatrixBlockAlgebra::matrix_tracial(2);
  auto amb = make_ambient({m2, m2});
  auto p = paulis(m2);
  FreeElement u = FreeElement::letter(amb, 0, p[0]);
  auto est = moment_norm_estimate(u, 6);
  for (double s : est.s) EXPECT_NEAR(s, 1.0, 1e-12);
  FreeElement uv = FreeElement::word(amb, {{0, p[0]}, {1, p[2]}});
  auto est2 = moment_norm_estimate(uv, 4);
  EXPECT_EQ(est2.engine, "fock");
  for (double s : est2.s) EXPECT_NEAR(s, 1.0, 1e-12);
}

TEST(Fock, NormMonotoneInDepth) {
  std::mt19937_64 rng(10);
  auto amb = m2_c3();
  for (int trial = 0; trial < 4; ++trial) {
    FreeElement x = random_free_element(amb, 3, 2, rng);
    double prev = 0;
    for (int depth = 0; depth <= 4; ++depth) {
      double n = norm_lower_bound(build_fock(amb, depth), x);
      EXPECT_GE(n, prev - 1e-10);
      prev = n;
    }
  }
}

TEST(Fock, MomentEnginesAgree) {
  std::mt19937_64 rng(11);
  auto amb = m2_c3();
  for (int trial = 0; trial < 4; ++trial) {
    // Self-adjoint letter sum: cumulant engine against the symbolic state.
    AlgebraElement a = random_exact_element(amb->factor(0), rng), b = random_exact_element(amb->factor(1), rng);
    FreeElement x = FreeElement::letter(amb, 0, a + a.adjoint()) + FreeElement::letter(amb, 1, b + b.adjoint());
    auto est = moment_norm_estimate(x, 3);
    EXPECT_EQ(est.engine, "cumulant");
    FreeElement y = multiply(adjoint(x), x), p = y;
    for (int r = 1; r <= 3; ++r) {
      if (r > 1) p = multiply(p, y);
      double want = free_state(p).real_double();
      EXPECT_NEAR(est.moments[r - 1], want, 1e-9 * std::abs(want));
    }
    // General element: Fock vacuum propagation against the symbolic state.
    FreeElement z = random_free_element(amb, 2, 2, rng);
    auto ez = moment_norm_estimate(z, 2);
    EXPECT_EQ(ez.engine, "fock");
    FreeElement zz = multiply(adjoint(z), z);
    double m1 = free_state(zz).real_double();
    double m2 = free_state(multiply(zz, zz)).real_double();
    EXPECT_NEAR(ez.moments[0], m1, 1e-9 * std::abs(m1));
    EXPECT_NEAR(ez.moments[1], m2, 1e-9 * std::abs(m2));
  }
}

TEST(Fock, FreeCumulantsOfSemicircle) {
  auto mu = CompactMeasure::semicircle();
  std::vector<Scalar> m;
  for (int k = 0; k <= 12; ++k) m.push_back(mu.moment(k));
  auto k = moments_to_free_cumulants(m);
  for (int i = 1; i <= 12; ++i) EXPECT_EQ(k[i], Scalar(i == 2 ? 1 : 0)) << i;
  auto back = free_cumulants_to_moments(k);
  for (int i = 0; i <= 12; ++i) EXPECT_EQ(back[i], m[i]);
  auto sum = free_sum_moments({m, m}, Scalar(0));
  EXPECT_EQ(sum[2], Scalar(2));
  EXPECT_EQ(sum[4], Scalar(8));
  EXPECT_EQ(sum[6], Scalar(40));
}

TEST(Fock, KestenMomentsMatchTreeWalks) {
  FreeElement x = cyclic_sum(24);
  auto est = moment_norm_estimate(x, 12);
  EXPECT_EQ(est.engine, "cumulant");
  auto walks = tree_walks(24);
  for (int r = 1; r < 12; ++r) EXPECT_NEAR(est.moments[r - 1], walks[2 * r], 1e-9 * walks[2 * r]) << r;
  EXPECT_GT(est.moments[11], walks[24]);
  // u^24 = 1 closes four extra walks of length 24 (u^24, u*^24 in each factor).
  EXPECT_NEAR(est.moments[11] - walks[24], 4.0, 0.5);
  for (int r = 1; r < 12; ++r) {
    EXPECT_GE(est.s[r], est.s[r - 1]);
    EXPECT_GE(est.ratio[r], est.ratio[r - 1]);
  }
  EXPECT_NEAR(est.s[11], std::pow(walks[24], 1.0 / 24), 1e-9);
  EXPECT_LT(est.s[11], 2 * std::sqrt(3.0));
  EXPECT_LT(est.ratio[11], 2 * std::sqrt(3.0));
  EXPECT_GT(est.ratio[11], est.s[11]);
}

TEST(Fock, LanczosAgreesWithDense) {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> g;
  const int n = 900;
  std::vector<Eigen::Triplet<std::complex<double>>> t;
  std::uniform_int_distribution<int> pos(0, n - 1);
  for (int i = 0; i < 6 * n; ++i) t.emplace_back(pos(rng), pos(rng), std::complex<double>(g(rng), g(rng)));
  SparseMatrixXcd m(n, n);
  m.setFromTriplets(t.begin(), t.end());
  double lz = spectral_norm_sparse(m);
  Eigen::MatrixXcd d(m);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(d.adjoint() * d, Eigen::EigenvaluesOnly);
  double dense = std::sqrt(es.eigenvalues().maxCoeff());
  EXPECT_LE(lz, dense * (1 + 1e-12));
  EXPECT_NEAR(lz, dense, 1e-8 * dense);
}
