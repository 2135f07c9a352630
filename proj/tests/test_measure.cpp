#include <cmath>
#include <numbers>
#include <random>
#include <thread>

#include <gtest/gtest.h>

#include "freedecay/errors.hpp"
#include "freedecay/measure.hpp"

using namespace freedecay;

namespace {

Polynomial t_poly() { return Polynomial::monomial(1); }

// Chebyshev U_n(t/2) from its own recurrence, independent of the Stieltjes code.
std::vector<Polynomial> chebyshev_g(int n) {
  std::vector<Polynomial> g{Polynomial::constant(Scalar(1)), t_poly()};
  for (int k = 1; k < n; ++k) g.push_back(g[k].shift_up() - g[k - 1]);
  return g;
}

// Legendre P_n via Bonnet's recurrence.
std::vector<Polynomial> legendre(int n) {
  std::vector<Polynomial> p{Polynomial::constant(Scalar(1)), t_poly()};
  for (int k = 1; k < n; ++k)
    p.push_back((p[k].shift_up() * Scalar(2 * k + 1) - p[k - 1] * Scalar(k)) * Scalar::rational(1, k + 1));
  return p;
}

double simpson(const std::function<double(double)>& f, double a, double b, int n) {
  double h = (b - a) / n, s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 ? 4 : 2);
  return s * h / 3;
}

}  // namespace

TEST(Measure, SemicircleLowDegrees) {
  auto mu = CompactMeasure::semicircle();
  auto seq = mu.ortho_polys(2);
  EXPECT_TRUE(seq.orthonormal(1).exactly_equal(t_poly()));
  EXPECT_TRUE(seq.orthonormal(2).exactly_equal(Polynomial({Scalar(-1), Scalar(0), Scalar(1)})));
}

TEST(Measure, SemicircleMatchesChebyshevSecondKind) {
  auto mu = CompactMeasure::semicircle();
  auto seq = mu.ortho_polys(50);
  auto g = chebyshev_g(50);
  for (int n = 0; n <= 50; ++n) {
    Polynomial p = seq.orthonormal(n);
    ASSERT_TRUE(p.is_exact());
    EXPECT_TRUE(p.exactly_equal(g[n])) << n;
  }
  for (int n = 1; n < 50; ++n) {
    Polynomial r = seq.orthonormal(n + 1) - seq.orthonormal(n).shift_up() + seq.orthonormal(n - 1);
    EXPECT_TRUE(r.is_zero()) << n;
  }
}

TEST(Measure, LebesgueMatchesLegendre) {
  auto mu = CompactMeasure::lebesgue_symmetric();
  auto seq = mu.ortho_polys(30);
  auto p = legendre(30);
  for (int n = 0; n <= 30; ++n) {
    Scalar lead = p[n].coeff(n);
    EXPECT_TRUE(seq.monic[n].exactly_equal(p[n] * (Scalar(1) / lead))) << n;
    for (int num : {-9, -3, 2, 7}) {
      double t = num / 10.0;
      double expect = std::sqrt(2.0 * n + 1) * p[n].eval(Scalar::rational(num, 10)).real_double();
      EXPECT_NEAR(static_cast<double>(seq.eval_orthonormal(n, t)), expect, 1e-10 * std::max(1.0, std::abs(expect)));
    }
  }
  Polynomial p1 = seq.orthonormal(1);
  EXPECT_NEAR(p1.coeff(1).real_double(), std::sqrt(3.0), 1e-15);
  EXPECT_TRUE(p1.coeff(0).is_zero());
}

TEST(Measure, Orthonormality) {
  for (auto mu : {CompactMeasure::semicircle(), CompactMeasure::lebesgue_symmetric(), CompactMeasure::lebesgue_unit(),
                  CompactMeasure::cosine()}) {
    auto seq = mu.ortho_polys(12);
    for (int i = 0; i <= 12; ++i)
      for (int j = 0; j <= i; ++j) {
        Scalar ni(1), nj(1);
        for (int k = 0; k <= i; ++k) ni *= seq.beta[k];
        for (int k = 0; k <= j; ++k) nj *= seq.beta[k];
        double v = mu.integrate(seq.monic[i] * seq.monic[j]).real_double() / std::sqrt(ni.real_double() * nj.real_double());
        EXPECT_NEAR(v, i == j ? 1.0 : 0.0, 1e-10) << mu.name() << i << j;
      }
    for (int k = 1; k <= 12; ++k) EXPECT_GT(seq.beta[k].real_double(), 0.0);
  }
}

TEST(Measure, CosineBasisIsScaledChebyshevFirstKind) {
  auto mu = CompactMeasure::cosine();
  auto seq = mu.ortho_polys(10);
  for (int k = 1; k <= 10; ++k)
    for (double th : {0.1, 0.9, 2.0, 3.0})
      EXPECT_NEAR(static_cast<double>(seq.eval_orthonormal(k, std::cos(th))), std::sqrt(2.0) * std::cos(k * th), 1e-12);
}

TEST(Measure, FinitelySupportedRaises) {
  auto mu = CompactMeasure::uniform_atoms({Scalar(0), Scalar(1), Scalar::rational(1, 2)});
  EXPECT_NO_THROW(mu.ortho_polys(2));
  try {
    mu.ortho_polys(5);
    FAIL() << "expected FinitelySupportedError";
  } catch (const FinitelySupportedError& e) {
    EXPECT_EQ(e.degree(), 3);
  }
}

TEST(Measure, MomentListMeasure) {
  auto mu = CompactMeasure::from_moments(-2, 2, {Scalar(1), Scalar(0), Scalar(1), Scalar(0), Scalar(2)});
  auto seq = mu.ortho_polys(2);
  EXPECT_TRUE(seq.orthonormal(2).exactly_equal(Polynomial({Scalar(-1), Scalar(0), Scalar(1)})));
  EXPECT_THROW(mu.ortho_polys(3), PreconditionError);
  EXPECT_THROW(CompactMeasure::from_moments(0, 1, {Scalar(2)}), PreconditionError);
}

TEST(Measure, SupNormExamples) {
  EXPECT_NEAR(sup_norm(Polynomial::constant(Scalar(-3)), -1, 1).value, 3.0, 1e-15);
  auto sc = CompactMeasure::semicircle().ortho_polys(4);
  auto s = sup_norm(sc.orthonormal(4), -2, 2);
  EXPECT_NEAR(s.value, 5.0, 1e-9);
  EXPECT_NEAR(std::abs(s.argmax), 2.0, 1e-9);
  EXPECT_EQ(s.grid_points, 64 * 5);
  auto lg = CompactMeasure::lebesgue_symmetric().ortho_polys(3);
  EXPECT_NEAR(sup_norm_orthonormal(lg, 3, -1, 1).value, std::sqrt(7.0), 1e-9);
}

TEST(Measure, SupNormRefinesInteriorMaximum) {
  // |t(1-t)| peaks at 1/2 with value 1/4; odd grids do not contain 1/2.
  Polynomial p({Scalar(0), Scalar(1), Scalar(-1)});
  auto s = sup_estimate([&](long double t) { return p.eval(t); }, 0.0, 1.0, 7);
  EXPECT_NEAR(s.value, 0.25, 1e-12);
  EXPECT_LE(s.value, 0.25 + 1e-15);
}

TEST(Measure, ClassicalSupBounds) {
  auto sc = CompactMeasure::semicircle().ortho_polys(50);
  auto lg = CompactMeasure::lebesgue_symmetric().ortho_polys(50);
  for (int n = 0; n <= 50; ++n) {
    double g = sup_norm_orthonormal(sc, n, -2, 2).value;
    EXPECT_LE(g, n + 1.0);
    EXPECT_GE(g, n + 1.0 - 1e-6);
    double scale = 1.0 / std::sqrt(2.0 * n + 1);
    double p = sup_estimate([&](long double t) { return lg.eval_orthonormal(n, t) * scale; }, -1, 1, 64 * (n + 1)).value;
    EXPECT_LE(p, 1.0 + 1e-9);
  }
}

TEST(Measure, GaussRules) {
  auto sc = CompactMeasure::semicircle();
  auto g1 = gauss_discretize(sc, 1);
  ASSERT_EQ(g1.nodes.size(), 1u);
  EXPECT_NEAR(g1.nodes[0], 0.0, 1e-15);
  EXPECT_NEAR(g1.weights[0], 1.0, 1e-15);
  auto t01 = gauss_discretize(CompactMeasure::lebesgue_unit(), 1);
  EXPECT_NEAR(t01.nodes[0], 0.5, 1e-15);

  auto g8 = gauss_discretize(sc, 8);
  double t4 = state(g8.embed(Polynomial::monomial(4))).real_double();
  double oracle = simpson([](double t) { return std::pow(t, 4) * std::sqrt(std::max(0.0, 4 - t * t)) / (2 * std::numbers::pi); },
                          -2, 2, 200000);
  EXPECT_NEAR(t4, 2.0, 1e-12);
  EXPECT_NEAR(oracle, 2.0, 1e-6);

  auto l2 = gauss_discretize(CompactMeasure::lebesgue_symmetric(), 2);
  EXPECT_NEAR(l2.nodes[0], -1 / std::sqrt(3.0), 1e-14);
  EXPECT_NEAR(l2.nodes[1], 1 / std::sqrt(3.0), 1e-14);
  EXPECT_NEAR(l2.weights[0], 0.5, 1e-14);
  EXPECT_NEAR(l2.weights[1], 0.5, 1e-14);
}

TEST(Measure, QuadratureExactness) {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int> c(-5, 5);
  for (auto mu : {CompactMeasure::semicircle(), CompactMeasure::lebesgue_symmetric(), CompactMeasure::cosine()}) {
    for (int n : {3, 6, 10}) {
      auto g = gauss_discretize(mu, n);
      for (int trial = 0; trial < 10; ++trial) {
        std::vector<Scalar> coeffs;
        for (int k = 0; k < 2 * n; ++k) coeffs.push_back(Scalar::rational(c(rng), 3));
        Polynomial p(coeffs);
        double exact = mu.integrate(p).real_double();
        double quad = state(g.embed(p)).real_double();
        EXPECT_NEAR(quad, exact, 1e-10 * std::max(1.0, std::abs(exact)));
      }
      for (double x : g.nodes) {
        EXPECT_GE(x, mu.lower());
        EXPECT_LE(x, mu.upper());
      }
    }
  }
}

TEST(Measure, SemicircleCdfIncreasingAtNodes) {
  auto g = gauss_discretize(CompactMeasure::semicircle(), 30);
  for (std::size_t i = 1; i < g.nodes.size(); ++i) EXPECT_GT(semicircle_cdf(g.nodes[i]), semicircle_cdf(g.nodes[i - 1]));
  EXPECT_NEAR(semicircle_cdf(0.0), 0.5, 1e-15);
  // Cross-check the closed form against integrating the density.
  auto mu = CompactMeasure::semicircle();
  EXPECT_NEAR(semicircle_cdf(0.7), 0.5 + simpson([&](double t) { return mu.density(t); }, 0, 0.7, 2000), 1e-10);
}

TEST(Measure, DegreeFiltrationConstants) {
  auto sc = CompactMeasure::semicircle();
  for (int n : {0, 1, 5, 10}) {
    double sum = 0;
    for (int k = 0; k <= n; ++k) sum += (k + 1.0) * (k + 1.0);
    EXPECT_NEAR(std::pow(degree_rd_constant(sc, n).value, 2), sum, 1e-8 * sum) << n;
  }
  EXPECT_NEAR(degree_rd_constant(sc, 10).value, std::sqrt(506.0), 1e-9);
  auto lg = CompactMeasure::lebesgue_symmetric();
  for (int n : {0, 3, 12}) EXPECT_NEAR(degree_rd_constant(lg, n).value, n + 1.0, 1e-9);
  auto cs = CompactMeasure::cosine();
  for (int n : {0, 4, 9}) EXPECT_NEAR(std::pow(degree_rd_constant(cs, n).value, 2), 2.0 * n + 1, 1e-8);
}

TEST(Measure, ConcurrentCacheIsResultInvisible) {
  auto mu = CompactMeasure::lebesgue_symmetric();
  std::vector<OrthoPolySequence> results(4);
  std::vector<std::thread> ts;
  for (int i = 0; i < 4; ++i) ts.emplace_back([&, i] { results[i] = mu.ortho_polys(10 + 5 * i); });
  for (auto& t : ts) t.join();
  auto fresh = CompactMeasure::lebesgue_symmetric().ortho_polys(25);
  for (int i = 0; i < 4; ++i)
    for (int k = 0; k <= results[i].degree(); ++k) {
      EXPECT_TRUE(results[i].monic[k].exactly_equal(fresh.monic[k]));
      EXPECT_EQ(results[i].beta[k], fresh.beta[k]);
      if (k < results[i].degree()) EXPECT_EQ(results[i].alpha[k], fresh.alpha[k]);
    }
}
