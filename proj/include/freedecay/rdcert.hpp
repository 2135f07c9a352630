#ifndef FREEDECAY_RDCERT_HPP
#define FREEDECAY_RDCERT_HPP

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "freedecay/algebra.hpp"
#include "freedecay/fock.hpp"
#include "freedecay/freeword.hpp"
#include "freedecay/measure.hpp"

namespace freedecay {

/// Filtration V_0 = C1 in V_1 in ... of a finite-dimensional algebra, given by
/// spanning sets per level. Levels are made cumulative: V_n is the span of 1 and
/// the spanning sets of levels 0..n.
class FiniteFiltration {
 public:
  FiniteFiltration(AlgebraPtr algebra, std::vector<std::vector<AlgebraElement>> spans, std::string recipe);

  /// V_n = A for all n >= 1.
  static FiniteFiltration constant(const AlgebraPtr& a, int max_n);
  /// V_n = span of words of length <= n in the generators and their adjoints.
  static FiniteFiltration generated(const AlgebraPtr& a, const std::vector<AlgebraElement>& gens, int max_n);

  const AlgebraPtr& algebra() const { return algebra_; }
  int max_level() const { return static_cast<int>(onbs_.size()) - 1; }
  const std::string& recipe() const { return recipe_; }
  /// Orthonormal basis of V_n, starting with 1. Throws PreconditionError for
  /// levels that were not built.
  const std::vector<AlgebraElement>& onb(int n) const;
  /// Orthonormal basis of V_n minus C1.
  std::vector<AlgebraElement> centered_onb(int n) const;
  int dim(int n) const { return static_cast<int>(onb(n).size()); }
  /// ||x - P_n x||_2 for the l2 projection P_n onto V_n.
  double distance(const AlgebraElement& x, int n) const;

 private:
  AlgebraPtr algebra_;
  std::vector<std::vector<AlgebraElement>> onbs_;
  std::string recipe_;
};

struct FiltrationAxioms {
  bool base_is_scalars = true;
  bool nested = true;
  bool star_stable = true;
  bool products_contained = true;
  std::string failure;
  bool ok() const { return base_is_scalars && nested && star_stable && products_contained; }
};
/// V_0 = C1, nesting and *-stability on every basis vector; V_n V_k in V_{n+k}
/// on products of basis vectors for n + k within the built range.
FiltrationAxioms check_axioms(const FiniteFiltration& f, double tol = 1e-10);

struct RDRow {
  int n = 0;
  double c = 0.0;        // C_n, or the lower end of a bracket
  double c_upper = 0.0;  // equal to c unless bracketed
  long dim = 0;
  std::string method;    // "exact dn", "estimated" or "bracket"
};
struct ExponentFit {
  double alpha = 0.0;
  double intercept = 0.0;
};
struct RDReport {
  std::string recipe;
  std::vector<RDRow> rows;
  std::optional<ExponentFit> fit;
};

/// C_0 = 1; otherwise dn_norm of an orthonormal basis of V_n.
RDRow rd_constant(const FiniteFiltration& f, int n);
/// Degree filtration of a measure: sup-norm estimate of (sum_{k<=n} p_k^2)^{1/2}.
RDRow rd_constant(const CompactMeasure& mu, int n);

/// Least squares slope of log C_n against log(n + 1) over rows with n >= 1,
/// after clamping C_n to be nondecreasing. PreconditionError with fewer than
/// three such rows.
ExponentFit fit_exponent(const std::vector<RDRow>& rows);

RDReport rd_report(const FiniteFiltration& f, int max_n);
RDReport rd_report(const CompactMeasure& mu, int max_n);

/// Free filtration: V_n spanned by alternating centered words of length <= n
/// with letters from V_{n,j} minus C1.
class FreeFiltration {
 public:
  FreeFiltration(std::vector<FiniteFiltration> factors, long cap = 20000);

  const AmbientPtr& ambient() const { return ambient_; }
  const std::vector<FiniteFiltration>& factors() const { return factors_; }
  int max_level() const;
  /// dim V_n from the basis sizes, without building anything.
  long dim(int n) const;
  /// Orthonormal words of V_n, the empty word first. ResourceError past the cap.
  std::vector<Word> onb(int n) const;
  /// ||x - P_n x||_2, accurate to about sqrt(eps) ||x||_2 in floating mode.
  double distance(const FreeElement& x, int n) const;

 private:
  std::vector<FiniteFiltration> factors_;
  AmbientPtr ambient_;
  long cap_;
};

struct FreeFiltrationChecks {
  bool nested = true;
  bool star_stable = true;
  bool layers_orthogonal = true;  // exact Gram entries across lengths
  bool degree_containment = true; // sampled non-alternating products
  int samples = 0;
  std::string failure;
  bool ok() const { return nested && star_stable && layers_orthogonal && degree_containment; }
};
FreeFiltrationChecks check_free_filtration(const FreeFiltration& f, int n, int samples, std::mt19937_64& rng);

/// Bracket for the RD constant of the free filtration: lower from
/// ||sum_i P x_i x_i^* P||^{1/2} over the basis words on a truncated Fock space,
/// upper from the layer estimate 2 sqrt(m) (l + 1) max_j C_j on each length l,
/// combined over lengths by Cauchy-Schwarz.
RDRow rd_constant(const FreeFiltration& f, int n, int depth = -1);
RDReport rd_report(const FreeFiltration& f, int max_n, int depth = -1);

/// Result of a derived construction with the constants predicted per level.
struct DerivedFiltration {
  FiniteFiltration filtration;
  std::vector<double> predicted;  // predicted[n] bounds C_n of the new filtration
  std::string mode;
};
struct DerivedRow {
  int n = 0;
  double c = 0.0;
  double predicted = 0.0;
  bool holds = true;
};
std::vector<DerivedRow> compare_derived(const DerivedFiltration& d, double tol = 1e-9);

/// (A1 + A2, alpha rho_1 + (1 - alpha) rho_2), V_n = V_{n,1} + V_{n,2};
/// predicted max(C_1 alpha^{-1/2}, C_2 (1 - alpha)^{-1/2}).
DerivedFiltration direct_sum(const FiniteFiltration& f1, const FiniteFiltration& f2, const Scalar& alpha);
/// (pAp, rho / rho(p)) with V_n' = pAp intersected with V_n; predicted C_n rho(p)^{1/2}.
/// PreconditionError when p is not a projection or rho(p) = 0.
DerivedFiltration corner(const FiniteFiltration& f, const AlgebraElement& p);
/// A1 (x) A2 with V_n (x) W_n; predicted C_n D_n dim(V_n)^{1/2}.
DerivedFiltration tensor(const FiniteFiltration& f1, const FiniteFiltration& f2);
/// Minimal tensor product of two finite-dimensional probability spaces.
AlgebraPtr tensor_algebra(const AlgebraPtr& a, const AlgebraPtr& b);
AlgebraElement tensor_element(const AlgebraPtr& ab, const AlgebraElement& x, const AlgebraElement& y);

struct AvitzourSearch {
  std::optional<AvitzourTriple> triple;
  std::string method;  // "structured", "random" or "none"
  int trials = 0;
  std::uint64_t seed = 0;
};
/// Unitaries u in A1 and v, w in A2 with rho(u) = tau(v) = tau(w) = tau(v* w) = 0
/// and v in the centralizer of tau: first by cyclic permutations and diagonal
/// phases in the density eigenbases, then by a seeded random search.
AvitzourSearch find_avitzour_triple(const AlgebraPtr& a1, const AlgebraPtr& a2, std::uint64_t seed = 0,
                                    int trials = 10000);

struct Thm64Report {
  int dim_v = 0;
  int dim_f = 0;
  double sup_uau = 0.0;        // sup |tau(a1 u a2 u)|
  double sup_ua = 0.0;         // sup |tau(a1 u a2)|, a2 in F
  double inflated_rd = 0.0;    // dn_norm of an orthonormal basis of F
  double containment_l2 = 0.0; // sup over unit y in V minus C1 of ||y - P_F y||_2
  double containment_op = 0.0; // max over basis y of ||y - P_F y||
  double conj_containment_l2 = 0.0;  // the same for u* y u
  double conj_containment_op = 0.0;
  bool f_has_one = true;
  bool f_star_stable = true;
};
/// Finite-dimensional quantities behind the almost orthogonality, inflated
/// rapid decay and asymptotic containment hypotheses for one (n, k).
Thm64Report thm64_check(const std::vector<AlgebraElement>& v_span, const AlgebraElement& u,
                        const std::vector<AlgebraElement>& f_span);

struct AbelianVerdict {
  bool selfless = false;
  std::vector<std::string> reasons;
};
/// Selfless iff m + n >= 5 and max(a) + max(b) < 1. Weights must be positive
/// and sum to one.
AbelianVerdict classify_abelian(const std::vector<Scalar>& a, const std::vector<Scalar>& b);

}  // namespace freedecay

#endif  // FREEDECAY_RDCERT_HPP
