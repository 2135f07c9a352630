#ifndef FREEDECAY_KHINTCHINE_HPP
#define FREEDECAY_KHINTCHINE_HPP

#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "freedecay/fock.hpp"
#include "freedecay/freeword.hpp"

namespace freedecay {

/// (factor, basis index) slots of an alternating multi-index.
using MultiIndex = std::vector<std::pair<int, int>>;
/// Orthonormal bases of the centered parts, one list per factor.
using FactorBases = std::vector<std::vector<AlgebraElement>>;

/// Normalized orthogonal_complement of every factor.
FactorBases default_bases(const AmbientPtr& ambient);

/// x = sum_I lambda_I e_I over alternating multi-indices of one length.
class HomogeneousElement {
 public:
  HomogeneousElement(AmbientPtr ambient, FactorBases bases, int length);

  /// Gaussian coefficients (floating) or small Gaussian rationals (exact) on
  /// every alternating multi-index of the given length.
  static HomogeneousElement random(const AmbientPtr& ambient, const FactorBases& bases, int length, std::mt19937_64& rng,
                                   bool exact);
  /// Coordinates of a normalized element against the basis words; throws
  /// PreconditionError when x has components outside W_length.
  static HomogeneousElement from_free(const FreeElement& x, const FactorBases& bases, int length);

  const AmbientPtr& ambient() const { return ambient_; }
  const FactorBases& bases() const { return bases_; }
  int length() const { return length_; }
  const std::map<MultiIndex, Scalar>& coeffs() const { return coeffs_; }
  void set(const MultiIndex& index, const Scalar& c);

  FreeElement to_free() const;
  /// sum |lambda_I|^2, exact for exact coefficients.
  Scalar l2_norm2() const;
  double l2_norm() const;
  /// Reverse every multi-index and conjugate: this is x* when the bases are
  /// self-adjoint.
  HomogeneousElement adjoint_reversed() const;
  HomogeneousElement scaled(const Scalar& c) const;

 private:
  AmbientPtr ambient_;
  FactorBases bases_;
  int length_;
  std::map<MultiIndex, Scalar> coeffs_;
};

/// Every alternating multi-index of length l over the basis sizes.
std::vector<MultiIndex> alternating_indices(const std::vector<int>& sizes, int length);

/// ||s_r(x)||: spectral norm of the prefix-by-suffix matricization, r in 0..l.
double sr_norm(const HomogeneousElement& x, int r);
/// Squared Hilbert-Schmidt norm of the matricization (exact for exact input).
Scalar sr_hs2(const HomogeneousElement& x, int r);

struct TrBracket {
  double lower = 0.0;
  double upper = 0.0;
  /// sqrt(#factors used) * (sum over factors and blocks of ||T^(j)_{I,J}||^2)^{1/2}.
  double cs_bound = 0.0;
};
/// Bracket for ||t_r(x)||, r in 1..l. Upper: sum over middle factors j of the
/// exact norm of the block matrix [T^(j)_{I,J}] over A_j. Lower: the block
/// operator [P_L lambda(T_{I,J}) P_L] on a truncated Fock space of the given
/// depth (default 4).
TrBracket tr_bracket(const HomogeneousElement& x, int r, int depth = 4);

struct KhBracket {
  double lower = 0.0;
  double upper = 0.0;
  int argmax_r = 0;
  std::string argmax_kind;  // "s" or "t"
};
KhBracket kh_bracket(const HomogeneousElement& x, int depth = 4);

struct RxReport {
  int length = 0;
  double l2 = 0.0;
  double kh_lower = 0.0;
  double kh_upper = 0.0;
  double norm_lb = 0.0;     // compression norm at the default depth
  double moment_lb = 0.0;   // best moment lower bound
  double bound = 0.0;       // 2 (l + 1) Kh_upper
  double margin = 0.0;      // bound - max(lower bounds)
  bool pass = true;
  std::string witness;
};
/// max(norm lower bounds) <= 2 (l + 1) Kh_upper, plus ||s_r(x)|| <= ||x||_2 for
/// every r and lower <= upper for every t_r bracket.
RxReport rx_check(const HomogeneousElement& x, int moment_rmax = 3, long cap = TruncatedFock::kDefaultCap);

struct LayerReport {
  double l2 = 0.0;
  double lower = 0.0;
  double bound = 0.0;  // 2 sqrt(m) (l + 1) max_j C_j ||y||_2
  double margin = 0.0;
  bool pass = true;
};
/// Layer estimate with factor constants C_j (||a|| <= C_j ||a||_2 on the
/// centered part of factor j).
LayerReport layer_estimate_check(const HomogeneousElement& y, const std::vector<double>& constants, int moment_rmax = 3,
                                 long cap = TruncatedFock::kDefaultCap);

/// ||[T_ij]|| and (sum ||T_ij||^2)^{1/2} for a block matrix with entries in one algebra.
std::pair<double, double> block_matrix_norms(const std::vector<std::vector<AlgebraElement>>& blocks);

}  // namespace freedecay

#endif  // FREEDECAY_KHINTCHINE_HPP
