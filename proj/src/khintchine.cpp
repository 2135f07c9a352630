#include "freedecay/khintchine.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "freedecay/errors.hpp"

namespace freedecay {

namespace {

double dense_norm(const Eigen::MatrixXcd& m) {
  if (m.size() == 0) return 0.0;
  Eigen::MatrixXcd g = m.rows() <= m.cols() ? Eigen::MatrixXcd(m * m.adjoint()) : Eigen::MatrixXcd(m.adjoint() * m);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(g, Eigen::EigenvaluesOnly);
  return std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
}

MultiIndex slice(const MultiIndex& i, int from, int to) {
  return MultiIndex(i.begin() + from, i.begin() + to);
}

// Position of each distinct key, in first-seen order of the sorted map.
template <typename Key>
int slot_of(std::map<Key, int>& pos, const Key& k) {
  auto it = pos.find(k);
  if (it != pos.end()) return it->second;
  int n = static_cast<int>(pos.size());
  pos.emplace(k, n);
  return n;
}

void check_r(const HomogeneousElement& x, int r, int lo) {
  if (r < lo || r > x.length()) {
    std::ostringstream os;
    os << "index r = " << r << " outside " << lo << ".." << x.length();
    throw PreconditionError(os.str());
  }
}

}  // namespace

FactorBases default_bases(const AmbientPtr& ambient) {
  FactorBases out;
  for (int j = 0; j < ambient->size(); ++j) out.push_back(onb_complement(ambient->factor(j)));
  return out;
}

HomogeneousElement::HomogeneousElement(AmbientPtr ambient, FactorBases bases, int length)
    : ambient_(std::move(ambient)), bases_(std::move(bases)), length_(length) {
  if (length_ < 1) throw PreconditionError("homogeneous elements need length >= 1");
  if (static_cast<int>(bases_.size()) != ambient_->size())
    throw PreconditionError("one basis per factor is required");
}

void HomogeneousElement::set(const MultiIndex& index, const Scalar& c) {
  if (static_cast<int>(index.size()) != length_) throw PreconditionError("multi-index has the wrong length");
  for (std::size_t s = 0; s < index.size(); ++s) {
    auto [j, k] = index[s];
    if (j < 0 || j >= ambient_->size() || k < 0 || k >= static_cast<int>(bases_[j].size()))
      throw PreconditionError("multi-index slot out of range");
    if (s > 0 && index[s - 1].first == j) throw PreconditionError("multi-index is not alternating");
  }
  if (c.is_zero())
    coeffs_.erase(index);
  else
    coeffs_[index] = c;
}

std::vector<MultiIndex> alternating_indices(const std::vector<int>& sizes, int length) {
  std::vector<MultiIndex> out{{}};
  for (int s = 0; s < length; ++s) {
    std::vector<MultiIndex> next;
    for (const auto& i : out)
      for (int j = 0; j < static_cast<int>(sizes.size()); ++j) {
        if (!i.empty() && i.back().first == j) continue;
        for (int k = 0; k < sizes[j]; ++k) {
          MultiIndex n = i;
          n.emplace_back(j, k);
          next.push_back(std::move(n));
        }
      }
    out = std::move(next);
  }
  return out;
}

HomogeneousElement HomogeneousElement::random(const AmbientPtr& ambient, const FactorBases& bases, int length,
                                              std::mt19937_64& rng, bool exact) {
  HomogeneousElement x(ambient, bases, length);
  std::vector<int> sizes;
  for (const auto& b : bases) sizes.push_back(static_cast<int>(b.size()));
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_int_distribution<int> num(-8, 8);
  std::uniform_int_distribution<int> den(1, 4);
  for (const auto& i : alternating_indices(sizes, length)) {
    if (exact) {
      mpq_class re(num(rng), den(rng)), im(num(rng), den(rng));
      re.canonicalize();
      im.canonicalize();
      x.set(i, Scalar::exact(re, im));
    } else {
      x.set(i, Scalar::floating(g(rng), g(rng)));
    }
  }
  return x;
}

HomogeneousElement HomogeneousElement::from_free(const FreeElement& x, const FactorBases& bases, int length) {
  HomogeneousElement out(x.ambient(), bases, length);
  std::vector<int> sizes;
  for (const auto& b : bases) sizes.push_back(static_cast<int>(b.size()));
  for (const auto& i : alternating_indices(sizes, length)) {
    Word w;
    for (auto [j, k] : i) w.push_back({j, bases[j][k]});
    out.set(i, l2_inner_free(x, FreeElement::word(x.ambient(), w)));
  }
  double total = l2_norm_free(x);
  double rest = total * total - out.l2_norm2().real_double();
  if (rest > 1e-9 * std::max(1.0, total * total))
    throw PreconditionError("element has components outside the homogeneous layer");
  return out;
}

FreeElement HomogeneousElement::to_free() const {
  FreeElement x(ambient_);
  for (const auto& [i, c] : coeffs_) {
    Word w;
    for (auto [j, k] : i) w.push_back({j, bases_[j][k]});
    x.add_term(w, c);
  }
  return x;
}

Scalar HomogeneousElement::l2_norm2() const {
  Scalar s(0);
  for (const auto& [i, c] : coeffs_) s += c.abs2();
  return s;
}

double HomogeneousElement::l2_norm() const { return std::sqrt(std::max(0.0, l2_norm2().real_double())); }

HomogeneousElement HomogeneousElement::adjoint_reversed() const {
  HomogeneousElement out(ambient_, bases_, length_);
  for (const auto& [i, c] : coeffs_) out.set(MultiIndex(i.rbegin(), i.rend()), c.conj());
  return out;
}

HomogeneousElement HomogeneousElement::scaled(const Scalar& c) const {
  HomogeneousElement out(ambient_, bases_, length_);
  for (const auto& [i, v] : coeffs_) out.set(i, v * c);
  return out;
}

double sr_norm(const HomogeneousElement& x, int r) {
  check_r(x, r, 0);
  std::map<MultiIndex, int> rows, cols;
  std::vector<std::tuple<int, int, std::complex<double>>> entries;
  for (const auto& [i, c] : x.coeffs()) {
    int a = slot_of(rows, slice(i, 0, r));
    int b = slot_of(cols, slice(i, r, x.length()));
    entries.emplace_back(a, b, c.to_complex());
  }
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(static_cast<long>(rows.size()), static_cast<long>(cols.size()));
  for (auto [a, b, v] : entries) m(a, b) += v;
  return dense_norm(m);
}

Scalar sr_hs2(const HomogeneousElement& x, int r) {
  check_r(x, r, 0);
  // Distinct multi-indices give distinct (prefix, suffix) cells.
  return x.l2_norm2();
}

std::pair<double, double> block_matrix_norms(const std::vector<std::vector<AlgebraElement>>& blocks) {
  if (blocks.empty() || blocks[0].empty()) return {0.0, 0.0};
  const AlgebraPtr& a = blocks[0][0].owner();
  long nr = static_cast<long>(blocks.size()), nc = static_cast<long>(blocks[0].size());
  double best = 0.0, sum2 = 0.0;
  for (const auto& row : blocks)
    for (const auto& t : row) sum2 += std::pow(op_norm(t), 2);
  for (int b = 0; b < a->num_blocks(); ++b) {
    long n = a->block_dim(b);
    Eigen::MatrixXcd m(nr * n, nc * n);
    for (long p = 0; p < nr; ++p)
      for (long s = 0; s < nc; ++s) m.block(p * n, s * n, n, n) = blocks[p][s].block(b).to_eigen();
    best = std::max(best, dense_norm(m));
  }
  return {best, std::sqrt(sum2)};
}

TrBracket tr_bracket(const HomogeneousElement& x, int r, int depth) {
  check_r(x, r, 1);
  const AmbientPtr& amb = x.ambient();
  int m = amb->size();
  std::map<MultiIndex, int> rows, cols;
  for (const auto& [i, c] : x.coeffs()) {
    slot_of(rows, slice(i, 0, r - 1));
    slot_of(cols, slice(i, r, x.length()));
  }
  long np = static_cast<long>(rows.size()), ns = static_cast<long>(cols.size());
  TrBracket out;
  if (np == 0) return out;

  // T^(j)_{P,S} = sum_k lambda_{P (j,k) S} e^(j)_k.
  std::vector<std::vector<std::vector<AlgebraElement>>> t(m);
  std::vector<bool> used(m, false);
  for (int j = 0; j < m; ++j)
    t[j].assign(np, std::vector<AlgebraElement>(ns, amb->factor(j)->zero()));
  for (const auto& [i, c] : x.coeffs()) {
    auto [j, k] = i[r - 1];
    AlgebraElement& cell = t[j][rows.at(slice(i, 0, r - 1))][cols.at(slice(i, r, x.length()))];
    cell += x.bases()[j][k] * c;
    used[j] = true;
  }

  double sum2 = 0.0;
  int m_used = 0;
  for (int j = 0; j < m; ++j) {
    if (!used[j]) continue;
    ++m_used;
    auto [norm, hs] = block_matrix_norms(t[j]);
    out.upper += norm;
    sum2 += hs * hs;
  }
  out.cs_bound = std::sqrt(static_cast<double>(m_used)) * std::sqrt(sum2);

  TruncatedFock f = build_fock(amb, depth);
  long d = f.dimension();
  std::vector<Eigen::Triplet<std::complex<double>>> trip;
  for (long p = 0; p < np; ++p)
    for (long s = 0; s < ns; ++s) {
      FreeElement cell(amb);
      for (int j = 0; j < m; ++j)
        if (!t[j][p][s].is_zero()) cell += FreeElement::letter(amb, j, t[j][p][s]);
      if (cell.is_zero()) continue;
      SparseMatrixXcd blk = represent(f, cell);
      for (int k = 0; k < blk.outerSize(); ++k)
        for (SparseMatrixXcd::InnerIterator it(blk, k); it; ++it)
          trip.emplace_back(p * d + it.row(), s * d + it.col(), it.value());
    }
  SparseMatrixXcd big(np * d, ns * d);
  big.setFromTriplets(trip.begin(), trip.end());
  out.lower = spectral_norm_sparse(big);
  return out;
}

KhBracket kh_bracket(const HomogeneousElement& x, int depth) {
  KhBracket out;
  for (int r = 0; r <= x.length(); ++r) {
    double s = sr_norm(x, r);
    if (s > out.upper) {
      out.argmax_r = r;
      out.argmax_kind = "s";
    }
    out.lower = std::max(out.lower, s);
    out.upper = std::max(out.upper, s);
  }
  for (int r = 1; r <= x.length(); ++r) {
    TrBracket t = tr_bracket(x, r, depth);
    if (t.upper > out.upper) {
      out.argmax_r = r;
      out.argmax_kind = "t";
    }
    out.lower = std::max(out.lower, t.lower);
    out.upper = std::max(out.upper, t.upper);
  }
  return out;
}

RxReport rx_check(const HomogeneousElement& x, int moment_rmax, long cap) {
  RxReport rep;
  rep.length = x.length();
  rep.l2 = x.l2_norm();
  constexpr double kRel = 1e-9;
  std::ostringstream why;
  for (int r = 0; r <= x.length(); ++r) {
    double s = sr_norm(x, r);
    if (s > rep.l2 * (1 + kRel) + kRel) {
      rep.pass = false;
      why << "s_" << r << " = " << s << " exceeds ||x||_2 = " << rep.l2 << "; ";
    }
    rep.kh_lower = std::max(rep.kh_lower, s);
    rep.kh_upper = std::max(rep.kh_upper, s);
  }
  for (int r = 1; r <= x.length(); ++r) {
    TrBracket t = tr_bracket(x, r);
    if (t.lower > t.upper * (1 + kRel) + kRel || t.upper > t.cs_bound * (1 + kRel) + kRel) {
      rep.pass = false;
      why << "t_" << r << " bracket [" << t.lower << ", " << t.upper << "] cs " << t.cs_bound << "; ";
    }
    rep.kh_lower = std::max(rep.kh_lower, t.lower);
    rep.kh_upper = std::max(rep.kh_upper, t.upper);
  }
  FreeElement fx = x.to_free();
  rep.norm_lb = norm_lower_bound(fx, cap);
  if (moment_rmax > 0) {
    MomentEstimate me = moment_norm_estimate(fx, moment_rmax);
    rep.moment_lb = me.max;
    for (double q : me.ratio) rep.moment_lb = std::max(rep.moment_lb, q);
  }
  rep.bound = 2.0 * (x.length() + 1) * rep.kh_upper;
  double lb = std::max(rep.norm_lb, rep.moment_lb);
  rep.margin = rep.bound - lb;
  if (lb > rep.bound * (1 + kRel) + kRel) {
    rep.pass = false;
    why << "norm lower bound " << lb << " exceeds 2(l+1)Kh = " << rep.bound << "; ";
  }
  rep.witness = why.str();
  return rep;
}

LayerReport layer_estimate_check(const HomogeneousElement& y, const std::vector<double>& constants, int moment_rmax,
                                 long cap) {
  if (static_cast<int>(constants.size()) != y.ambient()->size())
    throw PreconditionError("one constant per factor is required");
  LayerReport rep;
  rep.l2 = y.l2_norm();
  FreeElement fy = y.to_free();
  rep.lower = norm_lower_bound(fy, cap);
  if (moment_rmax > 0) {
    MomentEstimate me = moment_norm_estimate(fy, moment_rmax);
    rep.lower = std::max(rep.lower, me.max);
    for (double q : me.ratio) rep.lower = std::max(rep.lower, q);
  }
  double cmax = *std::max_element(constants.begin(), constants.end());
  rep.bound = 2.0 * std::sqrt(static_cast<double>(constants.size())) * (y.length() + 1) * cmax * rep.l2;
  rep.margin = rep.bound - rep.lower;
  rep.pass = rep.lower <= rep.bound * (1 + 1e-9) + 1e-9;
  return rep;
}

}  // namespace freedecay
