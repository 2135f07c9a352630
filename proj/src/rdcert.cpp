#include "freedecay/rdcert.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/QR>

#include "freedecay/errors.hpp"
#include "freedecay/khintchine.hpp"

namespace freedecay {

namespace {

using cd = std::complex<double>;

// Residual of x after the l2 projection onto an orthonormal list.
AlgebraElement project_out(const AlgebraElement& x, const std::vector<AlgebraElement>& onb) {
  AlgebraElement r = x;
  for (const auto& e : onb) r -= e * l2_inner(x, e);
  return r;
}

std::vector<AlgebraElement> all_units(const AlgebraPtr& a) {
  std::vector<AlgebraElement> out;
  for (int b = 0; b < a->num_blocks(); ++b)
    for (int i = 0; i < a->block_dim(b); ++i)
      for (int j = 0; j < a->block_dim(b); ++j) out.push_back(a->unit(b, i, j));
  return out;
}

double largest_singular(const Eigen::MatrixXcd& m) {
  if (m.size() == 0) return 0.0;
  Eigen::MatrixXcd g = m.adjoint() * m;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(g, Eigen::EigenvaluesOnly);
  return std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
}

CMatrix kron(const CMatrix& a, const CMatrix& b) {
  CMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) {
      if (a(i, j).is_zero() && a(i, j).is_exact()) continue;
      for (int k = 0; k < b.rows(); ++k)
        for (int l = 0; l < b.cols(); ++l) out(i * b.rows() + k, j * b.cols() + l) = a(i, j) * b(k, l);
    }
  return out;
}

bool is_exact_diagonal(const CMatrix& m) {
  if (!m.is_exact()) return false;
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j)
      if (i != j && !m(i, j).is_zero()) return false;
  return true;
}

int compare_real(const Scalar& a, const Scalar& b) {
  if (a.is_exact() && b.is_exact()) return cmp(a.re_q(), b.re_q());
  double x = a.real_double(), y = b.real_double();
  return x < y ? -1 : (x > y ? 1 : 0);
}

}  // namespace

// ---------------------------------------------------------------- filtrations

FiniteFiltration::FiniteFiltration(AlgebraPtr algebra, std::vector<std::vector<AlgebraElement>> spans,
                                   std::string recipe)
    : algebra_(std::move(algebra)), recipe_(std::move(recipe)) {
  if (spans.empty()) throw PreconditionError("filtration needs at least level 0");
  std::vector<AlgebraElement> current{algebra_->one()};
  for (auto& level : spans) {
    for (const auto& x : level)
      if (!same_algebra(x.owner(), algebra_)) throw StructuralError("spanning element from another algebra");
    std::vector<AlgebraElement> span = current;
    span.insert(span.end(), level.begin(), level.end());
    current = orthonormalize(span);
    onbs_.push_back(current);
  }
}

FiniteFiltration FiniteFiltration::constant(const AlgebraPtr& a, int max_n) {
  std::vector<std::vector<AlgebraElement>> spans(max_n + 1);
  for (int n = 1; n <= max_n; ++n) spans[n] = all_units(a);
  return FiniteFiltration(a, std::move(spans), "constant");
}

FiniteFiltration FiniteFiltration::generated(const AlgebraPtr& a, const std::vector<AlgebraElement>& gens, int max_n) {
  std::vector<AlgebraElement> letters;
  for (const auto& g : gens) {
    letters.push_back(g);
    letters.push_back(g.adjoint());
  }
  std::vector<std::vector<AlgebraElement>> spans(max_n + 1);
  std::vector<AlgebraElement> prev{a->one()};
  for (int n = 1; n <= max_n; ++n) {
    for (const auto& e : prev)
      for (const auto& g : letters) spans[n].push_back(e * g);
    std::vector<AlgebraElement> span = prev;
    span.insert(span.end(), spans[n].begin(), spans[n].end());
    prev = orthonormalize(span);
  }
  return FiniteFiltration(a, std::move(spans), "generated");
}

const std::vector<AlgebraElement>& FiniteFiltration::onb(int n) const {
  if (n < 0 || n > max_level()) throw PreconditionError("filtration level " + std::to_string(n) + " was not built");
  return onbs_[n];
}

std::vector<AlgebraElement> FiniteFiltration::centered_onb(int n) const {
  const auto& b = onb(n);
  return std::vector<AlgebraElement>(b.begin() + 1, b.end());
}

double FiniteFiltration::distance(const AlgebraElement& x, int n) const { return l2_norm(project_out(x, onb(n))); }

FiltrationAxioms check_axioms(const FiniteFiltration& f, double tol) {
  FiltrationAxioms out;
  std::ostringstream why;
  if (f.dim(0) != 1) {
    out.base_is_scalars = false;
    why << "dim V_0 = " << f.dim(0) << "; ";
  }
  int top = f.max_level();
  for (int n = 0; n <= top; ++n) {
    for (const auto& e : f.onb(n)) {
      if (n < top && f.distance(e, n + 1) > tol) {
        out.nested = false;
        why << "V_" << n << " not in V_" << n + 1 << "; ";
      }
      if (f.distance(e.adjoint(), n) > tol) {
        out.star_stable = false;
        why << "V_" << n << " not *-stable; ";
      }
    }
    for (int k = 0; n + k <= top; ++k)
      for (const auto& e : f.onb(n))
        for (const auto& g : f.onb(k))
          if (f.distance(e * g, n + k) > tol * std::max(1.0, l2_norm(e * g))) {
            out.products_contained = false;
            why << "V_" << n << " V_" << k << " not in V_" << n + k << "; ";
            goto next_n;
          }
  next_n:;
  }
  out.failure = why.str();
  return out;
}

RDRow rd_constant(const FiniteFiltration& f, int n) {
  RDRow row;
  row.n = n;
  row.dim = f.dim(n);
  row.method = "exact dn";
  row.c = n == 0 ? 1.0 : dn_norm(f.onb(n));
  row.c_upper = row.c;
  return row;
}

RDRow rd_constant(const CompactMeasure& mu, int n) {
  if (n < 0) throw PreconditionError("level must be nonnegative");
  RDRow row;
  row.n = n;
  row.dim = n + 1;
  row.method = "estimated";
  row.c = degree_rd_constant(mu, n).value;
  row.c_upper = row.c;
  return row;
}

ExponentFit fit_exponent(const std::vector<RDRow>& rows) {
  std::vector<RDRow> sorted = rows;
  std::sort(sorted.begin(), sorted.end(), [](const RDRow& a, const RDRow& b) { return a.n < b.n; });
  std::vector<double> xs, ys;
  double running = 0.0;
  for (const auto& r : sorted) {
    running = std::max(running, r.c);
    if (r.n < 1) continue;
    xs.push_back(std::log(r.n + 1.0));
    ys.push_back(std::log(running));
  }
  if (xs.size() < 3) throw PreconditionError("exponent fit needs at least three levels with n >= 1");
  double k = static_cast<double>(xs.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= k;
  my /= k;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  ExponentFit fit;
  fit.alpha = sxy / sxx;
  fit.intercept = my - fit.alpha * mx;
  return fit;
}

namespace {

template <typename F>
RDReport build_report(std::string recipe, int max_n, const F& row_at) {
  RDReport rep;
  rep.recipe = std::move(recipe);
  for (int n = 0; n <= max_n; ++n) rep.rows.push_back(row_at(n));
  int usable = 0;
  for (const auto& r : rep.rows) usable += r.n >= 1;
  if (usable >= 3) rep.fit = fit_exponent(rep.rows);
  return rep;
}

}  // namespace

RDReport rd_report(const FiniteFiltration& f, int max_n) {
  return build_report(f.recipe(), max_n, [&](int n) { return rd_constant(f, n); });
}

RDReport rd_report(const CompactMeasure& mu, int max_n) {
  return build_report("degree:" + mu.name(), max_n, [&](int n) { return rd_constant(mu, n); });
}

// ------------------------------------------------------------ free filtration

FreeFiltration::FreeFiltration(std::vector<FiniteFiltration> factors, long cap)
    : factors_(std::move(factors)), cap_(cap) {
  if (factors_.size() < 2) throw PreconditionError("free filtration needs at least two factors");
  std::vector<AlgebraPtr> algs;
  for (const auto& f : factors_) algs.push_back(f.algebra());
  ambient_ = make_ambient(algs);
}

int FreeFiltration::max_level() const {
  int top = factors_[0].max_level();
  for (const auto& f : factors_) top = std::min(top, f.max_level());
  return top;
}

long FreeFiltration::dim(int n) const {
  if (n < 0 || n > max_level()) throw PreconditionError("free filtration level " + std::to_string(n) + " was not built");
  std::vector<int> sizes;
  for (const auto& f : factors_) sizes.push_back(f.dim(n) - 1);
  return static_cast<long>(FockIndex::count(sizes, n));
}

std::vector<Word> FreeFiltration::onb(int n) const {
  long d = dim(n);
  if (d > cap_) throw ResourceError("free filtration level has dimension " + std::to_string(d) + " above the cap");
  std::vector<std::vector<AlgebraElement>> letters;
  std::vector<int> sizes;
  for (const auto& f : factors_) {
    letters.push_back(f.centered_onb(n));
    sizes.push_back(static_cast<int>(letters.back().size()));
  }
  std::vector<Word> out;
  for (int len = 0; len <= n; ++len)
    for (const auto& idx : alternating_indices(sizes, len)) {
      Word w;
      for (auto [j, k] : idx) w.push_back({j, letters[j][k]});
      out.push_back(std::move(w));
    }
  return out;
}

double FreeFiltration::distance(const FreeElement& x, int n) const {
  double total = std::pow(l2_norm_free(x), 2);
  double inside = 0.0;
  for (const auto& w : onb(n)) inside += l2_inner_free(x, FreeElement::word(ambient_, w)).abs2().real_double();
  return std::sqrt(std::max(0.0, total - inside));
}

FreeFiltrationChecks check_free_filtration(const FreeFiltration& f, int n, int samples, std::mt19937_64& rng) {
  FreeFiltrationChecks out;
  std::ostringstream why;
  const AmbientPtr& amb = f.ambient();
  std::vector<Word> basis = f.onb(n);
  std::uniform_int_distribution<std::size_t> pick(0, basis.size() - 1);
  // Floating distances are only accurate to about sqrt(eps) ||x||_2.
  constexpr double kTol = 1e-6;
  for (int s = 0; s < samples; ++s) {
    const Word& w = basis[pick(rng)];
    FreeElement x = FreeElement::word(amb, w);
    if (n < f.max_level() && f.distance(x, n + 1) > kTol) {
      out.nested = false;
      why << "basis word not in V_" << n + 1 << "; ";
    }
    if (f.distance(adjoint(x), n) > kTol) {
      out.star_stable = false;
      why << "adjoint of a basis word not in V_" << n << "; ";
    }
    const Word& w2 = basis[pick(rng)];
    if (w2.size() != w.size()) {
      Scalar g = l2_inner_free(x, FreeElement::word(amb, w2));
      if (!g.is_zero()) {
        out.layers_orthogonal = false;
        why << "words of lengths " << w.size() << " and " << w2.size() << " not orthogonal; ";
      }
    }
    ++out.samples;
  }
  // Non-alternating products a_1...a_l with a_i in V_{k(i), j(i)} and sum k(i) <= n.
  std::uniform_int_distribution<int> factor(0, amb->size() - 1);
  std::normal_distribution<double> g;
  for (int s = 0; s < samples && n >= 1; ++s) {
    int budget = n;
    Word w;
    std::uniform_int_distribution<int> len_d(1, n);
    int len = len_d(rng);
    for (int i = 0; i < len; ++i) {
      std::uniform_int_distribution<int> kd(0, budget);
      int k = i + 1 == len ? budget : kd(rng);
      budget -= k;
      int j = factor(rng);
      const auto& b = f.factors()[j].onb(k);
      AlgebraElement a = amb->factor(j)->zero();
      for (const auto& e : b) a += e * Scalar::floating(g(rng), g(rng));
      w.push_back({j, a});
    }
    FreeElement x = FreeElement::word(amb, w);
    double scale = std::max(1.0, l2_norm_free(x));
    if (f.distance(x, n) > kTol * scale) {
      out.degree_containment = false;
      why << "degree-" << n << " product not in V_" << n << "; ";
    }
  }
  out.failure = why.str();
  return out;
}

RDRow rd_constant(const FreeFiltration& f, int n, int depth) {
  RDRow row;
  row.n = n;
  row.dim = f.dim(n);
  row.method = "bracket";
  if (n == 0) {
    row.c = row.c_upper = 1.0;
    return row;
  }
  int m = f.ambient()->size();
  double c_max = 0.0;
  for (const auto& ff : f.factors()) c_max = std::max(c_max, dn_norm(ff.centered_onb(n)));
  double sum2 = 1.0;
  for (int l = 1; l <= n; ++l) sum2 += std::pow(2.0 * std::sqrt(static_cast<double>(m)) * (l + 1) * c_max, 2);
  row.c_upper = std::sqrt(sum2);

  TruncatedFock fock = build_fock(f.ambient(), depth < 0 ? n + 2 : depth);
  SparseMatrixXcd gram(fock.dimension(), fock.dimension());
  for (const auto& w : f.onb(n)) {
    SparseMatrixXcd r = represent(fock, FreeElement::word(f.ambient(), w));
    gram += SparseMatrixXcd(r * r.adjoint());
  }
  row.c = std::max(1.0, std::sqrt(spectral_norm_sparse(gram)));
  return row;
}

RDReport rd_report(const FreeFiltration& f, int max_n, int depth) {
  return build_report("free", max_n, [&](int n) { return rd_constant(f, n, depth); });
}

// -------------------------------------------------------- derived filtrations

std::vector<DerivedRow> compare_derived(const DerivedFiltration& d, double tol) {
  std::vector<DerivedRow> out;
  for (int n = 0; n <= d.filtration.max_level(); ++n) {
    DerivedRow row;
    row.n = n;
    row.c = rd_constant(d.filtration, n).c;
    row.predicted = d.predicted.at(n);
    row.holds = row.c <= row.predicted * (1 + tol) + tol;
    out.push_back(row);
  }
  return out;
}

DerivedFiltration direct_sum(const FiniteFiltration& f1, const FiniteFiltration& f2, const Scalar& alpha) {
  double a = alpha.real_double();
  if (!alpha.is_real() || a <= 0.0 || a >= 1.0) throw PreconditionError("direct sum weight must lie in (0, 1)");
  const AlgebraPtr& a1 = f1.algebra();
  const AlgebraPtr& a2 = f2.algebra();
  std::vector<CMatrix> dens;
  for (int b = 0; b < a1->num_blocks(); ++b) dens.push_back(a1->density(b) * alpha);
  for (int b = 0; b < a2->num_blocks(); ++b) dens.push_back(a2->density(b) * (Scalar(1) - alpha));
  AlgebraPtr s = MatrixBlockAlgebra::make(dens);
  auto embed = [&](const AlgebraElement& x, bool first) {
    std::vector<CMatrix> blocks;
    for (int b = 0; b < a1->num_blocks(); ++b)
      blocks.push_back(first ? x.block(b) : CMatrix(a1->block_dim(b), a1->block_dim(b)));
    for (int b = 0; b < a2->num_blocks(); ++b)
      blocks.push_back(first ? CMatrix(a2->block_dim(b), a2->block_dim(b)) : x.block(b));
    return s->element(blocks);
  };
  int top = std::min(f1.max_level(), f2.max_level());
  std::vector<std::vector<AlgebraElement>> spans(top + 1);
  std::vector<double> predicted{1.0};
  for (int n = 1; n <= top; ++n) {
    for (const auto& e : f1.onb(n)) spans[n].push_back(embed(e, true));
    for (const auto& e : f2.onb(n)) spans[n].push_back(embed(e, false));
    predicted.push_back(std::max(rd_constant(f1, n).c / std::sqrt(a), rd_constant(f2, n).c / std::sqrt(1 - a)));
  }
  return {FiniteFiltration(s, std::move(spans), "direct_sum"), predicted, "direct_sum"};
}

DerivedFiltration corner(const FiniteFiltration& f, const AlgebraElement& p) {
  const AlgebraPtr& a = f.algebra();
  if (!same_algebra(p.owner(), a)) throw StructuralError("projection from another algebra");
  AlgebraElement d1 = p - p.adjoint(), d2 = p * p - p;
  bool exact_ok = p.is_exact() && d1.is_zero() && d2.is_zero();
  if (!exact_ok && (op_norm(d1) > 1e-12 || op_norm(d2) > 1e-12)) throw PreconditionError("p is not a projection");
  Scalar rp = state(p);
  if (rp.is_zero() || rp.real_double() <= 0.0) throw PreconditionError("projection has zero weight");

  // Isometries onto the range of p in each block; coordinate selections when p
  // is an exact diagonal 0/1 matrix.
  std::vector<CMatrix> iso;
  std::vector<int> kept;
  for (int b = 0; b < a->num_blocks(); ++b) {
    const CMatrix& pb = p.block(b);
    int nb = a->block_dim(b);
    CMatrix v;
    if (is_exact_diagonal(pb)) {
      std::vector<int> cols;
      for (int i = 0; i < nb; ++i)
        if (!pb(i, i).is_zero()) cols.push_back(i);
      v = CMatrix(nb, static_cast<int>(cols.size()));
      for (std::size_t c = 0; c < cols.size(); ++c) v(cols[c], static_cast<int>(c)) = Scalar(1);
    } else {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(pb.to_eigen());
      std::vector<int> cols;
      for (int i = 0; i < nb; ++i)
        if (es.eigenvalues()(i) > 0.5) cols.push_back(i);
      Eigen::MatrixXcd m(nb, static_cast<long>(cols.size()));
      for (std::size_t c = 0; c < cols.size(); ++c) m.col(static_cast<long>(c)) = es.eigenvectors().col(cols[c]);
      v = CMatrix::from_eigen(m);
    }
    iso.push_back(v);
    if (v.cols() > 0) kept.push_back(b);
  }
  std::vector<CMatrix> dens;
  Scalar inv = Scalar(1) / rp;
  for (int b : kept) dens.push_back(iso[b].adjoint() * a->density(b) * iso[b] * inv);
  AlgebraPtr c = MatrixBlockAlgebra::make(dens);
  auto compress = [&](const AlgebraElement& x) {
    std::vector<CMatrix> blocks;
    for (int b : kept) blocks.push_back(iso[b].adjoint() * x.block(b) * iso[b]);
    return c->element(blocks);
  };

  std::vector<std::vector<AlgebraElement>> spans(f.max_level() + 1);
  std::vector<double> predicted;
  double scale = std::sqrt(rp.real_double());
  for (int n = 0; n <= f.max_level(); ++n) {
    predicted.push_back(n == 0 ? 1.0 : rd_constant(f, n).c * scale);
    // pAp meets V_n in the kernel of e -> p e p - e over the basis of V_n.
    const auto& onb = f.onb(n);
    int dim = a->dimension();
    Eigen::MatrixXcd diff(dim, static_cast<long>(onb.size()));
    for (std::size_t i = 0; i < onb.size(); ++i) {
      auto cp = (p * onb[i] * p - onb[i]).coordinates();
      for (int r = 0; r < dim; ++r) diff(r, static_cast<long>(i)) = cp[r].to_complex();
    }
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(diff, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    for (long k = 0; k < static_cast<long>(onb.size()); ++k) {
      double s = k < sv.size() ? sv(k) : 0.0;
      if (s > 1e-10) continue;
      AlgebraElement x = a->zero();
      for (std::size_t i = 0; i < onb.size(); ++i) x += onb[i] * Scalar(svd.matrixV()(static_cast<long>(i), k));
      spans[n].push_back(compress(x));
    }
  }
  return {FiniteFiltration(c, std::move(spans), "corner"), predicted, "corner"};
}

AlgebraPtr tensor_algebra(const AlgebraPtr& a, const AlgebraPtr& b) {
  std::vector<CMatrix> dens;
  for (int i = 0; i < a->num_blocks(); ++i)
    for (int j = 0; j < b->num_blocks(); ++j) dens.push_back(kron(a->density(i), b->density(j)));
  return MatrixBlockAlgebra::make(dens);
}

AlgebraElement tensor_element(const AlgebraPtr& ab, const AlgebraElement& x, const AlgebraElement& y) {
  std::vector<CMatrix> blocks;
  for (int i = 0; i < x.owner()->num_blocks(); ++i)
    for (int j = 0; j < y.owner()->num_blocks(); ++j) blocks.push_back(kron(x.block(i), y.block(j)));
  return ab->element(blocks);
}

DerivedFiltration tensor(const FiniteFiltration& f1, const FiniteFiltration& f2) {
  AlgebraPtr ab = tensor_algebra(f1.algebra(), f2.algebra());
  int top = std::min(f1.max_level(), f2.max_level());
  std::vector<std::vector<AlgebraElement>> spans(top + 1);
  std::vector<double> predicted{1.0};
  for (int n = 1; n <= top; ++n) {
    for (const auto& x : f1.onb(n))
      for (const auto& y : f2.onb(n)) spans[n].push_back(tensor_element(ab, x, y));
    predicted.push_back(rd_constant(f1, n).c * rd_constant(f2, n).c * std::sqrt(static_cast<double>(f1.dim(n))));
  }
  return {FiniteFiltration(ab, std::move(spans), "tensor"), predicted, "tensor"};
}

// ----------------------------------------------------------- Avitzour search

namespace {

// Phases z with sum L_i z_i = 0, or nothing when the polygon cannot close.
std::optional<std::vector<cd>> close_polygon(const std::vector<double>& lengths) {
  std::size_t k = lengths.size();
  double total = 0.0, biggest = 0.0;
  for (double l : lengths) {
    total += l;
    biggest = std::max(biggest, l);
  }
  std::vector<cd> z(k, cd(1.0, 0.0));
  if (total <= 0.0) return z;
  if (biggest > total - biggest + 1e-14) return std::nullopt;
  std::vector<std::size_t> order(k);
  for (std::size_t i = 0; i < k; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return lengths[a] > lengths[b]; });
  // Greedy chain: keep the remaining target inside the reachable annulus of the tail.
  cd target(0.0, 0.0);
  for (std::size_t s = 0; s < k; ++s) {
    double l = lengths[order[s]];
    double tail_sum = 0.0, tail_max = 0.0;
    for (std::size_t t = s + 1; t < k; ++t) {
      tail_sum += lengths[order[t]];
      tail_max = std::max(tail_max, lengths[order[t]]);
    }
    double lo = std::max(0.0, 2 * tail_max - tail_sum), hi = tail_sum;
    double r = std::abs(target);
    double dlo = std::max(lo, std::abs(r - l)), dhi = std::min(hi, r + l);
    double d = s + 1 == k ? 0.0 : 0.5 * (dlo + dhi);
    cd dir;
    if (l == 0.0) {
      dir = cd(1.0, 0.0);
    } else if (r < 1e-300) {
      dir = cd(1.0, 0.0);
    } else {
      double c = std::clamp((r * r + l * l - d * d) / (2 * l * r), -1.0, 1.0);
      dir = target / r * std::polar(1.0, std::acos(c));
    }
    z[order[s]] = dir;
    target -= l * dir;
  }
  return z;
}

struct SlotModel {
  std::vector<Eigen::MatrixXcd> basis;  // density eigenbasis per block
  std::vector<Eigen::VectorXd> eig;     // eigenvalues per block
  std::vector<bool> identity_basis;     // exact diagonal density
};

SlotModel slot_model(const AlgebraPtr& a) {
  SlotModel m;
  for (int b = 0; b < a->num_blocks(); ++b) {
    int n = a->block_dim(b);
    if (is_exact_diagonal(a->density(b))) {
      m.basis.push_back(Eigen::MatrixXcd::Identity(n, n));
      Eigen::VectorXd e(n);
      for (int i = 0; i < n; ++i) e(i) = a->density(b)(i, i).real_double();
      m.eig.push_back(e);
      m.identity_basis.push_back(true);
    } else {
      Eigen::VectorXd e;
      m.basis.push_back(density_eigenbasis(a, b, &e));
      m.eig.push_back(e);
      m.identity_basis.push_back(false);
    }
  }
  return m;
}

// Element with block b equal to E_b M_b E_b^*, exact when every basis is the
// identity and the entries are exactly representable.
AlgebraElement from_slots(const AlgebraPtr& a, const SlotModel& sm, const std::vector<Eigen::MatrixXcd>& mats,
                          bool exact_entries) {
  std::vector<CMatrix> blocks;
  for (int b = 0; b < a->num_blocks(); ++b) {
    if (exact_entries && sm.identity_basis[b]) {
      int n = a->block_dim(b);
      CMatrix c(n, n);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          cd v = mats[b](i, j);
          c(i, j) = Scalar::exact(mpq_class(static_cast<long>(std::lround(v.real()))),
                                  mpq_class(static_cast<long>(std::lround(v.imag()))));
        }
      blocks.push_back(c);
    } else {
      blocks.push_back(CMatrix::from_eigen(sm.basis[b] * mats[b] * sm.basis[b].adjoint()));
    }
  }
  return a->element(blocks);
}

Eigen::MatrixXcd cyclic(int n) {
  Eigen::MatrixXcd p = Eigen::MatrixXcd::Zero(n, n);
  for (int i = 0; i < n; ++i) p((i + 1) % n, i) = 1.0;
  return p;
}

bool integral(const std::vector<Eigen::MatrixXcd>& mats) {
  for (const auto& m : mats)
    for (long i = 0; i < m.size(); ++i) {
      cd v = m.data()[i];
      if (std::abs(v.real() - std::round(v.real())) > 1e-15 || std::abs(v.imag() - std::round(v.imag())) > 1e-15)
        return false;
    }
  return true;
}

// Diagonal phases on all eigen-slots with sum d_k z_k = 0; +-1 when the
// weights pair up exactly, roots of unity for a tracial single block.
std::optional<std::vector<Eigen::MatrixXcd>> zero_state_diagonal(const AlgebraPtr& a, const SlotModel& sm) {
  std::vector<double> lengths;
  std::vector<std::pair<int, int>> where;
  for (int b = 0; b < a->num_blocks(); ++b)
    for (int i = 0; i < a->block_dim(b); ++i) {
      lengths.push_back(sm.eig[b](i));
      where.emplace_back(b, i);
    }
  std::vector<cd> z(lengths.size(), cd(1.0, 0.0));
  bool done = false;
  if (a->num_blocks() == 1 && a->is_tracial() && a->block_dim(0) % 2 == 1 && a->block_dim(0) > 1) {
    int n = a->block_dim(0);
    for (int k = 0; k < n; ++k) z[k] = std::polar(1.0, 2 * std::numbers::pi * k / n);
    done = true;
  }
  if (!done) {
    // Exact pairing of equal weights.
    std::vector<std::size_t> idx(lengths.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::vector<Scalar> w;
    for (auto [b, i] : where) w.push_back(a->density(b)(i, i));
    bool exact = idx.size() % 2 == 0;
    for (int b = 0; b < a->num_blocks() && exact; ++b) exact = sm.identity_basis[b];
    if (exact) {
      std::sort(idx.begin(), idx.end(), [&](std::size_t x, std::size_t y) { return compare_real(w[x], w[y]) < 0; });
      for (std::size_t s = 0; s + 1 < idx.size() && exact; s += 2)
        if (!(w[idx[s]] == w[idx[s + 1]])) exact = false;
      if (exact) {
        for (std::size_t s = 0; s + 1 < idx.size(); s += 2) z[idx[s + 1]] = cd(-1.0, 0.0);
        done = true;
      }
    }
  }
  if (!done) {
    auto poly = close_polygon(lengths);
    if (!poly) return std::nullopt;
    z = *poly;
  }
  std::vector<Eigen::MatrixXcd> mats;
  for (int b = 0; b < a->num_blocks(); ++b) mats.push_back(Eigen::MatrixXcd::Zero(a->block_dim(b), a->block_dim(b)));
  for (std::size_t s = 0; s < where.size(); ++s) mats[where[s].first](where[s].second, where[s].second) = z[s];
  return mats;
}

std::optional<AvitzourTriple> structured_triple(const AlgebraPtr& a1, const AlgebraPtr& a2) {
  SlotModel s1 = slot_model(a1), s2 = slot_model(a2);
  // u: cyclic permutations in blocks of size >= 2, phases on the 1x1 blocks.
  std::vector<Eigen::MatrixXcd> um;
  std::vector<double> circles;
  std::vector<int> circle_blocks;
  for (int b = 0; b < a1->num_blocks(); ++b) {
    int n = a1->block_dim(b);
    um.push_back(n >= 2 ? cyclic(n) : Eigen::MatrixXcd::Identity(1, 1));
    if (n == 1) {
      circles.push_back(s1.eig[b](0));
      circle_blocks.push_back(b);
    }
  }
  std::optional<std::vector<Eigen::MatrixXcd>> umats;
  if (auto poly = close_polygon(circles)) {
    for (std::size_t c = 0; c < circles.size(); ++c) um[circle_blocks[c]](0, 0) = (*poly)[c];
    umats = um;
  } else {
    umats = zero_state_diagonal(a1, s1);
  }
  if (!umats) return std::nullopt;
  // v diagonal in the eigenbasis (centralizer), w cyclic (zero diagonal).
  for (int b = 0; b < a2->num_blocks(); ++b)
    if (a2->block_dim(b) < 2) return std::nullopt;
  auto vmats = zero_state_diagonal(a2, s2);
  if (!vmats) return std::nullopt;
  std::vector<Eigen::MatrixXcd> wm;
  for (int b = 0; b < a2->num_blocks(); ++b) wm.push_back(cyclic(a2->block_dim(b)));
  AvitzourTriple t;
  t.u = from_slots(a1, s1, *umats, integral(*umats));
  t.v = from_slots(a2, s2, *vmats, integral(*vmats));
  t.w = from_slots(a2, s2, wm, true);
  return t;
}

Eigen::MatrixXcd haar_unitary(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Eigen::MatrixXcd z(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) z(i, j) = cd(g(rng), g(rng));
  Eigen::HouseholderQR<Eigen::MatrixXcd> qr(z);
  Eigen::MatrixXcd q = qr.householderQ();
  Eigen::MatrixXcd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int i = 0; i < n; ++i) {
    cd d = r(i, i);
    if (std::abs(d) > 0) q.col(i) *= d / std::abs(d);
  }
  return q;
}

// exp(i H) for the Hermitian H whose free real parameters start at p; entries
// (i, j) with mask(i, j) false stay zero.
Eigen::MatrixXcd exp_i_hermitian(const Eigen::VectorXd& p, int& at, int n, const std::vector<std::vector<bool>>& mask) {
  Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(n, n);
  for (int i = 0; i < n; ++i) h(i, i) = p(at++);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      if (!mask[i][j]) continue;
      h(i, j) = cd(p(at), p(at + 1));
      h(j, i) = std::conj(h(i, j));
      at += 2;
    }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h);
  Eigen::VectorXcd ph(n);
  for (int i = 0; i < n; ++i) ph(i) = std::polar(1.0, es.eigenvalues()(i));
  return es.eigenvectors() * ph.asDiagonal() * es.eigenvectors().adjoint();
}

int hermitian_params(int n, const std::vector<std::vector<bool>>& mask) {
  int k = n;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) k += mask[i][j] ? 2 : 0;
  return k;
}

// One random start for (v, w) in the density eigenbasis: v = exp(i K) with K
// commuting with the density (centralizer), w = exp(i H) arbitrary, then damped
// Gauss-Newton on the three moment equations.
std::optional<std::pair<AlgebraElement, AlgebraElement>> random_vw(const AlgebraPtr& a, const SlotModel& sm,
                                                                   std::mt19937_64& rng) {
  int nb = a->num_blocks();
  std::vector<std::vector<std::vector<bool>>> vmask, wmask;
  int nv = 0, np = 0;
  for (int b = 0; b < nb; ++b) {
    int n = a->block_dim(b);
    std::vector<std::vector<bool>> vm(n, std::vector<bool>(n, false)), wm(n, std::vector<bool>(n, true));
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) vm[i][j] = std::abs(sm.eig[b](i) - sm.eig[b](j)) <= 1e-12;
    nv += hermitian_params(n, vm);
    np += hermitian_params(n, wm);
    vmask.push_back(vm);
    wmask.push_back(wm);
  }
  int total = nv + np;
  auto build = [&](const Eigen::VectorXd& th, std::vector<Eigen::MatrixXcd>& vs, std::vector<Eigen::MatrixXcd>& ws) {
    vs.clear();
    ws.clear();
    int at = 0;
    for (int b = 0; b < nb; ++b) vs.push_back(exp_i_hermitian(th, at, a->block_dim(b), vmask[b]));
    for (int b = 0; b < nb; ++b) ws.push_back(exp_i_hermitian(th, at, a->block_dim(b), wmask[b]));
  };
  auto residual = [&](const Eigen::VectorXd& th) {
    std::vector<Eigen::MatrixXcd> vs, ws;
    build(th, vs, ws);
    cd tv = 0, tw = 0, tvw = 0;
    for (int b = 0; b < nb; ++b) {
      Eigen::MatrixXcd d = sm.eig[b].cast<cd>().asDiagonal();
      tv += (d * vs[b]).trace();
      tw += (d * ws[b]).trace();
      tvw += (d * vs[b].adjoint() * ws[b]).trace();
    }
    Eigen::VectorXd r(6);
    r << tv.real(), tv.imag(), tw.real(), tw.imag(), tvw.real(), tvw.imag();
    return r;
  };

  std::normal_distribution<double> g(0.0, 2.0);
  Eigen::VectorXd theta(total);
  for (int i = 0; i < total; ++i) theta(i) = g(rng);
  double lambda = 1e-3;
  Eigen::VectorXd r = residual(theta);
  for (int it = 0; it < 200 && r.norm() > 1e-15; ++it) {
    Eigen::MatrixXd j(6, total);
    for (int i = 0; i < total; ++i) {
      Eigen::VectorXd t2 = theta;
      t2(i) += 1e-7;
      j.col(i) = (residual(t2) - r) / 1e-7;
    }
    Eigen::MatrixXd h = j.transpose() * j + lambda * Eigen::MatrixXd::Identity(total, total);
    Eigen::VectorXd step = h.ldlt().solve(-j.transpose() * r);
    Eigen::VectorXd cand = theta + step;
    Eigen::VectorXd rc = residual(cand);
    if (rc.norm() < r.norm()) {
      theta = cand;
      r = rc;
      lambda = std::max(1e-12, lambda * 0.3);
    } else {
      lambda *= 10;
      if (lambda > 1e8) break;
    }
  }
  if (r.norm() > 1e-13) return std::nullopt;
  std::vector<Eigen::MatrixXcd> vs, ws;
  build(theta, vs, ws);
  return std::make_pair(from_slots(a, sm, vs, false), from_slots(a, sm, ws, false));
}

std::optional<AlgebraElement> random_u(const AlgebraPtr& a, const SlotModel& sm, std::mt19937_64& rng) {
  std::vector<Eigen::MatrixXcd> q;
  std::vector<double> lengths;
  for (int b = 0; b < a->num_blocks(); ++b) {
    q.push_back(haar_unitary(a->block_dim(b), rng));
    Eigen::MatrixXcd d = q.back().adjoint() * sm.eig[b].cast<cd>().asDiagonal() * q.back();
    for (int i = 0; i < a->block_dim(b); ++i) lengths.push_back(d(i, i).real());
  }
  auto poly = close_polygon(lengths);
  if (!poly) return std::nullopt;
  std::vector<Eigen::MatrixXcd> um;
  int s = 0;
  for (int b = 0; b < a->num_blocks(); ++b) {
    int n = a->block_dim(b);
    Eigen::VectorXcd z(n);
    for (int i = 0; i < n; ++i) z(i) = (*poly)[s++];
    um.push_back(q[b] * z.asDiagonal() * q[b].adjoint());
  }
  return from_slots(a, sm, um, false);
}

bool verified(const AvitzourTriple& t) {
  try {
    check_avitzour(t, 1e-10);
    return true;
  } catch (const AvitzourConditionError&) {
    return false;
  }
}

}  // namespace

AvitzourSearch find_avitzour_triple(const AlgebraPtr& a1, const AlgebraPtr& a2, std::uint64_t seed, int trials) {
  AvitzourSearch out;
  out.seed = seed;
  if (auto t = structured_triple(a1, a2); t && verified(*t)) {
    out.triple = t;
    out.method = "structured";
    return out;
  }
  out.method = "none";
  // A unitary of state zero needs at least two dimensions.
  if (a1->dimension() < 2 || a2->dimension() < 2) return out;
  std::mt19937_64 rng(seed);
  SlotModel s1 = slot_model(a1), s2 = slot_model(a2);
  std::optional<AlgebraElement> u;
  for (int i = 0; i < trials && !u; ++i) {
    ++out.trials;
    u = random_u(a1, s1, rng);
  }
  if (!u) return out;
  for (int i = 0; i < trials; ++i) {
    ++out.trials;
    auto vw = random_vw(a2, s2, rng);
    if (!vw) continue;
    AvitzourTriple t{*u, vw->first, vw->second};
    if (verified(t)) {
      out.triple = t;
      out.method = "random";
      return out;
    }
  }
  return out;
}

// ------------------------------------------------------------- orthogonality and containment data

Thm64Report thm64_check(const std::vector<AlgebraElement>& v_span, const AlgebraElement& u,
                        const std::vector<AlgebraElement>& f_span) {
  const AlgebraPtr& a = u.owner();
  for (const auto& x : v_span)
    if (!same_algebra(x.owner(), a)) throw StructuralError("V spanning element from another algebra");
  for (const auto& x : f_span)
    if (!same_algebra(x.owner(), a)) throw StructuralError("F spanning element from another algebra");
  if (!is_unitary(u, 1e-10)) throw PreconditionError("u is not unitary");
  Thm64Report rep;
  std::vector<AlgebraElement> ev = orthonormalize(v_span);
  std::vector<AlgebraElement> ef = orthonormalize(f_span);
  rep.dim_v = static_cast<int>(ev.size());
  rep.dim_f = static_cast<int>(ef.size());

  Eigen::MatrixXcd m1(rep.dim_v, rep.dim_v), m2(rep.dim_v, rep.dim_f);
  for (int i = 0; i < rep.dim_v; ++i) {
    AlgebraElement left = ev[i] * u;
    for (int j = 0; j < rep.dim_v; ++j) m1(i, j) = state(left * ev[j] * u).to_complex();
    for (int j = 0; j < rep.dim_f; ++j) m2(i, j) = state(left * ef[j]).to_complex();
  }
  rep.sup_uau = largest_singular(m1);
  rep.sup_ua = largest_singular(m2);
  rep.inflated_rd = dn_norm(ef);
  rep.f_has_one = l2_norm(project_out(a->one(), ef)) <= 1e-10;
  for (const auto& e : ef)
    if (l2_norm(project_out(e.adjoint(), ef)) > 1e-10) rep.f_star_stable = false;

  std::vector<AlgebraElement> with_one{a->one()};
  with_one.insert(with_one.end(), v_span.begin(), v_span.end());
  std::vector<AlgebraElement> centered = orthonormalize(with_one);
  centered.erase(centered.begin());
  auto containment = [&](bool conj, double& l2, double& op) {
    std::vector<AlgebraElement> res;
    for (const auto& y : centered) res.push_back(project_out(conj ? u.adjoint() * y * u : y, ef));
    long k = static_cast<long>(res.size());
    Eigen::MatrixXcd g(k, k);
    for (long i = 0; i < k; ++i)
      for (long j = 0; j < k; ++j) g(i, j) = l2_inner(res[j], res[i]).to_complex();
    l2 = 0.0;
    op = 0.0;
    if (k > 0) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(g, Eigen::EigenvaluesOnly);
      l2 = std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
    }
    for (const auto& r : res) op = std::max(op, op_norm(r));
  };
  containment(false, rep.containment_l2, rep.containment_op);
  containment(true, rep.conj_containment_l2, rep.conj_containment_op);
  return rep;
}

// --------------------------------------------------- abelian classification

AbelianVerdict classify_abelian(const std::vector<Scalar>& a, const std::vector<Scalar>& b) {
  auto validate = [](const std::vector<Scalar>& w, const char* name) {
    if (w.empty()) throw PreconditionError(std::string("weights of ") + name + " are empty");
    Scalar sum(0);
    for (const auto& x : w) {
      if (!x.is_real() || compare_real(x, Scalar(0)) <= 0)
        throw PreconditionError(std::string("weights of ") + name + " must be positive");
      sum += x;
    }
    bool unit = sum.is_exact() ? sum == Scalar(1) : std::abs(sum.real_double() - 1.0) <= 1e-12;
    if (!unit) throw PreconditionError(std::string("weights of ") + name + " sum to " + sum.str() + ", not 1");
  };
  validate(a, "A");
  validate(b, "B");
  auto biggest = [](const std::vector<Scalar>& w) {
    Scalar m = w[0];
    for (const auto& x : w)
      if (compare_real(x, m) > 0) m = x;
    return m;
  };
  AbelianVerdict v;
  std::size_t dims = a.size() + b.size();
  if (dims < 5) {
    std::ostringstream os;
    os << "dim(A) + dim(B) = " << a.size() << " + " << b.size() << " = " << dims << " < 5";
    v.reasons.push_back(os.str());
  }
  Scalar ma = biggest(a), mb = biggest(b);
  Scalar s = ma + mb;
  if (compare_real(s, Scalar(1)) >= 0) {
    std::ostringstream os;
    os << "minimal projections of weights " << ma.str() << " and " << mb.str() << " have tau_A(p) + tau_B(q) = "
       << s.str() << " >= 1";
    v.reasons.push_back(os.str());
  }
  v.selfless = v.reasons.empty();
  return v;
}

}  // namespace freedecay
