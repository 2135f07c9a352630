#include "freedecay/fock.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <unordered_map>

#include <Eigen/Eigenvalues>

#include "freedecay/errors.hpp"

namespace freedecay {

double FockIndex::count(const std::vector<int>& dims, int depth) {
  const std::size_t m = dims.size();
  std::vector<double> lead(m, 0.0);
  double total = 1.0;
  for (int l = 1; l <= depth; ++l) {
    std::vector<double> next(m);
    double prev_sum = 0;
    for (double c : lead) prev_sum += c;
    for (std::size_t j = 0; j < m; ++j) next[j] = dims[j] * (l == 1 ? 1.0 : prev_sum - lead[j]);
    lead = next;
    for (double c : lead) total += c;
  }
  return total;
}

FockIndex::FockIndex(std::vector<int> centered_dims, int depth, long cap)
    : m_(static_cast<int>(centered_dims.size())), dims_(std::move(centered_dims)), depth_(depth) {
  if (depth < 0) throw PreconditionError("Fock space depth must be nonnegative");
  if (depth > 120) throw ResourceError("Fock space depth above 120");
  double n = count(dims_, depth);
  if (n > static_cast<double>(cap))
    throw ResourceError("Fock space dimension " + std::to_string(static_cast<long long>(n)) + " exceeds cap " +
                        std::to_string(cap));
  const auto total = static_cast<std::size_t>(n);
  length_.reserve(total);
  lead_factor_.reserve(total);
  lead_index_.reserve(total);
  tail_.reserve(total);
  child_.assign(total * static_cast<std::size_t>(m_), -1);
  length_.push_back(0);
  lead_factor_.push_back(-1);
  lead_index_.push_back(-1);
  tail_.push_back(-1);
  layer_end_.push_back(1);
  long begin = 0;
  for (int l = 0; l < depth; ++l) {
    long end = size();
    for (long t = begin; t < end; ++t) {
      for (int j = 0; j < m_; ++j) {
        if (j == lead_factor_[t] || dims_[j] == 0) continue;
        child_[static_cast<std::size_t>(t) * m_ + j] = static_cast<std::int32_t>(size());
        for (int k = 0; k < dims_[j]; ++k) {
          length_.push_back(static_cast<std::int8_t>(l + 1));
          lead_factor_.push_back(static_cast<std::int8_t>(j));
          lead_index_.push_back(k);
          tail_.push_back(static_cast<std::int32_t>(t));
        }
      }
    }
    begin = end;
    layer_end_.push_back(size());
  }
}

std::vector<std::pair<int, int>> FockIndex::slots(long t) const {
  std::vector<std::pair<int, int>> s;
  while (t > 0) {
    s.emplace_back(lead_factor_[t], lead_index_[t]);
    t = tail_[t];
  }
  return s;
}

long FockIndex::find(const std::vector<std::pair<int, int>>& slots) const {
  long t = 0;
  for (auto it = slots.rbegin(); it != slots.rend(); ++it) {
    if (it->first < 0 || it->first >= m_ || it->second < 0 || it->second >= dims_[it->first]) return -1;
    if (lead_factor_[t] == it->first) return -1;
    t = prepend(it->first, it->second, t);
    if (t < 0) return -1;
  }
  return t;
}

TruncatedFock::TruncatedFock(AmbientPtr ambient, int depth, long cap)
    : ambient_(std::move(ambient)), depth_(depth), cap_(cap) {
  std::vector<int> dims;
  for (const auto& a : ambient_->factors()) {
    bases_.push_back(orthogonal_complement(a));
    dims.push_back(static_cast<int>(bases_.back().vectors.size()));
  }
  index_ = std::make_shared<const FockIndex>(dims, depth, cap);
}

AlgebraElement TruncatedFock::onb_vector(int j, int k) const {
  const auto& b = bases_.at(j);
  Scalar n = b.norms2.at(k).sqrt_real();
  return b.vectors[k] * (Scalar(1) / n);
}

std::shared_ptr<const FockIndex> TruncatedFock::index_at(int depth) const {
  if (depth == depth_) return index_;
  std::vector<int> dims;
  for (const auto& b : bases_) dims.push_back(static_cast<int>(b.vectors.size()));
  return std::make_shared<const FockIndex>(dims, depth, 10 * cap_);
}

TruncatedFock build_fock(const AmbientPtr& ambient, int depth, long cap) {
  return TruncatedFock(ambient, depth, cap);
}

namespace {

using cd = std::complex<double>;

bool negligible(const Scalar& s) { return s.is_zero(); }
bool negligible(const cd& z) { return z == cd(0.0, 0.0); }

// Left multiplication by a letter on {1, f_1, .., f_d} of one factor.
template <class T>
struct LetterOp {
  int factor = 0;
  int n = 0;  // d + 1
  std::vector<T> m;  // column-major: m[k * n + l] = coefficient of f_l in a f_k
  const T& at(int l, int k) const { return m[static_cast<std::size_t>(k) * n + l]; }
};

LetterOp<Scalar> exact_op(const TruncatedFock& f, const Letter& a) {
  const OrthogonalBasis& b = f.factor_basis(a.factor);
  const int d = static_cast<int>(b.vectors.size());
  LetterOp<Scalar> op;
  op.factor = a.factor;
  op.n = d + 1;
  op.m.resize(static_cast<std::size_t>(op.n) * op.n);
  std::vector<AlgebraElement> fs{f.ambient()->factor(a.factor)->one()};
  std::vector<Scalar> n2{Scalar(1)};
  for (int k = 0; k < d; ++k) {
    fs.push_back(b.vectors[k]);
    n2.push_back(b.norms2[k]);
  }
  for (int k = 0; k <= d; ++k) {
    AlgebraElement af = a.elem * fs[k];
    for (int l = 0; l <= d; ++l) op.m[static_cast<std::size_t>(k) * op.n + l] = l2_inner(af, fs[l]) / n2[l];
  }
  return op;
}

LetterOp<cd> double_op(const TruncatedFock& f, const Letter& a) {
  LetterOp<Scalar> e = exact_op(f, a);
  const OrthogonalBasis& b = f.factor_basis(a.factor);
  std::vector<double> nrm{1.0};
  for (const auto& s : b.norms2) nrm.push_back(std::sqrt(s.real_double()));
  LetterOp<cd> op;
  op.factor = e.factor;
  op.n = e.n;
  op.m.resize(e.m.size());
  for (int k = 0; k < e.n; ++k)
    for (int l = 0; l < e.n; ++l) op.m[static_cast<std::size_t>(k) * e.n + l] = e.at(l, k).to_complex() * nrm[l] / nrm[k];
  return op;
}

template <class T>
using SparseVec = std::vector<std::pair<long, T>>;

template <class T>
void merge(SparseVec<T>& v) {
  std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  std::size_t w = 0;
  for (std::size_t r = 0; r < v.size();) {
    long key = v[r].first;
    T acc = v[r].second;
    for (++r; r < v.size() && v[r].first == key; ++r) acc += v[r].second;
    if (!negligible(acc)) v[w++] = {key, acc};
  }
  v.resize(w);
}

// lambda(a) applied to a sparse vector; tensors past the index depth vanish.
template <class T>
SparseVec<T> apply_letter(const FockIndex& idx, const LetterOp<T>& op, const SparseVec<T>& in) {
  SparseVec<T> out;
  out.reserve(in.size() * op.n);
  const int j = op.factor;
  for (const auto& [t, c] : in) {
    int k;
    long base;
    if (idx.lead_factor(t) == j) {
      k = idx.lead_index(t) + 1;
      base = idx.tail(t);
    } else {
      k = 0;
      base = t;
    }
    const T& c0 = op.at(0, k);
    if (!negligible(c0)) out.emplace_back(base, c0 * c);
    for (int l = 1; l < op.n; ++l) {
      const T& cl = op.at(l, k);
      if (negligible(cl)) continue;
      long p = idx.prepend(j, l - 1, base);
      if (p >= 0) out.emplace_back(p, cl * c);
    }
  }
  merge(out);
  return out;
}

template <class T>
struct WordOps {
  std::vector<std::vector<const LetterOp<T>*>> words;
  std::vector<T> coeffs;
  std::unordered_map<std::string, LetterOp<T>> cache;
};

template <class T, class Make>
void prepare(WordOps<T>& ops, const FreeElement& x, Make make, T (*convert)(const Scalar&)) {
  for (const auto& [k, t] : x.terms()) {
    std::vector<const LetterOp<T>*> w;
    for (const auto& l : t.word) {
      std::string key = l.key();
      auto it = ops.cache.find(key);
      if (it == ops.cache.end()) it = ops.cache.emplace(key, make(l)).first;
      w.push_back(&it->second);
    }
    ops.words.push_back(std::move(w));
    ops.coeffs.push_back(convert(t.coeff));
  }
}

cd to_cd(const Scalar& s) { return s.to_complex(); }
Scalar to_scalar(const Scalar& s) { return s; }

// lambda(x) on a sparse vector, words applied right to left.
template <class T>
SparseVec<T> apply_element(const FockIndex& idx, const WordOps<T>& ops, const SparseVec<T>& in) {
  SparseVec<T> out;
  for (std::size_t w = 0; w < ops.words.size(); ++w) {
    SparseVec<T> v = in;
    const auto& word = ops.words[w];
    for (auto it = word.rbegin(); it != word.rend() && !v.empty(); ++it) v = apply_letter(idx, **it, v);
    for (auto& [t, c] : v) out.emplace_back(t, ops.coeffs[w] * c);
  }
  merge(out);
  return out;
}

void check_fock_ambient(const TruncatedFock& f, const FreeElement& x) {
  if (!same_ambient(f.ambient(), x.ambient())) throw StructuralError("Fock space: factor mismatch");
}

}  // namespace

SparseMatrixXcd represent(const TruncatedFock& f, const FreeElement& x) {
  check_fock_ambient(f, x);
  auto idx = f.index_at(f.depth() + x.max_length());
  WordOps<cd> ops;
  prepare(ops, x, [&](const Letter& l) { return double_op(f, l); }, &to_cd);
  const long n = f.dimension();
  std::vector<Eigen::Triplet<cd>> trips;
  for (long col = 0; col < n; ++col) {
    SparseVec<cd> v = apply_element(*idx, ops, SparseVec<cd>{{col, cd(1.0, 0.0)}});
    for (const auto& [row, c] : v)
      if (row < n) trips.emplace_back(static_cast<int>(row), static_cast<int>(col), c);
  }
  SparseMatrixXcd m(n, n);
  m.setFromTriplets(trips.begin(), trips.end());
  return m;
}

Eigen::MatrixXcd represent_dense(const TruncatedFock& f, const FreeElement& x) {
  if (f.dimension() > 4000) throw ResourceError("represent_dense: dimension above 4000");
  return Eigen::MatrixXcd(represent(f, x));
}

FockVector apply_to_vacuum(const TruncatedFock& f, const FreeElement& x) {
  check_fock_ambient(f, x);
  WordOps<Scalar> ops;
  prepare(ops, x, [&](const Letter& l) { return exact_op(f, l); }, &to_scalar);
  SparseVec<Scalar> v = apply_element(f.index(), ops, SparseVec<Scalar>{{0, Scalar(1)}});
  FockVector out;
  for (auto& [t, c] : v) out.coeffs.emplace(t, c);
  return out;
}

Scalar basis_norm2(const TruncatedFock& f, long t) {
  Scalar n(1);
  const FockIndex& idx = f.index();
  while (t > 0) {
    n *= f.factor_basis(idx.lead_factor(t)).norms2[idx.lead_index(t)];
    t = idx.tail(t);
  }
  return n;
}

Scalar fock_inner(const TruncatedFock& f, const FockVector& a, const FockVector& b) {
  Scalar s(0);
  for (const auto& [t, c] : a.coeffs) {
    auto it = b.coeffs.find(t);
    if (it != b.coeffs.end()) s += c * it->second.conj() * basis_norm2(f, t);
  }
  return s;
}

Scalar vacuum_expectation(const TruncatedFock& f, const FreeElement& x) {
  FockVector v = apply_to_vacuum(f, x);
  auto it = v.coeffs.find(0);
  if (it == v.coeffs.end()) return x.is_exact() ? Scalar(0) : Scalar::floating(0);
  return it->second;
}

double spectral_norm_sparse(const SparseMatrixXcd& x) {
  const long n = x.cols();
  if (n == 0 || x.rows() == 0 || x.nonZeros() == 0) return 0.0;
  if (std::min(x.rows(), x.cols()) <= 600) {
    Eigen::MatrixXcd d(x);
    Eigen::MatrixXcd g = x.rows() >= x.cols() ? Eigen::MatrixXcd(d.adjoint() * d) : Eigen::MatrixXcd(d * d.adjoint());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(g, Eigen::EigenvaluesOnly);
    return std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
  }
  // Lanczos on x* x.
  const int steps = static_cast<int>(std::min<long>(n, 250));
  std::mt19937_64 rng(0x5eedULL);
  std::normal_distribution<double> g;
  Eigen::VectorXcd q(n);
  for (long i = 0; i < n; ++i) q[i] = cd(g(rng), g(rng));
  q.normalize();
  std::vector<Eigen::VectorXcd> basis{q};
  std::vector<double> alpha, beta;
  double best = 0.0, prev = -1.0;
  for (int k = 0; k < steps; ++k) {
    Eigen::VectorXcd w = x.adjoint() * (x * basis.back());
    double a = basis.back().dot(w).real();
    alpha.push_back(a);
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& b : basis) w -= b * b.dot(w);
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(k + 1, k + 1);
    for (int i = 0; i <= k; ++i) {
      t(i, i) = alpha[i];
      if (i < k) t(i, i + 1) = t(i + 1, i) = beta[i];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t, Eigen::EigenvaluesOnly);
    best = std::max(best, es.eigenvalues().maxCoeff());
    double bnorm = w.norm();
    if (bnorm < 1e-12 * std::max(1.0, best)) break;
    if (k > 10 && std::abs(best - prev) <= 1e-14 * best) break;
    prev = best;
    beta.push_back(bnorm);
    basis.push_back(w / bnorm);
  }
  return std::sqrt(std::max(0.0, best));
}

int default_depth(const FreeElement& x) { return std::max(4, 2 * x.max_length()); }

double norm_lower_bound(const TruncatedFock& f, const FreeElement& x) {
  if (x.is_zero()) return 0.0;
  return spectral_norm_sparse(represent(f, x));
}

double norm_lower_bound(const FreeElement& x, long cap) {
  return norm_lower_bound(build_fock(x.ambient(), default_depth(x), cap), x);
}

std::vector<Scalar> moments_to_free_cumulants(const std::vector<Scalar>& m) {
  // m_n = sum_{s=1}^{n} k_s [z^{n-s}] M(z)^s with M(z) = sum m_i z^i.
  const int n = static_cast<int>(m.size()) - 1;
  std::vector<Scalar> k(m.size(), Scalar(0));
  for (int deg = 1; deg <= n; ++deg) {
    Scalar rest(0);
    std::vector<Scalar> power(deg, Scalar(0));  // M^s truncated below degree deg
    power[0] = Scalar(1);
    for (int s = 1; s < deg; ++s) {
      std::vector<Scalar> next(deg, Scalar(0));
      for (int i = 0; i < deg; ++i) {
        if (power[i].is_zero()) continue;
        for (int j = 0; i + j < deg; ++j) next[i + j] += power[i] * m[j];
      }
      power = next;
      rest += k[s] * power[deg - s];
    }
    k[deg] = m[deg] - rest;
  }
  return k;
}

std::vector<Scalar> free_cumulants_to_moments(const std::vector<Scalar>& k) {
  const int n = static_cast<int>(k.size()) - 1;
  std::vector<Scalar> m(k.size(), Scalar(0));
  m[0] = Scalar(1);
  for (int deg = 1; deg <= n; ++deg) {
    Scalar total(0);
    std::vector<Scalar> power(deg, Scalar(0));
    power[0] = Scalar(1);
    for (int s = 1; s <= deg; ++s) {
      std::vector<Scalar> next(deg, Scalar(0));
      for (int i = 0; i < deg; ++i) {
        if (power[i].is_zero()) continue;
        for (int j = 0; i + j < deg; ++j) next[i + j] += power[i] * m[j];
      }
      power = next;
      total += k[s] * power[deg - s];
    }
    m[deg] = total;
  }
  return m;
}

std::vector<Scalar> free_sum_moments(const std::vector<std::vector<Scalar>>& factor_moments, const Scalar& c) {
  if (factor_moments.empty()) throw PreconditionError("free_sum_moments: no factors");
  const std::size_t n = factor_moments.front().size();
  std::vector<Scalar> k(n, Scalar(0));
  for (const auto& fm : factor_moments) {
    if (fm.size() != n) throw PreconditionError("free_sum_moments: moment lists differ in length");
    std::vector<Scalar> kj = moments_to_free_cumulants(fm);
    for (std::size_t i = 1; i < n; ++i) k[i] += kj[i];
  }
  if (n > 1) k[1] += c;
  return free_cumulants_to_moments(k);
}

namespace {

bool self_adjoint(const FreeElement& x) {
  FreeElement d = x - adjoint(x);
  Scalar n2 = l2_inner_free(d, d);
  if (n2.is_exact()) return n2.is_zero();
  double scale = l2_inner_free(x, x).abs();
  return n2.abs() <= 1e-24 * std::max(1.0, scale);
}

// c + sum_j b_j with b_j in factor j, when x has that form.
bool letter_sum(const FreeElement& x, Scalar& c, std::vector<AlgebraElement>& b) {
  const auto& amb = x.ambient();
  b.clear();
  for (int j = 0; j < amb->size(); ++j) b.push_back(amb->factor(j)->zero());
  c = Scalar(0);
  for (const auto& [k, t] : x.terms()) {
    if (t.word.size() > 1) return false;
    if (t.word.empty())
      c += t.coeff;
    else
      b[t.word[0].factor] += t.coeff * t.word[0].elem;
  }
  return true;
}

void finish(MomentEstimate& est) {
  est.max = 0;
  est.s.clear();
  est.ratio.clear();
  double prev = 1.0;
  for (std::size_t r = 1; r <= est.moments.size(); ++r) {
    double m = std::max(0.0, est.moments[r - 1]);
    double s = std::pow(m, 1.0 / (2.0 * r));
    est.s.push_back(s);
    est.max = std::max(est.max, s);
    est.ratio.push_back(prev > 0 ? std::sqrt(m / prev) : 0.0);
    prev = m;
  }
}

}  // namespace

MomentEstimate moment_norm_estimate(const FreeElement& x, int r_max, long cap) {
  if (r_max < 1) throw PreconditionError("moment_norm_estimate: r_max must be at least 1");
  MomentEstimate est;
  FreeElement nx = normalize(x);
  if (nx.is_zero()) {
    est.moments.assign(r_max, 0.0);
    est.engine = "symbolic";
    finish(est);
    return est;
  }
  Scalar c;
  std::vector<AlgebraElement> b;
  if (letter_sum(nx, c, b) && self_adjoint(nx)) {
    std::vector<std::vector<Scalar>> fm;
    for (const auto& bj : b) {
      std::vector<Scalar> m{Scalar(1)};
      AlgebraElement p = bj.owner()->one();
      for (int i = 1; i <= 2 * r_max; ++i) {
        p = p * bj;
        m.push_back(state(p));
      }
      fm.push_back(std::move(m));
    }
    std::vector<Scalar> m = free_sum_moments(fm, c);
    for (int r = 1; r <= r_max; ++r) est.moments.push_back(m[2 * r].real_double());
    est.engine = "cumulant";
    finish(est);
    return est;
  }
  const int len = nx.max_length();
  std::vector<int> dims;
  for (const auto& a : nx.ambient()->factors()) dims.push_back(a->dimension() - 1);
  if (FockIndex::count(dims, r_max * len) <= static_cast<double>(cap)) {
    TruncatedFock f(nx.ambient(), 0, cap);
    FockIndex idx(dims, r_max * len, cap);
    WordOps<cd> ops_x, ops_xs;
    prepare(ops_x, nx, [&](const Letter& l) { return double_op(f, l); }, &to_cd);
    prepare(ops_xs, adjoint(nx), [&](const Letter& l) { return double_op(f, l); }, &to_cd);
    // Tensors longer than r_max * len can no longer return to Omega.
    SparseVec<cd> v{{0, cd(1.0, 0.0)}};
    for (int r = 1; r <= r_max; ++r) {
      v = apply_element(idx, ops_x, v);
      v = apply_element(idx, ops_xs, v);
      double m0 = 0;
      for (const auto& [t, cval] : v)
        if (t == 0) m0 = cval.real();
      est.moments.push_back(m0);
    }
    est.engine = "fock";
    finish(est);
    return est;
  }
  FreeElement y = multiply(adjoint(nx), nx);
  FreeElement p = y;
  for (int r = 1; r <= r_max; ++r) {
    if (r > 1) p = multiply(p, y);
    est.moments.push_back(free_state(p).real_double());
  }
  est.engine = "symbolic";
  finish(est);
  return est;
}

}  // namespace freedecay
