#include "freedecay/cli.hpp"

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <sstream>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "freedecay/errors.hpp"
#include "freedecay/fock.hpp"
#include "freedecay/khintchine.hpp"
#include "freedecay/measure.hpp"
#include "freedecay/rdcert.hpp"

namespace freedecay::cli {

using nlohmann::json;

namespace {

/// Options of every subcommand; each subcommand binds the ones it uses.
struct Options {
  std::string command;
  std::string builtin, space, filtration, input, factors, a, b, dims, out;
  int max_n = 10;
  int depth = -1;
  int r_max = -1;
  int trials = -1;
  int length = 1;
  int words = 20;
  int max_length = 4;
  int threads = 1;
  long cap = -1;
  std::uint64_t seed = 0;
  bool json_out = false;
  bool exact = false;
};

struct Result {
  std::string text;
  int code = kExitOk;
  std::string witness;
};

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

const char* const kUsage =
    "usage: freedecay <subcommand> [options]\n"
    "\n"
    "subcommands:\n"
    "  rd-certify        RD constants of a filtration (--builtin <measure> | --space <json>)\n"
    "  free-moments      moments free_state((x*x)^r) of a free-product element (--input <json>)\n"
    "  norm-estimate     lower bounds for the reduced norm (--input <json>)\n"
    "  kh-norm           Khintchine bracket against norm lower bounds on random elements\n"
    "  avitzour-check    trace, isometry and shape identities for a triple (--input <json>)\n"
    "  avitzour-find     search for a unitary triple (--a <algebra> --b <algebra>)\n"
    "  thm64-check       almost orthogonality and containment quantities (--input <json>)\n"
    "  classify-abelian  selflessness of C^m * C^n (--a w1,w2,.. --b w1,..)\n"
    "  fock-dim          dimensions of the truncated free Fock space (--dims d1,d2,.. --depth L)\n"
    "\n"
    "run 'freedecay <subcommand> --help' for the options of one subcommand.\n";

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool looks_inline(const std::string& arg) {
  auto pos = arg.find_first_not_of(" \t\r\n");
  return pos != std::string::npos && (arg[pos] == '{' || arg[pos] == '[');
}

json load_json(const std::string& path_or_inline) {
  if (looks_inline(path_or_inline)) return parse_json_text(path_or_inline, "<inline>");
  return parse_json_text(read_file(path_or_inline), path_or_inline);
}

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& what) {
  if (!j.is_object()) throw InputError(what + " must be a JSON object");
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* k : allowed) known = known || item.key() == k;
    if (!known) throw InputError("unknown key '" + item.key() + "' in " + what);
  }
}

const json& require(const json& j, const char* key, const std::string& what) {
  auto it = j.find(key);
  if (it == j.end()) throw InputError("missing key '" + std::string(key) + "' in " + what);
  return *it;
}

int as_int(const json& j, const std::string& what) {
  if (!j.is_number_integer()) throw InputError(what + " must be an integer");
  return j.get<int>();
}

Scalar parse_real(const json& j) {
  try {
    if (j.is_number()) return Scalar::from_decimal(j.dump());
    if (j.is_string()) return Scalar::from_decimal(j.get<std::string>());
  } catch (const std::invalid_argument& e) {
    throw InputError(std::string("bad numeric literal: ") + e.what());
  }
  throw InputError("expected a number or a numeric string, got " + j.dump());
}

CMatrix parse_matrix(const json& j) {
  if (!j.is_array() || j.empty() || !j[0].is_array() || j[0].empty())
    throw InputError("a matrix must be a nonempty array of nonempty rows");
  int rows = static_cast<int>(j.size());
  int cols = static_cast<int>(j[0].size());
  CMatrix m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    if (!j[i].is_array() || static_cast<int>(j[i].size()) != cols) throw InputError("matrix rows differ in length");
    for (int k = 0; k < cols; ++k) m(i, k) = parse_scalar(j[i][k]);
  }
  return m;
}

std::vector<Scalar> parse_scalar_list(const json& j, const std::string& what) {
  if (!j.is_array() || j.empty()) throw InputError(what + " must be a nonempty array");
  std::vector<Scalar> out;
  for (const json& e : j) out.push_back(parse_scalar(e));
  return out;
}

std::vector<Scalar> parse_weight_list(const std::string& text) {
  std::vector<Scalar> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(Scalar::from_decimal(item));
    } catch (const std::invalid_argument& e) {
      throw UsageError("bad weight '" + item + "': " + e.what());
    }
  }
  if (out.empty()) throw UsageError("empty weight list");
  return out;
}

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      int v = std::stoi(item, &used);
      if (used != item.size() || v < 0) throw std::invalid_argument(item);
      out.push_back(v);
    } catch (const std::exception&) {
      throw UsageError("bad dimension '" + item + "'");
    }
  }
  if (out.empty()) throw UsageError("empty dimension list");
  return out;
}

json scalar_to_json(const Scalar& s) {
  if (s.is_exact()) return json::array({s.re_q().get_str(), s.im_q().get_str()});
  auto z = s.to_complex();
  return json::array({z.real(), z.imag()});
}

/// Rows of CSV followed by comment lines and the seed/version trailer.
class Csv {
 public:
  explicit Csv(const std::string& header) { os_ << header << '\n'; }
  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) os_ << (i ? "," : "") << cells[i];
    os_ << '\n';
  }
  void comment(const std::string& text) { os_ << "# " << text << '\n'; }
  std::string finish(const Options& o) {
    os_ << "# seed=" << o.seed << ", version=" << kVersion << '\n';
    return os_.str();
  }

 private:
  std::ostringstream os_;
};

/// Runs f(0..n-1) on up to `threads` workers. Results must be written by index;
/// the exception of the lowest failing index is rethrown.
template <class F>
void parallel_for(int n, int threads, F&& f) {
  if (threads <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) f(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next++; i < n; i = next++) {
      try {
        f(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 0; t < std::min(threads, n); ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

std::mt19937_64 trial_rng(std::uint64_t seed, int trial) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(trial)};
  return std::mt19937_64(seq);
}

Scalar small_rational(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> num(-3, 3), den(1, 4);
  int n = num(rng);
  return Scalar::rational(n, den(rng));
}

AlgebraElement random_centered(const AlgebraPtr& a, std::mt19937_64& rng) {
  for (;;) {
    std::vector<CMatrix> blocks;
    for (int b = 0; b < a->num_blocks(); ++b) {
      int d = a->block_dim(b);
      CMatrix m(d, d);
      for (int i = 0; i < d; ++i)
        for (int k = 0; k < d; ++k) m(i, k) = small_rational(rng) + small_rational(rng) * Scalar::imag_unit();
      blocks.push_back(std::move(m));
    }
    AlgebraElement x = center(a->element(std::move(blocks)));
    if (!x.is_zero()) return x;
  }
}

Word random_alternating_word(const AmbientPtr& amb, int len, std::mt19937_64& rng) {
  Word w;
  int prev = -1;
  for (int i = 0; i < len; ++i) {
    std::uniform_int_distribution<int> d(0, amb->size() - (prev < 0 ? 1 : 2));
    int f = d(rng);
    if (prev >= 0 && f >= prev) ++f;
    w.push_back({f, random_centered(amb->factor(f), rng)});
    prev = f;
  }
  return w;
}

bool scalars_agree(const Scalar& x, const Scalar& y) {
  if (x.is_exact() && y.is_exact()) return x == y;
  return std::abs(x.to_complex() - y.to_complex()) <= 1e-10 * (1.0 + std::abs(y.to_complex()));
}

AmbientPtr parse_ambient(const json& j, const std::string& what) {
  if (!j.is_array() || j.empty()) throw InputError(what + " must be a nonempty array of algebras");
  std::vector<AlgebraPtr> factors;
  for (const json& f : j) factors.push_back(parse_algebra(f));
  return make_ambient(std::move(factors));
}

FiniteFiltration parse_factor_filtration(const json& j, const std::string& recipe, int max_n) {
  check_keys(j, {"algebra", "generators"}, "filtration space");
  AlgebraPtr a = parse_algebra(require(j, "algebra", "filtration space"));
  std::vector<AlgebraElement> gens;
  if (j.contains("generators")) {
    const json& g = j["generators"];
    if (!g.is_array()) throw InputError("generators must be an array");
    for (const json& e : g) gens.push_back(parse_element(a, e));
  }
  std::string r = recipe.empty() ? (gens.empty() ? "constant" : "generated") : recipe;
  if (r == "constant") return FiniteFiltration::constant(a, max_n);
  if (r == "generated") {
    if (gens.empty()) throw UsageError("the generated filtration needs a nonempty 'generators' list");
    return FiniteFiltration::generated(a, gens, max_n);
  }
  throw UsageError("unknown filtration recipe '" + r + "'");
}

// ---- subcommands ----

Result cmd_rd_certify(const Options& o) {
  if (o.builtin.empty() == o.space.empty()) throw UsageError("rd-certify needs exactly one of --builtin or --space");
  if (o.max_n < 0) throw UsageError("--max-n must be nonnegative");
  RDReport rep;
  std::string witness;
  if (!o.builtin.empty()) {
    if (!o.filtration.empty() && o.filtration != "degree")
      throw UsageError("builtin measures only carry the degree filtration");
    auto mu = CompactMeasure::builtin(o.builtin);
    if (!mu) throw UsageError("unknown builtin measure '" + o.builtin + "'");
    rep = rd_report(*mu, o.max_n);
  } else {
    json j = load_json(o.space);
    if (j.is_object() && j.contains("factors")) {
      check_keys(j, {"factors"}, "free filtration space");
      if (!o.filtration.empty() && o.filtration != "free")
        throw UsageError("a space with 'factors' carries the free filtration");
      const json& fs = j["factors"];
      if (!fs.is_array() || fs.size() < 2) throw InputError("'factors' must list at least two spaces");
      std::vector<FiniteFiltration> factors;
      for (const json& f : fs) factors.push_back(parse_factor_filtration(f, "", o.max_n));
      FreeFiltration ff(std::move(factors), o.cap > 0 ? o.cap : 20000);
      rep = rd_report(ff, o.max_n, o.depth);
    } else {
      FiniteFiltration f = parse_factor_filtration(j, o.filtration, o.max_n);
      FiltrationAxioms ax = check_axioms(f);
      if (!ax.ok()) witness = "filtration axioms: " + ax.failure;
      rep = rd_report(f, o.max_n);
    }
  }
  for (const RDRow& r : rep.rows) {
    if (!witness.empty()) break;
    std::string at = "n=" + std::to_string(r.n) + ": ";
    if (r.n == 0 && std::abs(r.c - 1.0) > 1e-12) witness = at + "C_0 = " + format_double(r.c) + " differs from 1";
    else if (r.c < 1.0 - 1e-9) witness = at + "C_n = " + format_double(r.c) + " below 1";
    else if (r.c > r.c_upper * (1.0 + 1e-9) + 1e-12)
      witness = at + "bracket lower " + format_double(r.c) + " exceeds upper " + format_double(r.c_upper);
  }

  Result res;
  res.witness = witness;
  res.code = witness.empty() ? kExitOk : kExitProperty;
  if (o.json_out) {
    json j;
    j["recipe"] = rep.recipe;
    j["rows"] = json::array();
    for (const RDRow& r : rep.rows)
      j["rows"].push_back({{"n", r.n}, {"C_n", r.c}, {"C_upper", r.c_upper}, {"dim", r.dim}, {"method", r.method}});
    if (rep.fit) {
      j["alpha"] = rep.fit->alpha;
      j["intercept"] = rep.fit->intercept;
    }
    if (!witness.empty()) j["witness"] = witness;
    j["seed"] = o.seed;
    j["version"] = kVersion;
    res.text = j.dump(2) + "\n";
    return res;
  }
  Csv csv("n,C_n,C_upper,dim,method");
  for (const RDRow& r : rep.rows)
    csv.row({std::to_string(r.n), format_double(r.c), format_double(r.c_upper), std::to_string(r.dim), r.method});
  if (rep.fit) csv.comment("alpha=" + format_double(rep.fit->alpha) + ", intercept=" + format_double(rep.fit->intercept));
  csv.comment("recipe=" + rep.recipe);
  if (!witness.empty()) csv.comment("witness: " + witness);
  res.text = csv.finish(o);
  return res;
}

Result cmd_free_moments(const Options& o) {
  FreeElement x = parse_free_element(load_json(o.input));
  int r_max = o.r_max > 0 ? o.r_max : 4;
  MomentEstimate est = moment_norm_estimate(x, r_max, o.cap > 0 ? o.cap : 2000000);
  Result res;
  Csv csv("r,moment,s_r,ratio");
  for (int r = 1; r <= r_max; ++r) {
    csv.row({std::to_string(r), format_double(est.moments[r - 1]), format_double(est.s[r - 1]),
             format_double(est.ratio[r - 1])});
    if (res.witness.empty() && r > 1 && est.ratio[r - 1] < est.ratio[r - 2] * (1.0 - 1e-9))
      res.witness = "ratio decreases at r=" + std::to_string(r);
  }
  csv.comment("engine=" + est.engine + ", max=" + format_double(est.max));
  if (!res.witness.empty()) {
    csv.comment("witness: " + res.witness);
    res.code = kExitProperty;
  }
  res.text = csv.finish(o);
  return res;
}

Result cmd_norm_estimate(const Options& o) {
  FreeElement x = parse_free_element(load_json(o.input));
  int depth = o.depth > 0 ? o.depth : default_depth(x);
  int r_max = o.r_max > 0 ? o.r_max : 3;
  TruncatedFock fock = build_fock(x.ambient(), depth, o.cap > 0 ? o.cap : TruncatedFock::kDefaultCap);
  double l2 = l2_norm_free(x);
  double fock_lb = norm_lower_bound(fock, x);
  MomentEstimate est = moment_norm_estimate(x, r_max);
  double moment_lb = est.max;
  for (double r : est.ratio) moment_lb = std::max(moment_lb, r);
  Result res;
  Csv csv("quantity,value");
  csv.row({"l2_norm", format_double(l2)});
  csv.row({"fock_depth", std::to_string(depth)});
  csv.row({"fock_dimension", std::to_string(fock.dimension())});
  csv.row({"fock_lower_bound", format_double(fock_lb)});
  csv.row({"moment_lower_bound", format_double(moment_lb)});
  csv.row({"best_lower_bound", format_double(std::max(fock_lb, moment_lb))});
  if (depth >= x.max_length() && fock_lb < l2 * (1.0 - 1e-9))
    res.witness = "compression norm " + format_double(fock_lb) + " below the l2 norm " + format_double(l2);
  if (!res.witness.empty()) {
    csv.comment("witness: " + res.witness);
    res.code = kExitProperty;
  }
  csv.comment("engine=" + est.engine);
  res.text = csv.finish(o);
  return res;
}

Result cmd_kh_norm(const Options& o) {
  if (o.length < 1) throw UsageError("--length must be at least 1");
  int trials = o.trials > 0 ? o.trials : 10;
  int r_max = o.r_max > 0 ? o.r_max : 2;
  AmbientPtr amb;
  if (o.factors.empty()) {
    amb = make_ambient({MatrixBlockAlgebra::matrix_tracial(2), MatrixBlockAlgebra::matrix_tracial(2)});
  } else {
    json j = load_json(o.factors);
    check_keys(j, {"factors"}, "factor list");
    amb = parse_ambient(require(j, "factors", "factor list"), "'factors'");
  }
  FactorBases bases = default_bases(amb);
  std::vector<RxReport> reports(trials);
  parallel_for(trials, o.threads, [&](int t) {
    std::mt19937_64 rng = trial_rng(o.seed, t);
    HomogeneousElement x = HomogeneousElement::random(amb, bases, o.length, rng, o.exact);
    reports[t] = rx_check(x, r_max, o.cap > 0 ? o.cap : TruncatedFock::kDefaultCap);
  });
  Result res;
  Csv csv("trial,l2,kh_lower,kh_upper,norm_lb,rx_margin");
  for (int t = 0; t < trials; ++t) {
    const RxReport& r = reports[t];
    csv.row({std::to_string(t), format_double(r.l2), format_double(r.kh_lower), format_double(r.kh_upper),
             format_double(std::max(r.norm_lb, r.moment_lb)), format_double(r.margin)});
    if (!r.pass && res.witness.empty()) res.witness = "trial " + std::to_string(t) + ": " + r.witness;
  }
  csv.comment("length=" + std::to_string(o.length) + ", trials=" + std::to_string(trials) +
              ", exact=" + (o.exact ? "true" : "false"));
  if (!res.witness.empty()) {
    csv.comment("witness: " + res.witness);
    res.code = kExitProperty;
  }
  res.text = csv.finish(o);
  return res;
}

AvitzourTriple parse_triple(const json& j, AlgebraPtr* a1, AlgebraPtr* a2) {
  check_keys(j, {"a1", "a2", "u", "v", "w"}, "triple");
  *a1 = parse_algebra(require(j, "a1", "triple"));
  *a2 = parse_algebra(require(j, "a2", "triple"));
  return {parse_element(*a1, require(j, "u", "triple")), parse_element(*a2, require(j, "v", "triple")),
          parse_element(*a2, require(j, "w", "triple"))};
}

Result cmd_avitzour_check(const Options& o) {
  if (o.max_length < 1 || o.words < 1) throw UsageError("--words and --max-length must be positive");
  AlgebraPtr a1, a2;
  AvitzourTriple t = parse_triple(load_json(o.input), &a1, &a2);
  Result res;
  try {
    check_avitzour(t, 1e-10);
  } catch (const AvitzourConditionError& e) {
    Csv csv("word,length,trace,isometry,shape");
    res.witness = "condition " + e.condition() + ": " + e.what();
    csv.comment("witness: " + res.witness);
    res.code = kExitProperty;
    res.text = csv.finish(o);
    return res;
  }
  AmbientPtr three = make_ambient({a1, a2, a1});
  AmbientPtr two = make_ambient({a1, a2});
  struct Row {
    int length = 0;
    bool trace = true, isometry = true, shape = true;
    std::string failure;
  };
  std::vector<Row> rows(o.words);
  parallel_for(o.words, o.threads, [&](int k) {
    std::mt19937_64 rng = trial_rng(o.seed, k);
    int ell = std::uniform_int_distribution<int>(1, o.max_length)(rng);
    Row& row = rows[k];
    row.length = ell;
    FreeElement x = FreeElement::word(three, random_alternating_word(three, ell, rng));
    FreeElement y = avitzour_phi(ell / 2 + 1, t, x, two);
    row.trace = scalars_agree(free_state(y), free_state(x));
    FreeElement z = avitzour_phi(ell + 1, t, x, two);
    row.isometry = scalars_agree(l2_inner_free(z, z), l2_inner_free(x, x));
    Word a = random_alternating_word(two, ell, rng);
    AvitzourShapeReport shape = avitzour_shape_check(ell / 2 + 1, t, a, ShapeMode::Both, two);
    row.shape = shape.ok;
    if (!row.trace) row.failure = "trace identity";
    else if (!row.isometry) row.failure = "l2 isometry";
    else if (!row.shape) row.failure = "shape: " + shape.failure;
  });
  Csv csv("word,length,trace,isometry,shape");
  for (int k = 0; k < o.words; ++k) {
    const Row& r = rows[k];
    auto flag = [](bool ok) { return std::string(ok ? "ok" : "fail"); };
    csv.row({std::to_string(k), std::to_string(r.length), flag(r.trace), flag(r.isometry), flag(r.shape)});
    if (!r.failure.empty() && res.witness.empty()) res.witness = "word " + std::to_string(k) + ": " + r.failure;
  }
  if (!res.witness.empty()) {
    csv.comment("witness: " + res.witness);
    res.code = kExitProperty;
  }
  res.text = csv.finish(o);
  return res;
}

Result cmd_avitzour_find(const Options& o) {
  AlgebraPtr a1 = parse_algebra(load_json(o.a));
  AlgebraPtr a2 = parse_algebra(load_json(o.b));
  AvitzourSearch s = find_avitzour_triple(a1, a2, o.seed, o.trials > 0 ? o.trials : 10000);
  json j;
  j["found"] = s.triple.has_value();
  j["method"] = s.method;
  j["trials"] = s.trials;
  if (s.triple) {
    j["u"] = element_to_json(s.triple->u);
    j["v"] = element_to_json(s.triple->v);
    j["w"] = element_to_json(s.triple->w);
  }
  j["seed"] = o.seed;
  j["version"] = kVersion;
  return {j.dump(2) + "\n", kExitOk, ""};
}

Result cmd_thm64_check(const Options& o) {
  json j = load_json(o.input);
  check_keys(j, {"algebra", "u", "v", "f"}, "thm64 input");
  AlgebraPtr a = parse_algebra(require(j, "algebra", "thm64 input"));
  auto list = [&](const char* key) {
    const json& l = require(j, key, "thm64 input");
    if (!l.is_array() || l.empty()) throw InputError(std::string("'") + key + "' must be a nonempty array");
    std::vector<AlgebraElement> out;
    for (const json& e : l) out.push_back(parse_element(a, e));
    return out;
  };
  std::vector<AlgebraElement> v = list("v"), f = list("f");
  Thm64Report r = thm64_check(v, parse_element(a, require(j, "u", "thm64 input")), f);
  Csv csv("quantity,value");
  csv.row({"dim_v", std::to_string(r.dim_v)});
  csv.row({"dim_f", std::to_string(r.dim_f)});
  csv.row({"sup_uau", format_double(r.sup_uau)});
  csv.row({"sup_ua", format_double(r.sup_ua)});
  csv.row({"inflated_rd", format_double(r.inflated_rd)});
  csv.row({"containment_l2", format_double(r.containment_l2)});
  csv.row({"containment_op", format_double(r.containment_op)});
  csv.row({"conj_containment_l2", format_double(r.conj_containment_l2)});
  csv.row({"conj_containment_op", format_double(r.conj_containment_op)});
  csv.row({"f_has_one", r.f_has_one ? "true" : "false"});
  csv.row({"f_star_stable", r.f_star_stable ? "true" : "false"});
  return {csv.finish(o), kExitOk, ""};
}

Result cmd_classify_abelian(const Options& o) {
  AbelianVerdict v = classify_abelian(parse_weight_list(o.a), parse_weight_list(o.b));
  std::ostringstream os;
  os << (v.selfless ? "selfless" : "not_selfless") << '\n';
  for (const std::string& r : v.reasons) os << "reason: " << r << '\n';
  os << "# seed=" << o.seed << ", version=" << kVersion << '\n';
  return {os.str(), kExitOk, ""};
}

Result cmd_fock_dim(const Options& o) {
  if (o.dims.empty() == o.factors.empty()) throw UsageError("fock-dim needs exactly one of --dims or --factors");
  if (o.depth < 0) throw UsageError("fock-dim needs --depth L with L >= 0");
  std::vector<int> dims;
  if (!o.dims.empty()) {
    dims = parse_int_list(o.dims);
  } else {
    json j = load_json(o.factors);
    check_keys(j, {"factors"}, "factor list");
    AmbientPtr amb = parse_ambient(require(j, "factors", "factor list"), "'factors'");
    for (const AlgebraPtr& a : amb->factors()) dims.push_back(a->dimension() - 1);
  }
  long cap = o.cap > 0 ? o.cap : TruncatedFock::kDefaultCap;
  Csv csv("length,count,cumulative");
  double prev = 0.0;
  for (int l = 0; l <= o.depth; ++l) {
    double cum = FockIndex::count(dims, l);
    char count[64], total[64];
    std::snprintf(count, sizeof count, "%.0f", cum - prev);
    std::snprintf(total, sizeof total, "%.0f", cum);
    csv.row({std::to_string(l), count, total});
    prev = cum;
  }
  csv.comment(std::string("cap=") + std::to_string(cap) + ", exceeds_cap=" + (prev > cap ? "true" : "false"));
  return {csv.finish(o), kExitOk, ""};
}

// ---- output and cache ----

void write_atomic(const std::string& path, const std::string& text) {
  namespace fs = std::filesystem;
  fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw InputError("cannot write '" + tmp.string() + "'");
    os << text;
    os.flush();
    if (!os) throw InputError("write to '" + tmp.string() + "' failed");
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp);
    throw InputError("cannot move output into place at '" + path + "': " + ec.message());
  }
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

/// Everything that determines the output: the arguments minus --out/--threads
/// and the contents of every input file.
std::string cache_key(int argc, const char* const* argv, const Options& o) {
  std::string key = std::string("freedecay ") + kVersion + "\n";
  for (int i = 1; i < argc; ++i) {
    std::string arg = argv[i];
    if ((arg == "--out" || arg == "--threads") && i + 1 < argc) {
      ++i;
      continue;
    }
    if (arg.rfind("--out=", 0) == 0 || arg.rfind("--threads=", 0) == 0) continue;
    key += arg + "\n";
  }
  for (const std::string* p : {&o.space, &o.input, &o.factors, &o.a, &o.b}) {
    if (p->empty() || looks_inline(*p)) continue;
    if (o.command == "classify-abelian") continue;
    key += "file:" + read_file(*p) + "\n";
  }
  return key;
}

std::optional<Result> cache_load(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) return std::nullopt;
  std::string first;
  if (!std::getline(in, first) || first.rfind("exit=", 0) != 0) return std::nullopt;
  Result r;
  r.code = std::atoi(first.c_str() + 5);
  std::ostringstream ss;
  ss << in.rdbuf();
  r.text = ss.str();
  return r;
}

Result dispatch(const Options& o) {
  if (o.command == "rd-certify") return cmd_rd_certify(o);
  if (o.command == "free-moments") return cmd_free_moments(o);
  if (o.command == "norm-estimate") return cmd_norm_estimate(o);
  if (o.command == "kh-norm") return cmd_kh_norm(o);
  if (o.command == "avitzour-check") return cmd_avitzour_check(o);
  if (o.command == "avitzour-find") return cmd_avitzour_find(o);
  if (o.command == "thm64-check") return cmd_thm64_check(o);
  if (o.command == "classify-abelian") return cmd_classify_abelian(o);
  if (o.command == "fock-dim") return cmd_fock_dim(o);
  throw UsageError("unknown subcommand '" + o.command + "'");
}

}  // namespace

nlohmann::json parse_json_text(const std::string& text, const std::string& source) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t end = std::min<std::size_t>(e.byte > 0 ? e.byte - 1 : 0, text.size());
    int line = 1, column = 1;
    for (std::size_t i = 0; i < end; ++i) {
      if (text[i] == '\n') {
        ++line;
        column = 1;
      } else {
        ++column;
      }
    }
    throw InputError("malformed JSON in " + source + " at line " + std::to_string(line) + ", column " +
                     std::to_string(column));
  }
}

Scalar parse_scalar(const nlohmann::json& j) {
  if (j.is_array()) {
    if (j.size() != 2) throw InputError("a complex entry must be [re, im], got " + j.dump());
    return parse_real(j[0]) + parse_real(j[1]) * Scalar::imag_unit();
  }
  return parse_real(j);
}

AlgebraPtr parse_algebra(const nlohmann::json& j) {
  if (!j.is_object()) throw InputError("an algebra must be a JSON object");
  const json& type = require(j, "type", "algebra");
  if (!type.is_string()) throw InputError("algebra 'type' must be a string");
  std::string t = type.get<std::string>();
  if (t == "matrix_tracial" || t == "uniform_abelian") {
    check_keys(j, {"type", "n"}, "algebra");
    int n = as_int(require(j, "n", "algebra"), "'n'");
    if (n < 1) throw InputError("'n' must be positive");
    return t == "matrix_tracial" ? MatrixBlockAlgebra::matrix_tracial(n) : MatrixBlockAlgebra::uniform_abelian(n);
  }
  if (t == "abelian") {
    check_keys(j, {"type", "weights"}, "algebra");
    return MatrixBlockAlgebra::abelian(parse_scalar_list(require(j, "weights", "algebra"), "'weights'"));
  }
  if (t == "diagonal_state") {
    check_keys(j, {"type", "diag"}, "algebra");
    return MatrixBlockAlgebra::matrix_diagonal_state(parse_scalar_list(require(j, "diag", "algebra"), "'diag'"));
  }
  if (t == "blocks") {
    check_keys(j, {"type", "densities"}, "algebra");
    const json& d = require(j, "densities", "algebra");
    if (!d.is_array() || d.empty()) throw InputError("'densities' must be a nonempty array of matrices");
    std::vector<CMatrix> densities;
    for (const json& m : d) densities.push_back(parse_matrix(m));
    return MatrixBlockAlgebra::make(std::move(densities));
  }
  throw InputError("unknown algebra type '" + t + "'");
}

AlgebraElement parse_element(const AlgebraPtr& a, const nlohmann::json& j) {
  check_keys(j, {"blocks", "matrix", "diag", "unit"}, "element");
  if (j.size() != 1) throw InputError("an element needs exactly one of 'blocks', 'matrix', 'diag' or 'unit'");
  if (j.contains("blocks")) {
    const json& bs = j["blocks"];
    if (!bs.is_array()) throw InputError("'blocks' must be an array of matrices");
    std::vector<CMatrix> blocks;
    for (const json& m : bs) blocks.push_back(parse_matrix(m));
    return a->element(std::move(blocks));
  }
  if (j.contains("matrix")) {
    if (a->num_blocks() != 1) throw InputError("'matrix' needs an algebra with one block");
    return a->element({parse_matrix(j["matrix"])});
  }
  if (j.contains("diag")) return a->abelian_element(parse_scalar_list(j["diag"], "'diag'"));
  const json& u = j["unit"];
  if (!u.is_array() || u.size() != 3) throw InputError("'unit' must be [block, row, column]");
  int b = as_int(u[0], "unit block"), r = as_int(u[1], "unit row"), c = as_int(u[2], "unit column");
  if (b < 0 || b >= a->num_blocks() || r < 0 || c < 0 || r >= a->block_dim(b) || c >= a->block_dim(b))
    throw InputError("'unit' index out of range");
  return a->unit(b, r, c);
}

FreeElement parse_free_element(const nlohmann::json& j) {
  check_keys(j, {"factors", "terms"}, "free element");
  AmbientPtr amb = parse_ambient(require(j, "factors", "free element"), "'factors'");
  FreeElement x(amb);
  const json& terms = require(j, "terms", "free element");
  if (!terms.is_array()) throw InputError("'terms' must be an array");
  for (const json& term : terms) {
    check_keys(term, {"coeff", "word"}, "term");
    Scalar c = term.contains("coeff") ? parse_scalar(term["coeff"]) : Scalar(1);
    const json& letters = require(term, "word", "term");
    if (!letters.is_array()) throw InputError("'word' must be an array of letters");
    Word w;
    for (const json& l : letters) {
      check_keys(l, {"factor", "element"}, "letter");
      int f = as_int(require(l, "factor", "letter"), "'factor'");
      if (f < 0 || f >= amb->size()) throw InputError("letter factor " + std::to_string(f) + " out of range");
      w.push_back({f, parse_element(amb->factor(f), require(l, "element", "letter"))});
    }
    x.add_term(w, c);
  }
  return x;
}

nlohmann::json element_to_json(const AlgebraElement& x) {
  json blocks = json::array();
  for (const CMatrix& m : x.blocks()) {
    json rows = json::array();
    for (int i = 0; i < m.rows(); ++i) {
      json row = json::array();
      for (int k = 0; k < m.cols(); ++k) row.push_back(scalar_to_json(m(i, k)));
      rows.push_back(std::move(row));
    }
    blocks.push_back(std::move(rows));
  }
  return {{"blocks", blocks}};
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (v == 0.0) v = 0.0;  // drop the sign of -0
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  if (argc < 2) {
    err << kUsage;
    return kExitUsage;
  }
  Options o;
  CLI::App app{"Rapid decay and free product numerics", "freedecay"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  auto common = [&](CLI::App* sub) {
    sub->add_option("--out", o.out, "write the report here (atomically) instead of stdout");
    sub->add_option("--seed", o.seed, "seed recorded in the report and used by random steps");
    sub->add_option("--threads", o.threads, "worker threads for independent trials")->check(CLI::Range(1, 256));
  };
  CLI::App* rd = app.add_subcommand("rd-certify", "RD constants C_n of a filtration");
  rd->add_option("--builtin", o.builtin, "semicircle, lebesgue, lebesgue01 or cosine (degree filtration)");
  rd->add_option("--space", o.space, "JSON space: {algebra, generators} or {factors: [...]}");
  rd->add_option("--filtration", o.filtration, "degree, constant, generated or free");
  rd->add_option("--max-n", o.max_n, "largest level");
  rd->add_option("--depth", o.depth, "Fock depth for free filtrations (default n + 2)");
  rd->add_option("--cap", o.cap, "dimension cap for free filtration levels");
  rd->add_flag("--json", o.json_out, "JSON report instead of CSV");
  common(rd);

  CLI::App* fm = app.add_subcommand("free-moments", "moments free_state((x*x)^r)");
  fm->add_option("--input", o.input, "JSON free element")->required();
  fm->add_option("--r-max", o.r_max, "largest r (default 4)");
  fm->add_option("--cap", o.cap, "Fock dimension cap");
  common(fm);

  CLI::App* ne = app.add_subcommand("norm-estimate", "lower bounds for the reduced norm");
  ne->add_option("--input", o.input, "JSON free element")->required();
  ne->add_option("--depth", o.depth, "Fock depth (default max(4, 2 * word length))");
  ne->add_option("--r-max", o.r_max, "largest moment order (default 3)");
  ne->add_option("--cap", o.cap, "Fock dimension cap");
  common(ne);

  CLI::App* kh = app.add_subcommand("kh-norm", "Khintchine bracket on random homogeneous elements");
  kh->add_option("--length", o.length, "word length l >= 1");
  kh->add_option("--trials", o.trials, "number of random elements (default 10)");
  kh->add_option("--factors", o.factors, "JSON {factors: [...]}; default two copies of (M_2, tr)");
  kh->add_option("--r-max", o.r_max, "moment order for the norm lower bound (default 2)");
  kh->add_option("--cap", o.cap, "Fock dimension cap");
  kh->add_flag("--exact", o.exact, "exact rational coefficients");
  common(kh);

  CLI::App* ac = app.add_subcommand("avitzour-check", "identities of a unitary triple on random words");
  ac->add_option("--input", o.input, "JSON {a1, a2, u, v, w}")->required();
  ac->add_option("--words", o.words, "number of random words");
  ac->add_option("--max-length", o.max_length, "largest word length");
  common(ac);

  CLI::App* af = app.add_subcommand("avitzour-find", "search for a unitary triple");
  af->add_option("--a", o.a, "JSON algebra A1 (file or inline)")->required();
  af->add_option("--b", o.b, "JSON algebra A2 (file or inline)")->required();
  af->add_option("--trials", o.trials, "random trials (default 10000)");
  common(af);

  CLI::App* th = app.add_subcommand("thm64-check", "almost orthogonality and containment quantities");
  th->add_option("--input", o.input, "JSON {algebra, u, v: [...], f: [...]}")->required();
  common(th);

  CLI::App* ca = app.add_subcommand("classify-abelian", "selflessness of C^m * C^n");
  ca->add_option("--a", o.a, "weights of C^m, comma separated")->required();
  ca->add_option("--b", o.b, "weights of C^n, comma separated")->required();
  common(ca);

  CLI::App* fd = app.add_subcommand("fock-dim", "truncated Fock space dimensions");
  fd->add_option("--dims", o.dims, "centered dimensions d_j = dim A_j - 1, comma separated");
  fd->add_option("--factors", o.factors, "JSON {factors: [...]} instead of --dims");
  fd->add_option("--depth", o.depth, "largest tensor length")->required();
  fd->add_option("--cap", o.cap, "cap to compare against");
  common(fd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion& e) {
    out << kVersion << '\n';
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    // Subcommand help arrives here as a CallForHelp raised inside the subcommand.
    if (e.get_exit_code() == 0) {
      for (CLI::App* sub : app.get_subcommands()) out << sub->help();
      return kExitOk;
    }
    err << "error: " << e.what() << "\n\n" << kUsage;
    return kExitUsage;
  }
  o.command = app.get_subcommands().front()->get_name();

  try {
    std::optional<std::filesystem::path> cache_file;
    if (const char* dir = std::getenv("FREEDECAY_CACHE_DIR"); dir && *dir) {
      char hex[17];
      std::snprintf(hex, sizeof hex, "%016llx",
                    static_cast<unsigned long long>(fnv1a(cache_key(argc, argv, o))));
      cache_file = std::filesystem::path(dir) / (std::string(hex) + ".out");
    }
    std::optional<Result> res;
    if (cache_file) res = cache_load(*cache_file);
    if (!res) {
      res = dispatch(o);
      if (cache_file) {
        std::filesystem::create_directories(cache_file->parent_path());
        write_atomic(cache_file->string(), "exit=" + std::to_string(res->code) + "\n" + res->text);
      }
    }
    if (o.out.empty()) out << res->text;
    else write_atomic(o.out, res->text);
    if (res->code == kExitProperty) {
      err << "property failure";
      if (!res->witness.empty()) err << ": " << res->witness;
      err << '\n';
    }
    return res->code;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
  } catch (const ResourceError& e) {
    err << "error: resource limit: " << e.what() << '\n';
  } catch (const FinitelySupportedError& e) {
    err << "error: " << e.what() << '\n';
  } catch (const PreconditionError& e) {
    err << "error: invalid input: " << e.what() << '\n';
  } catch (const StructuralError& e) {
    err << "error: invalid input: " << e.what() << '\n';
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
  }
  return kExitUsage;
}

}  // namespace freedecay::cli
