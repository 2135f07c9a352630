#ifndef FREEDECAY_CLI_HPP
#define FREEDECAY_CLI_HPP

#include <ostream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "freedecay/algebra.hpp"
#include "freedecay/freeword.hpp"

namespace freedecay::cli {

inline constexpr const char* kVersion = "0.1.0";

/// Exit codes of run().
inline constexpr int kExitOk = 0;
inline constexpr int kExitProperty = 1;
inline constexpr int kExitUsage = 2;

/// Malformed or unsupported input: bad JSON, unknown keys, bad literals.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Runs one subcommand. argv[0] is the program name.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Parses JSON text; InputError with line and column on syntax errors.
nlohmann::json parse_json_text(const std::string& text, const std::string& source);

/// Number, string ("3/5", "0.25") or [re, im]. Decimal numbers are read exactly.
Scalar parse_scalar(const nlohmann::json& j);
/// {"type": "matrix_tracial", "n": 2}, {"type": "uniform_abelian", "n": 3},
/// {"type": "abelian", "weights": [...]}, {"type": "diagonal_state", "diag": [...]}
/// or {"type": "blocks", "densities": [matrix, ...]}.
AlgebraPtr parse_algebra(const nlohmann::json& j);
/// {"blocks": [matrix, ...]}, {"matrix": matrix} (one block), {"diag": [...]}
/// (all blocks 1x1) or {"unit": [b, i, j]}.
AlgebraElement parse_element(const AlgebraPtr& a, const nlohmann::json& j);
/// {"factors": [algebra, ...], "terms": [{"coeff": s, "word": [{"factor": j,
/// "element": e}, ...]}, ...]}.
FreeElement parse_free_element(const nlohmann::json& j);
/// {"blocks": [...]} with [re, im] entries; exact parts are written as strings.
nlohmann::json element_to_json(const AlgebraElement& x);

/// Fixed-precision text of a double, identical across runs.
std::string format_double(double v);

}  // namespace freedecay::cli

#endif  // FREEDECAY_CLI_HPP
