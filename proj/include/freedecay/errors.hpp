#ifndef FREEDECAY_ERRORS_HPP
#define FREEDECAY_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace freedecay {

/// Shapes, owners or ambients that do not match.
class StructuralError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An operation was called outside its stated preconditions.
class PreconditionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A configured size cap would be exceeded.
class ResourceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The recurrence of a measure broke down: it has finitely many atoms.
class FinitelySupportedError : public std::runtime_error {
 public:
  FinitelySupportedError(int degree, const std::string& what)
      : std::runtime_error(what), degree_(degree) {}
  int degree() const { return degree_; }

 private:
  int degree_;
};

/// One of the moment/unitarity conditions on (u, v, w) fails.
class AvitzourConditionError : public PreconditionError {
 public:
  AvitzourConditionError(std::string condition, const std::string& what)
      : PreconditionError(what), condition_(std::move(condition)) {}
  const std::string& condition() const { return condition_; }

 private:
  std::string condition_;
};

}  // namespace freedecay

#endif  // FREEDECAY_ERRORS_HPP
