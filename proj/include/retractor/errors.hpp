#ifndef RETRACTOR_ERRORS_HPP
#define RETRACTOR_ERRORS_HPP

#include <stdexcept>
#include <string>
#include <vector>

namespace retractor {

/// Broken precondition or malformed argument (dimension mismatch, bad shape
/// parameters). These indicate caller bugs, not data problems.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Unreadable or schema-invalid input file.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A map failed nonexpansiveness certification. Carries the witness pair
/// (when the rejection came from sampling) or the certified norm value.
class CertificationError : public std::runtime_error {
 public:
  CertificationError(const std::string& msg, std::string map = {},
                     std::vector<double> x = {}, std::vector<double> y = {},
                     double v = 0.0)
      : std::runtime_error(msg),
        map_name(std::move(map)),
        witness_x(std::move(x)),
        witness_y(std::move(y)),
        value(v) {}

  std::string map_name;
  std::vector<double> witness_x;
  std::vector<double> witness_y;
  double value;
};

/// A family failed the commutativity check. Witness: pair indices and the
/// point where the two composition orders disagree.
class NonCommutingError : public std::runtime_error {
 public:
  NonCommutingError(const std::string& msg, int i, int j,
                    std::vector<double> x, double defect)
      : std::runtime_error(msg),
        index_i(i),
        index_j(j),
        witness_x(std::move(x)),
        defect(defect) {}

  int index_i;
  int index_j;
  std::vector<double> witness_x;
  double defect;
};

/// Point handed to a map lies outside its domain beyond tolerance.
class DomainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A map advertised as a self-map produced a point outside its body.
class SelfMapViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An iterative solve ran out of its iteration budget.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& msg, double last_residual,
                   long long iterations)
      : std::runtime_error(msg),
        last_residual(last_residual),
        iterations(iterations) {}

  double last_residual;
  long long iterations;
};

/// An oracle cannot answer (singular or ill-conditioned system). Callers
/// must skip the dependent check, never pass it silently.
class OracleUnavailable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace retractor

#endif  // RETRACTOR_ERRORS_HPP
