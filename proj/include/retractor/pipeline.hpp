#ifndef RETRACTOR_PIPELINE_HPP
#define RETRACTOR_PIPELINE_HPP

#include <iosfwd>
#include <optional>
#include <string>

#include "retractor/problem.hpp"

namespace retractor {

// Exit status contract shared by the CLI commands:
//   0  all contracts held
//   1  property-suite invariant failure
//   2  unreadable or invalid spec / trace file
//   3  certification failure (nonexpansiveness or commutativity witness)
//   4  convergence failure (contraction, averaging stage, or residual
//      contract)
inline constexpr int kExitOk = 0;
inline constexpr int kExitInvariant = 1;
inline constexpr int kExitParse = 2;
inline constexpr int kExitCertification = 3;
inline constexpr int kExitConvergence = 4;

struct CliOverrides {
  std::optional<double> eps;
  std::optional<double> gamma;
  std::optional<long long> max_iter;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> report_path;
  std::optional<std::string> trace_path;
  bool allow_uncertified = false;
};

int run_solve(const std::string& spec_path, const CliOverrides& overrides,
              std::ostream& out, std::ostream& err);

int run_verify(const std::string& spec_path, const CliOverrides& overrides,
               std::ostream& out, std::ostream& err);

int run_trace_plotdata(const std::string& trace_path,
                       const std::string& out_path, std::ostream& out,
                       std::ostream& err);

/// RETRACTOR_LOG: unset/"" = quiet, "info", "debug".
int log_level();

}  // namespace retractor

#endif  // RETRACTOR_PIPELINE_HPP
