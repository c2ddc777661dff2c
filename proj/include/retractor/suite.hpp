#ifndef RETRACTOR_SUITE_HPP
#define RETRACTOR_SUITE_HPP

#include <nlohmann/json.hpp>

#include "retractor/problem.hpp"
#include "retractor/retraction.hpp"

namespace retractor {

struct AuditResult {
  enum class Status { Pass, Fail, Skipped };

  std::string name;
  Status status = Status::Pass;
  double margin = 0.0;  // slack left before the audit would fail
  std::string detail;
};

/// Everything run_property_suite knows about the instance under audit.
/// Certificates must be attached before the suite runs.
struct AuditContext {
  const Problem& problem;
  CommutingFamily family;
  std::uint64_t seed = 0;
  const RetractionProc* retraction = nullptr;
  // Outputs of the retraction at the shared audit sample set, reused by the
  // residual/idempotence/oracle audits so each point is retracted once.
  std::vector<Vec> sample_inputs;
  std::vector<Vec> sample_outputs;
  bool allow_unchecked = false;
};

using AuditFn = AuditResult (*)(AuditContext&);

struct AuditSpec {
  std::string name;
  AuditFn fn;
};

/// The fixed registry of invariants; one entry per module invariant.
const std::vector<AuditSpec>& audit_registry();

struct RunReport {
  int schema_version = 1;
  std::string problem_digest;
  std::uint64_t seed = 0;
  nlohmann::json certificates;
  nlohmann::json build;
  std::vector<AuditResult> audits;
  nlohmann::json timings;
  bool all_pass = true;

  /// Stable serialization; two runs with the same spec and seed agree byte
  /// for byte once timings are excluded.
  nlohmann::json to_json(bool include_timings = true) const;
};

/// Runs every registered audit against the problem at its solver settings.
/// The problem's maps and family must already carry certificates.
RunReport run_property_suite(const Problem& problem, std::uint64_t seed);

nlohmann::json certificates_to_json(const Problem& problem,
                                    const CommutingFamily& family);

}  // namespace retractor

#endif  // RETRACTOR_SUITE_HPP
