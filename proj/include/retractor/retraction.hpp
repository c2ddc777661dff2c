#ifndef RETRACTOR_RETRACTION_HPP
#define RETRACTOR_RETRACTION_HPP

#include <limits>

#include "retractor/km.hpp"
#include "retractor/maps.hpp"
#include "retractor/resolvent.hpp"

namespace retractor {

struct StageDiag {
  int stage = 0;             // 1 = resolvent base, k >= 2 = averaging stages
  long long iterations = 0;  // contraction steps (stage 1) or KM steps
  double final_step = 0.0;
  double stage_residual = 0.0;  // stage 1: ||T1 y - y||; else ||S z - z|| at stop
};

/// Per-call diagnostics returned by RetractionProc::apply. apply itself is
/// pure; nothing is cached on the proc, so concurrent calls are safe.
struct ApplyDiagnostics {
  Vec residuals;  // ||T_i y - y|| per family map, family order
  double max_residual = 0.0;
  double movement = 0.0;  // ||y - x||
  long long resolvent_iterations = 0;
  long long km_iterations = 0;
  int extensions = 0;
  std::vector<StageDiag> stages;  // from the final pass
  // Single-map procs only: how far an almost-fixed input may move.
  double input_residual = std::numeric_limits<double>::quiet_NaN();
  double movement_bound = std::numeric_limits<double>::quiet_NaN();
};

struct RetractionOptions {
  double gamma = 0.5;
  long long max_iter = 1'000'000;  // per averaging stage
  double km_step_tol = 0.0;        // 0 = derive gamma * eps_k per stage
  /// Residual target for the base resolvent inside multi-stage towers
  /// (0 = 5e-4 * diameter). The averaging stages pull the tower to the
  /// common fixed set regardless of the base index; the index only needs to
  /// grow (via extensions) when the measured contract misses. Running the
  /// base at the full eps budget up front would cost ~diam/eps contraction
  /// steps per call, which the adaptive schedule avoids.
  double leaf_floor = 0.0;
  /// Inner contraction-solve tolerance for the base (0 = eps_1 / 10). The
  /// inner solve is kept an order tighter than the stage budget; coarsening
  /// it biases every stage above it.
  double leaf_inner_tol = 0.0;
  int max_extensions = 5;
  bool allow_unchecked = false;
};

/// Summary of the validation run performed when a retraction is built.
struct BuildReport {
  std::vector<double> residual_schedule;  // eps_k per stage
  std::vector<StageDiag> stages;
  Vec probe_residuals;  // family residuals at the validation output
  int extensions = 0;
};

/// Raised when a stage times out during the build validation run.
class PartialBuildError : public ConvergenceError {
 public:
  PartialBuildError(const std::string& msg, int stage, KMResult partial)
      : ConvergenceError(msg,
                         partial.trace.residuals.empty()
                             ? 0.0
                             : partial.trace.residuals.back(),
                         partial.trace.iterations),
        stage(stage),
        partial_result(std::move(partial)) {}

  int stage;
  KMResult partial_result;
};

/// Raised when apply cannot meet the residual contract even after all
/// extensions.
class RetractionContractError : public ConvergenceError {
 public:
  RetractionContractError(const std::string& msg, ApplyDiagnostics diag)
      : ConvergenceError(msg, diag.max_residual, diag.km_iterations),
        diagnostics(std::move(diag)) {}

  ApplyDiagnostics diagnostics;
};

/// Computable approximate retraction onto the common fixed set of a finite
/// commuting family: a resolvent base for the first map with averaging
/// stages stacked on top, one per further map. apply measures the family
/// residuals of every output and tightens the stage tolerances until the
/// advertised bound holds (or throws once extensions are exhausted).
class RetractionProc {
 public:
  struct Leaf {
    CertifiedMap map;
    long long n_star = 1;       // resolvent accuracy index
    long long n_literal = 1;    // worst-case index ceil(diam / eps_1)
    double inner_tol = 0.0;
    double eps_k = 0.0;
  };
  struct Stage {
    CertifiedMap map;
    double step_tol = 0.0;
    long long max_iter = 0;
    double eps_k = 0.0;
  };

  double eps() const { return eps_; }
  /// Bound apply enforces on max_i ||T_i y - y||. Equals eps for family
  /// retractions; eps + 2*inner_tol for a single-map resolvent retraction.
  double residual_bound() const { return residual_bound_; }
  const Leaf& leaf() const { return leaf_; }
  const std::vector<Stage>& stages() const { return stages_; }
  const ConvexBody& body() const { return leaf_.map.body(); }
  int family_size() const { return 1 + static_cast<int>(stages_.size()); }
  const CertifiedMap& family_map(int i) const {
    return i == 0 ? leaf_.map : stages_[static_cast<std::size_t>(i - 1)].map;
  }
  const RetractionOptions& options() const { return options_; }
  const BuildReport& build_report() const { return build_report_; }

  std::pair<Vec, ApplyDiagnostics> apply(const Vec& x,
                                         TraceSink* trace = nullptr) const;

  /// Partial tower: the base plus the first n_stages averaging stages. Used
  /// to measure how far a full-tower output sits from the sub-tower's range.
  RetractionProc truncated(int n_stages) const;

 private:
  friend RetractionProc single_retraction(const CertifiedMap&, double, double,
                                          bool);
  friend RetractionProc build_retraction(const CommutingFamily&, double,
                                         double, long long, RetractionOptions);

  explicit RetractionProc(Leaf leaf) : leaf_(std::move(leaf)) {}

  struct PassParams {
    long long leaf_n = 1;
    double leaf_inner_tol = 0.0;
    std::vector<double> step_tols;
  };

  PassParams base_params() const;
  Vec run_tower(const Vec& x, const PassParams& params, TraceSink* trace,
                ApplyDiagnostics& diag) const;
  void measure(const Vec& y, ApplyDiagnostics& diag) const;

  double eps_ = 0.0;
  double residual_bound_ = 0.0;
  Leaf leaf_;
  std::vector<Stage> stages_;
  RetractionOptions options_;
  BuildReport build_report_;
};

/// Resolvent retraction for one map: x -> resolve(T, x, n*, inner_tol) with
/// n* = ceil(diam / eps), so outputs satisfy ||T y - y|| <= eps + 2*inner_tol.
/// inner_tol defaults to eps / 10.
RetractionProc single_retraction(const CertifiedMap& map, double eps,
                                 double inner_tol = 0.0,
                                 bool allow_unchecked = false);

/// Recursive construction for a certified commuting family: base resolvent
/// for maps[0], then for each further map T a stage that runs the averaged
/// iteration of T composed with the tower built so far (gamma = 1/2 by
/// default). Per-stage budgets eps_k = eps / (2 * (N - k + 1)), overridable
/// through options. Performs one validation apply at the body center.
RetractionProc build_retraction(const CommutingFamily& family, double eps,
                                double km_step_tol = 0.0,
                                long long max_iter = 1'000'000,
                                RetractionOptions options = {});

struct FixedSetIdentityEntry {
  Vec x;
  double family_residual = 0.0;
  double extra_residual = 0.0;
  double fix_composite_residual = 0.0;  // ||extra(R x) - x||
  bool ok = true;
};

/// Two-sided audit of Fix(family) n Fix(extra) = Fix(extra o R) at
/// tolerance scale c * eps.
struct FixedSetIdentityReport {
  double eps = 0.0;
  double c = 10.0;
  double extra_commute_defect = 0.0;
  std::vector<FixedSetIdentityEntry> forward;   // constructed common fixed points
  std::vector<FixedSetIdentityEntry> backward;  // found fixed points of extra o R
  int backward_candidates = 0;
  int backward_found = 0;
  bool pass = true;
};

/// extra must commute with every family member (sampled defect <= 1e-8).
FixedSetIdentityReport fixed_set_identity_check(const CommutingFamily& family,
                                                const RetractionProc& retraction,
                                                const CertifiedMap& extra,
                                                int samples,
                                                std::uint64_t seed);

}  // namespace retractor

#endif  // RETRACTOR_RETRACTION_HPP
