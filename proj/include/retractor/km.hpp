#ifndef RETRACTOR_KM_HPP
#define RETRACTOR_KM_HPP

#include <functional>

#include "retractor/errors.hpp"
#include "retractor/geometry.hpp"
#include "retractor/trace.hpp"

namespace retractor {

enum class StopReason { StepTol, ResidualTol, MaxIter };

/// Trace of a Krasnoselskii-Mann run z_{k+1} = (1-gamma) z_k + gamma S z_k.
/// Step and residual histories are kept in full; iterates only as a small
/// ring of the most recent ones (oldest first), enough to resume a run.
struct KMTrace {
  double gamma = 0.5;
  double step_tol = 0.0;
  std::vector<double> step_norms;
  std::vector<double> residuals;  // ||S z_k - z_k||, step = gamma * residual
  std::vector<Vec> recent;        // last <= 8 iterates, final included
  StopReason stop_reason = StopReason::MaxIter;
  long long iterations = 0;
};

struct KMResult {
  Vec point;
  KMTrace trace;
};

using SelfMapFn = std::function<void(const Vec&, Vec&)>;

/// Averaged iteration for a nonexpansive S. Stops when the step norm falls
/// to step_tol, when the residual falls to step_tol/gamma, or at max_iter.
/// With throw_on_timeout (the default) a MaxIter stop raises KmTimeoutError
/// carrying the full trace so the caller can decide whether to extend.
KMResult km_iterate(const SelfMapFn& S, const NormedSpace& space, const Vec& x0,
                    double gamma, double step_tol, long long max_iter,
                    TraceSink* trace = nullptr, int stage = 0,
                    bool throw_on_timeout = true);

class KmTimeoutError : public ConvergenceError {
 public:
  KmTimeoutError(const std::string& msg, KMResult partial)
      : ConvergenceError(msg,
                         partial.trace.residuals.empty()
                             ? 0.0
                             : partial.trace.residuals.back(),
                         partial.trace.iterations),
        partial_result(std::move(partial)) {}

  KMResult partial_result;
};

/// Post-run asymptotic-regularity report: step norms must be nonincreasing
/// up to 1e-10 slack, and a non-timeout run must end below step_tol. A
/// monotonicity violation points at the first offending index and signals a
/// non-nonexpansive S.
struct RegularityReport {
  bool monotone = true;
  long long first_violation = -1;
  double worst_gap = 0.0;  // largest increase between consecutive steps
  bool final_step_ok = true;
  std::vector<double> tail;  // last few step norms, for plotting
  bool pass() const { return monotone && final_step_ok; }
};

RegularityReport asymptotic_regularity_check(const KMTrace& trace);

}  // namespace retractor

#endif  // RETRACTOR_KM_HPP
