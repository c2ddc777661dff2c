#include "retractor/km.hpp"

#include <algorithm>
#include <string>

namespace retractor {

KMResult km_iterate(const SelfMapFn& S, const NormedSpace& space, const Vec& x0,
                    double gamma, double step_tol, long long max_iter,
                    TraceSink* trace, int stage, bool throw_on_timeout) {
  if (!(gamma > 0.0 && gamma < 1.0))
    throw ContractViolation("gamma must lie in (0, 1)");
  if (!(step_tol > 0.0)) throw ContractViolation("step_tol must be positive");
  if (max_iter < 1) throw ContractViolation("max_iter must be >= 1");
  space.require_dim(x0);

  KMResult result;
  KMTrace& tr = result.trace;
  tr.gamma = gamma;
  tr.step_tol = step_tol;
  tr.stop_reason = StopReason::MaxIter;

  Vec cur = x0;
  Vec sz(x0.size());
  Vec next(x0.size());
  const std::size_t ring = 8;

  for (long long k = 0; k < max_iter; ++k) {
    S(cur, sz);
    const double residual = space.distance(sz, cur);
    axpby_into(1.0 - gamma, cur, gamma, sz, next);
    const double step = space.distance(next, cur);
    tr.step_norms.push_back(step);
    tr.residuals.push_back(residual);
    tr.iterations = k + 1;
    if (trace != nullptr) trace->add(stage, k + 1, step, residual);

    std::swap(cur, next);
    if (tr.recent.size() == ring) tr.recent.erase(tr.recent.begin());
    tr.recent.push_back(cur);

    if (step <= step_tol) {
      tr.stop_reason = StopReason::StepTol;
      break;
    }
    if (residual <= step_tol / gamma) {
      tr.stop_reason = StopReason::ResidualTol;
      break;
    }
  }

  result.point = std::move(cur);
  if (tr.stop_reason == StopReason::MaxIter && throw_on_timeout) {
    KMResult partial = result;
    throw KmTimeoutError(
        "averaged iteration did not become asymptotically regular within " +
            std::to_string(max_iter) + " iterations (last step " +
            std::to_string(tr.step_norms.empty() ? 0.0 : tr.step_norms.back()) +
            ")",
        std::move(partial));
  }
  return result;
}

RegularityReport asymptotic_regularity_check(const KMTrace& trace) {
  if (trace.step_norms.empty())
    throw ContractViolation("regularity check needs a nonempty trace");
  RegularityReport report;
  const double slack = 1e-10;
  for (std::size_t k = 0; k + 1 < trace.step_norms.size(); ++k) {
    const double gap = trace.step_norms[k + 1] - trace.step_norms[k];
    if (gap > slack) {
      report.monotone = false;
      if (report.first_violation < 0)
        report.first_violation = static_cast<long long>(k);
      report.worst_gap = std::max(report.worst_gap, gap);
    }
  }
  if (trace.stop_reason != StopReason::MaxIter)
    report.final_step_ok = trace.step_norms.back() <= trace.step_tol;
  const std::size_t tail_len = std::min<std::size_t>(16, trace.step_norms.size());
  report.tail.assign(trace.step_norms.end() - static_cast<long>(tail_len),
                     trace.step_norms.end());
  return report;
}

}  // namespace retractor
