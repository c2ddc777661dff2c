#include "retractor/resolvent.hpp"

#include <cmath>
#include <string>

#include "retractor/errors.hpp"

namespace retractor {

BanachResult banach_solve(const BufferedMap& f, const NormedSpace& space,
                          const Vec& z0, double q, double tol,
                          long long max_iter, TraceSink* trace, int stage) {
  if (!(q >= 0.0 && q < 1.0))
    throw ContractViolation("contraction modulus must lie in [0, 1)");
  if (!(tol > 0.0)) throw ContractViolation("tolerance must be positive");
  if (max_iter < 1) throw ContractViolation("max_iter must be >= 1");

  const double threshold = tol * (1.0 - q);
  Vec cur = z0;
  Vec next(z0.size());
  long long iters = 0;
  double step = 0.0;
  double first_step = 0.0;
  for (;;) {
    if (iters >= max_iter)
      throw ConvergenceError(
          "contraction solve did not reach tolerance " + std::to_string(tol) +
              " within " + std::to_string(max_iter) +
              " iterations (last step " + std::to_string(step) + ")",
          step, iters);
    f(cur, next);
    ++iters;
    step = space.distance(next, cur);
    if (iters == 1) first_step = step;
    // Long solves are subsampled so traces stay a sane size.
    if (trace != nullptr && (iters <= 64 || iters % 64 == 0 || step <= threshold))
      trace->add(stage, iters, step, step);
    if (step <= threshold) break;
    std::swap(cur, next);
  }

  // One verification pass: report the actual residual at the returned point.
  Vec probe(next.size());
  f(next, probe);
  const double residual = space.distance(probe, next);

  BanachResult result;
  result.point = std::move(next);
  result.stats = ContractionSolve{q, tol, max_iter, iters, residual, first_step};
  return result;
}

ResolventResult resolve(const CertifiedMap& map, const Vec& x, long long n,
                        double inner_tol, TraceSink* trace, int stage,
                        bool allow_unchecked) {
  if (n < 1) throw ContractViolation("resolvent index n must be >= 1");
  if (!(inner_tol > 0.0)) throw ContractViolation("inner_tol must be positive");
  if (!allow_unchecked && map.certificate().kind == CertKind::Unchecked)
    throw CertificationError(
        "map '" + map.name() +
            "' has no nonexpansiveness certificate; certify it first",
        map.name());
  const ConvexBody& body = map.body();
  const NormedSpace& space = body.space();
  space.require_dim(x);
  if (!body.contains(x, 1e-6))
    throw DomainError("resolvent anchor lies outside the body");

  const double alpha = 1.0 / static_cast<double>(n);
  const double q = 1.0 - alpha;

  Vec tz(x.size());
  const auto f = [&](const Vec& z, Vec& out) {
    map.eval_unchecked(z, tz);
    axpby_into(alpha, x, q, tz, out);
  };

  // The modulus-q a-priori bound caps the iteration count at roughly
  // n * log(step0 * n / inner_tol); maps with contractive directions
  // converge much faster than that.
  const long long max_iter = clamped_index(
      64.0 + 8.0 * std::ceil(static_cast<double>(n) *
                             std::max(1.0, std::log(std::max(
                                               2.0, body.diameter() *
                                                        static_cast<double>(n) /
                                                        inner_tol)))));
  BanachResult inner = banach_solve(f, space, x, q, inner_tol, max_iter, trace, stage);

  ResolventResult result;
  result.n = n;
  map.eval_unchecked(inner.point, tz);
  result.residual_T = space.distance(tz, inner.point);
  result.point = std::move(inner.point);
  result.inner = inner.stats;
  if (!body.contains(result.point, 1e-6))
    throw SelfMapViolation("resolvent of map '" + map.name() +
                           "' left the body");
  return result;
}

}  // namespace retractor
