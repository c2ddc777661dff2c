#ifndef RETRACTOR_RESOLVENT_HPP
#define RETRACTOR_RESOLVENT_HPP

#include <functional>

#include "retractor/maps.hpp"
#include "retractor/trace.hpp"

namespace retractor {

/// Record of one contraction solve.
struct ContractionSolve {
  double q = 0.0;       // contraction modulus, < 1
  double tol = 0.0;     // requested fixed-point residual
  long long max_iter = 0;
  long long iterations_used = 0;  // applications of f inside the loop
  double residual = 0.0;          // measured ||f(z) - z|| at the returned z
  double first_step = 0.0;        // ||z_1 - z_0||, input to the a-priori bound
};

struct BanachResult {
  Vec point;
  ContractionSolve stats;
};

using BufferedMap = std::function<void(const Vec&, Vec&)>;

/// Clamp a real iteration/index budget into [1, 4e18] before integer
/// conversion; spec files are user input and may carry absurd tolerances.
inline long long clamped_index(double value) {
  if (!(value >= 1.0)) return 1;
  if (value >= 4e18) return 4'000'000'000'000'000'000LL;
  return static_cast<long long>(value);
}

/// Picard iteration z_{k+1} = f(z_k) for a contraction with modulus q < 1,
/// stopping once the step norm drops to tol*(1-q); the a-posteriori bound
/// then puts the returned point's fixed-point residual below tol (and we
/// measure it with one extra evaluation). Throws ConvergenceError past
/// max_iter, which for a true modulus q signals a bad certificate.
BanachResult banach_solve(const BufferedMap& f, const NormedSpace& space,
                          const Vec& z0, double q, double tol,
                          long long max_iter, TraceSink* trace = nullptr,
                          int stage = 0);

/// Result of one resolvent evaluation at accuracy index n.
struct ResolventResult {
  long long n = 0;
  Vec point;             // approximately the solution of z = x/n + (1-1/n)Tz
  double residual_T = 0.0;  // ||T(point) - point||
  ContractionSolve inner;
};

/// Solves z = (1/n) x + (1 - 1/n) T z by contraction iteration started at
/// z0 = x (modulus 1 - 1/n). The output satisfies
/// ||T z - z|| <= diam(C)/n + 2*inner_tol. Requires a Proved or Sampled
/// certificate unless allow_unchecked is set.
ResolventResult resolve(const CertifiedMap& map, const Vec& x, long long n,
                        double inner_tol, TraceSink* trace = nullptr,
                        int stage = 1, bool allow_unchecked = false);

}  // namespace retractor

#endif  // RETRACTOR_RESOLVENT_HPP
