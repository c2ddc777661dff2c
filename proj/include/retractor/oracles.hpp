#ifndef RETRACTOR_ORACLES_HPP
#define RETRACTOR_ORACLES_HPP

#include <cstdint>

#include "retractor/maps.hpp"

namespace retractor {

// Independent check routines. These share only the geometry primitives with
// the solver paths they audit: no contraction or averaging loop from the
// solver modules appears here.

struct FixedPointOracle {
  Vec point;
  double residual = 0.0;  // back-substitution residual, infinity norm
  double cond = 0.0;      // infinity-norm condition estimate of the system
};

/// Solves (I - A) p = b by elimination with partial pivoting. Throws
/// OracleUnavailable when I - A is singular or its condition estimate
/// exceeds 1e12; dependent checks must then be skipped, not passed.
FixedPointOracle affine_fixed_point_oracle(const Matrix& a, const Vec& b);

/// Common fixed point of several affine maps: stacks (I - A_i) p = b_i and
/// solves the normal equations. The residual reported is the worst
/// per-equation defect, so an inconsistent or underdetermined family is
/// detected. Same rejection rule as above.
FixedPointOracle stacked_fixed_point_oracle(const std::vector<AffineForm>& forms);

/// Sampled lower bound for the diameter: max pairwise distance over sampled
/// member points plus the shape's extreme points.
double brute_force_diameter(const ConvexBody& body, int samples,
                            std::uint64_t seed);

struct NormEstimate {
  double value = 0.0;
  long long iterations = 0;
};

/// Induced L2 norm by power iteration on A^T A; written independently of
/// the certification path in the maps module.
NormEstimate power_iteration_norm(const Matrix& a, double rel_tol = 1e-12,
                                  long long max_iter = 500000);

struct SamplingCheck {
  double max_ratio = 0.0;
  Vec worst_x;
  Vec worst_y;
  long long pairs = 0;
};

/// Worst observed expansion ratio of a map over sampled pairs.
SamplingCheck pairwise_lipschitz_sample(const CertifiedMap& map, long long pairs,
                                        std::uint64_t seed);

}  // namespace retractor

#endif  // RETRACTOR_ORACLES_HPP
