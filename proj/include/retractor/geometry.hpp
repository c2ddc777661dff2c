#ifndef RETRACTOR_GEOMETRY_HPP
#define RETRACTOR_GEOMETRY_HPP

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "retractor/vec.hpp"

namespace retractor {

enum class NormKind { L1, L2, LInf, WeightedL1 };

std::string norm_kind_name(NormKind kind);

/// Finite-dimensional normed space: a dimension plus a norm selector.
/// All distances in the project flow through this type.
struct NormedSpace {
  int dim = 0;
  NormKind kind = NormKind::L2;
  Vec weights;  // WeightedL1 only; strictly positive, length dim

  double norm(const Vec& v) const;
  double distance(const Vec& a, const Vec& b) const;
  void require_dim(const Vec& v) const;  // throws ContractViolation
};

/// Validates dim >= 1 and, for WeightedL1, positive weights of length dim.
NormedSpace make_space(int dim, NormKind kind, Vec weights = {});

struct NormBall {
  Vec center;
  double radius = 1.0;
};

struct BoxShape {
  Vec lower;
  Vec upper;
};

/// Standard simplex {x >= 0, sum x_i = scale}.
struct SimplexShape {
  double scale = 1.0;
};

struct HullShape {
  std::vector<Vec> vertices;
};

/// Compact convex body in a NormedSpace. Immutable after construction; the
/// diameter is computed once (closed form for ball/box/simplex under the
/// space norm, max pairwise vertex distance for hulls).
class ConvexBody {
 public:
  using Shape = std::variant<NormBall, BoxShape, SimplexShape, HullShape>;

  static ConvexBody ball(NormedSpace space, Vec center, double radius);
  static ConvexBody box(NormedSpace space, Vec lower, Vec upper);
  static ConvexBody simplex(NormedSpace space, double scale);
  static ConvexBody hull(NormedSpace space, std::vector<Vec> vertices);

  const NormedSpace& space() const { return space_; }
  const Shape& shape() const { return shape_; }
  double diameter() const { return diam_; }

  /// True iff p lies within distance tol of the body. Ball and box use the
  /// exact norm distance. Simplex checks its defining constraints with the
  /// tol band; hull solves a nonnegative barycentric least-squares problem
  /// and compares the realized combination against p (an upper bound on the
  /// true distance, so the test errs on the cautious side). All variants add
  /// a small relative floating-point floor so that exact boundary points
  /// pass at tol = 0.
  bool contains(const Vec& p, double tol) const;

  /// Ball center, box midpoint, simplex/hull centroid.
  Vec center() const;

  /// Deterministic member points; the first is always center(). Every point
  /// satisfies contains(p, 0).
  std::vector<Vec> sample_points(int count, std::uint64_t seed) const;

 private:
  ConvexBody(NormedSpace space, Shape shape);

  double characteristic_scale() const;

  NormedSpace space_;
  Shape shape_;
  double diam_ = 0.0;
};

}  // namespace retractor

#endif  // RETRACTOR_GEOMETRY_HPP
