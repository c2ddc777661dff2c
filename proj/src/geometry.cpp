#include "retractor/geometry.hpp"

#include <algorithm>
#include <cmath>

#include "retractor/errors.hpp"
#include "retractor/linalg.hpp"
#include "retractor/rng.hpp"

namespace retractor {

std::string norm_kind_name(NormKind kind) {
  switch (kind) {
    case NormKind::L1:
      return "l1";
    case NormKind::L2:
      return "l2";
    case NormKind::LInf:
      return "linf";
    case NormKind::WeightedL1:
      return "weighted_l1";
  }
  return "?";
}

void NormedSpace::require_dim(const Vec& v) const {
  if (static_cast<int>(v.size()) != dim)
    throw ContractViolation("vector length " + std::to_string(v.size()) +
                            " does not match space dimension " +
                            std::to_string(dim));
}

double NormedSpace::norm(const Vec& v) const {
  require_dim(v);
  switch (kind) {
    case NormKind::L1: {
      double s = 0.0;
      for (double t : v) s += std::fabs(t);
      return s;
    }
    case NormKind::L2: {
      double s = 0.0;
      for (double t : v) s += t * t;
      return std::sqrt(s);
    }
    case NormKind::LInf: {
      double m = 0.0;
      for (double t : v) m = std::max(m, std::fabs(t));
      return m;
    }
    case NormKind::WeightedL1: {
      double s = 0.0;
      for (int i = 0; i < dim; ++i) s += weights[i] * std::fabs(v[i]);
      return s;
    }
  }
  return 0.0;
}

double NormedSpace::distance(const Vec& a, const Vec& b) const {
  require_dim(a);
  require_dim(b);
  switch (kind) {
    case NormKind::L1: {
      double s = 0.0;
      for (int i = 0; i < dim; ++i) s += std::fabs(a[i] - b[i]);
      return s;
    }
    case NormKind::L2: {
      double s = 0.0;
      for (int i = 0; i < dim; ++i) {
        const double d = a[i] - b[i];
        s += d * d;
      }
      return std::sqrt(s);
    }
    case NormKind::LInf: {
      double m = 0.0;
      for (int i = 0; i < dim; ++i) m = std::max(m, std::fabs(a[i] - b[i]));
      return m;
    }
    case NormKind::WeightedL1: {
      double s = 0.0;
      for (int i = 0; i < dim; ++i) s += weights[i] * std::fabs(a[i] - b[i]);
      return s;
    }
  }
  return 0.0;
}

NormedSpace make_space(int dim, NormKind kind, Vec weights) {
  if (dim < 1) throw ContractViolation("space dimension must be >= 1");
  NormedSpace s;
  s.dim = dim;
  s.kind = kind;
  if (kind == NormKind::WeightedL1) {
    if (static_cast<int>(weights.size()) != dim)
      throw ContractViolation("weighted_l1 needs one weight per coordinate");
    for (double w : weights)
      if (!(w > 0.0)) throw ContractViolation("weights must be strictly positive");
    s.weights = std::move(weights);
  } else if (!weights.empty()) {
    throw ContractViolation("weights only apply to weighted_l1");
  }
  return s;
}

namespace {

double body_diameter(const NormedSpace& space, const ConvexBody::Shape& shape) {
  struct Visitor {
    const NormedSpace& space;

    double operator()(const NormBall& b) const { return 2.0 * b.radius; }

    double operator()(const BoxShape& b) const {
      Vec edges(b.lower.size());
      for (std::size_t i = 0; i < edges.size(); ++i)
        edges[i] = b.upper[i] - b.lower[i];
      return space.norm(edges);
    }

    double operator()(const SimplexShape& s) const {
      const int d = space.dim;
      if (d == 1) return 0.0;  // {x = scale} is a single point
      switch (space.kind) {
        case NormKind::L1:
          return 2.0 * s.scale;
        case NormKind::L2:
          return s.scale * std::sqrt(2.0);
        case NormKind::LInf:
          return s.scale;
        case NormKind::WeightedL1: {
          // Distance between scale*e_i and scale*e_j is scale*(w_i + w_j).
          double top1 = 0.0, top2 = 0.0;
          for (double w : space.weights) {
            if (w > top1) {
              top2 = top1;
              top1 = w;
            } else if (w > top2) {
              top2 = w;
            }
          }
          return s.scale * (top1 + top2);
        }
      }
      return 0.0;
    }

    double operator()(const HullShape& h) const {
      double best = 0.0;
      for (std::size_t i = 0; i < h.vertices.size(); ++i)
        for (std::size_t j = i + 1; j < h.vertices.size(); ++j)
          best = std::max(best, space.distance(h.vertices[i], h.vertices[j]));
      return best;
    }
  };
  return std::visit(Visitor{space}, shape);
}

/// Cholesky solve for the SPD normal equations, with a relative pivot
/// threshold so affinely dependent column sets are reported as singular
/// instead of producing wild solutions.
std::optional<Vec> spd_solve(Matrix g, Vec rhs) {
  const int n = g.rows;
  double max_diag = 0.0;
  for (int i = 0; i < n; ++i) max_diag = std::max(max_diag, g(i, i));
  const double pivot_floor = 1e-12 * std::max(max_diag, 1e-300);
  for (int j = 0; j < n; ++j) {
    double d = g(j, j);
    for (int k = 0; k < j; ++k) d -= g(j, k) * g(j, k);
    if (d < pivot_floor) return std::nullopt;
    const double l = std::sqrt(d);
    g(j, j) = l;
    for (int i = j + 1; i < n; ++i) {
      double v = g(i, j);
      for (int k = 0; k < j; ++k) v -= g(i, k) * g(j, k);
      g(i, j) = v / l;
    }
  }
  Vec y(static_cast<std::size_t>(n), 0.0);
  for (int i = 0; i < n; ++i) {
    double s = rhs[i];
    for (int k = 0; k < i; ++k) s -= g(i, k) * y[k];
    y[i] = s / g(i, i);
  }
  Vec x(static_cast<std::size_t>(n), 0.0);
  for (int i = n - 1; i >= 0; --i) {
    double s = y[i];
    for (int k = i + 1; k < n; ++k) s -= g(k, i) * x[k];
    x[i] = s / g(i, i);
  }
  return x;
}

/// Lawson-Hanson nonnegative least squares for min ||E*lam - f||, lam >= 0.
/// E is (rows x m) given column-major as a list of columns. Small and
/// deterministic.
Vec nnls(const std::vector<Vec>& columns, const Vec& f) {
  const int m = static_cast<int>(columns.size());
  const int rows = static_cast<int>(f.size());
  Vec lam(static_cast<std::size_t>(m), 0.0);
  std::vector<bool> passive(static_cast<std::size_t>(m), false);
  Vec residual = f;  // f - E*lam, starts at f since lam = 0

  double scale2 = 0.0;
  for (const auto& c : columns)
    for (double t : c) scale2 = std::max(scale2, t * t);
  const double grad_tol = 1e-12 * std::max(1.0, scale2);

  const int max_outer = 4 * m + 16;
  for (int outer = 0; outer < max_outer; ++outer) {
    int best_j = -1;
    double best_w = grad_tol;
    for (int j = 0; j < m; ++j) {
      if (passive[j]) continue;
      const double w = dot(columns[j], residual);
      if (w > best_w) {
        best_w = w;
        best_j = j;
      }
    }
    if (best_j < 0) break;
    passive[best_j] = true;

    for (int inner = 0; inner < 2 * m + 8; ++inner) {
      std::vector<int> idx;
      for (int j = 0; j < m; ++j)
        if (passive[j]) idx.push_back(j);
      const int k = static_cast<int>(idx.size());
      Matrix g(k, k);
      Vec rhs(static_cast<std::size_t>(k), 0.0);
      for (int a = 0; a < k; ++a) {
        rhs[a] = dot(columns[idx[a]], f);
        for (int b = a; b < k; ++b) {
          const double v = dot(columns[idx[a]], columns[idx[b]]);
          g(a, b) = v;
          g(b, a) = v;
        }
      }
      auto z = spd_solve(std::move(g), std::move(rhs));
      if (!z) {
        passive[idx.back()] = false;
        break;
      }
      bool all_positive = true;
      for (double t : *z)
        if (t <= 0.0) all_positive = false;
      if (all_positive) {
        for (double& t : lam) t = 0.0;
        for (int a = 0; a < k; ++a) lam[idx[a]] = (*z)[a];
        break;
      }
      double alpha = 1.0;
      for (int a = 0; a < k; ++a) {
        if ((*z)[a] <= 0.0) {
          const double cur = lam[idx[a]];
          const double denom = cur - (*z)[a];
          if (denom > 0.0) alpha = std::min(alpha, cur / denom);
        }
      }
      for (int a = 0; a < k; ++a) {
        const int j = idx[a];
        lam[j] += alpha * ((*z)[a] - lam[j]);
        if (lam[j] <= 1e-14) {
          lam[j] = 0.0;
          passive[j] = false;
        }
      }
    }

    residual = f;
    for (int j = 0; j < m; ++j) {
      if (lam[j] == 0.0) continue;
      for (int r = 0; r < rows; ++r) residual[r] -= lam[j] * columns[j][r];
    }
  }
  return lam;
}

}  // namespace

ConvexBody::ConvexBody(NormedSpace space, Shape shape)
    : space_(std::move(space)), shape_(std::move(shape)) {
  diam_ = body_diameter(space_, shape_);
}

ConvexBody ConvexBody::ball(NormedSpace space, Vec center, double radius) {
  space.require_dim(center);
  if (!(radius >= 0.0)) throw ContractViolation("ball radius must be >= 0");
  return ConvexBody(std::move(space), NormBall{std::move(center), radius});
}

ConvexBody ConvexBody::box(NormedSpace space, Vec lower, Vec upper) {
  space.require_dim(lower);
  space.require_dim(upper);
  for (std::size_t i = 0; i < lower.size(); ++i)
    if (!(lower[i] <= upper[i]))
      throw ContractViolation("box needs lower <= upper per coordinate");
  return ConvexBody(std::move(space), BoxShape{std::move(lower), std::move(upper)});
}

ConvexBody ConvexBody::simplex(NormedSpace space, double scale) {
  if (!(scale > 0.0)) throw ContractViolation("simplex scale must be > 0");
  return ConvexBody(std::move(space), SimplexShape{scale});
}

ConvexBody ConvexBody::hull(NormedSpace space, std::vector<Vec> vertices) {
  if (vertices.empty()) throw ContractViolation("hull needs at least one vertex");
  for (const auto& v : vertices) space.require_dim(v);
  return ConvexBody(std::move(space), HullShape{std::move(vertices)});
}

double ConvexBody::characteristic_scale() const {
  struct Visitor {
    double operator()(const NormBall& b) const {
      return std::max(1.0, norm_inf(b.center) + b.radius);
    }
    double operator()(const BoxShape& b) const {
      return std::max({1.0, norm_inf(b.lower), norm_inf(b.upper)});
    }
    double operator()(const SimplexShape& s) const {
      return std::max(1.0, s.scale);
    }
    double operator()(const HullShape& h) const {
      double m = 1.0;
      for (const auto& v : h.vertices) m = std::max(m, norm_inf(v));
      return m;
    }
  };
  return std::visit(Visitor{}, shape_);
}

bool ConvexBody::contains(const Vec& p, double tol) const {
  space_.require_dim(p);
  if (!(tol >= 0.0)) throw ContractViolation("membership tol must be >= 0");
  const double floor = 1e-12 * characteristic_scale();
  const double band = tol + floor;

  if (const auto* b = std::get_if<NormBall>(&shape_)) {
    return space_.distance(p, b->center) <= b->radius + band;
  }
  if (const auto* b = std::get_if<BoxShape>(&shape_)) {
    Vec defect(p.size(), 0.0);
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double below = b->lower[i] - p[i];
      const double above = p[i] - b->upper[i];
      defect[i] = std::max({below, above, 0.0});
    }
    return space_.norm(defect) <= band;
  }
  if (const auto* s = std::get_if<SimplexShape>(&shape_)) {
    double sum = 0.0;
    for (double t : p) {
      if (t < -band) return false;
      sum += t;
    }
    return std::fabs(sum - s->scale) <= band;
  }
  const auto& h = std::get<HullShape>(shape_);
  // Barycentric least squares: augment with a weighted sum row pinning
  // sum(lam) = 1, renormalize, and measure how far the realized convex
  // combination sits from p in the body norm. That distance upper-bounds
  // the true distance to the hull, so the test errs on the cautious side.
  // The solve floor is wider than for the closed-form shapes.
  const double big = 8.0 * characteristic_scale();
  const double hull_band = tol + std::max(floor, 1e-10 * characteristic_scale());
  const int d = space_.dim;
  std::vector<Vec> columns(h.vertices.size());
  for (std::size_t j = 0; j < h.vertices.size(); ++j) {
    columns[j] = h.vertices[j];
    columns[j].push_back(big);
  }
  Vec f = p;
  f.push_back(big);
  Vec lam = nnls(columns, f);
  double total = 0.0;
  for (double t : lam) total += t;
  if (total <= 1e-9) return false;
  Vec q(static_cast<std::size_t>(d), 0.0);
  for (std::size_t j = 0; j < h.vertices.size(); ++j) {
    const double w = lam[j] / total;
    if (w == 0.0) continue;
    for (int i = 0; i < d; ++i) q[i] += w * h.vertices[j][i];
  }
  return space_.distance(p, q) <= hull_band;
}

Vec ConvexBody::center() const {
  const int d = space_.dim;
  struct Visitor {
    int d;
    Vec operator()(const NormBall& b) const { return b.center; }
    Vec operator()(const BoxShape& b) const {
      Vec c(b.lower.size());
      for (std::size_t i = 0; i < c.size(); ++i)
        c[i] = 0.5 * (b.lower[i] + b.upper[i]);
      return c;
    }
    Vec operator()(const SimplexShape& s) const {
      return Vec(static_cast<std::size_t>(d), s.scale / d);
    }
    Vec operator()(const HullShape& h) const {
      Vec c(static_cast<std::size_t>(d), 0.0);
      for (const auto& v : h.vertices)
        for (int i = 0; i < d; ++i) c[i] += v[i];
      for (double& t : c) t /= static_cast<double>(h.vertices.size());
      return c;
    }
  };
  return std::visit(Visitor{d}, shape_);
}

std::vector<Vec> ConvexBody::sample_points(int count, std::uint64_t seed) const {
  if (count < 1) throw ContractViolation("sample count must be >= 1");
  std::vector<Vec> out;
  out.reserve(static_cast<std::size_t>(count));
  out.push_back(center());
  Rng rng(derive_seed(seed, "body-samples"));
  const int d = space_.dim;

  while (static_cast<int>(out.size()) < count) {
    if (const auto* b = std::get_if<NormBall>(&shape_)) {
      Vec g(static_cast<std::size_t>(d));
      double t = 0.0;
      do {
        for (double& x : g) x = rng.gaussian();
        t = space_.norm(g);
      } while (t < 1e-12);
      const double s =
          (1.0 - 1e-9) * std::pow(rng.uniform(), 1.0 / d) * b->radius / t;
      Vec p(b->center);
      for (int i = 0; i < d; ++i) p[i] += s * g[i];
      out.push_back(std::move(p));
    } else if (const auto* b = std::get_if<BoxShape>(&shape_)) {
      Vec p(static_cast<std::size_t>(d));
      for (int i = 0; i < d; ++i) p[i] = rng.uniform(b->lower[i], b->upper[i]);
      out.push_back(std::move(p));
    } else if (const auto* s = std::get_if<SimplexShape>(&shape_)) {
      Vec e(static_cast<std::size_t>(d));
      double sum = 0.0;
      for (double& x : e) {
        x = rng.exponential();
        sum += x;
      }
      Vec p(static_cast<std::size_t>(d));
      for (int i = 0; i < d; ++i) p[i] = s->scale * e[i] / sum;
      out.push_back(std::move(p));
    } else {
      const auto& h = std::get<HullShape>(shape_);
      Vec w(h.vertices.size());
      double sum = 0.0;
      for (double& x : w) {
        x = rng.exponential();
        sum += x;
      }
      Vec p(static_cast<std::size_t>(d), 0.0);
      for (std::size_t j = 0; j < h.vertices.size(); ++j) {
        const double f = w[j] / sum;
        for (int i = 0; i < d; ++i) p[i] += f * h.vertices[j][i];
      }
      out.push_back(std::move(p));
    }
  }
  return out;
}

}  // namespace retractor
