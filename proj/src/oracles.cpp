#include "retractor/oracles.hpp"

#include <cmath>

#include "retractor/errors.hpp"
#include "retractor/rng.hpp"

namespace retractor {

FixedPointOracle affine_fixed_point_oracle(const Matrix& a, const Vec& b) {
  if (a.rows != a.cols || static_cast<int>(b.size()) != a.rows)
    throw ContractViolation("fixed-point oracle needs a square system");
  const int d = a.rows;
  Matrix m = Matrix::identity(d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) m(i, j) -= a(i, j);

  const double cond = cond_inf(m);
  if (!(cond <= 1e12))
    throw OracleUnavailable(
        "I - A is singular or ill-conditioned (cond estimate " +
        std::to_string(cond) + ")");
  auto p = lu_solve(m, b);
  if (!p) throw OracleUnavailable("I - A is numerically singular");

  FixedPointOracle out;
  Vec mp = matvec(m, *p);
  double res = 0.0;
  for (int i = 0; i < d; ++i) res = std::max(res, std::fabs(mp[i] - b[i]));
  out.point = std::move(*p);
  out.residual = res;
  out.cond = cond;
  return out;
}

FixedPointOracle stacked_fixed_point_oracle(const std::vector<AffineForm>& forms) {
  if (forms.empty()) throw ContractViolation("stacked oracle needs maps");
  const int d = forms.front().linear.cols;
  // Normal equations of the stacked system rows (I - A_i) p = b_i.
  Matrix g(d, d);
  Vec rhs(static_cast<std::size_t>(d), 0.0);
  for (const auto& f : forms) {
    if (f.linear.rows != d || f.linear.cols != d ||
        static_cast<int>(f.offset.size()) != d)
      throw ContractViolation("stacked oracle: inconsistent dimensions");
    Matrix m = Matrix::identity(d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) m(i, j) -= f.linear(i, j);
    const Matrix mt = transpose(m);
    const Matrix mtm = matmul(mt, m);
    for (std::size_t k = 0; k < g.a.size(); ++k) g.a[k] += mtm.a[k];
    const Vec mtb = matvec(mt, f.offset);
    for (int i = 0; i < d; ++i) rhs[i] += mtb[i];
  }
  const double cond = cond_inf(g);
  if (!(cond <= 1e12))
    throw OracleUnavailable(
        "stacked system is rank-deficient or ill-conditioned (cond estimate " +
        std::to_string(cond) + ")");
  auto p = lu_solve(g, rhs);
  if (!p) throw OracleUnavailable("stacked system is numerically singular");

  FixedPointOracle out;
  out.point = std::move(*p);
  out.cond = cond;
  for (const auto& f : forms) {
    Vec fp = matvec(f.linear, out.point);
    for (int i = 0; i < d; ++i) {
      const double defect = out.point[i] - (fp[i] + f.offset[i]);
      out.residual = std::max(out.residual, std::fabs(defect));
    }
  }
  return out;
}

namespace {

std::vector<Vec> extreme_points(const ConvexBody& body) {
  std::vector<Vec> pts;
  const int d = body.space().dim;
  if (const auto* b = std::get_if<NormBall>(&body.shape())) {
    for (int i = 0; i < d; ++i) {
      Vec e(static_cast<std::size_t>(d), 0.0);
      e[i] = 1.0;
      const double unit = body.space().norm(e);
      if (unit <= 0.0) continue;
      Vec hi = b->center, lo = b->center;
      hi[i] += b->radius / unit;
      lo[i] -= b->radius / unit;
      pts.push_back(std::move(hi));
      pts.push_back(std::move(lo));
    }
  } else if (const auto* b = std::get_if<BoxShape>(&body.shape())) {
    const int corners = 1 << std::min(d, 16);
    for (int mask = 0; mask < corners; ++mask) {
      Vec p(static_cast<std::size_t>(d));
      for (int i = 0; i < d; ++i)
        p[i] = ((mask >> i) & 1) != 0 ? b->upper[i] : b->lower[i];
      pts.push_back(std::move(p));
    }
  } else if (const auto* s = std::get_if<SimplexShape>(&body.shape())) {
    for (int i = 0; i < d; ++i) {
      Vec v(static_cast<std::size_t>(d), 0.0);
      v[i] = s->scale;
      pts.push_back(std::move(v));
    }
  } else {
    pts = std::get<HullShape>(body.shape()).vertices;
  }
  return pts;
}

}  // namespace

double brute_force_diameter(const ConvexBody& body, int samples,
                            std::uint64_t seed) {
  auto pts = extreme_points(body);
  if (samples > 0) {
    auto sampled = body.sample_points(samples, seed);
    pts.insert(pts.end(), sampled.begin(), sampled.end());
  }
  double best = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i + 1; j < pts.size(); ++j)
      best = std::max(best, body.space().distance(pts[i], pts[j]));
  return best;
}

NormEstimate power_iteration_norm(const Matrix& a, double rel_tol,
                                  long long max_iter) {
  const int d = a.cols;
  const Matrix at = transpose(a);
  Rng rng(derive_seed(0x243f6a8885a308d3ULL, "oracle-power"));
  Vec v(static_cast<std::size_t>(d));
  for (double& t : v) t = rng.gaussian() + 0.1;
  double nv = 0.0;
  for (double t : v) nv += t * t;
  nv = std::sqrt(nv);
  if (nv < 1e-300) return NormEstimate{0.0, 0};
  for (double& t : v) t /= nv;

  NormEstimate est;
  double lambda_prev = -1.0;
  Vec av, w;
  for (long long k = 0; k < max_iter; ++k) {
    matvec_into(a, v, av);
    matvec_into(at, av, w);
    double nw = 0.0;
    for (double t : w) nw += t * t;
    nw = std::sqrt(nw);
    est.iterations = k + 1;
    if (nw < 1e-300) {
      est.value = 0.0;
      return est;
    }
    const double lambda = dot(v, w);
    for (std::size_t i = 0; i < w.size(); ++i) v[i] = w[i] / nw;
    if (std::fabs(lambda - lambda_prev) <=
        rel_tol * std::max(1.0, std::fabs(lambda))) {
      est.value = std::sqrt(std::max(lambda, 0.0));
      return est;
    }
    lambda_prev = lambda;
  }
  est.value = std::sqrt(std::max(lambda_prev, 0.0));
  return est;
}

SamplingCheck pairwise_lipschitz_sample(const CertifiedMap& map, long long pairs,
                                        std::uint64_t seed) {
  if (pairs < 1) throw ContractViolation("pairs must be >= 1");
  const auto& space = map.body().space();
  const auto pts = map.body().sample_points(static_cast<int>(2 * pairs),
                                            derive_seed(seed, "lip-pairs"));
  SamplingCheck check;
  Vec tx, ty;
  for (long long k = 0; k + 1 < static_cast<long long>(pts.size()); k += 2) {
    const Vec& x = pts[static_cast<std::size_t>(k)];
    const Vec& y = pts[static_cast<std::size_t>(k + 1)];
    const double dxy = space.distance(x, y);
    if (dxy < 1e-12) continue;
    map.eval_unchecked(x, tx);
    map.eval_unchecked(y, ty);
    const double ratio = space.distance(tx, ty) / dxy;
    ++check.pairs;
    if (ratio > check.max_ratio) {
      check.max_ratio = ratio;
      check.worst_x = x;
      check.worst_y = y;
    }
  }
  return check;
}

}  // namespace retractor
