#include "retractor/suite.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "retractor/oracles.hpp"
#include "retractor/rng.hpp"

namespace retractor {

namespace {

using Status = AuditResult::Status;

AuditResult pass(const std::string& name, double margin, std::string detail = {}) {
  return AuditResult{name, Status::Pass, margin, std::move(detail)};
}
AuditResult fail(const std::string& name, double margin, std::string detail) {
  return AuditResult{name, Status::Fail, margin, std::move(detail)};
}
AuditResult skipped(const std::string& name, std::string detail) {
  return AuditResult{name, Status::Skipped, 0.0, std::move(detail)};
}

bool bitwise_equal(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] != b[i]) return false;
  return true;
}

/// ||v||_space <= c_up * ||v||_inf and ||v||_inf <= c_down * ||v||_space.
std::pair<double, double> inf_norm_equivalence(const NormedSpace& space) {
  switch (space.kind) {
    case NormKind::L1:
      return {static_cast<double>(space.dim), 1.0};
    case NormKind::L2:
      return {std::sqrt(static_cast<double>(space.dim)), 1.0};
    case NormKind::LInf:
      return {1.0, 1.0};
    case NormKind::WeightedL1: {
      double sum = 0.0, wmin = space.weights[0];
      for (double w : space.weights) {
        sum += w;
        wmin = std::min(wmin, w);
      }
      return {sum, 1.0 / wmin};
    }
  }
  return {1.0, 1.0};
}

double resolvent_tol(const AuditContext& ctx) {
  const auto& s = ctx.problem.spec.solver;
  return s.inner_tol > 0.0 ? s.inner_tol : std::max(1e-8, s.eps / 10.0);
}

// ---------------------------------------------------------------------------
// geometry

AuditResult audit_convexity(AuditContext& ctx) {
  const auto& body = *ctx.problem.body;
  const auto pts = body.sample_points(2000, derive_seed(ctx.seed, "convexity"));
  Rng rng(derive_seed(ctx.seed, "convexity-lambda"));
  long long failures = 0;
  for (std::size_t k = 0; k + 1 < pts.size(); k += 2) {
    const Vec m = lerp(pts[k], pts[k + 1], rng.uniform());
    if (!body.contains(m, 1e-9)) ++failures;
  }
  if (failures > 0)
    return fail("geometry.convexity", -static_cast<double>(failures),
                std::to_string(failures) + " convex combinations left the body");
  return pass("geometry.convexity", 0.0, "1000 combinations inside");
}

AuditResult audit_diameter_bound(AuditContext& ctx) {
  const auto& body = *ctx.problem.body;
  const auto pts = body.sample_points(2000, derive_seed(ctx.seed, "diameter"));
  double worst = 0.0;
  for (std::size_t k = 0; k + 1 < pts.size(); k += 2)
    worst = std::max(worst, body.space().distance(pts[k], pts[k + 1]));
  const double margin = body.diameter() + 1e-9 - worst;
  if (margin < 0.0)
    return fail("geometry.diameter_bound", margin,
                "sampled distance exceeds the diameter");
  return pass("geometry.diameter_bound", margin);
}

AuditResult audit_norm_axioms(AuditContext& ctx) {
  const auto& space = ctx.problem.body->space();
  const auto pts =
      ctx.problem.body->sample_points(600, derive_seed(ctx.seed, "axioms"));
  Rng rng(derive_seed(ctx.seed, "axioms-scalars"));
  double worst = 0.0;  // relative violation
  const Vec zero(static_cast<std::size_t>(space.dim), 0.0);
  if (space.norm(zero) != 0.0)
    return fail("geometry.norm_axioms", -1.0, "norm of zero is nonzero");
  for (std::size_t k = 0; k + 2 < pts.size(); k += 3) {
    const Vec a = sub(pts[k], pts[k + 1]);
    const Vec b = sub(pts[k + 1], pts[k + 2]);
    const double na = space.norm(a), nb = space.norm(b);
    if (na < 0.0 || nb < 0.0)
      return fail("geometry.norm_axioms", -1.0, "negative norm");
    const double scale = std::max(1e-30, na + nb);
    worst = std::max(worst, (space.norm(add(a, b)) - (na + nb)) / scale);
    const double s = rng.uniform(-2.0, 2.0);
    const double hom =
        std::fabs(space.norm(scaled(a, s)) - std::fabs(s) * na) /
        std::max(1e-30, std::fabs(s) * na);
    if (na > 1e-12) worst = std::max(worst, hom);
  }
  const double margin = 1e-12 - worst;
  if (margin < 0.0)
    return fail("geometry.norm_axioms", margin,
                "triangle/homogeneity violated beyond 1e-12");
  return pass("geometry.norm_axioms", margin);
}

// ---------------------------------------------------------------------------
// maps

AuditResult audit_proved_lipschitz(AuditContext& ctx) {
  const auto& space = ctx.problem.body->space();
  const auto pts =
      ctx.problem.body->sample_points(20000, derive_seed(ctx.seed, "lip"));
  double worst = -1e300;
  bool any = false;
  Vec tx, ty;
  for (const auto& map : ctx.family.maps()) {
    if (map.certificate().kind != CertKind::Proved) continue;
    any = true;
    const double lip = map.certificate().lipschitz;
    for (std::size_t k = 0; k + 1 < pts.size(); k += 2) {
      map.eval_unchecked(pts[k], tx);
      map.eval_unchecked(pts[k + 1], ty);
      const double violation =
          space.distance(tx, ty) - lip * space.distance(pts[k], pts[k + 1]);
      worst = std::max(worst, violation);
    }
  }
  if (!any) return skipped("maps.proved_lipschitz", "no Proved map in family");
  const double margin = 1e-9 - worst;
  if (margin < 0.0)
    return fail("maps.proved_lipschitz", margin,
                "a Proved map exceeded its certified constant");
  return pass("maps.proved_lipschitz", margin);
}

AuditResult audit_composite_product(AuditContext& ctx) {
  const auto& maps = ctx.family.maps();
  const auto& first = maps.front();
  const auto& last = maps.back();
  if (first.certificate().kind != CertKind::Proved ||
      last.certificate().kind != CertKind::Proved)
    return skipped("maps.composite_product", "needs two Proved maps");
  CertifiedMap::Composite comp;
  comp.parts.push_back(first);
  comp.parts.push_back(last);
  const CertifiedMap composite("audit_composite", ctx.problem.body,
                               std::move(comp));
  Certificate cert;
  try {
    cert = certify_nonexpansive(composite, 200, derive_seed(ctx.seed, "comp"));
  } catch (const CertificationError& e) {
    return fail("maps.composite_product", -1.0,
                std::string("composite rejected: ") + e.what());
  }
  const double product =
      first.certificate().lipschitz * last.certificate().lipschitz;
  const double value =
      cert.kind == CertKind::Proved ? cert.lipschitz : cert.max_ratio;
  const double margin = product + 1e-9 - value;
  if (margin < 0.0)
    return fail("maps.composite_product", margin,
                "composite certificate exceeds the factor product");
  return pass("maps.composite_product", margin);
}

AuditResult audit_affine_commute_defect(AuditContext& ctx) {
  if (ctx.family.certificate().kind != CommutingCert::Kind::ProvedAffine)
    return skipped("maps.affine_commute_defect", "family is not ProvedAffine");
  const auto& maps = ctx.family.maps();
  const auto& space = ctx.problem.body->space();
  const auto pts =
      ctx.problem.body->sample_points(100, derive_seed(ctx.seed, "acd"));
  double worst = 0.0;
  Vec t1, t2, u1, u2;
  for (std::size_t i = 0; i < maps.size(); ++i) {
    for (std::size_t j = i + 1; j < maps.size(); ++j) {
      for (const auto& x : pts) {
        maps[i].eval_unchecked(x, t1);
        maps[j].eval_unchecked(t1, u1);
        maps[j].eval_unchecked(x, t2);
        maps[i].eval_unchecked(t2, u2);
        worst = std::max(worst, space.distance(u1, u2));
      }
    }
  }
  const double margin = 1e-12 - worst;
  if (margin < 0.0)
    return fail("maps.affine_commute_defect", margin,
                "sampled commutator defect above 1e-12");
  return pass("maps.affine_commute_defect", margin);
}

AuditResult audit_eval_determinism(AuditContext& ctx) {
  const auto pts =
      ctx.problem.body->sample_points(10, derive_seed(ctx.seed, "det"));
  Vec a, b;
  for (const auto& map : ctx.family.maps()) {
    for (const auto& x : pts) {
      map.eval_unchecked(x, a);
      map.eval_unchecked(x, b);
      if (!bitwise_equal(a, b))
        return fail("maps.eval_determinism", -1.0,
                    "map '" + map.name() + "' is not bitwise deterministic");
    }
  }
  return pass("maps.eval_determinism", 0.0);
}

// ---------------------------------------------------------------------------
// resolvent

AuditResult audit_resolvent_residual_bound(AuditContext& ctx) {
  if (ctx.allow_unchecked)
    return skipped("resolvent.residual_bound", "uncertified instance");
  const auto& body = *ctx.problem.body;
  const double tol = resolvent_tol(ctx);
  const auto pts = body.sample_points(100, derive_seed(ctx.seed, "rrb"));
  double margin = 1e300;
  for (const auto& map : ctx.family.maps()) {
    for (long long n : {10, 100}) {
      const double bound = body.diameter() / static_cast<double>(n) + 2.0 * tol;
      for (const auto& x : pts) {
        const auto r = resolve(map, x, n, tol);
        margin = std::min(margin, bound - r.residual_T);
      }
    }
  }
  if (margin < 0.0)
    return fail("resolvent.residual_bound", margin,
                "residual exceeded diam/n + 2 tol");
  return pass("resolvent.residual_bound", margin);
}

AuditResult audit_resolvent_nonexpansive(AuditContext& ctx) {
  if (ctx.allow_unchecked)
    return skipped("resolvent.nonexpansive", "uncertified instance");
  const auto& body = *ctx.problem.body;
  const auto& space = body.space();
  const double tol = resolvent_tol(ctx);
  const long long n = 50;
  const auto pts = body.sample_points(200, derive_seed(ctx.seed, "rnx"));
  double margin = 1e300;
  for (const auto& map : ctx.family.maps()) {
    for (std::size_t k = 0; k + 1 < pts.size(); k += 2) {
      const auto fx = resolve(map, pts[k], n, tol);
      const auto fy = resolve(map, pts[k + 1], n, tol);
      const double slack = space.distance(pts[k], pts[k + 1]) + 4.0 * tol -
                           space.distance(fx.point, fy.point);
      margin = std::min(margin, slack);
    }
  }
  if (margin < 0.0)
    return fail("resolvent.nonexpansive", margin,
                "resolvent expanded a pair beyond the 4 tol slack");
  return pass("resolvent.nonexpansive", margin);
}

AuditResult audit_resolvent_residual_identity(AuditContext& ctx) {
  if (ctx.allow_unchecked)
    return skipped("resolvent.residual_identity", "uncertified instance");
  const auto& body = *ctx.problem.body;
  const auto& space = body.space();
  const double tol = resolvent_tol(ctx);
  const long long n = 25;
  const auto pts = body.sample_points(50, derive_seed(ctx.seed, "rid"));
  double margin = 1e300;
  Vec tz;
  for (const auto& map : ctx.family.maps()) {
    for (const auto& x : pts) {
      const auto r = resolve(map, x, n, tol);
      map.eval_unchecked(r.point, tz);
      const double lhs = r.residual_T;
      const double rhs = space.distance(tz, x) / static_cast<double>(n);
      margin = std::min(margin, 4.0 * tol - std::fabs(lhs - rhs));
    }
  }
  if (margin < 0.0)
    return fail("resolvent.residual_identity", margin,
                "residual identity violated beyond 4 tol");
  return pass("resolvent.residual_identity", margin);
}

AuditResult audit_banach_apriori(AuditContext& ctx) {
  if (ctx.allow_unchecked)
    return skipped("resolvent.banach_apriori", "uncertified instance");
  const auto& body = *ctx.problem.body;
  const double tol = resolvent_tol(ctx);
  const long long n = 37;
  const auto pts = body.sample_points(20, derive_seed(ctx.seed, "apriori"));
  double margin = 1e300;
  for (const auto& map : ctx.family.maps()) {
    for (const auto& x : pts) {
      const auto r = resolve(map, x, n, tol);
      const auto& st = r.inner;
      if (st.first_step <= 0.0) continue;
      const double threshold = st.tol * (1.0 - st.q);
      long long bound = 1;
      if (st.first_step > threshold)
        bound = static_cast<long long>(
                    std::ceil(std::log(threshold / st.first_step) /
                              std::log(st.q))) +
                1;
      margin = std::min(margin, static_cast<double>(bound - st.iterations_used));
    }
  }
  if (margin < 0.0)
    return fail("resolvent.banach_apriori", margin,
                "iteration count exceeded the a-priori bound");
  return pass("resolvent.banach_apriori", margin);
}

AuditResult audit_resolvent_affine_oracle(AuditContext& ctx) {
  if (ctx.allow_unchecked)
    return skipped("resolvent.affine_oracle", "uncertified instance");
  const auto& body = *ctx.problem.body;
  const auto& space = body.space();
  const double eps_a = 1e-3;
  const auto pts = body.sample_points(5, derive_seed(ctx.seed, "rao"));
  const auto [c_up, c_down] = inf_norm_equivalence(space);
  double margin = 1e300;
  bool any = false;
  for (const auto& map : ctx.family.maps()) {
    const auto form = map.affine_form();
    if (!form) continue;
    FixedPointOracle oracle;
    try {
      oracle = affine_fixed_point_oracle(form->linear, form->offset);
    } catch (const OracleUnavailable&) {
      continue;  // no unique fixed point to compare against
    }
    if (!body.contains(oracle.point, 1e-6)) continue;
    any = true;
    double m_norm_inf = 0.0;
    for (int i = 0; i < form->linear.rows; ++i) {
      double row = 0.0;
      for (int j = 0; j < form->linear.cols; ++j)
        row += std::fabs((i == j ? 1.0 : 0.0) - form->linear(i, j));
      m_norm_inf = std::max(m_norm_inf, row);
    }
    const double inv_norm = oracle.cond / std::max(m_norm_inf, 1e-300);
    const auto proc = single_retraction(map, eps_a);
    const double bound =
        c_up * c_down * inv_norm * (eps_a + 2.0 * eps_a / 10.0) + 1e-12;
    for (const auto& x : pts) {
      const Vec y = proc.apply(x).first;
      margin = std::min(margin, bound - space.distance(y, oracle.point));
    }
  }
  if (!any)
    return skipped("resolvent.affine_oracle",
                   "no affine map with a unique in-body fixed point");
  if (margin < 0.0)
    return fail("resolvent.affine_oracle", margin,
                "retraction output disagrees with the linear solve");
  return pass("resolvent.affine_oracle", margin);
}

// ---------------------------------------------------------------------------
// km

AuditResult audit_km_fejer(AuditContext& ctx) {
  const auto& body = *ctx.problem.body;
  const auto& space = body.space();
  const double gamma = ctx.problem.spec.solver.gamma;
  const auto pts = body.sample_points(3, derive_seed(ctx.seed, "fejer"));
  double margin = 1e300;
  bool any = false;
  Vec sz, next;
  for (const auto& map : ctx.family.maps()) {
    const auto form = map.affine_form();
    if (!form) continue;
    FixedPointOracle oracle;
    try {
      oracle = affine_fixed_point_oracle(form->linear, form->offset);
    } catch (const OracleUnavailable&) {
      continue;
    }
    if (!body.contains(oracle.point, 1e-6)) continue;
    any = true;
    for (const auto& x : pts) {
      Vec z = x;
      double dist_prev = space.distance(z, oracle.point);
      for (int k = 0; k < 500; ++k) {
        map.eval_unchecked(z, sz);
        axpby_into(1.0 - gamma, z, gamma, sz, next);
        std::swap(z, next);
        const double dist = space.distance(z, oracle.point);
        margin = std::min(margin, dist_prev + 1e-10 - dist);
        if (space.distance(z, next) < 1e-14) break;
        dist_prev = dist;
      }
    }
  }
  if (!any)
    return skipped("km.fejer_monotonicity",
                   "no affine map with a unique in-body fixed point");
  if (margin < 0.0)
    return fail("km.fejer_monotonicity", margin,
                "iterates moved away from a known fixed point");
  return pass("km.fejer_monotonicity", margin);
}

AuditResult audit_km_step_monotone(AuditContext& ctx) {
  const auto& body = *ctx.problem.body;
  const double gamma = ctx.problem.spec.solver.gamma;
  const auto pts = body.sample_points(3, derive_seed(ctx.seed, "steps"));
  double margin = 1e300;
  std::string recorded;
  Vec buf;
  for (const auto& map : ctx.family.maps()) {
    const bool negative_control =
        map.certificate().kind == CertKind::Unchecked;
    for (const auto& x : pts) {
      const SelfMapFn s = [&map](const Vec& z, Vec& out) {
        map.eval_unchecked(z, out);
      };
      const KMResult res =
          km_iterate(s, body.space(), x, gamma, 1e-8, 20000, nullptr, 0, false);
      const RegularityReport rep = asymptotic_regularity_check(res.trace);
      if (negative_control) {
        if (!rep.monotone)
          recorded = "map '" + map.name() +
                     "' violated step monotonicity first at index " +
                     std::to_string(rep.first_violation) + " (gap " +
                     std::to_string(rep.worst_gap) + ")";
        continue;
      }
      if (!rep.pass())
        return fail(
            "km.step_monotonicity", -rep.worst_gap,
            "map '" + map.name() + "' failed asymptotic regularity at index " +
                std::to_string(rep.first_violation));
      margin = std::min(margin, -rep.worst_gap + 1e-10);
    }
  }
  if (!recorded.empty())
    return pass("km.step_monotonicity", 0.0, "negative control: " + recorded);
  return pass("km.step_monotonicity", margin == 1e300 ? 0.0 : margin);
}

AuditResult audit_km_averaged_equivalence(AuditContext& ctx) {
  const auto& body = *ctx.problem.body;
  const double gamma = ctx.problem.spec.solver.gamma;
  const auto& map = ctx.family.maps().front();
  const Vec x0 = body.sample_points(2, derive_seed(ctx.seed, "avg")).back();
  const SelfMapFn s = [&map](const Vec& z, Vec& out) {
    map.eval_unchecked(z, out);
  };
  const KMResult res =
      km_iterate(s, body.space(), x0, gamma, 1e-300, 10, nullptr, 0, false);

  // Mirror exactly as many steps as the averaged run took (it stops early
  // when a step underflows the tolerance, e.g. for the identity map).
  Vec z = x0, sz, next;
  std::vector<double> steps;
  for (long long k = 0; k < res.trace.iterations; ++k) {
    map.eval_unchecked(z, sz);
    axpby_into(1.0 - gamma, z, gamma, sz, next);
    steps.push_back(body.space().distance(next, z));
    std::swap(z, next);
  }
  const bool same_steps =
      res.trace.step_norms.size() == steps.size() &&
      std::equal(steps.begin(), steps.end(), res.trace.step_norms.begin());
  if (!same_steps || !bitwise_equal(z, res.point))
    return fail("km.averaged_equivalence", -1.0,
                "averaged iteration and plain iteration diverge bitwise");
  return pass("km.averaged_equivalence", 0.0);
}

// ---------------------------------------------------------------------------
// retraction

AuditResult retraction_unavailable(AuditContext& ctx, const std::string& name) {
  if (ctx.allow_unchecked) return skipped(name, "uncertified instance");
  return fail(name, -1.0, "retraction unavailable");
}

AuditResult audit_retraction_residual_contract(AuditContext& ctx) {
  if (ctx.retraction == nullptr)
    return retraction_unavailable(ctx, "retraction.residual_contract");
  const auto& space = ctx.problem.body->space();
  const double eps = ctx.retraction->eps();
  double worst = 0.0;
  Vec ty;
  for (const auto& y : ctx.sample_outputs) {
    for (int i = 0; i < ctx.retraction->family_size(); ++i) {
      ctx.retraction->family_map(i).eval_unchecked(y, ty);
      worst = std::max(worst, space.distance(ty, y));
    }
  }
  const double margin = eps - worst;
  if (margin < 0.0)
    return fail("retraction.residual_contract", margin,
                "an output misses the residual bound");
  return pass("retraction.residual_contract", margin);
}

AuditResult audit_retraction_nonexpansive(AuditContext& ctx) {
  if (ctx.retraction == nullptr)
    return retraction_unavailable(ctx, "retraction.nonexpansive_audit");
  const auto& space = ctx.problem.body->space();
  const double slack = 10.0 * ctx.retraction->eps();
  double margin = 1e300;
  long long pairs = 0;
  for (std::size_t i = 0; i < ctx.sample_inputs.size() && pairs < 200; ++i) {
    for (std::size_t j = i + 1; j < ctx.sample_inputs.size() && pairs < 200; ++j) {
      ++pairs;
      const double lhs =
          space.distance(ctx.sample_outputs[i], ctx.sample_outputs[j]);
      const double rhs =
          space.distance(ctx.sample_inputs[i], ctx.sample_inputs[j]) + slack;
      margin = std::min(margin, rhs - lhs);
    }
  }
  if (margin < 0.0)
    return fail("retraction.nonexpansive_audit", margin,
                "outputs expanded a pair beyond the audit slack");
  return pass("retraction.nonexpansive_audit", margin,
              std::to_string(pairs) + " pairs audited");
}

AuditResult audit_retraction_idempotence(AuditContext& ctx) {
  if (ctx.retraction == nullptr)
    return retraction_unavailable(ctx, "retraction.idempotence");
  const auto& space = ctx.problem.body->space();
  const double bound = 2.0 * ctx.retraction->eps();
  double margin = 1e300;
  for (const auto& y : ctx.sample_outputs) {
    const Vec y2 = ctx.retraction->apply(y).first;
    margin = std::min(margin, bound - space.distance(y2, y));
  }
  if (margin < 0.0)
    return fail("retraction.idempotence", margin,
                "applying twice moved an output beyond 2 eps");
  return pass("retraction.idempotence", margin);
}

AuditResult audit_retraction_order_robustness(AuditContext& ctx) {
  if (ctx.retraction == nullptr)
    return retraction_unavailable(ctx, "retraction.order_robustness");
  const auto& maps = ctx.family.maps();
  if (maps.size() < 2)
    return pass("retraction.order_robustness", 0.0,
                "single-map family; order is trivial");
  const auto& space = ctx.problem.body->space();
  const auto& solver = ctx.problem.spec.solver;
  double max_diff = 0.0;
  const std::size_t n_pts = std::min<std::size_t>(8, ctx.sample_inputs.size());

  std::vector<std::vector<CertifiedMap>> orders;
  orders.emplace_back(maps.rbegin(), maps.rend());
  std::vector<CertifiedMap> rotated(maps.begin() + 1, maps.end());
  rotated.push_back(maps.front());
  orders.push_back(std::move(rotated));

  for (auto& order : orders) {
    CommutingFamily permuted(ctx.problem.body, std::move(order));
    permuted.set_certificate(ctx.family.certificate());
    RetractionOptions opts;
    opts.gamma = solver.gamma;
    const RetractionProc proc = build_retraction(
        permuted, solver.eps, solver.step_tol, solver.max_iter, opts);
    for (std::size_t i = 0; i < n_pts; ++i) {
      const Vec y = proc.apply(ctx.sample_inputs[i]).first;
      max_diff = std::max(max_diff, space.distance(y, ctx.sample_outputs[i]));
    }
  }
  // Order sensitivity is reported, not bounded a priori; the residual
  // contract held for every order or apply would have thrown.
  return pass("retraction.order_robustness", max_diff,
              "max output difference across orders: " + std::to_string(max_diff));
}

AuditResult audit_retraction_affine_oracle(AuditContext& ctx) {
  if (ctx.retraction == nullptr)
    return retraction_unavailable(ctx, "retraction.affine_oracle");
  std::vector<AffineForm> forms;
  for (const auto& map : ctx.family.maps()) {
    auto f = map.affine_form();
    if (!f) return skipped("retraction.affine_oracle", "family is not affine");
    forms.push_back(std::move(*f));
  }
  FixedPointOracle oracle;
  try {
    oracle = stacked_fixed_point_oracle(forms);
  } catch (const OracleUnavailable& e) {
    return skipped("retraction.affine_oracle",
                   std::string("oracle unavailable: ") + e.what());
  }
  if (oracle.residual > 1e-6)
    return skipped("retraction.affine_oracle",
                   "stacked system inconsistent; no common fixed point");
  const auto& space = ctx.problem.body->space();
  const double bound = 5.0 * ctx.retraction->eps();
  double margin = 1e300;
  for (const auto& y : ctx.sample_outputs)
    margin = std::min(margin, bound - space.distance(y, oracle.point));
  if (margin < 0.0)
    return fail("retraction.affine_oracle", margin,
                "outputs disagree with the stacked linear solve");
  return pass("retraction.affine_oracle", margin);
}

AuditResult audit_retraction_km_stage_residuals(AuditContext& ctx) {
  if (ctx.retraction == nullptr)
    return retraction_unavailable(ctx, "retraction.km_stage_residuals");
  const auto& proc = *ctx.retraction;
  const auto& space = ctx.problem.body->space();
  const auto pts =
      ctx.problem.body->sample_points(3, derive_seed(ctx.seed, "stage"));
  double margin = 1e300;
  const double gamma = proc.options().gamma;
  for (const auto& x : pts) {
    const auto [y, diag] = proc.apply(x);
    // Averaging-stage residuals sit below step_tol / gamma by construction;
    // extension passes may have tightened further.
    for (std::size_t s = 1; s < diag.stages.size(); ++s) {
      const double tol =
          proc.stages()[s - 1].step_tol / gamma + 1e-12;
      margin = std::min(margin, tol - diag.stages[s].stage_residual);
    }
    if (proc.family_size() >= 2) {
      const RetractionProc below = proc.truncated(proc.family_size() - 2);
      const Vec ry = below.apply(y).first;
      margin = std::min(margin, 10.0 * proc.eps() - space.distance(ry, y));
    }
  }
  if (margin == 1e300)
    return pass("retraction.km_stage_residuals", 0.0,
                "single-stage tower; base residual covered by the contract");
  if (margin < 0.0)
    return fail("retraction.km_stage_residuals", margin,
                "a stage residual exceeded its tolerance");
  return pass("retraction.km_stage_residuals", margin);
}

}  // namespace

const std::vector<AuditSpec>& audit_registry() {
  static const std::vector<AuditSpec> registry = {
      {"geometry.convexity", audit_convexity},
      {"geometry.diameter_bound", audit_diameter_bound},
      {"geometry.norm_axioms", audit_norm_axioms},
      {"maps.proved_lipschitz", audit_proved_lipschitz},
      {"maps.composite_product", audit_composite_product},
      {"maps.affine_commute_defect", audit_affine_commute_defect},
      {"maps.eval_determinism", audit_eval_determinism},
      {"resolvent.residual_bound", audit_resolvent_residual_bound},
      {"resolvent.nonexpansive", audit_resolvent_nonexpansive},
      {"resolvent.residual_identity", audit_resolvent_residual_identity},
      {"resolvent.banach_apriori", audit_banach_apriori},
      {"resolvent.affine_oracle", audit_resolvent_affine_oracle},
      {"km.fejer_monotonicity", audit_km_fejer},
      {"km.step_monotonicity", audit_km_step_monotone},
      {"km.averaged_equivalence", audit_km_averaged_equivalence},
      {"retraction.residual_contract", audit_retraction_residual_contract},
      {"retraction.nonexpansive_audit", audit_retraction_nonexpansive},
      {"retraction.idempotence", audit_retraction_idempotence},
      {"retraction.order_robustness", audit_retraction_order_robustness},
      {"retraction.affine_oracle", audit_retraction_affine_oracle},
      {"retraction.km_stage_residuals", audit_retraction_km_stage_residuals},
  };
  return registry;
}

nlohmann::json certificates_to_json(const Problem& problem,
                                    const CommutingFamily& family) {
  nlohmann::json out;
  nlohmann::json jm = nlohmann::json::array();
  for (const auto& map : problem.maps) {
    nlohmann::json c;
    c["name"] = map.name();
    c["kind"] = map.kind_name();
    const auto& cert = map.certificate();
    switch (cert.kind) {
      case CertKind::Proved:
        c["certificate"] = {{"kind", "proved"}, {"lipschitz", cert.lipschitz}};
        break;
      case CertKind::Sampled:
        c["certificate"] = {{"kind", "sampled"},
                            {"pairs_checked", cert.pairs_checked},
                            {"max_ratio", cert.max_ratio}};
        break;
      case CertKind::Unchecked:
        c["certificate"] = {{"kind", "unchecked"}};
        break;
    }
    jm.push_back(c);
  }
  out["maps"] = jm;
  const auto& fc = family.certificate();
  switch (fc.kind) {
    case CommutingCert::Kind::ProvedAffine:
      out["family"] = {{"kind", "proved_affine"}, {"max_defect", fc.max_defect}};
      break;
    case CommutingCert::Kind::Sampled:
      out["family"] = {{"kind", "sampled"},
                       {"max_defect", fc.max_defect},
                       {"samples", fc.samples}};
      break;
    case CommutingCert::Kind::Unchecked:
      out["family"] = {{"kind", "unchecked"}};
      break;
  }
  return out;
}

nlohmann::json RunReport::to_json(bool include_timings) const {
  nlohmann::json j;
  j["schema_version"] = schema_version;
  j["problem_digest"] = problem_digest;
  j["seed"] = seed;
  j["certificates"] = certificates;
  j["build"] = build;
  nlohmann::json ja = nlohmann::json::array();
  for (const auto& a : audits) {
    nlohmann::json e;
    e["name"] = a.name;
    e["status"] = a.status == AuditResult::Status::Pass      ? "pass"
                  : a.status == AuditResult::Status::Fail    ? "fail"
                                                             : "skipped";
    e["margin"] = a.margin;
    e["detail"] = a.detail;
    ja.push_back(e);
  }
  j["audits"] = ja;
  j["all_pass"] = all_pass;
  if (include_timings) j["timings"] = timings;
  return j;
}

RunReport run_property_suite(const Problem& problem, std::uint64_t seed) {
  const auto t_start = std::chrono::steady_clock::now();
  RunReport report;
  report.problem_digest = ::retractor::problem_digest(problem.spec);
  report.seed = seed;

  CommutingFamily family = problem.make_family();
  bool any_unchecked = false;
  for (const auto& m : family.maps())
    if (m.certificate().kind == CertKind::Unchecked) any_unchecked = true;

  if (any_unchecked) {
    try {
      family.set_certificate(certify_commuting(family, 200, seed));
    } catch (const NonCommutingError&) {
      family.set_certificate(CommutingCert{});
    }
  } else {
    family.set_certificate(certify_commuting(family, 200, seed));
  }

  AuditContext ctx{problem, family, seed, nullptr, {}, {}, any_unchecked};
  report.certificates = certificates_to_json(problem, family);

  const auto& solver = problem.spec.solver;
  std::optional<RetractionProc> proc;
  std::string build_error;
  if (!any_unchecked) {
    try {
      RetractionOptions opts;
      opts.gamma = solver.gamma;
      proc.emplace(build_retraction(family, solver.eps, solver.step_tol,
                                    solver.max_iter, opts));
    } catch (const ConvergenceError& e) {
      build_error = e.what();
    }
  }
  if (proc.has_value()) {
    ctx.retraction = &*proc;
    ctx.sample_inputs =
        problem.body->sample_points(50, derive_seed(seed, "retraction-samples"));
    ctx.sample_outputs.reserve(ctx.sample_inputs.size());
    for (const auto& x : ctx.sample_inputs)
      ctx.sample_outputs.push_back(proc->apply(x).first);

    nlohmann::json jb;
    jb["residual_schedule"] = proc->build_report().residual_schedule;
    nlohmann::json js = nlohmann::json::array();
    for (const auto& s : proc->build_report().stages)
      js.push_back({{"stage", s.stage},
                    {"iterations", s.iterations},
                    {"final_step", s.final_step},
                    {"stage_residual", s.stage_residual}});
    jb["stages"] = js;
    jb["probe_residuals"] = proc->build_report().probe_residuals;
    jb["extensions"] = proc->build_report().extensions;
    report.build = jb;
  } else {
    report.build = {{"error", build_error.empty() ? "skipped" : build_error}};
  }

  nlohmann::json timings;
  for (const auto& spec : audit_registry()) {
    const auto t0 = std::chrono::steady_clock::now();
    AuditResult result;
    try {
      result = spec.fn(ctx);
    } catch (const std::exception& e) {
      result = fail(spec.name, -1.0, std::string("audit raised: ") + e.what());
    }
    const auto t1 = std::chrono::steady_clock::now();
    timings[spec.name] =
        std::chrono::duration<double, std::milli>(t1 - t0).count();
    if (result.status == AuditResult::Status::Fail) report.all_pass = false;
    report.audits.push_back(std::move(result));
  }
  const auto t_end = std::chrono::steady_clock::now();
  timings["total_ms"] =
      std::chrono::duration<double, std::milli>(t_end - t_start).count();
  report.timings = timings;
  return report;
}

}  // namespace retractor
