#include "retractor/retraction.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "retractor/rng.hpp"

namespace retractor {

namespace {

void require_certified(const CertifiedMap& map, bool allow_unchecked) {
  if (allow_unchecked) return;
  if (map.certificate().kind == CertKind::Unchecked)
    throw CertificationError("map '" + map.name() +
                                 "' is uncertified; certify it or pass the "
                                 "override flag",
                             map.name());
}

}  // namespace

RetractionProc::PassParams RetractionProc::base_params() const {
  PassParams p;
  p.leaf_n = leaf_.n_star;
  p.leaf_inner_tol = leaf_.inner_tol;
  p.step_tols.reserve(stages_.size());
  for (const auto& s : stages_) p.step_tols.push_back(s.step_tol);
  return p;
}

Vec RetractionProc::run_tower(const Vec& x, const PassParams& params,
                              TraceSink* trace, ApplyDiagnostics& diag) const {
  const NormedSpace& space = body().space();
  diag.stages.assign(static_cast<std::size_t>(family_size()), StageDiag{});

  // Stage s (0-based): s == 0 is the resolvent base, s >= 1 an averaging
  // stage whose map is T_{s+1} composed with the tower below it.
  std::function<Vec(int, const Vec&)> eval_stage =
      [&](int s, const Vec& z) -> Vec {
    if (s == 0) {
      ResolventResult r = resolve(leaf_.map, z, params.leaf_n,
                                  params.leaf_inner_tol, trace, 1,
                                  options_.allow_unchecked);
      auto& sd = diag.stages[0];
      sd.stage = 1;
      sd.iterations += r.inner.iterations_used;
      sd.final_step = r.inner.residual;
      sd.stage_residual = r.residual_T;
      diag.resolvent_iterations += r.inner.iterations_used;
      return std::move(r.point);
    }
    const Stage& st = stages_[static_cast<std::size_t>(s - 1)];
    const SelfMapFn S = [&](const Vec& zz, Vec& out) {
      const Vec w = eval_stage(s - 1, zz);
      st.map.eval_unchecked(w, out);
    };
    KMResult res;
    try {
      res = km_iterate(S, space, z, options_.gamma,
                       params.step_tols[static_cast<std::size_t>(s - 1)],
                       st.max_iter, trace, s + 1, true);
    } catch (KmTimeoutError& e) {
      throw PartialBuildError("averaging stage " + std::to_string(s + 1) +
                                  " for map '" + st.map.name() +
                                  "' timed out: " + e.what(),
                              s + 1, std::move(e.partial_result));
    }
    auto& sd = diag.stages[static_cast<std::size_t>(s)];
    sd.stage = s + 1;
    sd.iterations += res.trace.iterations;
    sd.final_step = res.trace.step_norms.back();
    sd.stage_residual = res.trace.residuals.back();
    diag.km_iterations += res.trace.iterations;
    return std::move(res.point);
  };

  return eval_stage(family_size() - 1, x);
}

void RetractionProc::measure(const Vec& y, ApplyDiagnostics& diag) const {
  const NormedSpace& space = body().space();
  diag.residuals.resize(static_cast<std::size_t>(family_size()));
  diag.max_residual = 0.0;
  Vec ty;
  for (int i = 0; i < family_size(); ++i) {
    family_map(i).eval_unchecked(y, ty);
    const double r = space.distance(ty, y);
    diag.residuals[static_cast<std::size_t>(i)] = r;
    diag.max_residual = std::max(diag.max_residual, r);
  }
}

std::pair<Vec, ApplyDiagnostics> RetractionProc::apply(const Vec& x,
                                                       TraceSink* trace) const {
  const ConvexBody& c = body();
  c.space().require_dim(x);
  if (!c.contains(x, 1e-6))
    throw DomainError("retraction input lies outside the body");

  ApplyDiagnostics diag;
  PassParams params = base_params();
  Vec y = run_tower(x, params, trace, diag);
  measure(y, diag);

  // The per-stage tolerances target the advertised bound; when a pass
  // misses it (coarse base index, loose inner solves) the pass is repeated
  // from the current point with an 8x tighter schedule.
  int ext = 0;
  while (diag.max_residual > residual_bound_ && ext < options_.max_extensions) {
    ++ext;
    params.leaf_n = params.leaf_n > leaf_.n_literal / 8 ? leaf_.n_literal
                                                        : params.leaf_n * 8;
    params.leaf_inner_tol = std::max(params.leaf_inner_tol / 8.0, 1e-15);
    for (double& t : params.step_tols) t = std::max(t / 8.0, 1e-15);
    ApplyDiagnostics pass;
    pass.resolvent_iterations = diag.resolvent_iterations;
    pass.km_iterations = diag.km_iterations;
    y = run_tower(y, params, trace, pass);
    measure(y, pass);
    diag = std::move(pass);
    diag.extensions = ext;
  }
  if (diag.max_residual > residual_bound_)
    throw RetractionContractError(
        "retraction output misses the residual bound " +
            std::to_string(residual_bound_) + " (measured " +
            std::to_string(diag.max_residual) + ") after " +
            std::to_string(ext) + " extensions",
        std::move(diag));

  diag.movement = c.space().distance(y, x);
  // The single-pass movement bound only describes an unextended run.
  if (family_size() == 1 && diag.extensions == 0) {
    Vec tx;
    leaf_.map.eval_unchecked(x, tx);
    diag.input_residual = c.space().distance(tx, x);
    diag.movement_bound =
        static_cast<double>(params.leaf_n - 1) * diag.input_residual +
        static_cast<double>(params.leaf_n) * params.leaf_inner_tol;
  }
  return {std::move(y), std::move(diag)};
}

RetractionProc RetractionProc::truncated(int n_stages) const {
  if (n_stages < 0 || n_stages > static_cast<int>(stages_.size()))
    throw ContractViolation("truncated: stage count out of range");
  RetractionProc sub(leaf_);
  sub.eps_ = eps_;
  sub.stages_.assign(stages_.begin(), stages_.begin() + n_stages);
  sub.options_ = options_;
  sub.residual_bound_ =
      n_stages == 0 ? leaf_.eps_k + 2.0 * leaf_.inner_tol
                    : sub.stages_.back().eps_k;
  sub.build_report_.residual_schedule.assign(
      build_report_.residual_schedule.begin(),
      build_report_.residual_schedule.begin() + n_stages + 1);
  return sub;
}

RetractionProc single_retraction(const CertifiedMap& map, double eps,
                                 double inner_tol, bool allow_unchecked) {
  if (!(eps > 0.0)) throw ContractViolation("eps must be positive");
  require_certified(map, allow_unchecked);
  if (inner_tol <= 0.0) inner_tol = eps / 10.0;

  const double diam = map.body().diameter();
  const long long n = clamped_index(std::ceil(diam / eps));
  RetractionProc proc(RetractionProc::Leaf{map, n, n, inner_tol, eps});
  proc.eps_ = eps;
  proc.residual_bound_ = eps + 2.0 * inner_tol;
  proc.options_.allow_unchecked = allow_unchecked;
  proc.build_report_.residual_schedule = {eps};
  return proc;
}

RetractionProc build_retraction(const CommutingFamily& family, double eps,
                                double km_step_tol, long long max_iter,
                                RetractionOptions options) {
  if (!(eps > 0.0)) throw ContractViolation("eps must be positive");
  if (max_iter < 1) throw ContractViolation("max_iter must be >= 1");
  if (!(options.gamma > 0.0 && options.gamma < 1.0))
    throw ContractViolation("gamma must lie in (0, 1)");
  options.km_step_tol = km_step_tol;
  options.max_iter = max_iter;
  for (const auto& m : family.maps()) require_certified(m, options.allow_unchecked);
  if (!options.allow_unchecked &&
      family.certificate().kind == CommutingCert::Kind::Unchecked)
    throw CertificationError(
        "family has no commutativity certificate; certify it first");

  const int n_maps = family.size();
  const double diam = family.body().diameter();

  // Budget eps_k = eps / (2 * (N - k + 1)), tightest at the base.
  std::vector<double> schedule(static_cast<std::size_t>(n_maps));
  for (int k = 1; k <= n_maps; ++k)
    schedule[static_cast<std::size_t>(k - 1)] =
        eps / (2.0 * static_cast<double>(n_maps - k + 1));

  const double eps1 = schedule[0];
  const long long n_literal = clamped_index(std::ceil(diam / eps1));
  long long n_star = n_literal;
  if (n_maps > 1) {
    const double floor =
        options.leaf_floor > 0.0 ? options.leaf_floor : 5e-4 * std::max(diam, 1e-12);
    const double target = std::max(eps1, floor);
    n_star = clamped_index(std::ceil(diam / target));
    n_star = std::min(n_star, n_literal);
  }
  const double inner_tol =
      options.leaf_inner_tol > 0.0 ? options.leaf_inner_tol : eps1 / 10.0;
  RetractionProc proc(RetractionProc::Leaf{family.maps()[0], n_star, n_literal,
                                           inner_tol, eps1});
  proc.eps_ = eps;
  proc.residual_bound_ = eps;
  proc.options_ = options;

  for (int k = 2; k <= n_maps; ++k) {
    const double eps_k = schedule[static_cast<std::size_t>(k - 1)];
    double step_tol = options.gamma * eps_k;
    if (km_step_tol > 0.0) step_tol = std::min(step_tol, km_step_tol);
    proc.stages_.push_back(RetractionProc::Stage{
        family.maps()[static_cast<std::size_t>(k - 1)], step_tol, max_iter,
        eps_k});
  }

  proc.build_report_.residual_schedule = schedule;

  // Validation run at the body center; a stage timeout here surfaces as a
  // partial-build error naming the stage.
  const auto probe = proc.apply(family.body().center());
  proc.build_report_.stages = probe.second.stages;
  proc.build_report_.probe_residuals = probe.second.residuals;
  proc.build_report_.extensions = probe.second.extensions;
  return proc;
}

FixedSetIdentityReport fixed_set_identity_check(const CommutingFamily& family,
                                                const RetractionProc& retraction,
                                                const CertifiedMap& extra,
                                                int samples,
                                                std::uint64_t seed) {
  if (samples < 1) throw ContractViolation("samples must be >= 1");
  const ConvexBody& body = family.body();
  const NormedSpace& space = body.space();
  const double eps = retraction.eps();

  FixedSetIdentityReport report;
  report.eps = eps;
  report.c = 10.0;
  const double threshold = report.c * eps;

  for (const auto& m : family.maps()) {
    const double defect = commuting_defect(extra, m, std::max(16, samples),
                                           derive_seed(seed, "fixid-pre"));
    report.extra_commute_defect = std::max(report.extra_commute_defect, defect);
  }
  if (report.extra_commute_defect > 1e-8)
    throw ContractViolation(
        "extra map '" + extra.name() +
        "' does not commute with the family (sampled defect " +
        std::to_string(report.extra_commute_defect) + ")");

  const auto starts = body.sample_points(samples, derive_seed(seed, "fixid"));
  Vec buf;

  auto family_residual = [&](const Vec& p) {
    double worst = 0.0;
    for (const auto& m : family.maps()) {
      m.eval_unchecked(p, buf);
      worst = std::max(worst, space.distance(buf, p));
    }
    return worst;
  };
  auto extra_residual = [&](const Vec& p) {
    extra.eval_unchecked(p, buf);
    return space.distance(buf, p);
  };

  // Forward inclusion: construct near-common fixed points of family + extra
  // with the extended retraction, then check ||extra(R x) - x|| stays small.
  {
    std::vector<CertifiedMap> extended = family.maps();
    extended.push_back(extra);
    CommutingFamily ext_family(family.body_ptr(), std::move(extended));
    ext_family.set_certificate(certify_commuting(
        ext_family, std::max(32, samples), derive_seed(seed, "fixid-ext")));
    RetractionOptions opts = retraction.options();
    const RetractionProc r_ext =
        build_retraction(ext_family, eps, opts.km_step_tol, opts.max_iter, opts);
    for (const auto& s : starts) {
      Vec x = r_ext.apply(s).first;
      FixedSetIdentityEntry entry;
      entry.family_residual = family_residual(x);
      entry.extra_residual = extra_residual(x);
      const Vec rx = retraction.apply(x).first;
      extra.eval_unchecked(rx, buf);
      entry.fix_composite_residual = space.distance(buf, x);
      entry.ok = entry.fix_composite_residual <= threshold;
      entry.x = std::move(x);
      report.forward.push_back(std::move(entry));
      if (!report.forward.back().ok) report.pass = false;
    }
  }

  // Backward inclusion: hunt fixed points of extra o R by averaged
  // iteration, then check they are near-fixed for the family and extra.
  {
    const SelfMapFn g = [&](const Vec& z, Vec& out) {
      const Vec rz = retraction.apply(z).first;
      extra.eval_unchecked(rz, out);
    };
    for (const auto& s : starts) {
      ++report.backward_candidates;
      KMResult res = km_iterate(g, space, s, 0.5, 0.5 * eps, 2000, nullptr, 0,
                                false);
      if (res.trace.stop_reason == StopReason::MaxIter) continue;
      ++report.backward_found;
      FixedSetIdentityEntry entry;
      const Vec& x = res.point;
      extra.eval_unchecked(retraction.apply(x).first, buf);
      entry.fix_composite_residual = space.distance(buf, x);
      entry.family_residual = family_residual(x);
      entry.extra_residual = extra_residual(x);
      entry.ok = entry.family_residual <= threshold &&
                 entry.extra_residual <= threshold;
      entry.x = x;
      report.backward.push_back(std::move(entry));
      if (!report.backward.back().ok) report.pass = false;
    }
  }

  return report;
}

}  // namespace retractor
