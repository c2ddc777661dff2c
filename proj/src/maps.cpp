#include "retractor/maps.hpp"

#include <algorithm>
#include <cmath>

#include "retractor/errors.hpp"
#include "retractor/rng.hpp"

namespace retractor {

double ScalarMap::operator()(double t) const {
  switch (op) {
    case Op::Identity:
      return t;
    case Op::Clamp:
      return std::min(std::max(t, lo), hi);
    case Op::Scale:
      return factor * t;
    case Op::ShiftClamp:
      return std::min(std::max(t + shift, lo), hi);
  }
  return t;
}

double ScalarMap::lipschitz() const {
  switch (op) {
    case Op::Identity:
    case Op::Clamp:
    case Op::ShiftClamp:
      return 1.0;
    case Op::Scale:
      return std::fabs(factor);
  }
  return 1.0;
}

ScalarMap scalar_identity() { return ScalarMap{}; }

ScalarMap scalar_clamp(double lo, double hi) {
  if (!(lo <= hi)) throw ContractViolation("clamp needs lo <= hi");
  ScalarMap m;
  m.op = ScalarMap::Op::Clamp;
  m.lo = lo;
  m.hi = hi;
  return m;
}

ScalarMap scalar_scale(double factor) {
  if (!(std::fabs(factor) <= 1.0))
    throw ContractViolation("scale factor must satisfy |factor| <= 1");
  ScalarMap m;
  m.op = ScalarMap::Op::Scale;
  m.factor = factor;
  return m;
}

ScalarMap scalar_shift_clamp(double shift, double lo, double hi) {
  if (!(lo <= hi)) throw ContractViolation("shift_clamp needs lo <= hi");
  ScalarMap m;
  m.op = ScalarMap::Op::ShiftClamp;
  m.shift = shift;
  m.lo = lo;
  m.hi = hi;
  return m;
}

namespace {

void validate_kind(const ConvexBody& body, const CertifiedMap::Kind& kind) {
  const int d = body.space().dim;
  if (const auto* a = std::get_if<CertifiedMap::Affine>(&kind)) {
    if (a->linear.rows != d || a->linear.cols != d ||
        static_cast<int>(a->offset.size()) != d)
      throw ContractViolation("affine map shape does not match body dimension");
  } else if (const auto* r = std::get_if<CertifiedMap::Rotation2D>(&kind)) {
    if (d < 2) throw ContractViolation("rotation2d needs dimension >= 2");
    if (static_cast<int>(r->center.size()) != d)
      throw ContractViolation("rotation2d center dimension mismatch");
  } else if (const auto* iso = std::get_if<CertifiedMap::Isometry>(&kind)) {
    if (static_cast<int>(iso->perm.size()) != d ||
        static_cast<int>(iso->signs.size()) != d)
      throw ContractViolation("isometry permutation/sign length mismatch");
    std::vector<bool> seen(static_cast<std::size_t>(d), false);
    for (int p : iso->perm) {
      if (p < 0 || p >= d || seen[static_cast<std::size_t>(p)])
        throw ContractViolation("isometry perm is not a permutation");
      seen[static_cast<std::size_t>(p)] = true;
    }
    for (double s : iso->signs)
      if (std::fabs(std::fabs(s) - 1.0) > 0.0)
        throw ContractViolation("isometry signs must be +-1");
  } else if (const auto* cw = std::get_if<CertifiedMap::CoordWise>(&kind)) {
    if (static_cast<int>(cw->parts.size()) != d)
      throw ContractViolation("coordwise map needs one part per coordinate");
  } else if (std::holds_alternative<CertifiedMap::SquareMap>(kind)) {
    if (d < 2) throw ContractViolation("square map needs dimension >= 2");
  } else if (const auto* comp = std::get_if<CertifiedMap::Composite>(&kind)) {
    if (comp->parts.empty())
      throw ContractViolation("composite needs at least one part");
    for (const auto& part : comp->parts)
      if (part.body_ptr().get() != &body)
        throw ContractViolation("composite parts must share the body");
  }
}

}  // namespace

CertifiedMap::CertifiedMap(std::string name,
                           std::shared_ptr<const ConvexBody> body, Kind kind)
    : name_(std::move(name)), body_(std::move(body)), kind_(std::move(kind)) {
  if (!body_) throw ContractViolation("map needs a body");
  validate_kind(*body_, kind_);
}

std::string CertifiedMap::kind_name() const {
  struct Visitor {
    std::string operator()(const Affine&) const { return "affine"; }
    std::string operator()(const Rotation2D&) const { return "rotation2d"; }
    std::string operator()(const Isometry&) const { return "isometry"; }
    std::string operator()(const CoordWise&) const { return "coordwise"; }
    std::string operator()(const SquareMap&) const { return "square_map"; }
    std::string operator()(const Composite&) const { return "composite"; }
  };
  return std::visit(Visitor{}, kind_);
}

void CertifiedMap::eval_unchecked(const Vec& x, Vec& out) const {
  const int d = body_->space().dim;
  if (const auto* a = std::get_if<Affine>(&kind_)) {
    matvec_into(a->linear, x, out);
    for (int i = 0; i < d; ++i) out[i] += a->offset[i];
    return;
  }
  if (const auto* r = std::get_if<Rotation2D>(&kind_)) {
    out = x;
    const double c = std::cos(r->angle_rad);
    const double s = std::sin(r->angle_rad);
    const double dx = x[0] - r->center[0];
    const double dy = x[1] - r->center[1];
    out[0] = r->center[0] + c * dx - s * dy;
    out[1] = r->center[1] + s * dx + c * dy;
    return;
  }
  if (const auto* iso = std::get_if<Isometry>(&kind_)) {
    out.resize(x.size());
    for (int i = 0; i < d; ++i)
      out[i] = iso->signs[i] * x[static_cast<std::size_t>(iso->perm[i])];
    return;
  }
  if (const auto* cw = std::get_if<CoordWise>(&kind_)) {
    out.resize(x.size());
    for (int i = 0; i < d; ++i) out[i] = cw->parts[i](x[i]);
    return;
  }
  if (std::holds_alternative<SquareMap>(kind_)) {
    out.resize(x.size());
    out[0] = x[0] * x[0];
    out[1] = 0.0;
    for (int i = 2; i < d; ++i) out[i] = x[i - 1];
    return;
  }
  const auto& comp = std::get<Composite>(kind_);
  Vec cur = x;
  Vec next;
  for (const auto& part : comp.parts) {
    part.eval_unchecked(cur, next);
    std::swap(cur, next);
  }
  out = std::move(cur);
}

Vec CertifiedMap::operator()(const Vec& x) const {
  body_->space().require_dim(x);
  if (!body_->contains(x, 1e-6))
    throw DomainError("input to map '" + name_ + "' lies outside its body");
  Vec out;
  eval_unchecked(x, out);
  if (!body_->contains(out, 1e-6))
    throw SelfMapViolation("map '" + name_ + "' sent a point outside its body");
  return out;
}

std::optional<AffineForm> CertifiedMap::affine_form() const {
  const int d = body_->space().dim;
  if (const auto* a = std::get_if<Affine>(&kind_))
    return AffineForm{a->linear, a->offset};
  if (const auto* r = std::get_if<Rotation2D>(&kind_)) {
    Matrix m = Matrix::identity(d);
    const double c = std::cos(r->angle_rad);
    const double s = std::sin(r->angle_rad);
    m(0, 0) = c;
    m(0, 1) = -s;
    m(1, 0) = s;
    m(1, 1) = c;
    Vec b = sub(r->center, matvec(m, r->center));
    return AffineForm{std::move(m), std::move(b)};
  }
  if (const auto* iso = std::get_if<Isometry>(&kind_)) {
    Matrix m(d, d);
    for (int i = 0; i < d; ++i) m(i, iso->perm[i]) = iso->signs[i];
    return AffineForm{std::move(m), Vec(static_cast<std::size_t>(d), 0.0)};
  }
  if (const auto* cw = std::get_if<CoordWise>(&kind_)) {
    Matrix m(d, d);
    for (int i = 0; i < d; ++i) {
      const auto& p = cw->parts[i];
      if (p.op == ScalarMap::Op::Identity)
        m(i, i) = 1.0;
      else if (p.op == ScalarMap::Op::Scale)
        m(i, i) = p.factor;
      else
        return std::nullopt;
    }
    return AffineForm{std::move(m), Vec(static_cast<std::size_t>(d), 0.0)};
  }
  if (const auto* comp = std::get_if<Composite>(&kind_)) {
    AffineForm acc{Matrix::identity(d), Vec(static_cast<std::size_t>(d), 0.0)};
    for (const auto& part : comp->parts) {
      auto f = part.affine_form();
      if (!f) return std::nullopt;
      acc.linear = matmul(f->linear, acc.linear);
      acc.offset = add(matvec(f->linear, acc.offset), f->offset);
    }
    return acc;
  }
  return std::nullopt;
}

CertifiedMap make_identity(std::shared_ptr<const ConvexBody> body,
                           std::string name) {
  const int d = body->space().dim;
  CertifiedMap::CoordWise cw;
  cw.parts.assign(static_cast<std::size_t>(d), scalar_identity());
  return CertifiedMap(std::move(name), std::move(body), std::move(cw));
}

CertifiedMap square_map_example(int dim) {
  if (dim < 2) throw ContractViolation("square map example needs dim >= 2");
  auto space = make_space(dim, NormKind::L1);
  auto body = std::make_shared<const ConvexBody>(
      ConvexBody::ball(space, Vec(static_cast<std::size_t>(dim), 0.0), 1.0));
  return CertifiedMap("square_map", body, CertifiedMap::SquareMap{});
}

namespace {

double induced_norm_l1(const Matrix& m) {
  double best = 0.0;
  for (int j = 0; j < m.cols; ++j) {
    double s = 0.0;
    for (int i = 0; i < m.rows; ++i) s += std::fabs(m(i, j));
    best = std::max(best, s);
  }
  return best;
}

double induced_norm_linf(const Matrix& m) {
  double best = 0.0;
  for (int i = 0; i < m.rows; ++i) {
    double s = 0.0;
    for (int j = 0; j < m.cols; ++j) s += std::fabs(m(i, j));
    best = std::max(best, s);
  }
  return best;
}

double induced_norm_weighted_l1(const Matrix& m, const Vec& w) {
  // ||Ax||_w <= max_j (sum_i w_i |a_ij|) / w_j * ||x||_w, tight at e_j.
  double best = 0.0;
  for (int j = 0; j < m.cols; ++j) {
    double s = 0.0;
    for (int i = 0; i < m.rows; ++i) s += w[i] * std::fabs(m(i, j));
    best = std::max(best, s / w[j]);
  }
  return best;
}

double l2_of(const Vec& v) {
  double s = 0.0;
  for (double t : v) s += t * t;
  return std::sqrt(s);
}

double spectral_norm_power(const Matrix& a, double rel_tol, int max_iter) {
  const int d = a.cols;
  const Matrix at = transpose(a);
  double best = 0.0;
  for (std::uint64_t start = 0; start < 2; ++start) {
    Rng rng(derive_seed(0x517cc1b727220a95ULL + start, "power-start"));
    Vec v(static_cast<std::size_t>(d));
    for (double& t : v) t = rng.gaussian();
    const double nv = l2_of(v);
    if (nv < 1e-300) continue;
    for (double& t : v) t /= nv;
    double lambda_prev = -1.0;
    Vec av, w;
    for (int k = 0; k < max_iter; ++k) {
      matvec_into(a, v, av);
      matvec_into(at, av, w);
      const double nw = l2_of(w);
      if (nw < 1e-300) {
        lambda_prev = 0.0;
        break;
      }
      const double lambda = dot(v, w);
      for (std::size_t i = 0; i < w.size(); ++i) v[i] = w[i] / nw;
      if (std::fabs(lambda - lambda_prev) <=
          rel_tol * std::max(1.0, std::fabs(lambda))) {
        lambda_prev = lambda;
        break;
      }
      lambda_prev = lambda;
    }
    best = std::max(best, std::sqrt(std::max(lambda_prev, 0.0)));
  }
  return best;
}

/// Brute-force lower bound on the induced L2 norm over a direction grid.
double rayleigh_sweep_norm(const Matrix& a) {
  const int d = a.cols;
  Vec v(static_cast<std::size_t>(d), 0.0);
  Vec av;
  double best = 0.0;
  if (d == 1) {
    return std::fabs(a(0, 0));
  }
  if (d == 2) {
    const int n = 8192;
    for (int k = 0; k < n; ++k) {
      const double t = 6.283185307179586 * k / n;
      v[0] = std::cos(t);
      v[1] = std::sin(t);
      matvec_into(a, v, av);
      best = std::max(best, l2_of(av));
    }
    return best;
  }
  const int np = 192, nt = 384;
  for (int p = 0; p <= np; ++p) {
    const double phi = 3.141592653589793 * p / np;
    for (int t = 0; t < nt; ++t) {
      const double theta = 6.283185307179586 * t / nt;
      v[0] = std::sin(phi) * std::cos(theta);
      v[1] = std::sin(phi) * std::sin(theta);
      v[2] = std::cos(phi);
      matvec_into(a, v, av);
      best = std::max(best, l2_of(av));
    }
  }
  return best;
}

double induced_norm(const Matrix& m, const NormedSpace& space,
                    const std::string& map_name) {
  switch (space.kind) {
    case NormKind::L1:
      return induced_norm_l1(m);
    case NormKind::LInf:
      return induced_norm_linf(m);
    case NormKind::WeightedL1:
      return induced_norm_weighted_l1(m, space.weights);
    case NormKind::L2: {
      const double value = spectral_norm_power(m, 1e-10, 200000);
      if (space.dim <= 3) {
        const double sweep = rayleigh_sweep_norm(m);
        const double tol =
            (space.dim == 1 ? 1e-12 : space.dim == 2 ? 1e-4 : 5e-3) *
            std::max(1.0, value);
        if (sweep > value + tol || value > sweep + tol)
          throw CertificationError(
              "spectral norm cross-check failed for map '" + map_name +
                  "': power iteration " + std::to_string(value) +
                  " vs sweep " + std::to_string(sweep),
              map_name, {}, {}, value);
      }
      return value;
    }
  }
  return 0.0;
}

/// Deterministic probe pairs along the body axes/vertices; these make the
/// rejection witness for non-nonexpansive maps reproducible.
std::vector<std::pair<Vec, Vec>> probe_pairs(const ConvexBody& body) {
  std::vector<std::pair<Vec, Vec>> pairs;
  const int d = body.space().dim;
  const Vec c = body.center();
  if (const auto* b = std::get_if<NormBall>(&body.shape())) {
    for (int i = 0; i < d; ++i) {
      Vec e(static_cast<std::size_t>(d), 0.0);
      e[i] = 1.0;
      const double unit = body.space().norm(e);
      if (unit <= 0.0) continue;
      const double reach = b->radius / unit;
      Vec hi = c, mid = c;
      hi[i] += reach;
      mid[i] += 0.5 * reach;
      pairs.emplace_back(std::move(hi), std::move(mid));
    }
  } else if (const auto* b = std::get_if<BoxShape>(&body.shape())) {
    for (int i = 0; i < d; ++i) {
      Vec hi = c;
      hi[i] = b->upper[i];
      Vec mid = lerp(hi, c, 0.5);
      pairs.emplace_back(std::move(hi), std::move(mid));
    }
  } else if (const auto* s = std::get_if<SimplexShape>(&body.shape())) {
    for (int i = 0; i < d; ++i) {
      Vec v(static_cast<std::size_t>(d), 0.0);
      v[i] = s->scale;
      pairs.emplace_back(std::move(v), c);
    }
  } else {
    const auto& h = std::get<HullShape>(body.shape());
    for (const auto& v : h.vertices) pairs.emplace_back(v, c);
  }
  return pairs;
}

}  // namespace

Certificate certify_nonexpansive(const CertifiedMap& map, long long samples,
                                 std::uint64_t seed) {
  const NormedSpace& space = map.body().space();

  if (auto form = map.affine_form()) {
    const double value = induced_norm(form->linear, space, map.name());
    if (value > 1.0 + 1e-9)
      throw CertificationError("map '" + map.name() +
                                   "' has induced operator norm " +
                                   std::to_string(value) + " > 1",
                               map.name(), {}, {}, value);
    Certificate cert;
    cert.kind = CertKind::Proved;
    cert.lipschitz = value;
    return cert;
  }

  if (const auto* cw = std::get_if<CertifiedMap::CoordWise>(&map.kind())) {
    double value = 0.0;
    for (const auto& p : cw->parts) value = std::max(value, p.lipschitz());
    if (value > 1.0 + 1e-9)
      throw CertificationError("coordwise map '" + map.name() +
                                   "' has Lipschitz bound " +
                                   std::to_string(value) + " > 1",
                               map.name(), {}, {}, value);
    Certificate cert;
    cert.kind = CertKind::Proved;
    cert.lipschitz = value;
    return cert;
  }

  if (const auto* comp = std::get_if<CertifiedMap::Composite>(&map.kind())) {
    // Product bound over the parts; fall back to sampling when a part
    // cannot be certified or the bound is inconclusive.
    bool ok = true;
    double product = 1.0;
    for (const auto& part : comp->parts) {
      try {
        const Certificate c = certify_nonexpansive(part, samples, seed);
        if (c.kind == CertKind::Proved) {
          product *= c.lipschitz;
        } else {
          ok = false;
          break;
        }
      } catch (const CertificationError&) {
        ok = false;
        break;
      }
    }
    if (ok && product <= 1.0 + 1e-9) {
      Certificate cert;
      cert.kind = CertKind::Proved;
      cert.lipschitz = product;
      return cert;
    }
  }

  // Sampled certification: deterministic probes plus seeded random pairs.
  if (samples < 1) throw ContractViolation("samples must be >= 1");
  auto pairs = probe_pairs(map.body());
  const auto pts =
      map.body().sample_points(static_cast<int>(2 * samples), derive_seed(seed, "cert-pairs"));
  for (long long k = 0; k + 1 < static_cast<long long>(pts.size()); k += 2)
    pairs.emplace_back(pts[static_cast<std::size_t>(k)],
                       pts[static_cast<std::size_t>(k + 1)]);

  double max_ratio = 0.0;
  const std::pair<Vec, Vec>* worst = nullptr;
  Vec tx, ty;
  for (const auto& pr : pairs) {
    const double dxy = space.distance(pr.first, pr.second);
    if (dxy < 1e-12) continue;
    map.eval_unchecked(pr.first, tx);
    map.eval_unchecked(pr.second, ty);
    const double ratio = space.distance(tx, ty) / dxy;
    if (ratio > max_ratio) {
      max_ratio = ratio;
      worst = &pr;
    }
  }
  if (max_ratio > 1.0 + 1e-9 && worst != nullptr)
    throw CertificationError(
        "map '" + map.name() + "' expanded a sampled pair by factor " +
            std::to_string(max_ratio),
        map.name(), worst->first, worst->second, max_ratio);
  Certificate cert;
  cert.kind = CertKind::Sampled;
  cert.pairs_checked = static_cast<long long>(pairs.size());
  cert.max_ratio = max_ratio;
  return cert;
}

CommutingFamily::CommutingFamily(std::shared_ptr<const ConvexBody> body,
                                 std::vector<CertifiedMap> maps)
    : body_(std::move(body)), maps_(std::move(maps)) {
  if (!body_) throw ContractViolation("family needs a body");
  if (maps_.empty()) throw ContractViolation("family needs at least one map");
  for (const auto& m : maps_)
    if (m.body_ptr().get() != body_.get())
      throw ContractViolation("family maps must share one body");
}

namespace {

AffineForm compose_forms(const AffineForm& outer, const AffineForm& inner) {
  AffineForm out;
  out.linear = matmul(outer.linear, inner.linear);
  out.offset = add(matvec(outer.linear, inner.offset), outer.offset);
  return out;
}

double form_entry_defect(const AffineForm& a, const AffineForm& b) {
  double best = 0.0;
  for (std::size_t k = 0; k < a.linear.a.size(); ++k)
    best = std::max(best, std::fabs(a.linear.a[k] - b.linear.a[k]));
  for (std::size_t k = 0; k < a.offset.size(); ++k)
    best = std::max(best, std::fabs(a.offset[k] - b.offset[k]));
  return best;
}

}  // namespace

double commuting_defect(const CertifiedMap& a, const CertifiedMap& b,
                        long long samples, std::uint64_t seed, Vec* worst_x) {
  const auto& space = a.body().space();
  const auto pts = a.body().sample_points(static_cast<int>(samples),
                                          derive_seed(seed, "commute"));
  double best = 0.0;
  Vec t1, t2, u1, u2;
  for (const auto& x : pts) {
    a.eval_unchecked(x, t1);
    b.eval_unchecked(t1, u1);
    b.eval_unchecked(x, t2);
    a.eval_unchecked(t2, u2);
    const double defect = space.distance(u1, u2);
    if (defect > best) {
      best = defect;
      if (worst_x != nullptr) *worst_x = x;
    }
  }
  return best;
}

CommutingCert certify_commuting(const CommutingFamily& family,
                                long long samples, std::uint64_t seed) {
  const auto& maps = family.maps();
  const auto& space = family.body().space();
  const int n = family.size();

  std::vector<std::optional<AffineForm>> forms;
  forms.reserve(maps.size());
  bool all_affine = true;
  for (const auto& m : maps) {
    forms.push_back(m.affine_form());
    if (!forms.back()) all_affine = false;
  }

  if (all_affine) {
    double max_defect = 0.0;
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        const AffineForm ij = compose_forms(*forms[static_cast<std::size_t>(i)],
                                            *forms[static_cast<std::size_t>(j)]);
        const AffineForm ji = compose_forms(*forms[static_cast<std::size_t>(j)],
                                            *forms[static_cast<std::size_t>(i)]);
        const double defect = form_entry_defect(ij, ji);
        max_defect = std::max(max_defect, defect);
        if (defect > 1e-12) {
          Vec worst_x;
          const double point_defect = commuting_defect(
              maps[static_cast<std::size_t>(i)], maps[static_cast<std::size_t>(j)],
              std::max<long long>(samples, 8), seed, &worst_x);
          throw NonCommutingError(
              "maps '" + maps[static_cast<std::size_t>(i)].name() + "' and '" +
                  maps[static_cast<std::size_t>(j)].name() +
                  "' do not commute (affine defect " + std::to_string(defect) +
                  ")",
              i, j, worst_x, point_defect);
        }
      }
    }
    CommutingCert cert;
    cert.kind = CommutingCert::Kind::ProvedAffine;
    cert.max_defect = max_defect;
    return cert;
  }

  if (samples < 1) throw ContractViolation("samples must be >= 1");
  const auto pts = family.body().sample_points(static_cast<int>(samples),
                                               derive_seed(seed, "commute"));
  double max_defect = 0.0;
  Vec t1, t2, u1, u2;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      for (const auto& x : pts) {
        maps[static_cast<std::size_t>(i)].eval_unchecked(x, t1);
        maps[static_cast<std::size_t>(j)].eval_unchecked(t1, u1);
        maps[static_cast<std::size_t>(j)].eval_unchecked(x, t2);
        maps[static_cast<std::size_t>(i)].eval_unchecked(t2, u2);
        const double defect = space.distance(u1, u2);
        if (defect > 1e-8)
          throw NonCommutingError(
              "maps '" + maps[static_cast<std::size_t>(i)].name() + "' and '" +
                  maps[static_cast<std::size_t>(j)].name() +
                  "' do not commute at a sampled point (defect " +
                  std::to_string(defect) + ")",
              i, j, x, defect);
        max_defect = std::max(max_defect, defect);
      }
    }
  }
  CommutingCert cert;
  cert.kind = CommutingCert::Kind::Sampled;
  cert.max_defect = max_defect;
  cert.samples = static_cast<long long>(pts.size());
  return cert;
}

}  // namespace retractor
