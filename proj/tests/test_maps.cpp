#include <doctest.h>

#include <cmath>
#include <memory>

#include "retractor/errors.hpp"
#include "retractor/maps.hpp"

using namespace retractor;

namespace {

constexpr double kPi = 3.14159265358979323846;

std::shared_ptr<const ConvexBody> shared_ball(int dim, NormKind kind,
                                              double radius = 1.0) {
  return std::make_shared<const ConvexBody>(ConvexBody::ball(
      make_space(dim, kind), Vec(static_cast<std::size_t>(dim), 0.0), radius));
}

CertifiedMap rotation(std::shared_ptr<const ConvexBody> body, double angle_rad,
                      Vec center = {}) {
  if (center.empty())
    center.assign(static_cast<std::size_t>(body->space().dim), 0.0);
  return CertifiedMap("rot", std::move(body),
                      CertifiedMap::Rotation2D{std::move(center), angle_rad});
}

}  // namespace

TEST_CASE("rotation eval: quarter turn") {
  const auto body = shared_ball(2, NormKind::L2);
  const auto rot = rotation(body, kPi / 2.0);
  const Vec y = rot({1.0, 0.0});
  CHECK(y[0] == doctest::Approx(0.0));
  CHECK(y[1] == doctest::Approx(1.0));
}

TEST_CASE("square map: fixed points of the truncation") {
  const CertifiedMap sq3 = square_map_example(3);
  CHECK(sq3({1.0, 0.0, 0.0}) == Vec{1.0, 0.0, 0.0});
  CHECK(sq3({0.0, 0.0, 0.0}) == Vec{0.0, 0.0, 0.0});  // fixed in truncation
  const CertifiedMap sq2 = square_map_example(2);
  CHECK(sq2({-1.0, 0.0}) == Vec{1.0, 0.0});  // (-1, 0) is not fixed
  CHECK(sq2.certificate().kind == CertKind::Unchecked);
}

TEST_CASE("constant affine map sends everything to its offset") {
  const auto body = shared_ball(2, NormKind::L2);
  const CertifiedMap constant(
      "const", body, CertifiedMap::Affine{Matrix(2, 2), {0.3, -0.1}});
  CHECK(constant({0.9, 0.1}) == Vec{0.3, -0.1});
  CHECK(constant({-0.5, 0.5}) == Vec{0.3, -0.1});
}

TEST_CASE("eval enforces domain and self-map contracts") {
  const auto body = shared_ball(2, NormKind::L2);
  const auto rot = rotation(body, 0.3);
  CHECK_THROWS_AS(rot({2.0, 0.0}), DomainError);
  const CertifiedMap shift(
      "shift", body, CertifiedMap::Affine{Matrix::identity(2), {1.0, 0.0}});
  CHECK_THROWS_AS(shift({0.9, 0.0}), SelfMapViolation);
}

TEST_CASE("certify: affine induced L1 norm with brute-force column oracle") {
  const auto body = shared_ball(2, NormKind::L1);
  Matrix a(2, 2);
  a(0, 0) = 0.5;
  a(0, 1) = 0.2;
  a(1, 0) = 0.3;
  a(1, 1) = 0.6;
  // Brute force: max over columns of absolute column sums.
  double oracle = 0.0;
  for (int j = 0; j < 2; ++j) {
    double s = 0.0;
    for (int i = 0; i < 2; ++i) s += std::fabs(a(i, j));
    oracle = std::max(oracle, s);
  }
  CHECK(oracle == doctest::Approx(0.8));
  const CertifiedMap map("aff", body, CertifiedMap::Affine{a, {0.0, 0.0}});
  const Certificate cert = certify_nonexpansive(map, 100, 1);
  CHECK(cert.kind == CertKind::Proved);
  CHECK(cert.lipschitz == doctest::Approx(oracle).epsilon(1e-12));
}

TEST_CASE("certify: rotations are exact L2 isometries") {
  for (double angle : {0.3, 1.1, kPi / 2.0, 2.9}) {
    const auto body = shared_ball(2, NormKind::L2);
    const Certificate cert =
        certify_nonexpansive(rotation(body, angle), 100, 1);
    CHECK(cert.kind == CertKind::Proved);
    CHECK(cert.lipschitz == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("certify: rotation under L1 is rejected as expansive") {
  const auto body = shared_ball(2, NormKind::L1);
  CHECK_THROWS_AS(certify_nonexpansive(rotation(body, kPi / 4.0), 100, 1),
                  CertificationError);
}

TEST_CASE("certify: square map rejection carries the documented witness") {
  const CertifiedMap sq = square_map_example(2);
  // Direct evaluation of the documented pair: T(1,0) = (1,0),
  // T(0.5,0) = (0.25,0), so the L1 expansion ratio is 0.75/0.5 = 1.5.
  const Vec tx = sq({1.0, 0.0});
  const Vec ty = sq({0.5, 0.0});
  const auto& space = sq.body().space();
  CHECK(space.distance(tx, ty) / space.distance({1.0, 0.0}, {0.5, 0.0}) ==
        doctest::Approx(1.5));
  try {
    certify_nonexpansive(sq, 200, 1);
    FAIL("expected rejection");
  } catch (const CertificationError& e) {
    CHECK(e.value >= 1.5 - 1e-9);
    CHECK_FALSE(e.witness_x.empty());
    CHECK_FALSE(e.witness_y.empty());
    const double ratio = space.distance(sq(e.witness_x), sq(e.witness_y)) /
                         space.distance(e.witness_x, e.witness_y);
    CHECK(ratio == doctest::Approx(e.value).epsilon(1e-9));
  }
}

TEST_CASE("certify: isometry under weighted L1 can be expansive") {
  const auto body = std::make_shared<const ConvexBody>(ConvexBody::ball(
      make_space(2, NormKind::WeightedL1, {1.0, 2.0}), {0.0, 0.0}, 1.0));
  const CertifiedMap swap("swap", body,
                          CertifiedMap::Isometry{{1, 0}, {1.0, 1.0}});
  CHECK_THROWS_AS(certify_nonexpansive(swap, 100, 1), CertificationError);
}

TEST_CASE("certify: coordwise gets the max per-coordinate constant") {
  const auto body = shared_ball(3, NormKind::LInf);
  const CertifiedMap cw(
      "cw", body,
      CertifiedMap::CoordWise{
          {scalar_scale(0.4), scalar_clamp(-0.5, 0.5), scalar_scale(-0.9)}});
  const Certificate cert = certify_nonexpansive(cw, 100, 1);
  CHECK(cert.kind == CertKind::Proved);
  CHECK(cert.lipschitz == doctest::Approx(1.0));  // clamp contributes 1
}

TEST_CASE("composite certificate is bounded by the factor product") {
  const auto body = shared_ball(2, NormKind::L2);
  CertifiedMap rot = rotation(body, 0.7);
  const CertifiedMap half(
      "half", body,
      CertifiedMap::CoordWise{{scalar_scale(0.5), scalar_scale(0.5)}});
  CertifiedMap::Composite comp;
  comp.parts = {rot, half};
  const CertifiedMap composite("comp", body, std::move(comp));
  const Certificate cert = certify_nonexpansive(composite, 100, 1);
  CHECK(cert.kind == CertKind::Proved);
  CHECK(cert.lipschitz <= 1.0 * 0.5 + 1e-9);
  // Exact spectral norm of the affine composition: 0.5.
  CHECK(cert.lipschitz == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("proved maps respect their constant on sampled pairs") {
  const auto body = shared_ball(3, NormKind::L1);
  Matrix a(3, 3);
  a(0, 0) = 0.5;
  a(0, 1) = 0.2;
  a(1, 0) = 0.3;
  a(1, 1) = 0.6;
  a(2, 2) = 0.4;
  CertifiedMap map("aff", body, CertifiedMap::Affine{a, {0.0, 0.0, 0.0}});
  map.set_certificate(certify_nonexpansive(map, 100, 1));
  const double lip = map.certificate().lipschitz;
  const auto& space = body->space();
  const auto pts = body->sample_points(20000, 17);
  Vec tx, ty;
  for (std::size_t k = 0; k + 1 < pts.size(); k += 2) {
    map.eval_unchecked(pts[k], tx);
    map.eval_unchecked(pts[k + 1], ty);
    CHECK(space.distance(tx, ty) <=
          lip * space.distance(pts[k], pts[k + 1]) + 1e-9);
  }
}

TEST_CASE("commuting: rotations about a common center are ProvedAffine") {
  const auto body = shared_ball(2, NormKind::L2);
  std::vector<CertifiedMap> maps;
  maps.push_back(rotation(body, 0.4));
  maps.push_back(rotation(body, 1.9));
  const CommutingFamily family(body, std::move(maps));
  const CommutingCert cert = certify_commuting(family, 100, 1);
  CHECK(cert.kind == CommutingCert::Kind::ProvedAffine);
  CHECK(cert.max_defect <= 1e-12);
}

TEST_CASE("commuting: identity commutes with everything") {
  const auto body = shared_ball(2, NormKind::L2);
  std::vector<CertifiedMap> maps;
  maps.push_back(make_identity(body));
  maps.push_back(rotation(body, 1.2));
  const CommutingCert cert =
      certify_commuting(CommutingFamily(body, std::move(maps)), 100, 1);
  CHECK(cert.kind == CommutingCert::Kind::ProvedAffine);
  CHECK(cert.max_defect <= 1e-12);
}

TEST_CASE("commuting: off-center rotations produce a witness") {
  const auto body = shared_ball(2, NormKind::L2, 4.0);
  std::vector<CertifiedMap> maps;
  maps.push_back(rotation(body, kPi / 2.0, {0.0, 0.0}));
  maps.push_back(rotation(body, kPi / 2.0, {0.5, 0.0}));

  // Hand check at x = (0, 0): the two composition orders land at
  // (0.5, 0.5) and (0.5, -0.5).
  Vec t1, u1, t2, u2;
  maps[0].eval_unchecked({0.0, 0.0}, t1);
  maps[1].eval_unchecked(t1, u1);
  maps[1].eval_unchecked({0.0, 0.0}, t2);
  maps[0].eval_unchecked(t2, u2);
  CHECK(u1[0] == doctest::Approx(0.5));
  CHECK(u1[1] == doctest::Approx(-0.5));
  CHECK(u2[0] == doctest::Approx(0.5));
  CHECK(u2[1] == doctest::Approx(0.5));

  try {
    certify_commuting(CommutingFamily(body, std::move(maps)), 100, 1);
    FAIL("expected a witness");
  } catch (const NonCommutingError& e) {
    CHECK(e.index_i == 0);
    CHECK(e.index_j == 1);
    CHECK(e.defect > 1e-8);
    CHECK_FALSE(e.witness_x.empty());
  }
}

TEST_CASE("catalog maps send 1000 sampled points back into their body") {
  const auto l2 = shared_ball(3, NormKind::L2);
  const auto l1 = shared_ball(3, NormKind::L1);
  std::vector<CertifiedMap> maps;
  maps.push_back(rotation(l2, 1.3));
  maps.push_back(CertifiedMap(
      "iso", l1, CertifiedMap::Isometry{{2, 0, 1}, {1.0, -1.0, 1.0}}));
  maps.push_back(CertifiedMap(
      "cw", l2,
      CertifiedMap::CoordWise{
          {scalar_scale(0.7), scalar_clamp(-0.4, 0.4), scalar_identity()}}));
  maps.push_back(square_map_example(3));
  Vec out;
  for (const auto& map : maps) {
    const auto pts = map.body().sample_points(1000, 271);
    for (const auto& p : pts) {
      map.eval_unchecked(p, out);
      CHECK(map.body().contains(out, 1e-9));
    }
  }
}

TEST_CASE("eval is bitwise deterministic") {
  const auto body = shared_ball(3, NormKind::L2);
  const auto rot = rotation(body, 0.77);
  const auto pts = body->sample_points(10, 123);
  Vec a, b;
  for (const auto& x : pts) {
    rot.eval_unchecked(x, a);
    rot.eval_unchecked(x, b);
    CHECK(a == b);
  }
}

TEST_CASE("family construction validates shared body") {
  const auto body_a = shared_ball(2, NormKind::L2);
  const auto body_b = shared_ball(2, NormKind::L2);
  std::vector<CertifiedMap> maps;
  maps.push_back(rotation(body_a, 0.1));
  maps.push_back(rotation(body_b, 0.2));
  CHECK_THROWS_AS(CommutingFamily(body_a, std::move(maps)), ContractViolation);
}
