#include <doctest.h>

#include <cmath>
#include <memory>

#include "retractor/errors.hpp"
#include "retractor/oracles.hpp"
#include "retractor/resolvent.hpp"
#include "retractor/retraction.hpp"

using namespace retractor;

namespace {

constexpr double kPi = 3.14159265358979323846;

std::shared_ptr<const ConvexBody> shared_ball(int dim, NormKind kind) {
  return std::make_shared<const ConvexBody>(ConvexBody::ball(
      make_space(dim, kind), Vec(static_cast<std::size_t>(dim), 0.0), 1.0));
}

CertifiedMap certified_rotation(std::shared_ptr<const ConvexBody> body,
                                double angle_rad) {
  CertifiedMap map("rot", body,
                   CertifiedMap::Rotation2D{
                       Vec(static_cast<std::size_t>(body->space().dim), 0.0),
                       angle_rad});
  map.set_certificate(certify_nonexpansive(map, 100, 1));
  return map;
}

}  // namespace

TEST_CASE("banach_solve: linear halving contracts to the origin") {
  const auto space = make_space(2, NormKind::L2);
  const BufferedMap f = [](const Vec& z, Vec& out) {
    out = {0.5 * z[0], 0.5 * z[1]};
  };
  const auto r = banach_solve(f, space, {1.0, 0.0}, 0.5, 1e-8, 10000);
  CHECK(space.norm(r.point) <= 1e-8);
  CHECK(r.stats.residual <= 1e-8);
}

TEST_CASE("banach_solve: constant map returns its value immediately") {
  const auto space = make_space(2, NormKind::L2);
  const BufferedMap f = [](const Vec&, Vec& out) { out = {0.2, -0.3}; };
  const auto r = banach_solve(f, space, {1.0, 0.0}, 0.0, 1e-10, 100);
  CHECK(r.point == Vec{0.2, -0.3});
  CHECK(r.stats.residual == 0.0);
  CHECK(r.stats.iterations_used <= 2);
}

TEST_CASE("banach_solve agrees with the linear-solve oracle") {
  // f(z) = x/2 + (1/2) Q z, Q the quarter turn, x = (1, 0).
  const auto space = make_space(2, NormKind::L2);
  const double c = std::cos(kPi / 2.0), s = std::sin(kPi / 2.0);
  const BufferedMap f = [&](const Vec& z, Vec& out) {
    out = {0.5 + 0.5 * (c * z[0] - s * z[1]), 0.5 * (s * z[0] + c * z[1])};
  };
  const auto r = banach_solve(f, space, {1.0, 0.0}, 0.5, 1e-10, 100000);

  Matrix half_q(2, 2);
  half_q(0, 0) = 0.5 * c;
  half_q(0, 1) = -0.5 * s;
  half_q(1, 0) = 0.5 * s;
  half_q(1, 1) = 0.5 * c;
  const auto oracle = affine_fixed_point_oracle(half_q, {0.5, 0.0});
  CHECK(oracle.point[0] == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(oracle.point[1] == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(space.distance(r.point, oracle.point) <= 1e-9);
}

TEST_CASE("banach_solve respects the a-priori iteration bound") {
  const auto space = make_space(1, NormKind::L2);
  const double q = 0.9;
  const BufferedMap f = [q](const Vec& z, Vec& out) { out = {q * z[0] + 0.05}; };
  const auto r = banach_solve(f, space, {0.0}, q, 1e-8, 100000);
  const auto& st = r.stats;
  REQUIRE(st.first_step > 0.0);
  const double threshold = st.tol * (1.0 - st.q);
  const long long bound =
      static_cast<long long>(
          std::ceil(std::log(threshold / st.first_step) / std::log(st.q))) +
      1;
  CHECK(st.iterations_used <= bound);
}

TEST_CASE("banach_solve flags a bad modulus via max_iter") {
  const auto space = make_space(1, NormKind::L2);
  const BufferedMap f = [](const Vec& z, Vec& out) { out = {-z[0] + 1.0}; };
  CHECK_THROWS_AS(banach_solve(f, space, {0.0}, 0.5, 1e-10, 50),
                  ConvergenceError);
}

TEST_CASE("resolve: identity map is a fixed point of the recursion") {
  const auto body = shared_ball(2, NormKind::L2);
  CertifiedMap id = make_identity(body);
  id.set_certificate(certify_nonexpansive(id, 100, 1));
  for (long long n : {1, 7, 100}) {
    const auto r = resolve(id, {0.3, 0.4}, n, 1e-10);
    CHECK(body->space().distance(r.point, {0.3, 0.4}) <= 1e-12);
    CHECK(r.residual_T <= 1e-12);
  }
}

TEST_CASE("resolve: constant map matches the closed form") {
  const auto body = shared_ball(2, NormKind::L2);
  const Vec c = {0.2, -0.4};
  CertifiedMap constant("const", body, CertifiedMap::Affine{Matrix(2, 2), c});
  constant.set_certificate(certify_nonexpansive(constant, 100, 1));
  const Vec x = {0.5, 0.5};
  const long long n = 8;
  const auto r = resolve(constant, x, n, 1e-12);
  const double alpha = 1.0 / static_cast<double>(n);
  for (int i = 0; i < 2; ++i)
    CHECK(r.point[i] ==
          doctest::Approx(alpha * x[i] + (1.0 - alpha) * c[i]).epsilon(1e-9));
}

TEST_CASE("resolve: quarter-turn rotation at n = 2") {
  const auto body = shared_ball(2, NormKind::L2);
  const auto rot = certified_rotation(body, kPi / 2.0);
  const auto r = resolve(rot, {1.0, 0.0}, 2, 1e-10);
  CHECK(r.point[0] == doctest::Approx(0.4).epsilon(1e-8));
  CHECK(r.point[1] == doctest::Approx(0.2).epsilon(1e-8));
  // ||T z - z|| = ||(-0.2, 0.4) - (0.4, 0.2)|| = sqrt(0.4)
  CHECK(r.residual_T == doctest::Approx(std::sqrt(0.4)).epsilon(1e-7));
  CHECK(r.residual_T <= body->diameter() / 2.0 + 2e-10);
}

TEST_CASE("resolvent residual bound, nonexpansiveness, residual identity") {
  const auto body = shared_ball(3, NormKind::L2);
  const double tol = 1e-8;
  std::vector<CertifiedMap> maps;
  maps.push_back(certified_rotation(body, 1.1));
  Matrix a(3, 3);
  a(0, 0) = 0.5;
  a(0, 1) = 0.2;
  a(1, 0) = 0.1;
  a(1, 1) = 0.6;
  a(2, 2) = -0.7;
  CertifiedMap affine("aff", body, CertifiedMap::Affine{a, {0.0, 0.0, 0.0}});
  affine.set_certificate(certify_nonexpansive(affine, 100, 1));
  maps.push_back(affine);

  const auto& space = body->space();
  const auto pts = body->sample_points(40, 9);
  Vec tz;
  for (const auto& map : maps) {
    for (long long n : {10, 100}) {
      const double bound = body->diameter() / static_cast<double>(n) + 2.0 * tol;
      for (std::size_t k = 0; k < pts.size(); ++k) {
        const auto r = resolve(map, pts[k], n, tol);
        CHECK(r.residual_T <= bound);
        map.eval_unchecked(r.point, tz);
        const double identity_rhs =
            space.distance(tz, pts[k]) / static_cast<double>(n);
        CHECK(std::fabs(r.residual_T - identity_rhs) <= 4.0 * tol);
        if (k + 1 < pts.size()) {
          const auto r2 = resolve(map, pts[k + 1], n, tol);
          CHECK(space.distance(r.point, r2.point) <=
                space.distance(pts[k], pts[k + 1]) + 4.0 * tol);
        }
      }
    }
  }
}

TEST_CASE("resolve refuses uncertified maps unless overridden") {
  const CertifiedMap sq = square_map_example(2);
  CHECK_THROWS_AS(resolve(sq, {0.0, 0.0}, 4, 1e-6), CertificationError);
  // Override: from the origin the square map resolvent converges fine.
  const auto r = resolve(sq, {0.0, 0.0}, 4, 1e-6, nullptr, 1, true);
  CHECK(r.residual_T <= 1e-5);
}

TEST_CASE("single_retraction: identity map gives the identity") {
  const auto body = shared_ball(2, NormKind::L2);
  CertifiedMap id = make_identity(body);
  id.set_certificate(certify_nonexpansive(id, 100, 1));
  const auto proc = single_retraction(id, 1e-3);
  const auto [y, diag] = proc.apply({0.4, -0.2});
  CHECK(body->space().distance(y, {0.4, -0.2}) <= 1e-12);
  CHECK(diag.max_residual <= 1e-12);
}

TEST_CASE("single_retraction: constant map moves x by ||x - c|| / n*") {
  const auto body = shared_ball(2, NormKind::L2);
  const Vec c = {0.1, 0.2};
  CertifiedMap constant("const", body, CertifiedMap::Affine{Matrix(2, 2), c});
  constant.set_certificate(certify_nonexpansive(constant, 100, 1));
  const double eps = 1e-3;
  const auto proc = single_retraction(constant, eps);
  CHECK(proc.leaf().n_star == 2000);  // ceil(diam / eps) with diam = 2
  const Vec x = {0.9, 0.0};
  const auto [y, diag] = proc.apply(x);
  const double expected = body->space().distance(x, c) / 2000.0;
  CHECK(body->space().distance(y, c) ==
        doctest::Approx(expected).epsilon(1e-3));
  CHECK(body->space().distance(y, c) <= 5e-4 * body->space().distance(x, c) * 1.01);
}

TEST_CASE("single_retraction: rotation lands near the unique fixed point") {
  const auto body = shared_ball(2, NormKind::L2);
  const auto rot = certified_rotation(body, kPi / 2.0);
  const double eps = 1e-3;
  const auto proc = single_retraction(rot, eps);
  const auto [y, diag] = proc.apply({1.0, 0.0});
  CHECK(diag.max_residual <= eps + 2.0 * eps / 10.0);
  // Fix T = {0}; sigma_min(Q - I) = sqrt(2) bounds the distance.
  CHECK(body->space().norm(y) <= diag.max_residual / std::sqrt(2.0) + 1e-9);
}

TEST_CASE("single_retraction: near-fixed inputs move within the bound") {
  const auto body = shared_ball(2, NormKind::L2);
  const auto rot = certified_rotation(body, kPi / 2.0);
  const auto proc = single_retraction(rot, 1e-2);
  const Vec x = {1e-5, -1e-5};  // almost fixed: ||Tx - x|| ~ 2.8e-5
  const auto [y, diag] = proc.apply(x);
  REQUIRE(std::isfinite(diag.movement_bound));
  CHECK(diag.input_residual <= 3e-5);
  CHECK(diag.movement <= diag.movement_bound + 1e-12);
}
