#include <doctest.h>

#include <nlohmann/json.hpp>

#include "retractor/errors.hpp"
#include "retractor/problem.hpp"

using namespace retractor;
using nlohmann::json;

namespace {

json rotations_spec_json() {
  return json::parse(R"({
    "version": 1,
    "space": {"dim": 2, "norm": "l2"},
    "body": {"kind": "ball", "center": [0.0, 0.0], "radius": 1.0},
    "maps": [
      {"name": "rot73", "kind": "rotation2d", "center": [0.0, 0.0], "angle_deg": 73.0},
      {"name": "rot191", "kind": "rotation2d", "center": [0.0, 0.0], "angle_deg": 191.0}
    ],
    "family": [0, 1],
    "solver": {"eps": 1e-06, "gamma": 0.5, "step_tol": 0.0, "inner_tol": 0.0,
               "max_iter": 1000000, "seed": 1},
    "outputs": {"report_path": "", "trace_path": "", "eval_points": [],
                "sample_count": 8}
  })");
}

}  // namespace

TEST_CASE("parse -> serialize -> parse is the identity") {
  const ProblemSpec a = parse_problem(rotations_spec_json());
  const json ja = problem_to_json(a);
  const ProblemSpec b = parse_problem(ja);
  CHECK(problem_to_json(b) == ja);
  CHECK(problem_digest(a) == problem_digest(b));
}

TEST_CASE("defaults live in the schema: minimal and explicit specs agree") {
  const json minimal = json::parse(R"({
    "space": {"dim": 2, "norm": "l2"},
    "body": {"kind": "ball", "center": [0.0, 0.0], "radius": 1.0},
    "maps": [
      {"name": "rot73", "kind": "rotation2d", "center": [0.0, 0.0], "angle_deg": 73.0},
      {"name": "rot191", "kind": "rotation2d", "center": [0.0, 0.0], "angle_deg": 191.0}
    ]
  })");
  const ProblemSpec defaulted = parse_problem(minimal);
  const ProblemSpec explicit_spec = parse_problem(rotations_spec_json());
  CHECK(problem_to_json(defaulted) == problem_to_json(explicit_spec));
  CHECK(defaulted.solver.eps == 1e-6);
  CHECK(defaulted.solver.gamma == 0.5);
  CHECK(defaulted.solver.max_iter == 1'000'000);
  CHECK(defaulted.solver.seed == 1);
  CHECK(defaulted.outputs.sample_count == 8);
  CHECK(defaulted.family == std::vector<int>{0, 1});
}

TEST_CASE("parse rejects malformed specs") {
  CHECK_THROWS_AS(parse_problem(json::parse("[1, 2]")), ParseError);
  json no_maps = rotations_spec_json();
  no_maps.erase("maps");
  CHECK_THROWS_AS(parse_problem(no_maps), ParseError);
  json bad_family = rotations_spec_json();
  bad_family["family"] = {0, 5};
  CHECK_THROWS_AS(parse_problem(bad_family), ParseError);
  json bad_gamma = rotations_spec_json();
  bad_gamma["solver"]["gamma"] = 1.5;
  CHECK_THROWS_AS(parse_problem(bad_gamma), ParseError);
  json bad_eps = rotations_spec_json();
  bad_eps["solver"]["eps"] = -1.0;
  CHECK_THROWS_AS(parse_problem(bad_eps), ParseError);
  json bad_norm = rotations_spec_json();
  bad_norm["space"]["norm"] = "l7";
  CHECK_THROWS_AS(parse_problem(bad_norm), ParseError);
  json bad_kind = rotations_spec_json();
  bad_kind["maps"][0]["kind"] = "mystery";
  CHECK_THROWS_AS(parse_problem(bad_kind), ParseError);
}

TEST_CASE("load_problem_file reports unreadable input") {
  CHECK_THROWS_AS(load_problem_file("/nonexistent/spec.json"), ParseError);
}

TEST_CASE("materialize builds bodies and maps, including composites") {
  json j = rotations_spec_json();
  j["maps"].push_back(json::parse(R"({
    "name": "combo", "kind": "composite", "parts": [
      {"name": "inner_rot", "kind": "rotation2d", "center": [0.0, 0.0], "angle_deg": 30.0},
      {"name": "shrink", "kind": "coordwise", "parts": [
        {"op": "scale", "factor": 0.5}, {"op": "scale", "factor": 0.5}]}
    ]})"));
  j["maps"].push_back(json::parse(R"({
    "name": "iso", "kind": "isometry", "perm": [1, 0], "signs": [1.0, -1.0]})"));
  j["family"] = {0, 1};
  const Problem p = materialize(parse_problem(j));
  CHECK(p.maps.size() == 4);
  CHECK(p.body->diameter() == doctest::Approx(2.0));
  CHECK(p.maps[2].kind_name() == "composite");
  const Vec y = p.maps[2]({0.8, 0.0});
  CHECK(p.body->contains(y, 1e-9));
  CHECK(p.maps[3].kind_name() == "isometry");

  const auto family = p.make_family();
  CHECK(family.size() == 2);
  const auto pts = p.evaluation_points();
  CHECK(pts.size() == 9);  // center + 8 sampled
  CHECK(pts.front() == Vec{0.0, 0.0});
}

TEST_CASE("digest changes when the spec changes") {
  const ProblemSpec a = parse_problem(rotations_spec_json());
  json j = rotations_spec_json();
  j["solver"]["seed"] = 2;
  const ProblemSpec b = parse_problem(j);
  CHECK(problem_digest(a) != problem_digest(b));
}

TEST_CASE("weighted-l1 spaces and the other body kinds round-trip") {
  const json j = json::parse(R"({
    "space": {"dim": 3, "norm": "weighted_l1", "weights": [1.0, 2.0, 0.5]},
    "body": {"kind": "simplex", "scale": 1.5},
    "maps": [{"name": "id", "kind": "coordwise", "parts": [
      {"op": "identity"}, {"op": "identity"}, {"op": "identity"}]}]
  })");
  const ProblemSpec spec = parse_problem(j);
  const json round = problem_to_json(parse_problem(problem_to_json(spec)));
  CHECK(round == problem_to_json(spec));
  const Problem p = materialize(spec);
  CHECK(p.body->space().kind == NormKind::WeightedL1);

  const json box = json::parse(R"({
    "space": {"dim": 2, "norm": "linf"},
    "body": {"kind": "box", "lower": [-1.0, 0.0], "upper": [1.0, 2.0]},
    "maps": [{"name": "sq", "kind": "square_map"}]
  })");
  CHECK(problem_to_json(parse_problem(box)) ==
        problem_to_json(parse_problem(problem_to_json(parse_problem(box)))));

  const json hull = json::parse(R"({
    "space": {"dim": 2, "norm": "l2"},
    "body": {"kind": "hull", "vertices": [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]},
    "maps": [{"name": "id", "kind": "coordwise", "parts": [
      {"op": "identity"}, {"op": "identity"}]}]
  })");
  const Problem hp = materialize(parse_problem(hull));
  CHECK(hp.body->diameter() == doctest::Approx(std::sqrt(2.0)));
}
