#include "retractor/problem.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "retractor/errors.hpp"
#include "retractor/rng.hpp"

namespace retractor {

using nlohmann::json;

namespace {

constexpr double kDegToRad = 0.017453292519943295;

Vec parse_vec(const json& j, const char* what) {
  if (!j.is_array()) throw ParseError(std::string(what) + " must be an array");
  Vec v;
  v.reserve(j.size());
  for (const auto& t : j) {
    if (!t.is_number()) throw ParseError(std::string(what) + " must be numeric");
    v.push_back(t.get<double>());
  }
  return v;
}

std::vector<Vec> parse_vec_list(const json& j, const char* what) {
  if (!j.is_array()) throw ParseError(std::string(what) + " must be an array");
  std::vector<Vec> out;
  out.reserve(j.size());
  for (const auto& row : j) out.push_back(parse_vec(row, what));
  return out;
}

NormKind parse_norm_kind(const std::string& s) {
  if (s == "l1") return NormKind::L1;
  if (s == "l2") return NormKind::L2;
  if (s == "linf") return NormKind::LInf;
  if (s == "weighted_l1") return NormKind::WeightedL1;
  throw ParseError("unknown norm '" + s + "'");
}

ScalarMap parse_scalar_map(const json& j) {
  if (!j.is_object() || !j.contains("op"))
    throw ParseError("coordwise part needs an 'op'");
  const std::string op = j.at("op").get<std::string>();
  if (op == "identity") return scalar_identity();
  if (op == "scale") return scalar_scale(j.at("factor").get<double>());
  if (op == "clamp")
    return scalar_clamp(j.at("lo").get<double>(), j.at("hi").get<double>());
  if (op == "shift_clamp")
    return scalar_shift_clamp(j.at("shift").get<double>(),
                              j.at("lo").get<double>(),
                              j.at("hi").get<double>());
  throw ParseError("unknown coordwise op '" + op + "'");
}

json scalar_map_to_json(const ScalarMap& m) {
  json j;
  switch (m.op) {
    case ScalarMap::Op::Identity:
      j["op"] = "identity";
      break;
    case ScalarMap::Op::Scale:
      j["op"] = "scale";
      j["factor"] = m.factor;
      break;
    case ScalarMap::Op::Clamp:
      j["op"] = "clamp";
      j["lo"] = m.lo;
      j["hi"] = m.hi;
      break;
    case ScalarMap::Op::ShiftClamp:
      j["op"] = "shift_clamp";
      j["shift"] = m.shift;
      j["lo"] = m.lo;
      j["hi"] = m.hi;
      break;
  }
  return j;
}

MapSpec parse_map_spec(const json& j) {
  if (!j.is_object()) throw ParseError("map descriptor must be an object");
  MapSpec m;
  m.name = j.value("name", std::string{});
  if (!j.contains("kind")) throw ParseError("map descriptor needs a 'kind'");
  m.kind = j.at("kind").get<std::string>();
  if (m.kind == "affine") {
    m.matrix = parse_vec_list(j.at("matrix"), "affine matrix");
    m.offset = parse_vec(j.at("offset"), "affine offset");
  } else if (m.kind == "rotation2d") {
    m.center = parse_vec(j.at("center"), "rotation center");
    m.angle_deg = j.at("angle_deg").get<double>();
  } else if (m.kind == "isometry") {
    for (const auto& t : j.at("perm")) m.perm.push_back(t.get<int>());
    m.signs = parse_vec(j.at("signs"), "isometry signs");
  } else if (m.kind == "coordwise") {
    for (const auto& p : j.at("parts")) m.parts.push_back(parse_scalar_map(p));
  } else if (m.kind == "square_map") {
    // no parameters
  } else if (m.kind == "composite") {
    for (const auto& p : j.at("parts")) m.composite.push_back(parse_map_spec(p));
  } else {
    throw ParseError("unknown map kind '" + m.kind + "'");
  }
  return m;
}

json map_spec_to_json(const MapSpec& m) {
  json j;
  j["name"] = m.name;
  j["kind"] = m.kind;
  if (m.kind == "affine") {
    j["matrix"] = m.matrix;
    j["offset"] = m.offset;
  } else if (m.kind == "rotation2d") {
    j["center"] = m.center;
    j["angle_deg"] = m.angle_deg;
  } else if (m.kind == "isometry") {
    j["perm"] = m.perm;
    j["signs"] = m.signs;
  } else if (m.kind == "coordwise") {
    json parts = json::array();
    for (const auto& p : m.parts) parts.push_back(scalar_map_to_json(p));
    j["parts"] = parts;
  } else if (m.kind == "composite") {
    json parts = json::array();
    for (const auto& p : m.composite) parts.push_back(map_spec_to_json(p));
    j["parts"] = parts;
  }
  return j;
}

CertifiedMap::Kind build_map_kind(const MapSpec& m, int dim,
                                  const std::shared_ptr<const ConvexBody>& body);

CertifiedMap build_map(const MapSpec& m, const std::shared_ptr<const ConvexBody>& body) {
  const int dim = body->space().dim;
  std::string name = m.name.empty() ? m.kind : m.name;
  return CertifiedMap(std::move(name), body, build_map_kind(m, dim, body));
}

CertifiedMap::Kind build_map_kind(const MapSpec& m, int dim,
                                  const std::shared_ptr<const ConvexBody>& body) {
  if (m.kind == "affine") {
    if (static_cast<int>(m.matrix.size()) != dim)
      throw ParseError("affine matrix must have one row per dimension");
    Matrix a(dim, dim);
    for (int i = 0; i < dim; ++i) {
      if (static_cast<int>(m.matrix[static_cast<std::size_t>(i)].size()) != dim)
        throw ParseError("affine matrix rows must have length dim");
      for (int j = 0; j < dim; ++j)
        a(i, j) = m.matrix[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
    return CertifiedMap::Affine{std::move(a), m.offset};
  }
  if (m.kind == "rotation2d")
    return CertifiedMap::Rotation2D{m.center, m.angle_deg * kDegToRad};
  if (m.kind == "isometry") return CertifiedMap::Isometry{m.perm, m.signs};
  if (m.kind == "coordwise") return CertifiedMap::CoordWise{m.parts};
  if (m.kind == "square_map") return CertifiedMap::SquareMap{};
  if (m.kind == "composite") {
    CertifiedMap::Composite comp;
    for (const auto& p : m.composite) comp.parts.push_back(build_map(p, body));
    return comp;
  }
  throw ParseError("unknown map kind '" + m.kind + "'");
}

}  // namespace

ProblemSpec parse_problem(const json& j) {
  if (!j.is_object()) throw ParseError("problem spec must be a JSON object");
  ProblemSpec spec;
  try {
    spec.version = j.value("version", 1);
    if (spec.version != 1)
      throw ParseError("unsupported spec version " + std::to_string(spec.version));

    const auto& js = j.at("space");
    spec.space.dim = js.at("dim").get<int>();
    spec.space.norm = parse_norm_kind(js.value("norm", std::string("l2")));
    if (js.contains("weights"))
      spec.space.weights = parse_vec(js.at("weights"), "space weights");

    const auto& jb = j.at("body");
    spec.body.kind = jb.value("kind", std::string("ball"));
    if (spec.body.kind == "ball") {
      spec.body.center = jb.contains("center")
                             ? parse_vec(jb.at("center"), "ball center")
                             : Vec(static_cast<std::size_t>(spec.space.dim), 0.0);
      spec.body.radius = jb.value("radius", 1.0);
    } else if (spec.body.kind == "box") {
      spec.body.lower = parse_vec(jb.at("lower"), "box lower");
      spec.body.upper = parse_vec(jb.at("upper"), "box upper");
    } else if (spec.body.kind == "simplex") {
      spec.body.scale = jb.value("scale", 1.0);
    } else if (spec.body.kind == "hull") {
      spec.body.vertices = parse_vec_list(jb.at("vertices"), "hull vertices");
    } else {
      throw ParseError("unknown body kind '" + spec.body.kind + "'");
    }

    if (!j.contains("maps") || !j.at("maps").is_array() || j.at("maps").empty())
      throw ParseError("problem needs a nonempty 'maps' array");
    for (const auto& jm : j.at("maps")) spec.maps.push_back(parse_map_spec(jm));

    if (j.contains("family")) {
      for (const auto& t : j.at("family")) spec.family.push_back(t.get<int>());
    } else {
      for (int i = 0; i < static_cast<int>(spec.maps.size()); ++i)
        spec.family.push_back(i);
    }
    if (spec.family.empty()) throw ParseError("family must be nonempty");
    for (int idx : spec.family)
      if (idx < 0 || idx >= static_cast<int>(spec.maps.size()))
        throw ParseError("family index " + std::to_string(idx) +
                         " out of range");

    if (j.contains("solver")) {
      const auto& jo = j.at("solver");
      spec.solver.eps = jo.value("eps", 1e-6);
      spec.solver.gamma = jo.value("gamma", 0.5);
      spec.solver.step_tol = jo.value("step_tol", 0.0);
      spec.solver.inner_tol = jo.value("inner_tol", 0.0);
      spec.solver.max_iter = jo.value("max_iter", 1'000'000LL);
      spec.solver.seed = jo.value("seed", std::uint64_t{1});
    }
    if (!(spec.solver.eps > 0.0)) throw ParseError("solver.eps must be > 0");
    if (!(spec.solver.gamma > 0.0 && spec.solver.gamma < 1.0))
      throw ParseError("solver.gamma must lie in (0, 1)");
    if (spec.solver.max_iter < 1) throw ParseError("solver.max_iter must be >= 1");

    if (j.contains("outputs")) {
      const auto& jo = j.at("outputs");
      spec.outputs.report_path = jo.value("report_path", std::string{});
      spec.outputs.trace_path = jo.value("trace_path", std::string{});
      if (jo.contains("eval_points"))
        spec.outputs.eval_points =
            parse_vec_list(jo.at("eval_points"), "eval points");
      spec.outputs.sample_count = jo.value("sample_count", 8);
    }
    if (spec.outputs.sample_count < 0)
      throw ParseError("outputs.sample_count must be >= 0");
  } catch (const json::exception& e) {
    throw ParseError(std::string("invalid problem spec: ") + e.what());
  }
  return spec;
}

ProblemSpec load_problem_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open spec file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ParseError("malformed JSON in " + path + ": " + e.what());
  }
  return parse_problem(j);
}

json problem_to_json(const ProblemSpec& spec) {
  json j;
  j["version"] = spec.version;
  json js;
  js["dim"] = spec.space.dim;
  js["norm"] = norm_kind_name(spec.space.norm);
  if (spec.space.norm == NormKind::WeightedL1) js["weights"] = spec.space.weights;
  j["space"] = js;

  json jb;
  jb["kind"] = spec.body.kind;
  if (spec.body.kind == "ball") {
    jb["center"] = spec.body.center;
    jb["radius"] = spec.body.radius;
  } else if (spec.body.kind == "box") {
    jb["lower"] = spec.body.lower;
    jb["upper"] = spec.body.upper;
  } else if (spec.body.kind == "simplex") {
    jb["scale"] = spec.body.scale;
  } else {
    jb["vertices"] = spec.body.vertices;
  }
  j["body"] = jb;

  json maps = json::array();
  for (const auto& m : spec.maps) maps.push_back(map_spec_to_json(m));
  j["maps"] = maps;
  j["family"] = spec.family;

  json jo;
  jo["eps"] = spec.solver.eps;
  jo["gamma"] = spec.solver.gamma;
  jo["step_tol"] = spec.solver.step_tol;
  jo["inner_tol"] = spec.solver.inner_tol;
  jo["max_iter"] = spec.solver.max_iter;
  jo["seed"] = spec.solver.seed;
  j["solver"] = jo;

  json jout;
  jout["report_path"] = spec.outputs.report_path;
  jout["trace_path"] = spec.outputs.trace_path;
  jout["eval_points"] = spec.outputs.eval_points;
  jout["sample_count"] = spec.outputs.sample_count;
  j["outputs"] = jout;
  return j;
}

std::string problem_digest(const ProblemSpec& spec) {
  const std::string canonical = problem_to_json(spec).dump();
  std::uint64_t h = fnv1a(canonical);
  std::ostringstream out;
  out << std::hex << h;
  return out.str();
}

CommutingFamily Problem::make_family() const {
  std::vector<CertifiedMap> selected;
  selected.reserve(spec.family.size());
  for (int idx : spec.family)
    selected.push_back(maps[static_cast<std::size_t>(idx)]);
  return CommutingFamily(body, std::move(selected));
}

std::vector<Vec> Problem::evaluation_points() const {
  std::vector<Vec> pts = spec.outputs.eval_points;
  for (const auto& p : pts) body->space().require_dim(p);
  const auto sampled =
      body->sample_points(spec.outputs.sample_count + 1, spec.solver.seed);
  pts.insert(pts.end(), sampled.begin(), sampled.end());
  return pts;
}

Problem materialize(const ProblemSpec& spec) {
  Problem p;
  p.spec = spec;
  const NormedSpace space =
      make_space(spec.space.dim, spec.space.norm, spec.space.weights);

  if (spec.body.kind == "ball") {
    p.body = std::make_shared<const ConvexBody>(
        ConvexBody::ball(space, spec.body.center, spec.body.radius));
  } else if (spec.body.kind == "box") {
    p.body = std::make_shared<const ConvexBody>(
        ConvexBody::box(space, spec.body.lower, spec.body.upper));
  } else if (spec.body.kind == "simplex") {
    p.body = std::make_shared<const ConvexBody>(
        ConvexBody::simplex(space, spec.body.scale));
  } else {
    p.body = std::make_shared<const ConvexBody>(
        ConvexBody::hull(space, spec.body.vertices));
  }

  for (const auto& m : spec.maps) p.maps.push_back(build_map(m, p.body));
  return p;
}

}  // namespace retractor
