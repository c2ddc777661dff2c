#ifndef RETRACTOR_PROBLEM_HPP
#define RETRACTOR_PROBLEM_HPP

#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "retractor/maps.hpp"

namespace retractor {

// JSON problem description. Every field has a literal default applied at
// parse time, so a spec with all fields explicit reproduces the defaulted
// behavior bit for bit, and parse -> serialize -> parse is the identity.

struct SpaceSpec {
  int dim = 1;
  NormKind norm = NormKind::L2;
  Vec weights;  // weighted_l1 only
};

struct BodySpec {
  std::string kind = "ball";  // ball | box | simplex | hull
  Vec center;                 // ball
  double radius = 1.0;        // ball
  Vec lower, upper;           // box
  double scale = 1.0;         // simplex
  std::vector<Vec> vertices;  // hull
};

struct MapSpec {
  std::string name;
  std::string kind;  // affine | rotation2d | isometry | coordwise |
                     // square_map | composite
  std::vector<Vec> matrix;  // affine, row by row
  Vec offset;               // affine
  Vec center;               // rotation2d
  double angle_deg = 0.0;   // rotation2d
  std::vector<int> perm;    // isometry
  Vec signs;                // isometry
  std::vector<ScalarMap> parts;      // coordwise
  std::vector<MapSpec> composite;    // composite
};

struct SolverSpec {
  double eps = 1e-6;
  double gamma = 0.5;
  double step_tol = 0.0;   // 0 = derive gamma * eps_k per stage
  double inner_tol = 0.0;  // 0 = derive eps / 10
  long long max_iter = 1'000'000;
  std::uint64_t seed = 1;
};

struct OutputSpec {
  std::string report_path;
  std::string trace_path;
  std::vector<Vec> eval_points;
  int sample_count = 8;  // sampled evaluation points on top of the center
};

struct ProblemSpec {
  int version = 1;
  SpaceSpec space;
  BodySpec body;
  std::vector<MapSpec> maps;
  std::vector<int> family;  // indices into maps; defaults to all, in order
  SolverSpec solver;
  OutputSpec outputs;
};

ProblemSpec parse_problem(const nlohmann::json& j);
ProblemSpec load_problem_file(const std::string& path);
nlohmann::json problem_to_json(const ProblemSpec& spec);

/// FNV-1a hash of the canonical serialized spec, hex encoded.
std::string problem_digest(const ProblemSpec& spec);

/// Materialized problem: geometry and maps built, certificates not yet
/// attached (the pipeline certifies explicitly so failures map to its exit
/// statuses).
struct Problem {
  ProblemSpec spec;  // resolved spec (defaults applied)
  std::shared_ptr<const ConvexBody> body;
  std::vector<CertifiedMap> maps;

  CommutingFamily make_family() const;
  /// Explicit evaluation points plus sampled ones (center first).
  std::vector<Vec> evaluation_points() const;
};

Problem materialize(const ProblemSpec& spec);

}  // namespace retractor

#endif  // RETRACTOR_PROBLEM_HPP
