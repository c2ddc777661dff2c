#include "retractor/pipeline.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "retractor/rng.hpp"
#include "retractor/suite.hpp"
#include "retractor/trace.hpp"

namespace retractor {

using nlohmann::json;

int log_level() {
  const char* env = std::getenv("RETRACTOR_LOG");
  if (env == nullptr) return 0;
  const std::string v(env);
  if (v == "debug") return 2;
  if (v == "info") return 1;
  return 0;
}

namespace {

void log_info(std::ostream& err, const std::string& msg) {
  if (log_level() >= 1) err << "[retractor] " << msg << "\n";
}

std::string format_point(const Vec& v) {
  std::ostringstream s;
  s << "(";
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i > 0) s << ", ";
    s << v[i];
  }
  s << ")";
  return s.str();
}

void apply_overrides(ProblemSpec& spec, const CliOverrides& overrides) {
  if (overrides.eps) spec.solver.eps = *overrides.eps;
  if (overrides.gamma) spec.solver.gamma = *overrides.gamma;
  if (overrides.max_iter) spec.solver.max_iter = *overrides.max_iter;
  if (overrides.seed) spec.solver.seed = *overrides.seed;
  if (overrides.report_path) spec.outputs.report_path = *overrides.report_path;
  if (overrides.trace_path) spec.outputs.trace_path = *overrides.trace_path;
  if (!(spec.solver.eps > 0.0)) throw ParseError("eps must be > 0");
  if (!(spec.solver.gamma > 0.0 && spec.solver.gamma < 1.0))
    throw ParseError("gamma must lie in (0, 1)");
}

/// Certify every map and the family. Returns false (and prints a witness)
/// when certification fails without the override flag; with the override
/// the failing maps keep their Unchecked certificate.
bool certify_problem(Problem& problem, CommutingFamily& family,
                     bool allow_uncertified, std::ostream& err,
                     std::string* witness_out) {
  const std::uint64_t seed = problem.spec.solver.seed;
  for (auto& map : problem.maps) {
    try {
      map.set_certificate(certify_nonexpansive(map, 200, seed));
    } catch (const CertificationError& e) {
      if (!allow_uncertified) {
        std::ostringstream w;
        w << "certification failed: " << e.what();
        if (!e.witness_x.empty())
          w << "\n  witness pair: x = " << format_point(e.witness_x)
            << ", y = " << format_point(e.witness_y)
            << ", expansion ratio = " << e.value;
        *witness_out = w.str();
        return false;
      }
      log_info(err, "override: map '" + map.name() + "' stays uncertified (" +
                        e.what() + ")");
    }
  }

  std::vector<CertifiedMap> selected;
  for (int idx : problem.spec.family)
    selected.push_back(problem.maps[static_cast<std::size_t>(idx)]);
  family = CommutingFamily(problem.body, std::move(selected));

  bool any_unchecked = false;
  for (const auto& m : family.maps())
    if (m.certificate().kind == CertKind::Unchecked) any_unchecked = true;

  try {
    family.set_certificate(certify_commuting(family, 200, seed));
  } catch (const NonCommutingError& e) {
    if (!allow_uncertified || !any_unchecked) {
      std::ostringstream w;
      w << "commutativity failed: " << e.what() << "\n  witness: (i, j) = ("
        << e.index_i << ", " << e.index_j
        << "), x = " << format_point(e.witness_x) << ", defect = " << e.defect;
      *witness_out = w.str();
      return false;
    }
    family.set_certificate(CommutingCert{});
  }
  return true;
}

json diagnostics_to_json(const ApplyDiagnostics& diag) {
  json j;
  j["residuals"] = diag.residuals;
  j["max_residual"] = diag.max_residual;
  j["movement"] = diag.movement;
  j["resolvent_iterations"] = diag.resolvent_iterations;
  j["km_iterations"] = diag.km_iterations;
  j["extensions"] = diag.extensions;
  json stages = json::array();
  for (const auto& s : diag.stages)
    stages.push_back({{"stage", s.stage},
                      {"iterations", s.iterations},
                      {"final_step", s.final_step},
                      {"stage_residual", s.stage_residual}});
  j["stages"] = stages;
  return j;
}

json negative_control_diagnostics(const CommutingFamily& family,
                                  const SolverSpec& solver) {
  json out = json::array();
  for (const auto& map : family.maps()) {
    if (map.certificate().kind != CertKind::Unchecked) continue;
    const SelfMapFn s = [&map](const Vec& z, Vec& o) {
      map.eval_unchecked(z, o);
    };
    const auto starts = map.body().sample_points(3, solver.seed);
    for (const auto& x0 : starts) {
      const KMResult res = km_iterate(s, map.body().space(), x0, solver.gamma,
                                      1e-8, 2000, nullptr, 0, false);
      const RegularityReport rep = asymptotic_regularity_check(res.trace);
      out.push_back({{"map", map.name()},
                     {"start", x0},
                     {"iterations", res.trace.iterations},
                     {"monotone", rep.monotone},
                     {"first_violation", rep.first_violation},
                     {"worst_gap", rep.worst_gap}});
    }
  }
  return out;
}

void write_report(const std::string& path, const json& j, std::ostream& err) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open report file for writing: " + path);
  out << j.dump(2) << "\n";
  log_info(err, "report written to " + path);
}

}  // namespace

int run_solve(const std::string& spec_path, const CliOverrides& overrides,
              std::ostream& out, std::ostream& err) {
  const auto t_start = std::chrono::steady_clock::now();
  ProblemSpec spec;
  Problem problem;
  try {
    spec = load_problem_file(spec_path);
    apply_overrides(spec, overrides);
    problem = materialize(spec);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitParse;
  }

  const std::string report_path = spec.outputs.report_path.empty()
                                      ? "report.json"
                                      : spec.outputs.report_path;
  const std::string trace_path =
      spec.outputs.trace_path.empty() ? "trace.csv" : spec.outputs.trace_path;

  CommutingFamily family(problem.body, {make_identity(problem.body)});
  std::string witness;
  try {
    if (!certify_problem(problem, family, overrides.allow_uncertified, err,
                         &witness)) {
      err << witness << "\n";
      return kExitCertification;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitParse;
  }

  json report;
  report["schema_version"] = 1;
  report["mode"] = "solve";
  report["problem_digest"] = problem_digest(spec);
  report["seed"] = spec.solver.seed;
  report["certificates"] = certificates_to_json(problem, family);

  bool any_unchecked = false;
  for (const auto& m : family.maps())
    if (m.certificate().kind == CertKind::Unchecked) any_unchecked = true;
  if (any_unchecked)
    report["negative_control"] =
        negative_control_diagnostics(family, spec.solver);

  TraceSink trace;
  try {
    RetractionOptions opts;
    opts.gamma = spec.solver.gamma;
    opts.allow_unchecked = overrides.allow_uncertified;
    const RetractionProc proc = build_retraction(
        family, spec.solver.eps, spec.solver.step_tol, spec.solver.max_iter,
        opts);

    json jb;
    jb["residual_schedule"] = proc.build_report().residual_schedule;
    jb["extensions"] = proc.build_report().extensions;
    jb["probe_residuals"] = proc.build_report().probe_residuals;
    report["build"] = jb;

    const auto points = problem.evaluation_points();
    json evals = json::array();
    double max_residual = 0.0;
    long long total_resolvent = 0, total_km = 0;
    for (const auto& x : points) {
      const auto [y, diag] = proc.apply(x, &trace);
      max_residual = std::max(max_residual, diag.max_residual);
      total_resolvent += diag.resolvent_iterations;
      total_km += diag.km_iterations;
      json e;
      e["x"] = x;
      e["y"] = y;
      e["diagnostics"] = diagnostics_to_json(diag);
      evals.push_back(e);
    }
    report["evaluations"] = evals;
    json summary;
    summary["max_residual"] = max_residual;
    summary["stages"] = proc.family_size();
    summary["resolvent_iterations"] = total_resolvent;
    summary["km_iterations"] = total_km;
    summary["points"] = points.size();
    report["summary"] = summary;

    const auto t_end = std::chrono::steady_clock::now();
    report["timings"] = {
        {"total_ms",
         std::chrono::duration<double, std::milli>(t_end - t_start).count()}};

    write_trace_csv(trace_path, trace.rows());
    write_report(report_path, report, err);
    out << "solve ok: max_residual=" << max_residual
        << " stages=" << proc.family_size()
        << " resolvent_iterations=" << total_resolvent
        << " km_iterations=" << total_km << " report=" << report_path
        << " trace=" << trace_path << "\n";
    return kExitOk;
  } catch (const ConvergenceError& e) {
    report["error"] = e.what();
    const auto t_end = std::chrono::steady_clock::now();
    report["timings"] = {
        {"total_ms",
         std::chrono::duration<double, std::milli>(t_end - t_start).count()}};
    try {
      write_trace_csv(trace_path, trace.rows());
      write_report(report_path, report, err);
    } catch (const std::exception&) {
      // keep the convergence status even if artifacts cannot be written
    }
    err << "convergence failure: " << e.what() << "\n"
        << "trace written to " << trace_path << "\n";
    return kExitConvergence;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitParse;
  }
}

int run_verify(const std::string& spec_path, const CliOverrides& overrides,
               std::ostream& out, std::ostream& err) {
  ProblemSpec spec;
  Problem problem;
  try {
    spec = load_problem_file(spec_path);
    apply_overrides(spec, overrides);
    problem = materialize(spec);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitParse;
  }

  CommutingFamily family(problem.body, {make_identity(problem.body)});
  std::string witness;
  try {
    if (!certify_problem(problem, family, overrides.allow_uncertified, err,
                         &witness)) {
      err << witness << "\n";
      return kExitCertification;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitParse;
  }

  RunReport report;
  try {
    report = run_property_suite(problem, spec.solver.seed);
  } catch (const NonCommutingError& e) {
    err << "commutativity failed: " << e.what() << "\n";
    return kExitCertification;
  }

  const std::string report_path = spec.outputs.report_path.empty()
                                      ? "report.json"
                                      : spec.outputs.report_path;
  try {
    write_report(report_path, report.to_json(true), err);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitParse;
  }

  int passed = 0, failed = 0, skipped_count = 0;
  for (const auto& a : report.audits) {
    switch (a.status) {
      case AuditResult::Status::Pass:
        ++passed;
        break;
      case AuditResult::Status::Fail:
        ++failed;
        err << "invariant failed: " << a.name << " (margin " << a.margin
            << "): " << a.detail << "\n";
        break;
      case AuditResult::Status::Skipped:
        ++skipped_count;
        break;
    }
  }
  out << "verify: " << passed << " passed, " << failed << " failed, "
      << skipped_count << " skipped; report=" << report_path << "\n";
  return failed == 0 ? kExitOk : kExitInvariant;
}

int run_trace_plotdata(const std::string& trace_path,
                       const std::string& out_path, std::ostream& out,
                       std::ostream& err) {
  std::vector<TraceRow> rows;
  try {
    rows = read_trace_csv(trace_path);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitParse;
  }

  // One series per stage, ordered by stage id; row order within a stage is
  // preserved so concatenated runs stay plottable.
  std::map<int, json> series;
  for (const auto& r : rows) {
    json& s = series[r.stage];
    if (s.is_null()) {
      s["stage"] = r.stage;
      s["iterations"] = json::array();
      s["step_norms"] = json::array();
      s["residuals"] = json::array();
    }
    s["iterations"].push_back(r.iteration);
    s["step_norms"].push_back(r.step_norm);
    s["residuals"].push_back(r.residual);
  }
  json j;
  j["stages"] = json::array();
  for (auto& [stage, s] : series) j["stages"].push_back(std::move(s));

  if (out_path.empty()) {
    out << j.dump(2) << "\n";
  } else {
    std::ofstream f(out_path);
    if (!f) {
      err << "error: cannot open output file " << out_path << "\n";
      return kExitParse;
    }
    f << j.dump(2) << "\n";
  }
  return kExitOk;
}

}  // namespace retractor
