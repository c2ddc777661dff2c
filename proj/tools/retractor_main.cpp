#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "retractor/pipeline.hpp"

int main(int argc, char** argv) {
  CLI::App app{
      "retractor: common fixed points of commuting nonexpansive maps via "
      "resolvents, averaged iteration, and recursive retractions"};
  app.require_subcommand(1);

  std::string spec_path;
  std::string trace_in;
  std::string plot_out;
  retractor::CliOverrides overrides;
  double eps = 0.0, gamma = 0.0;
  long long max_iter = 0;
  std::uint64_t seed = 0;
  std::string report_path, trace_path;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("spec", spec_path, "problem spec (JSON)")->required();
    cmd->add_option("--eps", eps, "override solver.eps");
    cmd->add_option("--gamma", gamma, "override solver.gamma");
    cmd->add_option("--seed", seed, "override solver.seed");
    cmd->add_option("--max-iter", max_iter, "override solver.max_iter");
    cmd->add_option("--report", report_path, "report output path");
    cmd->add_option("--trace", trace_path, "trace CSV output path");
    cmd->add_flag("--allow-uncertified", overrides.allow_uncertified,
                  "run even when certification fails (negative controls)");
  };

  CLI::App* solve = app.add_subcommand(
      "solve", "certify, build the retraction, apply it, write report/trace");
  add_common(solve);

  CLI::App* verify =
      app.add_subcommand("verify", "run the property suite only");
  add_common(verify);

  CLI::App* plot = app.add_subcommand(
      "trace-plotdata", "turn a trace CSV into per-stage plot series");
  plot->add_option("trace", trace_in, "trace CSV path")->required();
  plot->add_option("--out", plot_out, "output path (default: stdout)");

  CLI11_PARSE(app, argc, argv);

  auto collect = [&](CLI::App* cmd) {
    if (cmd->count("--eps") > 0) overrides.eps = eps;
    if (cmd->count("--gamma") > 0) overrides.gamma = gamma;
    if (cmd->count("--max-iter") > 0) overrides.max_iter = max_iter;
    if (cmd->count("--seed") > 0) overrides.seed = seed;
    if (cmd->count("--report") > 0) overrides.report_path = report_path;
    if (cmd->count("--trace") > 0) overrides.trace_path = trace_path;
  };

  try {
    if (solve->parsed()) {
      collect(solve);
      return retractor::run_solve(spec_path, overrides, std::cout, std::cerr);
    }
    if (verify->parsed()) {
      collect(verify);
      return retractor::run_verify(spec_path, overrides, std::cout, std::cerr);
    }
    return retractor::run_trace_plotdata(trace_in, plot_out, std::cout,
                                         std::cerr);
  } catch (const std::exception& e) {
    std::cerr << "fatal: " << e.what() << "\n";
    return 1;
  }
}
