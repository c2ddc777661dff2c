#include "retractor/trace.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "retractor/errors.hpp"

namespace retractor {

void write_trace_csv(const std::string& path, const std::vector<TraceRow>& rows) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open trace file for writing: " + path);
  out << "stage,iteration,step_norm,residual\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%d,%lld,%.17g,%.17g\n", r.stage,
                  r.iteration, r.step_norm, r.residual);
    out << buf;
  }
}

std::vector<TraceRow> read_trace_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open trace file: " + path);
  std::string line;
  if (!std::getline(in, line) ||
      line.rfind("stage,iteration,step_norm,residual", 0) != 0)
    throw ParseError("trace file missing expected header: " + path);
  std::vector<TraceRow> rows;
  long long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    TraceRow r;
    std::istringstream ss(line);
    char c1 = 0, c2 = 0, c3 = 0;
    if (!(ss >> r.stage >> c1 >> r.iteration >> c2 >> r.step_norm >> c3 >>
          r.residual) ||
        c1 != ',' || c2 != ',' || c3 != ',')
      throw ParseError("malformed trace row at line " + std::to_string(line_no) +
                       " in " + path);
    rows.push_back(r);
  }
  return rows;
}

}  // namespace retractor
