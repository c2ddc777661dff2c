#ifndef RETRACTOR_TRACE_HPP
#define RETRACTOR_TRACE_HPP

#include <string>
#include <vector>

namespace retractor {

/// One row of the iteration trace. Stage 1 is the base resolvent of a
/// retraction tower; stage k >= 2 are the averaging stages stacked on top.
struct TraceRow {
  int stage = 0;
  long long iteration = 0;
  double step_norm = 0.0;
  double residual = 0.0;
};

/// Collects iteration rows from solvers; written out as CSV with the fixed
/// column set (stage, iteration, step_norm, residual).
class TraceSink {
 public:
  void add(int stage, long long iteration, double step_norm, double residual) {
    rows_.push_back(TraceRow{stage, iteration, step_norm, residual});
  }

  const std::vector<TraceRow>& rows() const { return rows_; }
  void clear() { rows_.clear(); }

 private:
  std::vector<TraceRow> rows_;
};

void write_trace_csv(const std::string& path, const std::vector<TraceRow>& rows);

/// Throws ParseError on a missing file or malformed rows.
std::vector<TraceRow> read_trace_csv(const std::string& path);

}  // namespace retractor

#endif  // RETRACTOR_TRACE_HPP
