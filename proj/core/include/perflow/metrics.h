#ifndef PERFLOW_METRICS_H_
#define PERFLOW_METRICS_H_

#include <stdexcept>
#include <vector>

namespace perflow::metrics {

class MetricsError : public std::runtime_error {
 public:
  explicit MetricsError(const std::string& what) : std::runtime_error(what) {}
};

/// Jain fairness index J = (sum x)^2 / (N sum x^2), in [1/N, 1].
/// Throws for an empty or all-zero vector.
double JainIndex(const std::vector<double>& x);

/// Per-window delivered volume, one row per window tiling the
/// measurement interval.
struct WindowedTrace {
  double window = 0.0;                           // s
  std::vector<std::vector<double>> delivered;    // [window][flow], bits
};

/// Mean of per-window Jain indices; windows with zero total traffic are
/// skipped (their index is undefined).  Throws on an empty trace.
double WindowedJain(const WindowedTrace& trace);

/// Jain index of whole-run totals.
double LongTermJain(const std::vector<double>& totals);

/// delivered/sent; throws when nothing was sent.
double GoodputRatio(double delivered_bits, double sent_bits);

/// Aggregate throughput over capacity.
double Utilization(const std::vector<double>& throughputs, double capacity);

}  // namespace perflow::metrics

#endif  // PERFLOW_METRICS_H_
