#include "perflow/metrics.h"

namespace perflow::metrics {

double JainIndex(const std::vector<double>& x) {
  if (x.empty()) throw MetricsError("jain index of an empty vector");
  double sum = 0.0;
  double sum_sq = 0.0;
  for (double v : x) {
    if (v < 0.0) throw MetricsError("jain index requires non-negative input");
    sum += v;
    sum_sq += v * v;
  }
  if (sum_sq == 0.0) throw MetricsError("jain index of an all-zero vector");
  return sum * sum / (static_cast<double>(x.size()) * sum_sq);
}

double WindowedJain(const WindowedTrace& trace) {
  if (trace.delivered.empty()) throw MetricsError("empty windowed trace");
  double acc = 0.0;
  int counted = 0;
  for (const auto& row : trace.delivered) {
    double total = 0.0;
    for (double v : row) total += v;
    if (total <= 0.0) continue;  // undefined during idle/warmup windows
    acc += JainIndex(row);
    ++counted;
  }
  if (counted == 0) throw MetricsError("windowed trace carried no traffic");
  return acc / counted;
}

double LongTermJain(const std::vector<double>& totals) {
  return JainIndex(totals);
}

double GoodputRatio(double delivered_bits, double sent_bits) {
  if (sent_bits <= 0.0) throw MetricsError("goodput ratio with nothing sent");
  return delivered_bits / sent_bits;
}

double Utilization(const std::vector<double>& throughputs, double capacity) {
  double total = 0.0;
  for (double x : throughputs) total += x;
  return total / capacity;
}

}  // namespace perflow::metrics
