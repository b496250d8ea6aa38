#ifndef PERFLOW_SUMMARY_H_
#define PERFLOW_SUMMARY_H_

#include <optional>
#include <vector>

namespace perflow {

/// Per-flow steady-state statistics in canonical units.
struct FlowStats {
  double sending_rate = 0.0;  // Abar_k, pkt/s
  double throughput = 0.0;    // Xbar_k, pkt/s
  double mean_queue = 0.0;    // Qbar_k, pkt
  double loss_rate = 0.0;     // Lbar_k, pkt/s
};

/// The SQF stationary limit cycle for two TCP flows.  One full cycle is
/// one service phase per flow; phase k (k in-service) lasts 2C/alpha_k.
/// Evaluators take the time offset from the start of the phase.
struct LimitCycle {
  std::vector<double> phase_durations;  // 2C/alpha_k, phase order = flow order
  double period = 0.0;                  // sum of phase durations
  double capacity = 0.0;                // C, pkt/s
  double buffer = 0.0;                  // B, pkt
  std::vector<double> ramp_slopes;      // alpha_k, pkt/s^2

  /// Sending rate of the in-service flow k: alpha_k * t.
  double RateInService(int k, double t) const;
  /// Sending rate of the other flow while k is in service (two-flow cycle):
  /// the closed-form decay from 2C driven by flow k's ramp.
  double RateDecaying(int k, double t) const;
  /// Virtual queue of the in-service flow k: dips below B/2 and returns.
  double QueueInService(int k, double t) const;
  /// Complementary queue of the other flow (two-flow cycle): B - Q_k.
  double QueueOther(int k, double t) const;
};

struct SteadyStateSummary {
  std::vector<FlowStats> flows;
  double utilization = 0.0;                 // sum Xbar / C
  std::optional<double> cycle_period;       // SQF only
  std::optional<LimitCycle> limit_cycle;    // SQF analytic only

  double total_throughput() const {
    double s = 0.0;
    for (const auto& f : flows) s += f.throughput;
    return s;
  }
};

}  // namespace perflow

#endif  // PERFLOW_SUMMARY_H_
