#ifndef PERFLOW_FLUID_H_
#define PERFLOW_FLUID_H_

#include <iosfwd>
#include <limits>
#include <stdexcept>
#include <vector>

#include "perflow/scenario.h"
#include "perflow/summary.h"

// Fluid ODE engine: sending rates A_k and virtual queues Q_k of N
// long-lived flows through one bottleneck, integrated with fixed-step
// explicit Euler.  The right-hand side is discontinuous (indicator
// functions at queue boundaries and tie sets), which is why no
// higher-order or adaptive scheme is used.

namespace perflow::fluid {

class FluidError : public std::runtime_error {
 public:
  explicit FluidError(const std::string& what) : std::runtime_error(what) {}
};

/// Per-flow departure rates under the given discipline.
///   FQ : water-filling; a flow with an (almost) empty queue sending below
///        the fair share keeps its arrival rate, backlogged flows split
///        the residue equally.
///   LQF: the longest-queue tie set absorbs the capacity in proportion to
///        arrival rates.
///   SQF: shortest-queue groups absorb capacity in ascending order; an
///        empty group can take no more than it receives and passes the
///        residue on.
/// Work conservation: sum D = C whenever sum Q > 0 or sum A >= C, and
/// sum D = sum A otherwise.  Queues within `tie_eps` form one tie set.
std::vector<double> DepartureRates(const std::vector<double>& rates,
                                   const std::vector<double>& queues,
                                   double capacity, Discipline discipline,
                                   double tie_eps = 0.0);

/// Longest-queue-drop loss rates.  Zero unless the total queue is within
/// `full_eps` of the buffer.  A single strictly-longest queue takes the
/// whole excess (sum A - C)+; a tie set takes (A_k - D_k)+ each.
std::vector<double> LossRates(const std::vector<double>& rates,
                              const std::vector<double>& queues,
                              const std::vector<double>& departures,
                              double buffer, double capacity,
                              double tie_eps = 0.0, double full_eps = 0.0);

/// Instantaneous fluid state (loss history lives inside the engine).
struct FluidState {
  double t = 0.0;
  std::vector<double> rates;   // A_k, pkt/s
  std::vector<double> queues;  // Q_k, pkt
};

struct Derivatives {
  std::vector<double> d_rates;
  std::vector<double> d_queues;
  std::vector<double> departures;
  std::vector<double> losses;
};

/// One evaluation of the ODE right-hand side.  `delayed_losses`, when
/// given, replaces the instantaneous loss term in the rate equation
/// (the delayed-detection path of the engine).
Derivatives Rhs(const FluidState& state, const Scenario& scenario,
                const std::vector<double>* delayed_losses = nullptr);

/// Sampled run of the fluid system.  Per-flow instantaneous values are
/// flattened as [sample * n + k].  Cumulative time-integrals from t = 0
/// are stored at every sample so that exact step-resolution means over
/// any window can be recovered afterwards.
struct Trajectory {
  Scenario scenario;
  double dt = 0.0;
  int num_flows = 0;

  std::vector<double> time;
  std::vector<double> rate, queue, departure, loss;
  std::vector<double> cum_rate, cum_queue, cum_departure, cum_loss;

  // Times at which the flow holding (almost) the whole service changed,
  // and which flow took over.  Empty for disciplines without phases.
  std::vector<double> service_switch_times;
  std::vector<int> service_switch_flows;

  // Saturation diagnostics for the persistence invariant.
  double first_saturation_time = std::numeric_limits<double>::infinity();
  double min_total_queue_after_saturation =
      std::numeric_limits<double>::infinity();

  size_t num_samples() const { return time.size(); }
  double end_time() const { return time.empty() ? 0.0 : time.back(); }

  struct Means {
    std::vector<double> rate, queue, departure, loss;
  };
  /// Exact (step-resolution) time averages over [t0, t1].
  Means MeansBetween(double t0, double t1) const;
};

struct SimulateOptions {
  double sample_period = 0.0;  // 0 = auto (~1e5 samples)
  double dt_override = 0.0;    // 0 = min(min PD/200, 50 us)
};

Trajectory Simulate(const Scenario& scenario);
Trajectory Simulate(const Scenario& scenario, const SimulateOptions& options);

/// Time averages over [warmup, horizon] plus utilization and, when
/// service-phase alternations were observed, the mean cycle period.
SteadyStateSummary Summarize(const Trajectory& trajectory, double warmup);

/// CSV export: t,A1..AN,Q1..QN,D1..DN,L1..LN (pkt/s, pkt, s).
void WriteTrajectoryCsv(const Trajectory& trajectory, std::ostream& out);

}  // namespace perflow::fluid

#endif  // PERFLOW_FLUID_H_
