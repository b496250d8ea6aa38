#ifndef PERFLOW_SCENARIO_H_
#define PERFLOW_SCENARIO_H_

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace perflow {

enum class Discipline { kFq, kLqf, kSqf };
enum class RttMode { kConstant, kQueueAugmented };
enum class DetectionMode { kInstantaneous, kDelayed };
enum class FlowKind { kTcp, kUdpCbr };

const char* ToString(Discipline d);
const char* ToString(RttMode m);
const char* ToString(DetectionMode m);
const char* ToString(FlowKind k);

/// Error raised by scenario parsing or validation.  The message names the
/// offending key or the violated invariant.
class ScenarioError : public std::runtime_error {
 public:
  explicit ScenarioError(const std::string& what) : std::runtime_error(what) {}
};

/// One long-lived traffic source.  Exactly the fields of its kind are
/// meaningful: TCP flows carry a propagation RTT, UDP (CBR) flows a
/// constant rate.
struct FlowSpec {
  FlowKind kind = FlowKind::kTcp;
  double propagation_rtt = 0.0;  // s, TCP only (symbol PD_k)
  double rate = 0.0;             // pkt/s, UDP only
  double initial_rate = 0.0;     // pkt/s
  double initial_queue = 0.0;    // pkt

  bool is_tcp() const { return kind == FlowKind::kTcp; }
};

/// Declarative description of one bottleneck experiment.  Immutable after
/// construction/validation; safe to share across concurrent runs.
struct Scenario {
  double capacity = 0.0;  // pkt/s
  double buffer = 0.0;    // pkt (whole packets)
  int packet_bytes = 1500;
  Discipline discipline = Discipline::kFq;
  std::vector<FlowSpec> flows;
  double horizon = 0.0;  // s
  RttMode rtt_mode = RttMode::kConstant;
  DetectionMode detection_mode = DetectionMode::kInstantaneous;
  std::uint64_t seed = 1;

  int num_flows() const { return static_cast<int>(flows.size()); }
  double capacity_mbps() const;
  double mbps(double pkts_per_s) const;

  /// Throws ScenarioError naming the first violated invariant.
  void Validate() const;
};

/// AIMD ramp slope alpha_k = 1/PD_k^2 (pkt/s^2, one-segment numerator).
/// Throws ScenarioError for UDP flows.
double AlphaOf(const FlowSpec& flow);

/// Parses the `key = value` scenario format (see scenarios/ for examples).
/// Returns a validated Scenario in canonical units.
Scenario LoadScenario(std::string_view text);
Scenario LoadScenarioFile(const std::string& path);

/// Applies a `key=value` override ("flowN.key" addresses flow N, 1-based),
/// then revalidates.  Used by the CLI --set and sweep machinery.
void ApplyOverride(Scenario& scenario, const std::string& key,
                   const std::string& value);

}  // namespace perflow

#endif  // PERFLOW_SCENARIO_H_
