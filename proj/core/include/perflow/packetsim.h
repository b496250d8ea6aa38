#ifndef PERFLOW_PACKETSIM_H_
#define PERFLOW_PACKETSIM_H_

#include <vector>

#include "perflow/metrics.h"
#include "perflow/scenario.h"

// Packet-level discrete-event simulator: AIMD TCP sources and CBR UDP
// sources through one bottleneck with per-flow virtual queues in a shared
// memory of B packets, longest-queue-drop push-out, and an FQ (deficit
// round robin), LQF or SQF scheduler.  Entirely deterministic given
// (scenario, seed).
//
// Deliberate simplifications: loss detection is an RTT-delayed
// notification per dropped packet (no dupACK/SACK machinery), the ACK
// path is lossless with one-way delays of PD/2, and flows start cold
// (FlowSpec::initial_queue is a fluid-model concept and is ignored here).
//
// A TCP source that receives no ACK for 2*(PD + B/C) collapses its
// window to one segment and emits a single probe past the window.  This
// coarse stand-in for Reno's retransmission timeout lets a starved flow
// keep probing; without it a flow whose queue the scheduler ignores
// would jam forever, which no real TCP does.  Every packet owns exactly
// one feedback slot (ACK or delayed loss notification), so in-flight
// accounting stays exact.

namespace perflow::packet {

/// Next queue to serve.  FQ: round robin over backlogged flows (DRR with
/// a one-packet quantum and equal sizes).  LQF: longest queue.  SQF:
/// shortest non-empty queue.  Ties break toward the lowest flow id.
/// At least one queue must be non-empty.
int SchedulerSelect(const std::vector<int>& queue_lengths,
                    Discipline discipline, int& rr_cursor);

/// Outcome of admitting one packet to the shared memory.
struct AdmitResult {
  bool enqueued = false;
  int pushed_out = -1;  // victim flow when a push-out occurred
};

/// Longest-queue-drop admission.  Below capacity the packet is enqueued.
/// At capacity, the arrival is dropped if its own queue is (or ties as)
/// the longest, otherwise the longest queue loses its tail packet and the
/// arrival takes the slot.  Occupancy never exceeds buffer_pkts.
AdmitResult LqdAdmit(std::vector<int>& queue_lengths, int buffer_pkts,
                     int flow);

/// AIMD window state of one TCP source.
struct TcpState {
  double cwnd = 1.0;     // packets, real-valued
  double ssthresh = 0.0; // below it the window grows one segment per ACK
  int in_flight = 0;     // sent, feedback (ack or loss notice) pending
  double last_cut_time = -1e300;
  int losses_in_window = 0;  // absorbed since the last cut
};

/// cwnd += 1/cwnd in congestion avoidance, += 1 below ssthresh (the
/// post-stall recovery ramp; also the initial ramp when the optional
/// slow-start mode is on).
void TcpOnAck(TcpState& state);

/// Loss notification: halve at most once per RTT window; one extra loss
/// within the window is absorbed, a third collapses the window to one
/// segment with slow-start recovery, the way a loss burst ends in a
/// Reno timeout.  Never drops below one packet.  Returns whether the
/// window changed.
bool TcpOnLoss(TcpState& state, double now, double rtt_window);

struct FlowCounters {
  long long sent = 0;
  long long delivered = 0;
  long long dropped = 0;
};

struct PacketSimOptions {
  double warmup = 0.0;     // s excluded from measured rates
  double window = 0.5;     // s, short-term fairness window
  bool slow_start = false; // optional qualitative mode, off for analysis
};

struct PacketSimReport {
  // Measured over [warmup, horizon], canonical units.
  std::vector<double> throughput;    // delivered pkt/s
  std::vector<double> sending_rate;  // sent pkt/s
  std::vector<double> loss_rate;     // dropped pkt/s
  std::vector<double> mean_queue;    // time-averaged pkt
  double utilization = 0.0;
  double goodput_ratio = 0.0;        // aggregate delivered/sent
  metrics::WindowedTrace windows;    // delivered bits per window, post-warmup

  // Full-run accounting for conservation checks.
  std::vector<FlowCounters> counters;
  std::vector<int> final_queue;
  std::vector<int> final_in_link;       // 0/1, packet on the wire at horizon
  std::vector<int> final_acks_pending;  // delivered, ACK still in flight
  std::vector<int> final_notifies_pending;  // dropped, notify still in flight
  int max_occupancy = 0;  // highest shared-memory fill seen
  std::vector<double> final_cwnd;
  std::vector<int> final_in_flight;
  double measured_interval = 0.0;
};

PacketSimReport RunPacketSim(const Scenario& scenario);
PacketSimReport RunPacketSim(const Scenario& scenario,
                             const PacketSimOptions& options);

}  // namespace perflow::packet

#endif  // PERFLOW_PACKETSIM_H_
