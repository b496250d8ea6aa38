#include "perflow/packetsim.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <random>
#include <stdexcept>

#include "perflow/units.h"

namespace perflow::packet {

int SchedulerSelect(const std::vector<int>& queue_lengths,
                    Discipline discipline, int& rr_cursor) {
  const int n = static_cast<int>(queue_lengths.size());
  switch (discipline) {
    case Discipline::kFq: {
      for (int step = 1; step <= n; ++step) {
        int k = (rr_cursor + step) % n;
        if (queue_lengths[static_cast<size_t>(k)] > 0) {
          rr_cursor = k;
          return k;
        }
      }
      break;
    }
    case Discipline::kLqf: {
      int best = -1;
      for (int k = 0; k < n; ++k) {
        if (queue_lengths[static_cast<size_t>(k)] > 0 &&
            (best < 0 || queue_lengths[static_cast<size_t>(k)] >
                             queue_lengths[static_cast<size_t>(best)])) {
          best = k;
        }
      }
      if (best >= 0) return best;
      break;
    }
    case Discipline::kSqf: {
      int best = -1;
      for (int k = 0; k < n; ++k) {
        if (queue_lengths[static_cast<size_t>(k)] > 0 &&
            (best < 0 || queue_lengths[static_cast<size_t>(k)] <
                             queue_lengths[static_cast<size_t>(best)])) {
          best = k;
        }
      }
      if (best >= 0) return best;
      break;
    }
  }
  throw std::logic_error("scheduler_select called with all queues empty");
}

AdmitResult LqdAdmit(std::vector<int>& queue_lengths, int buffer_pkts,
                     int flow) {
  int occupancy = 0;
  for (int q : queue_lengths) occupancy += q;
  AdmitResult result;
  if (occupancy < buffer_pkts) {
    ++queue_lengths[static_cast<size_t>(flow)];
    result.enqueued = true;
    return result;
  }
  int longest = 0;
  for (int k = 1; k < static_cast<int>(queue_lengths.size()); ++k) {
    if (queue_lengths[static_cast<size_t>(k)] >
        queue_lengths[static_cast<size_t>(longest)]) {
      longest = k;
    }
  }
  if (queue_lengths[static_cast<size_t>(flow)] >=
      queue_lengths[static_cast<size_t>(longest)]) {
    // The arrival's own queue is (or ties as) the longest: drop it.
    return result;
  }
  --queue_lengths[static_cast<size_t>(longest)];
  ++queue_lengths[static_cast<size_t>(flow)];
  result.enqueued = true;
  result.pushed_out = longest;
  return result;
}

void TcpOnAck(TcpState& state) {
  if (state.cwnd < state.ssthresh) {
    state.cwnd += 1.0;
  } else {
    state.cwnd += 1.0 / state.cwnd;
  }
}

bool TcpOnLoss(TcpState& state, double now, double rtt_window) {
  if (now - state.last_cut_time < rtt_window) {
    if (++state.losses_in_window >= 2) {
      // Third loss in one window: timeout-like collapse.
      state.ssthresh = std::max(state.in_flight / 2.0, 2.0);
      state.cwnd = 1.0;
      state.last_cut_time = now;
      state.losses_in_window = 0;
      return true;
    }
    return false;
  }
  state.cwnd = std::max(state.cwnd / 2.0, 1.0);
  state.ssthresh = state.cwnd;
  state.last_cut_time = now;
  state.losses_in_window = 0;
  return true;
}

namespace {

enum class EventType { kLinkDone, kAck, kLossNotify, kUdpEmit, kStallCheck };

struct Event {
  double t = 0.0;
  std::uint64_t seq = 0;
  EventType type = EventType::kLinkDone;
  int flow = 0;
};

struct EventLater {
  bool operator()(const Event& a, const Event& b) const {
    return a.t > b.t || (a.t == b.t && a.seq > b.seq);
  }
};

class Sim {
 public:
  Sim(const Scenario& s, const PacketSimOptions& opt)
      : s_(s),
        opt_(opt),
        n_(s.num_flows()),
        buffer_pkts_(static_cast<int>(s.buffer)),
        pkt_time_(1.0 / s.capacity),
        rng_(s.seed) {
    qlen_.assign(static_cast<size_t>(n_), 0);
    tcp_.assign(static_cast<size_t>(n_), TcpState{});
    counters_.assign(static_cast<size_t>(n_), FlowCounters{});
    sent_m_.assign(static_cast<size_t>(n_), 0);
    delivered_m_.assign(static_cast<size_t>(n_), 0);
    dropped_m_.assign(static_cast<size_t>(n_), 0);
    acks_pending_.assign(static_cast<size_t>(n_), 0);
    notifies_pending_.assign(static_cast<size_t>(n_), 0);
    last_progress_.assign(static_cast<size_t>(n_), 0.0);
    queue_integral_.assign(static_cast<size_t>(n_), 0.0);

    for (int k = 0; k < n_; ++k) {
      const FlowSpec& f = s_.flows[static_cast<size_t>(k)];
      if (f.is_tcp()) {
        TcpState& t = tcp_[static_cast<size_t>(k)];
        t.cwnd = std::max(1.0, f.initial_rate * f.propagation_rtt);
        t.ssthresh = opt_.slow_start
                         ? std::numeric_limits<double>::infinity()
                         : 0.0;
        Schedule(StallTimeout(k), EventType::kStallCheck, k);
      } else {
        // CBR emission, dephased from the TCP clocking by the seeded RNG.
        double phase = Uniform01() / f.rate;
        Schedule(phase, EventType::kUdpEmit, k);
      }
    }
  }

  PacketSimReport Run() {
    for (int k = 0; k < n_; ++k) {
      if (s_.flows[static_cast<size_t>(k)].is_tcp()) TrySend(k);
    }
    while (!events_.empty() && events_.top().t <= s_.horizon) {
      Event ev = events_.top();
      events_.pop();
      now_ = ev.t;
      Dispatch(ev);
    }
    AdvanceQueueIntegrals(s_.horizon);
    return MakeReport();
  }

 private:
  void Schedule(double t, EventType type, int flow) {
    events_.push(Event{t, next_seq_++, type, flow});
  }

  double Uniform01() {
    return static_cast<double>(rng_() >> 11) * 0x1.0p-53;
  }

  void Dispatch(const Event& ev) {
    switch (ev.type) {
      case EventType::kLinkDone: OnLinkDone(ev.flow); break;
      case EventType::kAck: OnAck(ev.flow); break;
      case EventType::kLossNotify: OnLossNotify(ev.flow); break;
      case EventType::kUdpEmit: OnUdpEmit(ev.flow); break;
      case EventType::kStallCheck: OnStallCheck(ev.flow); break;
    }
  }

  double CurrentRtt(int flow) const {
    const FlowSpec& f = s_.flows[static_cast<size_t>(flow)];
    return f.propagation_rtt +
           static_cast<double>(qlen_[static_cast<size_t>(flow)]) / s_.capacity;
  }

  void TrySend(int flow) {
    TcpState& t = tcp_[static_cast<size_t>(flow)];
    while (static_cast<double>(t.in_flight) < t.cwnd) {
      ++t.in_flight;
      SendPacket(flow);
    }
  }

  void SendPacket(int flow) {
    ++counters_[static_cast<size_t>(flow)].sent;
    if (now_ >= opt_.warmup) ++sent_m_[static_cast<size_t>(flow)];
    Admit(flow);
  }

  void Admit(int flow) {
    AdvanceQueueIntegrals(now_);
    AdmitResult res = LqdAdmit(qlen_, buffer_pkts_, flow);
    if (!res.enqueued) {
      CountDrop(flow);
      return;
    }
    if (res.pushed_out >= 0) CountDrop(res.pushed_out);
    int occupancy = 0;
    for (int q : qlen_) occupancy += q;
    max_occupancy_ = std::max(max_occupancy_, occupancy);
    if (in_link_ < 0) StartNext();
  }

  void CountDrop(int flow) {
    const size_t uk = static_cast<size_t>(flow);
    ++counters_[uk].dropped;
    if (now_ >= opt_.warmup) ++dropped_m_[uk];
    if (s_.flows[uk].is_tcp()) {
      // The packet keeps its window slot until the source learns about
      // the loss, one round trip later.
      ++notifies_pending_[uk];
      Schedule(now_ + CurrentRtt(flow), EventType::kLossNotify, flow);
    }
  }

  void StartNext() {
    int total = 0;
    for (int q : qlen_) total += q;
    if (total == 0) {
      in_link_ = -1;
      return;
    }
    AdvanceQueueIntegrals(now_);
    int sel = SchedulerSelect(qlen_, s_.discipline, rr_cursor_);
    --qlen_[static_cast<size_t>(sel)];
    in_link_ = sel;
    Schedule(now_ + pkt_time_, EventType::kLinkDone, sel);
  }

  void OnLinkDone(int flow) {
    ++counters_[static_cast<size_t>(flow)].delivered;
    if (now_ >= opt_.warmup) {
      ++delivered_m_[static_cast<size_t>(flow)];
      RecordWindow(flow);
    }
    const FlowSpec& f = s_.flows[static_cast<size_t>(flow)];
    if (f.is_tcp()) {
      ++acks_pending_[static_cast<size_t>(flow)];
      Schedule(now_ + f.propagation_rtt, EventType::kAck, flow);
    }
    StartNext();
  }

  void OnAck(int flow) {
    --acks_pending_[static_cast<size_t>(flow)];
    last_progress_[static_cast<size_t>(flow)] = now_;
    TcpState& t = tcp_[static_cast<size_t>(flow)];
    --t.in_flight;
    TcpOnAck(t);
    TrySend(flow);
  }

  void OnLossNotify(int flow) {
    --notifies_pending_[static_cast<size_t>(flow)];
    TcpState& t = tcp_[static_cast<size_t>(flow)];
    --t.in_flight;
    TcpOnLoss(t, now_, CurrentRtt(flow));
    TrySend(flow);
  }

  void OnUdpEmit(int flow) {
    ++counters_[static_cast<size_t>(flow)].sent;
    if (now_ >= opt_.warmup) ++sent_m_[static_cast<size_t>(flow)];
    Admit(flow);
    Schedule(now_ + 1.0 / s_.flows[static_cast<size_t>(flow)].rate,
             EventType::kUdpEmit, flow);
  }

  void RecordWindow(int flow) {
    size_t w = static_cast<size_t>(std::floor((now_ - opt_.warmup) / opt_.window));
    if (windows_.size() <= w) {
      windows_.resize(w + 1, std::vector<double>(static_cast<size_t>(n_), 0.0));
    }
    windows_[w][static_cast<size_t>(flow)] += PacketBits(s_.packet_bytes);
  }

  void AdvanceQueueIntegrals(double t) {
    double lo = std::max(last_integral_t_, opt_.warmup);
    if (t > lo) {
      for (int k = 0; k < n_; ++k) {
        queue_integral_[static_cast<size_t>(k)] +=
            static_cast<double>(qlen_[static_cast<size_t>(k)]) * (t - lo);
      }
    }
    last_integral_t_ = std::max(last_integral_t_, t);
  }

  double StallTimeout(int flow) const {
    return 2.0 * (s_.flows[static_cast<size_t>(flow)].propagation_rtt +
                  static_cast<double>(buffer_pkts_) / s_.capacity);
  }

  void OnStallCheck(int flow) {
    const size_t uk = static_cast<size_t>(flow);
    TcpState& t = tcp_[uk];
    if (t.in_flight > 0 && now_ - last_progress_[uk] >= StallTimeout(flow)) {
      // Window collapses to one segment and a single probe goes out past
      // the window; the stuck packets still own their feedback slots.
      // Recovery re-probes in slow start, as after a Reno timeout.
      t.ssthresh = std::max(t.in_flight / 2.0, 2.0);
      t.cwnd = 1.0;
      t.last_cut_time = now_;
      last_progress_[uk] = now_;
      ++t.in_flight;
      SendPacket(flow);
    }
    Schedule(now_ + StallTimeout(flow), EventType::kStallCheck, flow);
  }

  PacketSimReport MakeReport() {
    PacketSimReport r;
    double interval = s_.horizon - opt_.warmup;
    r.measured_interval = interval;
    r.throughput.resize(static_cast<size_t>(n_));
    r.sending_rate.resize(static_cast<size_t>(n_));
    r.loss_rate.resize(static_cast<size_t>(n_));
    r.mean_queue.resize(static_cast<size_t>(n_));
    double sent_bits = 0.0;
    double delivered_bits = 0.0;
    for (int k = 0; k < n_; ++k) {
      const size_t uk = static_cast<size_t>(k);
      r.throughput[uk] = static_cast<double>(delivered_m_[uk]) / interval;
      r.sending_rate[uk] = static_cast<double>(sent_m_[uk]) / interval;
      r.loss_rate[uk] = static_cast<double>(dropped_m_[uk]) / interval;
      r.mean_queue[uk] = queue_integral_[uk] / interval;
      sent_bits += static_cast<double>(sent_m_[uk]);
      delivered_bits += static_cast<double>(delivered_m_[uk]);
    }
    r.utilization = metrics::Utilization(r.throughput, s_.capacity);
    r.goodput_ratio = sent_bits > 0.0 ? delivered_bits / sent_bits : 0.0;

    r.windows.window = opt_.window;
    size_t full = static_cast<size_t>(std::floor(
        (s_.horizon - opt_.warmup) / opt_.window));
    if (windows_.size() > full) windows_.resize(full);
    r.windows.delivered = std::move(windows_);

    r.counters = counters_;
    r.max_occupancy = max_occupancy_;
    r.final_queue = qlen_;
    r.final_in_link.assign(static_cast<size_t>(n_), 0);
    if (in_link_ >= 0) r.final_in_link[static_cast<size_t>(in_link_)] = 1;
    r.final_acks_pending = acks_pending_;
    r.final_notifies_pending = notifies_pending_;
    r.final_cwnd.resize(static_cast<size_t>(n_));
    r.final_in_flight.resize(static_cast<size_t>(n_));
    for (int k = 0; k < n_; ++k) {
      r.final_cwnd[static_cast<size_t>(k)] = tcp_[static_cast<size_t>(k)].cwnd;
      r.final_in_flight[static_cast<size_t>(k)] =
          tcp_[static_cast<size_t>(k)].in_flight;
    }
    return r;
  }

  Scenario s_;
  PacketSimOptions opt_;
  int n_;
  int buffer_pkts_;
  double pkt_time_;
  std::mt19937_64 rng_;
  std::priority_queue<Event, std::vector<Event>, EventLater> events_;
  std::uint64_t next_seq_ = 0;
  double now_ = 0.0;

  std::vector<int> qlen_;
  int in_link_ = -1;  // flow on the wire, -1 when idle
  int rr_cursor_ = -1;
  std::vector<TcpState> tcp_;
  std::vector<FlowCounters> counters_;
  std::vector<long long> sent_m_, delivered_m_, dropped_m_;
  std::vector<int> acks_pending_;
  std::vector<int> notifies_pending_;
  std::vector<double> last_progress_;
  std::vector<std::vector<double>> windows_;
  std::vector<double> queue_integral_;
  double last_integral_t_ = 0.0;
  int max_occupancy_ = 0;
};

}  // namespace

PacketSimReport RunPacketSim(const Scenario& scenario) {
  return RunPacketSim(scenario, PacketSimOptions{});
}

PacketSimReport RunPacketSim(const Scenario& scenario,
                             const PacketSimOptions& options) {
  scenario.Validate();
  if (options.warmup >= scenario.horizon) {
    throw std::invalid_argument("warmup must be smaller than the horizon");
  }
  Sim sim(scenario, options);
  return sim.Run();
}

}  // namespace perflow::packet
