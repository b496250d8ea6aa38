#include "perflow/fluid.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <sstream>

namespace perflow::fluid {

namespace {

double Sum(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0);
}

// Indices of the longest-queue tie set (values within tie_eps of the max).
std::vector<int> MaxTieSet(const std::vector<double>& queues, double tie_eps) {
  double max_q = *std::max_element(queues.begin(), queues.end());
  std::vector<int> set;
  for (size_t k = 0; k < queues.size(); ++k) {
    if (queues[k] >= max_q - tie_eps) set.push_back(static_cast<int>(k));
  }
  return set;
}

std::vector<double> FqDepartures(const std::vector<double>& rates,
                                 const std::vector<double>& queues,
                                 double capacity, double tie_eps) {
  const size_t n = rates.size();
  // Water-filling over arrival rates.  A backlogged queue can absorb any
  // share, so only (almost) empty flows below the fair share leave the
  // bottlenecked set.
  std::vector<bool> bottlenecked(n, true);
  for (;;) {
    double outside = 0.0;
    int inside = 0;
    for (size_t k = 0; k < n; ++k) {
      if (bottlenecked[k]) {
        ++inside;
      } else {
        outside += rates[k];
      }
    }
    if (inside == 0) break;
    double fair = (capacity - outside) / inside;
    bool changed = false;
    for (size_t k = 0; k < n; ++k) {
      if (bottlenecked[k] && queues[k] <= tie_eps && rates[k] < fair) {
        bottlenecked[k] = false;
        changed = true;
      }
    }
    if (!changed) break;
  }
  double outside = 0.0;
  int inside = 0;
  for (size_t k = 0; k < n; ++k) {
    if (bottlenecked[k]) {
      ++inside;
    } else {
      outside += rates[k];
    }
  }
  std::vector<double> out(n, 0.0);
  double fair = inside > 0 ? (capacity - outside) / inside : 0.0;
  for (size_t k = 0; k < n; ++k) {
    out[k] = bottlenecked[k] ? fair : rates[k];
  }
  return out;
}

std::vector<double> LqfDepartures(const std::vector<double>& rates,
                                  const std::vector<double>& queues,
                                  double capacity, double tie_eps) {
  const size_t n = rates.size();
  std::vector<double> out(n, 0.0);
  std::vector<int> set = MaxTieSet(queues, tie_eps);
  double set_rate = 0.0;
  for (int k : set) set_rate += rates[static_cast<size_t>(k)];
  double max_q = queues[static_cast<size_t>(set.front())];
  double total = (max_q <= tie_eps && Sum(rates) < capacity)
                     ? Sum(rates)  // all queues empty, system subcritical
                     : capacity;
  if (set_rate > 0.0) {
    for (int k : set) {
      out[static_cast<size_t>(k)] = total * rates[static_cast<size_t>(k)] / set_rate;
    }
  } else if (max_q > tie_eps) {
    // Backlogged but silent tie set: drain equally.
    for (int k : set) out[static_cast<size_t>(k)] = total / set.size();
  }
  return out;
}

std::vector<double> SqfDepartures(const std::vector<double>& rates,
                                  const std::vector<double>& queues,
                                  double capacity, double tie_eps) {
  const size_t n = rates.size();
  std::vector<double> out(n, 0.0);
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return queues[static_cast<size_t>(a)] < queues[static_cast<size_t>(b)];
  });

  double residual = capacity;
  size_t i = 0;
  while (i < n && residual > 0.0) {
    // One tie group, ascending by queue level.
    size_t j = i;
    double level = queues[static_cast<size_t>(order[i])];
    std::vector<int> group;
    while (j < n && queues[static_cast<size_t>(order[j])] <= level + tie_eps) {
      group.push_back(order[j]);
      ++j;
    }
    double group_rate = 0.0;
    for (int k : group) group_rate += rates[static_cast<size_t>(k)];
    if (level <= tie_eps) {
      // An empty group cannot be served above its arrival rate; the
      // residue cascades to the next-shortest queues.
      if (group_rate <= residual) {
        for (int k : group) out[static_cast<size_t>(k)] = rates[static_cast<size_t>(k)];
        residual -= group_rate;
      } else {
        for (int k : group) {
          out[static_cast<size_t>(k)] = residual * rates[static_cast<size_t>(k)] / group_rate;
        }
        residual = 0.0;
      }
    } else {
      // A backlogged shortest group absorbs everything.
      if (group_rate > 0.0) {
        for (int k : group) {
          out[static_cast<size_t>(k)] = residual * rates[static_cast<size_t>(k)] / group_rate;
        }
      } else {
        for (int k : group) out[static_cast<size_t>(k)] = residual / group.size();
      }
      residual = 0.0;
    }
    i = j;
  }
  return out;
}

}  // namespace

std::vector<double> DepartureRates(const std::vector<double>& rates,
                                   const std::vector<double>& queues,
                                   double capacity, Discipline discipline,
                                   double tie_eps) {
  if (rates.size() != queues.size()) {
    throw std::invalid_argument("departure rates: dimension mismatch");
  }
  if (rates.empty()) return {};
  switch (discipline) {
    case Discipline::kFq:
      return FqDepartures(rates, queues, capacity, tie_eps);
    case Discipline::kLqf:
      return LqfDepartures(rates, queues, capacity, tie_eps);
    case Discipline::kSqf:
      return SqfDepartures(rates, queues, capacity, tie_eps);
  }
  return {};
}

std::vector<double> LossRates(const std::vector<double>& rates,
                              const std::vector<double>& queues,
                              const std::vector<double>& departures,
                              double buffer, double capacity, double tie_eps,
                              double full_eps) {
  const size_t n = rates.size();
  std::vector<double> out(n, 0.0);
  if (Sum(queues) < buffer - full_eps) return out;
  std::vector<int> set = MaxTieSet(queues, tie_eps);
  if (set.size() == 1) {
    out[static_cast<size_t>(set.front())] = std::max(Sum(rates) - capacity, 0.0);
  } else {
    for (int k : set) {
      out[static_cast<size_t>(k)] =
          std::max(rates[static_cast<size_t>(k)] - departures[static_cast<size_t>(k)], 0.0);
    }
  }
  return out;
}

namespace {

struct EngineParams {
  double tie_eps = 0.0;
  double full_eps = 0.0;
  double backlog_eps = 0.0;
};

EngineParams ParamsFor(const Scenario& s) {
  EngineParams p;
  p.tie_eps = 1e-9 * s.buffer;
  p.full_eps = 1e-6 * s.buffer;
  p.backlog_eps = 1e-12 * s.buffer;
  return p;
}

double RoundTrip(const Scenario& s, const FlowSpec& flow, double queue) {
  double rtt = flow.propagation_rtt;
  if (s.rtt_mode == RttMode::kQueueAugmented) rtt += queue / s.capacity;
  return rtt;
}

}  // namespace

Derivatives Rhs(const FluidState& state, const Scenario& scenario,
                const std::vector<double>* delayed_losses) {
  const size_t n = state.rates.size();
  const EngineParams p = ParamsFor(scenario);
  Derivatives d;
  d.departures = DepartureRates(state.rates, state.queues, scenario.capacity,
                                scenario.discipline, p.tie_eps);
  d.losses = LossRates(state.rates, state.queues, d.departures,
                       scenario.buffer, scenario.capacity, p.tie_eps,
                       p.full_eps);
  d.d_rates.assign(n, 0.0);
  d.d_queues.assign(n, 0.0);
  const bool backlogged = Sum(state.queues) > p.backlog_eps;
  const std::vector<double>& reaction =
      delayed_losses != nullptr ? *delayed_losses : d.losses;
  for (size_t k = 0; k < n; ++k) {
    const FlowSpec& flow = scenario.flows[k];
    if (flow.is_tcp()) {
      double rtt = RoundTrip(scenario, flow, state.queues[k]);
      double gain = 1.0 / (rtt * rtt);
      double increase =
          backlogged ? gain * d.departures[k] / scenario.capacity : gain;
      d.d_rates[k] = increase - 0.5 * state.rates[k] * reaction[k];
    }  // UDP: dA/dt = 0
    d.d_queues[k] = state.rates[k] - d.departures[k] - d.losses[k];
  }
  return d;
}

namespace {

class Engine {
 public:
  Engine(const Scenario& scenario, const SimulateOptions& options)
      : s_(scenario), p_(ParamsFor(scenario)) {
    n_ = s_.num_flows();
    double min_pd = std::numeric_limits<double>::infinity();
    for (const auto& f : s_.flows) {
      if (f.is_tcp()) min_pd = std::min(min_pd, f.propagation_rtt);
    }
    dt_ = options.dt_override > 0.0
              ? options.dt_override
              : std::min(std::isfinite(min_pd) ? min_pd / 200.0 : 50e-6,
                         50e-6);
    steps_ = static_cast<long long>(std::ceil(s_.horizon / dt_));
    double sample_period = options.sample_period > 0.0
                               ? options.sample_period
                               : std::max(dt_, s_.horizon / 100000.0);
    stride_ = std::max<long long>(1, std::llround(sample_period / dt_));

    state_.rates.resize(static_cast<size_t>(n_));
    state_.queues.resize(static_cast<size_t>(n_));
    for (int k = 0; k < n_; ++k) {
      const FlowSpec& f = s_.flows[static_cast<size_t>(k)];
      state_.rates[static_cast<size_t>(k)] = f.is_tcp() ? f.initial_rate : f.rate;
      state_.queues[static_cast<size_t>(k)] = f.initial_queue;
    }
    cum_.rate.assign(static_cast<size_t>(n_), 0.0);
    cum_.queue.assign(static_cast<size_t>(n_), 0.0);
    cum_.departure.assign(static_cast<size_t>(n_), 0.0);
    cum_.loss.assign(static_cast<size_t>(n_), 0.0);

    if (s_.detection_mode == DetectionMode::kDelayed) {
      double max_delay = 0.0;
      for (const auto& f : s_.flows) {
        if (f.is_tcp()) max_delay = std::max(max_delay, f.propagation_rtt);
      }
      if (s_.rtt_mode == RttMode::kQueueAugmented) {
        max_delay += s_.buffer / s_.capacity;
      }
      ring_size_ = static_cast<size_t>(std::ceil(max_delay / dt_)) + 2;
      loss_ring_.assign(ring_size_ * static_cast<size_t>(n_), 0.0);
    }

    traj_.scenario = s_;
    traj_.dt = dt_;
    traj_.num_flows = n_;
  }

  Trajectory Run() {
    for (long long step = 0; step <= steps_; ++step) {
      state_.t = static_cast<double>(step) * dt_;
      Derivatives d = Derive();
      if (step % stride_ == 0 || step == steps_) Record(d);
      if (step == steps_) break;
      Advance(d);
    }
    return std::move(traj_);
  }

 private:
  Derivatives Derive() {
    Derivatives d;
    d.departures = DepartureRates(state_.rates, state_.queues, s_.capacity,
                                  s_.discipline, p_.tie_eps);
    // Losses exist only in the saturation regime; outside it the queue
    // is free to move and the drop law would only add chatter.
    if (saturated_) {
      d.losses = LossRates(state_.rates, state_.queues, d.departures,
                           s_.buffer, s_.capacity, p_.tie_eps, p_.full_eps);
    } else {
      d.losses.assign(static_cast<size_t>(n_), 0.0);
    }
    d.d_rates.assign(static_cast<size_t>(n_), 0.0);
    d.d_queues.assign(static_cast<size_t>(n_), 0.0);
    const bool backlogged = Sum(state_.queues) > p_.backlog_eps;
    for (int k = 0; k < n_; ++k) {
      const size_t uk = static_cast<size_t>(k);
      const FlowSpec& flow = s_.flows[uk];
      if (flow.is_tcp()) {
        double rtt = RoundTrip(s_, flow, state_.queues[uk]);
        double gain = 1.0 / (rtt * rtt);
        double increase =
            backlogged ? gain * d.departures[uk] / s_.capacity : gain;
        double reaction = s_.detection_mode == DetectionMode::kDelayed
                              ? DelayedLoss(uk, rtt)
                              : d.losses[uk];
        d.d_rates[uk] = increase - 0.5 * state_.rates[uk] * reaction;
      }
      d.d_queues[uk] = state_.rates[uk] - d.departures[uk] - d.losses[uk];
    }
    return d;
  }

  double DelayedLoss(size_t k, double rtt) const {
    long long back = std::llround(rtt / dt_);
    if (back > step_count_ || static_cast<size_t>(back) >= ring_size_) {
      return 0.0;  // not enough history yet: startup transient
    }
    size_t slot = static_cast<size_t>((step_count_ - back) % static_cast<long long>(ring_size_));
    return loss_ring_[slot * static_cast<size_t>(n_) + k];
  }

  void Advance(const Derivatives& d) {
    if (!loss_ring_.empty()) {
      size_t slot = static_cast<size_t>(step_count_ % static_cast<long long>(ring_size_));
      for (int k = 0; k < n_; ++k) {
        loss_ring_[slot * static_cast<size_t>(n_) + static_cast<size_t>(k)] =
            d.losses[static_cast<size_t>(k)];
      }
    }
    ++step_count_;

    for (int k = 0; k < n_; ++k) {
      const size_t uk = static_cast<size_t>(k);
      cum_.rate[uk] += state_.rates[uk] * dt_;
      cum_.queue[uk] += state_.queues[uk] * dt_;
      cum_.departure[uk] += d.departures[uk] * dt_;
      cum_.loss[uk] += d.losses[uk] * dt_;

      double delta = d.d_rates[uk] * dt_;
      // >20% of the rate scale in one step means dt cannot resolve the
      // dynamics (0.2C floors the scale so ramps from zero pass).
      if (std::abs(delta) >
          0.2 * std::max(state_.rates[uk], 0.2 * s_.capacity)) {
        std::ostringstream msg;
        msg << "step size too large: flow " << k + 1 << " rate changed by "
            << delta << " pkt/s in one step at t=" << state_.t;
        throw FluidError(msg.str());
      }
      state_.rates[uk] = std::max(state_.rates[uk] + delta, 0.0);
      state_.queues[uk] =
          std::max(state_.queues[uk] + d.d_queues[uk] * dt_, 0.0);
    }

    double total_q = Sum(state_.queues);
    double total_a = Sum(state_.rates);
    if (!saturated_) {
      if (total_q >= s_.buffer) {
        Rescale(total_q);
        if (total_a >= s_.capacity) saturated_ = true;
        total_q = s_.buffer;
      }
    } else {
      if (total_q > 0.0) Rescale(total_q);
      total_q = s_.buffer;
      if (total_a < s_.capacity) saturated_ = false;
    }

    if (!std::isfinite(traj_.first_saturation_time)) {
      if (total_q >= s_.buffer * (1.0 - 1e-9) && total_a > s_.capacity) {
        traj_.first_saturation_time = state_.t + dt_;
      }
    } else {
      traj_.min_total_queue_after_saturation =
          std::min(traj_.min_total_queue_after_saturation, total_q);
    }

    TrackServicePhase(d);
  }

  void Rescale(double total_q) {
    double scale = s_.buffer / total_q;
    for (double& q : state_.queues) q *= scale;
  }

  void TrackServicePhase(const Derivatives& d) {
    int dominant = -1;
    for (int k = 0; k < n_; ++k) {
      if (d.departures[static_cast<size_t>(k)] >= 0.9 * s_.capacity) {
        dominant = k;
        break;
      }
    }
    if (dominant >= 0 && dominant != last_dominant_) {
      if (last_dominant_ >= 0) {
        traj_.service_switch_times.push_back(state_.t);
        traj_.service_switch_flows.push_back(dominant);
      }
      last_dominant_ = dominant;
    }
  }

  void Record(const Derivatives& d) {
    traj_.time.push_back(state_.t);
    for (int k = 0; k < n_; ++k) {
      const size_t uk = static_cast<size_t>(k);
      traj_.rate.push_back(state_.rates[uk]);
      traj_.queue.push_back(state_.queues[uk]);
      traj_.departure.push_back(d.departures[uk]);
      traj_.loss.push_back(d.losses[uk]);
      traj_.cum_rate.push_back(cum_.rate[uk]);
      traj_.cum_queue.push_back(cum_.queue[uk]);
      traj_.cum_departure.push_back(cum_.departure[uk]);
      traj_.cum_loss.push_back(cum_.loss[uk]);
    }
  }

  Scenario s_;
  EngineParams p_;
  int n_ = 0;
  double dt_ = 0.0;
  long long steps_ = 0;
  long long stride_ = 1;
  long long step_count_ = 0;
  FluidState state_;
  struct {
    std::vector<double> rate, queue, departure, loss;
  } cum_;
  std::vector<double> loss_ring_;
  size_t ring_size_ = 0;
  bool saturated_ = false;
  int last_dominant_ = -1;
  Trajectory traj_;
};

}  // namespace

Trajectory Simulate(const Scenario& scenario) {
  return Simulate(scenario, SimulateOptions{});
}

Trajectory Simulate(const Scenario& scenario, const SimulateOptions& options) {
  scenario.Validate();
  Engine engine(scenario, options);
  return engine.Run();
}

Trajectory::Means Trajectory::MeansBetween(double t0, double t1) const {
  if (!(t1 > t0)) throw FluidError("means window is empty");
  const size_t n = static_cast<size_t>(num_flows);
  auto interp = [&](const std::vector<double>& cum, double at,
                    std::vector<double>& out) {
    auto it = std::lower_bound(time.begin(), time.end(), at);
    size_t hi = std::min<size_t>(static_cast<size_t>(it - time.begin()),
                                 time.size() - 1);
    size_t lo = hi > 0 ? hi - 1 : 0;
    double w = (hi == lo || time[hi] == time[lo])
                   ? 0.0
                   : (at - time[lo]) / (time[hi] - time[lo]);
    for (size_t k = 0; k < n; ++k) {
      double a = cum[lo * n + k];
      double b = cum[hi * n + k];
      out[k] = a + w * (b - a);
    }
  };
  std::vector<double> lo_v(n), hi_v(n);
  Means m;
  double span = t1 - t0;
  for (auto [cum, dst] : {std::pair{&cum_rate, &m.rate},
                          std::pair{&cum_queue, &m.queue},
                          std::pair{&cum_departure, &m.departure},
                          std::pair{&cum_loss, &m.loss}}) {
    interp(*cum, t0, lo_v);
    interp(*cum, t1, hi_v);
    dst->resize(n);
    for (size_t k = 0; k < n; ++k) (*dst)[k] = (hi_v[k] - lo_v[k]) / span;
  }
  return m;
}

SteadyStateSummary Summarize(const Trajectory& trajectory, double warmup) {
  if (!(trajectory.end_time() > warmup)) {
    throw FluidError("warmup must be smaller than the horizon");
  }
  Trajectory::Means m = trajectory.MeansBetween(warmup, trajectory.end_time());
  SteadyStateSummary out;
  const size_t n = static_cast<size_t>(trajectory.num_flows);
  out.flows.resize(n);
  double total_x = 0.0;
  for (size_t k = 0; k < n; ++k) {
    out.flows[k] = {m.rate[k], m.departure[k], m.queue[k], m.loss[k]};
    total_x += m.departure[k];
  }
  out.utilization = total_x / trajectory.scenario.capacity;

  // Cycle period from service-phase alternations: mean spacing of
  // hand-offs to the flow that appears first in the post-warmup record.
  const auto& times = trajectory.service_switch_times;
  const auto& flows = trajectory.service_switch_flows;
  std::vector<double> into_first;
  int anchor = -1;
  for (size_t i = 0; i < times.size(); ++i) {
    if (times[i] < warmup) continue;
    if (anchor < 0) anchor = flows[i];
    if (flows[i] == anchor) into_first.push_back(times[i]);
  }
  if (into_first.size() >= 2) {
    out.cycle_period =
        (into_first.back() - into_first.front()) / (into_first.size() - 1);
  }
  return out;
}

void WriteTrajectoryCsv(const Trajectory& trajectory, std::ostream& out) {
  const size_t n = static_cast<size_t>(trajectory.num_flows);
  out << "t";
  for (size_t k = 1; k <= n; ++k) out << ",A" << k;
  for (size_t k = 1; k <= n; ++k) out << ",Q" << k;
  for (size_t k = 1; k <= n; ++k) out << ",D" << k;
  for (size_t k = 1; k <= n; ++k) out << ",L" << k;
  out << "\n";
  out.precision(10);
  for (size_t i = 0; i < trajectory.num_samples(); ++i) {
    out << trajectory.time[i];
    for (size_t k = 0; k < n; ++k) out << ',' << trajectory.rate[i * n + k];
    for (size_t k = 0; k < n; ++k) out << ',' << trajectory.queue[i * n + k];
    for (size_t k = 0; k < n; ++k) out << ',' << trajectory.departure[i * n + k];
    for (size_t k = 0; k < n; ++k) out << ',' << trajectory.loss[i * n + k];
    out << "\n";
  }
}

}  // namespace perflow::fluid
