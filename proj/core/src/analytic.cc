#include "perflow/analytic.h"

#include <algorithm>
#include <cmath>
#include <limits>

namespace perflow {

double LimitCycle::RateInService(int k, double t) const {
  return ramp_slopes[static_cast<size_t>(k)] * t;
}

double LimitCycle::RateDecaying(int k, double t) const {
  double ramp = ramp_slopes[static_cast<size_t>(k)];
  return 2.0 * std::sqrt(ramp) * 2.0 * capacity *
         analytic::FDecay(2.0 * capacity, 0.0, t, ramp, capacity);
}

double LimitCycle::QueueInService(int k, double t) const {
  double ramp = ramp_slopes[static_cast<size_t>(k)];
  return 0.5 * buffer + 0.5 * ramp * t * t - capacity * t;
}

double LimitCycle::QueueOther(int k, double t) const {
  return buffer - QueueInService(k, t);
}

}  // namespace perflow

namespace perflow::analytic {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
const double kSqrt2Pi = std::sqrt(2.0 * M_PI);
const double kSqrtPi = std::sqrt(M_PI);

double LogAddExp(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  double hi = std::max(a, b);
  double lo = std::min(a, b);
  return hi + std::log1p(std::exp(lo - hi));
}

// log(1 + e^m) without overflow.
double Log1pExp(double m) { return m > 40.0 ? m : std::log1p(std::exp(m)); }

// Positive root of A^2 - p A - q = 0 (q >= 0).
double QuadraticFixedPoint(double p, double q) {
  return 0.5 * (p + std::sqrt(p * p + 4.0 * q));
}

// TCP fixed point when served at constant rate `share` on a link of rate
// `capacity`: ramp * share / capacity = (A/2)(A - share).
double TcpRateAtShare(double ramp, double share, double capacity) {
  return QuadraticFixedPoint(share, 2.0 * ramp * share / capacity);
}

}  // namespace

double Erf(double x) { return std::erf(x); }

double ErfcxPos(double x) {
  if (x < 26.0) {
    return std::exp(x * x) * std::erfc(x);
  }
  // Asymptotic series; for x >= 26 truncation error is below 1e-14.
  double u = 1.0 / (2.0 * x * x);
  double s = 1.0 + u * (-1.0 + u * (3.0 + u * (-15.0 + u * (105.0 - 945.0 * u))));
  return s / (x * kSqrtPi);
}

double LogErfDiff(double x1, double x2) {
  if (!(x2 > x1)) return -std::numeric_limits<double>::infinity();
  if (x2 <= 0.0) return LogErfDiff(-x2, -x1);
  if (x1 >= 0.0) {
    // erfc(x1) - erfc(x2), factored so only the ratio of tails matters.
    double d = (x2 - x1) * (x2 + x1);
    double tail = std::isinf(x2) ? 0.0 : std::exp(-d) * ErfcxPos(x2);
    return -x1 * x1 + std::log(ErfcxPos(x1) - tail);
  }
  // x1 < 0 < x2: a sum of two positive moderate terms, no cancellation.
  return std::log(std::erf(x2) - std::erf(x1));
}

double LogFDecay(double a, double b, double t, double ramp, double capacity) {
  double two_sqrt_ramp = 2.0 * std::sqrt(ramp);
  if (t <= 0.0) return -std::log(two_sqrt_ramp);
  double inv = 1.0 / std::sqrt(2.0 * ramp);
  double x1 = (b - capacity) * inv;
  double x2 = (b - capacity + ramp * t) * inv;
  double num_exponent = -0.5 * t * (2.0 * b - 2.0 * capacity + ramp * t);
  // a * exp((b-C)^2 / 2 ramp) * sqrt(2 pi) * (Erf(x2) - Erf(x1))
  double log_tail = std::log(a) + 0.5 * std::log(2.0 * M_PI) + x1 * x1 +
                    LogErfDiff(x1, x2);
  return num_exponent - LogAddExp(std::log(two_sqrt_ramp), log_tail);
}

double FDecay(double a, double b, double t, double beta, double capacity) {
  return std::exp(LogFDecay(a, b, t, beta, capacity));
}

double GDecay(double a, double b, double t, double alpha, double capacity) {
  return std::exp(LogFDecay(a, b, t, alpha, capacity));
}

namespace {

// Mean sending rate of the flow that is cut off while the other ramps at
// `ramp`: Xbar + coeff * log(1 + (2 sqrt(2 pi)/sqrt(ramp)) C e^{C^2/2 ramp}
// Erf(C/sqrt(2 ramp))), evaluated in log space.
double SqfMeanRate(double xbar, double coeff, double ramp, double capacity) {
  double m = std::log(2.0 * kSqrt2Pi * capacity / std::sqrt(ramp)) +
             capacity * capacity / (2.0 * ramp) +
             std::log(std::erf(capacity / std::sqrt(2.0 * ramp)));
  return xbar + coeff * Log1pExp(m);
}

}  // namespace

SteadyStateSummary SqfSteady(double alpha, double beta, double capacity,
                             double buffer) {
  const double sum = alpha + beta;
  SteadyStateSummary out;
  out.flows.resize(2);

  double x1 = capacity * beta / sum;   // the small-RTT flow is throttled
  double x2 = capacity * alpha / sum;  // SQF favors the large-RTT flow
  double coeff = alpha * beta / (2.0 * capacity * sum);
  double a1 = SqfMeanRate(x1, coeff, beta, capacity);
  double a2 = SqfMeanRate(x2, coeff, alpha, capacity);
  // (alpha - beta) kept explicit so alpha == beta yields B/2 exactly.
  double q1 = 0.5 * buffer +
              capacity * capacity * (alpha - beta) / (3.0 * alpha * beta);
  double q2 = buffer - q1;

  out.flows[0] = {a1, x1, q1, a1 - x1};
  out.flows[1] = {a2, x2, q2, a2 - x2};
  out.utilization = (x1 + x2) / capacity;

  LimitCycle cycle;
  cycle.ramp_slopes = {alpha, beta};
  cycle.phase_durations = {2.0 * capacity / alpha, 2.0 * capacity / beta};
  cycle.period = cycle.phase_durations[0] + cycle.phase_durations[1];
  cycle.capacity = capacity;
  cycle.buffer = buffer;
  out.cycle_period = cycle.period;
  out.limit_cycle = std::move(cycle);
  return out;
}

SteadyStateSummary LqfSteady(double alpha, double beta, double capacity,
                             double buffer) {
  const double sum = alpha + beta;
  double root = std::sqrt(1.0 + 8.0 * sum / (capacity * capacity));
  double a1 = (alpha / sum) * 0.5 * capacity * (1.0 + root);
  double a2 = (beta / alpha) * a1;
  // The root cancels in Xbar_k = C Abar_k / (Abar_1 + Abar_2).
  double x1 = capacity * alpha / sum;
  double x2 = capacity * beta / sum;

  SteadyStateSummary out;
  out.flows.resize(2);
  out.flows[0] = {a1, x1, 0.5 * buffer, a1 - x1};
  out.flows[1] = {a2, x2, 0.5 * buffer, a2 - x2};
  out.utilization = (x1 + x2) / capacity;
  return out;
}

SteadyStateSummary FqSteady(const std::vector<double>& alphas, double capacity,
                            double buffer) {
  const int n = static_cast<int>(alphas.size());
  const double share = capacity / n;
  SteadyStateSummary out;
  out.flows.resize(alphas.size());
  for (size_t k = 0; k < alphas.size(); ++k) {
    // Fixed point of the fair-share rate ODE; for N=2 this is
    // (C/4)(1 + sqrt(1 + 4 alpha / C^2)).
    double a = 0.5 * share *
               (1.0 + std::sqrt(1.0 + alphas[k] / (share * share)));
    out.flows[k] = {a, share, buffer / n, a - share};
  }
  out.utilization = 1.0;
  return out;
}

std::vector<double> NflowThroughputs(Discipline discipline,
                                     const std::vector<double>& rtts,
                                     double capacity) {
  std::vector<double> weights(rtts.size());
  for (size_t k = 0; k < rtts.size(); ++k) {
    switch (discipline) {
      case Discipline::kSqf: weights[k] = rtts[k] * rtts[k]; break;
      case Discipline::kLqf: weights[k] = 1.0 / (rtts[k] * rtts[k]); break;
      case Discipline::kFq: weights[k] = 1.0; break;
    }
  }
  double total = 0.0;
  for (double w : weights) total += w;
  std::vector<double> x(rtts.size());
  for (size_t k = 0; k < rtts.size(); ++k) {
    x[k] = capacity * (weights[k] / total);
  }
  return x;
}

UdpCompetition UdpMetrics(Discipline discipline, double x_udp, double capacity,
                          double alpha) {
  UdpCompetition out;
  switch (discipline) {
    case Discipline::kSqf: {
      // UDP's queue empties and stays empty; TCP runs in isolation on the
      // residual capacity.
      out.udp_loss = 0.0;
      out.tcp_throughput = capacity - x_udp;
      out.tcp_rate = TcpRateAtShare(alpha, out.tcp_throughput, capacity);
      break;
    }
    case Discipline::kLqf: {
      // Queues pin at B/2 and the TCP rate fixed point is
      // Abar = ((C-X)/2)(1 + sqrt(1 + 8 alpha/(C-X)^2)).
      double a1 = QuadraticFixedPoint(capacity - x_udp, 2.0 * alpha);
      out.tcp_rate = a1;
      out.udp_loss = capacity * x_udp / (x_udp + a1);
      // UDP stalls; its residual throughput is below the model's
      // resolution and TCP carries the link.
      out.tcp_throughput = capacity;
      break;
    }
    case Discipline::kFq: {
      out.udp_loss = std::max(x_udp - 0.5 * capacity, 0.0);
      out.tcp_throughput = capacity - x_udp + out.udp_loss;
      out.tcp_rate = TcpRateAtShare(alpha, out.tcp_throughput, capacity);
      break;
    }
  }
  return out;
}

EpsilonRecursion RunEpsilonRecursion(double alpha, double beta, double capacity,
                                     double eps1, int n) {
  EpsilonRecursion out;
  const double c2 = capacity * capacity;
  const double log_2c = std::log(2.0 * capacity);
  const double log_2sb = std::log(2.0 * std::sqrt(beta));
  const double log_2sa = std::log(2.0 * std::sqrt(alpha));

  double log_tail = log_2c + c2 / (2.0 * beta) + 0.5 * std::log(2.0 * M_PI) +
                    std::log(std::erf(capacity / std::sqrt(2.0 * beta)));
  double log_k = log_2sb - LogAddExp(log_2sb, log_tail);
  out.contraction = std::exp(log_k);

  auto phase_duration = [c2](double start_rate, double ramp, double cap) {
    double r = std::max(0.0, 1.0 - 2.0 * ramp * start_rate / c2);
    return (cap / ramp) * (1.0 + std::sqrt(r));
  };

  out.eps.resize(static_cast<size_t>(n));
  out.gamma.resize(static_cast<size_t>(n));
  out.eps[0] = eps1;
  out.gamma[0] = eps1;
  for (int i = 0; i + 1 < n; ++i) {
    double e = out.eps[static_cast<size_t>(i)];
    double g = out.gamma[static_cast<size_t>(i)];
    double tau = phase_duration(e, alpha, capacity);
    double taup = phase_duration(g, beta, capacity);
    out.eps[static_cast<size_t>(i) + 1] =
        e <= 0.0 ? 0.0
                 : std::exp(std::log(e) + log_2sb +
                            LogFDecay(e + alpha * tau, g, taup, beta, capacity));
    out.gamma[static_cast<size_t>(i) + 1] =
        g <= 0.0 ? 0.0
                 : std::exp(std::log(g) + log_2sa +
                            LogFDecay(g + beta * taup, e, tau, alpha, capacity));
  }

  out.envelope.resize(static_cast<size_t>(n));
  for (int i = 1; i <= n; ++i) {
    // eps_1 K^{i-1} + sum_{j=1}^{i-1} (2C)^{i-j} K^j, in log space.
    double acc = std::log(eps1) + (i - 1) * log_k;
    for (int j = 1; j <= i - 1; ++j) {
      acc = LogAddExp(acc, (i - j) * log_2c + j * log_k);
    }
    out.envelope[static_cast<size_t>(i) - 1] = std::exp(acc);
  }
  return out;
}

SteadyStateSummary AnalyticSummary(const Scenario& scenario) {
  const double c = scenario.capacity;
  const double b = scenario.buffer;
  const auto& flows = scenario.flows;
  int tcp_count = 0;
  int udp_count = 0;
  for (const auto& f : flows) (f.is_tcp() ? tcp_count : udp_count)++;

  if (udp_count == 0 && tcp_count == 1) {
    // Degenerate single-flow case: full capacity, buffer pinned at B.
    double a = TcpRateAtShare(AlphaOf(flows[0]), c, c);
    SteadyStateSummary out;
    out.flows.push_back({a, c, b, a - c});
    out.utilization = 1.0;
    return out;
  }

  if (udp_count == 0 && tcp_count == 2) {
    double alpha = AlphaOf(flows[0]);
    double beta = AlphaOf(flows[1]);
    switch (scenario.discipline) {
      case Discipline::kSqf: return SqfSteady(alpha, beta, c, b);
      case Discipline::kLqf: return LqfSteady(alpha, beta, c, b);
      case Discipline::kFq: return FqSteady({alpha, beta}, c, b);
    }
  }

  if (udp_count == 0 && tcp_count > 2) {
    if (scenario.discipline == Discipline::kFq) {
      std::vector<double> alphas;
      for (const auto& f : flows) alphas.push_back(AlphaOf(f));
      return FqSteady(alphas, c, b);
    }
    std::vector<double> rtts;
    for (const auto& f : flows) rtts.push_back(f.propagation_rtt);
    std::vector<double> x = NflowThroughputs(scenario.discipline, rtts, c);
    SteadyStateSummary out;
    out.flows.resize(flows.size());
    if (scenario.discipline == Discipline::kLqf) {
      // Natural N-flow generalization of the two-flow rate fixed point
      // (extrapolated beyond the published N=2 form).
      double sum = 0.0;
      for (const auto& f : flows) sum += AlphaOf(f);
      double root = std::sqrt(1.0 + 8.0 * sum / (c * c));
      for (size_t k = 0; k < flows.size(); ++k) {
        double a = (AlphaOf(flows[k]) / sum) * 0.5 * c * (1.0 + root);
        out.flows[k] = {a, x[k], b / static_cast<double>(flows.size()),
                        a - x[k]};
      }
    } else {
      for (size_t k = 0; k < flows.size(); ++k) {
        out.flows[k] = {kNaN, x[k], kNaN, kNaN};
      }
      if (scenario.discipline == Discipline::kSqf) {
        double period = 0.0;
        for (const auto& f : flows) period += 2.0 * c / AlphaOf(f);
        out.cycle_period = period;
      }
    }
    out.utilization = 1.0;
    return out;
  }

  if (udp_count == 1 && tcp_count == 1) {
    size_t udp_index = flows[0].is_tcp() ? 1 : 0;
    size_t tcp_index = 1 - udp_index;
    double x_udp = flows[udp_index].rate;
    double alpha = AlphaOf(flows[tcp_index]);
    UdpCompetition m = UdpMetrics(scenario.discipline, x_udp, c, alpha);

    FlowStats udp;
    udp.sending_rate = x_udp;
    // Under LQF the stream stalls: the exact loss formula leaves a
    // residual below the model's resolution, reported as zero throughput.
    udp.throughput =
        scenario.discipline == Discipline::kLqf ? 0.0 : x_udp - m.udp_loss;
    udp.loss_rate = m.udp_loss;
    FlowStats tcp;
    tcp.sending_rate = m.tcp_rate;
    tcp.throughput = m.tcp_throughput;
    tcp.loss_rate = std::max(m.tcp_rate - m.tcp_throughput, 0.0);
    switch (scenario.discipline) {
      case Discipline::kSqf:
        udp.mean_queue = 0.0;
        tcp.mean_queue = b;
        break;
      case Discipline::kLqf:
        udp.mean_queue = 0.5 * b;
        tcp.mean_queue = 0.5 * b;
        break;
      case Discipline::kFq:
        udp.mean_queue = x_udp > 0.5 * c ? 0.5 * b : 0.0;
        tcp.mean_queue = b - udp.mean_queue;
        break;
    }
    SteadyStateSummary out;
    out.flows.resize(2);
    out.flows[udp_index] = udp;
    out.flows[tcp_index] = tcp;
    out.utilization = (udp.throughput + tcp.throughput) / c;
    return out;
  }

  if (udp_count == 1 && tcp_count == 0) {
    SteadyStateSummary out;
    out.flows.push_back({flows[0].rate, flows[0].rate, 0.0, 0.0});
    out.utilization = flows[0].rate / c;
    return out;
  }

  throw ScenarioError(
      "no closed form for this flow mix (supported: N tcp flows, or one "
      "tcp with one udp)");
}

}  // namespace perflow::analytic
