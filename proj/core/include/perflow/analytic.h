#ifndef PERFLOW_ANALYTIC_H_
#define PERFLOW_ANALYTIC_H_

#include <vector>

#include "perflow/scenario.h"
#include "perflow/summary.h"

// Closed-form steady-state results for two TCP flows (and their N-flow /
// TCP-UDP extensions) under FQ, LQF and SQF with longest-queue-drop.
//
// Expressions containing exp(C^2/2beta) are far outside floating range at
// realistic parameters (C ~ 833 pkt/s, beta ~ 400 gives an exponent near
// 870), so every such formula is evaluated in log space with a scaled
// complementary error function.

namespace perflow::analytic {

/// Error function (|error| < 1e-12 absolute everywhere).
double Erf(double x);

/// Scaled complementary error function exp(x^2) erfc(x) for x >= 0.
double ErfcxPos(double x);

/// log(erf(x2) - erf(x1)) for x2 > x1, stable for arguments of any
/// magnitude (the difference itself may underflow).
double LogErfDiff(double x1, double x2);

/// log(f(a, b, t)) where f is the lossy-phase decay kernel with ramp
/// slope `ramp` (beta for f, alpha for g) on a link of rate `capacity`.
/// 2*sqrt(ramp)*a*f(a,b,t) is the sending rate, t seconds into the lossy
/// phase, of a flow that started at rate a while the competing flow ramps
/// linearly from rate b.  Solves dA/dt = -A (A + b + ramp*t - capacity).
double LogFDecay(double a, double b, double t, double ramp, double capacity);

/// f of the SQF limit cycle (ramp = beta).  Guarded against overflow; the
/// value itself may underflow to 0 for large t, use LogFDecay then.
double FDecay(double a, double b, double t, double beta, double capacity);
/// g, the mirror of f with ramp = alpha.
double GDecay(double a, double b, double t, double alpha, double capacity);

/// SQF stationary limit cycle and means for two TCP flows with ramp
/// slopes alpha (flow 1), beta (flow 2).
SteadyStateSummary SqfSteady(double alpha, double beta, double capacity,
                             double buffer);

/// LQF stationary fixed point for two TCP flows.
SteadyStateSummary LqfSteady(double alpha, double beta, double capacity,
                             double buffer);

/// FQ stationary fixed point for N >= 1 TCP flows.
SteadyStateSummary FqSteady(const std::vector<double>& alphas, double capacity,
                            double buffer);

/// Mean stationary throughputs for N TCP flows:
///   SQF ~ R_k^2, LQF ~ 1/R_k^2, FQ = C/N.  Sums to capacity.
std::vector<double> NflowThroughputs(Discipline discipline,
                                     const std::vector<double>& rtts,
                                     double capacity);

/// Steady-state outcome of one TCP flow (ramp slope alpha) competing with
/// a CBR UDP stream of rate x_udp.
struct UdpCompetition {
  double udp_loss = 0.0;        // pkt/s
  double tcp_throughput = 0.0;  // pkt/s
  double tcp_rate = 0.0;        // pkt/s, TCP mean sending rate
};
UdpCompetition UdpMetrics(Discipline discipline, double x_udp, double capacity,
                          double alpha);

/// The phase-start rate recursion of the SQF cycle, with its geometric
/// envelope and contraction constant K < 1.  At realistic parameters K
/// underflows to zero and the iterates collapse immediately, which is the
/// correct limit behavior.
struct EpsilonRecursion {
  std::vector<double> eps;       // eps_1 .. eps_n
  std::vector<double> gamma;     // gamma_1 .. gamma_n
  std::vector<double> envelope;  // bound on eps_i
  double contraction = 0.0;      // K
};
EpsilonRecursion RunEpsilonRecursion(double alpha, double beta, double capacity,
                                     double eps1, int n);

/// Dispatches a scenario to the applicable closed forms (2 TCP flows,
/// N TCP flows, single flow, or TCP+UDP pair).  Fields with no published
/// closed form are NaN.  Throws ScenarioError for unsupported mixes.
SteadyStateSummary AnalyticSummary(const Scenario& scenario);

}  // namespace perflow::analytic

#endif  // PERFLOW_ANALYTIC_H_
