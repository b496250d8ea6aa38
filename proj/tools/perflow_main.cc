// perflow: command-line front end for the analytic, fluid and packet
// engines, plus cross-engine comparison and parameter sweeps.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "perflow/analytic.h"
#include "perflow/fluid.h"
#include "perflow/metrics.h"
#include "perflow/packetsim.h"
#include "perflow/scenario.h"
#include "perflow/units.h"

namespace {

using json = nlohmann::json;
using perflow::Scenario;
using perflow::SteadyStateSummary;

constexpr int kExitError = 1;
constexpr int kExitToleranceExceeded = 2;

struct CommonArgs {
  std::string scenario_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  double window = 0.5;
  double tol = 0.15;
  double tol_fluid = 0.02;
  std::optional<double> warmup;
  std::optional<double> sample;
  std::vector<std::string> overrides;
};

Scenario LoadWithOverrides(const CommonArgs& args) {
  Scenario s = perflow::LoadScenarioFile(args.scenario_path);
  for (const std::string& kv : args.overrides) {
    auto eq = kv.find('=');
    if (eq == std::string::npos) {
      throw perflow::ScenarioError("--set expects key=value, got '" + kv + "'");
    }
    perflow::ApplyOverride(s, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (args.seed) {
    s.seed = *args.seed;
  }
  return s;
}

double WarmupFor(const CommonArgs& args, const Scenario& s) {
  return args.warmup ? *args.warmup : s.horizon / 4.0;
}

std::string FormatMbps(const Scenario& s, double pkts_per_s) {
  char buf[32];
  if (std::isnan(pkts_per_s)) return "-";
  std::snprintf(buf, sizeof(buf), "%.2f", s.mbps(pkts_per_s));
  return buf;
}

std::string FormatPkt(double pkt) {
  char buf[32];
  if (std::isnan(pkt)) return "-";
  std::snprintf(buf, sizeof(buf), "%.1f", pkt);
  return buf;
}

void PrintSummaryTable(const Scenario& s, const std::string& engine,
                       const SteadyStateSummary& summary) {
  std::printf("engine: %-8s discipline: %-4s C: %.2f Mbps  B: %.0f pkt\n",
              engine.c_str(), perflow::ToString(s.discipline),
              s.capacity_mbps(), s.buffer);
  std::printf("%-12s", "metric");
  for (int k = 1; k <= s.num_flows(); ++k) std::printf("%10s%d", "flow", k);
  std::printf("%11s\n", "total");
  auto row = [&](const char* name, auto get, bool mbps) {
    std::printf("%-12s", name);
    double total = 0.0;
    for (const auto& f : summary.flows) {
      double v = get(f);
      total += v;
      std::printf("%11s", mbps ? FormatMbps(s, v).c_str() : FormatPkt(v).c_str());
    }
    std::printf("%11s\n",
                mbps ? FormatMbps(s, total).c_str() : FormatPkt(total).c_str());
  };
  row("Abar_mbps", [](const perflow::FlowStats& f) { return f.sending_rate; }, true);
  row("Xbar_mbps", [](const perflow::FlowStats& f) { return f.throughput; }, true);
  row("Qbar_pkt", [](const perflow::FlowStats& f) { return f.mean_queue; }, false);
  row("Lbar_mbps", [](const perflow::FlowStats& f) { return f.loss_rate; }, true);
  std::printf("%-12s%11.4f\n", "utilization", summary.utilization);
  if (summary.cycle_period) {
    std::printf("%-12s%11.4f s\n", "cycle", *summary.cycle_period);
  }
  if (s.discipline == perflow::Discipline::kLqf && s.num_flows() > 2 &&
      engine == "analytic") {
    std::printf("note: N>2 LQF sending rates extrapolate the two-flow fixed point\n");
  }
}

json ScenarioJson(const Scenario& s) {
  json flows = json::array();
  for (const auto& f : s.flows) {
    json jf;
    jf["kind"] = perflow::ToString(f.kind);
    if (f.is_tcp()) {
      jf["rtt_ms"] = f.propagation_rtt * 1000.0;
    } else {
      jf["rate_mbps"] = s.mbps(f.rate);
    }
    flows.push_back(jf);
  }
  return json{{"capacity_mbps", s.capacity_mbps()},
              {"capacity_pkt_s", s.capacity},
              {"buffer_pkt", s.buffer},
              {"packet_bytes", s.packet_bytes},
              {"discipline", perflow::ToString(s.discipline)},
              {"horizon_s", s.horizon},
              {"rtt_mode", perflow::ToString(s.rtt_mode)},
              {"detection_mode", perflow::ToString(s.detection_mode)},
              {"seed", s.seed},
              {"flows", flows}};
}

json SummaryJson(const Scenario& s, const std::string& engine,
                 const SteadyStateSummary& summary) {
  json flows = json::array();
  for (size_t k = 0; k < summary.flows.size(); ++k) {
    const auto& f = summary.flows[k];
    flows.push_back(json{
        {"kind", perflow::ToString(s.flows[k].kind)},
        {"sending_rate_mbps", s.mbps(f.sending_rate)},
        {"throughput_mbps", s.mbps(f.throughput)},
        {"mean_queue_pkt", f.mean_queue},
        {"loss_rate_mbps", s.mbps(f.loss_rate)},
    });
  }
  json out{{"engine", engine},
           {"discipline", perflow::ToString(s.discipline)},
           {"parameters", ScenarioJson(s)},
           {"flows", flows},
           {"utilization", summary.utilization}};
  if (summary.cycle_period) out["cycle_period_s"] = *summary.cycle_period;
  return out;
}

void WriteFile(const std::string& dir, const std::string& name,
               const std::string& contents) {
  if (dir.empty()) return;
  std::filesystem::create_directories(dir);
  std::ofstream out(std::filesystem::path(dir) / name, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write to " + dir + "/" + name);
  out << contents;
}

SteadyStateSummary PacketSummary(const perflow::packet::PacketSimReport& r) {
  SteadyStateSummary s;
  s.flows.resize(r.throughput.size());
  for (size_t k = 0; k < r.throughput.size(); ++k) {
    s.flows[k] = {r.sending_rate[k], r.throughput[k], r.mean_queue[k],
                  r.loss_rate[k]};
  }
  s.utilization = r.utilization;
  return s;
}

int CmdAnalytic(const CommonArgs& args) {
  Scenario s = LoadWithOverrides(args);
  SteadyStateSummary summary = perflow::analytic::AnalyticSummary(s);
  PrintSummaryTable(s, "analytic", summary);
  WriteFile(args.out_dir, "analytic_summary.json",
            SummaryJson(s, "analytic", summary).dump(2) + "\n");
  return 0;
}

int CmdFluid(const CommonArgs& args) {
  Scenario s = LoadWithOverrides(args);
  perflow::fluid::SimulateOptions opt;
  if (args.sample) opt.sample_period = *args.sample;
  perflow::fluid::Trajectory traj = perflow::fluid::Simulate(s, opt);
  SteadyStateSummary summary = perflow::fluid::Summarize(traj, WarmupFor(args, s));
  PrintSummaryTable(s, "fluid", summary);
  if (!args.out_dir.empty()) {
    std::ostringstream csv;
    perflow::fluid::WriteTrajectoryCsv(traj, csv);
    WriteFile(args.out_dir, "trajectory.csv", csv.str());
    WriteFile(args.out_dir, "fluid_summary.json",
              SummaryJson(s, "fluid", summary).dump(2) + "\n");
  }
  return 0;
}

int CmdPacket(const CommonArgs& args) {
  Scenario s = LoadWithOverrides(args);
  perflow::packet::PacketSimOptions opt;
  opt.warmup = WarmupFor(args, s);
  opt.window = args.window;
  perflow::packet::PacketSimReport report = perflow::packet::RunPacketSim(s, opt);
  SteadyStateSummary summary = PacketSummary(report);
  PrintSummaryTable(s, "packet", summary);
  std::printf("goodput_ratio%10.4f\n", report.goodput_ratio);
  double jain_lt = 0.0, jain_st = 0.0;
  bool have_jain = false;
  try {
    std::vector<double> totals(report.throughput.begin(), report.throughput.end());
    jain_lt = perflow::metrics::LongTermJain(totals);
    jain_st = perflow::metrics::WindowedJain(report.windows);
    have_jain = true;
    std::printf("jain_short %12.4f\njain_long  %12.4f\n", jain_st, jain_lt);
  } catch (const perflow::metrics::MetricsError&) {
    // idle run; fairness undefined
  }

  json j = SummaryJson(s, "packet", summary);
  json counters = json::array();
  for (const auto& c : report.counters) {
    counters.push_back(json{{"sent", c.sent},
                            {"delivered", c.delivered},
                            {"dropped", c.dropped}});
  }
  j["counters"] = counters;
  j["goodput_ratio"] = report.goodput_ratio;
  if (have_jain) {
    j["jain"] = json{{"short_term", jain_st}, {"long_term", jain_lt}};
  }
  WriteFile(args.out_dir, "packet_summary.json", j.dump(2) + "\n");

  if (!args.out_dir.empty()) {
    std::ostringstream csv;
    csv << "t,flow,rate_pkts\n";
    csv.precision(10);
    const auto& w = report.windows;
    for (size_t i = 0; i < w.delivered.size(); ++i) {
      double t = opt.warmup + (static_cast<double>(i) + 1.0) * w.window;
      for (size_t k = 0; k < w.delivered[i].size(); ++k) {
        double rate_pkts = w.delivered[i][k] /
                           perflow::PacketBits(s.packet_bytes) / w.window;
        csv << t << ',' << k + 1 << ',' << rate_pkts << "\n";
      }
    }
    WriteFile(args.out_dir, "packet_windows.csv", csv.str());
  }
  return 0;
}

double RelDev(double a, double b) {
  double scale = std::max(std::abs(a), std::abs(b));
  if (scale <= 0.0) return 0.0;
  return std::abs(a - b) / scale;
}

int CmdCompare(const CommonArgs& args) {
  Scenario s = LoadWithOverrides(args);
  SteadyStateSummary analytic = perflow::analytic::AnalyticSummary(s);
  perflow::fluid::Trajectory traj = perflow::fluid::Simulate(s);
  SteadyStateSummary fluid = perflow::fluid::Summarize(traj, WarmupFor(args, s));
  perflow::packet::PacketSimOptions popt;
  popt.warmup = WarmupFor(args, s);
  popt.window = args.window;
  SteadyStateSummary packet = PacketSummary(perflow::packet::RunPacketSim(s, popt));

  std::printf("comparison   discipline: %s  C: %.2f Mbps  B: %.0f pkt\n",
              perflow::ToString(s.discipline), s.capacity_mbps(), s.buffer);
  std::printf("%-14s%12s%12s%12s%10s\n", "metric", "analytic", "fluid",
              "packet", "maxdev");
  bool ok = true;
  auto report_row = [&](const std::string& name, double a, double f, double p,
                        bool mbps, bool checked) {
    double dev = std::max({RelDev(a, f), RelDev(a, p), RelDev(f, p)});
    if (checked) {
      if (RelDev(a, f) > args.tol_fluid || RelDev(f, p) > args.tol ||
          RelDev(a, p) > args.tol) {
        ok = false;
      }
    }
    auto fmt = [&](double v) {
      return mbps ? FormatMbps(s, v) : FormatPkt(v);
    };
    std::printf("%-14s%12s%12s%12s%9.1f%%\n", name.c_str(), fmt(a).c_str(),
                fmt(f).c_str(), fmt(p).c_str(), 100.0 * dev);
  };
  for (int k = 0; k < s.num_flows(); ++k) {
    const size_t uk = static_cast<size_t>(k);
    report_row("Xbar" + std::to_string(k + 1),
               analytic.flows[uk].throughput, fluid.flows[uk].throughput,
               packet.flows[uk].throughput, true, true);
  }
  for (int k = 0; k < s.num_flows(); ++k) {
    const size_t uk = static_cast<size_t>(k);
    report_row("Abar" + std::to_string(k + 1),
               analytic.flows[uk].sending_rate, fluid.flows[uk].sending_rate,
               packet.flows[uk].sending_rate, true, false);
    report_row("Qbar" + std::to_string(k + 1), analytic.flows[uk].mean_queue,
               fluid.flows[uk].mean_queue, packet.flows[uk].mean_queue, false,
               false);
    report_row("Lbar" + std::to_string(k + 1), analytic.flows[uk].loss_rate,
               fluid.flows[uk].loss_rate, packet.flows[uk].loss_rate, true,
               false);
  }
  report_row("utilization", analytic.utilization, fluid.utilization,
             packet.utilization, false, false);
  std::printf("tolerances: fluid-vs-analytic %.1f%%, packet-vs-either %.1f%% "
              "(checked on per-flow throughput)\n",
              100.0 * args.tol_fluid, 100.0 * args.tol);
  std::printf(ok ? "compare: PASS\n" : "compare: FAIL\n");

  if (!args.out_dir.empty()) {
    json j{{"parameters", ScenarioJson(s)},
           {"analytic", SummaryJson(s, "analytic", analytic)},
           {"fluid", SummaryJson(s, "fluid", fluid)},
           {"packet", SummaryJson(s, "packet", packet)},
           {"pass", ok}};
    WriteFile(args.out_dir, "compare.json", j.dump(2) + "\n");
  }
  return ok ? 0 : kExitToleranceExceeded;
}

struct SweepArgs {
  std::string param;
  double from = 0.0;
  double to = 0.0;
  int steps = 0;
  std::string engine = "analytic";
};

int CmdSweep(const CommonArgs& args, const SweepArgs& sweep) {
  Scenario base = LoadWithOverrides(args);
  std::ostringstream csv;
  csv << "param,value";
  for (int k = 1; k <= base.num_flows(); ++k) {
    csv << ",A" << k << "_mbps,X" << k << "_mbps,Q" << k << "_pkt,L" << k
        << "_mbps";
  }
  csv << ",utilization\n";
  for (int i = 0; i < sweep.steps; ++i) {
    double value = sweep.steps == 1
                       ? sweep.from
                       : sweep.from + (sweep.to - sweep.from) * i /
                                          (sweep.steps - 1);
    Scenario s = base;
    char vbuf[32];
    std::snprintf(vbuf, sizeof(vbuf), "%.10g", value);
    perflow::ApplyOverride(s, sweep.param, vbuf);
    SteadyStateSummary summary;
    if (sweep.engine == "analytic") {
      summary = perflow::analytic::AnalyticSummary(s);
    } else if (sweep.engine == "fluid") {
      summary = perflow::fluid::Summarize(perflow::fluid::Simulate(s),
                                          WarmupFor(args, s));
    } else if (sweep.engine == "packet") {
      perflow::packet::PacketSimOptions opt;
      opt.warmup = WarmupFor(args, s);
      opt.window = args.window;
      summary = PacketSummary(perflow::packet::RunPacketSim(s, opt));
    } else {
      throw std::runtime_error("unknown sweep engine: " + sweep.engine);
    }
    csv << sweep.param << ',' << vbuf;
    char buf[64];
    for (const auto& f : summary.flows) {
      std::snprintf(buf, sizeof(buf), ",%.6g,%.6g,%.6g,%.6g",
                    s.mbps(f.sending_rate), s.mbps(f.throughput), f.mean_queue,
                    s.mbps(f.loss_rate));
      csv << buf;
    }
    std::snprintf(buf, sizeof(buf), ",%.6g\n", summary.utilization);
    csv << buf;
  }
  if (args.out_dir.empty()) {
    std::cout << csv.str();
  } else {
    WriteFile(args.out_dir, "sweep.csv", csv.str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"perflow: TCP/UDP performance under per-flow scheduling "
               "(FQ, LQF, SQF) with longest-queue-drop"};
  app.require_subcommand(1);

  CommonArgs args;
  SweepArgs sweep;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--scenario", args.scenario_path, "scenario file")
        ->required();
    cmd->add_option("--out", args.out_dir, "output directory");
    cmd->add_option("--seed", args.seed, "override the scenario seed");
    cmd->add_option("--window", args.window, "fairness window (s)");
    cmd->add_option("--warmup", args.warmup, "warmup excluded from averages (s)");
    cmd->add_option("--set", args.overrides,
                    "scenario override key=value (repeatable)");
  };

  CLI::App* analytic = app.add_subcommand("analytic", "closed-form steady state");
  add_common(analytic);
  CLI::App* fluid = app.add_subcommand("fluid", "fluid ODE simulation");
  add_common(fluid);
  fluid->add_option("--sample", args.sample, "trajectory sample period (s)");
  CLI::App* packet = app.add_subcommand("packet", "packet-level simulation");
  add_common(packet);
  CLI::App* compare = app.add_subcommand("compare", "run all engines and compare");
  add_common(compare);
  compare->add_option("--tol", args.tol, "packet-vs-either tolerance");
  compare->add_option("--tol-fluid", args.tol_fluid,
                      "fluid-vs-analytic tolerance");
  CLI::App* sweep_cmd = app.add_subcommand("sweep", "sweep one scenario key");
  add_common(sweep_cmd);
  sweep_cmd->add_option("--param", sweep.param, "scenario key to sweep")
      ->required();
  sweep_cmd->add_option("--from", sweep.from, "first value")->required();
  sweep_cmd->add_option("--to", sweep.to, "last value")->required();
  sweep_cmd->add_option("--steps", sweep.steps, "number of values")->required();
  sweep_cmd->add_option("--engine", sweep.engine,
                        "engine for sweep rows (analytic|fluid|packet)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (analytic->parsed()) return CmdAnalytic(args);
    if (fluid->parsed()) return CmdFluid(args);
    if (packet->parsed()) return CmdPacket(args);
    if (compare->parsed()) return CmdCompare(args);
    if (sweep_cmd->parsed()) return CmdSweep(args, sweep);
  } catch (const std::exception& e) {
    std::cerr << "perflow: error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}
