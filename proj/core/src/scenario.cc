#include "perflow/scenario.h"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "perflow/units.h"

namespace perflow {

namespace {

std::string_view Trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) {
    s.remove_prefix(1);
  }
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) {
    s.remove_suffix(1);
  }
  return s;
}

double ParseNumber(std::string_view key, std::string_view value) {
  try {
    size_t pos = 0;
    std::string v(value);
    double x = std::stod(v, &pos);
    if (pos != v.size()) {
      throw ScenarioError("trailing characters in value for '" +
                          std::string(key) + "'");
    }
    return x;
  } catch (const ScenarioError&) {
    throw;
  } catch (const std::exception&) {
    throw ScenarioError("malformed number for '" + std::string(key) + "': '" +
                        std::string(value) + "'");
  }
}

std::uint64_t ParseSeed(std::string_view value) {
  std::uint64_t out = 0;
  auto [ptr, ec] =
      std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw ScenarioError("malformed seed: '" + std::string(value) + "'");
  }
  return out;
}

Discipline ParseDiscipline(std::string_view v) {
  if (v == "fq") return Discipline::kFq;
  if (v == "lqf") return Discipline::kLqf;
  if (v == "sqf") return Discipline::kSqf;
  throw ScenarioError("unknown discipline '" + std::string(v) +
                      "' (expected fq|lqf|sqf)");
}

RttMode ParseRttMode(std::string_view v) {
  if (v == "constant") return RttMode::kConstant;
  if (v == "queue_augmented") return RttMode::kQueueAugmented;
  throw ScenarioError("unknown rtt_mode '" + std::string(v) +
                      "' (expected constant|queue_augmented)");
}

DetectionMode ParseDetectionMode(std::string_view v) {
  if (v == "instantaneous") return DetectionMode::kInstantaneous;
  if (v == "delayed") return DetectionMode::kDelayed;
  throw ScenarioError("unknown detection_mode '" + std::string(v) +
                      "' (expected instantaneous|delayed)");
}

// Raw values as written in the file; converted to canonical units only
// once packet_bytes is known.
struct RawFlow {
  std::string kind;
  double rtt_ms = -1.0;
  double rate_mbps = -1.0;
  double initial_rate = 0.0;
  double initial_queue = 0.0;
};

FlowSpec ConvertFlow(const RawFlow& raw, int packet_bytes) {
  FlowSpec flow;
  if (raw.kind == "tcp") {
    flow.kind = FlowKind::kTcp;
    if (raw.rtt_ms < 0) throw ScenarioError("tcp flow requires rtt_ms");
    if (raw.rate_mbps >= 0) {
      throw ScenarioError("rate_mbps is not valid for tcp flows");
    }
    flow.propagation_rtt = raw.rtt_ms / 1000.0;
  } else if (raw.kind == "udp") {
    flow.kind = FlowKind::kUdpCbr;
    if (raw.rate_mbps < 0) throw ScenarioError("udp flow requires rate_mbps");
    if (raw.rtt_ms >= 0) {
      throw ScenarioError("rtt_ms is not valid for udp flows");
    }
    flow.rate = MbpsToPktRate(raw.rate_mbps, packet_bytes);
  } else {
    throw ScenarioError("unknown flow kind '" + raw.kind +
                        "' (expected tcp|udp)");
  }
  flow.initial_rate = raw.initial_rate;
  flow.initial_queue = raw.initial_queue;
  return flow;
}

}  // namespace

const char* ToString(Discipline d) {
  switch (d) {
    case Discipline::kFq: return "fq";
    case Discipline::kLqf: return "lqf";
    case Discipline::kSqf: return "sqf";
  }
  return "?";
}

const char* ToString(RttMode m) {
  return m == RttMode::kConstant ? "constant" : "queue_augmented";
}

const char* ToString(DetectionMode m) {
  return m == DetectionMode::kInstantaneous ? "instantaneous" : "delayed";
}

const char* ToString(FlowKind k) {
  return k == FlowKind::kTcp ? "tcp" : "udp";
}

double Scenario::capacity_mbps() const {
  return PktRateToMbps(capacity, packet_bytes);
}

double Scenario::mbps(double pkts_per_s) const {
  return PktRateToMbps(pkts_per_s, packet_bytes);
}

void Scenario::Validate() const {
  if (packet_bytes <= 0) throw ScenarioError("packet_bytes must be positive");
  if (!(capacity > 0)) throw ScenarioError("capacity must be positive");
  if (!(buffer >= 2.0)) {
    throw ScenarioError("buffer must hold at least two packets");
  }
  if (flows.empty()) throw ScenarioError("at least one flow is required");
  if (!(horizon > 0)) throw ScenarioError("horizon must be positive");
  double initial_queue_total = 0.0;
  for (const FlowSpec& flow : flows) {
    if (flow.is_tcp()) {
      if (!(flow.propagation_rtt > 0)) {
        throw ScenarioError("tcp flow requires positive propagation rtt");
      }
    } else {
      if (!(flow.rate > 0)) throw ScenarioError("udp rate must be positive");
      if (flow.rate > capacity) {
        throw ScenarioError("udp rate exceeds capacity");
      }
    }
    if (flow.initial_rate < 0) {
      throw ScenarioError("initial_rate must be non-negative");
    }
    if (flow.initial_queue < 0) {
      throw ScenarioError("initial_queue must be non-negative");
    }
    initial_queue_total += flow.initial_queue;
  }
  if (initial_queue_total > buffer) {
    throw ScenarioError("initial queues exceed buffer");
  }
}

double AlphaOf(const FlowSpec& flow) {
  if (!flow.is_tcp()) {
    throw ScenarioError("alpha is defined only for tcp flows");
  }
  return 1.0 / (flow.propagation_rtt * flow.propagation_rtt);
}

Scenario LoadScenario(std::string_view text) {
  double capacity_mbps = -1.0;
  double buffer_kb = -1.0;
  double horizon_s = -1.0;
  int packet_bytes = 1500;
  bool have_discipline = false;
  Scenario scenario;
  std::vector<RawFlow> raw_flows;

  std::istringstream in{std::string(text)};
  std::string line_buf;
  int line_no = 0;
  while (std::getline(in, line_buf)) {
    ++line_no;
    std::string_view line(line_buf);
    if (auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = Trim(line);
    if (line.empty()) continue;

    auto fail = [&](const std::string& msg) {
      throw ScenarioError("line " + std::to_string(line_no) + ": " + msg);
    };

    if (line.substr(0, 6) == "[flow]") {
      RawFlow raw;
      bool have_kind = false;
      std::istringstream tokens{std::string(line.substr(6))};
      std::string token;
      while (tokens >> token) {
        auto eq = token.find('=');
        if (eq == std::string::npos) fail("expected key=value, got '" + token + "'");
        std::string key = token.substr(0, eq);
        std::string value = token.substr(eq + 1);
        if (key == "kind") {
          raw.kind = value;
          have_kind = true;
        } else if (key == "rtt_ms") {
          raw.rtt_ms = ParseNumber(key, value);
        } else if (key == "rate_mbps") {
          raw.rate_mbps = ParseNumber(key, value);
        } else if (key == "initial_rate") {
          raw.initial_rate = ParseNumber(key, value);
        } else if (key == "initial_queue") {
          raw.initial_queue = ParseNumber(key, value);
        } else {
          fail("unknown flow key '" + key + "'");
        }
      }
      if (!have_kind) fail("flow block requires kind=tcp|udp");
      raw_flows.push_back(raw);
      continue;
    }

    auto eq = line.find('=');
    if (eq == std::string_view::npos) fail("expected 'key = value'");
    std::string key{Trim(line.substr(0, eq))};
    std::string value{Trim(line.substr(eq + 1))};
    if (key.empty()) fail("empty key");
    if (value.empty()) fail("empty value for '" + key + "'");

    if (key == "capacity_mbps") {
      capacity_mbps = ParseNumber(key, value);
    } else if (key == "buffer_kb") {
      buffer_kb = ParseNumber(key, value);
    } else if (key == "packet_bytes") {
      packet_bytes = static_cast<int>(ParseNumber(key, value));
    } else if (key == "discipline") {
      scenario.discipline = ParseDiscipline(value);
      have_discipline = true;
    } else if (key == "horizon_s") {
      horizon_s = ParseNumber(key, value);
    } else if (key == "rtt_mode") {
      scenario.rtt_mode = ParseRttMode(value);
    } else if (key == "detection_mode") {
      scenario.detection_mode = ParseDetectionMode(value);
    } else if (key == "seed") {
      scenario.seed = ParseSeed(value);
    } else {
      fail("unknown key '" + key + "'");
    }
  }

  if (capacity_mbps < 0) throw ScenarioError("missing required key capacity_mbps");
  if (buffer_kb < 0) throw ScenarioError("missing required key buffer_kb");
  if (horizon_s < 0) throw ScenarioError("missing required key horizon_s");
  if (!have_discipline) throw ScenarioError("missing required key discipline");

  scenario.packet_bytes = packet_bytes;
  scenario.capacity = MbpsToPktRate(capacity_mbps, packet_bytes);
  scenario.buffer = KbToPackets(buffer_kb, packet_bytes);
  scenario.horizon = horizon_s;
  scenario.flows.reserve(raw_flows.size());
  for (const RawFlow& raw : raw_flows) {
    scenario.flows.push_back(ConvertFlow(raw, packet_bytes));
  }
  scenario.Validate();
  return scenario;
}

Scenario LoadScenarioFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError("cannot open scenario file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return LoadScenario(buf.str());
}

void ApplyOverride(Scenario& scenario, const std::string& key,
                   const std::string& value) {
  auto as_number = [&]() { return ParseNumber(key, value); };

  if (key.rfind("flow", 0) == 0) {
    auto dot = key.find('.');
    if (dot == std::string::npos) {
      throw ScenarioError("flow override must look like flowN.key");
    }
    int index = 0;
    try {
      index = std::stoi(key.substr(4, dot - 4));
    } catch (const std::exception&) {
      throw ScenarioError("bad flow index in override '" + key + "'");
    }
    if (index < 1 || index > scenario.num_flows()) {
      throw ScenarioError("flow index out of range in override '" + key + "'");
    }
    FlowSpec& flow = scenario.flows[static_cast<size_t>(index - 1)];
    std::string field = key.substr(dot + 1);
    if (field == "rtt_ms") {
      if (!flow.is_tcp()) throw ScenarioError("rtt_ms override on udp flow");
      flow.propagation_rtt = as_number() / 1000.0;
    } else if (field == "rate_mbps") {
      if (flow.is_tcp()) throw ScenarioError("rate_mbps override on tcp flow");
      flow.rate = MbpsToPktRate(as_number(), scenario.packet_bytes);
    } else if (field == "initial_rate") {
      flow.initial_rate = as_number();
    } else if (field == "initial_queue") {
      flow.initial_queue = as_number();
    } else {
      throw ScenarioError("unknown flow override '" + field + "'");
    }
  } else if (key == "capacity_mbps") {
    scenario.capacity = MbpsToPktRate(as_number(), scenario.packet_bytes);
  } else if (key == "buffer_kb") {
    scenario.buffer = KbToPackets(as_number(), scenario.packet_bytes);
  } else if (key == "horizon_s") {
    scenario.horizon = as_number();
  } else if (key == "discipline") {
    scenario.discipline = ParseDiscipline(value);
  } else if (key == "rtt_mode") {
    scenario.rtt_mode = ParseRttMode(value);
  } else if (key == "detection_mode") {
    scenario.detection_mode = ParseDetectionMode(value);
  } else if (key == "seed") {
    scenario.seed = ParseSeed(value);
  } else {
    throw ScenarioError("unknown override key '" + key + "'");
  }
  scenario.Validate();
}

}  // namespace perflow
