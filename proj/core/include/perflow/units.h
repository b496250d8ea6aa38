#ifndef PERFLOW_UNITS_H_
#define PERFLOW_UNITS_H_

// Canonical internal units used throughout the library:
//   rates  : packets/second (MTU-sized segments)
//   queues : packets
//   time   : seconds
// The AIMD increase rate alpha = 1/RTT^2 then carries pkt/s^2 with an
// implicit one-segment numerator, which is the only convention under
// which the closed-form steady-state expressions dimension-check.

namespace perflow {

constexpr double kBitsPerByte = 8.0;

inline double PacketBits(int packet_bytes) {
  return kBitsPerByte * static_cast<double>(packet_bytes);
}

// bits/s <-> pkt/s
inline double BpsToPktRate(double bits_per_s, int packet_bytes) {
  return bits_per_s / PacketBits(packet_bytes);
}
inline double PktRateToBps(double pkts_per_s, int packet_bytes) {
  return pkts_per_s * PacketBits(packet_bytes);
}

// Mbit/s <-> pkt/s (decimal mega, matching link-rate conventions)
inline double MbpsToPktRate(double mbps, int packet_bytes) {
  return BpsToPktRate(mbps * 1e6, packet_bytes);
}
inline double PktRateToMbps(double pkts_per_s, int packet_bytes) {
  return PktRateToBps(pkts_per_s, packet_bytes) / 1e6;
}

// Buffer sizes use decimal kB; the shared memory holds whole packets.
inline double KbToPackets(double kilobytes, int packet_bytes) {
  double pkts = kilobytes * 1000.0 / static_cast<double>(packet_bytes);
  // floor, tolerating representation error for exact multiples
  double f = static_cast<double>(static_cast<long long>(pkts + 1e-9));
  return f;
}

}  // namespace perflow

#endif  // PERFLOW_UNITS_H_
