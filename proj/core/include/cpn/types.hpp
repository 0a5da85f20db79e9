#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "cpn/time.hpp"

namespace cpn {

/// Dense node index within one topology. Labels live in the Topology.
struct NodeId {
  std::uint16_t value = 0;

  constexpr auto operator<=>(const NodeId&) const = default;
};

enum class QosGoal : std::uint8_t { Delay, Jitter };

std::string_view to_string(QosGoal goal);
std::optional<QosGoal> parse_goal(std::string_view text);

/// Port-based flow classifier.
struct FlowKey {
  NodeId src;
  NodeId dst;
  std::uint16_t src_port = 0;
  std::uint16_t dst_port = 0;

  constexpr auto operator<=>(const FlowKey&) const = default;
};

enum class GeneratorKind : std::uint8_t { VoiceCbr, UdpBackground };

std::string_view to_string(GeneratorKind kind);
std::optional<GeneratorKind> parse_generator(std::string_view text);

struct GeneratorSpec {
  GeneratorKind kind = GeneratorKind::VoiceCbr;
  double rate_bps = 0.0;         // payload bit rate
  std::uint32_t payload_bytes = 0;
  std::uint32_t sp_ratio = 10;   // one smart packet per sp_ratio dumb packets

  /// Inter-packet gap = payload * 8 / rate.
  SimTime interval() const;

  /// 172-byte frames (160 B G.711-style 20 ms frame + 12 B RTP) every 20 ms.
  static GeneratorSpec voice();
  static GeneratorSpec background(double rate_bps, std::uint32_t payload_bytes = 1024);
};

struct FlowSpec {
  FlowKey key;
  QosGoal goal = QosGoal::Delay;
  GeneratorSpec generator;
  double start_s = 0.0;
  double stop_s = 0.0;
  /// Receiver runs a jitter buffer for this flow.
  bool playout = false;
  /// When non-empty, dumb packets always use this route and no smart packets
  /// are emitted for the flow.
  std::vector<NodeId> fixed_route;
};

enum class PacketKind : std::uint8_t { Smart, Dumb, Ack };

std::string_view to_string(PacketKind kind);

struct HopStamp {
  NodeId node;
  SimTime at;
};

/// One packet in flight.
///
/// `route` depends on kind: Dumb carries the full source route, Smart the hops
/// visited so far (last element is the current node), Ack the loop-erased
/// reverse path from the acknowledging destination back to the origin.
/// `hop` is the index of the current node in `route` for Dumb and Ack.
struct CpnPacket {
  PacketKind kind = PacketKind::Dumb;
  FlowKey flow;
  std::uint32_t flow_index = 0;
  std::uint64_t seq = 0;
  QosGoal goal = QosGoal::Delay;
  std::vector<NodeId> route;
  std::vector<HopStamp> hop_stamps;
  std::uint32_t payload_bytes = 0;
  SimTime created_at;

  std::uint32_t hop = 0;
  std::uint32_t path_id = 0;
  /// Kind of the packet an Ack acknowledges.
  PacketKind acked_kind = PacketKind::Dumb;
};

/// Base for all library errors that callers may want to catch as a group.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace cpn
