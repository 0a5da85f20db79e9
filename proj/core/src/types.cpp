#include "cpn/types.hpp"

#include <algorithm>
#include <cctype>
#include <string>

namespace cpn {
namespace {

std::string lower(std::string_view text) {
  std::string out(text);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

}  // namespace

std::string_view to_string(QosGoal goal) {
  switch (goal) {
    case QosGoal::Delay: return "delay";
    case QosGoal::Jitter: return "jitter";
  }
  return "?";
}

std::optional<QosGoal> parse_goal(std::string_view text) {
  const auto t = lower(text);
  if (t == "delay") return QosGoal::Delay;
  if (t == "jitter") return QosGoal::Jitter;
  return std::nullopt;
}

std::string_view to_string(GeneratorKind kind) {
  switch (kind) {
    case GeneratorKind::VoiceCbr: return "voice";
    case GeneratorKind::UdpBackground: return "background";
  }
  return "?";
}

std::optional<GeneratorKind> parse_generator(std::string_view text) {
  const auto t = lower(text);
  if (t == "voice" || t == "voice_cbr" || t == "voicecbr") return GeneratorKind::VoiceCbr;
  if (t == "background" || t == "udp" || t == "udp_background" || t == "udpbackground")
    return GeneratorKind::UdpBackground;
  return std::nullopt;
}

std::string_view to_string(PacketKind kind) {
  switch (kind) {
    case PacketKind::Smart: return "smart";
    case PacketKind::Dumb: return "dumb";
    case PacketKind::Ack: return "ack";
  }
  return "?";
}

SimTime GeneratorSpec::interval() const {
  return SimTime::from_seconds(static_cast<double>(payload_bytes) * 8.0 / rate_bps);
}

GeneratorSpec GeneratorSpec::voice() {
  GeneratorSpec g;
  g.kind = GeneratorKind::VoiceCbr;
  g.payload_bytes = 172;
  g.rate_bps = 172.0 * 8.0 / 0.020;
  g.sp_ratio = 10;
  return g;
}

GeneratorSpec GeneratorSpec::background(double rate_bps, std::uint32_t payload_bytes) {
  GeneratorSpec g;
  g.kind = GeneratorKind::UdpBackground;
  g.payload_bytes = payload_bytes;
  g.rate_bps = rate_bps;
  g.sp_ratio = 10;
  return g;
}

}  // namespace cpn
