#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cpn/scenario.hpp"
#include "cpn/simnet.hpp"

namespace cpn::cli {

/// Configuration or input error; `line` is 0 when not tied to a line.
class ConfigError : public Error {
 public:
  ConfigError(std::string source, std::size_t line, const std::string& message);
  const std::string& source() const { return source_; }
  std::size_t line() const { return line_; }

 private:
  std::string source_;
  std::size_t line_;
};

/// A [flows.N] section before node labels are resolved.
struct FlowConfig {
  std::size_t line = 0;
  std::string src;
  std::string dst;
  std::uint16_t src_port = 0;
  std::uint16_t dst_port = 0;
  QosGoal goal = QosGoal::Jitter;
  GeneratorKind generator = GeneratorKind::VoiceCbr;
  std::optional<double> rate_bps;
  std::optional<std::uint32_t> payload_bytes;
  std::optional<std::uint32_t> sp_ratio;
  double start_s = 0.0;
  std::optional<double> stop_s;
  std::optional<bool> playout;
  std::vector<std::string> route;
};

struct RunConfig {
  std::string source = "<defaults>";
  /// "testbed8" or a topology file (relative paths resolve against the
  /// config file's directory).
  std::string topology = "testbed8";
  std::filesystem::path base_dir = ".";
  /// Empty: the default voice + background flows.
  std::vector<FlowConfig> flows;
  double background_rate_bps = 10e6;
  QosGoal voice_goal = QosGoal::Jitter;
  QosGoal background_goal = QosGoal::Jitter;
  std::uint32_t sp_ratio = 10;
  double window_s = 100.0;
  std::filesystem::path out_dir;
  bool event_log = true;
  bool rnn_dump = false;
  sim::SimConfig sim;
};

/// Sections [topology], [flows.N], [rnn], [buffer], [run]; `key = value`
/// lines; `#` comments.
RunConfig parse_config(std::istream& in, const std::string& source_name,
                       const std::filesystem::path& base_dir = ".");
RunConfig load_config(const std::filesystem::path& path);
void write_config(std::ostream& out, const RunConfig& config);

/// Resolves the topology and flows into a scenario. Throws ConfigError for a
/// missing topology file or unknown labels, and for validation failures.
Scenario build_scenario(const RunConfig& config);

/// Index of the first VoiceCbr flow, if any.
std::optional<std::uint32_t> voice_flow_index(const Scenario& scenario);

}  // namespace cpn::cli
