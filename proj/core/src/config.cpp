#include "cpn/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace cpn::cli {
namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::string unquote(const std::string& s) {
  if (s.size() >= 2 && ((s.front() == '"' && s.back() == '"') || (s.front() == '\'' && s.back() == '\'')))
    return s.substr(1, s.size() - 2);
  return s;
}

std::string strip_comment(const std::string& line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') quoted = !quoted;
    if (!quoted && line[i] == '#') return line.substr(0, i);
  }
  return line;
}

struct Reader {
  const std::string& source;
  std::size_t line;

  [[noreturn]] void fail(const std::string& what) const { throw ConfigError(source, line, what); }

  double real(const std::string& key, const std::string& v) const {
    try {
      std::size_t used = 0;
      const double d = std::stod(v, &used);
      if (used != v.size()) throw std::invalid_argument(v);
      return d;
    } catch (const std::logic_error&) {
      fail("key '" + key + "': expected a number, got '" + v + "'");
    }
  }
  std::uint64_t integer(const std::string& key, const std::string& v) const {
    std::uint64_t out = 0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size())
      fail("key '" + key + "': expected a non-negative integer, got '" + v + "'");
    return out;
  }
  std::uint16_t port(const std::string& key, const std::string& v) const {
    const auto p = integer(key, v);
    if (p > 65535) fail("key '" + key + "': port out of range");
    return static_cast<std::uint16_t>(p);
  }
  bool boolean(const std::string& key, const std::string& v) const {
    if (v == "true" || v == "yes" || v == "1" || v == "on") return true;
    if (v == "false" || v == "no" || v == "0" || v == "off") return false;
    fail("key '" + key + "': expected true/false, got '" + v + "'");
  }
  QosGoal goal(const std::string& key, const std::string& v) const {
    if (auto g = parse_goal(v)) return *g;
    fail("key '" + key + "': unknown goal '" + v + "' (delay|jitter)");
  }
};

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(v);
  while (std::getline(is, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

ConfigError::ConfigError(std::string source, std::size_t line, const std::string& message)
    : Error(line ? source + ":" + std::to_string(line) + ": " + message : source + ": " + message),
      source_(std::move(source)),
      line_(line) {}

RunConfig parse_config(std::istream& in, const std::string& source_name,
                       const std::filesystem::path& base_dir) {
  RunConfig cfg;
  cfg.source = source_name;
  cfg.base_dir = base_dir;
  std::map<std::size_t, FlowConfig> flows;

  std::string section;
  std::size_t flow_index = 0;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    Reader rd{source_name, line_no};
    const std::string line = trim(strip_comment(raw));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') rd.fail("unterminated section header");
      section = trim(std::string_view(line).substr(1, line.size() - 2));
      if (section.rfind("flows.", 0) == 0) {
        const auto idx = section.substr(6);
        flow_index = rd.integer("section", idx);
        if (flows.contains(flow_index)) rd.fail("duplicate section [" + section + "]");
        flows[flow_index].line = line_no;
        section = "flows";
      } else if (section != "topology" && section != "rnn" && section != "buffer" && section != "run") {
        rd.fail("unknown section [" + section + "]");
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) rd.fail("expected 'key = value'");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = unquote(trim(std::string_view(line).substr(eq + 1)));
    if (section.empty()) rd.fail("key '" + key + "' outside of any section");

    auto unknown = [&] { rd.fail("unknown key '" + key + "' in [" + section + "]"); };
    if (section == "topology") {
      if (key == "path" || key == "file") cfg.topology = value;
      else unknown();
    } else if (section == "flows") {
      auto& f = flows[flow_index];
      if (key == "src") f.src = value;
      else if (key == "dst") f.dst = value;
      else if (key == "src_port") f.src_port = rd.port(key, value);
      else if (key == "dst_port") f.dst_port = rd.port(key, value);
      else if (key == "goal") f.goal = rd.goal(key, value);
      else if (key == "generator") {
        auto g = parse_generator(value);
        if (!g) rd.fail("unknown generator '" + value + "' (voice|background)");
        f.generator = *g;
      } else if (key == "rate_bps") f.rate_bps = rd.real(key, value);
      else if (key == "payload_bytes") f.payload_bytes = static_cast<std::uint32_t>(rd.integer(key, value));
      else if (key == "sp_ratio") f.sp_ratio = static_cast<std::uint32_t>(rd.integer(key, value));
      else if (key == "start_s") f.start_s = rd.real(key, value);
      else if (key == "stop_s") f.stop_s = rd.real(key, value);
      else if (key == "playout") f.playout = rd.boolean(key, value);
      else if (key == "route") f.route = split_list(value);
      else unknown();
    } else if (section == "rnn") {
      if (key == "explore_prob") cfg.sim.explore_prob = rd.real(key, value);
      else if (key == "epsilon" || key == "epsilon_s") cfg.sim.epsilon_s = rd.real(key, value);
      else if (key == "sp_ratio") cfg.sp_ratio = static_cast<std::uint32_t>(rd.integer(key, value));
      else if (key == "threshold_factor") cfg.sim.threshold_factor = rd.real(key, value);
      else if (key == "max_hops") cfg.sim.max_hops = static_cast<std::uint32_t>(rd.integer(key, value));
      else if (key == "rl_on_dp_acks") cfg.sim.rl_on_dp_acks = rd.boolean(key, value);
      else if (key == "mailbox_keying") {
        if (value == "flow") cfg.sim.keying = goals::MailboxKeying::PerFlow;
        else if (value == "class_destination") cfg.sim.keying = goals::MailboxKeying::PerClassDestination;
        else rd.fail("mailbox_keying must be flow|class_destination");
      } else if (key == "dump") cfg.rnn_dump = rd.boolean(key, value);
      else unknown();
    } else if (section == "buffer") {
      if (key == "capacity") {
        if (value == "inf" || value == "unbounded") cfg.sim.buffer.capacity = std::nullopt;
        else cfg.sim.buffer.capacity = static_cast<std::size_t>(rd.integer(key, value));
      } else if (key == "hold_timeout_s") {
        cfg.sim.buffer.hold_timeout =
            value == "inf" ? SimTime::infinite() : SimTime::from_seconds(rd.real(key, value));
      } else if (key == "playout_offset_s") {
        cfg.sim.buffer.playout_offset = SimTime::from_seconds(rd.real(key, value));
      } else if (key == "overflow") {
        if (value == "drop_arriving") cfg.sim.buffer.overflow = playout::OverflowPolicy::DropArriving;
        else if (value == "drop_head") cfg.sim.buffer.overflow = playout::OverflowPolicy::DropHead;
        else rd.fail("overflow must be drop_arriving|drop_head");
      } else unknown();
    } else if (section == "run") {
      if (key == "seed") cfg.sim.seed = rd.integer(key, value);
      else if (key == "duration_s") cfg.sim.duration_s = rd.real(key, value);
      else if (key == "window_s") cfg.window_s = rd.real(key, value);
      else if (key == "out" || key == "output_dir") cfg.out_dir = value;
      else if (key == "header_bytes") cfg.sim.header_bytes = static_cast<std::uint32_t>(rd.integer(key, value));
      else if (key == "route_wait_s") cfg.sim.route_wait_s = rd.real(key, value);
      else if (key == "event_log") cfg.event_log = rd.boolean(key, value);
      else if (key == "background_rate_bps") cfg.background_rate_bps = rd.real(key, value);
      else if (key == "voice_goal") cfg.voice_goal = rd.goal(key, value);
      else if (key == "background_goal") cfg.background_goal = rd.goal(key, value);
      else if (key == "randomize_phase") cfg.sim.randomize_phase = rd.boolean(key, value);
      else unknown();
    }
  }

  Reader rd{source_name, 0};
  if (!(cfg.sim.duration_s > 0.0)) rd.fail("duration_s must be > 0");
  if (!(cfg.window_s > 0.0)) rd.fail("window_s must be > 0");
  if (cfg.sim.explore_prob < 0.0 || cfg.sim.explore_prob > 1.0) rd.fail("explore_prob must be in [0,1]");
  if (!(cfg.sim.epsilon_s > 0.0)) rd.fail("epsilon must be > 0");
  if (cfg.sp_ratio < 1) rd.fail("sp_ratio must be >= 1");
  for (auto& [idx, f] : flows) {
    Reader fr{source_name, f.line};
    if (f.src.empty() || f.dst.empty()) fr.fail("flow " + std::to_string(idx) + " needs src and dst");
    cfg.flows.push_back(std::move(f));
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string(), 0, "cannot open config file");
  auto base = path.parent_path();
  if (base.empty()) base = ".";
  return parse_config(in, path.string(), base);
}

void write_config(std::ostream& out, const RunConfig& c) {
  out << "[topology]\npath = \"" << c.topology << "\"\n\n";
  for (std::size_t i = 0; i < c.flows.size(); ++i) {
    const auto& f = c.flows[i];
    out << "[flows." << i << "]\n"
        << "src = " << f.src << "\ndst = " << f.dst << "\nsrc_port = " << f.src_port
        << "\ndst_port = " << f.dst_port << "\ngoal = " << to_string(f.goal)
        << "\ngenerator = " << to_string(f.generator) << "\n";
    if (f.rate_bps) out << "rate_bps = " << *f.rate_bps << "\n";
    if (f.payload_bytes) out << "payload_bytes = " << *f.payload_bytes << "\n";
    if (f.sp_ratio) out << "sp_ratio = " << *f.sp_ratio << "\n";
    out << "start_s = " << f.start_s << "\n";
    if (f.stop_s) out << "stop_s = " << *f.stop_s << "\n";
    if (f.playout) out << "playout = " << (*f.playout ? "true" : "false") << "\n";
    if (!f.route.empty()) {
      out << "route = ";
      for (std::size_t h = 0; h < f.route.size(); ++h) out << (h ? "," : "") << f.route[h];
      out << "\n";
    }
    out << "\n";
  }
  out << "[rnn]\nexplore_prob = " << c.sim.explore_prob << "\nepsilon = " << c.sim.epsilon_s
      << "\nsp_ratio = " << c.sp_ratio << "\nthreshold_factor = " << c.sim.threshold_factor
      << "\nmax_hops = " << c.sim.max_hops << "\nrl_on_dp_acks = "
      << (c.sim.rl_on_dp_acks ? "true" : "false") << "\n\n";
  out << "[buffer]\ncapacity = ";
  if (c.sim.buffer.capacity) out << *c.sim.buffer.capacity;
  else out << "inf";
  out << "\nhold_timeout_s = ";
  if (c.sim.buffer.hold_timeout.is_infinite()) out << "inf";
  else out << format_seconds(c.sim.buffer.hold_timeout);
  out << "\nplayout_offset_s = " << format_seconds(c.sim.buffer.playout_offset) << "\n\n";
  out << "[run]\nseed = " << c.sim.seed << "\nduration_s = " << c.sim.duration_s
      << "\nwindow_s = " << c.window_s << "\nbackground_rate_bps = " << c.background_rate_bps
      << "\nvoice_goal = " << to_string(c.voice_goal)
      << "\nbackground_goal = " << to_string(c.background_goal) << "\n";
}

Scenario build_scenario(const RunConfig& c) {
  Topology topology;
  if (c.topology == "testbed8") {
    topology = testbed8();
  } else {
    std::filesystem::path p = c.topology;
    if (p.is_relative()) p = c.base_dir / p;
    if (!std::filesystem::exists(p))
      throw ConfigError(c.source, 0, "topology file not found: " + p.string());
    try {
      topology = load_topology(p);
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      throw ConfigError(c.source, 0, e.what());
    }
  }

  std::vector<FlowSpec> flows;
  if (c.flows.empty()) {
    if (c.topology != "testbed8" && (!topology.find("CPN002") || !topology.find("CPN026")))
      throw ConfigError(c.source, 0, "no [flows.N] sections and topology lacks CPN002/CPN026");
    DefaultScenarioOptions opt;
    opt.duration_s = c.sim.duration_s;
    opt.background_rate_bps = c.background_rate_bps;
    opt.voice_goal = c.voice_goal;
    opt.background_goal = c.background_goal;
    auto s = default_scenario(opt);
    if (c.topology == "testbed8") {
      flows = std::move(s.flows);
    } else {
      // Same flow set over the supplied topology.
      for (auto f : s.flows) {
        f.key.src = topology.at(s.topology.label(f.key.src));
        f.key.dst = topology.at(s.topology.label(f.key.dst));
        flows.push_back(f);
      }
    }
    for (auto& f : flows) f.generator.sp_ratio = c.sp_ratio;
  } else {
    for (const auto& fc : c.flows) {
      auto node = [&](const std::string& label) {
        if (auto id = topology.find(label)) return *id;
        throw ConfigError(c.source, fc.line, "unknown node '" + label + "'");
      };
      FlowSpec f;
      f.key = FlowKey{node(fc.src), node(fc.dst), fc.src_port, fc.dst_port};
      f.goal = fc.goal;
      f.generator = fc.generator == GeneratorKind::VoiceCbr ? GeneratorSpec::voice()
                                                            : GeneratorSpec::background(c.background_rate_bps);
      if (fc.payload_bytes) f.generator.payload_bytes = *fc.payload_bytes;
      if (fc.rate_bps) f.generator.rate_bps = *fc.rate_bps;
      else if (fc.generator == GeneratorKind::VoiceCbr && fc.payload_bytes)
        f.generator.rate_bps = *fc.payload_bytes * 8.0 / 0.020;
      f.generator.sp_ratio = fc.sp_ratio.value_or(c.sp_ratio);
      f.start_s = fc.start_s;
      f.stop_s = fc.stop_s.value_or(c.sim.duration_s);
      f.playout = fc.playout.value_or(fc.generator == GeneratorKind::VoiceCbr);
      for (const auto& hop : fc.route) f.fixed_route.push_back(node(hop));
      flows.push_back(std::move(f));
    }
  }

  auto result = validate_scenario(std::move(topology), std::move(flows));
  if (!result.ok()) throw ConfigError(c.source, 0, "invalid scenario:\n" + result.describe());
  return std::move(*result.scenario);
}

std::optional<std::uint32_t> voice_flow_index(const Scenario& scenario) {
  for (std::uint32_t i = 0; i < scenario.flows.size(); ++i)
    if (scenario.flows[i].generator.kind == GeneratorKind::VoiceCbr) return i;
  return std::nullopt;
}

}  // namespace cpn::cli
