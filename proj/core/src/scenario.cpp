#include "cpn/scenario.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace cpn {

std::string_view to_string(ScenarioErrorKind kind) {
  switch (kind) {
    case ScenarioErrorKind::DuplicateNode: return "DuplicateNode";
    case ScenarioErrorKind::DisconnectedGraph: return "DisconnectedGraph";
    case ScenarioErrorKind::UnknownEndpoint: return "UnknownEndpoint";
    case ScenarioErrorKind::BadRate: return "BadRate";
    case ScenarioErrorKind::SelfLink: return "SelfLink";
    case ScenarioErrorKind::BadSchedule: return "BadSchedule";
    case ScenarioErrorKind::BadRoute: return "BadRoute";
  }
  return "?";
}

std::string ValidationResult::describe() const {
  std::ostringstream os;
  for (const auto& issue : issues)
    os << to_string(issue.kind) << " [" << issue.element << "]: " << issue.message << "\n";
  return os.str();
}

ValidationResult validate_scenario(Topology topology, std::vector<FlowSpec> flows) {
  ValidationResult result;
  auto add = [&](ScenarioErrorKind kind, std::string element, std::string message) {
    result.issues.push_back({kind, std::move(element), std::move(message)});
  };

  std::set<std::string> labels;
  for (const auto& n : topology.nodes())
    if (!labels.insert(n.label).second)
      add(ScenarioErrorKind::DuplicateNode, n.label, "node label declared more than once");

  auto link_name = [&](std::size_t i, const LinkSpec& l) {
    std::ostringstream os;
    os << "links[" << i << "]";
    if (topology.contains(l.a) && topology.contains(l.b))
      os << " " << topology.label(l.a) << "-" << topology.label(l.b);
    return os.str();
  };
  for (std::size_t i = 0; i < topology.links().size(); ++i) {
    const auto& l = topology.links()[i];
    if (!topology.contains(l.a) || !topology.contains(l.b)) {
      add(ScenarioErrorKind::UnknownEndpoint, link_name(i, l), "link endpoint not in topology");
      continue;
    }
    if (l.a == l.b) add(ScenarioErrorKind::SelfLink, link_name(i, l), "self-link");
    if (!(l.bandwidth_bps > 0.0))
      add(ScenarioErrorKind::BadRate, link_name(i, l), "bandwidth must be > 0");
    if (l.queue_capacity_packets < 1)
      add(ScenarioErrorKind::BadRate, link_name(i, l), "queue capacity must be >= 1");
    if (!(l.propagation_s >= 0.0))
      add(ScenarioErrorKind::BadRate, link_name(i, l), "propagation delay must be >= 0");
  }

  if (topology.node_count() > 0) {
    const NodeId root{0};
    for (const auto& n : topology.nodes())
      if (n.id != root && !hop_distance(topology, root, n.id))
        add(ScenarioErrorKind::DisconnectedGraph, n.label,
            "node unreachable from " + topology.label(root));
  }

  const auto adj = topology.adjacency();
  for (std::size_t i = 0; i < flows.size(); ++i) {
    const auto& f = flows[i];
    const std::string name = "flows[" + std::to_string(i) + "]";
    const bool src_ok = topology.contains(f.key.src);
    const bool dst_ok = topology.contains(f.key.dst);
    if (!src_ok) add(ScenarioErrorKind::UnknownEndpoint, name, "source not in topology");
    if (!dst_ok) add(ScenarioErrorKind::UnknownEndpoint, name, "destination not in topology");
    if (src_ok && dst_ok && f.key.src == f.key.dst)
      add(ScenarioErrorKind::UnknownEndpoint, name,
          "source equals destination (" + topology.label(f.key.src) + ")");
    if (!(f.generator.rate_bps > 0.0)) add(ScenarioErrorKind::BadRate, name, "rate must be > 0");
    if (f.generator.payload_bytes < 1)
      add(ScenarioErrorKind::BadRate, name, "payload must be >= 1 byte");
    if (f.generator.sp_ratio < 1) add(ScenarioErrorKind::BadRate, name, "sp_ratio must be >= 1");
    if (!(f.stop_s > f.start_s) || f.start_s < 0.0)
      add(ScenarioErrorKind::BadSchedule, name, "need 0 <= start < stop");
    if (!f.fixed_route.empty() && src_ok && dst_ok) {
      const auto& r = f.fixed_route;
      bool good = r.front() == f.key.src && r.back() == f.key.dst;
      for (std::size_t h = 0; good && h + 1 < r.size(); ++h) {
        if (!topology.contains(r[h]) || !topology.contains(r[h + 1])) {
          good = false;
          break;
        }
        const auto& nb = adj[r[h].value];
        good = std::find(nb.begin(), nb.end(), r[h + 1]) != nb.end();
      }
      if (!good)
        add(ScenarioErrorKind::BadRoute, name,
            "fixed route must run from source to destination over existing links");
    }
  }

  if (result.issues.empty()) result.scenario = Scenario{std::move(topology), std::move(flows)};
  return result;
}

std::vector<std::pair<std::string, std::string>> default_background_pairs() {
  return {{"CPN002", "CPN026"}, {"CPN002", "CPN026"}, {"CPN003", "CPN026"}, {"CPN005", "CPN026"}};
}

Scenario default_scenario(const DefaultScenarioOptions& options) {
  Scenario s;
  s.topology = testbed8();
  const auto& t = s.topology;

  FlowSpec voice;
  voice.key = FlowKey{t.at("CPN002"), t.at("CPN026"), 5060, 7080};
  voice.goal = options.voice_goal;
  voice.generator = GeneratorSpec::voice();
  voice.start_s = 0.0;
  voice.stop_s = options.duration_s;
  voice.playout = true;
  s.flows.push_back(voice);

  std::uint16_t port = 6001;
  for (const auto& [src, dst] : default_background_pairs()) {
    FlowSpec bg;
    bg.key = FlowKey{t.at(src), t.at(dst), port, port};
    ++port;
    bg.goal = options.background_goal;
    bg.generator = GeneratorSpec::background(options.background_rate_bps);
    bg.start_s = 0.0;
    bg.stop_s = options.duration_s;
    s.flows.push_back(bg);
  }
  return s;
}

}  // namespace cpn
