#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cpn/topology.hpp"
#include "cpn/types.hpp"

namespace cpn {

enum class ScenarioErrorKind {
  DuplicateNode,
  DisconnectedGraph,
  UnknownEndpoint,
  BadRate,
  SelfLink,
  BadSchedule,
  BadRoute,
};

std::string_view to_string(ScenarioErrorKind kind);

struct ScenarioIssue {
  ScenarioErrorKind kind;
  std::string element;  // offending node label, link or flow, e.g. "flows[2]"
  std::string message;
};

struct Scenario {
  Topology topology;
  std::vector<FlowSpec> flows;
};

struct ValidationResult {
  std::optional<Scenario> scenario;
  std::vector<ScenarioIssue> issues;

  bool ok() const { return scenario.has_value(); }
  std::string describe() const;
};

ValidationResult validate_scenario(Topology topology, std::vector<FlowSpec> flows);

struct DefaultScenarioOptions {
  double duration_s = 600.0;
  double background_rate_bps = 10e6;
  QosGoal voice_goal = QosGoal::Jitter;
  QosGoal background_goal = QosGoal::Jitter;
};

/// testbed8 with one voice flow CPN002 -> CPN026 (ports 5060 -> 7080, jitter
/// buffer at the receiver) and the background UDP flows toward CPN026.
Scenario default_scenario(const DefaultScenarioOptions& options = {});

/// Background flows of the default scenario, as (source label, destination label).
std::vector<std::pair<std::string, std::string>> default_background_pairs();

}  // namespace cpn
