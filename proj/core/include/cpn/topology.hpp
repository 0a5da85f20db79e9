#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cpn/time.hpp"
#include "cpn/types.hpp"

namespace cpn {

struct Node {
  NodeId id;
  std::string label;
};

/// Undirected link as declared; expands to two directed links.
struct LinkSpec {
  NodeId a;
  NodeId b;
  double bandwidth_bps = 100e6;
  double propagation_s = 50e-6;
  std::uint32_t queue_capacity_packets = 100;
};

struct DirectedLink {
  std::uint32_t index = 0;
  NodeId from;
  NodeId to;
  double bandwidth_bps = 0.0;
  SimTime propagation;
  std::uint32_t queue_capacity_packets = 0;
};

class Topology {
 public:
  NodeId add_node(std::string label);
  void add_link(LinkSpec link);
  void add_link(std::string_view a, std::string_view b, double bandwidth_bps = 100e6,
                double propagation_s = 50e-6, std::uint32_t queue_capacity = 100);

  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<LinkSpec>& links() const { return links_; }
  std::size_t node_count() const { return nodes_.size(); }

  std::optional<NodeId> find(std::string_view label) const;
  /// Throws cpn::Error for unknown labels.
  NodeId at(std::string_view label) const;
  const std::string& label(NodeId id) const;
  bool contains(NodeId id) const { return id.value < nodes_.size(); }

  /// Each undirected link becomes two directed links, a->b at index 2k and
  /// b->a at index 2k+1.
  std::vector<DirectedLink> expand() const;

  /// Undirected adjacency, neighbors in declaration order.
  std::vector<std::vector<NodeId>> adjacency() const;

 private:
  std::vector<Node> nodes_;
  std::vector<LinkSpec> links_;
};

/// Eight-node testbed stand-in. CPN002 and CPN026 sit at opposite ends with
/// three link-disjoint three-hop paths between them plus cross links.
Topology testbed8();

/// Plain-text topology: `node <label>` and
/// `link <a> <b> [bandwidth_bps] [propagation_s] [queue_capacity]` lines,
/// `#` comments. Errors carry the source name and line number.
Topology parse_topology(std::istream& in, std::string_view source_name);
Topology load_topology(const std::filesystem::path& path);
void write_topology(std::ostream& out, const Topology& topology);

/// Number of link-disjoint paths between two nodes (unit-capacity max-flow).
std::size_t link_disjoint_paths(const Topology& topology, NodeId src, NodeId dst);

/// Hop distance, nullopt if unreachable.
std::optional<std::size_t> hop_distance(const Topology& topology, NodeId src, NodeId dst);

}  // namespace cpn
