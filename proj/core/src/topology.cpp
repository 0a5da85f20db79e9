#include "cpn/topology.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace cpn {

NodeId Topology::add_node(std::string label) {
  NodeId id{static_cast<std::uint16_t>(nodes_.size())};
  nodes_.push_back(Node{id, std::move(label)});
  return id;
}

void Topology::add_link(LinkSpec link) { links_.push_back(link); }

void Topology::add_link(std::string_view a, std::string_view b, double bandwidth_bps,
                        double propagation_s, std::uint32_t queue_capacity) {
  links_.push_back(LinkSpec{at(a), at(b), bandwidth_bps, propagation_s, queue_capacity});
}

std::optional<NodeId> Topology::find(std::string_view label) const {
  for (const auto& n : nodes_)
    if (n.label == label) return n.id;
  return std::nullopt;
}

NodeId Topology::at(std::string_view label) const {
  if (auto id = find(label)) return *id;
  throw Error("unknown node label '" + std::string(label) + "'");
}

const std::string& Topology::label(NodeId id) const { return nodes_.at(id.value).label; }

std::vector<DirectedLink> Topology::expand() const {
  std::vector<DirectedLink> out;
  out.reserve(links_.size() * 2);
  for (const auto& l : links_) {
    const auto prop = SimTime::from_seconds(l.propagation_s);
    out.push_back(DirectedLink{static_cast<std::uint32_t>(out.size()), l.a, l.b, l.bandwidth_bps,
                               prop, l.queue_capacity_packets});
    out.push_back(DirectedLink{static_cast<std::uint32_t>(out.size()), l.b, l.a, l.bandwidth_bps,
                               prop, l.queue_capacity_packets});
  }
  return out;
}

std::vector<std::vector<NodeId>> Topology::adjacency() const {
  std::vector<std::vector<NodeId>> adj(nodes_.size());
  for (const auto& l : links_) {
    if (!contains(l.a) || !contains(l.b)) continue;
    adj[l.a.value].push_back(l.b);
    adj[l.b.value].push_back(l.a);
  }
  return adj;
}

Topology testbed8() {
  Topology t;
  for (const char* label :
       {"CPN002", "CPN003", "CPN004", "CPN005", "CPN006", "CPN007", "CPN008", "CPN026"})
    t.add_node(label);
  // Three parallel columns CPN002 -> {003,004,005} -> {006,007,008} -> CPN026,
  // with rungs between neighbouring columns.
  for (const auto& [a, b] : std::initializer_list<std::pair<const char*, const char*>>{
           {"CPN002", "CPN003"}, {"CPN002", "CPN004"}, {"CPN002", "CPN005"},
           {"CPN003", "CPN006"}, {"CPN004", "CPN007"}, {"CPN005", "CPN008"},
           {"CPN006", "CPN026"}, {"CPN007", "CPN026"}, {"CPN008", "CPN026"},
           {"CPN003", "CPN004"}, {"CPN004", "CPN005"},
           {"CPN006", "CPN007"}, {"CPN007", "CPN008"}})
    t.add_link(a, b);
  return t;
}

namespace {

[[noreturn]] void parse_fail(std::string_view source, std::size_t line, const std::string& what) {
  std::ostringstream os;
  os << source << ":" << line << ": " << what;
  throw Error(os.str());
}

}  // namespace

Topology parse_topology(std::istream& in, std::string_view source_name) {
  Topology t;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    std::istringstream ls(raw);
    std::string verb;
    if (!(ls >> verb)) continue;
    if (verb == "node") {
      std::string label;
      if (!(ls >> label)) parse_fail(source_name, line_no, "node needs a label");
      t.add_node(label);
    } else if (verb == "link") {
      std::string a, b;
      if (!(ls >> a >> b)) parse_fail(source_name, line_no, "link needs two node labels");
      LinkSpec spec;
      auto ia = t.find(a), ib = t.find(b);
      if (!ia) parse_fail(source_name, line_no, "unknown node '" + a + "'");
      if (!ib) parse_fail(source_name, line_no, "unknown node '" + b + "'");
      spec.a = *ia;
      spec.b = *ib;
      std::string tok;
      if (ls >> tok) {
        try {
          spec.bandwidth_bps = std::stod(tok);
          if (ls >> tok) spec.propagation_s = std::stod(tok);
          if (ls >> tok) {
            const long cap = std::stol(tok);
            if (cap < 0) parse_fail(source_name, line_no, "negative queue capacity");
            spec.queue_capacity_packets = static_cast<std::uint32_t>(cap);
          }
        } catch (const std::logic_error&) {
          parse_fail(source_name, line_no, "bad numeric field '" + tok + "'");
        }
      }
      t.add_link(spec);
    } else {
      parse_fail(source_name, line_no, "unknown directive '" + verb + "'");
    }
  }
  return t;
}

Topology load_topology(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open topology file '" + path.string() + "'");
  return parse_topology(in, path.string());
}

void write_topology(std::ostream& out, const Topology& topology) {
  for (const auto& n : topology.nodes()) out << "node " << n.label << "\n";
  for (const auto& l : topology.links())
    out << "link " << topology.label(l.a) << " " << topology.label(l.b) << " " << l.bandwidth_bps
        << " " << l.propagation_s << " " << l.queue_capacity_packets << "\n";
}

std::size_t link_disjoint_paths(const Topology& topology, NodeId src, NodeId dst) {
  const std::size_t n = topology.node_count();
  // Residual capacities on an n x n matrix; each undirected link gives one unit
  // in each direction.
  std::vector<int> cap(n * n, 0);
  for (const auto& l : topology.links()) {
    if (l.a == l.b) continue;
    cap[l.a.value * n + l.b.value] += 1;
    cap[l.b.value * n + l.a.value] += 1;
  }
  std::size_t flow = 0;
  for (;;) {
    std::vector<int> parent(n, -1);
    parent[src.value] = src.value;
    std::deque<std::size_t> queue{src.value};
    while (!queue.empty() && parent[dst.value] < 0) {
      const auto u = queue.front();
      queue.pop_front();
      for (std::size_t v = 0; v < n; ++v) {
        if (parent[v] < 0 && cap[u * n + v] > 0) {
          parent[v] = static_cast<int>(u);
          queue.push_back(v);
        }
      }
    }
    if (parent[dst.value] < 0) break;
    for (std::size_t v = dst.value; v != src.value; v = static_cast<std::size_t>(parent[v])) {
      const auto u = static_cast<std::size_t>(parent[v]);
      cap[u * n + v] -= 1;
      cap[v * n + u] += 1;
    }
    ++flow;
  }
  return flow;
}

std::optional<std::size_t> hop_distance(const Topology& topology, NodeId src, NodeId dst) {
  const auto adj = topology.adjacency();
  std::vector<std::size_t> dist(topology.node_count(), SIZE_MAX);
  dist[src.value] = 0;
  std::deque<NodeId> queue{src};
  while (!queue.empty()) {
    const auto u = queue.front();
    queue.pop_front();
    for (auto v : adj[u.value]) {
      if (dist[v.value] == SIZE_MAX) {
        dist[v.value] = dist[u.value] + 1;
        queue.push_back(v);
      }
    }
  }
  if (dist[dst.value] == SIZE_MAX) return std::nullopt;
  return dist[dst.value];
}

}  // namespace cpn
