#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "cpn/goals.hpp"
#include "cpn/playout.hpp"
#include "cpn/rnn.hpp"
#include "cpn/scenario.hpp"
#include "cpn/time.hpp"
#include "cpn/types.hpp"

namespace cpn::sim {

struct SimConfig {
  std::uint64_t seed = 42;
  double duration_s = 600.0;
  double explore_prob = 0.05;
  double epsilon_s = 1e-3;
  double threshold_factor = 0.8;
  std::uint32_t max_hops = 30;
  std::uint32_t header_bytes = 58;
  double route_wait_s = 0.1;
  /// RL updates on dumb-packet ACKs as well as smart-packet ACKs.
  bool rl_on_dp_acks = true;
  /// Start each flow at a random phase within its first inter-packet gap.
  bool randomize_phase = true;
  goals::MailboxKeying keying = goals::MailboxKeying::PerFlow;
  playout::BufferConfig buffer;
};

enum class EventKind : std::uint8_t { Generate, LinkDeliver, NodeProcess, BufferTimeout, RouteWait };

/// Events run in (at, seq_no) order. `target` is a flow index (Generate,
/// BufferTimeout, RouteWait), a directed link (LinkDeliver) or a node
/// (NodeProcess); `slot` names the packet for packet-carrying kinds.
struct Event {
  SimTime at;
  std::uint64_t seq_no = 0;
  EventKind kind = EventKind::Generate;
  std::uint32_t target = 0;
  std::uint32_t slot = 0;
};

struct LinkState {
  /// Transmission finish times of packets queued or in service.
  std::deque<SimTime> in_system;
  SimTime busy_until;
  std::uint64_t drops = 0;
  std::uint64_t packets = 0;
  std::uint64_t bytes = 0;
  std::size_t max_queue = 0;
};

enum class Outcome : std::uint8_t {
  Delivered,
  QueueDrop,
  RouteTimeout,
  NoLink,
  HopLimit,
  MissingStamp,
  Played,
  DiscardLate,
  DiscardOverflow,
  Duplicate,
};

std::string_view to_string(Outcome outcome);

/// One record per packet terminal event; the input contract for metrics and
/// playout analysis.
struct TerminalRecord {
  PacketKind kind = PacketKind::Dumb;
  std::uint32_t flow = 0;
  std::uint64_t seq = 0;
  Outcome outcome = Outcome::Delivered;
  SimTime sent_at;
  SimTime end_at;
  std::uint32_t path_id = 0;
  NodeId node;
};

class Observer {
 public:
  virtual ~Observer() = default;
  virtual void on_dp_generated(std::uint32_t /*flow*/, std::uint64_t /*seq*/, SimTime /*at*/) {}
  /// A dumb packet leaves its origin on `route`.
  virtual void on_dp_dispatched(std::uint32_t /*flow*/, std::uint64_t /*seq*/,
                                SimTime /*created_at*/, std::span<const NodeId> /*route*/,
                                std::uint32_t /*path_id*/) {}
  virtual void on_route_installed(std::uint32_t /*flow*/, SimTime /*at*/,
                                  std::span<const NodeId> /*route*/, std::uint32_t /*path_id*/) {}
  virtual void on_terminal(const TerminalRecord& /*record*/) {}
};

struct FlowCounters {
  std::uint64_t dp_sent = 0;
  std::uint64_t dp_delivered = 0;
  std::uint64_t dp_queue_drops = 0;
  std::uint64_t dp_route_timeouts = 0;
  std::uint64_t dp_no_link = 0;
  std::uint64_t sp_sent = 0;
  std::uint64_t sp_delivered = 0;
  std::uint64_t sp_hop_limit = 0;
  std::uint64_t sp_queue_drops = 0;
  std::uint64_t acks_sent = 0;
  std::uint64_t acks_delivered = 0;
  std::uint64_t ack_drops = 0;
  std::uint64_t ack_missing_stamp = 0;
  std::uint64_t route_installs = 0;
  std::uint64_t rl_updates = 0;
  std::uint64_t mailbox_deposits = 0;

  std::uint64_t dp_dropped() const { return dp_queue_drops + dp_route_timeouts + dp_no_link; }
};

struct GenerationStep {
  bool emit_smart = false;
  SimTime next_at;
};

/// Dumb packet `dp_index` of a flow generated at `now`: whether a smart packet
/// precedes it, and when the next dumb packet is due.
GenerationStep generate_traffic(const FlowSpec& flow, std::uint64_t dp_index, SimTime now);

/// Removes cycles from a visited-node sequence, keeping the first arrival at
/// each node and the path taken after its last visit.
std::vector<NodeId> loop_erase(std::span<const NodeId> visited);

/// Deterministic discrete-event CPN network.
class Simulator {
 public:
  Simulator(Scenario scenario, SimConfig config);
  Simulator(const Simulator&) = delete;
  Simulator& operator=(const Simulator&) = delete;

  void add_observer(Observer& observer) { observers_.push_back(&observer); }

  /// Runs to the configured duration, then finish().
  void run();
  /// Executes every event with at <= until.
  void run_until(SimTime until);
  /// Drains receiver buffers. Idempotent.
  void finish();

  /// Places a packet at `node` at time `when`, as if it had just arrived there
  /// (Dumb/Ack: route[hop] must equal node).
  void inject(CpnPacket packet, NodeId node, SimTime when);
  /// Installs a source route at the flow's origin immediately.
  void install_route(std::uint32_t flow, std::vector<NodeId> route);

  SimTime now() const { return now_; }
  const Scenario& scenario() const { return scenario_; }
  const SimConfig& config() const { return config_; }
  const FlowCounters& counters(std::uint32_t flow) const { return flows_.at(flow).counters; }
  /// Dumb packets of the flow that exist right now: queued, propagating, or
  /// held at the origin waiting for a route.
  std::uint64_t dp_in_flight(std::uint32_t flow) const;
  const std::vector<NodeId>& current_route(std::uint32_t flow) const {
    return flows_.at(flow).route;
  }
  const std::vector<DirectedLink>& links() const { return links_; }
  const LinkState& link_state(std::uint32_t link) const { return link_states_.at(link); }
  std::optional<std::uint32_t> link_between(NodeId from, NodeId to) const;
  const rnn::RnnState* rnn_state(NodeId node, QosGoal goal, NodeId destination) const;
  const std::map<std::pair<QosGoal, NodeId>, rnn::RnnState>& rnn_states(NodeId node) const {
    return nodes_.at(node.value).rnns;
  }
  const goals::Mailbox& mailbox(NodeId node) const { return nodes_.at(node.value).mailbox; }
  const playout::JitterBuffer* buffer(std::uint32_t flow) const;
  const std::vector<std::vector<NodeId>>& paths() const { return path_table_; }
  std::uint64_t events_executed() const { return events_executed_; }
  /// Wire size = payload + header overhead.
  std::uint32_t wire_bytes(const CpnPacket& packet) const;

 private:
  struct NodeState {
    std::vector<std::uint32_t> out_links;  // neuron i <-> out_links[i]
    std::vector<NodeId> neighbors;         // parallel to out_links
    std::map<std::pair<QosGoal, NodeId>, rnn::RnnState> rnns;
    goals::Mailbox mailbox;
  };
  struct FlowState {
    FlowSpec spec;
    std::vector<NodeId> route;
    std::uint32_t path_id = 0;
    std::uint64_t next_dp = 0;
    std::uint64_t next_sp = 0;
    std::deque<std::uint32_t> held;  // packet slots waiting for a route
    std::optional<playout::JitterBuffer> buffer;
    std::optional<SimTime> buffer_timer;
    bool route_wait_pending = false;
    FlowCounters counters;
  };

  void schedule(SimTime at, EventKind kind, std::uint32_t target, std::uint32_t slot = 0);
  void execute(const Event& event);

  std::uint32_t allocate(PacketKind kind, std::uint32_t flow);
  void release_slot(std::uint32_t slot);
  CpnPacket& packet(std::uint32_t slot) { return pool_[slot]; }

  void on_generate(std::uint32_t flow);
  void on_route_wait(std::uint32_t flow);
  void on_buffer_timeout(std::uint32_t flow);
  void arrive(std::uint32_t slot, NodeId node);
  void handle_smart(std::uint32_t slot, NodeId node);
  void handle_dumb(std::uint32_t slot, NodeId node);
  void handle_ack(std::uint32_t slot, NodeId node);
  void dispatch_dp(std::uint32_t slot);
  void send_ack(std::uint32_t acked_slot, std::vector<NodeId> reverse_route);
  bool transmit(std::uint32_t slot, NodeId from, NodeId to);
  void deliver_to_buffer(std::uint32_t flow, const CpnPacket& dp);
  void emit_played(std::uint32_t flow, const std::vector<playout::PlayedPacket>& played);
  void arm_buffer_timer(std::uint32_t flow);
  void terminal(const CpnPacket& p, Outcome outcome, NodeId node);
  std::uint32_t intern_path(const std::vector<NodeId>& path);
  std::optional<std::size_t> neuron_for(NodeId node, NodeId next) const;
  rnn::RnnState& rnn_for(NodeId node, QosGoal goal, NodeId destination);

  Scenario scenario_;
  SimConfig config_;
  std::vector<DirectedLink> links_;
  std::vector<LinkState> link_states_;
  std::vector<NodeState> nodes_;
  std::vector<FlowState> flows_;
  std::vector<Observer*> observers_;

  std::vector<Event> heap_;
  std::uint64_t next_seq_no_ = 0;
  SimTime now_;
  std::optional<std::pair<SimTime, std::uint64_t>> last_executed_;
  std::uint64_t events_executed_ = 0;
  bool finished_ = false;

  std::deque<CpnPacket> pool_;  // deque keeps references stable on growth
  std::vector<std::uint32_t> free_slots_;

  std::map<std::vector<NodeId>, std::uint32_t> path_ids_;
  std::vector<std::vector<NodeId>> path_table_;

  std::mt19937_64 rng_;
};

}  // namespace cpn::sim
