#include "cpn/simnet.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

namespace cpn::sim {
namespace {

bool later(const Event& a, const Event& b) {
  if (a.at != b.at) return a.at > b.at;
  return a.seq_no > b.seq_no;
}

[[noreturn]] void invariant_failure(const std::string& what) {
  throw std::logic_error("simulator invariant violated: " + what);
}

}  // namespace

std::string_view to_string(Outcome outcome) {
  switch (outcome) {
    case Outcome::Delivered: return "delivered";
    case Outcome::QueueDrop: return "queue_drop";
    case Outcome::RouteTimeout: return "route_timeout";
    case Outcome::NoLink: return "no_link";
    case Outcome::HopLimit: return "hop_limit";
    case Outcome::MissingStamp: return "missing_stamp";
    case Outcome::Played: return "played";
    case Outcome::DiscardLate: return "discard_late";
    case Outcome::DiscardOverflow: return "discard_overflow";
    case Outcome::Duplicate: return "duplicate";
  }
  return "?";
}

GenerationStep generate_traffic(const FlowSpec& flow, std::uint64_t dp_index, SimTime now) {
  const std::uint32_t m = std::max<std::uint32_t>(1, flow.generator.sp_ratio);
  GenerationStep step;
  step.emit_smart = flow.fixed_route.empty() && dp_index % m == 0;
  step.next_at = now + flow.generator.interval();
  return step;
}

std::vector<NodeId> loop_erase(std::span<const NodeId> visited) {
  std::vector<NodeId> out;
  out.reserve(visited.size());
  for (NodeId n : visited) {
    auto it = std::find(out.begin(), out.end(), n);
    if (it != out.end())
      out.erase(it + 1, out.end());
    else
      out.push_back(n);
  }
  return out;
}

Simulator::Simulator(Scenario scenario, SimConfig config)
    : scenario_(std::move(scenario)), config_(config), rng_(config.seed) {
  links_ = scenario_.topology.expand();
  link_states_.resize(links_.size());
  nodes_.reserve(scenario_.topology.node_count());
  for (std::size_t i = 0; i < scenario_.topology.node_count(); ++i)
    nodes_.push_back(NodeState{{}, {}, {}, goals::Mailbox(config_.epsilon_s, config_.keying)});
  for (const auto& l : links_) {
    nodes_[l.from.value].out_links.push_back(l.index);
    nodes_[l.from.value].neighbors.push_back(l.to);
  }

  std::mt19937_64 phase_rng(config_.seed ^ 0x9e3779b97f4a7c15ULL);
  flows_.reserve(scenario_.flows.size());
  for (std::uint32_t f = 0; f < scenario_.flows.size(); ++f) {
    FlowState fs;
    fs.spec = scenario_.flows[f];
    if (fs.spec.playout) fs.buffer.emplace(config_.buffer);
    if (!fs.spec.fixed_route.empty()) {
      fs.route = fs.spec.fixed_route;
    }
    flows_.push_back(std::move(fs));
    if (!flows_.back().route.empty()) flows_.back().path_id = intern_path(flows_.back().route);

    SimTime start = SimTime::from_seconds(flows_.back().spec.start_s);
    if (config_.randomize_phase) {
      std::uniform_int_distribution<std::int64_t> phase(0, flows_.back().spec.generator.interval().ns());
      start = SimTime::from_seconds(flows_.back().spec.start_s) + SimTime::from_ns(phase(phase_rng));
    }
    if (start < SimTime::from_seconds(flows_.back().spec.stop_s)) schedule(start, EventKind::Generate, f);
  }
}

void Simulator::schedule(SimTime at, EventKind kind, std::uint32_t target, std::uint32_t slot) {
  if (at < now_) invariant_failure("event scheduled in the past");
  heap_.push_back(Event{at, next_seq_no_++, kind, target, slot});
  std::push_heap(heap_.begin(), heap_.end(), later);
}

void Simulator::run() {
  run_until(SimTime::from_seconds(config_.duration_s));
  finish();
}

void Simulator::run_until(SimTime until) {
  while (!heap_.empty() && heap_.front().at <= until) {
    std::pop_heap(heap_.begin(), heap_.end(), later);
    const Event e = heap_.back();
    heap_.pop_back();
    if (last_executed_ && std::pair{e.at, e.seq_no} < *last_executed_)
      invariant_failure("event executed out of (at, seq_no) order");
    last_executed_ = std::pair{e.at, e.seq_no};
    now_ = e.at;
    ++events_executed_;
    execute(e);
  }
  if (until > now_ && !until.is_infinite()) now_ = until;
}

void Simulator::finish() {
  if (finished_) return;
  finished_ = true;
  for (std::uint32_t f = 0; f < flows_.size(); ++f)
    if (flows_[f].buffer) emit_played(f, flows_[f].buffer->drain(now_));
}

void Simulator::execute(const Event& e) {
  switch (e.kind) {
    case EventKind::Generate: on_generate(e.target); break;
    case EventKind::LinkDeliver: {
      auto& p = packet(e.slot);
      const NodeId to = links_[e.target].to;
      if (p.kind != PacketKind::Smart) {
        ++p.hop;
        if (p.hop >= p.route.size() || p.route[p.hop] != to)
          invariant_failure("packet arrived off its route");
      }
      arrive(e.slot, to);
      break;
    }
    case EventKind::NodeProcess: arrive(e.slot, NodeId{static_cast<std::uint16_t>(e.target)}); break;
    case EventKind::BufferTimeout: on_buffer_timeout(e.target); break;
    case EventKind::RouteWait: on_route_wait(e.target); break;
  }
}

std::uint32_t Simulator::allocate(PacketKind kind, std::uint32_t flow) {
  std::uint32_t slot;
  if (!free_slots_.empty()) {
    slot = free_slots_.back();
    free_slots_.pop_back();
  } else {
    slot = static_cast<std::uint32_t>(pool_.size());
    pool_.emplace_back();
  }
  auto& p = pool_[slot];
  p.kind = kind;
  p.flow_index = flow;
  p.route.clear();
  p.hop_stamps.clear();
  p.hop = 0;
  p.path_id = 0;
  p.payload_bytes = 0;
  p.acked_kind = PacketKind::Dumb;
  if (flow < flows_.size()) {
    p.flow = flows_[flow].spec.key;
    p.goal = flows_[flow].spec.goal;
  }
  return slot;
}

void Simulator::release_slot(std::uint32_t slot) { free_slots_.push_back(slot); }

std::uint32_t Simulator::wire_bytes(const CpnPacket& packet) const {
  return packet.payload_bytes + config_.header_bytes;
}

std::optional<std::uint32_t> Simulator::link_between(NodeId from, NodeId to) const {
  if (from.value >= nodes_.size()) return std::nullopt;
  const auto& n = nodes_[from.value];
  for (std::size_t i = 0; i < n.neighbors.size(); ++i)
    if (n.neighbors[i] == to) return n.out_links[i];
  return std::nullopt;
}

std::optional<std::size_t> Simulator::neuron_for(NodeId node, NodeId next) const {
  const auto& n = nodes_[node.value];
  for (std::size_t i = 0; i < n.neighbors.size(); ++i)
    if (n.neighbors[i] == next) return i;
  return std::nullopt;
}

rnn::RnnState& Simulator::rnn_for(NodeId node, QosGoal goal, NodeId destination) {
  auto& rnns = nodes_[node.value].rnns;
  auto it = rnns.find({goal, destination});
  if (it == rnns.end()) {
    auto state = rnn::RnnState::symmetric(nodes_[node.value].out_links.size());
    rnn::solve_steady_state(state);
    it = rnns.emplace(std::pair{goal, destination}, std::move(state)).first;
  }
  return it->second;
}

const rnn::RnnState* Simulator::rnn_state(NodeId node, QosGoal goal, NodeId destination) const {
  const auto& rnns = nodes_.at(node.value).rnns;
  auto it = rnns.find({goal, destination});
  return it == rnns.end() ? nullptr : &it->second;
}

const playout::JitterBuffer* Simulator::buffer(std::uint32_t flow) const {
  const auto& b = flows_.at(flow).buffer;
  return b ? &*b : nullptr;
}

std::uint32_t Simulator::intern_path(const std::vector<NodeId>& path) {
  auto [it, fresh] = path_ids_.try_emplace(path, static_cast<std::uint32_t>(path_table_.size() + 1));
  if (fresh) path_table_.push_back(path);
  return it->second;
}

void Simulator::terminal(const CpnPacket& p, Outcome outcome, NodeId node) {
  if (observers_.empty()) return;
  TerminalRecord r{p.kind, p.flow_index, p.seq, outcome, p.created_at, now_, p.path_id, node};
  for (auto* o : observers_) o->on_terminal(r);
}

std::uint64_t Simulator::dp_in_flight(std::uint32_t flow) const {
  std::uint64_t count = flows_.at(flow).held.size();
  for (const auto& e : heap_) {
    if (e.kind != EventKind::LinkDeliver && e.kind != EventKind::NodeProcess) continue;
    const auto& p = pool_[e.slot];
    if (p.kind == PacketKind::Dumb && p.flow_index == flow) ++count;
  }
  return count;
}

// --- traffic -----------------------------------------------------------------

void Simulator::on_generate(std::uint32_t flow) {
  auto& fs = flows_[flow];
  const auto step = generate_traffic(fs.spec, fs.next_dp, now_);
  const NodeId origin = fs.spec.key.src;

  if (step.emit_smart) {
    const auto slot = allocate(PacketKind::Smart, flow);
    auto& sp = packet(slot);
    sp.seq = fs.next_sp++;
    sp.created_at = now_;
    ++fs.counters.sp_sent;
    handle_smart(slot, origin);
  }

  const auto slot = allocate(PacketKind::Dumb, flow);
  auto& dp = packet(slot);
  dp.seq = fs.next_dp++;
  dp.payload_bytes = fs.spec.generator.payload_bytes;
  dp.created_at = now_;
  ++fs.counters.dp_sent;
  for (auto* o : observers_) o->on_dp_generated(flow, dp.seq, now_);

  if (!fs.route.empty()) {
    dispatch_dp(slot);
  } else {
    fs.held.push_back(slot);
    if (!fs.route_wait_pending) {
      fs.route_wait_pending = true;
      schedule(now_ + SimTime::from_seconds(config_.route_wait_s), EventKind::RouteWait, flow);
    }
  }

  if (step.next_at < SimTime::from_seconds(fs.spec.stop_s))
    schedule(step.next_at, EventKind::Generate, flow);
}

void Simulator::on_route_wait(std::uint32_t flow) {
  auto& fs = flows_[flow];
  fs.route_wait_pending = false;
  const auto wait = SimTime::from_seconds(config_.route_wait_s);
  while (!fs.held.empty()) {
    const auto slot = fs.held.front();
    auto& p = packet(slot);
    if (p.created_at + wait > now_) break;
    fs.held.pop_front();
    ++fs.counters.dp_route_timeouts;
    terminal(p, Outcome::RouteTimeout, fs.spec.key.src);
    release_slot(slot);
  }
  if (!fs.held.empty()) {
    fs.route_wait_pending = true;
    schedule(packet(fs.held.front()).created_at + wait, EventKind::RouteWait, flow);
  }
}

void Simulator::dispatch_dp(std::uint32_t slot) {
  auto& p = packet(slot);
  auto& fs = flows_[p.flow_index];
  p.route = fs.route;
  p.path_id = fs.path_id;
  p.hop = 0;
  for (auto* o : observers_) o->on_dp_dispatched(p.flow_index, p.seq, p.created_at, p.route, p.path_id);
  handle_dumb(slot, p.route.front());
}

void Simulator::install_route(std::uint32_t flow, std::vector<NodeId> route) {
  if (route.empty()) throw std::invalid_argument("install_route: empty route");
  auto& fs = flows_.at(flow);
  fs.route = std::move(route);
  fs.path_id = intern_path(fs.route);
  ++fs.counters.route_installs;
  for (auto* o : observers_) o->on_route_installed(flow, now_, fs.route, fs.path_id);
  while (!fs.held.empty()) {
    const auto slot = fs.held.front();
    fs.held.pop_front();
    dispatch_dp(slot);
  }
}

// --- links -------------------------------------------------------------------

bool Simulator::transmit(std::uint32_t slot, NodeId from, NodeId to) {
  auto& p = packet(slot);
  auto& fs = flows_[p.flow_index];
  const auto link_index = link_between(from, to);
  if (!link_index) {
    if (p.kind == PacketKind::Dumb) ++fs.counters.dp_no_link;
    else if (p.kind == PacketKind::Ack) ++fs.counters.ack_drops;
    terminal(p, Outcome::NoLink, from);
    release_slot(slot);
    return false;
  }
  const auto& link = links_[*link_index];
  auto& state = link_states_[*link_index];
  while (!state.in_system.empty() && state.in_system.front() <= now_) state.in_system.pop_front();
  if (state.in_system.size() >= link.queue_capacity_packets) {
    ++state.drops;
    switch (p.kind) {
      case PacketKind::Dumb: ++fs.counters.dp_queue_drops; break;
      case PacketKind::Smart: ++fs.counters.sp_queue_drops; break;
      case PacketKind::Ack: ++fs.counters.ack_drops; break;
    }
    terminal(p, Outcome::QueueDrop, from);
    release_slot(slot);
    return false;
  }
  const double bits = static_cast<double>(wire_bytes(p)) * 8.0;
  const auto tx = SimTime::from_ns(std::llround(bits * 1e9 / link.bandwidth_bps));
  const SimTime start = std::max(now_, state.busy_until);
  state.busy_until = start + tx;
  state.in_system.push_back(state.busy_until);
  state.max_queue = std::max(state.max_queue, state.in_system.size());
  ++state.packets;
  state.bytes += wire_bytes(p);
  schedule(state.busy_until + link.propagation, EventKind::LinkDeliver, *link_index, slot);
  return true;
}

// --- node handlers -----------------------------------------------------------

void Simulator::inject(CpnPacket injected, NodeId node, SimTime when) {
  const auto flow_index = injected.flow_index;
  if (flow_index >= flows_.size()) throw std::invalid_argument("inject: unknown flow index");
  const auto slot = allocate(injected.kind, flow_index);
  auto& p = packet(slot);
  p = std::move(injected);
  if (p.kind != PacketKind::Smart && (p.hop >= p.route.size() || p.route[p.hop] != node))
    throw std::invalid_argument("inject: route[hop] must name the injection node");
  auto& fs = flows_[flow_index];
  if (p.kind == PacketKind::Dumb && p.hop == 0) {
    ++fs.counters.dp_sent;
    for (auto* o : observers_) o->on_dp_generated(flow_index, p.seq, when);
  } else if (p.kind == PacketKind::Smart && p.route.empty()) {
    ++fs.counters.sp_sent;
  }
  schedule(when, EventKind::NodeProcess, node.value, slot);
}

void Simulator::arrive(std::uint32_t slot, NodeId node) {
  auto& p = packet(slot);
  switch (p.kind) {
    case PacketKind::Smart: handle_smart(slot, node); break;
    case PacketKind::Dumb: handle_dumb(slot, node); break;
    case PacketKind::Ack: handle_ack(slot, node); break;
  }
}

void Simulator::handle_smart(std::uint32_t slot, NodeId node) {
  auto& p = packet(slot);
  auto& fs = flows_[p.flow_index];
  p.route.push_back(node);
  p.hop_stamps.push_back(HopStamp{node, now_});

  if (node == p.flow.dst) {
    ++fs.counters.sp_delivered;
    terminal(p, Outcome::Delivered, node);
    auto forward = loop_erase(p.route);
    std::reverse(forward.begin(), forward.end());
    send_ack(slot, std::move(forward));
    return;
  }
  if (p.route.size() - 1 >= config_.max_hops) {
    ++fs.counters.sp_hop_limit;
    terminal(p, Outcome::HopLimit, node);
    release_slot(slot);
    return;
  }

  const auto& ns = nodes_[node.value];
  const std::size_t degree = ns.neighbors.size();
  if (degree == 0) invariant_failure("node without outgoing links");
  std::size_t chosen = 0;
  if (degree > 1) {
    std::vector<std::uint8_t> eligible(degree, 1);
    std::size_t count = degree;
    if (p.route.size() >= 2) {
      const NodeId came_from = p.route[p.route.size() - 2];
      for (std::size_t i = 0; i < degree; ++i)
        if (ns.neighbors[i] == came_from) {
          eligible[i] = 0;
          --count;
        }
    }
    if (count == 0) std::fill(eligible.begin(), eligible.end(), 1);
    if (count == 1) {
      chosen = static_cast<std::size_t>(std::find(eligible.begin(), eligible.end(), 1) - eligible.begin());
    } else {
      auto& brain = rnn_for(node, p.goal, p.flow.dst);
      chosen = rnn::select_output(brain, rng_, config_.explore_prob, eligible);
    }
  }
  transmit(slot, node, ns.neighbors[chosen]);
}

void Simulator::handle_dumb(std::uint32_t slot, NodeId node) {
  auto& p = packet(slot);
  auto& fs = flows_[p.flow_index];
  p.hop_stamps.push_back(HopStamp{node, now_});

  if (p.hop + 1 >= p.route.size()) {
    ++fs.counters.dp_delivered;
    terminal(p, Outcome::Delivered, node);
    if (fs.buffer) deliver_to_buffer(p.flow_index, p);
    std::vector<NodeId> back(p.route.rbegin(), p.route.rend());
    send_ack(slot, std::move(back));
    return;
  }
  transmit(slot, node, p.route[p.hop + 1]);
}

void Simulator::send_ack(std::uint32_t acked_slot, std::vector<NodeId> reverse_route) {
  // The acknowledged packet's slot is reused for its ACK: the ACK carries the
  // same flow, sequence number and hop stamps.
  auto& p = packet(acked_slot);
  auto& fs = flows_[p.flow_index];
  p.acked_kind = p.kind;
  p.kind = PacketKind::Ack;
  p.route = std::move(reverse_route);
  p.hop = 0;
  p.payload_bytes = 0;
  ++fs.counters.acks_sent;
  if (p.route.size() < 2) {
    ++fs.counters.acks_delivered;
    terminal(p, Outcome::Delivered, p.route.empty() ? NodeId{} : p.route.front());
    release_slot(acked_slot);
    return;
  }
  transmit(acked_slot, p.route[0], p.route[1]);
}

void Simulator::handle_ack(std::uint32_t slot, NodeId node) {
  auto& p = packet(slot);
  auto& fs = flows_[p.flow_index];

  // Stamp of the acknowledged packet at this node; the last visit is the one
  // the loop-erased path continues from.
  const HopStamp* stamp = nullptr;
  for (auto it = p.hop_stamps.rbegin(); it != p.hop_stamps.rend(); ++it)
    if (it->node == node) {
      stamp = &*it;
      break;
    }
  if (stamp == nullptr) {
    ++fs.counters.ack_missing_stamp;
    terminal(p, Outcome::MissingStamp, node);
    release_slot(slot);
    return;
  }

  const double delay = goals::forward_delay_estimate(now_.seconds(), stamp->at.seconds());
  auto& ns = nodes_[node.value];
  const auto& entry =
      ns.mailbox.deposit(goals::MailboxKey{p.goal, p.flow.dst, p.flow}, delay, now_);
  ++fs.counters.mailbox_deposits;

  const bool learn = p.acked_kind == PacketKind::Smart || config_.rl_on_dp_acks;
  if (learn && ns.neighbors.size() >= 2 && p.hop >= 1) {
    const NodeId next = p.route[p.hop - 1];
    if (auto neuron = neuron_for(node, next)) {
      rnn::rl_update(rnn_for(node, p.goal, p.flow.dst), *neuron, entry.last_reward,
                     config_.threshold_factor);
      ++fs.counters.rl_updates;
    }
  }

  if (p.hop + 1 >= p.route.size()) {
    ++fs.counters.acks_delivered;
    terminal(p, Outcome::Delivered, node);
    if (p.acked_kind == PacketKind::Smart && fs.spec.fixed_route.empty() && node == fs.spec.key.src) {
      std::vector<NodeId> forward(p.route.rbegin(), p.route.rend());
      const auto flow = p.flow_index;
      release_slot(slot);
      install_route(flow, std::move(forward));
    } else {
      release_slot(slot);
    }
    return;
  }
  transmit(slot, node, p.route[p.hop + 1]);
}

// --- receiver ----------------------------------------------------------------

void Simulator::deliver_to_buffer(std::uint32_t flow, const CpnPacket& dp) {
  auto& fs = flows_[flow];
  auto& buf = *fs.buffer;
  emit_played(flow, buf.release(now_));
  const auto result = buf.insert(playout::BufferedPacket{dp.seq, dp.created_at, now_}, now_);
  auto record = [&](std::uint64_t seq, SimTime sent, Outcome outcome) {
    if (observers_.empty()) return;
    TerminalRecord r{PacketKind::Dumb, flow, seq, outcome, sent, now_, dp.path_id, dp.flow.dst};
    for (auto* o : observers_) o->on_terminal(r);
  };
  switch (result.action) {
    case playout::InsertAction::Buffered: break;
    case playout::InsertAction::DiscardLate: record(dp.seq, dp.created_at, Outcome::DiscardLate); break;
    case playout::InsertAction::DiscardOverflow:
      record(dp.seq, dp.created_at, Outcome::DiscardOverflow);
      break;
    case playout::InsertAction::Duplicate: record(dp.seq, dp.created_at, Outcome::Duplicate); break;
  }
  if (result.evicted)
    record(result.evicted->seq, result.evicted->sent_at, Outcome::DiscardOverflow);
  emit_played(flow, buf.release(now_));
  arm_buffer_timer(flow);
}

void Simulator::emit_played(std::uint32_t flow, const std::vector<playout::PlayedPacket>& played) {
  if (observers_.empty() || played.empty()) return;
  const auto& fs = flows_[flow];
  for (const auto& pp : played) {
    TerminalRecord r{PacketKind::Dumb, flow, pp.seq, Outcome::Played, pp.sent_at, pp.played_at, 0,
                     fs.spec.key.dst};
    for (auto* o : observers_) o->on_terminal(r);
  }
}

void Simulator::arm_buffer_timer(std::uint32_t flow) {
  auto& fs = flows_[flow];
  const auto deadline = fs.buffer->next_deadline();
  if (!deadline) return;
  const SimTime at = std::max(*deadline, now_);
  if (fs.buffer_timer && *fs.buffer_timer <= at && *fs.buffer_timer >= now_) return;
  fs.buffer_timer = at;
  schedule(at, EventKind::BufferTimeout, flow);
}

void Simulator::on_buffer_timeout(std::uint32_t flow) {
  auto& fs = flows_[flow];
  if (fs.buffer_timer && *fs.buffer_timer == now_) fs.buffer_timer.reset();
  emit_played(flow, fs.buffer->release(now_));
  arm_buffer_timer(flow);
}

}  // namespace cpn::sim
