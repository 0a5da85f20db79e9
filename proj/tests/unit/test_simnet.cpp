#include <algorithm>
#include <sstream>

#include "cpn/collector.hpp"
#include "cpn/experiment.hpp"
#include "cpn/simnet.hpp"
#include "doctest.h"

using namespace cpn;
using namespace cpn::sim;

namespace {

struct Recorder : Observer {
  std::vector<TerminalRecord> terminals;
  std::vector<std::pair<std::uint64_t, std::uint32_t>> dispatched;  // (seq, path id)
  std::vector<std::pair<SimTime, std::uint32_t>> installs;
  void on_terminal(const TerminalRecord& r) override { terminals.push_back(r); }
  void on_dp_dispatched(std::uint32_t, std::uint64_t seq, SimTime, std::span<const NodeId>,
                        std::uint32_t path_id) override {
    dispatched.push_back({seq, path_id});
  }
  void on_route_installed(std::uint32_t, SimTime at, std::span<const NodeId>,
                          std::uint32_t path_id) override {
    installs.push_back({at, path_id});
  }
  std::vector<TerminalRecord> of(PacketKind k, Outcome o) const {
    std::vector<TerminalRecord> out;
    for (const auto& r : terminals)
      if (r.kind == k && r.outcome == o) out.push_back(r);
    return out;
  }
};

Topology line(std::initializer_list<const char*> labels, std::uint32_t capacity = 100) {
  Topology t;
  for (auto l : labels) t.add_node(l);
  for (std::size_t i = 0; i + 1 < labels.size(); ++i)
    t.add_link(LinkSpec{NodeId{static_cast<std::uint16_t>(i)}, NodeId{static_cast<std::uint16_t>(i + 1)},
                        100e6, 50e-6, capacity});
  return t;
}

FlowSpec flow(const Topology& t, const char* src, const char* dst, GeneratorSpec g, double stop,
              QosGoal goal = QosGoal::Delay) {
  FlowSpec f;
  f.key = {t.at(src), t.at(dst), 1000, 2000};
  f.goal = goal;
  f.generator = g;
  f.stop_s = stop;
  return f;
}

Scenario make(Topology t, std::vector<FlowSpec> flows) {
  auto r = validate_scenario(std::move(t), std::move(flows));
  REQUIRE_MESSAGE(r.ok(), r.describe());
  return *r.scenario;
}

SimConfig quiet(double duration) {
  SimConfig c;
  c.duration_s = duration;
  c.randomize_phase = false;
  return c;
}

// Store-and-forward latency of one packet over `hops` idle 100 Mbps links.
SimTime idle_latency(std::uint32_t payload, std::uint32_t hops) {
  const double bits = (payload + 58.0) * 8.0;
  return SimTime::from_ns(hops * (std::llround(bits * 1e9 / 100e6) + 50'000));
}

}  // namespace

TEST_CASE("one dumb packet over one link takes transmission plus propagation") {
  const auto t = line({"A", "B"});
  auto f = flow(t, "A", "B", GeneratorSpec::voice(), 0.001);
  f.fixed_route = {t.at("A"), t.at("B")};
  Simulator sim(make(t, {f}), quiet(1.0));
  Recorder rec;
  sim.add_observer(rec);
  sim.run();
  const auto d = rec.of(PacketKind::Dumb, Outcome::Delivered);
  REQUIRE(d.size() == 1);
  // 230 bytes at 100 Mbps = 18.4 us, plus 50 us.
  CHECK((d[0].end_at - d[0].sent_at).ns() == 18'400 + 50'000);
}

TEST_CASE("idle network delay equals the store-and-forward sum") {
  const auto t = testbed8();
  auto f = flow(t, "CPN002", "CPN026", GeneratorSpec::voice(), 1.0);
  f.fixed_route = {t.at("CPN002"), t.at("CPN003"), t.at("CPN006"), t.at("CPN026")};
  Simulator sim(make(t, {f}), quiet(2.0));
  Recorder rec;
  sim.add_observer(rec);
  sim.run();
  const auto d = rec.of(PacketKind::Dumb, Outcome::Delivered);
  REQUIRE(d.size() == 50);
  for (const auto& r : d) CHECK(r.end_at - r.sent_at == idle_latency(172, 3));
}

TEST_CASE("empty flow list produces no packet events") {
  Simulator sim(make(testbed8(), {}), quiet(5.0));
  Recorder rec;
  sim.add_observer(rec);
  sim.run();
  CHECK(rec.terminals.empty());
  CHECK(sim.events_executed() == 0);
}

TEST_CASE("generation intervals and smart packet ratio") {
  FlowSpec f;
  f.generator = GeneratorSpec::background(10e6);
  CHECK(generate_traffic(f, 0, SimTime::zero()).next_at.ns() == 819'200);
  f.generator.sp_ratio = 10;
  std::uint64_t sps = 0;
  const std::uint64_t dps = 95;
  for (std::uint64_t i = 0; i < dps; ++i) sps += generate_traffic(f, i, SimTime::zero()).emit_smart;
  CHECK(sps == (dps + 9) / 10);
  f.fixed_route = {NodeId{0}, NodeId{1}};
  CHECK_FALSE(generate_traffic(f, 0, SimTime::zero()).emit_smart);
}

TEST_CASE("loop erasure keeps the path after the last visit") {
  const std::vector<NodeId> visited{{0}, {1}, {2}, {1}, {3}};
  auto path = loop_erase(visited);
  CHECK(path == std::vector<NodeId>{{0}, {1}, {3}});
  std::reverse(path.begin(), path.end());
  CHECK(path == std::vector<NodeId>{{3}, {1}, {0}});
  const std::vector<NodeId> twice{{0}, {1}, {2}, {0}, {4}, {5}, {4}, {6}};
  CHECK(loop_erase(twice) == std::vector<NodeId>{{0}, {4}, {6}});
}

TEST_CASE("an ACK over three forwarding nodes deposits and learns at each") {
  const auto t = testbed8();
  auto f = flow(t, "CPN002", "CPN026", GeneratorSpec::voice(), 101.0);
  f.start_s = 100.0;  // keep the generator out of the way
  Simulator sim(make(t, {f}), quiet(1.0));
  CpnPacket dp;
  dp.kind = PacketKind::Dumb;
  dp.flow = f.key;
  dp.goal = f.goal;
  dp.payload_bytes = 172;
  dp.route = {t.at("CPN002"), t.at("CPN003"), t.at("CPN006"), t.at("CPN026")};
  sim.inject(dp, t.at("CPN002"), SimTime::zero());
  sim.run_until(SimTime::from_seconds(1.0));
  const auto& c = sim.counters(0);
  CHECK(c.dp_delivered == 1);
  CHECK(c.acks_delivered == 1);
  CHECK(c.mailbox_deposits == 3);
  CHECK(c.rl_updates == 3);
  for (auto label : {"CPN002", "CPN003", "CPN006"}) {
    CHECK(sim.mailbox(t.at(label)).size() == 1);
    const auto* brain = sim.rnn_state(t.at(label), QosGoal::Delay, t.at("CPN026"));
    REQUIRE(brain != nullptr);
    CHECK(brain->decisions() == 1);
  }
  CHECK(sim.mailbox(t.at("CPN026")).size() == 0);
  // The forward delay at the origin is half the round trip.
  const auto e = sim.mailbox(t.at("CPN002")).read({QosGoal::Delay, t.at("CPN026"), f.key});
  REQUIRE(e);
  const SimTime out = idle_latency(172, 3), back = idle_latency(0, 3);
  CHECK(e->last_delay_s == doctest::Approx((out + back).seconds() / 2).epsilon(1e-12));
}

TEST_CASE("flows with different goals deposit under distinct keys") {
  const auto t = testbed8();
  auto a = flow(t, "CPN002", "CPN026", GeneratorSpec::voice(), 2.0, QosGoal::Delay);
  auto b = flow(t, "CPN002", "CPN026", GeneratorSpec::voice(), 2.0, QosGoal::Jitter);
  b.key.src_port = 1001;
  Simulator sim(make(t, {a, b}), quiet(2.0));
  sim.run();
  const auto& box = sim.mailbox(t.at("CPN002"));
  CHECK(box.read({QosGoal::Delay, t.at("CPN026"), a.key}));
  CHECK(box.read({QosGoal::Jitter, t.at("CPN026"), b.key}));
  CHECK(box.size() == 2);
}

TEST_CASE("smart packet ACKs install the routes that dumb packets then carry") {
  const auto t = testbed8();
  auto f = flow(t, "CPN002", "CPN026", GeneratorSpec::background(2e6), 3.0);
  Simulator sim(make(t, {f}), quiet(3.0));
  Recorder rec;
  sim.add_observer(rec);
  sim.run();
  REQUIRE_FALSE(rec.installs.empty());
  CHECK(sim.counters(0).route_installs == rec.installs.size());
  // Every change of path id between consecutive dispatches follows an install.
  std::uint32_t current = 0;
  std::size_t changes = 0;
  for (const auto& [seq, id] : rec.dispatched) {
    if (id != current && current != 0) ++changes;
    current = id;
  }
  CHECK(changes <= rec.installs.size());
  for (const auto& path : sim.paths()) {
    CHECK(path.front() == t.at("CPN002"));
    CHECK(path.back() == t.at("CPN026"));
    // Loop-free.
    auto sorted = path;
    std::sort(sorted.begin(), sorted.end());
    CHECK(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end());
  }
}

TEST_CASE("smart packets past the hop limit are discarded and held packets time out") {
  const auto t = line({"A", "B", "C"});
  auto f = flow(t, "A", "C", GeneratorSpec::voice(), 0.5);
  auto cfg = quiet(1.0);
  cfg.max_hops = 1;
  Simulator sim(make(t, {f}), cfg);
  Recorder rec;
  sim.add_observer(rec);
  sim.run();
  const auto& c = sim.counters(0);
  CHECK(c.sp_hop_limit == c.sp_sent);
  CHECK(c.route_installs == 0);
  CHECK(c.dp_route_timeouts == c.dp_sent);
  for (const auto& r : rec.of(PacketKind::Dumb, Outcome::RouteTimeout))
    CHECK(r.end_at - r.sent_at == SimTime::from_seconds(0.1));
}

TEST_CASE("cold start holds dumb packets until the first route arrives") {
  const auto t = line({"A", "B", "C"});
  auto f = flow(t, "A", "C", GeneratorSpec::voice(), 0.5);
  Simulator sim(make(t, {f}), quiet(1.0));
  Recorder rec;
  sim.add_observer(rec);
  sim.run();
  const auto& c = sim.counters(0);
  CHECK(c.dp_route_timeouts == 0);
  CHECK(c.dp_delivered == c.dp_sent);
  REQUIRE_FALSE(rec.installs.empty());
  // The first DP left the origin only once the first SP's ACK was back.
  const auto d = rec.of(PacketKind::Dumb, Outcome::Delivered);
  REQUIRE_FALSE(d.empty());
  CHECK(d.front().end_at > rec.installs.front().first);
}

TEST_CASE("full queues drop packets as network loss") {
  const auto t = line({"A", "B"}, 2);
  auto f = flow(t, "A", "B", GeneratorSpec::background(300e6), 0.01);
  f.fixed_route = {t.at("A"), t.at("B")};
  Simulator sim(make(t, {f}), quiet(1.0));
  sim.run();
  const auto& c = sim.counters(0);
  CHECK(c.dp_queue_drops > 0);
  CHECK(c.dp_sent == c.dp_delivered + c.dp_dropped() + sim.dp_in_flight(0));
  CHECK(sim.link_state(0).max_queue <= 2);
  CHECK(sim.link_state(0).drops == c.dp_queue_drops);
}

TEST_CASE("a route naming a missing link loses the packet") {
  const auto t = line({"A", "B", "C"});
  auto f = flow(t, "A", "C", GeneratorSpec::voice(), 101.0);
  f.start_s = 100.0;
  Simulator sim(make(t, {f}), quiet(1.0));
  CpnPacket dp;
  dp.kind = PacketKind::Dumb;
  dp.flow = f.key;
  dp.route = {t.at("A"), t.at("C")};
  sim.inject(dp, t.at("A"), SimTime::zero());
  sim.run_until(SimTime::from_seconds(1.0));
  CHECK(sim.counters(0).dp_no_link == 1);
  CHECK(sim.counters(0).dp_sent == 1);
}

TEST_CASE("conservation holds mid-run and at the end") {
  DefaultScenarioOptions o;
  o.background_rate_bps = 30e6;
  o.duration_s = 20.0;
  auto sc = default_scenario(o);
  Simulator sim(sc, quiet(20.0));
  for (double stop : {0.05, 1.0, 7.3, 20.0}) {
    sim.run_until(SimTime::from_seconds(stop));
    for (std::uint32_t f = 0; f < sc.flows.size(); ++f) {
      const auto& c = sim.counters(f);
      CHECK(c.dp_sent == c.dp_delivered + c.dp_dropped() + sim.dp_in_flight(f));
    }
  }
}

TEST_CASE("identical seeds give identical event logs; different seeds differ") {
  DefaultScenarioOptions o;
  o.duration_s = 5.0;
  o.background_rate_bps = 20e6;
  const auto sc = default_scenario(o);
  auto log = [&](std::uint64_t seed) {
    SimConfig c;
    c.duration_s = 5.0;
    c.seed = seed;
    std::ostringstream os;
    cli::simulate(sc, c, 1.0, &os);
    return os.str();
  };
  const auto a = log(42), b = log(42), c = log(43);
  CHECK(a == b);
  CHECK(a != c);
  CHECK(a.rfind("kind,flow,seq,outcome,sent_s,end_s,path_id,node\n", 0) == 0);
}

TEST_CASE("receiver buffer reports played and discarded packets") {
  DefaultScenarioOptions o;
  o.duration_s = 5.0;
  const auto sc = default_scenario(o);
  Simulator sim(sc, quiet(5.0));
  Recorder rec;
  sim.add_observer(rec);
  sim.run();
  const auto* buf = sim.buffer(0);
  REQUIRE(buf != nullptr);
  const auto r = buf->report();
  CHECK(r.played + r.discards_late + r.discards_overflow == r.inserted);
  CHECK(rec.of(PacketKind::Dumb, Outcome::Played).size() == r.played);
  CHECK(sim.buffer(1) == nullptr);
}
