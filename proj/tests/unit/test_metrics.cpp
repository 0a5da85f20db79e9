#include <algorithm>
#include <numeric>
#include <random>
#include <sstream>

#include "cpn/collector.hpp"
#include "cpn/metrics.hpp"
#include "doctest.h"

using namespace cpn;
using namespace cpn::metrics;

namespace {

// A packet is reordered when some earlier arrival carried a larger id.
std::vector<bool> brute_reordered(const std::vector<std::uint64_t>& arrivals) {
  std::vector<bool> out;
  for (std::size_t i = 0; i < arrivals.size(); ++i) {
    bool r = false;
    for (std::size_t j = 0; j < i; ++j) r = r || arrivals[j] > arrivals[i];
    out.push_back(r);
  }
  return out;
}

std::uint64_t brute_density(const std::vector<bool>& flags) {
  std::uint64_t total = 0;
  std::size_t i = 0;
  while (i < flags.size()) {
    if (!flags[i]) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < flags.size() && flags[j]) ++j;
    const std::uint64_t k = j - i;
    total += k == 1 ? 1 : k * k;
    i = j;
  }
  return total;
}

}  // namespace

TEST_CASE("NextExp detection") {
  ReorderState s;
  CHECK(observe_arrival(s, 0) == Arrival::InOrder);
  CHECK(observe_arrival(s, 2) == Arrival::InOrder);
  CHECK(s.next_exp == 3);
  CHECK(observe_arrival(s, 1) == Arrival::Reordered);
  CHECK(s.next_exp == 3);
  CHECK(observe_arrival(s, 3) == Arrival::InOrder);
  CHECK(s.events == 1);
}

TEST_CASE("density of isolated and bursty runs") {
  CHECK(run_density(0) == 0);
  CHECK(run_density(1) == 1);
  for (std::uint64_t k = 2; k <= 10; ++k) {
    ReorderState s;
    observe_arrival(s, 100);
    for (std::uint64_t i = 0; i < k; ++i) update_density(s, observe_arrival(s, i));
    CHECK(update_density(s, observe_arrival(s, 101)) == k * k);
    CHECK(s.density_r == k * k);
  }
  ReorderState s;
  for (std::uint64_t id : {1, 0, 3, 2, 5, 4}) update_density(s, observe_arrival(s, id));
  CHECK(flush_density(s) == 1);
  CHECK(s.density_r == 3);
}

TEST_CASE("reordering matches brute force over random permutations") {
  std::mt19937_64 rng(4242);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<std::uint64_t> ids(100);
    std::iota(ids.begin(), ids.end(), 0);
    if (trial % 2) {
      std::shuffle(ids.begin(), ids.end(), rng);
    } else {
      for (std::size_t i = 0; i + 1 < ids.size(); ++i)
        if (rng() % 5 == 0) std::swap(ids[i], ids[i + 1 + rng() % std::min<std::size_t>(6, ids.size() - i - 1)]);
    }
    ReorderState s;
    for (auto id : ids) update_density(s, observe_arrival(s, id));
    flush_density(s);
    const auto flags = brute_reordered(ids);
    CHECK(s.events == static_cast<std::uint64_t>(std::count(flags.begin(), flags.end(), true)));
    CHECK(s.density_r == brute_density(flags));
  }
}

TEST_CASE("path switching counts changes, not the first path") {
  PathTracker t;
  t.t_window_s = 10.0;
  const std::vector<NodeId> a{{0}, {1}, {3}}, b{{0}, {2}, {3}};
  CHECK_FALSE(observe_path(t, a));
  CHECK_FALSE(observe_path(t, a));
  CHECK(observe_path(t, b));
  CHECK(observe_path(t, a));
  CHECK(t.q_path == 2);
  CHECK(t.ratio() == doctest::Approx(0.5));
  CHECK(t.rate() == doctest::Approx(0.2));
}

TEST_CASE("ledger rejects impossible histories") {
  LossLedger l;
  l.sent(0);
  l.sent(1);
  CHECK_THROWS_AS(l.sent(1), LedgerFault);
  CHECK_THROWS_AS(l.received(5), LedgerFault);
  CHECK_THROWS_AS(l.discarded(0), LedgerFault);
  l.received(0);
  CHECK_THROWS_AS(l.dropped(0), LedgerFault);
  CHECK_THROWS_AS(l.received(0), LedgerFault);
  l.dropped(1);
  CHECK_THROWS_AS(l.received(1), LedgerFault);
}

TEST_CASE("loss split and density") {
  LossLedger l;
  for (std::uint64_t i = 0; i < 20; ++i) l.sent(i);
  for (std::uint64_t i : {0, 1, 2, 5, 6, 7, 8, 9, 10, 12, 13, 14, 15, 16, 17, 18})
    l.received(i);
  l.dropped(3);
  l.dropped(4);  // run of 2
  l.dropped(11);  // isolated
  l.discarded(13);
  l.discarded(14);
  l.discarded(15);  // run of 3
  // 19 unresolved.
  const auto s = account_loss(l);
  CHECK(s.sent == 20);
  CHECK(s.received == 16);
  CHECK(s.network_loss == 4);
  CHECK(s.buffer_discards == 3);
  CHECK(s.end_to_end_loss == s.network_loss + s.buffer_discards);
  CHECK(s.loss_ratio == doctest::Approx(7.0 / 20.0));
  CHECK(s.loss_density == 4 + 1 + 9 + 1);
  CHECK(s.loss_rate(10.0) == doctest::Approx(0.7));
  const auto settled = loss_runs(l, false);
  REQUIRE(settled.size() == 3);
  CHECK(settled[0] == std::pair<std::uint64_t, std::uint64_t>{4, 2});
  CHECK(settled[2] == std::pair<std::uint64_t, std::uint64_t>{15, 3});
}

TEST_CASE("loss runs match a run-length oracle") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    LossLedger l;
    std::vector<bool> lost(60);
    for (std::uint64_t i = 0; i < lost.size(); ++i) {
      l.sent(i);
      const auto r = rng() % 6;
      lost[i] = r < 2;
      if (r == 0) l.dropped(i);
      else if (r == 1) {
        l.received(i);
        l.discarded(i);
      } else {
        l.received(i);
      }
    }
    std::uint64_t density = 0, e2e = 0;
    for (std::size_t i = 0; i < lost.size();) {
      if (!lost[i]) {
        ++i;
        continue;
      }
      std::size_t j = i;
      while (j < lost.size() && lost[j]) ++j;
      const std::uint64_t k = j - i;
      density += k == 1 ? 1 : k * k;
      e2e += k;
      i = j;
    }
    const auto s = account_loss(l);
    CHECK(s.loss_density == density);
    CHECK(s.end_to_end_loss == e2e);
    CHECK(s.end_to_end_loss == s.network_loss + s.buffer_discards);
  }
}

TEST_CASE("Pearson and Spearman") {
  const double x[] = {1, 2, 3, 4, 5};
  const double y[] = {2, 4, 6, 8, 10};
  const double z[] = {5, 4, 3, 2, 1};
  const double c[] = {3, 3, 3, 3, 3};
  CHECK(*correlate(x, y) == doctest::Approx(1.0));
  CHECK(*correlate(x, z) == doctest::Approx(-1.0));
  CHECK_FALSE(correlate(x, c));
  CHECK_THROWS_AS(correlate(std::span(x, 2), std::span(y, 2)), std::invalid_argument);
  CHECK_THROWS_AS(correlate(std::span(x, 3), std::span(y, 4)), std::invalid_argument);
  const double w[] = {1, 8, 27, 64, 125};
  CHECK(*spearman(x, w) == doctest::Approx(1.0));
  // Ties take average ranks: ranks (1,2,3,4) vs (2,2,2,4).
  const double r[] = {1, 10, 20, 30};
  const double t[] = {0, 0, 0, 0.5};
  CHECK(*spearman(r, t) == doctest::Approx(3.0 / std::sqrt(15.0)));
}

TEST_CASE("window CSV header and row format") {
  std::ostringstream os;
  write_window_header(os);
  WindowStats w;
  w.window_start_s = 100.0;
  w.sent = 5;
  w.mean_delay_s = 0.0125;
  write_window_row(os, 3, w);
  CHECK(os.str() ==
        "flow,window_start_s,sent,received,net_lost,buffer_discards,switches,reorders,"
        "reorder_density,loss_density,mean_delay_s,mean_jitter_s\n"
        "3,100.000000000,5,0,0,0,0,0,0,0,0.012500000,0.000000000\n");
}

namespace {

sim::TerminalRecord delivered(std::uint64_t seq, double sent, double end) {
  return {PacketKind::Dumb, 0, seq, sim::Outcome::Delivered, SimTime::from_seconds(sent),
          SimTime::from_seconds(end), 1, NodeId{1}};
}

}  // namespace

TEST_CASE("collector windows partition the whole-run totals") {
  FlowMetricsCollector c(1, 10.0, 30.0);
  const std::vector<NodeId> p1{{0}, {1}}, p2{{0}, {2}, {1}};
  // 30 packets, one per second; ids 12..14 are delayed past 15 and 20 is lost.
  for (std::uint64_t s = 0; s < 30; ++s) {
    c.on_dp_generated(0, s, SimTime::from_seconds(static_cast<double>(s)));
    c.on_dp_dispatched(0, s, SimTime::from_seconds(static_cast<double>(s)), (s / 5) % 2 ? p2 : p1, 1);
  }
  std::vector<std::uint64_t> order;
  for (std::uint64_t s = 0; s < 30; ++s)
    if (s < 12 || s > 14) order.push_back(s);
  order.insert(order.begin() + 14, {12, 13, 14});
  for (auto s : order) {
    if (s == 20) {
      c.on_terminal({PacketKind::Dumb, 0, s, sim::Outcome::QueueDrop, SimTime::from_seconds(20.0),
                     SimTime::from_seconds(20.1), 1, NodeId{0}});
      continue;
    }
    const double extra = (s >= 12 && s <= 14) ? 5.0 : 0.001 * static_cast<double>(s % 3);
    c.on_terminal(delivered(s, static_cast<double>(s), static_cast<double>(s) + 0.01 + extra));
  }
  c.finalize();
  const auto& ws = c.windows(0);
  REQUIRE(ws.size() == 3);
  const auto sum = c.summary(0);
  std::uint64_t sent = 0, recv = 0, lost = 0, sw = 0, ro = 0, rd = 0, ld = 0;
  for (const auto& w : ws) {
    sent += w.sent, recv += w.received, lost += w.net_lost, sw += w.switches;
    ro += w.reorders, rd += w.reorder_density, ld += w.loss_density;
  }
  CHECK(sent == 30);
  CHECK(sent == sum.sent);
  CHECK(recv == 29);
  CHECK(lost == 1);
  CHECK(ws[2].net_lost == 1);
  CHECK(ro == 3);
  CHECK(ws[1].reorders == 3);
  CHECK(rd == 9);
  CHECK(ld == 1);
  CHECK(sw == 5);  // path changes at ids 5, 10, 15, 20, 25
  CHECK(sum.switches == sw);
  CHECK(sum.switch_ratio == doctest::Approx(5.0 / 30.0));
  CHECK(sum.switch_rate == doctest::Approx(5.0 / 30.0));
  CHECK(sum.e2e_loss_ratio == doctest::Approx(1.0 / 30.0));
  CHECK(ws[0].mean_delay_s == doctest::Approx(0.0109).epsilon(1e-9));
}

TEST_CASE("collector IPDV pairs consecutive identifiers regardless of arrival order") {
  FlowMetricsCollector c(1, 100.0, 100.0);
  for (std::uint64_t s = 0; s < 4; ++s) c.on_dp_generated(0, s, SimTime::from_seconds(s * 0.02));
  // Delays 10, 14, 11, 11 ms; id 1 arrives last.
  c.on_terminal(delivered(0, 0.00, 0.010));
  c.on_terminal(delivered(2, 0.04, 0.051));
  c.on_terminal(delivered(3, 0.06, 0.071));
  c.on_terminal(delivered(1, 0.02, 0.034));
  c.finalize();
  // |14-10| + |11-14| + |11-11| over 3 pairs.
  CHECK(c.windows(0)[0].mean_jitter_s == doctest::Approx(0.007 / 3).epsilon(1e-9));
}
