#include "cpn/collector.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

namespace cpn::metrics {
namespace {
constexpr std::size_t kDelayRing = 1 << 14;
}

FlowMetricsCollector::FlowMetricsCollector(std::size_t flow_count, double window_s,
                                           double duration_s)
    : window_s_(window_s), duration_s_(duration_s) {
  if (!(window_s > 0.0)) throw std::invalid_argument("window length must be > 0");
  window_count_ = static_cast<std::size_t>(std::ceil(duration_s / window_s - 1e-9));
  if (window_count_ == 0) window_count_ = 1;
  flows_.resize(flow_count);
  for (auto& f : flows_) {
    f.windows.resize(window_count_);
    f.delays.resize(kDelayRing);
    f.paths.t_window_s = duration_s;
  }
}

std::size_t FlowMetricsCollector::window_of_time(SimTime t) const {
  const auto w = static_cast<std::size_t>(std::floor(t.seconds() / window_s_));
  return w;
}

std::size_t FlowMetricsCollector::window_of_seq(const PerFlow& f, std::uint64_t seq) const {
  // window_first_seq[w] is the first identifier generated in window w or later.
  auto it = std::upper_bound(f.window_first_seq.begin(), f.window_first_seq.end(), seq);
  return it == f.window_first_seq.begin()
             ? 0
             : static_cast<std::size_t>(it - f.window_first_seq.begin()) - 1;
}

FlowMetricsCollector::Acc& FlowMetricsCollector::acc(PerFlow& f, std::size_t w) {
  if (w >= f.windows.size()) f.windows.resize(w + 1);
  return f.windows[w];
}

void FlowMetricsCollector::on_dp_generated(std::uint32_t flow, std::uint64_t seq, SimTime at) {
  auto& f = flows_.at(flow);
  const auto w = window_of_time(at);
  while (f.window_first_seq.size() <= w) f.window_first_seq.push_back(seq);
  f.ledger.sent(seq);
  ++acc(f, w).stats.sent;
}

void FlowMetricsCollector::on_dp_dispatched(std::uint32_t flow, std::uint64_t /*seq*/,
                                            SimTime created_at, std::span<const NodeId> route,
                                            std::uint32_t /*path_id*/) {
  auto& f = flows_.at(flow);
  if (observe_path(f.paths, route)) ++acc(f, window_of_time(created_at)).stats.switches;
}

void FlowMetricsCollector::record_ipdv(PerFlow& f, std::uint64_t seq, double delay_s) {
  f.delays[seq % kDelayRing] = DelaySlot{seq, delay_s};
  auto pair = [&](std::uint64_t later, double later_delay, const DelaySlot& earlier) {
    if (earlier.seq != later - 1) return;
    auto& a = acc(f, window_of_seq(f, later));
    a.jitter_sum += std::abs(later_delay - earlier.delay_s);
    ++a.jitter_n;
  };
  if (seq > 0) pair(seq, delay_s, f.delays[(seq - 1) % kDelayRing]);
  const auto& next = f.delays[(seq + 1) % kDelayRing];
  if (next.seq == seq + 1) pair(seq + 1, next.delay_s, f.delays[seq % kDelayRing]);
}

void FlowMetricsCollector::on_terminal(const sim::TerminalRecord& r) {
  if (r.kind != PacketKind::Dumb) return;
  auto& f = flows_.at(r.flow);
  const auto w = window_of_seq(f, r.seq);
  switch (r.outcome) {
    case sim::Outcome::Delivered: {
      f.ledger.received(r.seq);
      auto& a = acc(f, w);
      ++a.stats.received;
      const double delay = (r.end_at - r.sent_at).seconds();
      a.delay_sum += delay;
      ++a.delay_n;
      record_ipdv(f, r.seq, delay);

      const auto cls = observe_arrival(f.reorder, r.seq);
      if (cls == Arrival::Reordered) {
        ++a.stats.reorders;
        update_density(f.reorder, cls);
        f.open_run_window = w;
      } else if (const auto added = update_density(f.reorder, cls); added > 0) {
        acc(f, f.open_run_window).stats.reorder_density += added;
      }
      break;
    }
    case sim::Outcome::QueueDrop:
    case sim::Outcome::RouteTimeout:
    case sim::Outcome::NoLink:
      f.ledger.dropped(r.seq);
      ++acc(f, w).stats.net_lost;
      break;
    case sim::Outcome::DiscardLate:
    case sim::Outcome::DiscardOverflow:
      f.ledger.discarded(r.seq);
      ++acc(f, w).stats.buffer_discards;
      break;
    default:
      break;
  }
}

void FlowMetricsCollector::finalize() {
  if (finalized_) return;
  finalized_ = true;
  for (auto& f : flows_) {
    if (const auto added = flush_density(f.reorder); added > 0)
      acc(f, f.open_run_window).stats.reorder_density += added;
    for (const auto& [last, len] : loss_runs(f.ledger, false))
      acc(f, window_of_seq(f, last)).stats.loss_density += run_density(len);

    f.finished.clear();
    for (std::size_t w = 0; w < f.windows.size(); ++w) {
      auto s = f.windows[w].stats;
      s.window_start_s = static_cast<double>(w) * window_s_;
      s.mean_delay_s = f.windows[w].delay_n ? f.windows[w].delay_sum / f.windows[w].delay_n : 0.0;
      s.mean_jitter_s =
          f.windows[w].jitter_n ? f.windows[w].jitter_sum / f.windows[w].jitter_n : 0.0;
      f.finished.push_back(s);
    }
  }
}

const std::vector<WindowStats>& FlowMetricsCollector::windows(std::uint32_t flow) const {
  if (!finalized_) throw std::logic_error("FlowMetricsCollector: finalize() first");
  return flows_.at(flow).finished;
}

FlowSummary FlowMetricsCollector::summary(std::uint32_t flow) const {
  if (!finalized_) throw std::logic_error("FlowMetricsCollector: finalize() first");
  const auto& f = flows_.at(flow);
  FlowSummary s;
  double delay_sum = 0.0, jitter_sum = 0.0;
  std::uint64_t delay_n = 0, jitter_n = 0;
  for (const auto& a : f.windows) {
    s.sent += a.stats.sent;
    s.received += a.stats.received;
    s.net_lost += a.stats.net_lost;
    s.buffer_discards += a.stats.buffer_discards;
    s.switches += a.stats.switches;
    s.reorders += a.stats.reorders;
    s.reorder_density += a.stats.reorder_density;
    s.loss_density += a.stats.loss_density;
    delay_sum += a.delay_sum;
    delay_n += a.delay_n;
    jitter_sum += a.jitter_sum;
    jitter_n += a.jitter_n;
  }
  s.mean_delay_s = delay_n ? delay_sum / static_cast<double>(delay_n) : 0.0;
  s.mean_jitter_s = jitter_n ? jitter_sum / static_cast<double>(jitter_n) : 0.0;
  if (s.sent) {
    s.e2e_loss_ratio = static_cast<double>(s.net_lost + s.buffer_discards) / static_cast<double>(s.sent);
    if (f.paths.n_packets)
      s.switch_ratio = static_cast<double>(f.paths.q_path) / static_cast<double>(f.paths.n_packets);
  }
  s.switch_rate = duration_s_ > 0.0 ? static_cast<double>(s.switches) / duration_s_ : 0.0;
  return s;
}

void FlowMetricsCollector::write_csv(std::ostream& out) const {
  write_window_header(out);
  for (std::uint32_t f = 0; f < flows_.size(); ++f)
    for (const auto& w : windows(f)) write_window_row(out, f, w);
}

}  // namespace cpn::metrics
