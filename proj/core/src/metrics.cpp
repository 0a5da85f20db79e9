#include "cpn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <string>

#include "cpn/time.hpp"

namespace cpn::metrics {

Arrival observe_arrival(ReorderState& state, std::uint64_t seq) {
  if (seq < state.next_exp) {
    ++state.events;
    return Arrival::Reordered;
  }
  state.next_exp = seq + state.seq_inc;
  return Arrival::InOrder;
}

std::uint64_t run_density(std::uint64_t run_length) {
  return run_length >= 2 ? run_length * run_length : run_length;
}

std::uint64_t update_density(ReorderState& state, Arrival classification) {
  if (classification == Arrival::Reordered) {
    ++state.count_r;
    return 0;
  }
  return flush_density(state);
}

std::uint64_t flush_density(ReorderState& state) {
  const std::uint64_t added = run_density(state.count_r);
  state.density_r += added;
  state.count_r = 0;
  return added;
}

double PathTracker::ratio() const {
  return n_packets == 0 ? 0.0 : static_cast<double>(q_path) / static_cast<double>(n_packets);
}

double PathTracker::rate() const {
  return t_window_s > 0.0 ? static_cast<double>(q_path) / t_window_s : 0.0;
}

bool observe_path(PathTracker& tracker, std::span<const NodeId> path) {
  ++tracker.n_packets;
  if (!tracker.current_path) {
    tracker.current_path.emplace(path.begin(), path.end());
    return false;
  }
  if (std::equal(path.begin(), path.end(), tracker.current_path->begin(),
                 tracker.current_path->end()))
    return false;
  tracker.current_path->assign(path.begin(), path.end());
  ++tracker.q_path;
  return true;
}

void LossLedger::set(std::uint64_t seq, std::uint8_t bit, const char* what) {
  if (seq >= flags_.size()) {
    if (bit != kSent)
      throw LedgerFault(std::string(what) + " identifier " + std::to_string(seq) + " never sent");
    flags_.resize(std::max<std::size_t>(seq + 1, flags_.size() + flags_.size() / 2), 0);
  }
  if (bit != kSent && !(flags_[seq] & kSent))
    throw LedgerFault(std::string(what) + " identifier " + std::to_string(seq) + " never sent");
  if (flags_[seq] & bit)
    throw LedgerFault(std::string(what) + " identifier " + std::to_string(seq) + " counted twice");
  flags_[seq] |= bit;
}

void LossLedger::sent(std::uint64_t seq) {
  set(seq, kSent, "sent");
  ++sent_;
}

void LossLedger::received(std::uint64_t seq) {
  if (has(seq, kDropped))
    throw LedgerFault("identifier " + std::to_string(seq) + " both dropped and received");
  set(seq, kReceived, "received");
  ++received_;
}

void LossLedger::dropped(std::uint64_t seq) {
  if (has(seq, kReceived))
    throw LedgerFault("identifier " + std::to_string(seq) + " both received and dropped");
  set(seq, kDropped, "dropped");
  ++dropped_;
}

void LossLedger::discarded(std::uint64_t seq) {
  if (!has(seq, kReceived))
    throw LedgerFault("identifier " + std::to_string(seq) + " discarded before being received");
  set(seq, kDiscarded, "discarded");
  ++discarded_;
}

double LossSplit::loss_rate(double interval_s) const {
  return interval_s > 0.0 ? static_cast<double>(end_to_end_loss) / interval_s : 0.0;
}

std::vector<std::pair<std::uint64_t, std::uint64_t>> loss_runs(const LossLedger& ledger,
                                                                bool unresolved_as_lost) {
  std::vector<std::pair<std::uint64_t, std::uint64_t>> runs;
  std::uint64_t run = 0;
  for (std::uint64_t seq = 0; seq < ledger.max_seq_plus_one(); ++seq) {
    if (!ledger.was_sent(seq)) continue;
    bool lost = ledger.was_discarded(seq);
    if (!ledger.was_received(seq)) lost = unresolved_as_lost || ledger.was_dropped(seq);
    if (lost) {
      ++run;
    } else if (run > 0) {
      runs.emplace_back(seq - 1, run);
      run = 0;
    }
  }
  if (run > 0) {
    std::uint64_t last = ledger.max_seq_plus_one();
    while (last > 0 && !ledger.was_sent(last - 1)) --last;
    runs.emplace_back(last - 1, run);
  }
  return runs;
}

LossSplit account_loss(const LossLedger& ledger) {
  LossSplit s;
  s.sent = ledger.sent_count();
  s.received = ledger.received_count();
  s.network_loss = s.sent - s.received;
  s.buffer_discards = ledger.discarded_count();
  s.end_to_end_loss = s.network_loss + s.buffer_discards;
  s.loss_ratio = s.sent ? static_cast<double>(s.end_to_end_loss) / static_cast<double>(s.sent) : 0.0;
  for (const auto& [last, len] : loss_runs(ledger, true)) s.loss_density += run_density(len);
  return s;
}

std::optional<double> correlate(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("correlate: length mismatch");
  if (a.size() < 3) throw std::invalid_argument("correlate: need at least 3 points");
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma, db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa <= 0.0 || sbb <= 0.0) return std::nullopt;
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

namespace {

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto x, auto y) { return v[x] < v[y]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

std::optional<double> spearman(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("spearman: length mismatch");
  const auto ra = average_ranks(a), rb = average_ranks(b);
  return correlate(ra, rb);
}

void write_window_header(std::ostream& out) {
  out << "flow,window_start_s,sent,received,net_lost,buffer_discards,switches,reorders,"
         "reorder_density,loss_density,mean_delay_s,mean_jitter_s\n";
}

void write_window_row(std::ostream& out, std::uint32_t flow, const WindowStats& w) {
  out << flow << "," << format_seconds(w.window_start_s) << "," << w.sent << "," << w.received
      << "," << w.net_lost << "," << w.buffer_discards << "," << w.switches << "," << w.reorders
      << "," << w.reorder_density << "," << w.loss_density << "," << format_seconds(w.mean_delay_s)
      << "," << format_seconds(w.mean_jitter_s) << "\n";
}

}  // namespace cpn::metrics
