#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "cpn/types.hpp"

namespace cpn::metrics {

// --- reordering --------------------------------------------------------------

enum class Arrival : std::uint8_t { InOrder, Reordered };

/// Receiver-side reproduction of the sender's identifier function.
struct ReorderState {
  std::uint64_t next_exp = 0;
  std::uint64_t seq_inc = 1;
  std::uint64_t count_r = 0;    // current run of successively reordered packets
  std::uint64_t density_r = 0;  // accumulated reordering density
  std::uint64_t events = 0;     // reordered packets seen
};

/// S < NextExp is reordered; otherwise NextExp <- S + seq_inc.
Arrival observe_arrival(ReorderState& state, std::uint64_t seq);

/// Density contribution of a closed run: k^2 when bursty (k >= 2), k when
/// isolated (k = 1).
std::uint64_t run_density(std::uint64_t run_length);

/// Feeds one classification. A Reordered arrival extends the current run; an
/// InOrder arrival closes it. Returns the density added (0 if no run closed).
std::uint64_t update_density(ReorderState& state, Arrival classification);

/// Closes a run still open at end of stream. Returns the density added.
std::uint64_t flush_density(ReorderState& state);

// --- path switching -------------------------------------------------------------

struct PathTracker {
  std::optional<std::vector<NodeId>> current_path;
  std::uint64_t q_path = 0;     // switches
  std::uint64_t n_packets = 0;  // packets forwarded
  double t_window_s = 100.0;

  double ratio() const;
  double rate() const;
};

/// Counts one forwarded packet; returns true when its path differs from the
/// previous packet's. The first packet only sets the path.
bool observe_path(PathTracker& tracker, std::span<const NodeId> path);

// --- loss ----------------------------------------------------------------------

class LedgerFault : public Error {
 public:
  using Error::Error;
};

/// Per-flow identifier ledger. Every identifier may be sent, received, dropped
/// and discarded at most once; anything else is a LedgerFault.
class LossLedger {
 public:
  void sent(std::uint64_t seq);
  void received(std::uint64_t seq);
  /// Explicit in-network drop (queue overflow, route timeout, missing link).
  void dropped(std::uint64_t seq);
  /// Received, then discarded by the jitter buffer.
  void discarded(std::uint64_t seq);

  std::uint64_t sent_count() const { return sent_; }
  std::uint64_t received_count() const { return received_; }
  std::uint64_t dropped_count() const { return dropped_; }
  std::uint64_t discarded_count() const { return discarded_; }
  /// Sent, neither received nor explicitly dropped.
  std::uint64_t unresolved_count() const { return sent_ - received_ - dropped_; }

  bool was_sent(std::uint64_t seq) const { return has(seq, kSent); }
  bool was_received(std::uint64_t seq) const { return has(seq, kReceived); }
  bool was_dropped(std::uint64_t seq) const { return has(seq, kDropped); }
  bool was_discarded(std::uint64_t seq) const { return has(seq, kDiscarded); }
  std::uint64_t max_seq_plus_one() const { return flags_.size(); }

 private:
  static constexpr std::uint8_t kSent = 1, kReceived = 2, kDropped = 4, kDiscarded = 8;
  bool has(std::uint64_t seq, std::uint8_t bit) const {
    return seq < flags_.size() && (flags_[seq] & bit) != 0;
  }
  void set(std::uint64_t seq, std::uint8_t bit, const char* what);

  std::vector<std::uint8_t> flags_;
  std::uint64_t sent_ = 0, received_ = 0, dropped_ = 0, discarded_ = 0;
};

struct LossSplit {
  std::uint64_t sent = 0;
  std::uint64_t received = 0;
  std::uint64_t network_loss = 0;     // sent - received
  std::uint64_t buffer_discards = 0;
  std::uint64_t end_to_end_loss = 0;  // network + discards
  double loss_ratio = 0.0;            // end-to-end / sent
  std::uint64_t loss_density = 0;     // runs of lost identifiers, as for reordering

  double loss_rate(double interval_s) const;
};

/// Identifier matching over a finished ledger.
LossSplit account_loss(const LossLedger& ledger);

/// Runs of consecutively lost identifiers, as (last identifier, run length).
/// Lost means not received or discarded; with `unresolved_as_lost = false`
/// identifiers still in flight count as not lost.
std::vector<std::pair<std::uint64_t, std::uint64_t>> loss_runs(const LossLedger& ledger,
                                                                bool unresolved_as_lost = true);

// --- correlation ------------------------------------------------------------------

/// Pearson coefficient; nullopt when either series has zero variance.
/// Throws std::invalid_argument on length mismatch or fewer than 3 points.
std::optional<double> correlate(std::span<const double> a, std::span<const double> b);

/// Spearman rank coefficient (average ranks for ties).
std::optional<double> spearman(std::span<const double> a, std::span<const double> b);

// --- windows ---------------------------------------------------------------------

struct WindowStats {
  double window_start_s = 0.0;
  std::uint64_t sent = 0;
  std::uint64_t received = 0;
  std::uint64_t net_lost = 0;
  std::uint64_t buffer_discards = 0;
  std::uint64_t switches = 0;
  std::uint64_t reorders = 0;
  std::uint64_t reorder_density = 0;
  std::uint64_t loss_density = 0;
  double mean_delay_s = 0.0;
  double mean_jitter_s = 0.0;
};

/// `flow,window_start_s,sent,...,mean_jitter_s`; times with 9 decimals.
void write_window_header(std::ostream& out);
void write_window_row(std::ostream& out, std::uint32_t flow, const WindowStats& w);

}  // namespace cpn::metrics
