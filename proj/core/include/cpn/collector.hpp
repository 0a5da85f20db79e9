#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "cpn/metrics.hpp"
#include "cpn/playout.hpp"
#include "cpn/simnet.hpp"

namespace cpn::metrics {

/// Whole-run figures for one flow, aggregated from its windows.
struct FlowSummary {
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
  double e2e_loss_ratio = 0.0;
  double switch_ratio = 0.0;
  double switch_rate = 0.0;  // per second
};

/// Streams simulator events into per-flow, per-window statistics. Every
/// per-packet quantity is attributed to the window of the packet's send time;
/// density runs to the window of their last packet, so windowed totals sum to
/// whole-run totals.
class FlowMetricsCollector : public sim::Observer {
 public:
  FlowMetricsCollector(std::size_t flow_count, double window_s, double duration_s);

  void on_dp_generated(std::uint32_t flow, std::uint64_t seq, SimTime at) override;
  void on_dp_dispatched(std::uint32_t flow, std::uint64_t seq, SimTime created_at,
                        std::span<const NodeId> route, std::uint32_t path_id) override;
  void on_terminal(const sim::TerminalRecord& record) override;

  /// Closes open reordering runs and attributes loss runs. Call once, after
  /// the simulation finished.
  void finalize();

  std::size_t flow_count() const { return flows_.size(); }
  const std::vector<WindowStats>& windows(std::uint32_t flow) const;
  FlowSummary summary(std::uint32_t flow) const;
  const LossLedger& ledger(std::uint32_t flow) const { return flows_.at(flow).ledger; }
  const ReorderState& reorder_state(std::uint32_t flow) const { return flows_.at(flow).reorder; }
  const PathTracker& path_tracker(std::uint32_t flow) const { return flows_.at(flow).paths; }
  double window_s() const { return window_s_; }

  void write_csv(std::ostream& out) const;

 private:
  struct Acc {
    WindowStats stats;
    double delay_sum = 0.0;
    std::uint64_t delay_n = 0;
    double jitter_sum = 0.0;
    std::uint64_t jitter_n = 0;
  };
  struct DelaySlot {
    std::uint64_t seq = UINT64_MAX;
    double delay_s = 0.0;
  };
  struct PerFlow {
    std::vector<Acc> windows;
    std::vector<std::uint64_t> window_first_seq;
    LossLedger ledger;
    ReorderState reorder;
    std::size_t open_run_window = 0;
    PathTracker paths;
    std::vector<DelaySlot> delays;
    std::vector<WindowStats> finished;
  };

  std::size_t window_of_time(SimTime t) const;
  std::size_t window_of_seq(const PerFlow& f, std::uint64_t seq) const;
  Acc& acc(PerFlow& f, std::size_t w);
  void record_ipdv(PerFlow& f, std::uint64_t seq, double delay_s);

  double window_s_;
  double duration_s_;
  std::size_t window_count_;
  std::vector<PerFlow> flows_;
  bool finalized_ = false;
};

}  // namespace cpn::metrics
