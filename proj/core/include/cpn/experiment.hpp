#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cpn/collector.hpp"
#include "cpn/config.hpp"
#include "cpn/playout.hpp"
#include "cpn/scenario.hpp"
#include "cpn/simnet.hpp"

namespace cpn::cli {

/// Writes one CSV line per packet terminal event:
/// `kind,flow,seq,outcome,sent_s,end_s,path_id,node`.
class EventLogWriter : public sim::Observer {
 public:
  explicit EventLogWriter(std::ostream& out);
  void on_terminal(const sim::TerminalRecord& r) override;

 private:
  std::ostream& out_;
};

struct FlowResult {
  sim::FlowCounters counters;
  std::uint64_t dp_in_flight = 0;
  metrics::FlowSummary summary;
  std::vector<metrics::WindowStats> windows;
  metrics::LossSplit loss;
  std::uint64_t reorder_events = 0;
  std::uint64_t reorder_density = 0;
  std::optional<playout::PlayoutReport> playout;
};

struct RunResult {
  std::vector<FlowResult> flows;
  std::uint64_t events = 0;
  std::uint64_t paths_seen = 0;
};

/// Runs one scenario to completion in memory. `event_log`, when given,
/// receives the terminal-event CSV (header included).
RunResult simulate(const Scenario& scenario, const sim::SimConfig& config, double window_s,
                   std::ostream* event_log = nullptr, std::ostream* rnn_dump = nullptr);

/// Artifacts of run_single: events.csv (optional), metrics.csv, playout.csv,
/// flows.csv and the resolved config.
RunResult run_single(const RunConfig& config, const std::filesystem::path& out_dir);

struct SweepRow {
  double rate_bps = 0.0;
  QosGoal voice_goal = QosGoal::Delay;
  QosGoal background_goal = QosGoal::Delay;
  double mean_delay_s = 0.0;
  double mean_jitter_s = 0.0;
  double e2e_loss_ratio = 0.0;
  double switch_rate = 0.0;
};

/// Every (rate, voice goal, background goal) with goals in {Delay, Jitter}^2;
/// one run directory per combination plus sweep_summary.csv. A failed run
/// stops the sweep; completed rows are still written before rethrowing.
std::vector<SweepRow> run_sweep(const RunConfig& config, std::span<const double> rates_bps,
                                const std::filesystem::path& out_dir, unsigned workers = 0,
                                std::span<const std::pair<QosGoal, QosGoal>> goal_pairs = {});

/// Default sweep rates, 1M .. 30M bps.
std::vector<double> standard_rates();

/// Summary row of the voice flow computed purely from a metrics.csv file.
SweepRow summarize_metrics_csv(const std::filesystem::path& metrics_csv, std::uint32_t flow,
                               double duration_s);

void write_sweep_header(std::ostream& out);
void write_sweep_row(std::ostream& out, const SweepRow& row);

/// Reads run or sweep artifacts under `dir` and writes SVG plots plus
/// correlation.txt. Returns the files written. Throws ConfigError when the
/// directory holds no artifacts.
std::vector<std::filesystem::path> report(const std::filesystem::path& dir);

/// Parsed metrics.csv rows grouped by flow.
std::vector<std::vector<metrics::WindowStats>> read_metrics_csv(const std::filesystem::path& path);
std::vector<SweepRow> read_sweep_csv(const std::filesystem::path& path);

struct CorrelationRow {
  std::uint32_t flow = 0;
  std::optional<double> reorders_vs_switches;
  std::optional<double> losses_vs_switches;
};

/// Windowed Pearson coefficients; nullopt when not computable (zero variance
/// or fewer than 3 windows).
CorrelationRow window_correlations(std::uint32_t flow, std::span<const metrics::WindowStats> windows);

}  // namespace cpn::cli
