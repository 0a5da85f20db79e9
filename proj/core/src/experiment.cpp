#include "cpn/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "cpn/metrics.hpp"
#include "cpn/svg.hpp"

namespace cpn::cli {
namespace fs = std::filesystem;

EventLogWriter::EventLogWriter(std::ostream& out) : out_(out) {
  out_ << "kind,flow,seq,outcome,sent_s,end_s,path_id,node\n";
}

void EventLogWriter::on_terminal(const sim::TerminalRecord& r) {
  out_ << to_string(r.kind) << ',' << r.flow << ',' << r.seq << ',' << sim::to_string(r.outcome)
       << ',' << format_seconds(r.sent_at) << ',' << format_seconds(r.end_at) << ',' << r.path_id
       << ',' << r.node.value << '\n';
}

namespace {

void dump_rnns(std::ostream& out, const sim::Simulator& sim) {
  const auto& topo = sim.scenario().topology;
  // Rows grouped by fan-out so each block has a matching header.
  std::map<std::size_t, std::vector<std::tuple<NodeId, QosGoal, NodeId, const rnn::RnnState*>>> by_n;
  for (std::uint16_t v = 0; v < topo.nodes().size(); ++v)
    for (const auto& [key, state] : sim.rnn_states(NodeId{v}))
      by_n[state.size()].emplace_back(NodeId{v}, key.first, key.second, &state);
  for (const auto& [n, rows] : by_n) {
    rnn::write_debug_header(out, n);
    for (const auto& [node, goal, dst, state] : rows)
      rnn::write_debug_row(out, topo.label(node), goal, topo.label(dst), *state);
  }
}

std::string goal_tag(QosGoal g) { return g == QosGoal::Delay ? "delay" : "jitter"; }

std::string rate_tag(double rate) {
  std::ostringstream os;
  os << std::setw(9) << std::setfill('0') << static_cast<std::uint64_t>(rate);
  return os.str();
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double to_double(const std::string& s, const fs::path& file, std::size_t line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(file.string(), line, "not a number: '" + s + "'");
  }
}

std::uint64_t to_u64(const std::string& s, const fs::path& file, std::size_t line) {
  std::uint64_t v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size())
    throw ConfigError(file.string(), line, "not an integer: '" + s + "'");
  return v;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error("cannot write " + p.string());
  return out;
}

void write_playout_csv(std::ostream& out, const RunResult& r) {
  out << "flow,inserted,played,discards_late,discards_overflow,duplicates,max_queue,mean_queue,"
         "mean_playout_delay_s\n";
  for (std::size_t f = 0; f < r.flows.size(); ++f) {
    if (!r.flows[f].playout) continue;
    const auto& p = *r.flows[f].playout;
    out << f << ',' << p.inserted << ',' << p.played << ',' << p.discards_late << ','
        << p.discards_overflow << ',' << p.duplicates << ',' << p.max_queue << ','
        << format_seconds(p.mean_queue) << ',' << format_seconds(p.mean_playout_delay_s) << '\n';
  }
}

void write_flows_csv(std::ostream& out, const Scenario& sc, const RunResult& r) {
  out << "flow,src,dst,src_port,dst_port,goal,generator,dp_sent,dp_delivered,dp_dropped,dp_in_flight,"
         "network_loss,buffer_discards,e2e_loss,loss_ratio,reorders,reorder_density,loss_density,"
         "switches,switch_ratio,switch_rate,mean_delay_s,mean_jitter_s\n";
  const auto& t = sc.topology;
  for (std::size_t f = 0; f < r.flows.size(); ++f) {
    const auto& fr = r.flows[f];
    const auto& spec = sc.flows[f];
    out << f << ',' << t.label(spec.key.src) << ',' << t.label(spec.key.dst) << ','
        << spec.key.src_port << ',' << spec.key.dst_port << ',' << to_string(spec.goal) << ','
        << to_string(spec.generator.kind) << ',' << fr.counters.dp_sent << ','
        << fr.counters.dp_delivered << ',' << fr.counters.dp_dropped() << ',' << fr.dp_in_flight << ','
        << fr.loss.network_loss << ',' << fr.loss.buffer_discards << ',' << fr.loss.end_to_end_loss
        << ',' << format_seconds(fr.loss.loss_ratio) << ',' << fr.reorder_events << ','
        << fr.reorder_density << ',' << fr.loss.loss_density << ',' << fr.summary.switches << ','
        << format_seconds(fr.summary.switch_ratio) << ',' << format_seconds(fr.summary.switch_rate)
        << ',' << format_seconds(fr.summary.mean_delay_s) << ','
        << format_seconds(fr.summary.mean_jitter_s) << '\n';
  }
}

}  // namespace

namespace {

RunResult execute(const Scenario& scenario, const sim::SimConfig& config, double window_s,
                  std::ostream* event_log, std::ostream* rnn_dump, std::ostream* metrics_csv) {
  sim::Simulator sim(scenario, config);
  metrics::FlowMetricsCollector collector(scenario.flows.size(), window_s, config.duration_s);
  sim.add_observer(collector);
  std::optional<EventLogWriter> log;
  if (event_log) {
    log.emplace(*event_log);
    sim.add_observer(*log);
  }
  sim.run();
  collector.finalize();

  RunResult result;
  result.events = sim.events_executed();
  result.paths_seen = sim.paths().size();
  for (std::uint32_t f = 0; f < scenario.flows.size(); ++f) {
    FlowResult fr;
    fr.counters = sim.counters(f);
    fr.dp_in_flight = sim.dp_in_flight(f);
    fr.summary = collector.summary(f);
    fr.windows = collector.windows(f);
    fr.loss = metrics::account_loss(collector.ledger(f));
    fr.reorder_events = collector.reorder_state(f).events;
    fr.reorder_density = collector.reorder_state(f).density_r;
    if (const auto* b = sim.buffer(f)) fr.playout = b->report();
    result.flows.push_back(std::move(fr));
  }
  if (rnn_dump) dump_rnns(*rnn_dump, sim);
  if (metrics_csv) collector.write_csv(*metrics_csv);
  return result;
}

}  // namespace

RunResult simulate(const Scenario& scenario, const sim::SimConfig& config, double window_s,
                   std::ostream* event_log, std::ostream* rnn_dump) {
  return execute(scenario, config, window_s, event_log, rnn_dump, nullptr);
}

RunResult run_single(const RunConfig& config, const fs::path& out_dir) {
  if (!(config.sim.duration_s > 0.0)) throw ConfigError(config.source, 0, "duration must be > 0");
  if (!(config.window_s > 0.0)) throw ConfigError(config.source, 0, "window must be > 0");
  const Scenario scenario = build_scenario(config);
  fs::create_directories(out_dir);

  std::optional<std::ofstream> events, rnns;
  if (config.event_log) events.emplace(open_out(out_dir / "events.csv"));
  if (config.rnn_dump) rnns.emplace(open_out(out_dir / "rnn.csv"));
  auto metrics_out = open_out(out_dir / "metrics.csv");

  RunResult result = execute(scenario, config.sim, config.window_s, events ? &*events : nullptr,
                             rnns ? &*rnns : nullptr, &metrics_out);
  {
    auto out = open_out(out_dir / "playout.csv");
    write_playout_csv(out, result);
  }
  {
    auto out = open_out(out_dir / "flows.csv");
    write_flows_csv(out, scenario, result);
  }
  {
    auto out = open_out(out_dir / "config.ini");
    write_config(out, config);
  }
  return result;
}

std::vector<double> standard_rates() {
  return {1e6, 2e6, 3.2e6, 6.4e6, 10e6, 15e6, 20e6, 25e6, 30e6};
}

void write_sweep_header(std::ostream& out) {
  out << "rate_bps,voice_goal,background_goal,mean_delay_s,mean_jitter_s,e2e_loss_ratio,switch_rate\n";
}

void write_sweep_row(std::ostream& out, const SweepRow& r) {
  out << static_cast<std::uint64_t>(r.rate_bps) << ',' << to_string(r.voice_goal) << ','
      << to_string(r.background_goal) << ',' << format_seconds(r.mean_delay_s) << ','
      << format_seconds(r.mean_jitter_s) << ',' << format_seconds(r.e2e_loss_ratio) << ','
      << format_seconds(r.switch_rate) << '\n';
}

std::vector<std::vector<metrics::WindowStats>> read_metrics_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string(), 0, "cannot open");
  std::string line;
  std::vector<std::vector<metrics::WindowStats>> flows;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (n == 1 || line.empty()) continue;
    const auto c = split_csv(line);
    if (c.size() != 12) throw ConfigError(path.string(), n, "expected 12 columns");
    const auto flow = to_u64(c[0], path, n);
    if (flow >= flows.size()) flows.resize(flow + 1);
    metrics::WindowStats w;
    w.window_start_s = to_double(c[1], path, n);
    w.sent = to_u64(c[2], path, n);
    w.received = to_u64(c[3], path, n);
    w.net_lost = to_u64(c[4], path, n);
    w.buffer_discards = to_u64(c[5], path, n);
    w.switches = to_u64(c[6], path, n);
    w.reorders = to_u64(c[7], path, n);
    w.reorder_density = to_u64(c[8], path, n);
    w.loss_density = to_u64(c[9], path, n);
    w.mean_delay_s = to_double(c[10], path, n);
    w.mean_jitter_s = to_double(c[11], path, n);
    flows[flow].push_back(w);
  }
  return flows;
}

SweepRow summarize_metrics_csv(const fs::path& metrics_csv, std::uint32_t flow, double duration_s) {
  const auto flows = read_metrics_csv(metrics_csv);
  if (flow >= flows.size()) throw ConfigError(metrics_csv.string(), 0, "no rows for flow");
  SweepRow row;
  std::uint64_t sent = 0, received = 0, lost = 0, switches = 0;
  double delay_w = 0.0, jitter_w = 0.0;
  for (const auto& w : flows[flow]) {
    sent += w.sent;
    received += w.received;
    lost += w.net_lost + w.buffer_discards;
    switches += w.switches;
    // Window means are over received packets; weight them accordingly.
    delay_w += w.mean_delay_s * static_cast<double>(w.received);
    jitter_w += w.mean_jitter_s * static_cast<double>(w.received);
  }
  if (received) {
    row.mean_delay_s = delay_w / static_cast<double>(received);
    row.mean_jitter_s = jitter_w / static_cast<double>(received);
  }
  if (sent) row.e2e_loss_ratio = static_cast<double>(lost) / static_cast<double>(sent);
  if (duration_s > 0.0) row.switch_rate = static_cast<double>(switches) / duration_s;
  return row;
}

std::vector<SweepRow> run_sweep(const RunConfig& config, std::span<const double> rates_bps,
                                const fs::path& out_dir, unsigned workers,
                                std::span<const std::pair<QosGoal, QosGoal>> goal_pairs) {
  if (rates_bps.empty()) throw ConfigError(config.source, 0, "no rates given");
  for (double r : rates_bps)
    if (!(r > 0.0)) throw ConfigError(config.source, 0, "rates must be positive");
  static const std::pair<QosGoal, QosGoal> kAllPairs[] = {{QosGoal::Delay, QosGoal::Delay},
                                                          {QosGoal::Delay, QosGoal::Jitter},
                                                          {QosGoal::Jitter, QosGoal::Delay},
                                                          {QosGoal::Jitter, QosGoal::Jitter}};
  if (goal_pairs.empty()) goal_pairs = kAllPairs;

  struct Job {
    double rate;
    QosGoal vg, bg;
    fs::path dir;
  };
  std::vector<Job> jobs;
  for (double rate : rates_bps)
    for (const auto& [vg, bg] : goal_pairs)
      jobs.push_back({rate, vg, bg,
                      out_dir / ("rate_" + rate_tag(rate) + "_" + goal_tag(vg) + "_" + goal_tag(bg))});

  // Validate the shared parts once so a bad config fails before any run.
  (void)build_scenario(config);
  fs::create_directories(out_dir);

  std::vector<std::optional<SweepRow>> rows(jobs.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first_error;
  std::mutex error_mu;

  auto work = [&] {
    for (;;) {
      if (failed.load()) return;
      const std::size_t i = next.fetch_add(1);
      if (i >= jobs.size()) return;
      const Job& job = jobs[i];
      try {
        RunConfig rc = config;
        rc.background_rate_bps = job.rate;
        rc.voice_goal = job.vg;
        rc.background_goal = job.bg;
        rc.event_log = false;
        const Scenario sc = build_scenario(rc);
        const auto voice = voice_flow_index(sc);
        if (!voice) throw ConfigError(config.source, 0, "sweep needs a voice flow");
        run_single(rc, job.dir);
        SweepRow row = summarize_metrics_csv(job.dir / "metrics.csv", *voice, rc.sim.duration_s);
        row.rate_bps = job.rate;
        row.voice_goal = job.vg;
        row.background_goal = job.bg;
        rows[i] = row;
      } catch (...) {
        std::lock_guard lock(error_mu);
        if (!first_error) first_error = std::current_exception();
        failed = true;
        return;
      }
    }
  };

  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = std::min<unsigned>(workers, static_cast<unsigned>(jobs.size()));
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }

  std::vector<SweepRow> done;
  for (const auto& r : rows)
    if (r) done.push_back(*r);
  {
    auto out = open_out(out_dir / "sweep_summary.csv");
    write_sweep_header(out);
    for (const auto& r : done) write_sweep_row(out, r);
  }
  if (first_error) std::rethrow_exception(first_error);
  return done;
}

std::vector<SweepRow> read_sweep_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string(), 0, "cannot open");
  std::vector<SweepRow> rows;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (n == 1 || line.empty()) continue;
    const auto c = split_csv(line);
    if (c.size() != 7) throw ConfigError(path.string(), n, "expected 7 columns");
    SweepRow r;
    r.rate_bps = to_double(c[0], path, n);
    auto g1 = parse_goal(c[1]);
    auto g2 = parse_goal(c[2]);
    if (!g1 || !g2) throw ConfigError(path.string(), n, "unknown goal");
    r.voice_goal = *g1;
    r.background_goal = *g2;
    r.mean_delay_s = to_double(c[3], path, n);
    r.mean_jitter_s = to_double(c[4], path, n);
    r.e2e_loss_ratio = to_double(c[5], path, n);
    r.switch_rate = to_double(c[6], path, n);
    rows.push_back(r);
  }
  return rows;
}

CorrelationRow window_correlations(std::uint32_t flow, std::span<const metrics::WindowStats> windows) {
  CorrelationRow row;
  row.flow = flow;
  if (windows.size() < 3) return row;
  std::vector<double> reorders, losses, switches;
  for (const auto& w : windows) {
    reorders.push_back(static_cast<double>(w.reorders));
    losses.push_back(static_cast<double>(w.net_lost + w.buffer_discards));
    switches.push_back(static_cast<double>(w.switches));
  }
  row.reorders_vs_switches = metrics::correlate(reorders, switches);
  row.losses_vs_switches = metrics::correlate(losses, switches);
  return row;
}

namespace {

std::string coef(const std::optional<double>& c) {
  if (!c) return "not computable";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%+.4f", *c);
  return buf;
}

void report_run(const fs::path& dir, const fs::path& out_dir, const std::string& prefix,
                std::vector<fs::path>& written, std::ostream& table) {
  const auto flows = read_metrics_csv(dir / "metrics.csv");
  for (std::uint32_t f = 0; f < flows.size(); ++f) {
    const auto& ws = flows[f];
    if (ws.empty()) continue;
    const auto c = window_correlations(f, ws);
    table << prefix << "flow " << f << ": reorders~switches " << coef(c.reorders_vs_switches)
          << ", losses~switches " << coef(c.losses_vs_switches) << "\n";

    svg::Chart chart;
    chart.title = prefix + "flow " + std::to_string(f) + " per window";
    chart.x_label = "window start (s)";
    chart.y_label = "packets";
    svg::Series loss{"lost", {}, {}}, sw{"path switches", {}, {}}, ro{"reorders", {}, {}};
    for (const auto& w : ws) {
      loss.x.push_back(w.window_start_s);
      loss.y.push_back(static_cast<double>(w.net_lost + w.buffer_discards));
      sw.x.push_back(w.window_start_s);
      sw.y.push_back(static_cast<double>(w.switches));
      ro.x.push_back(w.window_start_s);
      ro.y.push_back(static_cast<double>(w.reorders));
    }
    chart.series = {loss, sw, ro};
    std::string name = prefix + "flow" + std::to_string(f) + "_timeseries.svg";
    std::replace(name.begin(), name.end(), ' ', '_');
    std::replace(name.begin(), name.end(), '/', '_');
    const fs::path p = out_dir / name;
    svg::write(p, chart);
    written.push_back(p);
  }
}

}  // namespace

std::vector<fs::path> report(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw ConfigError(dir.string(), 0, "not a directory");
  std::vector<fs::path> written;
  std::ostringstream table;
  table << "windowed Pearson coefficients\n";

  const bool has_sweep = fs::exists(dir / "sweep_summary.csv");
  const bool has_run = fs::exists(dir / "metrics.csv");
  if (!has_sweep && !has_run)
    throw ConfigError(dir.string(), 0, "no metrics.csv or sweep_summary.csv to report on");

  if (has_run) report_run(dir, dir, "", written, table);

  if (has_sweep) {
    const auto rows = read_sweep_csv(dir / "sweep_summary.csv");
    if (rows.empty()) throw ConfigError((dir / "sweep_summary.csv").string(), 0, "sweep summary is empty");
    struct Metric {
      const char* name;
      const char* label;
      double SweepRow::*field;
    };
    const Metric metrics_list[] = {{"mean_delay", "mean delay (s)", &SweepRow::mean_delay_s},
                                   {"mean_jitter", "mean jitter (s)", &SweepRow::mean_jitter_s},
                                   {"loss_ratio", "end-to-end loss ratio", &SweepRow::e2e_loss_ratio},
                                   {"switch_rate", "path switches per second", &SweepRow::switch_rate}};
    std::map<std::pair<QosGoal, QosGoal>, std::vector<SweepRow>> by_pair;
    for (const auto& r : rows) by_pair[{r.voice_goal, r.background_goal}].push_back(r);
    for (const auto& m : metrics_list) {
      svg::Chart chart;
      chart.title = std::string(m.label) + " vs background rate";
      chart.x_label = "background rate (bps)";
      chart.y_label = m.label;
      chart.log_x = true;
      for (auto& [pair, rs] : by_pair) {
        std::sort(rs.begin(), rs.end(), [](auto& a, auto& b) { return a.rate_bps < b.rate_bps; });
        svg::Series s{"voice " + std::string(to_string(pair.first)) + " / bg " +
                          std::string(to_string(pair.second)),
                      {},
                      {}};
        for (const auto& r : rs) {
          s.x.push_back(r.rate_bps);
          s.y.push_back(r.*(m.field));
        }
        chart.series.push_back(std::move(s));
      }
      const fs::path p = dir / (std::string(m.name) + "_vs_rate.svg");
      svg::write(p, chart);
      written.push_back(p);
    }
    std::vector<fs::path> runs;
    for (const auto& entry : fs::directory_iterator(dir))
      if (entry.is_directory() && fs::exists(entry.path() / "metrics.csv")) runs.push_back(entry.path());
    std::sort(runs.begin(), runs.end());
    for (const auto& run : runs) report_run(run, dir, run.filename().string() + " ", written, table);
  }

  const fs::path tp = dir / "correlation.txt";
  auto out = open_out(tp);
  out << table.str();
  written.push_back(tp);
  return written;
}

}  // namespace cpn::cli
