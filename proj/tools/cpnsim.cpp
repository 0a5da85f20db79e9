// cpnsim: run, sweep, report and validate CPN simulations.
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cpn/config.hpp"
#include "cpn/experiment.hpp"

namespace fs = std::filesystem;
using namespace cpn;

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kRuntimeError = 2;

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<double> duration;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c, bool with_out = true) {
  cmd->add_option("--config", c.config_path, "INI configuration file");
  cmd->add_option("--seed", c.seed, "RNG seed");
  cmd->add_option("--duration", c.duration, "Simulated seconds")->check(CLI::PositiveNumber);
  if (with_out) cmd->add_option("--out", c.out, "Output directory");
}

cli::RunConfig resolve(const Common& c) {
  cli::RunConfig cfg = c.config_path.empty() ? cli::RunConfig{} : cli::load_config(c.config_path);
  if (c.seed) cfg.sim.seed = *c.seed;
  if (c.duration) cfg.sim.duration_s = *c.duration;
  return cfg;
}

fs::path output_dir(const Common& c, const cli::RunConfig& cfg) {
  if (!c.out.empty()) return c.out;
  if (!cfg.out_dir.empty()) return cfg.out_dir;
  if (const char* env = std::getenv("CPN_OUT_DIR"); env && *env) return env;
  return "cpn_out";
}

std::vector<double> parse_rates(const std::string& text) {
  std::vector<double> rates;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto comma = text.find(',', pos);
    std::string item = text.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    if (item.empty()) throw cli::ConfigError("--rates", 0, "empty rate");
    double scale = 1.0;
    switch (item.back()) {
      case 'k': case 'K': scale = 1e3; item.pop_back(); break;
      case 'M': case 'm': scale = 1e6; item.pop_back(); break;
      case 'G': case 'g': scale = 1e9; item.pop_back(); break;
      default: break;
    }
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size()) throw cli::ConfigError("--rates", 0, "bad rate '" + item + "'");
    if (!(v > 0.0)) throw cli::ConfigError("--rates", 0, "rates must be positive");
    rates.push_back(v * scale);
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return rates;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cognitive packet network simulator"};
  app.require_subcommand(1);

  Common run_opts, sweep_opts, validate_opts;
  std::string rates_text, report_dir;
  unsigned workers = 1;

  auto* run = app.add_subcommand("run", "Run one simulation and write its artifacts");
  add_common(run, run_opts);
  auto* sweep = app.add_subcommand("sweep", "Run every background rate under every goal pair");
  add_common(sweep, sweep_opts);
  sweep->add_option("--rates", rates_text, "Comma-separated rates in bps (k/M suffixes allowed)");
  sweep->add_option("--jobs", workers, "Parallel simulations")->check(CLI::PositiveNumber);
  auto* rep = app.add_subcommand("report", "Plot and correlate existing run or sweep artifacts");
  rep->add_option("--out", report_dir, "Artifact directory");
  auto* validate = app.add_subcommand("validate", "Check a configuration without running it");
  add_common(validate, validate_opts, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kConfigError;
  }

  try {
    if (run->parsed()) {
      const auto cfg = resolve(run_opts);
      const auto dir = output_dir(run_opts, cfg);
      const auto result = cli::run_single(cfg, dir);
      std::cout << "wrote " << dir.string() << " (" << result.events << " events)\n";
    } else if (sweep->parsed()) {
      const auto cfg = resolve(sweep_opts);
      const auto rates = rates_text.empty() ? cli::standard_rates() : parse_rates(rates_text);
      const auto dir = output_dir(sweep_opts, cfg);
      const auto rows = cli::run_sweep(cfg, rates, dir, workers);
      std::cout << "wrote " << rows.size() << " rows to " << (dir / "sweep_summary.csv").string() << "\n";
    } else if (rep->parsed()) {
      fs::path dir = report_dir;
      if (dir.empty()) {
        const char* env = std::getenv("CPN_OUT_DIR");
        dir = env && *env ? fs::path(env) : fs::path("cpn_out");
      }
      for (const auto& p : cli::report(dir)) std::cout << p.string() << "\n";
    } else if (validate->parsed()) {
      const auto cfg = resolve(validate_opts);
      const auto sc = cli::build_scenario(cfg);
      std::cout << "ok: " << sc.topology.nodes().size() << " nodes, " << sc.topology.links().size()
                << " links, " << sc.flows.size() << " flows\n";
    }
  } catch (const cli::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
  return kOk;
}
