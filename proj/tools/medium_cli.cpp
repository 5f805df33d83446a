// Scenario runner and CSV comparison tool.

#include <CLI11.hpp>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "medium/error.hpp"
#include "medium/harness.hpp"
#include "medium/metrics.hpp"
#include "medium/scenario.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitViolation = 3;

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw medium::Error(medium::Errc::ConfigInvalid, "cannot write " + path);
  return out;
}

int run_scenario(const std::string& scenario_path, std::optional<std::uint64_t> seed, const std::string& out_path,
                 std::string events_path, const std::string& summary_path, const std::string& trace_path) {
  const auto config = medium::scenario::load_scenario(scenario_path);
  if (events_path.empty()) events_path = out_path + ".events.csv";

  auto metrics = open_out(out_path);
  auto events = open_out(events_path);
  std::optional<std::ofstream> trace;
  if (!trace_path.empty()) trace = open_out(trace_path);

  medium::harness::RunOptions opts;
  opts.seed = seed;
  opts.metrics = &metrics;
  opts.events = &events;
  opts.trace = trace ? &*trace : nullptr;
  const auto result = medium::harness::run(config, opts);

  if (!summary_path.empty()) {
    auto summary = open_out(summary_path);
    result.summary.write(summary);
  } else {
    result.summary.write(std::cout);
  }
  for (const auto& v : result.violations) std::cerr << "invariant violation: " << v << '\n';
  return result.ok() ? 0 : kExitViolation;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Consistency medium scenario runner"};
  app.require_subcommand(1);

  std::string scenario_path, out_path, events_path, summary_path, trace_path;
  std::optional<std::uint64_t> seed;
  auto* run = app.add_subcommand("run", "Run a scenario and write per-tick metrics");
  run->add_option("scenario", scenario_path, "Scenario JSON file")->required();
  run->add_option("--seed", seed, "Override the scenario seed");
  run->add_option("--out", out_path, "Metrics CSV output")->required();
  run->add_option("--events", events_path, "Event CSV output (default: <out>.events.csv)");
  run->add_option("--summary", summary_path, "Summary output (default: stdout)");
  run->add_option("--trace", trace_path, "Network event trace output");

  std::string a_path, b_path;
  medium::metrics::CompareOptions cmp;
  auto* compare = app.add_subcommand("compare", "Compare two metrics, event or summary files");
  compare->add_option("a", a_path, "Baseline")->required()->check(CLI::ExistingFile);
  compare->add_option("b", b_path, "Variant")->required()->check(CLI::ExistingFile);
  compare->add_option("--window", cmp.window_ms, "Window length in ms")->check(CLI::PositiveNumber);
  compare->add_option("--from", cmp.from, "Window start (ms, inclusive)");
  compare->add_option("--to", cmp.to, "Window end (ms, exclusive)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitConfig;
  }

  try {
    if (*run) return run_scenario(scenario_path, seed, out_path, events_path, summary_path, trace_path);
    medium::metrics::compare(a_path, b_path, cmp).write(std::cout);
    return 0;
  } catch (const medium::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  }
}
