#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "medium/error.hpp"
#include "medium/harness.hpp"
#include "medium/metrics.hpp"
#include "support.hpp"

using namespace medium;
using testing::error_of;

namespace {

namespace fs = std::filesystem;

scenario::ScenarioConfig load(const std::string& name, std::uint64_t duration_ms) {
  auto cfg = scenario::load_scenario(std::string(MEDIUM_SCENARIO_DIR) + "/" + name);
  cfg.duration_ms = duration_ms;
  return cfg;
}

struct Captured {
  harness::RunResult result;
  std::string metrics;
  std::string events;
  std::string trace;
};

Captured run(const scenario::ScenarioConfig& cfg, std::optional<std::uint64_t> seed = std::nullopt) {
  std::ostringstream m, e, t;
  harness::RunOptions opts;
  opts.seed = seed;
  opts.metrics = &m;
  opts.events = &e;
  opts.trace = &t;
  Captured c{harness::run(cfg, opts), {}, {}, {}};
  c.metrics = m.str();
  c.events = e.str();
  c.trace = t.str();
  return c;
}

fs::path write_temp(const std::string& name, const std::string& text) {
  const fs::path p = fs::temp_directory_path() / ("medium_test_" + name);
  std::ofstream(p) << text;
  return p;
}

}  // namespace

TEST_CASE("format_double is shortest round-trip") {
  CHECK(metrics::format_double(0.1) == "0.1");
  CHECK(metrics::format_double(1.0) == "1");
  CHECK(metrics::format_double(-2.5) == "-2.5");
  CHECK(std::stod(metrics::format_double(1.0 / 3.0)) == 1.0 / 3.0);
}

TEST_CASE("nearest-rank percentile") {
  const std::vector<double> v{10, 1, 9, 2, 8, 3, 7, 4, 6, 5};
  CHECK(metrics::percentile(v, 50) == 5);
  CHECK(metrics::percentile(v, 99) == 10);
  CHECK(metrics::percentile(v, 100) == 10);
  CHECK(metrics::percentile(v, 10) == 1);
  CHECK(metrics::percentile({}, 50) == 0);
}

TEST_CASE("summary write/read round trip keeps order") {
  metrics::Summary s;
  s.set("b", std::uint64_t{3});
  s.set("a", 0.25);
  s.set("name", std::string("x"));
  s.set("b", std::uint64_t{4});
  std::stringstream io;
  s.write(io);
  CHECK(io.str() == "b=4\na=0.25\nname=x\n");
  const auto r = metrics::Summary::read(io);
  CHECK(r.entries() == s.entries());
  CHECK(r.number("a") == 0.25);
}

TEST_CASE("metrics rows without a shown position leave the fields empty") {
  metrics::DivergenceRow row;
  row.tick_ms = 50;
  row.entity = 1;
  row.owner = 1;
  row.viewer = 2;
  row.truth = {1.5, 0};
  row.mode = "normal";
  std::ostringstream out;
  metrics::write_metrics_row(out, row);
  CHECK(out.str() == "50,1,1,2,1.5,0,,,,normal,none\n");
  row.shown = Vec2{1.5, 2};
  row.route = 3;
  std::ostringstream out2;
  metrics::write_metrics_row(out2, row);
  CHECK(out2.str() == "50,1,1,2,1.5,0,1.5,2,2,normal,3\n");
}

TEST_CASE("summary statistics agree with the written CSVs") {
  const auto c = run(load("drpath.json", 20000));
  CHECK(c.result.ok());
  std::istringstream m(c.metrics);
  const auto d = metrics::divergence_from_csv(m);
  const auto& s = c.result.summary;
  CHECK(std::to_string(d.rows) == *s.get("rows"));
  CHECK(std::to_string(d.shown_rows) == *s.get("shown_rows"));
  CHECK(metrics::format_double(d.mean) == *s.get("mean_divergence_m"));
  CHECK(metrics::format_double(d.max) == *s.get("max_divergence_m"));
  CHECK(d.rows == 20000 / 50 + 1);

  const auto t = run(load("tankshots.json", 12000));
  std::istringstream e(t.events);
  const auto diff = metrics::display_diff_from_csv(e);
  CHECK(std::to_string(diff.events) == *t.result.summary.get("event_rows"));
  CHECK(metrics::format_double(diff.mean_abs) == *t.result.summary.get("mean_abs_display_diff_ms"));
  CHECK(diff.events > 0);
  CHECK(diff.max_abs == 0);
}

TEST_CASE("same seed gives byte-identical output; another seed differs") {
  auto cfg = load("carrace.json", 20000);
  const auto a = run(cfg);
  const auto b = run(cfg);
  CHECK(a.metrics == b.metrics);
  CHECK(a.events == b.events);
  CHECK(a.trace == b.trace);
  const auto c = run(cfg, 12345);
  CHECK(c.trace != a.trace);
  CHECK(*c.result.summary.get("seed") == "12345");
}

TEST_CASE("message conservation holds at the end of a run") {
  const auto c = run(load("carrace.json", 30000));
  const auto& s = c.result.summary;
  CHECK(s.number("sim_sent") == s.number("sim_delivered") + s.number("sim_dropped") + s.number("in_flight"));
  CHECK(s.number("sim_dropped") > 0);
  CHECK(s.number("violations") == 0);
  CHECK(s.number("decode_errors") == 0);
}

TEST_CASE("constant velocity divergence vanishes outside convergence") {
  double worst = 0.0;
  std::size_t settled = 0;
  harness::RunOptions opts;
  opts.on_row = [&](const metrics::DivergenceRow& row) {
    if (!row.shown || row.converging) return;
    ++settled;
    worst = std::max(worst, *row.divergence());
  };
  const auto r = harness::run(load("straight.json", 10000), opts);
  CHECK(r.ok());
  CHECK(settled > 100);
  CHECK(worst <= 1e-9);
}

TEST_CASE("compare") {
  const auto cfg = load("drpath.json", 5000);
  const auto a = run(cfg);
  const auto pa = write_temp("a.csv", a.metrics);
  const auto pb = write_temp("b.csv", a.metrics);
  const auto same = metrics::compare(pa, pb);
  CHECK(same.kind == "metrics");
  for (const auto& [key, value] : same.deltas) CHECK(value == 0);
  CHECK(same.windows.size() == 6);
  for (const auto& w : same.windows) CHECK(w.winner == "tie");

  auto coarse = cfg;
  coarse.tick_ms = 100;
  const auto pc = write_temp("c.csv", run(coarse).metrics);
  CHECK(error_of([&] { metrics::compare(pa, pc); }) == Errc::SchemaMismatch);

  const auto pe = write_temp("e.csv", a.events);
  CHECK(error_of([&] { metrics::compare(pa, pe); }) == Errc::SchemaMismatch);

  std::ostringstream sa;
  a.result.summary.write(sa);
  const auto ps = write_temp("s.txt", sa.str());
  const auto summary = metrics::compare(ps, ps);
  CHECK(summary.kind == "summary");
  CHECK(summary.delta("rows") == 0.0);

  for (const auto& p : {pa, pb, pc, pe, ps}) fs::remove(p);
}

TEST_CASE("invalid configurations are rejected before running") {
  auto cfg = load("drpath.json", 1000);
  cfg.links.clear();
  CHECK(error_of([&] { harness::run(cfg); }) == Errc::ValidationError);
}
