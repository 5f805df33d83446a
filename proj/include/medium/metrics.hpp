#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "medium/vec2.hpp"

namespace medium::metrics {

inline constexpr std::string_view kMetricsHeader =
    "tick_ms,entity,owner,viewer,truth_x,truth_y,shown_x,shown_y,divergence_m,mode,route";
inline constexpr std::string_view kEventsHeader = "event_seq,owner,viewer,local_playout_ms,remote_playout_ms,diff_ms";

/// Shortest decimal form that parses back to the same double.
std::string format_double(double v);

struct DivergenceRow {
  std::uint64_t tick_ms = 0;
  std::uint32_t entity = 0;
  std::uint32_t owner = 0;
  std::uint32_t viewer = 0;
  Vec2 truth;
  std::optional<Vec2> shown;
  std::string mode;
  std::optional<std::uint32_t> route;
  // Not written to CSV.
  bool converging = false;
  bool in_region = false;

  std::optional<double> divergence() const;
};

struct EventRow {
  std::uint64_t event_seq = 0;
  std::uint32_t owner = 0;
  std::uint32_t viewer = 0;
  std::uint64_t local_playout_ms = 0;
  std::uint64_t remote_playout_ms = 0;

  std::int64_t diff_ms() const {
    return static_cast<std::int64_t>(remote_playout_ms) - static_cast<std::int64_t>(local_playout_ms);
  }
};

void write_metrics_row(std::ostream& out, const DivergenceRow& row);
void write_event_row(std::ostream& out, const EventRow& row);

/// Ordered key=value summary.
class Summary {
 public:
  void set(const std::string& key, double value);
  void set(const std::string& key, std::uint64_t value);
  void set(const std::string& key, const std::string& value);

  std::optional<std::string> get(const std::string& key) const;
  double number(const std::string& key) const;
  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

  void write(std::ostream& out) const;
  static Summary read(std::istream& in);

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

/// Nearest-rank percentile (p in [0,100]) of an unsorted sample.
double percentile(std::vector<double> values, double p);

/// Divergence statistics recomputed from a metrics CSV.
struct CsvDivergence {
  std::uint64_t rows = 0;
  std::uint64_t shown_rows = 0;
  double mean = 0.0;
  double max = 0.0;
};

CsvDivergence divergence_from_csv(std::istream& in, std::optional<std::uint64_t> from = std::nullopt,
                                  std::optional<std::uint64_t> to = std::nullopt);

struct CsvDisplayDiff {
  std::uint64_t events = 0;
  double mean_abs = 0.0;
  double max_abs = 0.0;
};

CsvDisplayDiff display_diff_from_csv(std::istream& in);

struct WindowVerdict {
  std::uint64_t from_ms = 0;
  std::uint64_t to_ms = 0;
  double mean_a = 0.0;
  double mean_b = 0.0;
  std::string winner;  // "a", "b" or "tie" (lower is better)
};

struct CompareReport {
  std::string kind;                                    // "metrics", "events" or "summary"
  std::vector<std::pair<std::string, double>> deltas;  // b - a
  std::vector<WindowVerdict> windows;

  std::optional<double> delta(const std::string& key) const;
  void write(std::ostream& out) const;
};

struct CompareOptions {
  std::uint64_t window_ms = 1000;
  std::optional<std::uint64_t> from;
  std::optional<std::uint64_t> to;
};

/// Compares two metrics CSVs, two event CSVs or two summaries of the same
/// kind. Throws Error(SchemaMismatch) if the headers, tick grids or summary
/// keys differ.
CompareReport compare(const std::filesystem::path& a, const std::filesystem::path& b, const CompareOptions& opts = {});

}  // namespace medium::metrics
