#include "medium/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "medium/error.hpp"

namespace medium::metrics {

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return ec == std::errc{} ? std::string(buf, end) : std::string("nan");
}

std::optional<double> DivergenceRow::divergence() const {
  if (!shown) return std::nullopt;
  return distance(truth, *shown);
}

void write_metrics_row(std::ostream& out, const DivergenceRow& row) {
  out << row.tick_ms << ',' << row.entity << ',' << row.owner << ',' << row.viewer << ',' << format_double(row.truth.x)
      << ',' << format_double(row.truth.y) << ',';
  if (row.shown) {
    out << format_double(row.shown->x) << ',' << format_double(row.shown->y) << ',' << format_double(*row.divergence());
  } else {
    out << ",,";
  }
  out << ',' << row.mode << ',';
  if (row.route) {
    out << *row.route;
  } else {
    out << "none";
  }
  out << '\n';
}

void write_event_row(std::ostream& out, const EventRow& row) {
  out << row.event_seq << ',' << row.owner << ',' << row.viewer << ',' << row.local_playout_ms << ','
      << row.remote_playout_ms << ',' << row.diff_ms() << '\n';
}

void Summary::set(const std::string& key, double value) { set(key, format_double(value)); }
void Summary::set(const std::string& key, std::uint64_t value) { set(key, std::to_string(value)); }

void Summary::set(const std::string& key, const std::string& value) {
  auto it = std::find_if(entries_.begin(), entries_.end(), [&](const auto& kv) { return kv.first == key; });
  if (it != entries_.end()) {
    it->second = value;
  } else {
    entries_.emplace_back(key, value);
  }
}

std::optional<std::string> Summary::get(const std::string& key) const {
  for (const auto& [k, v] : entries_) {
    if (k == key) return v;
  }
  return std::nullopt;
}

double Summary::number(const std::string& key) const {
  auto v = get(key);
  if (!v) throw Error(Errc::SchemaMismatch, "summary has no key '" + key + "'");
  double d = 0.0;
  auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), d);
  if (ec != std::errc{}) throw Error(Errc::SchemaMismatch, "summary key '" + key + "' is not numeric");
  return d;
}

void Summary::write(std::ostream& out) const {
  for (const auto& [k, v] : entries_) out << k << '=' << v << '\n';
}

Summary Summary::read(std::istream& in) {
  Summary s;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw Error(Errc::SchemaMismatch, "summary line without '=': " + line);
    s.entries_.emplace_back(line.substr(0, eq), line.substr(eq + 1));
  }
  return s;
}

double percentile(std::vector<double> values, double p) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const double rank = std::ceil(p / 100.0 * static_cast<double>(values.size()));
  const std::size_t idx = rank < 1.0 ? 0 : static_cast<std::size_t>(rank) - 1;
  return values[std::min(idx, values.size() - 1)];
}

namespace {

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

template <typename T>
T parse_number(std::string_view s) {
  T v{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw Error(Errc::SchemaMismatch, "bad number '" + std::string(s) + "'");
  }
  return v;
}

std::string read_header(std::istream& in) {
  std::string header;
  std::getline(in, header);
  return header;
}

struct MetricsFile {
  std::set<std::uint64_t> ticks;
  // (tick -> divergences of rows that had a shown position)
  std::map<std::uint64_t, std::vector<double>> by_tick;
};

MetricsFile load_metrics(std::istream& in) {
  MetricsFile f;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto cols = split(line);
    if (cols.size() != 11)
      throw Error(Errc::SchemaMismatch, "metrics row with " + std::to_string(cols.size()) + " columns");
    const auto tick = parse_number<std::uint64_t>(cols[0]);
    f.ticks.insert(tick);
    auto& bucket = f.by_tick[tick];
    if (!cols[8].empty()) bucket.push_back(parse_number<double>(cols[8]));
  }
  return f;
}

double mean_in(const MetricsFile& f, std::uint64_t from, std::uint64_t to, std::size_t* n = nullptr) {
  double sum = 0.0;
  std::size_t count = 0;
  for (auto it = f.by_tick.lower_bound(from); it != f.by_tick.end() && it->first < to; ++it) {
    for (double d : it->second) {
      sum += d;
      ++count;
    }
  }
  if (n) *n = count;
  return count == 0 ? 0.0 : sum / static_cast<double>(count);
}

double max_in(const MetricsFile& f, std::uint64_t from, std::uint64_t to) {
  double m = 0.0;
  for (auto it = f.by_tick.lower_bound(from); it != f.by_tick.end() && it->first < to; ++it) {
    for (double d : it->second) m = std::max(m, d);
  }
  return m;
}

std::ifstream open(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw Error(Errc::SchemaMismatch, "cannot read " + p.string());
  return in;
}

}  // namespace

CsvDivergence divergence_from_csv(std::istream& in, std::optional<std::uint64_t> from,
                                  std::optional<std::uint64_t> to) {
  if (read_header(in) != kMetricsHeader) throw Error(Errc::SchemaMismatch, "not a metrics CSV");
  CsvDivergence out;
  double sum = 0.0;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto cols = split(line);
    if (cols.size() != 11) throw Error(Errc::SchemaMismatch, "metrics row with wrong column count");
    const auto tick = parse_number<std::uint64_t>(cols[0]);
    if ((from && tick < *from) || (to && tick >= *to)) continue;
    ++out.rows;
    if (cols[8].empty()) continue;
    const double d = parse_number<double>(cols[8]);
    ++out.shown_rows;
    sum += d;
    out.max = std::max(out.max, d);
  }
  out.mean = out.shown_rows == 0 ? 0.0 : sum / static_cast<double>(out.shown_rows);
  return out;
}

CsvDisplayDiff display_diff_from_csv(std::istream& in) {
  if (read_header(in) != kEventsHeader) throw Error(Errc::SchemaMismatch, "not an event CSV");
  CsvDisplayDiff out;
  double sum = 0.0;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto cols = split(line);
    if (cols.size() != 6) throw Error(Errc::SchemaMismatch, "event row with wrong column count");
    const double d = std::fabs(static_cast<double>(parse_number<long long>(cols[5])));
    ++out.events;
    sum += d;
    out.max_abs = std::max(out.max_abs, d);
  }
  out.mean_abs = out.events == 0 ? 0.0 : sum / static_cast<double>(out.events);
  return out;
}

std::optional<double> CompareReport::delta(const std::string& key) const {
  for (const auto& [k, v] : deltas) {
    if (k == key) return v;
  }
  return std::nullopt;
}

void CompareReport::write(std::ostream& out) const {
  out << "kind=" << kind << '\n';
  for (const auto& [k, v] : deltas) out << "delta." << k << '=' << format_double(v) << '\n';
  for (const auto& w : windows) {
    out << "window." << w.from_ms << '-' << w.to_ms << '=' << w.winner << " a=" << format_double(w.mean_a)
        << " b=" << format_double(w.mean_b) << '\n';
  }
}

CompareReport compare(const std::filesystem::path& a, const std::filesystem::path& b, const CompareOptions& opts) {
  auto in_a = open(a);
  auto in_b = open(b);
  const std::string header_a = read_header(in_a);
  const std::string header_b = read_header(in_b);

  CompareReport report;
  if (header_a == kMetricsHeader || header_b == kMetricsHeader) {
    if (header_a != header_b) throw Error(Errc::SchemaMismatch, "metrics header differs");
    report.kind = "metrics";
    const MetricsFile fa = load_metrics(in_a);
    const MetricsFile fb = load_metrics(in_b);
    if (fa.ticks != fb.ticks) throw Error(Errc::SchemaMismatch, "tick grids differ");
    const std::uint64_t lo = opts.from.value_or(0);
    const std::uint64_t hi = opts.to.value_or(fa.ticks.empty() ? 0 : *fa.ticks.rbegin() + 1);
    std::size_t na = 0, nb = 0;
    const double ma = mean_in(fa, lo, hi, &na);
    const double mb = mean_in(fb, lo, hi, &nb);
    report.deltas.emplace_back("mean_divergence_m", mb - ma);
    report.deltas.emplace_back("max_divergence_m", max_in(fb, lo, hi) - max_in(fa, lo, hi));
    report.deltas.emplace_back("shown_rows", static_cast<double>(nb) - static_cast<double>(na));
    const std::uint64_t step = std::max<std::uint64_t>(opts.window_ms, 1);
    for (std::uint64_t w = lo - lo % step; w < hi; w += step) {
      WindowVerdict v{w, w + step, mean_in(fa, std::max(w, lo), std::min(w + step, hi)),
                      mean_in(fb, std::max(w, lo), std::min(w + step, hi)), "tie"};
      if (v.mean_a < v.mean_b) v.winner = "a";
      if (v.mean_b < v.mean_a) v.winner = "b";
      report.windows.push_back(v);
    }
    return report;
  }
  if (header_a == kEventsHeader || header_b == kEventsHeader) {
    if (header_a != header_b) throw Error(Errc::SchemaMismatch, "event header differs");
    report.kind = "events";
    auto ia = open(a);
    auto ib = open(b);
    const auto da = display_diff_from_csv(ia);
    const auto db = display_diff_from_csv(ib);
    report.deltas.emplace_back("mean_abs_display_diff_ms", db.mean_abs - da.mean_abs);
    report.deltas.emplace_back("max_abs_display_diff_ms", db.max_abs - da.max_abs);
    report.deltas.emplace_back("events", static_cast<double>(db.events) - static_cast<double>(da.events));
    return report;
  }

  auto ia = open(a);
  auto ib = open(b);
  const Summary sa = Summary::read(ia);
  const Summary sb = Summary::read(ib);
  if (sa.entries().size() != sb.entries().size()) throw Error(Errc::SchemaMismatch, "summary keys differ");
  report.kind = "summary";
  for (std::size_t i = 0; i < sa.entries().size(); ++i) {
    const auto& key = sa.entries()[i].first;
    if (sb.entries()[i].first != key) throw Error(Errc::SchemaMismatch, "summary keys differ at '" + key + "'");
    double va = 0.0, vb = 0.0;
    const auto& ta = sa.entries()[i].second;
    const auto& tb = sb.entries()[i].second;
    auto ra = std::from_chars(ta.data(), ta.data() + ta.size(), va);
    auto rb = std::from_chars(tb.data(), tb.data() + tb.size(), vb);
    if (ra.ec == std::errc{} && rb.ec == std::errc{}) report.deltas.emplace_back(key, vb - va);
  }
  return report;
}

}  // namespace medium::metrics
