#include "dalnet/data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "dalnet/errors.hpp"

namespace dalnet {

namespace {

std::int64_t days_since_epoch(Date d) { return d.time_since_epoch().count(); }

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

std::optional<std::int64_t> hours_from_civil(int y, unsigned mo, unsigned d, int h, int mi, int s) {
  using namespace std::chrono;
  const year_month_day ymd{year{y}, month{mo}, day{d}};
  if (!ymd.ok() || h < 0 || h > 24 || mi < 0 || mi > 59 || s < 0 || s > 60) return std::nullopt;
  if (mi != 0 || s != 0) return std::nullopt;  // hourly resolution only
  return days_since_epoch(sys_days{ymd}) * 24 + h;
}

std::string trim(std::string s) {
  const auto issp = [](unsigned char c) { return std::isspace(c) != 0; };
  while (!s.empty() && issp(s.back())) s.pop_back();
  std::size_t i = 0;
  while (i < s.size() && issp(s[i])) ++i;
  s.erase(0, i);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return s;
}

std::vector<std::string> split_line(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, delim)) out.push_back(trim(cell));
  if (!line.empty() && line.back() == delim) out.emplace_back();
  return out;
}

}  // namespace

std::string format_date(Date d) {
  const std::chrono::year_month_day ymd{d};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                static_cast<unsigned>(ymd.day()));
  return buf;
}

std::optional<Date> parse_date(const std::string& text) {
  int y = 0;
  unsigned m = 0, d = 0;
  char tail = 0;
  if (std::sscanf(text.c_str(), "%d-%u-%u%c", &y, &m, &d, &tail) != 3) return std::nullopt;
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
  if (!ymd.ok()) return std::nullopt;
  return Date{ymd};
}

Date LoadRecord::date() const { return Date{std::chrono::days{floor_div(hour, 24)}}; }

int LoadRecord::hour_of_day() const { return static_cast<int>(hour - floor_div(hour, 24) * 24); }

std::optional<std::int64_t> parse_timestamp(const std::string& text, const std::string& format) {
  if (format.empty()) {
    int y = 0, h = 0, mi = 0, s = 0;
    unsigned mo = 0, d = 0;
    char sep = 0;
    int consumed = 0;
    const int got = std::sscanf(text.c_str(), "%d-%u-%u%c%d:%d%n", &y, &mo, &d, &sep, &h, &mi, &consumed);
    if (got != 6 || (sep != 'T' && sep != ' ')) return std::nullopt;
    std::string rest = text.substr(static_cast<std::size_t>(consumed));
    if (!rest.empty() && rest.front() == ':') {
      int used = 0;
      if (std::sscanf(rest.c_str(), ":%d%n", &s, &used) != 1) return std::nullopt;
      rest = rest.substr(static_cast<std::size_t>(used));
    }
    if (!rest.empty() && rest != "Z") return std::nullopt;
    return hours_from_civil(y, mo, d, h, mi, s);
  }
  std::tm tm{};
  std::istringstream is(text);
  is >> std::get_time(&tm, format.c_str());
  if (is.fail()) return std::nullopt;
  is >> std::ws;
  if (!is.eof()) return std::nullopt;
  return hours_from_civil(tm.tm_year + 1900, static_cast<unsigned>(tm.tm_mon + 1), static_cast<unsigned>(tm.tm_mday),
                          tm.tm_hour, tm.tm_min, tm.tm_sec);
}

LoadSeries ingest_csv(const std::filesystem::path& path, const ColumnSpec& spec) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open data file '" + path.string() + "'");
  try {
    return ingest_csv(in, spec);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

LoadSeries ingest_csv(std::istream& in, const ColumnSpec& spec) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) {
      header = split_line(line, spec.delimiter);
      break;
    }
  }
  if (header.empty()) throw DataError("empty file: no header row");
  auto column = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw DataError("header has no column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  const auto ts_col = column(spec.timestamp_column);
  const auto load_col = column(spec.load_column);

  LoadSeries series;
  std::vector<std::size_t> lines;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const auto cells = split_line(line, spec.delimiter);
    const auto where = "line " + std::to_string(line_no);
    if (cells.size() <= std::max(ts_col, load_col)) throw DataError(where + ": too few columns");
    auto hour = parse_timestamp(cells[ts_col], spec.timestamp_format);
    if (!hour) throw DataError(where + ": cannot parse timestamp '" + cells[ts_col] + "'");
    if (spec.hour_ending) *hour -= 1;
    const std::string& text = cells[load_col];
    char* end = nullptr;
    const double load = std::strtod(text.c_str(), &end);
    if (text.empty() || end != text.c_str() + text.size() || !std::isfinite(load)) {
      throw DataError(where + ": load value '" + text + "' is not a finite number");
    }
    if (!series.records.empty() && *hour < series.records.back().hour) ++series.report.out_of_order;
    series.records.push_back({*hour, load});
    lines.push_back(line_no);
  }
  if (series.records.empty()) throw DataError("empty file: no data rows");
  series.report.rows = series.records.size();

  std::vector<std::size_t> order(series.records.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return series.records[a].hour < series.records[b].hour; });
  std::vector<LoadRecord> sorted;
  sorted.reserve(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto& r = series.records[order[i]];
    if (!sorted.empty() && sorted.back().hour == r.hour) {
      throw DataError("line " + std::to_string(lines[order[i]]) + ": duplicate timestamp (also on line " +
                      std::to_string(lines[order[i - 1]]) + ")");
    }
    if (!sorted.empty() && r.hour - sorted.back().hour > 1) {
      series.report.gaps.push_back({sorted.back().hour, r.hour - sorted.back().hour - 1});
    }
    sorted.push_back(r);
  }
  series.records = std::move(sorted);
  return series;
}

Normalizer::Normalizer(double min, double max) : min_(min), max_(max) {
  if (!(max > min)) throw DataError("normalizer needs max > min (constant series?)");
}

Normalizer fit_normalizer(const std::vector<LoadRecord>& records, const DateRange& range) {
  double lo = INFINITY, hi = -INFINITY;
  std::size_t n = 0;
  for (const auto& r : records) {
    const auto d = r.date();
    if (d < range.first || d > range.last) continue;
    lo = std::min(lo, r.load);
    hi = std::max(hi, r.load);
    ++n;
  }
  if (n == 0) throw DataError("normalizer training range " + format_date(range.first) + ".." + format_date(range.last) + " holds no records");
  if (!(hi > lo)) throw DataError("cannot normalize a constant series (min == max == " + std::to_string(lo) + ")");
  return Normalizer(lo, hi);
}

std::vector<DaySample> make_day_pairs(const std::vector<LoadRecord>& records, const Normalizer& normalizer,
                                      DayPairReport* report) {
  struct Day {
    std::array<double, kHoursPerDay> load{};
    std::array<bool, kHoursPerDay> seen{};
    std::size_t count = 0;
  };
  std::map<std::int64_t, Day> days;
  for (const auto& r : records) {
    auto& day = days[days_since_epoch(r.date())];
    const auto h = static_cast<std::size_t>(r.hour_of_day());
    if (!day.seen[h]) ++day.count;
    day.seen[h] = true;
    day.load[h] = r.load;
  }
  if (days.size() < 2) throw DataError("need at least 2 days of data to form day pairs, got " + std::to_string(days.size()));

  DayPairReport local;
  std::vector<DaySample> samples;
  const Day* prev = nullptr;
  std::int64_t prev_key = 0;
  for (const auto& [key, day] : days) {
    if (day.count != kHoursPerDay) {
      local.dropped_days.push_back(Date{std::chrono::days{key}});
      prev = nullptr;
      continue;
    }
    ++local.complete_days;
    if (prev && prev_key + 1 == key) {
      DaySample s;
      s.date = Date{std::chrono::days{key}};
      s.condition.resize(kHoursPerDay);
      s.target.resize(kHoursPerDay);
      for (std::size_t h = 0; h < kHoursPerDay; ++h) {
        s.condition[h] = normalizer.normalize(prev->load[h]);
        s.target[h] = normalizer.normalize(day.load[h]);
      }
      samples.push_back(std::move(s));
    }
    prev = &day;
    prev_key = key;
  }
  if (report) *report = std::move(local);
  return samples;
}

Split train_test_split(const std::vector<DaySample>& samples, double train_ratio) {
  if (!(train_ratio > 0.0 && train_ratio < 1.0)) throw ConfigError("data.train_ratio must be in (0, 1)");
  if (samples.size() < 5) {
    throw DataError("need at least 5 day pairs to split, got " + std::to_string(samples.size()));
  }
  const auto n_train = static_cast<std::size_t>(std::floor(train_ratio * static_cast<double>(samples.size())));
  if (n_train == 0 || n_train == samples.size()) throw DataError("split leaves an empty train or test set");
  Split split;
  split.train.assign(samples.begin(), samples.begin() + static_cast<std::ptrdiff_t>(n_train));
  split.test.assign(samples.begin() + static_cast<std::ptrdiff_t>(n_train), samples.end());
  return split;
}

DateRange training_range(const std::vector<DaySample>& train) {
  if (train.empty()) throw DataError("empty training set");
  return {train.front().date - std::chrono::days{1}, train.back().date};
}

PreparedData prepare_dataset(const std::vector<LoadRecord>& records, double train_ratio) {
  const auto raw = make_day_pairs(records, Normalizer::identity());
  const auto raw_split = train_test_split(raw, train_ratio);
  PreparedData out;
  out.normalizer = fit_normalizer(records, training_range(raw_split.train));
  out.split = train_test_split(make_day_pairs(records, out.normalizer, &out.pairs), train_ratio);
  return out;
}

std::vector<LoadRecord> last_days(const std::vector<LoadRecord>& records, std::size_t days) {
  if (days == 0 || records.empty()) return records;
  const Date cutoff = records.back().date() - std::chrono::days{static_cast<std::int64_t>(days) - 1};
  std::vector<LoadRecord> out;
  for (const auto& r : records) {
    if (r.date() >= cutoff) out.push_back(r);
  }
  return out;
}

}  // namespace dalnet
