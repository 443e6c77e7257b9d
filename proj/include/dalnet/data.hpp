#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace dalnet {

inline constexpr std::size_t kHoursPerDay = 24;

using Date = std::chrono::sys_days;

std::string format_date(Date d);
std::optional<Date> parse_date(const std::string& text);

struct ColumnSpec {
  std::string timestamp_column = "timestamp";
  std::string load_column = "load";
  char delimiter = ',';
  // strptime-style format; empty accepts ISO-8601 and "YYYY-MM-DD HH:MM".
  std::string timestamp_format;
  // Readings stamped at the end of their hour (hours 1..24, 00:00 closing the
  // previous day) are shifted back one hour before grouping into days.
  bool hour_ending = false;
};

struct LoadRecord {
  std::int64_t hour = 0;  // hours since 1970-01-01T00:00
  double load = 0.0;

  Date date() const;
  int hour_of_day() const;
};

struct Gap {
  std::int64_t after_hour = 0;
  std::int64_t missing_hours = 0;
};

struct IngestReport {
  std::size_t rows = 0;
  std::size_t out_of_order = 0;  // rows whose timestamp precedes the previous row
  std::vector<Gap> gaps;
};

struct LoadSeries {
  std::vector<LoadRecord> records;
  IngestReport report;
};

// Parses a timestamp (date and hour) into hours since the epoch.
std::optional<std::int64_t> parse_timestamp(const std::string& text, const std::string& format);

LoadSeries ingest_csv(const std::filesystem::path& path, const ColumnSpec& spec);
LoadSeries ingest_csv(std::istream& in, const ColumnSpec& spec);

/// Min-max scaling to [0, 1] over the fitted range.
class Normalizer {
 public:
  Normalizer() = default;
  Normalizer(double min, double max);

  static Normalizer identity() { return Normalizer(0.0, 1.0); }

  double min() const { return min_; }
  double max() const { return max_; }
  double normalize(double x) const { return (x - min_) / (max_ - min_); }
  double denormalize(double x) const { return min_ + x * (max_ - min_); }

  friend bool operator==(const Normalizer&, const Normalizer&) = default;

 private:
  double min_ = 0.0;
  double max_ = 1.0;
};

struct DateRange {
  Date first;
  Date last;  // inclusive
};

// Fits min/max over records whose day falls inside `range`.
Normalizer fit_normalizer(const std::vector<LoadRecord>& records, const DateRange& range);

struct DaySample {
  std::vector<double> condition;  // day d-1, normalized, 24 values
  std::vector<double> target;     // day d, normalized, 24 values
  Date date;                      // day d
};

struct DayPairReport {
  std::size_t complete_days = 0;
  std::vector<Date> dropped_days;  // days with at least one missing hour
};

std::vector<DaySample> make_day_pairs(const std::vector<LoadRecord>& records, const Normalizer& normalizer,
                                      DayPairReport* report = nullptr);

struct Split {
  std::vector<DaySample> train;
  std::vector<DaySample> test;
};

// Chronological split: the first floor(ratio * n) samples train.
Split train_test_split(const std::vector<DaySample>& samples, double train_ratio = 0.8);

// Range of days the training samples read: first condition day to last target day.
DateRange training_range(const std::vector<DaySample>& train);

struct PreparedData {
  Split split;
  Normalizer normalizer;
  DayPairReport pairs;
};

// Pairs, splits, fits the normalizer on the training range only, then
// re-normalizes every sample with it.
PreparedData prepare_dataset(const std::vector<LoadRecord>& records, double train_ratio);

// Keeps the most recent `days` calendar days of records (0 keeps all).
std::vector<LoadRecord> last_days(const std::vector<LoadRecord>& records, std::size_t days);

}  // namespace dalnet
