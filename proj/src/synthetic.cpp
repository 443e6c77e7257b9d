#include "dalnet/synthetic.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include "dalnet/errors.hpp"
#include "dalnet/rng.hpp"

namespace dalnet {

std::vector<LoadRecord> synthetic_load(const SyntheticLoadConfig& cfg) {
  Rng rng(cfg.seed);
  std::vector<LoadRecord> records;
  records.reserve(cfg.days * kHoursPerDay);
  const std::int64_t first_hour = cfg.start.time_since_epoch().count() * 24;
  double amplitude = cfg.mean_amplitude;
  for (std::size_t d = 0; d < cfg.days; ++d) {
    amplitude = cfg.mean_amplitude + cfg.persistence * (amplitude - cfg.mean_amplitude) + cfg.amplitude_noise * rng.normal();
    for (std::size_t h = 0; h < kHoursPerDay; ++h) {
      const double phase = 2.0 * std::numbers::pi * (static_cast<double>(h) - 6.0) / 24.0;
      const double load = cfg.base + amplitude * std::sin(phase) + cfg.point_noise * rng.normal();
      records.push_back({first_hour + static_cast<std::int64_t>(d * kHoursPerDay + h), load});
    }
  }
  return records;
}

void write_load_csv(const std::filesystem::path& path, const std::vector<LoadRecord>& records) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << "timestamp,load\n";
  char buf[64];
  for (const auto& r : records) {
    std::snprintf(buf, sizeof buf, "%s %02d:00,%.6f\n", format_date(r.date()).c_str(), r.hour_of_day(), r.load);
    out << buf;
  }
}

}  // namespace dalnet
