#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "dalnet/data.hpp"

namespace dalnet {

/// Hourly toy load whose daily curve is a noisy sinusoid. Day d's amplitude
/// follows an AR(1) around `mean_amplitude`, so the previous day's curve
/// carries the information needed to forecast the next one.
struct SyntheticLoadConfig {
  std::size_t days = 730;
  Date start = Date{std::chrono::year{2008} / 1 / 1};
  double base = 1000.0;
  double mean_amplitude = 300.0;
  double persistence = 0.7;
  double amplitude_noise = 40.0;
  double point_noise = 20.0;
  std::uint64_t seed = 7;
};

std::vector<LoadRecord> synthetic_load(const SyntheticLoadConfig& cfg);

// Writes "timestamp,load" rows with timestamps as "YYYY-MM-DD HH:00".
void write_load_csv(const std::filesystem::path& path, const std::vector<LoadRecord>& records);

}  // namespace dalnet
