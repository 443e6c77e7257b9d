#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dalnet/data.hpp"
#include "dalnet/denoiser.hpp"
#include "dalnet/optim.hpp"

namespace dalnet {

struct DataConfig {
  std::filesystem::path path;
  ColumnSpec columns;
  double train_ratio = 0.8;
  std::size_t max_days = 0;  // keep only the most recent days; 0 keeps everything
};

struct DiffusionConfig {
  double beta_start = 1e-4;
  double beta_end = 0.5;
};

struct TrainSettings {
  int epochs = 60;
  std::size_t batch_size = 64;
  AdamConfig adam{};
};

struct EvalConfig {
  std::size_t samples = 100;  // S curves per condition day
  std::vector<double> pinc = {0.8, 0.85, 0.9, 0.95};
  std::size_t max_test_days = 0;  // 0 generates every test day
  std::size_t threads = 0;        // 0 uses the hardware concurrency
  std::size_t kde_grid = 512;
  bool persistence_baseline = true;
  // Clamp range for the sampler's x0 estimate in normalized units; null disables.
  std::optional<std::pair<double, double>> clip_x0 = std::pair{-1.0, 2.0};
};

struct RunConfig {
  std::string preset = "paper";
  std::uint64_t seed = 42;
  DataConfig data;
  DalnetConfig model;
  DiffusionConfig diffusion;
  TrainSettings train;
  EvalConfig eval;
};

// Reduced profile for CPU-scale runs: T=200, 30 epochs of batch 8 at lr 1e-3, S=100,
// two years of data.
void apply_preset(RunConfig& cfg, const std::string& name);

// Reads a JSON config. Relative paths resolve against the file's directory.
// `preset` overrides the file's own "preset" key; the preset is applied before
// the file's explicit values, so the file can still override single fields.
RunConfig load_config(const std::filesystem::path& path, const std::optional<std::string>& preset = std::nullopt);
RunConfig parse_config(const std::string& json_text, const std::filesystem::path& base_dir,
                       const std::optional<std::string>& preset = std::nullopt);

// Accepts 0.9 or 90 for 90%.
double parse_pinc(double value);

// Throws ConfigError naming the field. With `check_paths`, data.path must exist.
void validate(const RunConfig& cfg, bool check_paths = true);

// Canonical JSON snapshot (every field, stable key order).
std::string config_to_json(const RunConfig& cfg);

}  // namespace dalnet
