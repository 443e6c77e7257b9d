#pragma once

// Small end-to-end workspace shared by the CLI tests and the acceptance suite.

#include <filesystem>
#include <fstream>
#include <string>

#include "dalnet/config.hpp"
#include "dalnet/synthetic.hpp"

namespace fixture {

namespace fs = std::filesystem;

inline fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("dalnet_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// Writes load.csv (synthetic, `days` days) and a tiny config.json; returns the config path.
inline fs::path tiny_workspace(const fs::path& dir, std::size_t days = 20, std::uint64_t seed = 3) {
  dalnet::SyntheticLoadConfig synth;
  synth.days = days;
  synth.seed = seed;
  dalnet::write_load_csv(dir / "load.csv", dalnet::synthetic_load(synth));
  const auto cfg = dir / "config.json";
  std::ofstream(cfg) << R"({
  "seed": 5,
  "data": {"path": "load.csv"},
  "model": {"hidden": 8, "steps": 50, "head_dim": 4, "temporal_dim": 4,
            "heads": ["global", "window:3", "dilated:2:1"]},
  "train": {"epochs": 2, "batch_size": 8},
  "eval": {"samples": 10, "max_test_days": 2, "threads": 1, "pinc": [0.8, 0.9], "kde_grid": 128}
}
)";
  return cfg;
}

inline std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace fixture
