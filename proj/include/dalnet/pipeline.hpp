#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dalnet/config.hpp"
#include "dalnet/data.hpp"
#include "dalnet/diffusion.hpp"
#include "dalnet/metrics.hpp"

namespace dalnet {

namespace fs = std::filesystem;

// Ingests cfg.data, trims to max_days and builds the normalized split.
PreparedData load_prepared(const RunConfig& cfg, IngestReport* ingest = nullptr);

struct TrainSummary {
  TrainReport report;
  std::size_t train_days = 0;
  std::size_t test_days = 0;
  std::size_t parameters = 0;
  Normalizer normalizer;
};

// Writes checkpoint.bin, loss_history.csv, config.json and train_report.txt.
TrainSummary cmd_train(const RunConfig& cfg, const fs::path& out_dir, std::ostream* log = nullptr);

struct GenerateOptions {
  std::optional<Date> first;
  std::optional<Date> last;
};

// Per test day: ensembles/<date>.csv (S x 24, normalized, no header) and
// ensembles/<date>_mw.csv (denormalized). Also actuals.csv, conditions.csv,
// normalizer.csv, config.json and, if enabled, baseline/<date>.csv.
std::vector<Date> cmd_generate(const RunConfig& cfg, const fs::path& checkpoint, const fs::path& out_dir,
                               const GenerateOptions& options = {}, std::ostream* log = nullptr);

// Persistence ensemble: the condition curve plus `count` day-over-day residual
// curves taken evenly from `residuals` (cycled when there are fewer).
EnsembleForecast persistence_ensemble(std::span<const double> condition,
                                      const std::vector<std::vector<double>>& residuals, std::size_t count);

// target - condition for each training pair.
std::vector<std::vector<double>> day_residuals(const std::vector<DaySample>& samples);

struct IntervalMetrics {
  double pinc = 0.0;
  double picp = 0.0;
  double ace = 0.0;
  double signed_ace = 0.0;
  double aw = 0.0;
  double score = 0.0;
};

struct DayForecast {
  std::string date;
  EnsembleForecast ensemble;
  std::vector<double> actual;
};

struct Evaluation {
  std::size_t days = 0;
  std::size_t points = 0;
  double mse = 0.0;
  std::vector<IntervalMetrics> intervals;
  std::vector<double> kl_per_step;  // NaN where a density cannot be formed
  std::vector<DensityEstimate> kde_actual;     // per step, on the shared KL grid
  std::vector<DensityEstimate> kde_generated;  // per step, on the shared KL grid
};

Evaluation evaluate_forecasts(const std::vector<DayForecast>& days, std::span<const double> pincs,
                              std::size_t kde_grid = 512);

std::string metrics_text(const Evaluation& ev, std::optional<std::uint64_t> seed);
std::string metrics_json(const Evaluation& ev, std::optional<std::uint64_t> seed);

// Reads ensembles/<date>.csv for every date in actuals.csv (dates must match
// exactly) and writes metrics.txt, metrics.json, intervals_<pinc>.csv,
// kde.csv and mean_curves.csv. `config_json` is copied in as config.json.
Evaluation cmd_evaluate(const fs::path& ensembles_dir, const fs::path& actuals_csv, std::span<const double> pincs,
                        const fs::path& out_dir, std::size_t kde_grid = 512,
                        const std::optional<std::string>& config_json = std::nullopt);

// Plot-ready files from an evaluation directory: bands_<pinc>.csv,
// mean_vs_actual.csv, kde_curves.csv, and loss_curve.csv when a training
// directory is given.
void cmd_report(const fs::path& metrics_dir, const fs::path& out_dir,
                const std::optional<fs::path>& train_dir = std::nullopt);

// Delimited day tables: header "date,h00..h23", one row per day.
struct DayRow {
  std::string date;
  std::vector<double> values;
};
void write_day_table(const fs::path& path, const std::vector<DayRow>& rows);
std::vector<DayRow> read_day_table(const fs::path& path);

// Header-less numeric matrix.
void write_matrix_csv(const fs::path& path, const std::vector<double>& values, std::size_t cols);
std::vector<std::vector<double>> read_matrix_csv(const fs::path& path);

std::string pinc_tag(double pinc);  // 0.9 -> "90", 0.925 -> "92.5"
std::string format_number(double v);  // round-trip exact
std::string read_file(const fs::path& path);
void write_file(const fs::path& path, const std::string& content);

}  // namespace dalnet
