#include "dalnet/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "dalnet/denoiser.hpp"
#include "dalnet/errors.hpp"

namespace dalnet {

namespace {

// Independent RNG streams carved out of the run seed.
constexpr std::uint64_t kModelInitStream = 1;
constexpr std::uint64_t kTrainStream = 2;
constexpr std::uint64_t kSampleStreamBase = 1ULL << 32;  // + days since epoch

std::vector<std::string> split_line(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, delim)) out.push_back(cell);
  if (!line.empty() && line.back() == delim) out.emplace_back();
  return out;
}

double parse_number(const std::string& text, const std::string& where) {
  double v = 0.0;
  const char* first = text.data();
  const char* last = first + text.size();
  while (first < last && *first == ' ') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || ptr != last || !std::isfinite(v)) {
    throw DataError(where + ": '" + text + "' is not a finite number");
  }
  return v;
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

std::string day_header() {
  std::string h = "date";
  for (std::size_t t = 0; t < kHoursPerDay; ++t) h += (t < 10 ? ",h0" : ",h") + std::to_string(t);
  return h;
}

std::size_t resolve_threads(std::size_t requested) {
  if (requested > 0) return requested;
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

NoiseSchedule schedule_for(const RunConfig& cfg) {
  return NoiseSchedule::build(cfg.model.steps, cfg.diffusion.beta_start, cfg.diffusion.beta_end);
}

std::uint64_t day_seed(std::uint64_t seed, Date d) {
  return Rng::derive(seed, kSampleStreamBase + static_cast<std::uint64_t>(d.time_since_epoch().count()));
}

}  // namespace

std::string format_number(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string pinc_tag(double pinc) {
  const double pct = std::round(pinc * 1e4) / 100.0;
  std::ostringstream ss;
  ss << pct;
  return ss.str();
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << content;
  if (!out) throw DataError("failed writing '" + path.string() + "'");
}

void write_day_table(const fs::path& path, const std::vector<DayRow>& rows) {
  std::string s = day_header() + "\n";
  for (const auto& r : rows) {
    s += r.date;
    for (double v : r.values) s += "," + format_number(v);
    s += "\n";
  }
  write_file(path, s);
}

std::vector<DayRow> read_day_table(const fs::path& path) {
  const auto lines = read_lines(path);
  if (lines.empty()) throw DataError(path.string() + ": empty file");
  std::vector<DayRow> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto cells = split_line(lines[i], ',');
    const std::string where = path.string() + " line " + std::to_string(i + 1);
    if (cells.size() != kHoursPerDay + 1) throw DataError(where + ": expected a date and 24 values");
    if (!parse_date(cells[0])) throw DataError(where + ": bad date '" + cells[0] + "'");
    DayRow row{cells[0], {}};
    for (std::size_t t = 1; t < cells.size(); ++t) row.values.push_back(parse_number(cells[t], where));
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_matrix_csv(const fs::path& path, const std::vector<double>& values, std::size_t cols) {
  std::string s;
  for (std::size_t i = 0; i < values.size(); ++i) {
    s += format_number(values[i]);
    s += (i + 1) % cols == 0 ? "\n" : ",";
  }
  write_file(path, s);
}

std::vector<std::vector<double>> read_matrix_csv(const fs::path& path) {
  std::vector<std::vector<double>> rows;
  const auto lines = read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string where = path.string() + " line " + std::to_string(i + 1);
    std::vector<double> row;
    for (const auto& cell : split_line(lines[i], ',')) row.push_back(parse_number(cell, where));
    if (!rows.empty() && row.size() != rows.front().size()) throw DataError(where + ": ragged row");
    rows.push_back(std::move(row));
  }
  return rows;
}

PreparedData load_prepared(const RunConfig& cfg, IngestReport* ingest) {
  auto series = ingest_csv(cfg.data.path, cfg.data.columns);
  if (ingest != nullptr) *ingest = series.report;
  return prepare_dataset(last_days(series.records, cfg.data.max_days), cfg.data.train_ratio);
}

TrainSummary cmd_train(const RunConfig& cfg, const fs::path& out_dir, std::ostream* log) {
  validate(cfg);
  IngestReport ingest;
  const PreparedData data = load_prepared(cfg, &ingest);
  const auto schedule = schedule_for(cfg);
  DalnetModel model = DalnetModel::init(cfg.model, Rng::derive(cfg.seed, kModelInitStream));

  TrainConfig tc;
  tc.epochs = cfg.train.epochs;
  tc.batch_size = cfg.train.batch_size;
  tc.adam = cfg.train.adam;
  if (log != nullptr) {
    tc.on_epoch = [log, &cfg](int epoch, double loss) {
      *log << "epoch " << epoch << "/" << cfg.train.epochs << " loss " << loss << std::endl;
    };
  }
  Rng rng(Rng::derive(cfg.seed, kTrainStream));
  TrainSummary summary;
  summary.report = train(model, data.split.train, schedule, tc, rng);
  summary.train_days = data.split.train.size();
  summary.test_days = data.split.test.size();
  summary.parameters = model.parameter_count();
  summary.normalizer = data.normalizer;

  fs::create_directories(out_dir);
  save_checkpoint(model, out_dir / "checkpoint.bin");
  std::string history = "epoch,loss\n";
  for (std::size_t e = 0; e < summary.report.epoch_loss.size(); ++e) {
    history += std::to_string(e + 1) + "," + format_number(summary.report.epoch_loss[e]) + "\n";
  }
  write_file(out_dir / "loss_history.csv", history);
  write_file(out_dir / "config.json", config_to_json(cfg));

  std::ostringstream rep;
  rep << "seed=" << cfg.seed << "\n"
      << "preset=" << cfg.preset << "\n"
      << "rows=" << ingest.rows << "\n"
      << "out_of_order_rows=" << ingest.out_of_order << "\n"
      << "gaps=" << ingest.gaps.size() << "\n"
      << "complete_days=" << data.pairs.complete_days << "\n"
      << "dropped_days=" << data.pairs.dropped_days.size() << "\n"
      << "train_pairs=" << summary.train_days << "\n"
      << "test_pairs=" << summary.test_days << "\n"
      << "first_test_day=" << format_date(data.split.test.front().date) << "\n"
      << "last_test_day=" << format_date(data.split.test.back().date) << "\n"
      << "normalizer_min=" << format_number(data.normalizer.min()) << "\n"
      << "normalizer_max=" << format_number(data.normalizer.max()) << "\n"
      << "parameters=" << summary.parameters << "\n"
      << "epochs=" << summary.report.epoch_loss.size() << "\n"
      << "final_loss=" << format_number(summary.report.epoch_loss.back()) << "\n";
  write_file(out_dir / "train_report.txt", rep.str());
  return summary;
}

std::vector<std::vector<double>> day_residuals(const std::vector<DaySample>& samples) {
  std::vector<std::vector<double>> out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    std::vector<double> r(s.target.size());
    for (std::size_t t = 0; t < r.size(); ++t) r[t] = s.target[t] - s.condition[t];
    out.push_back(std::move(r));
  }
  return out;
}

EnsembleForecast persistence_ensemble(std::span<const double> condition,
                                      const std::vector<std::vector<double>>& residuals, std::size_t count) {
  if (count < 2) throw ConfigError("persistence ensemble needs at least 2 members");
  EnsembleForecast e;
  e.members = count;
  e.length = condition.size();
  e.values.reserve(count * condition.size());
  for (std::size_t s = 0; s < count; ++s) {
    // Without residuals the condition is simply repeated.
    const std::vector<double>* r = nullptr;
    if (!residuals.empty()) {
      const auto idx = residuals.size() >= count ? s * residuals.size() / count : s % residuals.size();
      r = &residuals[idx];
      if (r->size() != condition.size()) throw ShapeError("persistence residual length mismatch");
    }
    for (std::size_t t = 0; t < condition.size(); ++t) e.values.push_back(condition[t] + (r ? (*r)[t] : 0.0));
  }
  return e;
}

std::vector<Date> cmd_generate(const RunConfig& cfg, const fs::path& checkpoint, const fs::path& out_dir,
                               const GenerateOptions& options, std::ostream* log) {
  validate(cfg);
  const DalnetModel model = load_checkpoint(checkpoint, cfg.model);
  const PreparedData data = load_prepared(cfg);
  const auto& test = data.split.test;
  const Date test_first = test.front().date;
  const Date test_last = test.back().date;

  std::vector<const DaySample*> chosen;
  if (options.first || options.last) {
    const Date first = options.first.value_or(test_first);
    const Date last = options.last.value_or(options.first ? *options.first : test_last);
    if (last < first) throw ConfigError("date range: last date precedes first date");
    if (first < test_first || last > test_last) {
      throw DataError("date range " + format_date(first) + ".." + format_date(last) + " is outside the test range " +
                      format_date(test_first) + ".." + format_date(test_last));
    }
    for (const auto& s : test) {
      if (s.date >= first && s.date <= last) chosen.push_back(&s);
    }
    if (chosen.empty()) throw DataError("no complete test days in the requested range");
  } else {
    for (const auto& s : test) chosen.push_back(&s);
    if (cfg.eval.max_test_days > 0 && chosen.size() > cfg.eval.max_test_days) chosen.resize(cfg.eval.max_test_days);
  }

  const auto schedule = schedule_for(cfg);
  SamplerOptions so;
  so.threads = resolve_threads(cfg.eval.threads);
  so.clip_x0 = cfg.eval.clip_x0;
  const auto residuals = day_residuals(data.split.train);
  const auto n = kHoursPerDay;

  fs::create_directories(out_dir / "ensembles");
  std::vector<DayRow> actuals, conditions;
  std::vector<Date> dates;
  for (const DaySample* day : chosen) {
    const std::string tag = format_date(day->date);
    if (log != nullptr) *log << "sampling " << tag << " (" << cfg.eval.samples << " curves)" << std::endl;
    const Tensor curves = sample(model, day->condition, schedule, day_seed(cfg.seed, day->date), cfg.eval.samples, so);
    std::vector<double> values(curves.data().begin(), curves.data().end());
    write_matrix_csv(out_dir / "ensembles" / (tag + ".csv"), values, n);
    for (auto& v : values) v = data.normalizer.denormalize(v);
    write_matrix_csv(out_dir / "ensembles" / (tag + "_mw.csv"), values, n);
    if (cfg.eval.persistence_baseline) {
      const auto base = persistence_ensemble(day->condition, residuals, cfg.eval.samples);
      write_matrix_csv(out_dir / "baseline" / (tag + ".csv"), base.values, n);
    }
    actuals.push_back({tag, day->target});
    conditions.push_back({tag, day->condition});
    dates.push_back(day->date);
  }
  write_day_table(out_dir / "actuals.csv", actuals);
  write_day_table(out_dir / "conditions.csv", conditions);
  write_file(out_dir / "normalizer.csv",
             "min,max\n" + format_number(data.normalizer.min()) + "," + format_number(data.normalizer.max()) + "\n");
  write_file(out_dir / "config.json", config_to_json(cfg));
  return dates;
}

Evaluation evaluate_forecasts(const std::vector<DayForecast>& days, std::span<const double> pincs,
                              std::size_t kde_grid) {
  if (days.empty()) throw DataError("nothing to evaluate: no forecast days");
  if (pincs.empty()) throw ConfigError("at least one pinc is required");
  const std::size_t n = days.front().actual.size();
  Evaluation ev;
  ev.days = days.size();
  ev.points = days.size() * n;

  std::vector<double> all_actual;
  double mse_total = 0.0;
  for (const auto& d : days) {
    if (d.actual.size() != n || d.ensemble.length != n) throw ShapeError(d.date + ": curve length mismatch");
    all_actual.insert(all_actual.end(), d.actual.begin(), d.actual.end());
    mse_total += point_mse(d.ensemble, d.actual);
  }
  ev.mse = mse_total / static_cast<double>(days.size());

  for (double pinc : pincs) {
    std::vector<PredictionInterval> parts;
    for (const auto& d : days) parts.push_back(interval_from_ensemble(d.ensemble, pinc));
    const auto pi = concat_intervals(parts);
    const auto cov = picp_ace(pi, all_actual);
    ev.intervals.push_back({pinc, cov.picp, cov.ace, cov.signed_ace, average_width(pi), overall_score(pi, all_actual)});
  }

  const double nan = std::numeric_limits<double>::quiet_NaN();
  ev.kl_per_step.assign(n, nan);
  ev.kde_actual.resize(n);
  ev.kde_generated.resize(n);
  KdeOptions ko;
  ko.grid_points = kde_grid;
  for (std::size_t t = 0; t < n; ++t) {
    std::vector<double> actual, generated;
    for (const auto& d : days) {
      actual.push_back(d.actual[t]);
      const auto col = d.ensemble.column(t);
      generated.insert(generated.end(), col.begin(), col.end());
    }
    try {
      const auto p = kde(actual, ko);
      const auto q = kde(generated, ko);
      const auto grid = union_grid(p, q, kde_grid);
      ev.kde_actual[t] = reevaluate(p, grid);
      ev.kde_generated[t] = reevaluate(q, grid);
      ev.kl_per_step[t] = kl_on_grid(grid, ev.kde_actual[t].density, ev.kde_generated[t].density);
    } catch (const DataError&) {
      // Too few days or zero spread: the density is undefined at this step.
    } catch (const ShapeError&) {
    } catch (const NumericError&) {
      // Supports too far apart to resolve both densities on one grid.
    }
  }
  return ev;
}

std::string metrics_text(const Evaluation& ev, std::optional<std::uint64_t> seed) {
  std::ostringstream s;
  if (seed) s << "seed=" << *seed << "\n";
  s << "days=" << ev.days << "\n"
    << "points=" << ev.points << "\n"
    << "mse=" << format_number(ev.mse) << "\n";
  for (const auto& m : ev.intervals) {
    const std::string p = "pinc_" + pinc_tag(m.pinc) + ".";
    s << p << "pinc=" << format_number(m.pinc) << "\n"
      << p << "picp=" << format_number(m.picp) << "\n"
      << p << "ace=" << format_number(m.ace) << "\n"
      << p << "signed_ace=" << format_number(m.signed_ace) << "\n"
      << p << "aw=" << format_number(m.aw) << "\n"
      << p << "score=" << format_number(m.score) << "\n";
  }
  double kl_sum = 0.0;
  std::size_t kl_n = 0;
  for (std::size_t t = 0; t < ev.kl_per_step.size(); ++t) {
    const double kl = ev.kl_per_step[t];
    s << "kl_step_" << (t < 10 ? "0" : "") << t << "=" << (std::isnan(kl) ? "nan" : format_number(kl)) << "\n";
    if (!std::isnan(kl)) {
      kl_sum += kl;
      ++kl_n;
    }
  }
  s << "kl_mean=" << (kl_n ? format_number(kl_sum / static_cast<double>(kl_n)) : "nan") << "\n";
  return s.str();
}

std::string metrics_json(const Evaluation& ev, std::optional<std::uint64_t> seed) {
  nlohmann::ordered_json j;
  if (seed) j["seed"] = *seed;
  j["days"] = ev.days;
  j["points"] = ev.points;
  j["mse"] = ev.mse;
  j["intervals"] = nlohmann::ordered_json::array();
  for (const auto& m : ev.intervals) {
    nlohmann::ordered_json e;
    e["pinc"] = m.pinc;
    e["picp"] = m.picp;
    e["ace"] = m.ace;
    e["signed_ace"] = m.signed_ace;
    e["aw"] = m.aw;
    e["score"] = m.score;
    j["intervals"].push_back(e);
  }
  j["kl_per_step"] = nlohmann::ordered_json::array();
  for (double kl : ev.kl_per_step) {
    if (std::isnan(kl)) {
      j["kl_per_step"].push_back(nullptr);
    } else {
      j["kl_per_step"].push_back(kl);
    }
  }
  return j.dump(2) + "\n";
}

Evaluation cmd_evaluate(const fs::path& ensembles_dir, const fs::path& actuals_csv, std::span<const double> pincs,
                        const fs::path& out_dir, std::size_t kde_grid, const std::optional<std::string>& config_json) {
  if (!fs::is_directory(ensembles_dir)) throw DataError("ensemble directory not found '" + ensembles_dir.string() + "'");
  const auto actual_rows = read_day_table(actuals_csv);
  if (actual_rows.empty()) throw DataError(actuals_csv.string() + ": no days");

  std::map<std::string, fs::path> ensemble_files;
  for (const auto& entry : fs::directory_iterator(ensembles_dir)) {
    const auto stem = entry.path().stem().string();
    if (entry.path().extension() == ".csv" && parse_date(stem)) ensemble_files[stem] = entry.path();
  }
  std::vector<DayForecast> days;
  for (const auto& row : actual_rows) {
    const auto it = ensemble_files.find(row.date);
    if (it == ensemble_files.end()) throw DataError("date misalignment: no ensemble for actual day " + row.date);
    const auto rows = read_matrix_csv(it->second);
    if (rows.size() < 2 || rows.front().size() != row.values.size()) {
      throw DataError(it->second.string() + ": expected at least 2 rows of " + std::to_string(row.values.size()) +
                      " values");
    }
    EnsembleForecast e;
    e.members = rows.size();
    e.length = rows.front().size();
    for (const auto& r : rows) e.values.insert(e.values.end(), r.begin(), r.end());
    e.date = row.date;
    days.push_back({row.date, std::move(e), row.values});
    ensemble_files.erase(it);
  }
  if (!ensemble_files.empty()) {
    throw DataError("date misalignment: ensemble " + ensemble_files.begin()->first + " has no actual curve");
  }

  const Evaluation ev = evaluate_forecasts(days, pincs, kde_grid);
  std::optional<std::uint64_t> seed;
  if (config_json) {
    const auto j = nlohmann::json::parse(*config_json, nullptr, false);
    if (j.is_object() && j.contains("seed") && j["seed"].is_number_unsigned()) seed = j["seed"].get<std::uint64_t>();
  }

  fs::create_directories(out_dir);
  write_file(out_dir / "metrics.txt", metrics_text(ev, seed));
  write_file(out_dir / "metrics.json", metrics_json(ev, seed));
  if (config_json) write_file(out_dir / "config.json", *config_json);

  for (double pinc : pincs) {
    std::string s = "date,step,lower,upper,actual\n";
    for (const auto& d : days) {
      const auto pi = interval_from_ensemble(d.ensemble, pinc);
      for (std::size_t t = 0; t < d.actual.size(); ++t) {
        s += d.date + "," + std::to_string(t) + "," + format_number(pi.lower[t]) + "," + format_number(pi.upper[t]) +
             "," + format_number(d.actual[t]) + "\n";
      }
    }
    write_file(out_dir / ("intervals_" + pinc_tag(pinc) + ".csv"), s);
  }

  std::string means = "date,step,mean,actual\n";
  for (const auto& d : days) {
    const auto m = d.ensemble.mean_curve();
    for (std::size_t t = 0; t < m.size(); ++t) {
      means += d.date + "," + std::to_string(t) + "," + format_number(m[t]) + "," + format_number(d.actual[t]) + "\n";
    }
  }
  write_file(out_dir / "mean_curves.csv", means);

  std::string k = "step,x,p_actual,q_generated\n";
  for (std::size_t t = 0; t < ev.kde_actual.size(); ++t) {
    const auto& p = ev.kde_actual[t];
    const auto& q = ev.kde_generated[t];
    for (std::size_t i = 0; i < p.grid.size(); ++i) {
      k += std::to_string(t) + "," + format_number(p.grid[i]) + "," + format_number(p.density[i]) + "," +
           format_number(q.density[i]) + "\n";
    }
  }
  write_file(out_dir / "kde.csv", k);
  return ev;
}

void cmd_report(const fs::path& metrics_dir, const fs::path& out_dir, const std::optional<fs::path>& train_dir) {
  const auto require = [](const fs::path& p) {
    if (!fs::is_regular_file(p)) throw DataError("report input missing: '" + p.string() + "'");
    return p;
  };
  // Reads a headed CSV, checks the header, returns the data rows split into cells.
  const auto table = [&](const fs::path& p, const std::string& header) {
    const auto lines = read_lines(require(p));
    if (lines.empty() || lines.front() != header) {
      throw DataError(p.string() + ": expected header '" + header + "'");
    }
    std::vector<std::vector<std::string>> rows;
    const auto cols = split_line(header, ',').size();
    for (std::size_t i = 1; i < lines.size(); ++i) {
      rows.push_back(split_line(lines[i], ','));
      if (rows.back().size() != cols) throw DataError(p.string() + " line " + std::to_string(i + 1) + ": wrong column count");
    }
    return rows;
  };
  const auto timestamp = [](const std::string& date, const std::string& step) {
    const int h = std::stoi(step);
    return date + (h < 10 ? " 0" : " ") + std::to_string(h) + ":00";
  };

  const auto metrics = nlohmann::json::parse(read_file(require(metrics_dir / "metrics.json")), nullptr, false);
  if (!metrics.is_object() || !metrics.contains("intervals")) throw DataError("metrics.json is malformed");

  fs::create_directories(out_dir);
  std::string summary = "pinc,picp,ace,aw,score\n";
  for (const auto& m : metrics["intervals"]) {
    const double pinc = m.at("pinc").get<double>();
    summary += format_number(pinc) + "," + format_number(m.at("picp").get<double>()) + "," +
               format_number(m.at("ace").get<double>()) + "," + format_number(m.at("aw").get<double>()) + "," +
               format_number(m.at("score").get<double>()) + "\n";
    const auto tag = pinc_tag(pinc);
    std::string band = "time,lower,upper,actual\n";
    for (const auto& r : table(metrics_dir / ("intervals_" + tag + ".csv"), "date,step,lower,upper,actual")) {
      band += timestamp(r[0], r[1]) + "," + r[2] + "," + r[3] + "," + r[4] + "\n";
    }
    write_file(out_dir / ("bands_" + tag + ".csv"), band);
  }
  write_file(out_dir / "interval_summary.csv", summary);

  std::string means = "time,mean,actual\n";
  for (const auto& r : table(metrics_dir / "mean_curves.csv", "date,step,mean,actual")) {
    means += timestamp(r[0], r[1]) + "," + r[2] + "," + r[3] + "\n";
  }
  write_file(out_dir / "mean_vs_actual.csv", means);

  std::string k = "step,x,p_actual,q_generated\n";
  for (const auto& r : table(metrics_dir / "kde.csv", "step,x,p_actual,q_generated")) {
    k += r[0] + "," + r[1] + "," + r[2] + "," + r[3] + "\n";
  }
  write_file(out_dir / "kde_curves.csv", k);

  std::string kl = "step,kl\n";
  if (metrics.contains("kl_per_step")) {
    std::size_t t = 0;
    for (const auto& v : metrics["kl_per_step"]) {
      kl += std::to_string(t++) + "," + (v.is_number() ? format_number(v.get<double>()) : std::string("nan")) + "\n";
    }
  }
  write_file(out_dir / "kl_per_step.csv", kl);

  if (train_dir) {
    std::string loss = "epoch,loss\n";
    for (const auto& r : table(*train_dir / "loss_history.csv", "epoch,loss")) loss += r[0] + "," + r[1] + "\n";
    write_file(out_dir / "loss_curve.csv", loss);
  }
  if (fs::is_regular_file(metrics_dir / "config.json")) {
    write_file(out_dir / "config.json", read_file(metrics_dir / "config.json"));
  }
}

}  // namespace dalnet
