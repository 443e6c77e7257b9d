// dalnet: train / generate / evaluate / report / synth.
// Exit codes: 0 ok, 2 configuration error, 3 data or checkpoint error, 4 numeric failure.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dalnet/config.hpp"
#include "dalnet/errors.hpp"
#include "dalnet/pipeline.hpp"
#include "dalnet/synthetic.hpp"

namespace {

using namespace dalnet;

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> preset;
  std::string out;
};

void add_common(CLI::App* cmd, CommonFlags& f, bool config_required) {
  auto* c = cmd->add_option("--config", f.config, "JSON run configuration");
  if (config_required) c->required();
  cmd->add_option("--seed", f.seed, "Override the run seed");
  cmd->add_option("--preset", f.preset, "Hyperparameter profile")->check(CLI::IsMember({"paper", "desk"}));
  cmd->add_option("--out", f.out, "Output directory")->required();
}

RunConfig resolve(const CommonFlags& f) {
  RunConfig cfg = load_config(f.config, f.preset);
  if (f.seed) cfg.seed = *f.seed;
  return cfg;
}

Date require_date(const std::string& text, const char* flag) {
  const auto d = parse_date(text);
  if (!d) throw ConfigError(std::string(flag) + ": expected YYYY-MM-DD, got '" + text + "'");
  return *d;
}

int run(int argc, char** argv) {
  CLI::App app{"Day-ahead probabilistic load forecasting with a conditional diffusion model"};
  app.require_subcommand(1);

  CommonFlags train_f;
  auto* train_cmd = app.add_subcommand("train", "Train a model and write checkpoint, loss history and config snapshot");
  add_common(train_cmd, train_f, true);

  CommonFlags gen_f;
  std::string checkpoint, from, to;
  auto* gen_cmd = app.add_subcommand("generate", "Sample S-curve ensembles for test days");
  add_common(gen_cmd, gen_f, true);
  gen_cmd->add_option("--checkpoint", checkpoint, "Trained checkpoint")->required();
  gen_cmd->add_option("--from", from, "First test day (YYYY-MM-DD)");
  gen_cmd->add_option("--to", to, "Last test day (YYYY-MM-DD)");

  CommonFlags eval_f;
  std::string ensembles, actuals;
  std::vector<double> pincs;
  std::size_t kde_grid = 0;
  auto* eval_cmd = app.add_subcommand("evaluate", "Score ensembles against actual curves");
  add_common(eval_cmd, eval_f, false);
  eval_cmd->add_option("--ensembles", ensembles, "Directory of <date>.csv ensembles")->required();
  eval_cmd->add_option("--actuals", actuals, "actuals.csv written by generate")->required();
  eval_cmd->add_option("--pinc", pincs, "Nominal coverage, e.g. 90 or 0.9 (repeatable)");
  eval_cmd->add_option("--kde-grid", kde_grid, "KDE grid points");

  std::string metrics_dir, train_dir, report_out;
  auto* report_cmd = app.add_subcommand("report", "Write plot-ready data files from an evaluation");
  report_cmd->add_option("--metrics", metrics_dir, "Evaluation output directory")->required();
  report_cmd->add_option("--train", train_dir, "Training directory (for the loss curve)");
  report_cmd->add_option("--out", report_out, "Output directory")->required();

  SyntheticLoadConfig synth;
  std::string synth_out;
  std::uint64_t synth_seed = synth.seed;
  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic hourly load CSV");
  synth_cmd->add_option("--out", synth_out, "CSV path")->required();
  synth_cmd->add_option("--days", synth.days, "Number of days")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--seed", synth_seed, "Generator seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (*train_cmd) {
    const auto cfg = resolve(train_f);
    const auto s = cmd_train(cfg, train_f.out, &std::cerr);
    std::cout << "trained " << s.parameters << " parameters on " << s.train_days << " day pairs; final loss "
              << s.report.epoch_loss.back() << "\nwrote " << train_f.out << "\n";
  } else if (*gen_cmd) {
    const auto cfg = resolve(gen_f);
    GenerateOptions opts;
    if (!from.empty()) opts.first = require_date(from, "--from");
    if (!to.empty()) opts.last = require_date(to, "--to");
    const auto days = cmd_generate(cfg, checkpoint, gen_f.out, opts, &std::cerr);
    std::cout << "generated " << days.size() << " day ensembles into " << gen_f.out << "\n";
  } else if (*eval_cmd) {
    std::optional<std::string> snapshot;
    std::vector<double> levels;
    std::size_t grid = 512;
    if (!eval_f.config.empty()) {
      const auto cfg = resolve(eval_f);
      snapshot = config_to_json(cfg);
      levels = cfg.eval.pinc;
      grid = cfg.eval.kde_grid;
    } else {
      // Carry over the snapshot written next to the ensembles, if any.
      const auto candidate = fs::path(ensembles).parent_path() / "config.json";
      if (fs::is_regular_file(candidate)) snapshot = read_file(candidate);
      levels = EvalConfig{}.pinc;
    }
    if (!pincs.empty()) {
      levels.clear();
      for (double p : pincs) levels.push_back(parse_pinc(p));
    }
    if (kde_grid > 0) grid = kde_grid;
    const auto ev = cmd_evaluate(ensembles, actuals, levels, eval_f.out, grid, snapshot);
    std::cout << metrics_text(ev, std::nullopt);
  } else if (*report_cmd) {
    std::optional<fs::path> train;
    if (!train_dir.empty()) train = train_dir;
    cmd_report(metrics_dir, report_out, train);
    std::cout << "wrote " << report_out << "\n";
  } else if (*synth_cmd) {
    synth.seed = synth_seed;
    write_load_csv(synth_out, synthetic_load(synth));
    std::cout << "wrote " << synth.days << " days to " << synth_out << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const dalnet::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const dalnet::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const dalnet::CheckpointError& e) {
    std::cerr << "checkpoint error: " << e.what() << "\n";
    return 3;
  } catch (const dalnet::ShapeError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const dalnet::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
