#include "dalnet/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "dalnet/errors.hpp"

namespace dalnet {

namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

// Reads typed fields out of one JSON object and rejects keys nobody asked for.
class Section {
 public:
  Section(const json& node, std::string name) : node_(node), name_(std::move(name)) {
    if (!node_.is_object()) throw ConfigError(field_name("") + " must be an object");
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return node_.contains(key);
  }

  template <typename T>
  void read(const std::string& key, T& out) {
    if (!has(key)) return;
    const json& v = node_.at(key);
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw ConfigError("expected true/false");
        out = v.get<bool>();
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) throw ConfigError("expected a string");
        out = v.get<std::string>();
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v.is_number()) throw ConfigError("expected a number");
        out = v.get<T>();
      } else if constexpr (std::is_unsigned_v<T>) {
        if (!v.is_number_unsigned()) throw ConfigError("expected a non-negative integer");
        out = v.get<T>();
      } else {
        if (!v.is_number_integer()) throw ConfigError("expected an integer");
        out = v.get<T>();
      }
    } catch (const ConfigError& e) {
      throw ConfigError(field_name(key) + ": " + e.what());
    }
  }

  const json& child(const std::string& key) {
    seen_.insert(key);
    return node_.at(key);
  }

  void reject_unknown() const {
    for (const auto& [key, value] : node_.items()) {
      if (!seen_.count(key)) throw ConfigError("unknown config key '" + field_name(key) + "'");
    }
  }

  std::string field_name(const std::string& key) const {
    if (name_.empty()) return key;
    return key.empty() ? name_ : name_ + "." + key;
  }

 private:
  const json& node_;
  std::string name_;
  std::set<std::string> seen_;
};

void read_data(Section s, DataConfig& d, const std::filesystem::path& base_dir) {
  std::string path;
  s.read("path", path);
  if (!path.empty()) {
    const std::filesystem::path p(path);
    d.path = p.is_absolute() ? p : (base_dir / p).lexically_normal();
  }
  s.read("timestamp_column", d.columns.timestamp_column);
  s.read("load_column", d.columns.load_column);
  std::string delim(1, d.columns.delimiter);
  s.read("delimiter", delim);
  if (delim.size() != 1) throw ConfigError("data.delimiter must be a single character");
  d.columns.delimiter = delim[0];
  s.read("timestamp_format", d.columns.timestamp_format);
  s.read("hour_ending", d.columns.hour_ending);
  s.read("train_ratio", d.train_ratio);
  s.read("max_days", d.max_days);
  s.reject_unknown();
}

void read_model(Section s, DalnetConfig& m, DiffusionConfig& diff) {
  s.read("hidden", m.hidden);
  s.read("seq_len", m.seq_len);
  s.read("steps", m.steps);
  s.read("beta_start", diff.beta_start);
  s.read("beta_end", diff.beta_end);
  s.read("head_dim", m.head_dim);
  s.read("temporal_dim", m.temporal_dim);
  s.read("condition_layers", m.condition_layers);
  s.read("head_kernel", m.head_kernel);
  s.read("dropout", m.dropout);
  if (s.has("heads")) {
    const json& heads = s.child("heads");
    if (!heads.is_array() || heads.empty()) throw ConfigError("model.heads must be a non-empty list of mask specs");
    m.heads.clear();
    for (const auto& h : heads) {
      if (!h.is_string()) throw ConfigError("model.heads entries must be strings like \"window:3\"");
      try {
        m.heads.push_back(MaskSpec::parse(h.get<std::string>()));
      } catch (const ConfigError& e) {
        throw ConfigError(std::string("model.heads: ") + e.what());
      }
    }
  }
  s.reject_unknown();
}

void read_train(Section s, TrainSettings& t) {
  s.read("epochs", t.epochs);
  s.read("batch_size", t.batch_size);
  s.read("lr", t.adam.lr);
  s.read("beta1", t.adam.beta1);
  s.read("beta2", t.adam.beta2);
  s.read("eps", t.adam.eps);
  s.reject_unknown();
}

void read_eval(Section s, EvalConfig& e) {
  s.read("samples", e.samples);
  if (s.has("pinc")) {
    const json& list = s.child("pinc");
    if (!list.is_array() || list.empty()) throw ConfigError("eval.pinc must be a non-empty list of numbers");
    e.pinc.clear();
    for (const auto& v : list) {
      if (!v.is_number()) throw ConfigError("eval.pinc entries must be numbers");
      e.pinc.push_back(parse_pinc(v.get<double>()));
    }
  }
  s.read("max_test_days", e.max_test_days);
  s.read("threads", e.threads);
  s.read("kde_grid", e.kde_grid);
  s.read("persistence_baseline", e.persistence_baseline);
  if (s.has("clip_x0")) {
    const json* v = &s.child("clip_x0");
    if (v->is_null() || (v->is_boolean() && !v->get<bool>())) {
      e.clip_x0.reset();
    } else if (v->is_array() && v->size() == 2 && (*v)[0].is_number() && (*v)[1].is_number()) {
      e.clip_x0 = std::pair{(*v)[0].get<double>(), (*v)[1].get<double>()};
    } else {
      throw ConfigError("eval.clip_x0 must be null, false or [lo, hi]");
    }
  }
  s.reject_unknown();
}

}  // namespace

void apply_preset(RunConfig& cfg, const std::string& name) {
  if (name == "paper") {
    cfg.preset = name;
    return;
  }
  if (name != "desk") throw ConfigError("preset must be 'paper' or 'desk', got '" + name + "'");
  cfg.preset = name;
  cfg.model.steps = 200;
  cfg.train.epochs = 30;
  // Thirty epochs of 64-day batches is too few optimizer steps on two years of data.
  cfg.train.batch_size = 8;
  cfg.train.adam.lr = 1e-3;
  cfg.eval.samples = 100;
  cfg.data.max_days = 730;
}

double parse_pinc(double value) {
  const double p = value > 1.0 ? value / 100.0 : value;
  if (!(p > 0.0 && p < 1.0)) throw ConfigError("pinc must lie in (0, 1) or (1, 100) percent, got " + std::to_string(value));
  return p;
}

RunConfig parse_config(const std::string& json_text, const std::filesystem::path& base_dir,
                       const std::optional<std::string>& preset) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  Section top(root, "");
  RunConfig cfg;
  std::string file_preset = "paper";
  top.read("preset", file_preset);
  apply_preset(cfg, preset.value_or(file_preset));
  top.read("seed", cfg.seed);
  if (top.has("data")) read_data(Section(top.child("data"), "data"), cfg.data, base_dir);
  if (top.has("model")) read_model(Section(top.child("model"), "model"), cfg.model, cfg.diffusion);
  if (top.has("train")) read_train(Section(top.child("train"), "train"), cfg.train);
  if (top.has("eval")) read_eval(Section(top.child("eval"), "eval"), cfg.eval);
  top.reject_unknown();
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path, const std::optional<std::string>& preset) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot read '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), std::filesystem::absolute(path).parent_path(), preset);
}

void validate(const RunConfig& cfg, bool check_paths) {
  if (cfg.data.path.empty()) throw ConfigError("data.path is required");
  if (check_paths && !std::filesystem::is_regular_file(cfg.data.path)) {
    throw ConfigError("data.path: file not found '" + cfg.data.path.string() + "'");
  }
  if (!(cfg.data.train_ratio > 0.0 && cfg.data.train_ratio < 1.0)) throw ConfigError("data.train_ratio must be in (0, 1)");
  if (cfg.data.columns.timestamp_column.empty()) throw ConfigError("data.timestamp_column must not be empty");
  if (cfg.data.columns.load_column.empty()) throw ConfigError("data.load_column must not be empty");
  cfg.model.validate();
  if (cfg.model.seq_len != kHoursPerDay) throw ConfigError("model.seq_len must be 24 (hourly day curves)");
  if (!(cfg.diffusion.beta_start > 0.0 && cfg.diffusion.beta_start < cfg.diffusion.beta_end &&
        cfg.diffusion.beta_end < 1.0)) {
    throw ConfigError("model.beta_start/beta_end must satisfy 0 < beta_start < beta_end < 1");
  }
  if (cfg.train.epochs < 1) throw ConfigError("train.epochs must be >= 1");
  if (cfg.train.batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (!(cfg.train.adam.lr >= 0.0)) throw ConfigError("train.lr must be >= 0");
  if (!(cfg.train.adam.beta1 >= 0.0 && cfg.train.adam.beta1 < 1.0)) throw ConfigError("train.beta1 must be in [0, 1)");
  if (!(cfg.train.adam.beta2 >= 0.0 && cfg.train.adam.beta2 < 1.0)) throw ConfigError("train.beta2 must be in [0, 1)");
  if (!(cfg.train.adam.eps > 0.0)) throw ConfigError("train.eps must be > 0");
  if (cfg.eval.samples < 2) throw ConfigError("eval.samples must be >= 2");
  if (cfg.eval.pinc.empty()) throw ConfigError("eval.pinc must not be empty");
  for (double p : cfg.eval.pinc) {
    if (!(p > 0.0 && p < 1.0)) throw ConfigError("eval.pinc entries must be in (0, 1)");
  }
  if (cfg.eval.kde_grid < 2) throw ConfigError("eval.kde_grid must be >= 2");
  if (cfg.eval.clip_x0 && !(cfg.eval.clip_x0->first < cfg.eval.clip_x0->second)) {
    throw ConfigError("eval.clip_x0 must satisfy lo < hi");
  }
}

std::string config_to_json(const RunConfig& cfg) {
  ordered_json j;
  j["preset"] = cfg.preset;
  j["seed"] = cfg.seed;
  auto& d = j["data"];
  d["path"] = cfg.data.path.string();
  d["timestamp_column"] = cfg.data.columns.timestamp_column;
  d["load_column"] = cfg.data.columns.load_column;
  d["delimiter"] = std::string(1, cfg.data.columns.delimiter);
  d["timestamp_format"] = cfg.data.columns.timestamp_format;
  d["hour_ending"] = cfg.data.columns.hour_ending;
  d["train_ratio"] = cfg.data.train_ratio;
  d["max_days"] = cfg.data.max_days;
  auto& m = j["model"];
  m["hidden"] = cfg.model.hidden;
  m["seq_len"] = cfg.model.seq_len;
  m["steps"] = cfg.model.steps;
  m["beta_start"] = cfg.diffusion.beta_start;
  m["beta_end"] = cfg.diffusion.beta_end;
  m["head_dim"] = cfg.model.head_dim;
  m["temporal_dim"] = cfg.model.temporal_dim;
  m["heads"] = ordered_json::array();
  for (const auto& h : cfg.model.heads) m["heads"].push_back(h.label());
  m["condition_layers"] = cfg.model.condition_layers;
  m["head_kernel"] = cfg.model.head_kernel;
  m["dropout"] = cfg.model.dropout;
  auto& t = j["train"];
  t["epochs"] = cfg.train.epochs;
  t["batch_size"] = cfg.train.batch_size;
  t["lr"] = cfg.train.adam.lr;
  t["beta1"] = cfg.train.adam.beta1;
  t["beta2"] = cfg.train.adam.beta2;
  t["eps"] = cfg.train.adam.eps;
  auto& e = j["eval"];
  e["samples"] = cfg.eval.samples;
  e["pinc"] = cfg.eval.pinc;
  e["max_test_days"] = cfg.eval.max_test_days;
  e["threads"] = cfg.eval.threads;
  e["kde_grid"] = cfg.eval.kde_grid;
  e["persistence_baseline"] = cfg.eval.persistence_baseline;
  if (cfg.eval.clip_x0) {
    e["clip_x0"] = {cfg.eval.clip_x0->first, cfg.eval.clip_x0->second};
  } else {
    e["clip_x0"] = nullptr;
  }
  return j.dump(2) + "\n";
}

}  // namespace dalnet
