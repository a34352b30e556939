// Command-line front end. Talks to the library through the C interface only.
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "eegatt/eegatt.h"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

struct Failure {
  int status;
  std::string message;
};

void check(int status) {
  if (status != EEGATT_OK) throw Failure{status, eegatt_last_error()};
}

[[noreturn]] void usage(const std::string& message) { throw Failure{EEGATT_E_USAGE, message}; }

// Owns a string returned by the library.
class Text {
 public:
  Text() = default;
  Text(const Text&) = delete;
  Text& operator=(const Text&) = delete;
  ~Text() { eegatt_string_free(p_); }
  char** out() { return &p_; }
  std::string str() const { return p_ != nullptr ? std::string(p_) : std::string(); }

 private:
  char* p_ = nullptr;
};

template <typename T, void (*Free)(T*)>
struct Deleter {
  void operator()(T* p) const { Free(p); }
};
using Dataset = std::unique_ptr<eegatt_dataset, Deleter<eegatt_dataset, eegatt_dataset_free>>;
using Recording = std::unique_ptr<eegatt_recording, Deleter<eegatt_recording, eegatt_recording_free>>;
using Model = std::unique_ptr<eegatt_model, Deleter<eegatt_model, eegatt_model_free>>;

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Failure{EEGATT_E_IO, "cannot open '" + path + "'"};
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ordered_json read_json(const std::string& path) {
  try {
    return ordered_json::parse(read_text(path));
  } catch (const ordered_json::exception& e) {
    throw Failure{EEGATT_E_CONFIG, "malformed JSON in '" + path + "': " + e.what()};
  }
}

class Output {
 public:
  void open(const std::string& dir) {
    dir_ = dir;
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw Failure{EEGATT_E_IO, "cannot create '" + dir + "': " + ec.message()};
  }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }
  void write(const std::string& name, const std::string& contents) const {
    check(eegatt_write_file(path(name).c_str(), contents.data(), contents.size()));
  }

 private:
  fs::path dir_;
};

std::string default_out(const std::string& command) {
  const char* root = std::getenv("EEGATT_OUT");
  return (fs::path(root != nullptr && *root != '\0' ? root : "eegatt-out") / command).string();
}

int parse_split(const std::string& s) {
  if (s == "train") return EEGATT_SPLIT_TRAIN;
  if (s == "val") return EEGATT_SPLIT_VAL;
  if (s == "test") return EEGATT_SPLIT_TEST;
  if (s == "all") return EEGATT_SPLIT_ALL;
  usage("unknown split '" + s + "'");
}

void require_model_files(const std::string& prefix) {
  for (const char* ext : {".params", ".spec.json", ".meta.json"}) {
    if (!fs::exists(prefix + ext)) throw Failure{EEGATT_E_IO, "model file '" + prefix + ext + "' does not exist"};
  }
}

Model load_model(const std::string& prefix) {
  require_model_files(prefix);
  eegatt_model* m = nullptr;
  check(eegatt_model_load(prefix.c_str(), &m));
  return Model(m);
}

Dataset load_dataset(const std::string& path) {
  if (!fs::exists(path)) throw Failure{EEGATT_E_IO, "dataset '" + path + "' does not exist"};
  eegatt_dataset* d = nullptr;
  check(eegatt_dataset_load(path.c_str(), &d));
  return Dataset(d);
}

std::string fingerprint_of(const std::string& text) {
  Text t;
  check(eegatt_fingerprint(text.c_str(), t.out()));
  return t.str();
}

// Resolved configuration and its hash, written next to every run's artifacts.
void write_run_config(const Output& out, const ordered_json& resolved) {
  const std::string text = resolved.dump(2) + "\n";
  out.write("run_config.json", text);
  out.write("fingerprint.txt", fingerprint_of(text) + "\n");
}

// ---- options ------------------------------------------------------------------------

struct Common {
  std::string out;
  std::string config;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--out", c.out, "Output directory (default $EEGATT_OUT/<command>)");
  app->add_option("--config", c.config, "JSON configuration file")->check(CLI::ExistingFile);
  app->add_option("--seed", c.seed, "Random seed");
}

struct TrainFlags {
  std::string model;
  std::string data;
  std::optional<std::size_t> epochs, batch;
  std::optional<double> alpha1, alpha2;
};

// flags > config file > model defaults
ordered_json train_overrides(const TrainFlags& f, const std::string& config_path, std::string* model,
                             std::optional<std::uint64_t>* seed) {
  ordered_json cfg = config_path.empty() ? ordered_json::object() : read_json(config_path);
  if (!cfg.is_object()) throw Failure{EEGATT_E_CONFIG, "training config must be a JSON object"};
  if (cfg.contains("model")) {
    if (model->empty()) *model = cfg["model"].get<std::string>();
    cfg.erase("model");
  }
  if (cfg.contains("seed")) {
    if (!seed->has_value()) *seed = cfg["seed"].get<std::uint64_t>();
    cfg.erase("seed");
  }
  if (f.epochs) cfg["epochs"] = *f.epochs;
  if (f.batch) cfg["batch_size"] = *f.batch;
  if (f.alpha1) cfg["alpha1"] = *f.alpha1;
  if (f.alpha2) cfg["alpha2"] = *f.alpha2;
  return cfg;
}

void print_progress(size_t epoch, double lr, double loss, double rel, double att, void*) {
  std::fprintf(stderr, "epoch %zu lr %.6g loss %.6f val_auc_relative %.4f val_auc_attended %.4f\n", epoch, lr, loss, rel, att);
}

ordered_json resolved_train_config(const std::string& model, const ordered_json& overrides) {
  Text defaults;
  check(eegatt_train_default_config(model.c_str(), defaults.out()));
  ordered_json cfg = ordered_json::parse(defaults.str());
  for (auto& [k, v] : overrides.items()) {
    if (!cfg.contains(k)) throw Failure{EEGATT_E_CONFIG, "unknown training config key '" + k + "'"};
    cfg[k] = v;
  }
  return cfg;
}

// Trains and writes model files, history and run config into `out`.
void train_into(const Output& out, const std::string& model, const eegatt_dataset* data, const ordered_json& cfg,
                std::uint64_t seed, bool quiet) {
  eegatt_model* m = nullptr;
  check(eegatt_model_train(model.c_str(), data, cfg.dump().c_str(), seed, quiet ? nullptr : print_progress, nullptr, &m));
  Model owned(m);
  check(eegatt_model_save(owned.get(), out.path("model").c_str()));
  Text history;
  check(eegatt_model_history_csv(owned.get(), history.out()));
  out.write("history.csv", history.str());
  write_run_config(out, ordered_json{{"command", "train"}, {"model", model}, {"seed", seed}, {"train", cfg}});
}


}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"EEG spatial-attention decoding toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(eegatt_version()));

  // synth
  Common synth_c;
  bool continuous = false;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic epoched dataset (or a continuous recording)");
  add_common(synth, synth_c);
  synth->add_flag("--continuous", continuous, "Emit a continuous recording with an events CSV instead");

  // preprocess
  Common pre_c;
  std::string recording, events, split_mode = "trial";
  auto* pre = app.add_subcommand("preprocess", "Reject, interpolate, filter and epoch a continuous recording");
  add_common(pre, pre_c);
  pre->add_option("--recording", recording, "Recording container")->required();
  pre->add_option("--events", events, "Events CSV")->required();
  pre->add_option("--split-mode", split_mode, "trial or subject")->check(CLI::IsMember({"trial", "subject"}));

  // train
  Common train_c;
  TrainFlags tf;
  bool quiet = false;
  auto* train = app.add_subcommand("train", "Train a model");
  add_common(train, train_c);
  train->add_option("--model", tf.model, "relloc, attloc or mtm");
  train->add_option("--data", tf.data, "Dataset container")->required();
  train->add_option("--epochs", tf.epochs, "Training epochs");
  train->add_option("--batch", tf.batch, "Minibatch size");
  train->add_option("--alpha1", tf.alpha1, "Joint-loss weight of the relative-location task");
  train->add_option("--alpha2", tf.alpha2, "Joint-loss weight of the attended-location task");
  train->add_flag("--quiet", quiet, "No per-epoch progress");

  // eval
  Common eval_c;
  std::string eval_model, eval_data, eval_split = "test";
  auto* eval = app.add_subcommand("eval", "One-vs-rest ROC AUC of a trained model");
  add_common(eval, eval_c);
  eval->add_option("--model", eval_model, "Model file prefix")->required();
  eval->add_option("--data", eval_data, "Dataset container")->required();
  eval->add_option("--split", eval_split, "train, val or test");

  // analyze
  Common an_c;
  std::string kind, an_model, an_reference, an_data, task = "relative", an_split = "test";
  std::size_t filter = 1;
  std::vector<double> lambda1, lambda2;
  auto* analyze = app.add_subcommand("analyze", "Interpret a trained model");
  add_common(analyze, an_c);
  analyze->add_option("--kind", kind, "filters, topo, slope, elastic, rank or diff")
      ->required()
      ->check(CLI::IsMember({"filters", "topo", "slope", "elastic", "rank", "diff"}));
  analyze->add_option("--model", an_model, "Model file prefix (the multi-task model for diff)")->required();
  analyze->add_option("--reference", an_reference, "Single-task attended-location model prefix (diff)");
  analyze->add_option("--data", an_data, "Dataset container");
  analyze->add_option("--filter", filter, "Spatial filter number, 1-based (topo, slope)")->check(CLI::PositiveNumber);
  analyze->add_option("--task", task, "relative or attended (rank)")->check(CLI::IsMember({"relative", "attended"}));
  analyze->add_option("--split", an_split, "train, val, test or all (slope, diff)");
  analyze->add_option("--lambda1", lambda1, "Elastic-net L1 penalties (default grid 0.01 to 1e4 in decades)");
  analyze->add_option("--lambda2", lambda2, "Elastic-net L2 penalties (default grid 0.01 to 1e4 in decades)");

  // sweep
  Common sweep_c;
  TrainFlags sf;
  auto* sweep = app.add_subcommand("sweep", "Train and evaluate every configuration of a grid");
  add_common(sweep, sweep_c);
  sweep->add_option("--model", sf.model, "relloc, attloc or mtm");
  sweep->add_option("--data", sf.data, "Dataset container")->required();

  // info
  std::string info_model;
  auto* info = app.add_subcommand("info", "Layer shapes and parameter counts of an architecture");
  info->add_option("--model", info_model, "relloc, attloc or mtm")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "error status=%d code=%s message=%s\n", EEGATT_E_USAGE, eegatt_status_name(EEGATT_E_USAGE),
                 e.what());
    return EEGATT_E_USAGE;
  }

  try {
    Output out;
    if (*synth) {
      out.open(synth_c.out.empty() ? default_out("synth") : synth_c.out);
      ordered_json cfg = synth_c.config.empty() ? ordered_json::object() : read_json(synth_c.config);
      if (synth_c.seed) cfg["seed"] = *synth_c.seed;
      Text resolved;
      check(eegatt_synth_default_config(resolved.out()));
      ordered_json full = ordered_json::parse(resolved.str());
      for (auto& [k, v] : cfg.items()) full[k] = v;
      Text truth;
      if (continuous) {
        eegatt_recording* r = nullptr;
        check(eegatt_synth_continuous(full.dump().c_str(), &r, truth.out()));
        Recording owned(r);
        check(eegatt_recording_save(owned.get(), out.path("recording.bin").c_str(), out.path("events.csv").c_str()));
      } else {
        eegatt_dataset* d = nullptr;
        check(eegatt_synth_generate(full.dump().c_str(), &d, truth.out()));
        Dataset owned(d);
        check(eegatt_dataset_save(owned.get(), out.path("dataset.bin").c_str()));
        Text summary;
        check(eegatt_dataset_summary(owned.get(), summary.out()));
        out.write("summary.json", summary.str());
      }
      out.write("truth.json", truth.str());
      write_run_config(out, ordered_json{{"command", "synth"}, {"continuous", continuous}, {"synth", full}});
    } else if (*pre) {
      out.open(pre_c.out.empty() ? default_out("preprocess") : pre_c.out);
      const std::string pipeline = pre_c.config.empty() ? "{}" : read_json(pre_c.config).dump();
      eegatt_recording* r = nullptr;
      check(eegatt_recording_load(recording.c_str(), events.c_str(), &r));
      Recording rec(r);
      const std::uint64_t seed = pre_c.seed.value_or(1);
      eegatt_dataset* d = nullptr;
      Text report;
      check(eegatt_preprocess(rec.get(), pipeline.c_str(), split_mode == "trial" ? EEGATT_SPLIT_BY_TRIAL : EEGATT_SPLIT_BY_SUBJECT,
                              seed, &d, report.out()));
      Dataset data(d);
      check(eegatt_dataset_save(data.get(), out.path("dataset.bin").c_str()));
      out.write("report.json", report.str());
      Text defaults;
      check(eegatt_pipeline_default_config(defaults.out()));
      ordered_json full = ordered_json::parse(defaults.str());
      for (auto& [k, v] : ordered_json::parse(pipeline).items()) full[k] = v;
      write_run_config(out, ordered_json{{"command", "preprocess"},
                                         {"recording", recording},
                                         {"events", events},
                                         {"split_mode", split_mode},
                                         {"seed", seed},
                                         {"pipeline", full}});
    } else if (*train) {
      std::string model = tf.model;
      auto seed = train_c.seed;
      const auto overrides = train_overrides(tf, train_c.config, &model, &seed);
      if (model.empty()) usage("--model is required (or a \"model\" key in the config file)");
      const auto cfg = resolved_train_config(model, overrides);
      Dataset data = load_dataset(tf.data);
      out.open(train_c.out.empty() ? default_out("train") : train_c.out);
      train_into(out, model, data.get(), cfg, seed.value_or(1), quiet);
    } else if (*eval) {
      Model model = load_model(eval_model);
      Dataset data = load_dataset(eval_data);
      const int split = parse_split(eval_split);
      if (split == EEGATT_SPLIT_ALL) usage("eval needs the train, val or test split");
      out.open(eval_c.out.empty() ? default_out("eval") : eval_c.out);
      Text csv;
      check(eegatt_model_evaluate(model.get(), data.get(), split, csv.out()));
      out.write("metrics.csv", csv.str());
      Text fp;
      check(eegatt_model_fingerprint(model.get(), fp.out()));
      write_run_config(out, ordered_json{{"command", "eval"}, {"model", eval_model}, {"model_fingerprint", fp.str()},
                                         {"data", eval_data}, {"split", eval_split}});
    } else if (*analyze) {
      if (kind == "diff" && an_reference.empty()) usage("--kind diff needs --reference with the single-task model");
      Model model = load_model(an_model);
      Model reference;
      if (kind == "diff") reference = load_model(an_reference);
      Dataset data;
      if (kind != "filters" && kind != "topo") {
        if (an_data.empty()) usage("--kind " + kind + " needs --data");
        data = load_dataset(an_data);
      }
      const int split = parse_split(an_split);
      out.open(an_c.out.empty() ? default_out("analyze") : an_c.out);
      const std::size_t f = filter - 1;
      if (kind == "filters") {
        Text csv;
        check(eegatt_analyze_filters(model.get(), csv.out()));
        out.write("filters.csv", csv.str());
      } else if (kind == "topo") {
        Text csv, grid, svg;
        check(eegatt_analyze_topography(model.get(), f, csv.out(), grid.out(), svg.out()));
        const std::string stem = "topo_spatial" + std::to_string(filter);
        out.write(stem + ".csv", csv.str());
        out.write(stem + "_grid.csv", grid.str());
        out.write(stem + ".svg", svg.str());
      } else if (kind == "slope") {
        Text erp, erp_svg, csv, svg;
        check(eegatt_analyze_erp(model.get(), data.get(), f, "relative", split, erp.out(), erp_svg.out()));
        check(eegatt_analyze_slope(model.get(), data.get(), f, split, csv.out(), svg.out()));
        const std::string stem = "spatial" + std::to_string(filter);
        out.write("erp_" + stem + ".csv", erp.str());
        out.write("erp_" + stem + ".svg", erp_svg.str());
        out.write("slope_" + stem + ".csv", csv.str());
        out.write("slope_" + stem + ".svg", svg.str());
      } else if (kind == "elastic") {
        Text ranking, heat, svg, warnings;
        check(eegatt_analyze_elastic(model.get(), data.get(), lambda1.empty() ? nullptr : lambda1.data(), lambda1.size(),
                                     lambda2.empty() ? nullptr : lambda2.data(), lambda2.size(), ranking.out(), heat.out(),
                                     svg.out(), warnings.out()));
        out.write("elastic_ranking.csv", ranking.str());
        out.write("beta_heatmap.csv", heat.str());
        out.write("beta_heatmap.svg", svg.str());
        if (!warnings.str().empty()) std::fputs(warnings.str().c_str(), stderr);
      } else if (kind == "rank") {
        Text csv;
        check(eegatt_analyze_rank(model.get(), data.get(), task.c_str(), csv.out()));
        out.write("classification_ranking.csv", csv.str());
      } else {
        Text report, maps, svg;
        check(eegatt_analyze_diff(model.get(), reference.get(), data.get(), split, report.out(), maps.out(), svg.out()));
        out.write("differential_report.json", report.str());
        out.write("differential_maps.csv", maps.str());
        out.write("differential_maps.svg", svg.str());
      }
      write_run_config(out, ordered_json{{"command", "analyze"}, {"kind", kind}, {"model", an_model},
                                         {"reference", an_reference}, {"data", an_data}, {"filter", filter},
                                         {"task", task}, {"split", an_split}, {"lambda1", lambda1},
                                         {"lambda2", lambda2}});
    } else if (*sweep) {
      // {"model": ..., "seed": ..., "base": {...}, "grid": {"key": [values], ...}}
      if (sweep_c.config.empty()) usage("sweep needs --config with a \"grid\" object");
      ordered_json spec = read_json(sweep_c.config);
      std::string model = sf.model.empty() ? spec.value("model", std::string()) : sf.model;
      if (model.empty()) usage("sweep needs a model");
      const std::uint64_t seed = sweep_c.seed.value_or(spec.value("seed", std::uint64_t{1}));
      const ordered_json base = spec.value("base", ordered_json::object());
      const ordered_json grid = spec.value("grid", ordered_json::object());
      std::vector<std::pair<std::string, ordered_json>> axes;
      for (auto& [k, v] : grid.items()) {
        if (!v.is_array() || v.empty()) throw Failure{EEGATT_E_CONFIG, "grid entry '" + k + "' must be a non-empty array"};
        axes.emplace_back(k, v);
      }
      Dataset data = load_dataset(sf.data);
      out.open(sweep_c.out.empty() ? default_out("sweep") : sweep_c.out);
      std::size_t runs = 1;
      for (auto& a : axes) runs *= a.second.size();
      std::ostringstream summary;
      summary << "run";
      for (auto& a : axes) summary << ',' << a.first;
      summary << ",fingerprint,metrics\n";
      for (std::size_t r = 0; r < runs; ++r) {
        ordered_json overrides = base;
        std::size_t rem = r;
        std::ostringstream row;
        char name[32];
        std::snprintf(name, sizeof name, "run_%03zu", r);
        row << name;
        for (auto it = axes.rbegin(); it != axes.rend(); ++it) {
          overrides[it->first] = it->second[rem % it->second.size()];
          rem /= it->second.size();
        }
        for (auto& a : axes) row << ',' << overrides[a.first].dump();
        const auto cfg = resolved_train_config(model, overrides);
        Output run;
        run.open(out.path(name));
        std::fprintf(stderr, "%s: %s\n", name, overrides.dump().c_str());
        train_into(run, model, data.get(), cfg, seed, true);
        Model trained = load_model(run.path("model"));
        Text csv;
        check(eegatt_model_evaluate(trained.get(), data.get(), EEGATT_SPLIT_TEST, csv.out()));
        run.write("metrics.csv", csv.str());
        const std::string fp = read_text(run.path("fingerprint.txt"));
        row << ',' << fp.substr(0, fp.find('\n')) << ',' << name << "/metrics.csv\n";
        summary << row.str();
      }
      out.write("sweep_summary.csv", summary.str());
      write_run_config(out, ordered_json{{"command", "sweep"}, {"model", model}, {"seed", seed}, {"spec", spec}});
    } else if (*info) {
      size_t total = 0, trainable = 0;
      check(eegatt_model_param_count(info_model.c_str(), &total, &trainable));
      Text csv;
      check(eegatt_model_summary(info_model.c_str(), csv.out()));
      std::printf("%stotal_params,%zu\ntrainable_params,%zu\n", csv.str().c_str(), total, trainable);
    }
  } catch (const Failure& f) {
    std::fprintf(stderr, "error status=%d code=%s message=%s\n", f.status, eegatt_status_name(f.status), f.message.c_str());
    return f.status;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error status=%d code=%s message=%s\n", EEGATT_E_GENERIC, eegatt_status_name(EEGATT_E_GENERIC),
                 e.what());
    return EEGATT_E_GENERIC;
  }
  return 0;
}
