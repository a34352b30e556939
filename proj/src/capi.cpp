#include "eegatt/eegatt.h"

#include <cstring>
#include <exception>
#include <new>
#include <sstream>
#include <string>

#include "eegatt/analysis.hpp"
#include "eegatt/dataset.hpp"
#include "eegatt/error.hpp"
#include "eegatt/featsel.hpp"
#include "eegatt/io.hpp"
#include "eegatt/models.hpp"
#include "eegatt/montage.hpp"
#include "eegatt/preprocess.hpp"
#include "eegatt/serialize.hpp"
#include "eegatt/synthgen.hpp"
#include "json.hpp"

using namespace eegatt;

struct eegatt_dataset {
  EpochedDataset data;
};

struct eegatt_recording {
  preprocess::ContinuousRecording rec;
};

struct eegatt_model {
  models::TrainedModel model;
};

namespace {

thread_local std::string g_last_error;

int set_error(int code, const std::string& what) {
  g_last_error = what;
  return code;
}

template <typename F>
int guarded(F&& f) {
  try {
    g_last_error.clear();
    f();
    return EEGATT_OK;
  } catch (const Error& e) {
    return set_error(static_cast<int>(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return set_error(EEGATT_E_GENERIC, "out of memory");
  } catch (const std::exception& e) {
    return set_error(EEGATT_E_GENERIC, e.what());
  }
}

void require(const void* p, const char* what) {
  if (p == nullptr) fail(ErrorCode::kUsage, std::string(what) + " must not be null");
}

char* dup(const std::string& s) {
  auto* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void put(char** slot, const std::string& s) {
  if (slot != nullptr) *slot = dup(s);
}

std::string text_or(const char* s, const char* fallback) { return s != nullptr ? std::string(s) : std::string(fallback); }

std::vector<std::size_t> split_indices(const EpochedDataset& data, int split) {
  if (split == EEGATT_SPLIT_ALL) {
    std::vector<std::size_t> idx(data.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    return idx;
  }
  if (split < 0 || split > 2) fail(ErrorCode::kUsage, "unknown split " + std::to_string(split));
  return data.indices(static_cast<Split>(split));
}

const char* split_label(int split) { return split == EEGATT_SPLIT_ALL ? "all" : split_name(static_cast<Split>(split)); }

void require_samples(const std::vector<std::size_t>& idx, int split) {
  if (idx.empty()) fail(ErrorCode::kMissingClass, std::string("split '") + split_label(split) + "' has no samples");
}

}  // namespace

extern "C" {

const char* eegatt_version(void) { return "0.1.0"; }
const char* eegatt_last_error(void) { return g_last_error.c_str(); }

const char* eegatt_status_name(int status) {
  if (status == EEGATT_OK) return "ok";
  return error_code_name(static_cast<ErrorCode>(status));
}

void eegatt_string_free(char* s) { std::free(s); }

int eegatt_write_file(const char* path, const char* data, size_t len) {
  return guarded([&] {
    require(path, "path");
    if (len > 0) require(data, "data");
    io::write_file_atomic(path, std::string_view(data == nullptr ? "" : data, len));
  });
}

int eegatt_fingerprint(const char* text, char** out) {
  return guarded([&] {
    require(text, "text");
    require(out, "out");
    put(out, io::fingerprint(text));
  });
}

// ---- synth --------------------------------------------------------------------------

int eegatt_synth_generate(const char* config_json, eegatt_dataset** out, char** truth_json) {
  return guarded([&] {
    require(out, "out");
    auto r = synth::generate(synth::SynthConfig::from_json(text_or(config_json, "{}")));
    std::string truth = truth_json != nullptr ? r.truth.to_json() : std::string();
    *out = new eegatt_dataset{std::move(r.data)};
    put(truth_json, truth);
  });
}

int eegatt_synth_continuous(const char* config_json, eegatt_recording** out, char** truth_json) {
  return guarded([&] {
    require(out, "out");
    auto r = synth::emit_continuous(synth::SynthConfig::from_json(text_or(config_json, "{}")));
    std::string truth = truth_json != nullptr ? r.truth.to_json() : std::string();
    *out = new eegatt_recording{std::move(r.recording)};
    put(truth_json, truth);
  });
}

int eegatt_synth_default_config(char** json) {
  return guarded([&] {
    require(json, "json");
    put(json, synth::SynthConfig{}.to_json());
  });
}

// ---- recordings -------------------------------------------------------------------------

int eegatt_recording_load(const char* path, const char* events_path, eegatt_recording** out) {
  return guarded([&] {
    require(path, "path");
    require(events_path, "events path");
    require(out, "out");
    auto rec = preprocess::load_recording(path);
    rec.events = preprocess::parse_events_csv(io::read_file(events_path), events_path);
    rec.validate();
    *out = new eegatt_recording{std::move(rec)};
  });
}

int eegatt_recording_save(const eegatt_recording* rec, const char* path, const char* events_path) {
  return guarded([&] {
    require(rec, "recording");
    require(path, "path");
    require(events_path, "events path");
    preprocess::save_recording(rec->rec, path);
    io::write_file_atomic(events_path, preprocess::events_csv(rec->rec.events));
  });
}

void eegatt_recording_free(eegatt_recording* rec) { delete rec; }

int eegatt_preprocess(const eegatt_recording* rec, const char* pipeline_json, int split_mode, uint64_t split_seed,
                      eegatt_dataset** out, char** report_json) {
  return guarded([&] {
    require(rec, "recording");
    require(out, "out");
    if (split_mode != EEGATT_SPLIT_BY_TRIAL && split_mode != EEGATT_SPLIT_BY_SUBJECT) {
      fail(ErrorCode::kUsage, "unknown split mode " + std::to_string(split_mode));
    }
    const auto cfg = preprocess::PipelineConfig::from_json(text_or(pipeline_json, "{}"));
    preprocess::PipelineReport report;
    auto r = preprocess::run_pipeline(rec->rec, cfg, &report);
    assign_splits(r.data, split_mode == EEGATT_SPLIT_BY_TRIAL ? SplitMode::kTrial : SplitMode::kSubject, split_seed);
    std::string rep = report_json != nullptr ? report.to_json(montage_by_name(rec->rec.montage)) : std::string();
    *out = new eegatt_dataset{std::move(r.data)};
    put(report_json, rep);
  });
}

int eegatt_pipeline_default_config(char** json) {
  return guarded([&] {
    require(json, "json");
    put(json, preprocess::PipelineConfig{}.to_json());
  });
}

// ---- datasets -----------------------------------------------------------------------------

int eegatt_dataset_load(const char* path, eegatt_dataset** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new eegatt_dataset{load_dataset(path)};
  });
}

int eegatt_dataset_save(const eegatt_dataset* data, const char* path) {
  return guarded([&] {
    require(data, "dataset");
    require(path, "path");
    save_dataset(data->data, path);
  });
}

void eegatt_dataset_free(eegatt_dataset* data) { delete data; }

int eegatt_dataset_shape(const eegatt_dataset* data, size_t* samples, size_t* electrodes, size_t* time_points) {
  return guarded([&] {
    require(data, "dataset");
    if (samples != nullptr) *samples = data->data.size();
    if (electrodes != nullptr) *electrodes = data->data.electrodes();
    if (time_points != nullptr) *time_points = data->data.time_points();
  });
}

int eegatt_dataset_summary(const eegatt_dataset* data, char** json) {
  return guarded([&] {
    require(data, "dataset");
    require(json, "json");
    const auto& d = data->data;
    nlohmann::ordered_json j;
    j["samples"] = d.size();
    j["electrodes"] = d.electrodes();
    j["time_points"] = d.time_points();
    j["montage"] = d.montage();
    j["provenance"] = d.provenance();
    j["start_ms"] = d.start_ms();
    j["step_ms"] = d.step_ms();
    for (Split s : {Split::kTrain, Split::kVal, Split::kTest}) {
      nlohmann::ordered_json e;
      e["samples"] = d.indices(s).size();
      e["relative"] = d.relative_histogram(s);
      e["side"] = d.side_histogram(s);
      j["splits"][split_name(s)] = e;
    }
    put(json, j.dump(2) + "\n");
  });
}

// ---- models ---------------------------------------------------------------------------------

int eegatt_model_param_count(const char* name, size_t* total, size_t* trainable) {
  return guarded([&] {
    require(name, "model name");
    const auto c = nn::param_count(models::build_model(name));
    if (total != nullptr) *total = c.total;
    if (trainable != nullptr) *trainable = c.trainable;
  });
}

int eegatt_model_summary(const char* name, char** csv) {
  return guarded([&] {
    require(name, "model name");
    require(csv, "csv");
    const nn::Network net(models::build_model(name));
    std::ostringstream os;
    os << "layer,kind,shape,params\n";
    for (std::size_t i = 0; i < net.spec().layers.size(); ++i) {
      const auto& L = net.spec().layers[i];
      std::size_t params = 0;
      for (const auto& p : net.params().params) {
        if (p.name.rfind(L.name + "/", 0) == 0) params += p.value.size();
      }
      os << L.name << ',' << nn::layer_kind_name(L.kind) << ",\"" << shape_str(net.shapes()[i]) << "\"," << params << '\n';
    }
    put(csv, os.str());
  });
}

int eegatt_train_default_config(const char* name, char** json) {
  return guarded([&] {
    require(name, "model name");
    require(json, "json");
    models::build_model(name);
    put(json, models::default_train_config(name).to_json());
  });
}

int eegatt_model_train(const char* name, const eegatt_dataset* data, const char* train_json, uint64_t seed,
                       eegatt_progress_fn progress, void* user, eegatt_model** out) {
  return guarded([&] {
    require(name, "model name");
    require(data, "dataset");
    require(out, "out");
    const auto spec = models::build_model(name);
    const auto cfg = models::TrainConfig::from_json(text_or(train_json, "{}"), models::default_train_config(name));
    models::ProgressFn fn;
    if (progress != nullptr) {
      fn = [&](const models::EpochRecord& e) {
        progress(e.epoch, e.lr, e.train_loss, e.val_auc_relative, e.val_auc_attended, user);
      };
    }
    *out = new eegatt_model{models::train(spec, data->data, cfg, seed, fn)};
  });
}

int eegatt_model_load(const char* prefix, eegatt_model** out) {
  return guarded([&] {
    require(prefix, "prefix");
    require(out, "out");
    *out = new eegatt_model{models::load_model(prefix)};
  });
}

int eegatt_model_save(const eegatt_model* model, const char* prefix) {
  return guarded([&] {
    require(model, "model");
    require(prefix, "prefix");
    models::save_model(model->model, prefix);
  });
}

void eegatt_model_free(eegatt_model* model) { delete model; }

int eegatt_model_name(const eegatt_model* model, char** out) {
  return guarded([&] {
    require(model, "model");
    require(out, "out");
    put(out, model->model.network.spec().name);
  });
}

int eegatt_model_fingerprint(const eegatt_model* model, char** out) {
  return guarded([&] {
    require(model, "model");
    require(out, "out");
    put(out, model->model.fingerprint());
  });
}

int eegatt_model_history_csv(const eegatt_model* model, char** csv) {
  return guarded([&] {
    require(model, "model");
    require(csv, "csv");
    put(csv, models::history_csv(model->model.history));
  });
}

int eegatt_model_evaluate(const eegatt_model* model, const eegatt_dataset* data, int split, char** csv) {
  return guarded([&] {
    require(model, "model");
    require(data, "dataset");
    require(csv, "csv");
    if (split < 0 || split > 2) fail(ErrorCode::kUsage, "evaluation needs the train, val or test split");
    put(csv, models::evaluation_csv(models::evaluate(model->model.network, data->data, static_cast<Split>(split))));
  });
}

// ---- analysis ---------------------------------------------------------------------------------

int eegatt_analyze_filters(const eegatt_model* model, char** csv) {
  return guarded([&] {
    require(model, "model");
    require(csv, "csv");
    put(csv, analysis::filters_csv(analysis::extract_spatial_filters(model->model.network), standard_montage()));
  });
}

int eegatt_analyze_topography(const eegatt_model* model, size_t filter, char** csv, char** grid_csv, char** svg) {
  return guarded([&] {
    require(model, "model");
    const auto filters = analysis::extract_spatial_filters(model->model.network);
    if (filter >= filters.size()) fail(ErrorCode::kLookup, "spatial filter index " + std::to_string(filter) + " out of range");
    const Eigen::VectorXd w = filters.weights.row(static_cast<Eigen::Index>(filter)).transpose();
    const auto topo = analysis::topography(std::span<const double>(w.data(), static_cast<std::size_t>(w.size())), standard_montage());
    const std::string a = analysis::topography_csv(topo);
    const std::string b = analysis::topography_grid_csv(topo);
    const std::string c = analysis::topography_svg(topo, "Spatial" + std::to_string(filter + 1));
    put(csv, a);
    put(grid_csv, b);
    put(svg, c);
  });
}

int eegatt_analyze_erp(const eegatt_model* model, const eegatt_dataset* data, size_t filter, const char* task, int split,
                       char** csv, char** svg) {
  return guarded([&] {
    require(model, "model");
    require(data, "dataset");
    require(task, "task");
    const auto idx = split_indices(data->data, split);
    const auto map = analysis::erp_feature_map(model->model.network, data->data, idx, filter, task);
    const std::string a = analysis::erp_map_csv(map);
    const std::string b = analysis::erp_map_svg(map, "Spatial" + std::to_string(filter + 1) + " " + task + " ERP map");
    put(csv, a);
    put(svg, b);
  });
}

int eegatt_analyze_slope(const eegatt_model* model, const eegatt_dataset* data, size_t filter, int split, char** csv,
                         char** svg) {
  return guarded([&] {
    require(model, "model");
    require(data, "dataset");
    const auto idx = split_indices(data->data, split);
    const auto map = analysis::erp_feature_map(model->model.network, data->data, idx, filter, models::kRelativeTask);
    const auto s = analysis::slope_analysis(map);
    const std::string a = analysis::slope_csv(s);
    const std::string b = analysis::slope_svg(s, "Spatial" + std::to_string(filter + 1) + " attention gradient slope");
    put(csv, a);
    put(svg, b);
  });
}

int eegatt_analyze_elastic(const eegatt_model* model, const eegatt_dataset* data, const double* lambda1, size_t n_lambda1,
                           const double* lambda2, size_t n_lambda2, char** ranking_csv, char** heatmap_csv,
                           char** heatmap_svg, char** warnings) {
  return guarded([&] {
    require(model, "model");
    require(data, "dataset");
    featsel::RankingConfig cfg;
    if (lambda1 != nullptr) cfg.lambda1_grid.assign(lambda1, lambda1 + n_lambda1);
    if (lambda2 != nullptr) cfg.lambda2_grid.assign(lambda2, lambda2 + n_lambda2);
    const auto ranking = featsel::rank_filters_by_regression(model->model.network, data->data, cfg);
    std::vector<Eigen::VectorXd> betas(ranking.rows.size());
    for (const auto& r : ranking.rows) betas[r.filter] = r.beta;
    const auto map = featsel::beta_heatmap(betas, data->data.time_ms());
    std::string w;
    for (const auto& line : ranking.warnings) w += line + "\n";
    const std::string a = featsel::ranking_csv(ranking);
    const std::string b = featsel::heatmap_csv(map);
    const std::string c = featsel::heatmap_svg(map, "elastic-net |beta| per spatial filter");
    put(ranking_csv, a);
    put(heatmap_csv, b);
    put(heatmap_svg, c);
    put(warnings, w);
  });
}

int eegatt_analyze_rank(const eegatt_model* model, const eegatt_dataset* data, const char* task, char** csv) {
  return guarded([&] {
    require(model, "model");
    require(data, "dataset");
    require(csv, "csv");
    const auto rows = analysis::rank_filters_by_classification(model->model.network, data->data,
                                                               task != nullptr ? task : models::kRelativeTask);
    put(csv, analysis::classification_ranking_csv(rows));
  });
}

int eegatt_analyze_diff(const eegatt_model* mtm, const eegatt_model* single, const eegatt_dataset* data, int split,
                        char** report_json, char** maps_csv, char** svg) {
  return guarded([&] {
    require(mtm, "multi-task model");
    require(single, "single-task model");
    require(data, "dataset");
    const auto idx = split_indices(data->data, split);
    require_samples(idx, split);
    const auto r = analysis::differential_sample_analysis(mtm->model.network, single->model.network, data->data, idx);
    const std::string a = r.to_json();
    const std::string b = r.maps_csv();
    const std::string c = analysis::differential_svg(r, "multi-task differential samples");
    put(report_json, a);
    put(maps_csv, b);
    put(svg, c);
  });
}

}  // extern "C"
