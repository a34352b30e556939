#ifndef EEGATT_EEGATT_H
#define EEGATT_EEGATT_H

/* C interface to the eegatt library. Every function returning int reports an
 * eegatt_status; on failure eegatt_last_error() describes the problem for the
 * calling thread. Strings returned through char** are owned by the caller and
 * released with eegatt_string_free(). */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define EEGATT_API __declspec(dllexport)
#else
#define EEGATT_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum eegatt_status {
  EEGATT_OK = 0,
  EEGATT_E_GENERIC = 1,
  EEGATT_E_USAGE = 2,
  EEGATT_E_UNKNOWN_MODEL = 3,
  EEGATT_E_FORMAT = 4,
  EEGATT_E_MISSING_CLASS = 5,
  EEGATT_E_IO = 6,
  EEGATT_E_DIMENSION = 7,
  EEGATT_E_CONFIG = 8,
  EEGATT_E_STATE = 9,
  EEGATT_E_LABEL = 10,
  EEGATT_E_LOOKUP = 11,
  EEGATT_E_NUMERICAL = 12,
  EEGATT_E_TRAINING = 13,
  EEGATT_E_PREPROCESS = 14,
  EEGATT_E_STRUCTURE = 15
} eegatt_status;

typedef enum eegatt_split {
  EEGATT_SPLIT_TRAIN = 0,
  EEGATT_SPLIT_VAL = 1,
  EEGATT_SPLIT_TEST = 2,
  EEGATT_SPLIT_ALL = -1
} eegatt_split;

typedef enum eegatt_split_mode { EEGATT_SPLIT_BY_TRIAL = 0, EEGATT_SPLIT_BY_SUBJECT = 1 } eegatt_split_mode;

typedef struct eegatt_dataset eegatt_dataset;
typedef struct eegatt_recording eegatt_recording;
typedef struct eegatt_model eegatt_model;

EEGATT_API const char* eegatt_version(void);
EEGATT_API const char* eegatt_last_error(void);
/* Short machine name of a status, e.g. "missing_class". */
EEGATT_API const char* eegatt_status_name(int status);
EEGATT_API void eegatt_string_free(char* s);
/* Writes `len` bytes to `path` through a temporary file and a rename. */
EEGATT_API int eegatt_write_file(const char* path, const char* data, size_t len);
/* 16 hex digit FNV-1a hash of a string. */
EEGATT_API int eegatt_fingerprint(const char* text, char** out);

/* ---- synthetic data ---- */

/* config_json may be NULL or "{}" for the defaults. truth_json may be NULL. */
EEGATT_API int eegatt_synth_generate(const char* config_json, eegatt_dataset** out, char** truth_json);
EEGATT_API int eegatt_synth_continuous(const char* config_json, eegatt_recording** out, char** truth_json);
EEGATT_API int eegatt_synth_default_config(char** json);

/* ---- continuous recordings and preprocessing ---- */

EEGATT_API int eegatt_recording_load(const char* path, const char* events_path, eegatt_recording** out);
EEGATT_API int eegatt_recording_save(const eegatt_recording* rec, const char* path, const char* events_path);
EEGATT_API void eegatt_recording_free(eegatt_recording* rec);

/* Bad-channel rejection, interpolation, bandpass and epoching, then an 80/10/10
 * split. pipeline_json may be NULL for the defaults. report_json may be NULL. */
EEGATT_API int eegatt_preprocess(const eegatt_recording* rec, const char* pipeline_json, int split_mode,
                                 uint64_t split_seed, eegatt_dataset** out, char** report_json);
EEGATT_API int eegatt_pipeline_default_config(char** json);

/* ---- epoched datasets ---- */

EEGATT_API int eegatt_dataset_load(const char* path, eegatt_dataset** out);
EEGATT_API int eegatt_dataset_save(const eegatt_dataset* data, const char* path);
EEGATT_API void eegatt_dataset_free(eegatt_dataset* data);
EEGATT_API int eegatt_dataset_shape(const eegatt_dataset* data, size_t* samples, size_t* electrodes, size_t* time_points);
/* Sizes and class histograms per split. */
EEGATT_API int eegatt_dataset_summary(const eegatt_dataset* data, char** json);

/* ---- models ---- */

EEGATT_API int eegatt_model_param_count(const char* name, size_t* total, size_t* trainable);
/* Per-layer output shapes as CSV (layer,kind,shape,params). */
EEGATT_API int eegatt_model_summary(const char* name, char** csv);
EEGATT_API int eegatt_train_default_config(const char* name, char** json);

typedef void (*eegatt_progress_fn)(size_t epoch, double lr, double train_loss, double val_auc_relative,
                                   double val_auc_attended, void* user);

/* train_json overrides keys of the model's default training config; may be NULL. */
EEGATT_API int eegatt_model_train(const char* name, const eegatt_dataset* data, const char* train_json, uint64_t seed,
                                  eegatt_progress_fn progress, void* user, eegatt_model** out);
EEGATT_API int eegatt_model_load(const char* prefix, eegatt_model** out);
EEGATT_API int eegatt_model_save(const eegatt_model* model, const char* prefix);
EEGATT_API void eegatt_model_free(eegatt_model* model);
EEGATT_API int eegatt_model_name(const eegatt_model* model, char** out);
EEGATT_API int eegatt_model_fingerprint(const eegatt_model* model, char** out);
EEGATT_API int eegatt_model_history_csv(const eegatt_model* model, char** csv);
/* task,class,auc,support,predicted rows for the chosen split. */
EEGATT_API int eegatt_model_evaluate(const eegatt_model* model, const eegatt_dataset* data, int split, char** csv);

/* ---- analysis ---- */

EEGATT_API int eegatt_analyze_filters(const eegatt_model* model, char** csv);
EEGATT_API int eegatt_analyze_topography(const eegatt_model* model, size_t filter, char** csv, char** grid_csv,
                                         char** svg);
/* task is "relative" or "attended". */
EEGATT_API int eegatt_analyze_erp(const eegatt_model* model, const eegatt_dataset* data, size_t filter,
                                  const char* task, int split, char** csv, char** svg);
EEGATT_API int eegatt_analyze_slope(const eegatt_model* model, const eegatt_dataset* data, size_t filter, int split,
                                    char** csv, char** svg);
/* Elastic-net ranking. NULL grids select the built-in grid. warnings receives one
 * line per warning (possibly empty). */
EEGATT_API int eegatt_analyze_elastic(const eegatt_model* model, const eegatt_dataset* data, const double* lambda1,
                                      size_t n_lambda1, const double* lambda2, size_t n_lambda2, char** ranking_csv,
                                      char** heatmap_csv, char** heatmap_svg, char** warnings);
EEGATT_API int eegatt_analyze_rank(const eegatt_model* model, const eegatt_dataset* data, const char* task,
                                   char** csv);
EEGATT_API int eegatt_analyze_diff(const eegatt_model* mtm, const eegatt_model* single, const eegatt_dataset* data,
                                   int split, char** report_json, char** maps_csv, char** svg);

#ifdef __cplusplus
}
#endif

#endif
