#ifndef HYSTLAB_H
#define HYSTLAB_H

#include <stddef.h>
#include <stdint.h>

#if defined(HYST_BUILDING_LIBRARY)
#define HYST_API __attribute__((visibility("default")))
#else
#define HYST_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum hyst_status {
  HYST_OK = 0,
  HYST_INVALID_ARGUMENT = 1,
  HYST_IO = 2,
  HYST_PARSE = 3,
  HYST_FORMAT = 4,
  HYST_VERSION = 5,
  HYST_DIMENSION = 6,
  HYST_NUMERIC = 7,
  HYST_NO_SAMPLES = 8,
  HYST_INTERNAL = 99
} hyst_status;

/* Message of the last failed call on this thread; "" after a success. */
HYST_API const char* hyst_last_error(void);
HYST_API const char* hyst_status_name(hyst_status status);
HYST_API const char* hyst_version(void);

/* Commands. `options_json` is a JSON object keyed by flag name (dashes become
   underscores). When `summary` is not NULL it receives a JSON summary that
   the caller releases with hyst_free_string. */
HYST_API hyst_status hyst_generate(const char* options_json, char** summary);
HYST_API hyst_status hyst_harmonize(const char* options_json, char** summary);
HYST_API hyst_status hyst_train(const char* options_json, char** summary);
HYST_API hyst_status hyst_evaluate(const char* options_json, char** summary);
HYST_API hyst_status hyst_grid(const char* options_json, char** summary);
HYST_API hyst_status hyst_transfer(const char* options_json, char** summary);
HYST_API hyst_status hyst_report(const char* options_json, char** summary);
HYST_API void hyst_free_string(char* s);

/* Trained models. */
typedef struct hyst_model hyst_model;

HYST_API hyst_status hyst_model_load(const char* path, hyst_model** out);
HYST_API hyst_status hyst_model_save(const hyst_model* model, const char* path);
HYST_API void hyst_model_free(hyst_model* model);
/* "lqr", "qxgb" or "qgru"; NULL for a NULL handle. */
HYST_API const char* hyst_model_kind(const hyst_model* model);
HYST_API size_t hyst_model_quantile_count(const hyst_model* model);
HYST_API hyst_status hyst_model_quantiles(const hyst_model* model, double* out, size_t capacity);
/* Raw feature count the pipeline expects per row (stats) or per step (tensor). */
HYST_API size_t hyst_model_input_features(const hyst_model* model);
/* 1 when the model consumes sequences, 0 for statistical features. */
HYST_API int hyst_model_is_sequence(const hyst_model* model);
/* Serialized size in bytes, header and pipeline state included. */
HYST_API size_t hyst_model_rom_bytes(const hyst_model* model);
/* Inference working set in bytes for `steps` input steps (ignored for statistical models). */
HYST_API size_t hyst_model_ram_bytes(const hyst_model* model, size_t steps);
/* Runs the stored pipeline (scaling, reduction, model, crossing repair).
   Statistical models take `n` rows of `features` raw statistics (steps = 1);
   QGRU takes n x steps x features raw channels. Writes n x quantile_count
   predictions, row-major. */
HYST_API hyst_status hyst_model_predict(const hyst_model* model, const double* x, size_t n, size_t steps,
                                        size_t features, double* out);

/* Metrics and features. */
HYST_API hyst_status hyst_pinball(double y, double yhat, double tau, double* out);
/* predictions: n x q row-major. */
HYST_API hyst_status hyst_aql(const double* y, const double* predictions, size_t n, const double* taus, size_t q,
                              double* out);
/* The 19 per-channel statistics of one series, in documented order. */
HYST_API size_t hyst_stat_count(void);
HYST_API const char* hyst_stat_name(size_t index);
HYST_API hyst_status hyst_stat_features(const double* x, size_t n, double* out);

#ifdef __cplusplus
}
#endif

#endif
