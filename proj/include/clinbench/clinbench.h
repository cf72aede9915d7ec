#ifndef CLINBENCH_CLINBENCH_H
#define CLINBENCH_CLINBENCH_H

/* C interface to the clinbench engine. Every call returns a cb_status; on
 * failure cb_last_error() describes the problem for the calling thread.
 * Strings returned through char** out-parameters are owned by the caller and
 * released with cb_string_free. Handles are released with their _free call;
 * passing NULL to any _free is a no-op. */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define CB_API __declspec(dllexport)
#elif defined(__GNUC__)
#define CB_API __attribute__((visibility("default")))
#else
#define CB_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum cb_status {
  CB_OK = 0,
  CB_ERR_DIMENSION = 1,
  CB_ERR_CONTRACT = 2,
  CB_ERR_NUMERIC = 3,
  CB_ERR_INDEX = 4,
  CB_ERR_INVALID_PROBABILITY = 5,
  CB_ERR_SCHEMA = 6,
  CB_ERR_PARSE = 7,
  CB_ERR_VALIDATION = 8,
  CB_ERR_SAMPLING = 9,
  CB_ERR_LABEL = 10,
  CB_ERR_NO_EVENTS = 11,
  CB_ERR_UNDEFINED_METRIC = 12,
  CB_ERR_UNAVAILABLE = 13,
  CB_ERR_INTEGRITY = 14,
  CB_ERR_IO = 15,
  CB_ERR_BUILD = 16,
  CB_ERR_FIT = 17,
  CB_ERR_DIVERGENCE = 18,
  CB_ERR_NULL_ARGUMENT = 19,
  CB_ERR_INTERNAL = 20
} cb_status;

typedef struct cb_schema cb_schema;
typedef struct cb_cohort cb_cohort;
typedef struct cb_model cb_model;

CB_API const char* cb_version(void);
/* Message of the last failed call on this thread ("" if none). */
CB_API const char* cb_last_error(void);
/* Stable lowercase name such as "validation" or "io". */
CB_API const char* cb_status_name(cb_status status);
/* 1 when the status stems from bad input (schema, parse, validation, ...). */
CB_API int cb_status_is_input_error(cb_status status);
CB_API void cb_string_free(char* s);

/* Synthetic cohort: writes cohort.csv and schema.json into out_dir, plus
 * train.csv/test.csv when the config JSON has "n_test" > 0. */
CB_API cb_status cb_synth(const char* config_json, const char* out_dir);

/* Schema config (feature declarations) from a JSON file, fitted on data_csv. */
CB_API cb_status cb_schema_fit(const char* schema_config_path, const char* data_csv, cb_schema** out);
CB_API cb_status cb_schema_load(const char* fitted_schema_path, cb_schema** out);
CB_API cb_status cb_schema_json(const cb_schema* schema, char** out_json);
CB_API void cb_schema_free(cb_schema* schema);

CB_API cb_status cb_cohort_load(const cb_schema* schema, const char* data_csv, cb_cohort** out);
CB_API size_t cb_cohort_size(const cb_cohort* cohort);
CB_API void cb_cohort_free(cb_cohort* cohort);

/* Trains on a k-shot sample of `cohort`. run_json:
 *   {"name", "kind": "neural"|"logres", "model": {...}, "training": {...},
 *    "embeddings": {"model_id", "cache", "endpoint"}, "k", "seed", "stratify"}
 * history_json (optional) receives the per-epoch losses. */
CB_API cb_status cb_train(const cb_schema* schema, const cb_cohort* cohort, const char* run_json, cb_model** out,
                          char** history_json);
CB_API cb_status cb_model_save(const cb_model* model, const char* dir);
CB_API cb_status cb_model_load(const char* dir, cb_model** out);
/* Copy of the schema the model was fitted with. */
CB_API cb_status cb_model_schema(const cb_model* model, cb_schema** out);
CB_API void cb_model_free(cb_model* model);

/* Per-record predictions as {"responder_prob": [...], "risk_os": [...], "risk_pfs": [...]}.
 * embeddings_json may be NULL or override the cache/endpoint used in training. */
CB_API cb_status cb_predict(const cb_model* model, const cb_cohort* cohort, const char* embeddings_json,
                            char** out_json);
/* Report JSON ({"meta", "tables", "curves"}) for the model on `cohort`. */
CB_API cb_status cb_evaluate(const cb_model* model, const cb_cohort* cohort, const char* embeddings_json,
                             char** report_json);
/* Report JSON for scores from an external CSV (record_id, score[, risk_os, risk_pfs]). */
CB_API cb_status cb_evaluate_external(const cb_schema* schema, const cb_cohort* cohort, const char* scores_csv,
                                      const char* name, char** report_json);

/* Few-shot grid. spec_json:
 *   {"models": [run, ...], "ks": [6, 12, "all"], "seeds": [0, 1, 2],
 *    "stratify", "subgroup_pool", "embeddings", "jobs", "timestamps"}
 * *partial is set to 1 when some cell or metric came out null. */
CB_API cb_status cb_fewshot(const cb_schema* schema, const cb_cohort* train, const cb_cohort* test,
                            const char* spec_json, char** report_json, int* partial);

/* Writes text to path via a temporary file and rename. */
CB_API cb_status cb_write_file(const char* path, const char* text);
/* SVG plots and curve CSVs for a report JSON file; out_json lists the files. */
CB_API cb_status cb_plot(const char* report_path, const char* out_dir, char** out_json);

/* Embeds the serialized records of `cohort` into the cache file, fetching
 * misses from the service. options_json: {"model_id", "cache", "endpoint",
 * "mode": "pooled"|"per_sentence"|"both"}. out_json summarises the work. */
CB_API cb_status cb_embed(const cb_schema* schema, const cb_cohort* cohort, const char* options_json, char** out_json);
/* GET /health of an embedding service: {"status", "model", "dim"}. */
CB_API cb_status cb_embed_health(const char* endpoint, char** out_json);

#ifdef __cplusplus
}
#endif

#endif
