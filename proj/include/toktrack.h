/* SPDX-License-Identifier: Apache-2.0 */
/* Copyright (c) 2026 toktrack contributors */

#ifndef TOKTRACK_H
#define TOKTRACK_H

#include <stdint.h>

#if defined(_WIN32)
#define TTK_API __declspec(dllexport)
#else
#define TTK_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Every call returns a status; on failure ttk_last_error() holds a
 * human-readable message for the calling thread. */
typedef enum ttk_status {
    TTK_OK = 0,
    TTK_ERR_INVALID_ARGUMENT = 1, /* null handle or out pointer */
    TTK_ERR_CONFIG = 2,           /* unknown key, bad value, invalid combination */
    TTK_ERR_IO = 3,               /* missing or unwritable file */
    TTK_ERR_FORMAT = 4,           /* file exists but is malformed */
    TTK_ERR_NUMERIC = 5,          /* NaN/Inf in a computation */
    TTK_ERR_INTERNAL = 6          /* contract violation inside the library */
} ttk_status;

/* Message for the most recent failure on this thread; "" if none. The
 * pointer is owned by the library and valid until the next failing call. */
TTK_API const char* ttk_last_error(void);

TTK_API const char* ttk_version(void);

/* Strings returned through char** out parameters are heap copies; release
 * them with ttk_string_free. */
TTK_API void ttk_string_free(char* text);

/* ---- run configuration ------------------------------------------------- */

typedef struct ttk_config ttk_config;

/* Defaults. */
TTK_API ttk_status ttk_config_create(ttk_config** out);
/* Flat "key = value" file; '#' comments; unknown keys rejected. */
TTK_API ttk_status ttk_config_load(const char* path, ttk_config** out);
TTK_API ttk_status ttk_config_parse(const char* text, ttk_config** out);
/* Set one key; the full config is revalidated. */
TTK_API ttk_status ttk_config_set(ttk_config* cfg, const char* key, const char* value);
/* Full key set as parseable text. */
TTK_API ttk_status ttk_config_format(const ttk_config* cfg, char** out_text);
TTK_API void ttk_config_destroy(ttk_config* cfg);

/* ---- model ------------------------------------------------------------- */

typedef struct ttk_model ttk_model;

TTK_API ttk_status ttk_model_init(const ttk_config* cfg, uint64_t seed, ttk_model** out);
TTK_API ttk_status ttk_model_load(const char* checkpoint_path, ttk_model** out);
TTK_API ttk_status ttk_model_save(const ttk_model* model, const char* checkpoint_path);
TTK_API void ttk_model_destroy(ttk_model* model);

/* ---- pipeline ---------------------------------------------------------- */

/* Write cfg's gen_sequences synthetic sequences under out_dir, one
 * subdirectory per sequence (frames/%06d.ppm, groundtruth.txt,
 * visibility.txt, meta.txt). Sequence i uses stream seed + i. */
TTK_API ttk_status ttk_gen_data(const ttk_config* cfg, uint64_t seed, const char* out_dir);

/* Train model in place on every sequence under dataset_dir. A tab-separated
 * loss log (step, ce, siou, mse, l1, total, lr) goes to log_path unless it
 * is NULL. */
TTK_API ttk_status ttk_train(ttk_model* model, const ttk_config* cfg, const char* dataset_dir,
                             const char* log_path);

/* Track one sequence directory from its first ground-truth box; writes the
 * per-frame result file. out_mean_ms may be NULL. */
TTK_API ttk_status ttk_track_sequence(const ttk_model* model, const char* sequence_dir,
                                      const char* result_path, double* out_mean_ms);

/* Track every sequence under dataset_dir, writing <name>.txt files into
 * results_dir. jobs <= 0 means one worker per hardware thread. Output bytes
 * are independent of the job count. */
TTK_API ttk_status ttk_track_dataset(const ttk_model* model, const char* dataset_dir,
                                     const char* results_dir, int jobs);

/* Score result files in results_dir against ground truth in dataset_dir.
 * Writes metrics_path (TSV, pooled row first) and curve_path (success
 * curve TSV) unless NULL; out_report (optional) receives the aligned text
 * table. */
TTK_API ttk_status ttk_evaluate(const char* dataset_dir, const char* results_dir,
                                const char* metrics_path, const char* curve_path, char** out_report);

/* Autodiff-vs-central-difference checks over every op group. out_passed
 * (optional) is 1 when every op stays within tolerance. */
TTK_API ttk_status ttk_grad_check(uint64_t seed, int inputs, double tolerance, char** out_report,
                                  int* out_passed);

/* Grid of config overrides, e.g. "mask_ratio=0,0.5,0.9 use_trajectory=
 * true,false" (space-separated keys, comma-separated values, full cross
 * product). Each cell trains a fresh model on dataset_dir, tracks it, and
 * contributes one metrics row. Artifacts land under out_dir/cell_<i>;
 * out_table (optional) receives the TSV summary. */
TTK_API ttk_status ttk_ablate(const ttk_config* cfg, const char* grid, const char* dataset_dir,
                              const char* out_dir, char** out_table);

#ifdef __cplusplus
}
#endif

#endif /* TOKTRACK_H */
