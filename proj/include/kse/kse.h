/*
 * Copyright 2026 KSE toolkit contributors.
 * SPDX-License-Identifier: Apache-2.0
 *
 * C API of the KSE compression toolkit. All objects are opaque handles;
 * every function returns a kse_status and writes results through out
 * parameters. On failure, kse_last_error() returns a thread-local message
 * with details.
 */
#ifndef KSE_KSE_H
#define KSE_KSE_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#ifndef KSE_API
#if defined(_WIN32)
#define KSE_API __declspec(dllexport)
#else
#define KSE_API __attribute__((visibility("default")))
#endif
#endif

typedef enum kse_status {
  KSE_OK = 0,
  KSE_ERROR_INVALID_ARGUMENT = 1,
  KSE_ERROR_IO = 2,
  KSE_ERROR_PARSE = 3,
  KSE_ERROR_CORRUPT = 4,
  KSE_ERROR_SHAPE = 5,
  KSE_ERROR_CONFIG = 6,
  KSE_ERROR_STATE = 7,
  KSE_ERROR_DEGENERATE = 8,
  KSE_ERROR_INTERNAL = 9
} kse_status;

typedef struct kse_model kse_model;
typedef struct kse_report kse_report;
typedef struct kse_dataset kse_dataset;

/* Static name of a status code. */
KSE_API const char* kse_status_name(kse_status status);
/* Thread-local detail message of the most recent failure. */
KSE_API const char* kse_last_error(void);

/* --- Models (manifest + blob files; `path` may omit the suffix) --- */
KSE_API kse_status kse_model_load(const char* path, kse_model** out);
KSE_API kse_status kse_model_save(const kse_model* model, const char* path);
KSE_API void kse_model_free(kse_model* model);
KSE_API int kse_model_is_compressed(const kse_model* model);
KSE_API kse_status kse_model_input_shape(const kse_model* model, int* channels,
                                         int* height, int* width);
KSE_API int kse_model_layer_count(const kse_model* model);

/* --- Datasets --- */
KSE_API kse_status kse_dataset_load(const char* dir, kse_dataset** out);
KSE_API void kse_dataset_free(kse_dataset* dataset);
KSE_API int kse_dataset_size(const kse_dataset* dataset);

/* --- Analysis --- */
typedef struct kse_analyze_options {
  int k_neighbors; /* default 5 */
  double alpha;    /* default 1.0 */
  int workers;     /* 0 = auto */
} kse_analyze_options;

KSE_API void kse_analyze_options_init(kse_analyze_options* options);
KSE_API kse_status kse_analyze(const kse_model* model,
                               const kse_analyze_options* options,
                               kse_report** out);
KSE_API kse_status kse_report_save(const kse_report* report, const char* path);
KSE_API kse_status kse_report_load(const char* path, kse_report** out);
KSE_API void kse_report_free(kse_report* report);

/* --- Compression --- */
typedef struct kse_compress_options {
  int granularity; /* G, default 4 */
  int shift;       /* T, default 0 */
  int k_neighbors; /* default 5 */
  double alpha;    /* default 1.0 */
  uint64_t seed;
  int kmeans_max_iters; /* default 100 */
  double kmeans_tol;    /* default 1e-6 */
  int workers;
} kse_compress_options;

KSE_API void kse_compress_options_init(kse_compress_options* options);
/* `report` may be NULL; analysis then runs inline with the same options. */
KSE_API kse_status kse_compress(const kse_model* model,
                                const kse_report* report,
                                const kse_compress_options* options,
                                kse_model** out);

/* --- Evaluation --- */
KSE_API kse_status kse_evaluate(const kse_model* model,
                                const kse_dataset* dataset, int workers,
                                double* accuracy);
/* Top-1 agreement between two models plus the max relative output gap. */
KSE_API kse_status kse_agreement(const kse_model* model_a,
                                 const kse_model* model_b,
                                 const kse_dataset* dataset, int workers,
                                 double* top1_agreement,
                                 double* max_relative_diff);

/* --- Ratio report --- */
/* Returned strings are heap-allocated; release with kse_string_free. */
KSE_API kse_status kse_ratio_report_text(const kse_model* dense,
                                         const kse_model* compressed,
                                         char** text_out);
KSE_API kse_status kse_ratio_report_json(const kse_model* dense,
                                         const kse_model* compressed,
                                         char** json_out);
KSE_API void kse_string_free(char* s);

/* --- Fine-tuning --- */
typedef struct kse_finetune_options {
  double learning_rate; /* default 0.01 */
  double momentum;      /* default 0.9 */
  int epochs;           /* default 5 */
  int batch_size;       /* default 32 */
  uint64_t seed;
  double weight_decay; /* default 0 */
  int update_exempt;   /* default 0: centroids only */
  int workers;
} kse_finetune_options;

KSE_API void kse_finetune_options_init(kse_finetune_options* options);
/* Updates the model in place. loss_trace (length epochs) may be NULL. */
KSE_API kse_status kse_finetune(kse_model* model, const kse_dataset* dataset,
                                const kse_finetune_options* options,
                                double* loss_trace);

/* --- Correlation study --- */
KSE_API kse_status kse_correlation_study(const kse_model* model,
                                         const kse_dataset* dataset,
                                         int layer_index, double quantile,
                                         int workers, double* rho_sparsity,
                                         double* rho_richness);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* KSE_KSE_H */
