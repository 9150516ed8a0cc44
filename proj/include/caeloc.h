#ifndef CAELOC_H
#define CAELOC_H

/* C interface to the caeloc indoor-positioning toolchain.
 *
 * Conventions:
 *  - Every fallible call returns a caeloc_status; CAELOC_OK is zero.
 *  - On failure, caeloc_last_error() holds a message for the calling
 *    thread until the next failing call on that thread.
 *  - Functions with a char** out parameter allocate a NUL-terminated
 *    JSON string; release it with caeloc_string_free().
 *  - All strings are UTF-8.
 */

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

#ifndef CAELOC_API
#if defined(CAELOC_BUILD) && defined(__GNUC__)
#define CAELOC_API __attribute__((visibility("default")))
#else
#define CAELOC_API
#endif
#endif

#define CAELOC_VERSION_MAJOR 1
#define CAELOC_VERSION_MINOR 0
#define CAELOC_VERSION_PATCH 0

typedef enum caeloc_status {
    CAELOC_OK = 0,
    CAELOC_ERR_IO = 1,         /* file missing or unreadable/unwritable */
    CAELOC_ERR_PARSE = 2,      /* malformed CSV/JSON/model bytes */
    CAELOC_ERR_SCHEMA = 3,     /* well-formed input with wrong structure */
    CAELOC_ERR_VALIDATION = 4, /* values outside the documented ranges */
    CAELOC_ERR_CONFIG = 5,     /* bad run configuration */
    CAELOC_ERR_SHAPE = 6,      /* tensor dimension mismatch */
    CAELOC_ERR_STATE = 7,      /* call sequence not allowed (e.g. wrong precision) */
    CAELOC_ERR_NUMERIC = 8,    /* NaN/Inf or out-of-range arithmetic */
    CAELOC_ERR_INTERNAL = 9    /* invariant breakage; please report */
} caeloc_status;

/* Message for the most recent failure on this thread; never NULL. */
CAELOC_API const char* caeloc_last_error(void);

/* "major.minor.patch" */
CAELOC_API const char* caeloc_version(void);

CAELOC_API void caeloc_string_free(char* s);

/* Optional line-oriented progress sink (training epochs etc.). Pass NULL
 * to silence. The callback may fire from the calling thread only. */
typedef void (*caeloc_log_fn)(const char* line, void* user);
CAELOC_API void caeloc_set_logger(caeloc_log_fn fn, void* user);

/* ----- pipeline commands -------------------------------------------------
 * Each takes the run configuration as a JSON string (see README for the
 * schema; "seed" is mandatory) and writes its artifacts under the run
 * directory derived from that config. The returned JSON summarises the
 * artifact paths and headline numbers. */

CAELOC_API caeloc_status caeloc_run_prepare(const char* config_json, char** result_json);

CAELOC_API caeloc_status caeloc_run_train(const char* config_json, char** result_json);

CAELOC_API caeloc_status caeloc_run_quantize(const char* config_json, const char* model_path,
                                             char** result_json);

CAELOC_API caeloc_status caeloc_run_evaluate(const char* config_json, const char* model_path,
                                             char** result_json);

CAELOC_API caeloc_status caeloc_run_sweep_l(const char* config_json, const double* cell_lengths,
                                            size_t count, char** result_json);

CAELOC_API caeloc_status caeloc_run_sweep_noise(const char* config_json, const char* model_path,
                                                char** result_json);

CAELOC_API caeloc_status caeloc_run_bench(const char* config_json,
                                          const char* const* model_paths, size_t count,
                                          char** result_json);

/* Batch prediction over a CSV of fingerprint rows (same schema as the
 * training data). The model file must sit next to its grid file. */
CAELOC_API caeloc_status caeloc_run_predict(const char* model_path, const char* input_csv,
                                            char** result_json);

/* ----- model handle ------------------------------------------------------
 * Load once, predict many times. Handles are not thread-safe; share one
 * per thread or add external locking. */

typedef struct caeloc_model caeloc_model;

typedef struct caeloc_prediction {
    int class_id;       /* grid cell class */
    int building;       /* -1 when the dataset has no buildings */
    int floor;
    double x;           /* cell centroid, dataset coordinates (meters) */
    double y;
    double probability; /* softmax mass of the winning class */
} caeloc_prediction;

CAELOC_API caeloc_status caeloc_model_open(const char* path, caeloc_model** out);

/* JSON: precision, class/parameter counts, image side, payload bytes. */
CAELOC_API caeloc_status caeloc_model_info(const caeloc_model* model, char** result_json);

/* rssi: raw dBm readings in access-point order, `count` must equal the
 * dataset's access-point count; use the no-signal sentinel (100 for the
 * default schema) where nothing was heard. */
CAELOC_API caeloc_status caeloc_model_predict(caeloc_model* model, const double* rssi,
                                              size_t count, caeloc_prediction* out);

CAELOC_API void caeloc_model_close(caeloc_model* model);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* CAELOC_H */
