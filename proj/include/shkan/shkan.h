/* C interface to the shkan engine. All functions return a shkan_status; on
 * failure shkan_last_error() describes the problem for the calling thread. */
#ifndef SHKAN_SHKAN_H
#define SHKAN_SHKAN_H

#include <stddef.h>
#include <stdint.h>

#if defined(SHKAN_BUILDING_LIBRARY)
#define SHKAN_API __attribute__((visibility("default")))
#else
#define SHKAN_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Values match the CLI exit codes. */
typedef enum shkan_status {
  SHKAN_OK = 0,
  SHKAN_E_ARGUMENT = 1,
  SHKAN_E_CONFIG = 2,
  SHKAN_E_DATA = 3,
  SHKAN_E_NUMERIC = 4,
  SHKAN_E_IO = 5,
  SHKAN_E_INTERNAL = 6
} shkan_status;

typedef enum shkan_codec { SHKAN_CODEC_FLOAT754 = 0, SHKAN_CODEC_FIXED = 1 } shkan_codec;
typedef enum shkan_residual { SHKAN_RESIDUAL_NONE = 0, SHKAN_RESIDUAL_IDENTITY = 1 } shkan_residual;

typedef struct shkan_tree shkan_tree;
typedef struct shkan_network shkan_network;

SHKAN_API const char* shkan_version(void);
/* Message of the last failed call on this thread; empty after a success. */
SHKAN_API const char* shkan_last_error(void);
/* Releases strings returned through char** out-parameters. */
SHKAN_API void shkan_free_string(char* s);

/* Single tree over one real input with the codec's default basis profile.
 * `bits` is the significand width for float754 and the key width for fixed. */
SHKAN_API int shkan_tree_create(shkan_codec codec, int bits, int out_dim, shkan_tree** out);
SHKAN_API void shkan_tree_destroy(shkan_tree* tree);
/* y and dy_dx have out_dim entries; dy_dx may be NULL. */
SHKAN_API int shkan_tree_predict(const shkan_tree* tree, double x, double* y, double* dy_dx);
SHKAN_API int shkan_tree_update(shkan_tree* tree, double x, const double* delta, double rate);
SHKAN_API int shkan_tree_node_count(const shkan_tree* tree, size_t* out);
SHKAN_API int shkan_tree_save(const shkan_tree* tree, const char* path);
SHKAN_API int shkan_tree_load(const char* path, shkan_tree** out);

/* Network with widths[0..count-1]; every layer uses `codec`. */
SHKAN_API int shkan_network_create(const int* widths, size_t count, shkan_residual residual, shkan_codec codec,
                                   int bits, shkan_network** out);
SHKAN_API void shkan_network_destroy(shkan_network* net);
SHKAN_API int shkan_network_predict(const shkan_network* net, const double* x, double* y);
/* One training sample with the normalized step; *skipped is set when the sample was dropped. */
SHKAN_API int shkan_network_train_step(shkan_network* net, const double* x, const double* target, double alpha,
                                       int* skipped);
SHKAN_API int shkan_network_derivative(const shkan_network* net, const double* x, int input_index, double* dy);
SHKAN_API int shkan_network_node_count(const shkan_network* net, size_t* out);
SHKAN_API int shkan_network_save(const shkan_network* net, const char* path);
SHKAN_API int shkan_network_load(const char* path, shkan_network** out);

/* Runs fit1d, kan, suite, mnist or bench from JSON config text. Relative data
 * paths resolve against base_dir (may be NULL). The summary JSON is returned
 * through *summary when non-NULL and must be released with shkan_free_string. */
SHKAN_API int shkan_run_experiment(const char* kind, const char* config_json, const char* output_dir,
                                   const char* base_dir, char** summary);
/* JSON description of a saved tree or network model. */
SHKAN_API int shkan_inspect(const char* path, char** report);

#ifdef __cplusplus
}
#endif

#endif
