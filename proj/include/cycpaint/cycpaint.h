/* SPDX-License-Identifier: Apache-2.0 */
/*
 * C interface to the cycpaint library.
 *
 * Every function returns a cycp_status. On failure the message of the most
 * recent error on the calling thread is available from cycp_last_error().
 * Handles are opaque and must be released with the matching _destroy call.
 * Strings returned through out-parameters are owned by the library and must be
 * released with cycp_string_free.
 */

#ifndef CYCPAINT_H
#define CYCPAINT_H

#include <stddef.h>
#include <stdint.h>

#if defined(CYCPAINT_BUILDING_LIBRARY)
#define CYCP_API __attribute__((visibility("default")))
#else
#define CYCP_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum cycp_status {
  CYCP_OK = 0,
  CYCP_ERR_USAGE = 1,
  CYCP_ERR_CONFIG = 2,
  CYCP_ERR_SHAPE_MISMATCH = 3,
  CYCP_ERR_GEOMETRY = 4,
  CYCP_ERR_IO = 5,
  CYCP_ERR_CHECKPOINT = 6,
  CYCP_ERR_NON_FINITE = 7,
  CYCP_ERR_EMPTY_INPUT = 8,
  CYCP_ERR_INTERNAL = 9
} cycp_status;

typedef enum cycp_direction { CYCP_INPAINT = 0, CYCP_OUTPAINT = 1 } cycp_direction;

typedef struct cycp_config cycp_config;
typedef struct cycp_model cycp_model;

/* Message of the last failure on this thread; "" when none. */
CYCP_API const char* cycp_last_error(void);

/* Stable lowercase name of a status, e.g. "shape-mismatch". */
CYCP_API const char* cycp_status_category(cycp_status status);

CYCP_API const char* cycp_version(void);

CYCP_API void cycp_string_free(char* s);

/* --- configuration ------------------------------------------------------ */

CYCP_API cycp_status cycp_config_create(cycp_config** out);
CYCP_API cycp_status cycp_config_load_file(const char* path, cycp_config** out);
CYCP_API void cycp_config_destroy(cycp_config* cfg);

/* Sets one key from its text form; unknown keys are config errors. */
CYCP_API cycp_status cycp_config_set(cycp_config* cfg, const char* key, const char* value);

/* Accepts "key=value". */
CYCP_API cycp_status cycp_config_apply_override(cycp_config* cfg, const char* assignment);
CYCP_API cycp_status cycp_config_get(const cycp_config* cfg, const char* key, char** value);
CYCP_API cycp_status cycp_config_to_text(const cycp_config* cfg, char** text);
CYCP_API cycp_status cycp_config_validate(const cycp_config* cfg);

/* --- training ----------------------------------------------------------- */

/* Called after every step with the step number and the step's loss record as
 * a JSON line. Returning nonzero is ignored. */
typedef void (*cycp_step_callback)(long step, const char* report_json, void* user);

/* Trains on the training split of the configured data. `out_dir` overrides
 * the config's out_dir when non-null. `resume_from` may be null. The path of
 * the final checkpoint is returned through `final_checkpoint` when non-null. */
CYCP_API cycp_status cycp_train(const cycp_config* cfg, const char* out_dir, const char* resume_from,
                                cycp_step_callback callback, void* user, char** final_checkpoint);

/* --- inference ---------------------------------------------------------- */

CYCP_API cycp_status cycp_model_load(const char* checkpoint_path, cycp_model** out);
CYCP_API void cycp_model_destroy(cycp_model* model);
CYCP_API int cycp_model_resolution(const cycp_model* model);

/* Copy of the training config stored in the checkpoint. */
CYCP_API cycp_status cycp_model_config(const cycp_model* model, cycp_config** out);

/* Mask source for restoration: a PNG path, or a sampled square. */
typedef struct cycp_mask_source {
  const char* mask_path; /* used when non-null */
  double min_fraction;
  double max_fraction;
  uint64_t seed;
} cycp_mask_source;

/* Restores one image file. The image is center-cropped and resized to the
 * model resolution; an explicit mask must already have that size.
 * `raw_out` may be null. */
CYCP_API cycp_status cycp_restore_file(const cycp_model* model, cycp_direction direction, const char* image_path,
                                       const cycp_mask_source* mask, const char* restored_out, const char* raw_out);

/* Scores the test split (or every image, when split_ratio <= 0) of `data`
 * and writes a JSONL report to `report_path` when non-null. */
CYCP_API cycp_status cycp_evaluate(const cycp_model* model, const char* data, double split_ratio,
                                   uint64_t split_seed, double min_fraction, double max_fraction,
                                   uint64_t seed, const char* report_path, double* mean_psnr);

/* Renders a result grid of the first `rows` images of the test split. */
CYCP_API cycp_status cycp_render(const cycp_model* model, cycp_direction direction, const char* data,
                                 double split_ratio, uint64_t split_seed, int rows, uint64_t seed, int gutter,
                                 const char* path);

/* --- masks and metrics ---------------------------------------------------- */

/* Writes `count` masks as mask_NNNNN.png plus a .json sidecar each. */
CYCP_API cycp_status cycp_make_masks(int height, int width, double min_fraction, double max_fraction,
                                     uint64_t seed, int count, const char* out_dir);

/* Square mask cells (1 = hole), row major, into `cells` of height*width bytes. */
CYCP_API cycp_status cycp_sample_mask(int height, int width, double min_fraction, double max_fraction,
                                      uint64_t seed, uint8_t* cells, int* top, int* left, int* side);

/* PSNR of two image files decoded at native size. */
CYCP_API cycp_status cycp_psnr_files(const char* a, const char* b, double* out);

#ifdef __cplusplus
}
#endif

#endif /* CYCPAINT_H */
