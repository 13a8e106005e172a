/* C interface to the inti library: video ViT with InTI frame compression,
 * cost model and synthetic-video training harness.
 *
 * Every function returning inti_status reports failures through the status
 * code; inti_last_error() then describes the most recent failure on the
 * calling thread. Strings returned through char** are owned by the caller
 * and released with inti_string_free(). Handles are released with their
 * *_free function; passing NULL to a *_free function is a no-op. */
#ifndef INTI_INTI_H
#define INTI_INTI_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define INTI_API __declspec(dllexport)
#else
#define INTI_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum inti_status {
  INTI_OK = 0,
  INTI_ERR_INTERNAL = 1,
  INTI_ERR_CONFIG = 2,
  INTI_ERR_NUMERIC = 3,
  INTI_ERR_SHAPE = 4,
  INTI_ERR_CONTRACT = 5,
  INTI_ERR_IO = 6
} inti_status;

typedef struct inti_model inti_model;
typedef struct inti_dataset inti_dataset;

INTI_API const char* inti_version(void);
INTI_API const char* inti_last_error(void);
INTI_API const char* inti_status_name(inti_status status);
INTI_API void inti_string_free(char* s);

/* ---- datasets ---------------------------------------------------------- */

/* spec_json: {"clips", "frames", "image_size", "num_classes", "shape_size",
 * "speed", "noise"}; missing keys take defaults. */
INTI_API inti_status inti_dataset_generate(const char* spec_json, uint64_t seed, const char* split,
                                           inti_dataset** out);
/* Train and test splits from one seed, written to <dir>/train and <dir>/test. */
INTI_API inti_status inti_dataset_generate_splits(const char* train_spec_json,
                                                  const char* test_spec_json, uint64_t seed,
                                                  const char* dir, char** summary_json);
INTI_API inti_status inti_dataset_load(const char* dir, inti_dataset** out);
INTI_API inti_status inti_dataset_save(const inti_dataset* d, const char* dir);
INTI_API size_t inti_dataset_size(const inti_dataset* d);
INTI_API inti_status inti_dataset_label(const inti_dataset* d, size_t index, size_t* label);
INTI_API void inti_dataset_free(inti_dataset* d);

/* ---- models ------------------------------------------------------------ */

/* Fresh model from an experiment config (model, stages, frames, seed). */
INTI_API inti_status inti_model_create(const char* experiment_json, inti_model** out);
INTI_API inti_status inti_model_load(const char* checkpoint_dir, inti_model** out);
INTI_API inti_status inti_model_save(const inti_model* m, const char* checkpoint_dir);
INTI_API void inti_model_free(inti_model* m);
/* {"config", "frames", "stages", "parameters", "experiment"} */
INTI_API inti_status inti_model_info(const inti_model* m, char** info_json);
/* clip: frames * image_size * image_size * channels values in [T, H, W, C]
 * order. logits receives num_classes values. */
INTI_API inti_status inti_model_forward(const inti_model* m, const double* clip, size_t clip_len,
                                        double* logits, size_t logits_len);
/* Regenerates the test split of the experiment the model was created or
 * trained with. Config error if the checkpoint carries no experiment. */
INTI_API inti_status inti_model_test_data(const inti_model* m, inti_dataset** out);
INTI_API inti_status inti_model_evaluate(const inti_model* m, const inti_dataset* d,
                                         size_t threads, double* accuracy_percent);

/* ---- training ---------------------------------------------------------- */

/* Called after every epoch with that epoch's metrics as JSON. */
typedef void (*inti_epoch_fn)(const char* metrics_json, void* user);

/* Trains from an experiment config. data_dir may be NULL, in which case both
 * splits are generated from the config; otherwise <data_dir>/train and
 * <data_dir>/test are used. Writes <out_dir>/checkpoint and
 * <out_dir>/metrics.json; result_json receives the metrics document. */
INTI_API inti_status inti_train(const char* experiment_json, const char* data_dir,
                                const char* out_dir, inti_epoch_fn on_epoch, void* user,
                                char** result_json);

/* ---- cost model -------------------------------------------------------- */

/* report_json: the full cost report. table: aligned text, may be NULL. */
INTI_API inti_status inti_flops(const char* experiment_json, char** report_json, char** table);
/* Naive plus InTI_{3,5}, InTI_{5,7}, InTI_{7,9} for "vit-b16" or "vit-l14". */
INTI_API inti_status inti_flops_table(const char* preset, size_t frames, char** report_json,
                                      char** table);

/* ---- visualization ----------------------------------------------------- */

INTI_API inti_status inti_export_heatmaps(const inti_model* m, const inti_dataset* d,
                                          size_t clip_index, const char* out_dir,
                                          char** summary_json);

#ifdef __cplusplus
}
#endif

#endif /* INTI_INTI_H */
