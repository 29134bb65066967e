#ifndef ATTRSEL_ATTRSEL_H
#define ATTRSEL_ATTRSEL_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(ATTRSEL_BUILDING_LIBRARY)
#    define ATTRSEL_API __declspec(dllexport)
#  else
#    define ATTRSEL_API __declspec(dllimport)
#  endif
#else
#  define ATTRSEL_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum as_status {
  AS_OK = 0,
  AS_ERR_INVALID_ARGUMENT,
  AS_ERR_PARSE,
  AS_ERR_IO,
  AS_ERR_SIZE_MISMATCH,
  AS_ERR_NON_FINITE,
  AS_ERR_LABEL_OUT_OF_RANGE,
  AS_ERR_DIM_MISMATCH,
  AS_ERR_SHAPE_MISMATCH,
  AS_ERR_ZERO_ROW,
  AS_ERR_ZERO_VECTOR,
  AS_ERR_EMPTY_POOL,
  AS_ERR_TOO_MANY_FOR_ORTHONORMAL,
  AS_ERR_CONFIG,
  AS_ERR_BAD_K,
  AS_ERR_K_TOO_LARGE,
  AS_ERR_TOO_FEW_ROWS,
  AS_ERR_FACTORIZATION_FAILED,
  AS_ERR_DIVERGENCE,
  AS_ERR_BAD_CLASS,
  AS_ERR_EMPTY_CLASS,
  AS_ERR_BAD_INDEX,
  AS_ERR_EMPTY_NAME,
  AS_ERR_TOO_FEW_CLASSES,
  AS_ERR_NOT_FOUND,
  AS_ERR_INTERNAL
} as_status;

/* Short identifier such as "DimMismatch". Never NULL. */
ATTRSEL_API const char* as_status_name(as_status status);

/* Message of the last failed call on this thread; "" after a success. */
ATTRSEL_API const char* as_last_error_message(void);

/* Frees strings returned through char** out-parameters. */
ATTRSEL_API void as_string_free(char* s);

/* Progress messages go to stderr unless quiet is non-zero. */
ATTRSEL_API void as_set_quiet(int quiet);

typedef struct as_image_set as_image_set;
typedef struct as_attribute_pool as_attribute_pool;
typedef struct as_selection as_selection;
typedef struct as_probe_model as_probe_model;

/* ---- embeddings ---- */

ATTRSEL_API as_status as_image_set_load(const char* manifest_path, as_image_set** out);
/* Rows are copied and L2-normalized; labels index class_names. */
ATTRSEL_API as_status as_image_set_create(const double* rows, size_t count, size_t dim, const int* labels,
                                          const char* const* class_names, size_t class_count,
                                          as_image_set** out);
ATTRSEL_API as_status as_image_set_save(const as_image_set* images, const char* manifest_path);
ATTRSEL_API void as_image_set_free(as_image_set* images);
ATTRSEL_API size_t as_image_set_count(const as_image_set* images);
ATTRSEL_API size_t as_image_set_dim(const as_image_set* images);
ATTRSEL_API size_t as_image_set_class_count(const as_image_set* images);
ATTRSEL_API as_status as_image_set_label(const as_image_set* images, size_t row, int* out);
ATTRSEL_API as_status as_image_set_class_name(const as_image_set* images, size_t class_index, const char** out);
ATTRSEL_API as_status as_image_set_class_index(const as_image_set* images, const char* name, size_t* out);

ATTRSEL_API as_status as_pool_load(const char* manifest_path, as_attribute_pool** out);
ATTRSEL_API as_status as_pool_create(const double* rows, size_t count, size_t dim, const char* const* names,
                                     as_attribute_pool** out);
ATTRSEL_API as_status as_pool_save(const as_attribute_pool* pool, const char* manifest_path);
ATTRSEL_API void as_pool_free(as_attribute_pool* pool);
ATTRSEL_API size_t as_pool_size(const as_attribute_pool* pool);
ATTRSEL_API size_t as_pool_dim(const as_attribute_pool* pool);
ATTRSEL_API as_status as_pool_name(const as_attribute_pool* pool, size_t index, const char** out);
ATTRSEL_API as_status as_pool_index_of(const as_attribute_pool* pool, const char* name, size_t* out);

/* JSON {dim, pool_size, image_count, class_count, class_counts}. */
ATTRSEL_API as_status as_validate(const as_image_set* images, const as_attribute_pool* pool, char** report_json);

/* Cosine scores of every image against the listed pool rows (all rows when
   indices is NULL), saved as a score_matrix manifest. */
ATTRSEL_API as_status as_project_save(const as_image_set* images, const as_attribute_pool* pool,
                                      const size_t* indices, size_t k, const char* manifest_path);

/* ---- synthetic data ---- */

typedef struct as_planted_config {
  size_t classes;
  size_t dim;
  size_t planted_attrs;
  size_t distractor_attrs;
  size_t train_per_class;
  size_t test_per_class;
  double noise_sigma;
  double shared_weight;
  uint64_t seed;
} as_planted_config;

ATTRSEL_API void as_planted_config_init(as_planted_config* cfg);

/* info_json receives {config, planted_indices, class_attributes, class_weights}. */
ATTRSEL_API as_status as_synth_planted(const as_planted_config* cfg, as_image_set** train, as_image_set** test,
                                       as_attribute_pool** pool, char** info_json);
ATTRSEL_API as_status as_synth_random_pool(size_t n, size_t dim, uint64_t seed, int orthonormalize,
                                           as_attribute_pool** out);
ATTRSEL_API as_status as_synth_similar_pool(size_t n, size_t dim, double spread, uint64_t seed,
                                            as_attribute_pool** out);

/* ---- training options ---- */

typedef struct as_train_options {
  size_t k;
  double lambda;
  const char* reg;  /* "mah", "cos" or "ce" */
  double lr;
  size_t max_epochs;
  size_t batch_size;
  uint64_t seed;
  double val_fraction;
  size_t eval_every;
  size_t patience;
  const char* init; /* "pool_subset" or "gaussian" */
  double init_jitter;
  double adam_beta1;
  double adam_beta2;
  double adam_eps;
  double ridge_scale;
} as_train_options;

ATTRSEL_API void as_train_options_init(as_train_options* opts);

/* ---- selection ---- */

/* method: "learned", "kmeans", "uniform", "svd" or "similarity". With
   lambda_grid set, the learned method tries each grid value and keeps the
   best validation accuracy. */
ATTRSEL_API as_status as_select(const as_image_set* images, const as_attribute_pool* pool, const char* method,
                                const as_train_options* opts, int lambda_grid, as_selection** out);
ATTRSEL_API as_status as_selection_from_json(const char* json, as_selection** out);
ATTRSEL_API as_status as_selection_to_json(const as_selection* selection, char** out);
ATTRSEL_API as_status as_selection_check(const as_selection* selection, const as_attribute_pool* pool);
ATTRSEL_API void as_selection_free(as_selection* selection);
ATTRSEL_API size_t as_selection_k(const as_selection* selection);
ATTRSEL_API as_status as_selection_index(const as_selection* selection, size_t position, size_t* out);
ATTRSEL_API as_status as_selection_name(const as_selection* selection, size_t position, const char** out);

/* ---- probes ---- */

/* warm_start_json: NULL for W = 0, b = 0, or a head {"weights", "bias"}
   (a selection or probe JSON carrying "head" also works). */
ATTRSEL_API as_status as_probe_train(const as_image_set* train, const as_image_set* test,
                                     const as_attribute_pool* pool, const as_selection* selection,
                                     const char* warm_start_json, const as_train_options* opts,
                                     as_probe_model** out);
ATTRSEL_API as_status as_probe_from_json(const char* json, as_probe_model** out);
ATTRSEL_API as_status as_probe_to_json(const as_probe_model* model, char** out);
ATTRSEL_API void as_probe_free(as_probe_model* model);
/* AS_ERR_NOT_FOUND when the model carries no test accuracy. */
ATTRSEL_API as_status as_probe_test_accuracy(const as_probe_model* model, double* out);
/* Column of the named attribute in the model's selection. */
ATTRSEL_API as_status as_probe_attribute_position(const as_probe_model* model, const char* name, size_t* out);
ATTRSEL_API as_status as_probe_evaluate(const as_probe_model* model, const as_image_set* images,
                                        const as_attribute_pool* pool, double* accuracy);

/* Linear(D -> k) then Linear(k -> K_C). JSON {k, test_acc, train_acc, val_acc, training}. */
ATTRSEL_API as_status as_image_probe(const as_image_set* train, const as_image_set* test, size_t k,
                                     const as_train_options* opts, char** result_json);

/* ---- interpretation ---- */

/* JSON {class, class_index, top: [{position, name, mean_importance}]}. */
ATTRSEL_API as_status as_explain(const as_probe_model* model, const as_image_set* test,
                                 const as_attribute_pool* pool, size_t class_index, size_t top_n,
                                 char** report_json);

/* JSON {image, attribute, position, delta, label, old_pred, new_pred, flipped,
   old_logits, new_logits, logit_delta}. */
ATTRSEL_API as_status as_intervene(const as_probe_model* model, const as_image_set* test,
                                   const as_attribute_pool* pool, size_t image, size_t position, double delta,
                                   char** report_json);

/* ---- prompts ---- */

/* domain may be NULL. */
ATTRSEL_API as_status as_prompt_instance(const char* class_name, const char* domain, char** out);
ATTRSEL_API as_status as_prompt_batch(const char* group_name, const char* const* class_names, size_t count,
                                      char** out);
/* Newline-delimited attribute list; *empty is set when nothing was found. */
ATTRSEL_API as_status as_prompt_parse(const char* response_text, char** attributes, int* empty);

#ifdef __cplusplus
}
#endif

#endif
