/* C interface to the kgsw recommender library.
 *
 * Every fallible call returns a kgsw_status; on failure kgsw_last_error()
 * holds a message for the calling thread. Strings returned through char**
 * out-parameters are owned by the caller and released with
 * kgsw_free_string(). Document-style calls take and return JSON text.
 */
#ifndef KGSW_KGSW_H
#define KGSW_KGSW_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define KGSW_API __declspec(dllexport)
#else
#define KGSW_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum kgsw_status {
  KGSW_OK = 0,
  KGSW_ERR_IO = 1,
  KGSW_ERR_PARSE = 2,
  KGSW_ERR_CONFIG = 3,
  KGSW_ERR_LOOKUP = 4,
  KGSW_ERR_NUMERIC = 5,
  KGSW_ERR_UNDEFINED_METRIC = 6,
  KGSW_ERR_PARTITION_MISMATCH = 7,
  KGSW_ERR_INVALID_ARGUMENT = 8,
  KGSW_ERR_INTERNAL = 9
} kgsw_status;

KGSW_API const char* kgsw_version(void);
KGSW_API const char* kgsw_status_string(kgsw_status status);
/* Message of the last failed call on this thread; "" if none. */
KGSW_API const char* kgsw_last_error(void);
KGSW_API void kgsw_free_string(char* s);

/* Receives non-fatal diagnostics; NULL restores the stderr default. */
typedef void (*kgsw_warning_fn)(const char* message, void* user_data);
KGSW_API void kgsw_set_warning_handler(kgsw_warning_fn fn, void* user_data);

/* Knowledge graph */
typedef struct kgsw_kg kgsw_kg;

KGSW_API kgsw_status kgsw_kg_load(const char* triple_file, kgsw_kg** out);
KGSW_API kgsw_status kgsw_kg_from_triples(const uint32_t* heads, const uint32_t* relations,
                                          const uint32_t* tails, size_t count,
                                          kgsw_kg** out);
KGSW_API void kgsw_kg_free(kgsw_kg* kg);
KGSW_API size_t kgsw_kg_num_entities(const kgsw_kg* kg);
KGSW_API size_t kgsw_kg_num_relations(const kgsw_kg* kg);
KGSW_API size_t kgsw_kg_num_triples(const kgsw_kg* kg);
KGSW_API kgsw_status kgsw_kg_degree(const kgsw_kg* kg, uint32_t entity, size_t* out);

/* Per-stage neighbor sample: exactly K (relation, tail) slots per entity. */
typedef struct kgsw_stage_graph kgsw_stage_graph;

KGSW_API kgsw_status kgsw_stage_graph_sample(const kgsw_kg* kg, size_t k, uint64_t seed,
                                             kgsw_stage_graph** out);
KGSW_API void kgsw_stage_graph_free(kgsw_stage_graph* graph);
KGSW_API size_t kgsw_stage_graph_k(const kgsw_stage_graph* graph);
/* Writes K entries into each array; capacity must be >= K. */
KGSW_API kgsw_status kgsw_stage_graph_neighbors(const kgsw_stage_graph* graph,
                                                uint32_t entity, uint32_t* relations,
                                                uint32_t* tails, size_t capacity);

/* Metrics */
KGSW_API kgsw_status kgsw_auc(const double* scores, const uint8_t* labels, size_t n,
                              double* out);

/* Pipeline. Requests and results are JSON documents. */

/* {"ratings","kg","item_entity","rule","seed","out_dir"} -> stats */
KGSW_API kgsw_status kgsw_ingest(const char* request_json, char** result_json);
/* {"synth":{...},"seed","out_dir"} -> stats */
KGSW_API kgsw_status kgsw_synth(const char* request_json, char** result_json);
/* Fully populated run config with defaults; `overrides_json` may be NULL. */
KGSW_API kgsw_status kgsw_run_config(const char* overrides_json, char** config_json);
/* Run config -> stage report */
KGSW_API kgsw_status kgsw_train(const char* config_json, char** report_json);
/* Run directory or checkpoint file -> evaluation */
KGSW_API kgsw_status kgsw_evaluate(const char* path, char** result_json);
/* {"config":{...},"grid":{"sample_sizes","hops","modes"},"jobs"} -> summary */
KGSW_API kgsw_status kgsw_ablate(const char* request_json, char** result_json);
/* Names and settings of the built-in dataset rules. */
KGSW_API kgsw_status kgsw_dataset_rules(char** result_json);

#ifdef __cplusplus
}
#endif

#endif /* KGSW_KGSW_H */
