#ifndef VOLCAST_H
#define VOLCAST_H

/* C interface to the volcast library. Every call returns a volcast_status;
 * on failure volcast_last_error() describes the problem for the calling
 * thread. Objects are opaque and released with their *_free function. */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define VOLCAST_API __declspec(dllexport)
#else
#define VOLCAST_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum volcast_status {
  VOLCAST_OK = 0,
  VOLCAST_ERR_VALIDATION = 1, /* bad configuration, argument or input file */
  VOLCAST_ERR_RUNTIME = 2     /* the work itself failed */
} volcast_status;

typedef struct volcast_config volcast_config;
typedef struct volcast_runs volcast_runs;
typedef struct volcast_text volcast_text;

typedef struct volcast_run_info {
  const char* label;
  const char* config_hash;
  const char* manifest_path; /* empty when the runs were not written */
  uint64_t seed;
  size_t run_index;
  int ok;
  const char* error;
  double mape, mae, rmse, msle;
} volcast_run_info;

VOLCAST_API const char* volcast_version(void);
/* Message of the last failed call on this thread; "" when none. */
VOLCAST_API const char* volcast_last_error(void);

/* key = value settings. Later loads and sets override earlier ones. */
VOLCAST_API volcast_status volcast_config_new(volcast_config** out);
VOLCAST_API volcast_status volcast_config_load(volcast_config* config, const char* path);
VOLCAST_API volcast_status volcast_config_set(volcast_config* config, const char* key, const char* value);
/* *value is NULL when the key is not set; it stays valid until the key changes. */
VOLCAST_API volcast_status volcast_config_get(const volcast_config* config, const char* key, const char** value);
/* Checks the experiment settings and writes the 16-digit hash plus a NUL. */
VOLCAST_API volcast_status volcast_config_hash(const volcast_config* config, char out[17]);
VOLCAST_API void volcast_config_free(volcast_config* config);

VOLCAST_API const char* volcast_text_data(const volcast_text* text);
VOLCAST_API void volcast_text_free(volcast_text* text);

/* Raw JSON Lines tweets to the sorted tweet table. lexicon_dir may be NULL
 * for the bundled lexicon. rows and rejected may be NULL. */
VOLCAST_API volcast_status volcast_ingest(const char* const* inputs, size_t n_inputs, const char* lexicon_dir,
                                          const char* out_path, size_t* rows, size_t* rejected);
/* Candles plus optional tweet table (NULL) to the daily feature panel. */
VOLCAST_API volcast_status volcast_featurize(const char* candles, const char* tweets, const char* out_path,
                                             size_t* days);
/* Writes candles.csv and tweets.csv from the synth.* settings and seed. */
VOLCAST_API volcast_status volcast_synth(const volcast_config* config, const char* out_dir);

VOLCAST_API volcast_status volcast_train(const volcast_config* config, volcast_runs** out);
VOLCAST_API volcast_status volcast_rerun(const char* manifest_path, volcast_runs** out);
/* Reads manifests from files or directories (searched recursively). */
VOLCAST_API volcast_status volcast_runs_load(const char* const* paths, size_t n_paths, volcast_runs** out);
VOLCAST_API size_t volcast_runs_count(const volcast_runs* runs);
/* Strings in *info live as long as runs. */
VOLCAST_API volcast_status volcast_runs_get(const volcast_runs* runs, size_t index, volcast_run_info* info);
VOLCAST_API void volcast_runs_free(volcast_runs* runs);

/* subsets: "all" or feature sets separated by ';', e.g. "user;count,user".
 * The significance table is returned as text. identity_holds may be NULL. */
VOLCAST_API volcast_status volcast_ablate(const volcast_config* config, const char* subsets, volcast_text** table,
                                          int* identity_holds);
/* Random search using hpo.* ranges from config. Writes out_dir/hpo/trials.csv
 * and out_dir/hpo/best.conf; returns the best settings as config lines. */
VOLCAST_API volcast_status volcast_hpo(const volcast_config* config, size_t budget, int include_default,
                                       volcast_text** best, double* best_mape);
/* Tables and plots for a run set; report settings come from config (may be NULL). */
VOLCAST_API volcast_status volcast_report(const volcast_runs* runs, const char* out_dir,
                                          const volcast_config* config, volcast_text** summary);

#ifdef __cplusplus
}
#endif

#endif
