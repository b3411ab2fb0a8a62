/* Exercises the shared library from plain C. */

#include <math.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#include "volcast/volcast.h"

static int failures = 0;

#define EXPECT(cond)                                                \
  do {                                                              \
    if (!(cond)) {                                                  \
      fprintf(stderr, "%s:%d: failed: %s\n", __FILE__, __LINE__, #cond); \
      ++failures;                                                   \
    }                                                               \
  } while (0)

static char* slurp(const char* path) {
  FILE* f = fopen(path, "rb");
  if (!f) return NULL;
  fseek(f, 0, SEEK_END);
  long n = ftell(f);
  fseek(f, 0, SEEK_SET);
  char* buf = malloc((size_t)n + 1);
  size_t got = fread(buf, 1, (size_t)n, f);
  buf[got] = '\0';
  fclose(f);
  return buf;
}

static void set(volcast_config* c, const char* k, const char* v) { EXPECT(volcast_config_set(c, k, v) == VOLCAST_OK); }

int main(void) {
  const char* tmp = VOLCAST_TEST_TMP;
  char path[1024], other[1024];

  EXPECT(strlen(volcast_version()) > 0);

  /* Configuration and error reporting. */
  volcast_config* cfg = NULL;
  EXPECT(volcast_config_new(&cfg) == VOLCAST_OK);
  EXPECT(volcast_config_set(cfg, "Bad Key", "1") == VOLCAST_ERR_VALIDATION);
  EXPECT(strlen(volcast_last_error()) > 0);
  EXPECT(volcast_config_set(NULL, "seed", "1") == VOLCAST_ERR_VALIDATION);
  const char* value = "sentinel";
  EXPECT(volcast_config_get(cfg, "seed", &value) == VOLCAST_OK && value == NULL);
  set(cfg, "seed", "4");
  EXPECT(volcast_config_get(cfg, "seed", &value) == VOLCAST_OK && strcmp(value, "4") == 0);
  char hash[17];
  EXPECT(volcast_config_hash(cfg, hash) == VOLCAST_ERR_VALIDATION); /* no data path yet */
  EXPECT(volcast_config_load(cfg, "/nonexistent/volcast.conf") == VOLCAST_ERR_VALIDATION);

  /* Ingest and featurize against the golden fixtures. */
  const char* inputs[] = {VOLCAST_FIXTURE_DIR "/tweets_raw.jsonl"};
  size_t rows = 0, rejected = 99, days = 0;
  snprintf(path, sizeof path, "%s/tweets.csv", tmp);
  EXPECT(volcast_ingest(inputs, 1, NULL, path, &rows, &rejected) == VOLCAST_OK);
  EXPECT(rows == 50 && rejected == 0);
  snprintf(other, sizeof other, "%s/features.csv", tmp);
  EXPECT(volcast_featurize(VOLCAST_FIXTURE_DIR "/candles.csv", path, other, &days) == VOLCAST_OK);
  EXPECT(days == 3);
  char* got = slurp(other);
  char* want = slurp(VOLCAST_FIXTURE_DIR "/features_golden.csv");
  EXPECT(got && want && strcmp(got, want) == 0);
  free(got);
  free(want);
  const char* missing[] = {"/nonexistent.jsonl"};
  EXPECT(volcast_ingest(missing, 1, NULL, path, NULL, NULL) == VOLCAST_ERR_VALIDATION);

  /* Synthetic data, training, rerun, report. */
  snprintf(path, sizeof path, "%s/data", tmp);
  set(cfg, "synth.days", "36");
  set(cfg, "synth.tweets_per_bin", "1");
  EXPECT(volcast_synth(cfg, path) == VOLCAST_OK);
  snprintf(other, sizeof other, "%s/data/candles.csv", tmp);
  set(cfg, "candles", other);
  snprintf(other, sizeof other, "%s/out", tmp);
  set(cfg, "out_dir", other);
  set(cfg, "train_days", "16");
  set(cfg, "validation_days", "8");
  set(cfg, "test_days", "8");
  set(cfg, "epochs", "1");
  set(cfg, "filters", "2");
  set(cfg, "runs", "2");
  EXPECT(volcast_config_hash(cfg, hash) == VOLCAST_OK && strlen(hash) == 16);

  volcast_runs* runs = NULL;
  EXPECT(volcast_train(cfg, &runs) == VOLCAST_OK);
  EXPECT(volcast_runs_count(runs) == 2);
  volcast_run_info info;
  EXPECT(volcast_runs_get(runs, 1, &info) == VOLCAST_OK);
  EXPECT(info.ok && info.seed == 5 && info.run_index == 1);
  EXPECT(strcmp(info.label, "TCN") == 0 && strcmp(info.config_hash, hash) == 0);
  EXPECT(isfinite(info.mape) && info.mape > 0.0);
  EXPECT(volcast_runs_get(runs, 2, &info) == VOLCAST_ERR_VALIDATION);

  volcast_run_info first;
  volcast_runs_get(runs, 0, &first);
  volcast_runs* again = NULL;
  EXPECT(volcast_rerun(first.manifest_path, &again) == VOLCAST_OK);
  volcast_run_info re;
  EXPECT(volcast_runs_get(again, 0, &re) == VOLCAST_OK);
  EXPECT(memcmp(&re.mape, &first.mape, sizeof(double)) == 0);
  EXPECT(memcmp(&re.msle, &first.msle, sizeof(double)) == 0);
  volcast_runs_free(again);

  volcast_text* summary = NULL;
  snprintf(path, sizeof path, "%s/report", tmp);
  EXPECT(volcast_report(runs, path, cfg, &summary) == VOLCAST_OK);
  EXPECT(strstr(volcast_text_data(summary), "TCN") != NULL);
  volcast_text_free(summary);
  volcast_runs_free(runs);

  /* A diverging run is a recorded failure, not an error. */
  set(cfg, "learning_rate", "1e300");
  set(cfg, "runs", "1");
  EXPECT(volcast_train(cfg, &runs) == VOLCAST_OK);
  EXPECT(volcast_runs_get(runs, 0, &info) == VOLCAST_OK && !info.ok && strlen(info.error) > 0);
  volcast_runs_free(runs);
  set(cfg, "learning_rate", "0.001");

  /* Ablation identity through the library. */
  volcast_text* table = NULL;
  int identity = 0;
  set(cfg, "ablation_runs", "1");
  EXPECT(volcast_ablate(cfg, "", &table, &identity) == VOLCAST_ERR_VALIDATION);
  EXPECT(volcast_ablate(cfg, "user;count,vader", &table, &identity) == VOLCAST_OK);
  EXPECT(identity == 1);
  EXPECT(strstr(volcast_text_data(table), "D-TCN_Count, VADER") != NULL);
  volcast_text_free(table);

  /* Search. */
  volcast_text* best = NULL;
  double best_mape = -1.0;
  set(cfg, "hpo.filters", "1:3");
  EXPECT(volcast_hpo(cfg, 2, 1, &best, &best_mape) == VOLCAST_OK);
  EXPECT(best_mape > 0.0 && strstr(volcast_text_data(best), "filters = ") != NULL);
  volcast_text_free(best);
  EXPECT(volcast_hpo(cfg, 0, 1, &best, NULL) == VOLCAST_ERR_VALIDATION);

  set(cfg, "model", "arrv");
  EXPECT(volcast_hpo(cfg, 1, 1, &best, NULL) == VOLCAST_ERR_VALIDATION);
  set(cfg, "colour", "blue");
  EXPECT(volcast_train(cfg, &runs) == VOLCAST_ERR_VALIDATION);
  EXPECT(strstr(volcast_last_error(), "colour") != NULL);

  volcast_config_free(cfg);
  if (failures) fprintf(stderr, "%d failure(s)\n", failures);
  else printf("C API: all checks passed\n");
  return failures ? 1 : 0;
}
