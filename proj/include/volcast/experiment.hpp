#pragma once

// Experiment orchestration: key=value configuration, seeded repeated runs
// with manifests, the feature ablation matrix, random hyperparameter search
// and report emission.

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "volcast/eval.hpp"
#include "volcast/features.hpp"
#include "volcast/ingest.hpp"
#include "volcast/models.hpp"
#include "volcast/synth.hpp"

namespace volcast::experiment {

/// Bad configuration or arguments; the CLI maps it to exit code 1.
struct ValidationError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// ---- configuration -------------------------------------------------------------

/// Grammar: one `key = value` per line. `#` starts a comment, blank lines are
/// skipped, keys are made of [a-z0-9_.-], values are trimmed. A key may
/// appear only once per file.
using KeyValues = std::map<std::string, std::string>;
KeyValues parse_key_values(std::string_view text);
KeyValues read_key_values(const std::filesystem::path& path);

enum class Method { tcn, dtcn, lstm, gru, arrv, garch, constant_mean };
std::string to_string(Method m);
Method parse_method(const std::string& s);
bool is_neural(Method m);

struct Hyperparameters {
  std::size_t filters = 287;  // TCN filters or recurrent units
  double dropout = 0.217;
  double epsilon = 0.0913;
  double learning_rate = 6.49e-5;
  double weight_decay = 5.93e-6;
  int kernel = 5;
  int dilation_base = 4;
  bool skip_connections = true;
  nn::Normalization normalization = nn::Normalization::none;
  std::size_t bottleneck = 8;
  int layers = 0;
  std::size_t lower_dim = 4;

  bool operator==(const Hyperparameters&) const = default;
};

/// Tuned defaults for each architecture.
Hyperparameters default_hyperparameters(Method m);

struct ExperimentConfig {
  std::string candles;  // candle CSV
  std::string tweets;   // ingested tweet CSV
  std::string panel;    // featurized panel CSV; used instead of the two above when set
  std::string out_dir = "volcast-out";

  Method model = Method::tcn;
  features::FeatureSet features;  // D-TCN inputs

  std::size_t train_days = 72;
  std::size_t validation_days = 24;
  std::size_t test_days = 48;
  std::size_t first_day = 0;  // panel position of the first training day

  int epochs = 30;
  std::size_t runs = 20;           // repeated runs of a non-deterministic model
  std::size_t ablation_runs = 40;  // runs per ablation row
  std::uint64_t seed = 1;
  std::size_t threads = 0;  // 0: one per hardware thread

  Hyperparameters hyper;
  std::size_t arrv_lag = 1;

  eval::TTest ttest = eval::TTest::welch;  // between two sets of runs
  std::string reference = "TCN";           // report reference row
  std::size_t bootstrap_samples = 1000;
  std::size_t percentile_buckets = 4;

  std::size_t horizon() const { return train_days + validation_days; }
  /// Throws ValidationError.
  void validate() const;
  /// Sorted key=value lines of every setting that can change a number.
  std::string canonical() const;
  /// 16 hex digits (FNV-1a 64) of canonical().
  std::string hash() const;
};

/// Unknown keys and malformed values throw ValidationError. Hyperparameter
/// keys that are not given take the tuned defaults for `model`.
ExperimentConfig make_config(const KeyValues& kv);

/// Generator settings from `synth.*` keys plus `seed`.
synth::SynthConfig make_synth_config(const KeyValues& kv);

// ---- data ----------------------------------------------------------------------

struct Dataset {
  features::DailyPanel panel;
  std::string digest;  // FNV-1a of the panel CSV text
};
Dataset load_dataset(const ExperimentConfig& config);
std::string fnv1a_hex(std::string_view bytes);

struct IngestSummary {
  ingest::IngestDiagnostics diagnostics;
  std::size_t rows = 0;
};
/// Raw JSON Lines files to the sorted tweet table.
IngestSummary cmd_ingest(const std::vector<std::filesystem::path>& inputs, const std::filesystem::path& lexicon_dir,
                         const std::filesystem::path& out, const ingest::IngestOptions& options = {});

struct FeaturizeSummary {
  features::PanelDiagnostics diagnostics;
  std::size_t days = 0;
};
FeaturizeSummary cmd_featurize(const std::filesystem::path& candles, const std::filesystem::path& tweets,
                               const std::filesystem::path& out, const features::PanelOptions& options = {});

void cmd_synth(const synth::SynthConfig& config, const std::filesystem::path& out_dir);

// ---- runs ----------------------------------------------------------------------

struct RunManifest {
  std::string label;  // "TCN", "D-TCN_User", "AR-RV", ...
  std::string config_hash;
  std::string config_text;  // canonical() of the run's configuration
  std::string data_digest;
  std::uint64_t seed = 0;
  std::size_t run_index = 0;
  bool ok = true;
  std::string error;  // why a failed run failed
  eval::MetricVector metrics;
  double final_loss = 0.0;
  std::vector<models::DayPrediction> predictions;
  std::vector<double> head_bias;  // neural models: the 96 interpolator biases
  std::map<std::string, std::string> artifacts;

  bool deterministic() const;
};

void write_manifest(const std::filesystem::path& path, const RunManifest& m);
RunManifest read_manifest(const std::filesystem::path& path);
/// Every *.json manifest below the given files or directories, ordered by
/// label then run index.
std::vector<RunManifest> read_manifests(const std::vector<std::filesystem::path>& paths);

/// Row label of a model: "TCN", "D-TCN_Count, User", "AR-RV", ...
std::string model_label(Method m, const features::FeatureSet& fs = {});
/// File-name form of a label: "tcn", "d-tcn_count-user", ...
std::string slug(const std::string& label);

/// Runs `model` on the 96/48 protocol: a deterministic model once, otherwise
/// `runs` times with seeds seed + index. Manifests and artifacts go below
/// out_dir/runs/<slug>/. Failed runs are kept and marked.
std::vector<RunManifest> cmd_train(const ExperimentConfig& config);

/// Repeats one manifest's run from its stored configuration.
RunManifest rerun(const RunManifest& manifest);

// ---- ablation ------------------------------------------------------------------

struct AblationResult {
  std::vector<eval::SignificanceEntry> table;  // baseline TCN row first
  std::vector<RunManifest> manifests;
  bool identity_holds = false;  // zeroed-feature D-TCN reproduced TCN run 0 bitwise
  std::string identity_detail;
  std::string text;
  std::string csv;
};

/// `config.ablation_runs` TCN runs and as many D-TCN runs per subset, each
/// subset tested against the TCN runs with `config.ttest`.
AblationResult cmd_ablate(const ExperimentConfig& config, const std::vector<features::FeatureSet>& subsets);

// ---- hyperparameter search -----------------------------------------------------

struct IntRange {
  long long low = 0;
  long long high = 0;
};
struct RealRange {
  double low = 0.0;
  double high = 0.0;
  bool log_scale = false;
};

struct SearchSpace {
  IntRange filters{32, 512};
  RealRange dropout{0.0, 0.5};
  RealRange epsilon{0.01, 0.1};
  RealRange learning_rate{1e-7, 1e-2, true};
  RealRange weight_decay{1e-9, 1e-2, true};
  IntRange kernel{2, 6};          // TCN only
  IntRange dilation_base{2, 4};   // TCN only
  bool search_skip = true;        // TCN only
  bool search_normalization = true;  // TCN only

  /// The standard space of the model family (TCN/D-TCN or LSTM/GRU).
  static SearchSpace standard(Method m);
  /// Overrides from `hpo.<name> = low:high` keys.
  static SearchSpace from(Method m, const KeyValues& kv);
  bool contains(const Hyperparameters& h, Method m) const;
  /// Draws every searched parameter; the rest are copied from `base`.
  Hyperparameters sample(nn::Rng& rng, const Hyperparameters& base, Method m) const;
};

struct Trial {
  std::size_t index = 0;  // 0 is the configured default when it is included
  bool is_default = false;
  Hyperparameters hyper;
  bool ok = true;
  std::string error;
  double validation_mape = 0.0;
};

struct HpoResult {
  std::vector<Trial> trials;
  std::size_t best = 0;  // index into trials
  const Trial& best_trial() const { return trials[best]; }
};

/// Trains on the first train_days and scores MAPE on the next
/// validation_days. With `include_default` the configured hyperparameters are
/// scored first as trial 0. Throws std::runtime_error when every trial failed.
HpoResult cmd_hpo(const ExperimentConfig& config, const SearchSpace& space, std::size_t budget,
                  bool include_default = true);
std::string trial_log_csv(const HpoResult& result);
/// The best trial's hyperparameters as config lines.
std::string best_config_text(const HpoResult& result);

// ---- report --------------------------------------------------------------------

struct ReportOptions {
  std::string reference = "TCN";
  eval::TTest ttest = eval::TTest::welch;
  std::size_t bootstrap_samples = 1000;
  std::size_t percentile_buckets = 4;
  std::uint64_t seed = 1;
};

/// One-sided p-value that `model` has a lower `metric` than `baseline`.
/// Several runs against several runs use `kind`; several runs against one
/// deterministic run use the one-sample test; two deterministic models are
/// compared through their per-day errors, paired when the test days match
/// and with Welch's test otherwise.
double compare(const std::vector<RunManifest>& model, const std::vector<RunManifest>& baseline, eval::Metric metric,
               eval::TTest kind);

struct ReportSummary {
  std::vector<std::filesystem::path> files;
  std::vector<eval::SignificanceEntry> table;
  std::string text;
};

/// Writes significance.{csv,txt}, pairwise_<metric>.csv, percentile_mape.csv
/// and per model predictions_<slug>.{csv,svg} plus bias_<slug>.csv for neural
/// models. Failed runs are listed but not scored.
/// Report settings (reference, ttest, bootstrap_samples, percentile_buckets,
/// seed) from a configuration; other keys are ignored.
ReportOptions make_report_options(const KeyValues& kv);

ReportSummary cmd_report(const std::vector<RunManifest>& manifests, const std::filesystem::path& out_dir,
                         const ReportOptions& options = {});

}  // namespace volcast::experiment
