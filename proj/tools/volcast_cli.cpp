// Command-line front end over the C interface.
//
// Settings come from an optional key=value file (--config), then from
// --set key=value pairs, then from the dedicated flags; later wins.
// Exit codes: 0 success, 1 validation error, 2 runtime failure.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "volcast/volcast.h"

namespace {

struct Failure {
  volcast_status status;
};

void check(volcast_status s) {
  if (s != VOLCAST_OK) throw Failure{s};
}

// Owning wrappers for the C handles.
struct Config {
  volcast_config* p = nullptr;
  Config() { check(volcast_config_new(&p)); }
  ~Config() { volcast_config_free(p); }
  Config(const Config&) = delete;
  Config& operator=(const Config&) = delete;
  void set(const std::string& k, const std::string& v) { check(volcast_config_set(p, k.c_str(), v.c_str())); }
  std::optional<std::string> get(const std::string& k) const {
    const char* v = nullptr;
    check(volcast_config_get(p, k.c_str(), &v));
    return v ? std::optional<std::string>(v) : std::nullopt;
  }
};

struct Runs {
  volcast_runs* p = nullptr;
  ~Runs() { volcast_runs_free(p); }
};

struct Text {
  volcast_text* p = nullptr;
  ~Text() { volcast_text_free(p); }
  const char* str() const { return volcast_text_data(p); }
};

std::string fmt(double x) {
  if (std::isnan(x)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", x);
  return buf;
}

// Returns true when at least one run succeeded.
bool print_runs(const Runs& runs) {
  const size_t n = volcast_runs_count(runs.p);
  size_t failed = 0;
  for (size_t i = 0; i < n; ++i) {
    volcast_run_info info;
    check(volcast_runs_get(runs.p, i, &info));
    if (info.ok)
      std::printf("%s run %zu seed %llu: MAPE %s MAE %s RMSE %s MSLE %s\n", info.label, info.run_index,
                  static_cast<unsigned long long>(info.seed), fmt(info.mape).c_str(), fmt(info.mae).c_str(),
                  fmt(info.rmse).c_str(), fmt(info.msle).c_str());
    else
      std::printf("%s run %zu seed %llu: FAILED (%s)\n", info.label, info.run_index,
                  static_cast<unsigned long long>(info.seed), info.error);
    failed += info.ok ? 0 : 1;
  }
  if (n > 0) {
    volcast_run_info first;
    check(volcast_runs_get(runs.p, 0, &first));
    std::printf("%zu run(s), %zu failed; config hash %s\n", n, failed, first.config_hash);
  }
  return failed < n;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Realized-volatility forecasting experiments"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", volcast_version());

  std::string config_path;
  std::vector<std::string> sets;
  std::optional<unsigned long long> seed;
  std::optional<std::string> out_dir;
  std::optional<size_t> threads;
  app.add_option("-c,--config", config_path, "key=value configuration file");
  app.add_option("--set", sets, "Override a setting, key=value (repeatable)");
  app.add_option("--seed", seed, "Base seed for every random choice");
  app.add_option("-o,--out-dir", out_dir, "Output directory");
  app.add_option("--threads", threads, "Worker threads (0: all cores)");

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Raw JSON Lines tweets to the sorted tweet table");
  std::vector<std::string> ingest_inputs;
  std::string lexicon_dir, ingest_out;
  ingest->add_option("inputs", ingest_inputs, "JSON Lines files")->required();
  ingest->add_option("--lexicon", lexicon_dir, "Directory with vader_lexicon.txt and emoji_utf8_lexicon.txt");
  ingest->add_option("--output", ingest_out, "Tweet table CSV")->required();

  // featurize
  auto* featurize = app.add_subcommand("featurize", "Candles and tweets to the daily feature panel");
  std::string feat_candles, feat_tweets, feat_out;
  featurize->add_option("--candles", feat_candles, "Candle CSV")->required();
  featurize->add_option("--tweets", feat_tweets, "Tweet table CSV");
  featurize->add_option("--output", feat_out, "Panel CSV")->required();

  // synth
  auto* synth = app.add_subcommand("synth", "Write a synthetic candle and tweet dataset");
  std::optional<size_t> synth_days;
  std::optional<double> synth_coupling;
  std::optional<std::string> synth_coupled;
  synth->add_option("--days", synth_days, "Number of days");
  synth->add_option("--coupling", synth_coupling, "Strength of the tweet link to next-day volatility (0 disables)");
  synth->add_option("--coupled", synth_coupled, "Feature sets carrying the link, e.g. user");

  // train and friends share the model flags
  std::optional<std::string> model, features_sel;
  std::optional<size_t> runs_n;
  std::optional<int> epochs;
  auto model_flags = [&](CLI::App* sub) {
    sub->add_option("--model", model, "tcn, dtcn, lstm, gru, arrv, garch or constant_mean");
    sub->add_option("--features", features_sel, "D-TCN feature sets, e.g. user or count,user");
    sub->add_option("--epochs", epochs, "Training epochs");
  };
  auto* train = app.add_subcommand("train", "Train and test a model over repeated seeded runs");
  model_flags(train);
  train->add_option("--runs", runs_n, "Runs of a non-deterministic model");

  auto* rerun = app.add_subcommand("rerun", "Repeat one run from its manifest");
  std::string rerun_manifest;
  rerun->add_option("manifest", rerun_manifest, "Run manifest JSON")->required();

  auto* ablate = app.add_subcommand("ablate", "D-TCN feature ablation against the TCN");
  model_flags(ablate);
  std::string subsets;
  bool all_subsets = false;
  std::optional<size_t> ablation_runs;
  auto* subsets_opt = ablate->add_option("--subsets", subsets, "Feature sets separated by ';'");
  ablate->add_flag("--all", all_subsets, "All 15 non-empty subsets of Count, VADER, Tweet, User")
      ->excludes(subsets_opt);
  ablate->add_option("--runs", ablation_runs, "Runs per row");

  auto* hpo = app.add_subcommand("hpo", "Random hyperparameter search on the validation split");
  model_flags(hpo);
  std::optional<size_t> budget;
  bool no_default = false;
  hpo->add_option("--budget", budget, "Sampled configurations");
  hpo->add_flag("--no-default", no_default, "Do not score the configured hyperparameters first");

  auto* report = app.add_subcommand("report", "Tables and plots from run manifests");
  std::vector<std::string> report_inputs;
  std::string report_out;
  report->add_option("manifests", report_inputs, "Manifest files or directories (default: <out_dir>/runs)");
  report->add_option("--report-dir", report_out, "Report directory (default: <out_dir>/report)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    Config cfg;
    if (!config_path.empty()) check(volcast_config_load(cfg.p, config_path.c_str()));
    for (const auto& kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) {
        std::fprintf(stderr, "error: --set expects key=value, got '%s'\n", kv.c_str());
        return 1;
      }
      cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (seed) cfg.set("seed", std::to_string(*seed));
    if (out_dir) cfg.set("out_dir", *out_dir);
    if (threads) cfg.set("threads", std::to_string(*threads));
    if (model) cfg.set("model", *model);
    if (features_sel) cfg.set("features", *features_sel);
    if (epochs) cfg.set("epochs", std::to_string(*epochs));
    if (runs_n) cfg.set("runs", std::to_string(*runs_n));
    if (ablation_runs) cfg.set("ablation_runs", std::to_string(*ablation_runs));
    const std::string out = cfg.get("out_dir").value_or("volcast-out");

    if (*ingest) {
      std::vector<const char*> paths;
      for (const auto& p : ingest_inputs) paths.push_back(p.c_str());
      size_t rows = 0, rejected = 0;
      check(volcast_ingest(paths.data(), paths.size(), lexicon_dir.empty() ? nullptr : lexicon_dir.c_str(),
                           ingest_out.c_str(), &rows, &rejected));
      std::printf("%zu tweets written to %s, %zu rejected\n", rows, ingest_out.c_str(), rejected);
    } else if (*featurize) {
      size_t days = 0;
      check(volcast_featurize(feat_candles.c_str(), feat_tweets.empty() ? nullptr : feat_tweets.c_str(),
                              feat_out.c_str(), &days));
      std::printf("%zu days written to %s\n", days, feat_out.c_str());
    } else if (*synth) {
      if (synth_days) cfg.set("synth.days", std::to_string(*synth_days));
      if (synth_coupling) cfg.set("synth.coupling", CLI::detail::to_string(*synth_coupling));
      if (synth_coupled) cfg.set("synth.coupled", *synth_coupled);
      check(volcast_synth(cfg.p, out.c_str()));
      std::printf("synthetic candles.csv and tweets.csv written to %s\n", out.c_str());
    } else if (*train) {
      Runs runs;
      check(volcast_train(cfg.p, &runs.p));
      if (!print_runs(runs)) {
        std::fprintf(stderr, "error: every run failed\n");
        return 2;
      }
    } else if (*rerun) {
      Runs runs;
      check(volcast_rerun(rerun_manifest.c_str(), &runs.p));
      if (!print_runs(runs)) return 2;
    } else if (*ablate) {
      std::string which = all_subsets ? "all" : subsets;
      if (which.empty()) which = cfg.get("ablate.subsets").value_or("");
      if (which.empty()) {
        std::fprintf(stderr, "error: give --subsets, --all or ablate.subsets\n");
        return 1;
      }
      Text table;
      int identity = 0;
      check(volcast_ablate(cfg.p, which.c_str(), &table.p, &identity));
      std::fputs(table.str(), stdout);
      std::printf("zeroed-feature identity: %s\n", identity ? "holds" : "VIOLATED");
      if (!identity) return 2;
    } else if (*hpo) {
      size_t b = 0;
      if (budget) b = *budget;
      else if (auto v = cfg.get("hpo.budget")) {
        try {
          b = std::stoul(*v);
        } catch (const std::exception&) {
          std::fprintf(stderr, "error: hpo.budget: not a count: %s\n", v->c_str());
          return 1;
        }
      } else {
        std::fprintf(stderr, "error: give --budget or hpo.budget\n");
        return 1;
      }
      bool with_default = !no_default;
      if (auto v = cfg.get("hpo.include_default"); v && !no_default) with_default = *v != "false" && *v != "0";
      Text best;
      double best_mape = 0.0;
      check(volcast_hpo(cfg.p, b, with_default ? 1 : 0, &best.p, &best_mape));
      std::printf("best validation MAPE %s\n%s", fmt(best_mape).c_str(), best.str());
      std::printf("trial log: %s\n", (std::filesystem::path(out) / "hpo" / "trials.csv").c_str());
    } else if (*report) {
      if (report_inputs.empty()) report_inputs.push_back((std::filesystem::path(out) / "runs").string());
      if (report_out.empty()) report_out = (std::filesystem::path(out) / "report").string();
      std::vector<const char*> paths;
      for (const auto& p : report_inputs) paths.push_back(p.c_str());
      Runs runs;
      check(volcast_runs_load(paths.data(), paths.size(), &runs.p));
      Text summary;
      check(volcast_report(runs.p, report_out.c_str(), cfg.p, &summary.p));
      std::fputs(summary.str(), stdout);
      std::printf("report written to %s\n", report_out.c_str());
    }
  } catch (const Failure& f) {
    std::fprintf(stderr, "error: %s\n", volcast_last_error());
    return static_cast<int>(f.status);
  }
  return 0;
}
