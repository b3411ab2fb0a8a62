#include "volcast/volcast.h"

#include <cstring>
#include <exception>
#include <filesystem>
#include <string>
#include <vector>

#include "volcast/experiment.hpp"
#include "volcast/table_io.hpp"

namespace fs = std::filesystem;
namespace ex = volcast::experiment;

struct volcast_config {
  ex::KeyValues kv;
};

struct volcast_runs {
  std::vector<ex::RunManifest> manifests;
  std::vector<std::string> paths;
};

struct volcast_text {
  std::string data;
};

namespace {

thread_local std::string last_error;

volcast_status fail(volcast_status s, std::string message) {
  last_error = std::move(message);
  return s;
}

// Runs `body`, mapping exceptions onto status codes.
template <class F>
volcast_status guarded(F&& body) {
  try {
    body();
    last_error.clear();
    return VOLCAST_OK;
  } catch (const ex::ValidationError& e) {
    return fail(VOLCAST_ERR_VALIDATION, e.what());
  } catch (const std::invalid_argument& e) {
    return fail(VOLCAST_ERR_VALIDATION, e.what());
  } catch (const std::exception& e) {
    return fail(VOLCAST_ERR_RUNTIME, e.what());
  } catch (...) {
    return fail(VOLCAST_ERR_RUNTIME, "unknown error");
  }
}

void need(const void* p, const char* what) {
  if (p == nullptr) throw ex::ValidationError(std::string(what) + " must not be NULL");
}

volcast_runs* wrap(std::vector<ex::RunManifest> ms) {
  auto* r = new volcast_runs{std::move(ms), {}};
  for (const auto& m : r->manifests) {
    auto it = m.artifacts.find("manifest");
    r->paths.push_back(it == m.artifacts.end() ? "" : it->second);
  }
  return r;
}

std::vector<volcast::features::FeatureSet> parse_subsets(const std::string& text) {
  if (text == "all") return volcast::features::all_feature_subsets();
  std::vector<volcast::features::FeatureSet> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t end = std::min(text.find(';', start), text.size());
    const std::string item = text.substr(start, end - start);
    try {
      out.push_back(volcast::features::FeatureSet::parse(item));
    } catch (const std::exception& e) {
      throw ex::ValidationError("subsets: " + std::string(e.what()));
    }
    start = end + 1;
  }
  return out;
}

}  // namespace

extern "C" {

const char* volcast_version(void) { return "0.1.0"; }

const char* volcast_last_error(void) { return last_error.c_str(); }

volcast_status volcast_config_new(volcast_config** out) {
  return guarded([&] {
    need(out, "out");
    *out = new volcast_config{};
  });
}

volcast_status volcast_config_load(volcast_config* config, const char* path) {
  return guarded([&] {
    need(config, "config");
    need(path, "path");
    if (!fs::exists(path)) throw ex::ValidationError(std::string("config file not found: ") + path);
    for (auto& [k, v] : ex::read_key_values(path)) config->kv[k] = v;
  });
}

volcast_status volcast_config_set(volcast_config* config, const char* key, const char* value) {
  return guarded([&] {
    need(config, "config");
    need(key, "key");
    need(value, "value");
    // Reuse the file grammar so that keys are checked the same way.
    const std::string k = key, v = value;
    if (v.find('\n') != std::string::npos) throw ex::ValidationError("config: value of '" + k + "' spans lines");
    const auto parsed = ex::parse_key_values(k + " = " + v + "\n");
    if (parsed.size() != 1 || parsed.begin()->first != k) throw ex::ValidationError("config: bad key '" + k + "'");
    config->kv[k] = parsed.begin()->second;
  });
}

volcast_status volcast_config_get(const volcast_config* config, const char* key, const char** value) {
  return guarded([&] {
    need(config, "config");
    need(key, "key");
    need(value, "value");
    auto it = config->kv.find(key);
    *value = it == config->kv.end() ? nullptr : it->second.c_str();
  });
}

volcast_status volcast_config_hash(const volcast_config* config, char out[17]) {
  return guarded([&] {
    need(config, "config");
    need(out, "out");
    const std::string h = ex::make_config(config->kv).hash();
    std::memcpy(out, h.c_str(), 17);
  });
}

void volcast_config_free(volcast_config* config) { delete config; }

const char* volcast_text_data(const volcast_text* text) { return text ? text->data.c_str() : ""; }

void volcast_text_free(volcast_text* text) { delete text; }

volcast_status volcast_ingest(const char* const* inputs, size_t n_inputs, const char* lexicon_dir,
                              const char* out_path, size_t* rows, size_t* rejected) {
  return guarded([&] {
    need(out_path, "out_path");
    if (n_inputs > 0) need(inputs, "inputs");
    std::vector<fs::path> paths;
    for (size_t i = 0; i < n_inputs; ++i) {
      need(inputs[i], "input path");
      paths.emplace_back(inputs[i]);
    }
    const auto s = ex::cmd_ingest(paths, lexicon_dir ? fs::path(lexicon_dir) : fs::path(), out_path);
    if (rows) *rows = s.rows;
    if (rejected) *rejected = s.diagnostics.rejected;
  });
}

volcast_status volcast_featurize(const char* candles, const char* tweets, const char* out_path, size_t* days) {
  return guarded([&] {
    need(candles, "candles");
    need(out_path, "out_path");
    const auto s = ex::cmd_featurize(candles, tweets ? fs::path(tweets) : fs::path(), out_path);
    if (days) *days = s.days;
  });
}

volcast_status volcast_synth(const volcast_config* config, const char* out_dir) {
  return guarded([&] {
    need(config, "config");
    need(out_dir, "out_dir");
    ex::cmd_synth(ex::make_synth_config(config->kv), out_dir);
  });
}

volcast_status volcast_train(const volcast_config* config, volcast_runs** out) {
  return guarded([&] {
    need(config, "config");
    need(out, "out");
    *out = wrap(ex::cmd_train(ex::make_config(config->kv)));
  });
}

volcast_status volcast_rerun(const char* manifest_path, volcast_runs** out) {
  return guarded([&] {
    need(manifest_path, "manifest_path");
    need(out, "out");
    if (!fs::exists(manifest_path)) throw ex::ValidationError(std::string("manifest not found: ") + manifest_path);
    *out = wrap({ex::rerun(ex::read_manifest(manifest_path))});
  });
}

volcast_status volcast_runs_load(const char* const* paths, size_t n_paths, volcast_runs** out) {
  return guarded([&] {
    need(out, "out");
    if (n_paths > 0) need(paths, "paths");
    std::vector<fs::path> ps;
    for (size_t i = 0; i < n_paths; ++i) {
      need(paths[i], "path");
      if (!fs::exists(paths[i])) throw ex::ValidationError(std::string("not found: ") + paths[i]);
      ps.emplace_back(paths[i]);
    }
    *out = wrap(ex::read_manifests(ps));
  });
}

size_t volcast_runs_count(const volcast_runs* runs) { return runs ? runs->manifests.size() : 0; }

volcast_status volcast_runs_get(const volcast_runs* runs, size_t index, volcast_run_info* info) {
  return guarded([&] {
    need(runs, "runs");
    need(info, "info");
    if (index >= runs->manifests.size()) throw ex::ValidationError("run index out of range");
    const auto& m = runs->manifests[index];
    info->label = m.label.c_str();
    info->config_hash = m.config_hash.c_str();
    info->manifest_path = runs->paths[index].c_str();
    info->seed = m.seed;
    info->run_index = m.run_index;
    info->ok = m.ok ? 1 : 0;
    info->error = m.error.c_str();
    info->mape = m.metrics.mape;
    info->mae = m.metrics.mae;
    info->rmse = m.metrics.rmse;
    info->msle = m.metrics.msle;
  });
}

void volcast_runs_free(volcast_runs* runs) { delete runs; }

volcast_status volcast_ablate(const volcast_config* config, const char* subsets, volcast_text** table,
                              int* identity_holds) {
  return guarded([&] {
    need(config, "config");
    need(subsets, "subsets");
    need(table, "table");
    const auto res = ex::cmd_ablate(ex::make_config(config->kv), parse_subsets(subsets));
    *table = new volcast_text{res.text};
    if (identity_holds) *identity_holds = res.identity_holds ? 1 : 0;
  });
}

volcast_status volcast_hpo(const volcast_config* config, size_t budget, int include_default, volcast_text** best,
                           double* best_mape) {
  return guarded([&] {
    need(config, "config");
    need(best, "best");
    const auto c = ex::make_config(config->kv);
    const auto space = ex::SearchSpace::from(c.model, config->kv);
    const auto res = ex::cmd_hpo(c, space, budget, include_default != 0);
    const fs::path dir = fs::path(c.out_dir) / "hpo";
    fs::create_directories(dir);
    const std::string text = ex::best_config_text(res);
    volcast::io::write_file(dir / "trials.csv", ex::trial_log_csv(res));
    volcast::io::write_file(dir / "best.conf", text);
    *best = new volcast_text{text};
    if (best_mape) *best_mape = res.best_trial().validation_mape;
  });
}

volcast_status volcast_report(const volcast_runs* runs, const char* out_dir, const volcast_config* config,
                              volcast_text** summary) {
  return guarded([&] {
    need(runs, "runs");
    need(out_dir, "out_dir");
    const auto options = config ? ex::make_report_options(config->kv) : ex::ReportOptions{};
    const auto s = ex::cmd_report(runs->manifests, out_dir, options);
    if (summary) *summary = new volcast_text{s.text};
  });
}

}  // extern "C"
