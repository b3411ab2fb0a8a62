#include "volcast/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cctype>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "volcast/econ.hpp"
#include "volcast/table_io.hpp"

namespace volcast::experiment {

namespace fs = std::filesystem;
using features::FeatureSet;
using features::WindowSet;
using json = nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

bool valid_key(const std::string& k) {
  if (k.empty()) return false;
  return std::all_of(k.begin(), k.end(), [](unsigned char c) {
    return std::islower(c) || std::isdigit(c) || c == '_' || c == '.' || c == '-';
  });
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const std::string& what) {
  throw ValidationError("config: " + key + " = '" + value + "': " + what);
}

long long to_int(const std::string& key, const std::string& v) {
  try {
    return io::parse_int(v);
  } catch (const std::exception&) {
    bad_value(key, v, "expected an integer");
  }
}

std::size_t to_count(const std::string& key, const std::string& v) {
  const long long x = to_int(key, v);
  if (x < 0) bad_value(key, v, "must not be negative");
  return static_cast<std::size_t>(x);
}

double to_real(const std::string& key, const std::string& v) {
  try {
    return io::parse_double(v);
  } catch (const std::exception&) {
    bad_value(key, v, "expected a number");
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  const std::string l = lower(v);
  if (l == "true" || l == "1" || l == "yes" || l == "on") return true;
  if (l == "false" || l == "0" || l == "no" || l == "off") return false;
  bad_value(key, v, "expected true or false");
}

FeatureSet to_features(const std::string& key, const std::string& v) {
  try {
    return FeatureSet::parse(v);
  } catch (const std::exception& e) {
    bad_value(key, v, e.what());
  }
}

eval::TTest to_ttest(const std::string& key, const std::string& v) {
  const std::string l = lower(v);
  if (l == "welch") return eval::TTest::welch;
  if (l == "student") return eval::TTest::student;
  bad_value(key, v, "expected welch or student");
}

std::string ttest_name(eval::TTest t) { return t == eval::TTest::welch ? "welch" : "student"; }

// Shortest text that reads back to the same double.
std::string num(double v) { return json(v).dump(); }

template <class F>
void parallel_for(std::size_t n, std::size_t threads, F&& body) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (std::size_t i; (i = next++) < n;) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(mu);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace

// ---- configuration -------------------------------------------------------------

KeyValues parse_key_values(std::string_view text) {
  KeyValues kv;
  std::istringstream in{std::string(text)};
  std::string raw;
  for (std::size_t line_no = 1; std::getline(in, raw); ++line_no) {
    std::string_view line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    const std::string where = "config line " + std::to_string(line_no);
    if (eq == std::string::npos) throw ValidationError(where + ": expected key = value");
    const std::string key = trim(std::string_view(t).substr(0, eq));
    const std::string value = trim(std::string_view(t).substr(eq + 1));
    if (!valid_key(key)) throw ValidationError(where + ": bad key '" + key + "'");
    if (!kv.emplace(key, value).second) throw ValidationError(where + ": duplicate key '" + key + "'");
  }
  return kv;
}

KeyValues read_key_values(const fs::path& path) {
  if (!fs::exists(path)) throw ValidationError("config file not found: " + path.string());
  return parse_key_values(io::read_file(path));
}

std::string to_string(Method m) {
  switch (m) {
    case Method::tcn: return "tcn";
    case Method::dtcn: return "dtcn";
    case Method::lstm: return "lstm";
    case Method::gru: return "gru";
    case Method::arrv: return "arrv";
    case Method::garch: return "garch";
    case Method::constant_mean: return "constant_mean";
  }
  return "?";
}

Method parse_method(const std::string& s) {
  const std::string l = lower(s);
  if (l == "tcn") return Method::tcn;
  if (l == "dtcn" || l == "d-tcn") return Method::dtcn;
  if (l == "lstm") return Method::lstm;
  if (l == "gru") return Method::gru;
  if (l == "arrv" || l == "ar-rv") return Method::arrv;
  if (l == "garch") return Method::garch;
  if (l == "constant_mean" || l == "constant-mean" || l == "constant") return Method::constant_mean;
  throw ValidationError("unknown model '" + s + "' (tcn, dtcn, lstm, gru, arrv, garch, constant_mean)");
}

bool is_neural(Method m) { return m == Method::tcn || m == Method::dtcn || m == Method::lstm || m == Method::gru; }

Hyperparameters default_hyperparameters(Method m) {
  Hyperparameters h;
  if (m == Method::lstm) {
    h.filters = 261;
    h.dropout = 0.0237;
    h.epsilon = 0.0364;
    h.learning_rate = 0.00521;
    h.weight_decay = 9.25e-7;
  } else if (m == Method::gru) {
    h.filters = 43;
    h.dropout = 0.0544;
    h.epsilon = 0.0431;
    h.learning_rate = 0.00973;
    h.weight_decay = 1.59e-8;
  }
  return h;
}

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& m) { throw ValidationError("config: " + m); };
  if (panel.empty() && candles.empty()) fail("set panel, or candles (and optionally tweets)");
  if (train_days < 2) fail("train_days must be at least 2");
  if (validation_days < 1) fail("validation_days must be at least 1");
  if (test_days < 1) fail("test_days must be at least 1");
  if (epochs < 1) fail("epochs must be at least 1");
  if (runs < 1) fail("runs must be at least 1");
  if (ablation_runs < 1) fail("ablation_runs must be at least 1");
  if (model == Method::dtcn && features.empty()) fail("a D-TCN needs at least one feature set");
  if (hyper.filters < 1) fail("filters must be positive");
  if (!(hyper.dropout >= 0.0 && hyper.dropout < 1.0)) fail("dropout must lie in [0, 1)");
  if (!(hyper.epsilon >= 0.0)) fail("epsilon must not be negative");
  if (!(hyper.learning_rate > 0.0) || !std::isfinite(hyper.learning_rate)) fail("learning_rate must be positive");
  if (!(hyper.weight_decay >= 0.0) || !std::isfinite(hyper.weight_decay)) fail("weight_decay must not be negative");
  if (hyper.kernel < 1) fail("kernel must be positive");
  if (hyper.dilation_base < 1) fail("dilation_base must be positive");
  if (hyper.bottleneck < 1) fail("bottleneck must be positive");
  if (hyper.layers < 0) fail("layers must not be negative");
  if (hyper.lower_dim < 1) fail("lower_dim must be positive");
  if (arrv_lag < 1) fail("arrv_lag must be positive");
  if (arrv_lag >= train_days + validation_days) fail("arrv_lag must be shorter than the training period");
  if (bootstrap_samples < 1) fail("bootstrap_samples must be positive");
  if (percentile_buckets < 1) fail("percentile_buckets must be positive");
}

std::string ExperimentConfig::canonical() const {
  std::map<std::string, std::string> kv{
      {"candles", candles},
      {"tweets", tweets},
      {"panel", panel},
      {"model", to_string(model)},
      {"features", features.empty() ? "none" : features.label()},
      {"train_days", std::to_string(train_days)},
      {"validation_days", std::to_string(validation_days)},
      {"test_days", std::to_string(test_days)},
      {"first_day", std::to_string(first_day)},
      {"epochs", std::to_string(epochs)},
      {"seed", std::to_string(seed)},
      {"filters", std::to_string(hyper.filters)},
      {"dropout", num(hyper.dropout)},
      {"epsilon", num(hyper.epsilon)},
      {"learning_rate", num(hyper.learning_rate)},
      {"weight_decay", num(hyper.weight_decay)},
      {"kernel", std::to_string(hyper.kernel)},
      {"dilation_base", std::to_string(hyper.dilation_base)},
      {"skip_connections", hyper.skip_connections ? "true" : "false"},
      {"normalization", nn::to_string(hyper.normalization)},
      {"bottleneck", std::to_string(hyper.bottleneck)},
      {"layers", std::to_string(hyper.layers)},
      {"lower_dim", std::to_string(hyper.lower_dim)},
      {"arrv_lag", std::to_string(arrv_lag)},
  };
  std::string out;
  for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
  return out;
}

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string ExperimentConfig::hash() const { return fnv1a_hex(canonical()); }

ExperimentConfig make_config(const KeyValues& kv) {
  ExperimentConfig c;
  if (auto it = kv.find("model"); it != kv.end()) c.model = parse_method(it->second);
  c.hyper = default_hyperparameters(c.model);
  auto& h = c.hyper;
  for (const auto& [k, v] : kv) {
    if (k.rfind("synth.", 0) == 0 || k.rfind("hpo.", 0) == 0 || k.rfind("ablate.", 0) == 0) continue;
    if (k == "model") continue;
    else if (k == "candles") c.candles = v;
    else if (k == "tweets") c.tweets = v;
    else if (k == "panel") c.panel = v;
    else if (k == "out_dir") c.out_dir = v;
    else if (k == "features") c.features = to_features(k, v);
    else if (k == "train_days") c.train_days = to_count(k, v);
    else if (k == "validation_days") c.validation_days = to_count(k, v);
    else if (k == "test_days") c.test_days = to_count(k, v);
    else if (k == "first_day") c.first_day = to_count(k, v);
    else if (k == "epochs") c.epochs = static_cast<int>(to_int(k, v));
    else if (k == "runs") c.runs = to_count(k, v);
    else if (k == "ablation_runs") c.ablation_runs = to_count(k, v);
    else if (k == "seed") c.seed = static_cast<std::uint64_t>(to_count(k, v));
    else if (k == "threads") c.threads = to_count(k, v);
    else if (k == "filters" || k == "hidden") h.filters = to_count(k, v);
    else if (k == "dropout") h.dropout = to_real(k, v);
    else if (k == "epsilon") h.epsilon = to_real(k, v);
    else if (k == "learning_rate") h.learning_rate = to_real(k, v);
    else if (k == "weight_decay") h.weight_decay = to_real(k, v);
    else if (k == "kernel") h.kernel = static_cast<int>(to_int(k, v));
    else if (k == "dilation_base") h.dilation_base = static_cast<int>(to_int(k, v));
    else if (k == "skip_connections") h.skip_connections = to_bool(k, v);
    else if (k == "normalization") {
      try {
        h.normalization = nn::parse_normalization(v);
      } catch (const std::exception& e) {
        bad_value(k, v, e.what());
      }
    } else if (k == "bottleneck") h.bottleneck = to_count(k, v);
    else if (k == "layers") h.layers = static_cast<int>(to_int(k, v));
    else if (k == "lower_dim") h.lower_dim = to_count(k, v);
    else if (k == "arrv_lag") c.arrv_lag = to_count(k, v);
    else if (k == "ttest") c.ttest = to_ttest(k, v);
    else if (k == "reference") c.reference = v;
    else if (k == "bootstrap_samples") c.bootstrap_samples = to_count(k, v);
    else if (k == "percentile_buckets") c.percentile_buckets = to_count(k, v);
    else throw ValidationError("config: unknown key '" + k + "'");
  }
  c.validate();
  return c;
}

synth::SynthConfig make_synth_config(const KeyValues& kv) {
  synth::SynthConfig s;
  for (const auto& [k, v] : kv) {
    if (k == "seed") s.seed = static_cast<std::uint64_t>(to_count(k, v));
    if (k.rfind("synth.", 0) != 0) continue;
    const std::string name = k.substr(6);
    if (name == "days") s.days = to_count(k, v);
    else if (name == "start") {
      try {
        s.start_day = io::parse_utc(v);
      } catch (const std::exception& e) {
        bad_value(k, v, e.what());
      }
    } else if (name == "persistence") s.persistence = to_real(k, v);
    else if (name == "shock_sd") s.shock_sd = to_real(k, v);
    else if (name == "surprise_sd") s.surprise_sd = to_real(k, v);
    else if (name == "base_volatility") s.base_volatility = to_real(k, v);
    else if (name == "cycle_amplitude") s.cycle_amplitude = to_real(k, v);
    else if (name == "drift_cycles") s.drift_cycles = to_real(k, v);
    else if (name == "noise") s.noise = to_real(k, v);
    else if (name == "start_price") s.start_price = to_real(k, v);
    else if (name == "tweets_per_bin") s.tweets_per_bin = to_real(k, v);
    else if (name == "coupled") s.coupled = to_features(k, v);
    else if (name == "coupling") s.coupling = to_real(k, v);
    else throw ValidationError("config: unknown key '" + k + "'");
  }
  return s;
}

// ---- data ----------------------------------------------------------------------

Dataset load_dataset(const ExperimentConfig& config) {
  auto need = [](const std::string& p, const char* what) {
    if (!fs::exists(p)) throw ValidationError(std::string(what) + " not found: " + p);
  };
  Dataset d;
  if (!config.panel.empty()) {
    need(config.panel, "panel");
    d.digest = fnv1a_hex(io::read_file(config.panel));
    d.panel = features::read_panel(config.panel);
    return d;
  }
  need(config.candles, "candle file");
  std::string bytes = io::read_file(config.candles);
  std::vector<ingest::TweetRecord> tweets;
  if (!config.tweets.empty()) {
    need(config.tweets, "tweet file");
    bytes += '\n';
    bytes += io::read_file(config.tweets);
    tweets = ingest::read_records(config.tweets);
    ingest::sort_records(tweets);
  }
  d.digest = fnv1a_hex(bytes);
  d.panel = features::build_panel(features::read_candles(config.candles), tweets);
  return d;
}

IngestSummary cmd_ingest(const std::vector<fs::path>& inputs, const fs::path& lexicon_dir, const fs::path& out,
                         const ingest::IngestOptions& options) {
  for (const auto& p : inputs)
    if (!fs::exists(p)) throw ValidationError("input not found: " + p.string());
  ingest::VaderLexicon loaded;
  const ingest::VaderLexicon* lexicon = &ingest::VaderLexicon::bundled();
  if (!lexicon_dir.empty()) {
    if (!fs::exists(lexicon_dir / "vader_lexicon.txt"))
      throw ValidationError("vader_lexicon.txt not found in " + lexicon_dir.string());
    loaded = ingest::VaderLexicon::load(lexicon_dir / "vader_lexicon.txt", lexicon_dir / "emoji_utf8_lexicon.txt");
    lexicon = &loaded;
  }
  IngestSummary s;
  std::vector<ingest::TweetRecord> records;
  for (const auto& p : inputs) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + p.string());
    ingest::ingest_stream(in, *lexicon, options, records, s.diagnostics);
  }
  s.rows = records.size();
  if (!out.parent_path().empty()) fs::create_directories(out.parent_path());
  ingest::write_sorted(std::move(records), out);
  return s;
}

FeaturizeSummary cmd_featurize(const fs::path& candles, const fs::path& tweets, const fs::path& out,
                               const features::PanelOptions& options) {
  if (!fs::exists(candles)) throw ValidationError("candle file not found: " + candles.string());
  std::vector<ingest::TweetRecord> records;
  if (!tweets.empty()) {
    if (!fs::exists(tweets)) throw ValidationError("tweet file not found: " + tweets.string());
    records = ingest::read_records(tweets);
    ingest::sort_records(records);
  }
  FeaturizeSummary s;
  const auto panel = features::build_panel(features::read_candles(candles), records, options, &s.diagnostics);
  s.days = panel.size();
  if (!out.parent_path().empty()) fs::create_directories(out.parent_path());
  features::write_panel(out, panel);
  return s;
}

void cmd_synth(const synth::SynthConfig& config, const fs::path& out_dir) {
  synth::SynthData data;
  try {
    data = synth::generate(config);
  } catch (const std::invalid_argument& e) {
    throw ValidationError(e.what());
  }
  synth::write(data, out_dir);
}

// ---- manifests -----------------------------------------------------------------

bool RunManifest::deterministic() const {
  return label == "AR-RV" || label == "GARCH" || label == "Constant mean";
}

namespace {

json metrics_json(const eval::MetricVector& m) {
  // NaN is not JSON; undefined metrics are stored as null.
  auto v = [](double x) { return std::isfinite(x) ? json(x) : json(nullptr); };
  return {{"mape", v(m.mape)}, {"mae", v(m.mae)}, {"rmse", v(m.rmse)}, {"msle", v(m.msle)}};
}

double json_real(const json& j) { return j.is_null() ? kNaN : j.get<double>(); }

}  // namespace

void write_manifest(const fs::path& path, const RunManifest& m) {
  json j;
  j["label"] = m.label;
  j["config_hash"] = m.config_hash;
  j["config"] = m.config_text;
  j["data_digest"] = m.data_digest;
  j["seed"] = m.seed;
  j["run_index"] = m.run_index;
  j["status"] = m.ok ? "ok" : "failed";
  if (!m.ok) j["error"] = m.error;
  j["metrics"] = metrics_json(m.metrics);
  j["final_loss"] = std::isfinite(m.final_loss) ? json(m.final_loss) : json(nullptr);
  json preds = json::array();
  for (const auto& p : m.predictions)
    preds.push_back({{"date", io::format_date(p.day)}, {"true_rv", p.true_rv}, {"pred_rv", p.pred_rv}});
  j["predictions"] = preds;
  j["head_bias"] = m.head_bias;
  j["artifacts"] = m.artifacts;
  if (!path.parent_path().empty()) fs::create_directories(path.parent_path());
  io::write_file(path, j.dump(1) + "\n");
}

RunManifest read_manifest(const fs::path& path) {
  json j;
  try {
    j = json::parse(io::read_file(path));
    RunManifest m;
    m.label = j.at("label").get<std::string>();
    m.config_hash = j.at("config_hash").get<std::string>();
    m.config_text = j.at("config").get<std::string>();
    m.data_digest = j.at("data_digest").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.run_index = j.at("run_index").get<std::size_t>();
    m.ok = j.at("status").get<std::string>() == "ok";
    if (!m.ok) m.error = j.value("error", "");
    const auto& mj = j.at("metrics");
    m.metrics = {json_real(mj.at("mape")), json_real(mj.at("mae")), json_real(mj.at("rmse")), json_real(mj.at("msle"))};
    m.final_loss = json_real(j.at("final_loss"));
    for (const auto& p : j.at("predictions"))
      m.predictions.push_back({io::parse_utc(p.at("date").get<std::string>()), p.at("true_rv").get<double>(),
                               p.at("pred_rv").get<double>()});
    m.head_bias = j.at("head_bias").get<std::vector<double>>();
    m.artifacts = j.at("artifacts").get<std::map<std::string, std::string>>();
    return m;
  } catch (const json::exception& e) {
    throw ValidationError("manifest " + path.string() + ": " + e.what());
  }
}

std::vector<RunManifest> read_manifests(const std::vector<fs::path>& paths) {
  std::vector<fs::path> files;
  for (const auto& p : paths) {
    if (!fs::exists(p)) throw ValidationError("manifest path not found: " + p.string());
    if (fs::is_directory(p)) {
      for (const auto& e : fs::recursive_directory_iterator(p))
        if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
    } else {
      files.push_back(p);
    }
  }
  std::sort(files.begin(), files.end());
  files.erase(std::unique(files.begin(), files.end()), files.end());
  std::vector<RunManifest> out;
  for (const auto& f : files) out.push_back(read_manifest(f));
  std::stable_sort(out.begin(), out.end(), [](const RunManifest& a, const RunManifest& b) {
    return std::tie(a.label, a.run_index) < std::tie(b.label, b.run_index);
  });
  return out;
}

std::string model_label(Method m, const FeatureSet& fs) {
  switch (m) {
    case Method::tcn: return "TCN";
    case Method::dtcn: return "D-TCN_" + fs.label();
    case Method::lstm: return "LSTM";
    case Method::gru: return "GRU";
    case Method::arrv: return "AR-RV";
    case Method::garch: return "GARCH";
    case Method::constant_mean: return "Constant mean";
  }
  return "?";
}

std::string slug(const std::string& label) {
  std::string s;
  for (char ch : label) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) s += static_cast<char>(std::tolower(c));
    else if (c == '_' || c == '-') s += static_cast<char>(c);
    else if (!s.empty() && s.back() != '-' && s.back() != '_') s += '-';
  }
  while (!s.empty() && s.back() == '-') s.pop_back();
  return s;
}

// ---- runs ----------------------------------------------------------------------

namespace {

models::ModelConfig model_config(const ExperimentConfig& c, std::size_t feature_dim) {
  models::ModelConfig mc;
  switch (c.model) {
    case Method::tcn: mc.kind = models::ModelKind::tcn; break;
    case Method::dtcn: mc.kind = models::ModelKind::dtcn; break;
    case Method::lstm: mc.kind = models::ModelKind::lstm; break;
    case Method::gru: mc.kind = models::ModelKind::gru; break;
    default: throw std::logic_error("model_config: not a neural model");
  }
  const auto& h = c.hyper;
  mc.filters = h.filters;
  mc.kernel = h.kernel;
  mc.dilation_base = h.dilation_base;
  mc.layers = h.layers;
  mc.dropout = h.dropout;
  mc.skip_connections = h.skip_connections;
  mc.normalization = h.normalization;
  mc.bottleneck = h.bottleneck;
  mc.feature_dim = c.model == Method::dtcn ? feature_dim : 0;
  mc.lower_dim = h.lower_dim;
  return mc;
}

models::TrainConfig train_config(const ExperimentConfig& c, std::uint64_t seed) {
  models::TrainConfig tc;
  tc.epochs = c.epochs;
  tc.epsilon = c.hyper.epsilon;
  tc.optimizer.learning_rate = c.hyper.learning_rate;
  tc.optimizer.weight_decay = c.hyper.weight_decay;
  tc.seed = seed;
  return tc;
}

WindowSet windows_for(const ExperimentConfig& c, const features::DailyPanel& panel, std::size_t train,
                      std::size_t test) {
  const FeatureSet fs = c.model == Method::dtcn ? c.features : FeatureSet{};
  if (c.first_day + train + test > panel.size())
    throw ValidationError("panel has " + std::to_string(panel.size()) + " days, the split needs " +
                          std::to_string(c.first_day + train + test));
  WindowSet ws = features::make_day_windows(panel, fs, {train, test}, c.first_day);
  if (ws.train.empty() || ws.test.empty()) throw ValidationError("split leaves no training or test windows");
  return ws;
}

std::vector<double> truths(const std::vector<models::DayPrediction>& p) {
  std::vector<double> y;
  for (const auto& d : p) y.push_back(d.true_rv);
  return y;
}
std::vector<double> preds(const std::vector<models::DayPrediction>& p) {
  std::vector<double> y;
  for (const auto& d : p) y.push_back(d.pred_rv);
  return y;
}

void score(RunManifest& m) { m.metrics = eval::metrics(truths(m.predictions), preds(m.predictions)); }

// Deterministic baselines on the same test windows as the neural models.
std::vector<models::DayPrediction> run_baseline(const ExperimentConfig& c, const features::DailyPanel& panel,
                                                const WindowSet& ws, std::size_t train) {
  const std::size_t first = c.first_day;
  const auto train_rv = features::daily_rv_series(panel, first, train);
  std::vector<models::DayPrediction> out;
  auto push = [&](const features::DayWindow& w, double pred) { out.push_back({w.target_day, w.true_rv(), pred}); };
  switch (c.model) {
    case Method::constant_mean: {
      const double f = econ::constant_mean_forecast(train_rv);
      for (const auto& w : ws.test) push(w, f);
      break;
    }
    case Method::arrv: {
      const auto model = econ::arrv_fit(train_rv, c.arrv_lag);
      for (const auto& w : ws.test) {
        if (w.target_index < first + c.arrv_lag) throw std::runtime_error("AR-RV: not enough history");
        const auto recent = features::daily_rv_series(panel, w.target_index - c.arrv_lag, c.arrv_lag);
        push(w, econ::arrv_predict(model, recent));
      }
      break;
    }
    case Method::garch: {
      const auto all = panel.returns;
      const std::size_t T = features::kBinsPerDay;
      std::span<const double> train_returns(all.data() + first * T, train * T);
      const auto model = econ::garch_fit(train_returns);
      for (const auto& w : ws.test) {
        // Filter with fixed parameters through the end of the input day.
        std::span<const double> history(all.data() + first * T, (w.input_index + 1 - first) * T);
        const auto var = econ::garch_filter(model, history);
        push(w, econ::garch_forecast_daily_rv(model, history.back(), var.back()));
      }
      break;
    }
    default: throw std::logic_error("run_baseline: neural model");
  }
  return out;
}

struct NeuralRun {
  RunManifest manifest;
  std::unique_ptr<models::Forecaster> model;
};

NeuralRun run_neural(const ExperimentConfig& c, const WindowSet& ws, std::uint64_t seed) {
  NeuralRun r;
  r.model = std::make_unique<models::Forecaster>(model_config(c, ws.train.front().feature_dim));
  nn::Rng rng(seed);
  r.model->init(rng);
  auto& m = r.manifest;
  try {
    const auto fit = models::fit(*r.model, ws.train, train_config(c, seed));
    m.final_loss = fit.final_loss;
    m.predictions = models::evaluate(*r.model, ws.test, ws.return_scaler);
    for (const auto& p : m.predictions)
      if (!std::isfinite(p.pred_rv)) throw std::runtime_error("non-finite prediction on " + io::format_date(p.day));
    score(m);
    for (const auto& b : models::export_head_bias(*r.model)) m.head_bias.push_back(b.bias);
  } catch (const std::runtime_error& e) {
    m.ok = false;
    m.error = e.what();
    m.final_loss = kNaN;
    m.metrics = {kNaN, kNaN, kNaN, kNaN};
    m.predictions.clear();
    m.head_bias.clear();
  }
  return r;
}

RunManifest stamp(RunManifest m, const ExperimentConfig& c, const Dataset& d, std::uint64_t seed, std::size_t index) {
  m.label = model_label(c.model, c.features);
  m.config_text = c.canonical();
  m.config_hash = c.hash();
  m.data_digest = d.digest;
  m.seed = seed;
  m.run_index = index;
  return m;
}

void write_run(RunManifest& m, const fs::path& dir) {
  char base[32];
  std::snprintf(base, sizeof base, "run_%03zu", m.run_index);
  fs::create_directories(dir);
  if (m.ok) {
    const auto pred = dir / (std::string(base) + "_predictions.csv");
    models::write_predictions(pred, m.predictions);
    m.artifacts["predictions"] = pred.string();
    if (!m.head_bias.empty()) {
      std::vector<models::BiasRow> rows;
      for (std::size_t i = 0; i < m.head_bias.size(); ++i)
        rows.push_back({io::format_utc(static_cast<std::int64_t>(i) * features::kBinSeconds).substr(11, 5),
                        m.head_bias[i]});
      const auto bias = dir / (std::string(base) + "_bias.csv");
      models::write_head_bias(bias, rows);
      m.artifacts["bias"] = bias.string();
    }
  }
  const auto manifest = dir / (std::string(base) + ".json");
  m.artifacts["manifest"] = manifest.string();
  write_manifest(manifest, m);
}

// All runs of one configuration; deterministic models run once.
std::vector<RunManifest> run_all(const ExperimentConfig& c, const Dataset& d, std::size_t runs,
                                 std::unique_ptr<models::Forecaster>* keep_first = nullptr) {
  const std::size_t train = c.horizon();
  const WindowSet ws = windows_for(c, d.panel, train, c.test_days);
  if (!is_neural(c.model)) {
    RunManifest m;
    m.predictions = run_baseline(c, d.panel, ws, train);
    score(m);
    return {stamp(std::move(m), c, d, c.seed, 0)};
  }
  std::vector<RunManifest> out(runs);
  parallel_for(runs, c.threads, [&](std::size_t i) {
    const std::uint64_t seed = c.seed + i;
    auto r = run_neural(c, ws, seed);
    out[i] = stamp(std::move(r.manifest), c, d, seed, i);
    if (i == 0 && keep_first) *keep_first = std::move(r.model);
  });
  return out;
}

}  // namespace

std::vector<RunManifest> cmd_train(const ExperimentConfig& config) {
  config.validate();
  const Dataset d = load_dataset(config);
  auto manifests = run_all(config, d, config.runs);
  const fs::path dir = fs::path(config.out_dir) / "runs" / slug(manifests.front().label);
  for (auto& m : manifests) write_run(m, dir);
  return manifests;
}

RunManifest rerun(const RunManifest& manifest) {
  ExperimentConfig c = make_config(parse_key_values(manifest.config_text));
  const Dataset d = load_dataset(c);
  if (d.digest != manifest.data_digest) throw std::runtime_error("rerun: input data changed since the manifest was written");
  const WindowSet ws = windows_for(c, d.panel, c.horizon(), c.test_days);
  RunManifest m;
  if (is_neural(c.model)) {
    m = run_neural(c, ws, manifest.seed).manifest;
  } else {
    m.predictions = run_baseline(c, d.panel, ws, c.horizon());
    score(m);
  }
  m = stamp(std::move(m), c, d, manifest.seed, manifest.run_index);
  return m;
}

// ---- ablation ------------------------------------------------------------------

AblationResult cmd_ablate(const ExperimentConfig& config, const std::vector<FeatureSet>& subsets) {
  if (subsets.empty()) throw ValidationError("ablate: no feature subsets given");
  for (const auto& s : subsets)
    if (s.empty()) throw ValidationError("ablate: empty feature subset (a D-TCN needs features)");
  ExperimentConfig base = config;
  base.model = Method::tcn;
  base.features = {};
  base.validate();
  const Dataset d = load_dataset(base);

  AblationResult res;
  std::unique_ptr<models::Forecaster> tcn0;
  const auto tcn_runs = run_all(base, d, base.ablation_runs, &tcn0);
  const fs::path root = fs::path(config.out_dir) / "ablation";

  std::vector<eval::MetricVector> tcn_metrics;
  for (const auto& m : tcn_runs)
    if (m.ok) tcn_metrics.push_back(m.metrics);
  if (tcn_metrics.empty()) throw std::runtime_error("ablate: every TCN run failed");
  res.table.push_back(eval::summarize("TCN", tcn_metrics, {}, config.ttest));
  for (auto m : tcn_runs) {
    write_run(m, root / slug(m.label));
    res.manifests.push_back(std::move(m));
  }

  for (std::size_t s = 0; s < subsets.size(); ++s) {
    ExperimentConfig c = config;
    c.model = Method::dtcn;
    c.features = subsets[s];
    c.validate();
    if (s == 0) {
      // The ablation identity: TCN run 0 moved into a D-TCN with a zeroed
      // feature pipeline must predict the same numbers.
      const WindowSet ws = windows_for(c, d.panel, c.horizon(), c.test_days);
      models::Forecaster dtcn(model_config(c, ws.train.front().feature_dim));
      nn::Rng rng(c.seed);
      dtcn.init(rng);
      const auto& ref = tcn_runs.front();
      if (!tcn0 || !ref.ok) {
        res.identity_detail = "TCN run 0 failed; identity not checked";
      } else {
        models::transplant_tcn(*tcn0, dtcn);
        const auto got = models::evaluate(dtcn, ws.test, ws.return_scaler);
        std::size_t mismatches = got.size() == ref.predictions.size() ? 0 : got.size() + 1;
        for (std::size_t i = 0; mismatches == 0 && i < got.size(); ++i)
          if (std::bit_cast<std::uint64_t>(got[i].pred_rv) != std::bit_cast<std::uint64_t>(ref.predictions[i].pred_rv))
            ++mismatches;
        const auto mv = eval::metrics(truths(got), preds(got));
        bool same_metrics = true;
        for (auto metric : eval::kMetrics) {
          const double a = mv.get(metric), b = ref.metrics.get(metric);
          if (!(std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b))) same_metrics = false;
        }
        res.identity_holds = mismatches == 0 && same_metrics;
        res.identity_detail = "D-TCN_" + subsets[0].label() + " with zeroed feature pipeline vs TCN run 0 over " +
                              std::to_string(got.size()) + " test days: " +
                              (res.identity_holds ? "bitwise identical predictions and metrics"
                                                  : std::to_string(mismatches) + " mismatching predictions");
      }
    }
    auto runs = run_all(c, d, c.ablation_runs);
    std::vector<eval::MetricVector> mv;
    for (const auto& m : runs)
      if (m.ok) mv.push_back(m.metrics);
    if (mv.empty()) {
      eval::SignificanceEntry e;
      e.label = model_label(c.model, c.features);
      e.mean.fill(kNaN);
      e.sd.fill(kNaN);
      e.p.fill(kNaN);
      res.table.push_back(e);
    } else {
      res.table.push_back(eval::summarize(model_label(c.model, c.features), mv, tcn_metrics, config.ttest));
    }
    for (auto m : runs) {
      write_run(m, root / slug(m.label));
      res.manifests.push_back(std::move(m));
    }
  }

  std::size_t failed = 0;
  for (const auto& m : res.manifests) failed += m.ok ? 0 : 1;
  res.text = eval::render_text(res.table, "Feature ablation (" + ttest_name(config.ttest) + " t-test against TCN)") +
             "identity: " + res.identity_detail + "\n";
  if (failed) res.text += "failed runs: " + std::to_string(failed) + "\n";
  res.csv = eval::render_csv(res.table);
  io::write_file(root / "significance.txt", res.text);
  io::write_file(root / "significance.csv", res.csv);
  return res;
}

// ---- hyperparameter search -----------------------------------------------------

SearchSpace SearchSpace::standard(Method m) {
  SearchSpace s;
  if (m == Method::lstm || m == Method::gru) {
    s.search_skip = false;
    s.search_normalization = false;
  }
  return s;
}

namespace {
bool tcn_family(Method m) { return m == Method::tcn || m == Method::dtcn; }

std::pair<std::string, std::string> split_range(const std::string& key, const std::string& v) {
  const auto colon = v.find(':');
  if (colon == std::string::npos) bad_value(key, v, "expected low:high");
  return {trim(v.substr(0, colon)), trim(v.substr(colon + 1))};
}
}  // namespace

SearchSpace SearchSpace::from(Method m, const KeyValues& kv) {
  SearchSpace s = standard(m);
  for (const auto& [k, v] : kv) {
    if (k.rfind("hpo.", 0) != 0) continue;
    const std::string name = k.substr(4);
    if (name == "budget" || name == "include_default") continue;
    auto int_range = [&](IntRange& r) {
      const auto [lo, hi] = split_range(k, v);
      r = {to_int(k, lo), to_int(k, hi)};
      if (r.low > r.high) bad_value(k, v, "low exceeds high");
    };
    auto real_range = [&](RealRange& r) {
      const auto [lo, hi] = split_range(k, v);
      r.low = to_real(k, lo);
      r.high = to_real(k, hi);
      if (!(r.low <= r.high)) bad_value(k, v, "low exceeds high");
      if (r.log_scale && !(r.low > 0.0)) bad_value(k, v, "log-scale bounds must be positive");
    };
    if (name == "filters") int_range(s.filters);
    else if (name == "dropout") real_range(s.dropout);
    else if (name == "epsilon") real_range(s.epsilon);
    else if (name == "learning_rate") real_range(s.learning_rate);
    else if (name == "weight_decay") real_range(s.weight_decay);
    else if (name == "kernel") int_range(s.kernel);
    else if (name == "dilation_base") int_range(s.dilation_base);
    else if (name == "skip_connections") s.search_skip = to_bool(k, v);
    else if (name == "normalization") s.search_normalization = to_bool(k, v);
    else throw ValidationError("config: unknown key '" + k + "'");
  }
  if (s.filters.low < 1 || s.kernel.low < 1 || s.dilation_base.low < 1)
    throw ValidationError("config: hpo integer bounds must be positive");
  if (s.dropout.low < 0.0 || s.dropout.high >= 1.0) throw ValidationError("config: hpo.dropout must lie in [0, 1)");
  if (s.epsilon.low < 0.0) throw ValidationError("config: hpo.epsilon must not be negative");
  return s;
}

bool SearchSpace::contains(const Hyperparameters& h, Method m) const {
  auto in_i = [](long long x, const IntRange& r) { return x >= r.low && x <= r.high; };
  auto in_r = [](double x, const RealRange& r) { return x >= r.low && x <= r.high; };
  bool ok = in_i(static_cast<long long>(h.filters), filters) && in_r(h.dropout, dropout) &&
            in_r(h.epsilon, epsilon) && in_r(h.learning_rate, learning_rate) && in_r(h.weight_decay, weight_decay);
  if (tcn_family(m)) ok = ok && in_i(h.kernel, kernel) && in_i(h.dilation_base, dilation_base);
  return ok;
}

Hyperparameters SearchSpace::sample(nn::Rng& rng, const Hyperparameters& base, Method m) const {
  Hyperparameters h = base;
  auto draw_i = [&](const IntRange& r) { return std::uniform_int_distribution<long long>(r.low, r.high)(rng); };
  auto draw_r = [&](const RealRange& r) {
    if (r.low == r.high) return r.low;
    if (r.log_scale) {
      const double x = std::uniform_real_distribution<double>(std::log(r.low), std::log(r.high))(rng);
      return std::clamp(std::exp(x), r.low, r.high);
    }
    return std::uniform_real_distribution<double>(r.low, r.high)(rng);
  };
  h.filters = static_cast<std::size_t>(draw_i(filters));
  h.dropout = draw_r(dropout);
  h.epsilon = draw_r(epsilon);
  h.learning_rate = draw_r(learning_rate);
  h.weight_decay = draw_r(weight_decay);
  if (tcn_family(m)) {
    h.kernel = static_cast<int>(draw_i(kernel));
    h.dilation_base = static_cast<int>(draw_i(dilation_base));
    if (search_skip) h.skip_connections = std::bernoulli_distribution(0.5)(rng);
    if (search_normalization)
      h.normalization = static_cast<nn::Normalization>(std::uniform_int_distribution<int>(0, 3)(rng));
  }
  return h;
}

HpoResult cmd_hpo(const ExperimentConfig& config, const SearchSpace& space, std::size_t budget, bool include_default) {
  if (budget < 1) throw ValidationError("hpo: budget must be at least 1");
  if (!is_neural(config.model)) throw ValidationError("hpo: " + to_string(config.model) + " has no hyperparameters");
  config.validate();
  const Dataset d = load_dataset(config);
  const WindowSet ws = windows_for(config, d.panel, config.train_days, config.validation_days);

  HpoResult res;
  nn::Rng rng(config.seed);
  if (include_default) res.trials.push_back({0, true, config.hyper});
  for (std::size_t i = 0; i < budget; ++i) {
    Trial t;
    t.index = res.trials.size();
    t.hyper = space.sample(rng, config.hyper, config.model);
    res.trials.push_back(t);
  }
  parallel_for(res.trials.size(), config.threads, [&](std::size_t i) {
    Trial& t = res.trials[i];
    ExperimentConfig c = config;
    c.hyper = t.hyper;
    auto r = run_neural(c, ws, config.seed);
    if (!r.manifest.ok) {
      t.ok = false;
      t.error = r.manifest.error;
    } else if (!std::isfinite(r.manifest.metrics.mape)) {
      t.ok = false;
      t.error = "validation MAPE undefined";
    } else {
      t.validation_mape = r.manifest.metrics.mape;
    }
  });
  bool any = false;
  for (std::size_t i = 0; i < res.trials.size(); ++i) {
    const auto& t = res.trials[i];
    if (!t.ok) continue;
    if (!any || t.validation_mape < res.trials[res.best].validation_mape) res.best = i;
    any = true;
  }
  if (!any) throw std::runtime_error("hpo: all " + std::to_string(res.trials.size()) + " trials failed");
  return res;
}

std::string trial_log_csv(const HpoResult& r) {
  std::ostringstream os;
  os << "trial,default,status,validation_mape,best_so_far,filters,dropout,epsilon,learning_rate,weight_decay,kernel,"
        "dilation_base,skip_connections,normalization,error\n";
  double best = kNaN;
  for (const auto& t : r.trials) {
    if (t.ok && !(best <= t.validation_mape)) best = t.validation_mape;
    const auto& h = t.hyper;
    io::write_csv_row(os, {std::to_string(t.index), t.is_default ? "true" : "false", t.ok ? "ok" : "failed",
                           t.ok ? num(t.validation_mape) : "", std::isnan(best) ? "" : num(best),
                           std::to_string(h.filters), num(h.dropout), num(h.epsilon), num(h.learning_rate),
                           num(h.weight_decay), std::to_string(h.kernel), std::to_string(h.dilation_base),
                           h.skip_connections ? "true" : "false", nn::to_string(h.normalization), t.error});
  }
  return os.str();
}

std::string best_config_text(const HpoResult& r) {
  const auto& t = r.best_trial();
  const auto& h = t.hyper;
  std::ostringstream os;
  os << "# trial " << t.index << ", validation MAPE " << num(t.validation_mape) << "\n"
     << "filters = " << h.filters << "\n"
     << "dropout = " << num(h.dropout) << "\n"
     << "epsilon = " << num(h.epsilon) << "\n"
     << "learning_rate = " << num(h.learning_rate) << "\n"
     << "weight_decay = " << num(h.weight_decay) << "\n"
     << "kernel = " << h.kernel << "\n"
     << "dilation_base = " << h.dilation_base << "\n"
     << "skip_connections = " << (h.skip_connections ? "true" : "false") << "\n"
     << "normalization = " << nn::to_string(h.normalization) << "\n";
  return os.str();
}

// ---- report --------------------------------------------------------------------

namespace {

std::vector<double> daily_losses(const RunManifest& m, eval::Metric metric) {
  std::vector<double> out;
  for (const auto& p : m.predictions) {
    const double y = p.true_rv, f = p.pred_rv;
    switch (metric) {
      case eval::Metric::mape: out.push_back(std::abs(y - f) / y); break;
      case eval::Metric::mae: out.push_back(std::abs(y - f)); break;
      case eval::Metric::rmse: out.push_back((y - f) * (y - f)); break;
      case eval::Metric::msle: {
        const double e = std::log1p(y) - std::log1p(f);
        out.push_back(e * e);
        break;
      }
    }
  }
  return out;
}

std::vector<double> metric_values(const std::vector<RunManifest>& runs, eval::Metric metric) {
  std::vector<double> v;
  for (const auto& m : runs)
    if (m.ok) v.push_back(m.metrics.get(metric));
  return v;
}

std::vector<RunManifest> ok_runs(const std::vector<RunManifest>& runs) {
  std::vector<RunManifest> v;
  for (const auto& m : runs)
    if (m.ok) v.push_back(m);
  return v;
}

}  // namespace

double compare(const std::vector<RunManifest>& model, const std::vector<RunManifest>& baseline, eval::Metric metric,
               eval::TTest kind) {
  const auto a = ok_runs(model), b = ok_runs(baseline);
  if (a.empty() || b.empty()) return kNaN;
  auto va = metric_values(a, metric), vb = metric_values(b, metric);
  for (double x : va)
    if (!std::isfinite(x)) return kNaN;
  for (double x : vb)
    if (!std::isfinite(x)) return kNaN;
  try {
    if (va.size() >= 2 && vb.size() >= 2) return eval::one_sided_t(vb, va, kind);
    if (va.size() >= 2) return eval::one_sided_t(vb, va, eval::TTest::student);
    if (vb.size() >= 2) {
      // mean(baseline) > value is mean(-baseline) < -value.
      for (double& x : vb) x = -x;
      return eval::one_sided_t(std::vector<double>{-va[0]}, vb, eval::TTest::student);
    }
    const auto la = daily_losses(a[0], metric), lb = daily_losses(b[0], metric);
    for (double x : la)
      if (!std::isfinite(x)) return kNaN;
    for (double x : lb)
      if (!std::isfinite(x)) return kNaN;
    // Same test days: paired, a one-sample test on the daily differences.
    bool paired = a[0].predictions.size() == b[0].predictions.size();
    for (std::size_t i = 0; paired && i < la.size(); ++i)
      paired = a[0].predictions[i].day == b[0].predictions[i].day;
    if (!paired) return eval::one_sided_t(lb, la, eval::TTest::welch);
    std::vector<double> diff(la.size());
    for (std::size_t i = 0; i < la.size(); ++i) diff[i] = la[i] - lb[i];
    return eval::one_sided_t(std::vector<double>{0.0}, diff, eval::TTest::student);
  } catch (const std::domain_error&) {
    return kNaN;
  }
}

ReportOptions make_report_options(const KeyValues& kv) {
  ReportOptions o;
  for (const auto& [k, v] : kv) {
    if (k == "reference") o.reference = v;
    else if (k == "ttest") o.ttest = to_ttest(k, v);
    else if (k == "bootstrap_samples") o.bootstrap_samples = to_count(k, v);
    else if (k == "percentile_buckets") o.percentile_buckets = to_count(k, v);
    else if (k == "seed") o.seed = static_cast<std::uint64_t>(to_count(k, v));
  }
  if (o.bootstrap_samples < 1 || o.percentile_buckets < 1)
    throw ValidationError("config: bootstrap_samples and percentile_buckets must be positive");
  return o;
}

ReportSummary cmd_report(const std::vector<RunManifest>& manifests, const fs::path& out_dir,
                         const ReportOptions& options) {
  if (manifests.empty()) throw ValidationError("report: no manifests");
  std::map<std::string, std::vector<RunManifest>> groups;
  for (const auto& m : manifests) groups[m.label].push_back(m);
  for (auto& [label, runs] : groups)
    std::stable_sort(runs.begin(), runs.end(), [](const auto& x, const auto& y) { return x.run_index < y.run_index; });

  // Reference first, the rest in label order.
  std::vector<std::string> order;
  if (groups.count(options.reference)) order.push_back(options.reference);
  for (const auto& [label, runs] : groups)
    if (label != options.reference) order.push_back(label);
  const bool has_ref = groups.count(options.reference) > 0;

  fs::create_directories(out_dir);
  ReportSummary out;
  auto emit = [&](const std::string& name, const std::string& content) {
    io::write_file(out_dir / name, content);
    out.files.push_back(out_dir / name);
  };

  std::string failures;
  for (const auto& label : order) {
    const auto& runs = groups[label];
    std::vector<eval::MetricVector> mv;
    std::size_t failed = 0;
    for (const auto& m : runs) {
      if (m.ok) mv.push_back(m.metrics);
      else ++failed;
    }
    if (failed) failures += label + ": " + std::to_string(failed) + " failed run(s)\n";
    eval::SignificanceEntry e;
    if (mv.empty()) {
      e.label = label;
      e.mean.fill(kNaN);
      e.sd.fill(kNaN);
      e.p.fill(kNaN);
    } else {
      e = eval::summarize(label, mv, {}, options.ttest);
    }
    if (has_ref && label != options.reference)
      for (std::size_t k = 0; k < eval::kMetrics.size(); ++k) {
        e.p[k] = compare(runs, groups[options.reference], eval::kMetrics[k], options.ttest);
        e.code[k] = eval::significance_code(e.p[k]);
      }
    out.table.push_back(e);
  }
  const std::string title =
      has_ref ? "One-sided tests of each model against " + options.reference : "Per-model metrics";
  out.text = eval::render_text(out.table, title) + failures;
  emit("significance.txt", out.text);
  emit("significance.csv", eval::render_csv(out.table));

  for (auto metric : eval::kMetrics) {
    std::ostringstream os;
    std::vector<std::string> header{"model"};
    for (const auto& l : order) header.push_back(l);
    io::write_csv_row(os, header);
    for (const auto& row : order) {
      std::vector<std::string> cells{row};
      for (const auto& col : order) {
        if (row == col) {
          cells.emplace_back();
          continue;
        }
        const double p = compare(groups[row], groups[col], metric, options.ttest);
        cells.push_back(std::isnan(p) ? "" : num(p));
      }
      io::write_csv_row(os, cells);
    }
    emit(std::string("pairwise_") + slug(eval::metric_name(metric)) + ".csv", os.str());
  }

  std::ostringstream pct;
  pct << "model,bucket,lower_edge,upper_edge,days,mape\n";
  for (std::size_t gi = 0; gi < order.size(); ++gi) {
    const auto& label = order[gi];
    const auto runs = ok_runs(groups[label]);
    if (runs.empty()) continue;
    const auto& first = runs.front().predictions;
    std::vector<std::vector<double>> by_run;
    for (const auto& m : runs) {
      if (m.predictions.size() != first.size()) throw ValidationError("report: " + label + " runs cover different days");
      by_run.push_back(preds(m.predictions));
    }
    const std::size_t D = first.size();
    eval::PlotInput plot;
    plot.title = label + ": predicted vs true daily RV";
    plot.truth = truths(first);
    plot.prediction.assign(D, 0.0);
    for (std::size_t dd = 0; dd < D; ++dd) {
      plot.x_labels.push_back(io::format_date(first[dd].day));
      for (const auto& r : by_run) plot.prediction[dd] += r[dd];
      plot.prediction[dd] /= static_cast<double>(by_run.size());
    }
    const std::uint64_t seed = options.seed + gi;
    if (by_run.size() >= 2) plot.band = eval::bootstrap_band(by_run, options.bootstrap_samples, 0.95, seed);

    std::ostringstream pc;
    pc << "date,true_rv,mean_pred_rv,lower,upper\n";
    for (std::size_t dd = 0; dd < D; ++dd)
      io::write_csv_row(pc, {plot.x_labels[dd], num(plot.truth[dd]), num(plot.prediction[dd]),
                             plot.band ? num(plot.band->lower[dd]) : "", plot.band ? num(plot.band->upper[dd]) : ""});
    emit("predictions_" + slug(label) + ".csv", pc.str());
    emit("predictions_" + slug(label) + ".svg", eval::render_svg(plot));

    std::vector<std::vector<double>> biases;
    for (const auto& m : runs)
      if (m.head_bias.size() == features::kBinsPerDay) biases.push_back(m.head_bias);
    if (!biases.empty()) {
      std::ostringstream bc;
      bc << "time_utc,mean,lower,upper\n";
      std::optional<eval::BootstrapBand> band;
      if (biases.size() >= 2) band = eval::bootstrap_band(biases, options.bootstrap_samples, 0.95, seed ^ 0xb1a5);
      for (std::size_t t = 0; t < features::kBinsPerDay; ++t) {
        double mean = 0.0;
        for (const auto& b : biases) mean += b[t];
        mean /= static_cast<double>(biases.size());
        io::write_csv_row(bc, {io::format_utc(static_cast<std::int64_t>(t) * features::kBinSeconds).substr(11, 5),
                               num(mean), band ? num(band->lower[t]) : "", band ? num(band->upper[t]) : ""});
      }
      emit("bias_" + slug(label) + ".csv", bc.str());
    }

    const auto buckets = eval::percentile_mape(plot.truth, plot.prediction, options.percentile_buckets);
    for (std::size_t b = 0; b < buckets.counts.size(); ++b)
      io::write_csv_row(pct, {label, std::to_string(b + 1), num(buckets.edges[b]), num(buckets.edges[b + 1]),
                              std::to_string(buckets.counts[b]), std::isnan(buckets.mape[b]) ? "" : num(buckets.mape[b])});
  }
  emit("percentile_mape.csv", pct.str());
  return out;
}

}  // namespace volcast::experiment
