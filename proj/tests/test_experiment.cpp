#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <regex>
#include <set>
#include <sstream>
#include <cstring>

#include "doctest.h"
#include "oracles.hpp"
#include "volcast/experiment.hpp"
#include "volcast/table_io.hpp"

using namespace volcast;
using namespace volcast::experiment;
namespace fs = std::filesystem;

namespace {

const fs::path kFixtures = VOLCAST_FIXTURE_DIR;

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / "volcast_test_experiment" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// A small synthetic dataset on disk: 40 days, coupled user fields.
fs::path small_dataset(std::size_t days = 40, std::uint64_t seed = 3) {
  const auto dir = scratch("data_" + std::to_string(days) + "_" + std::to_string(seed));
  synth::SynthConfig sc;
  sc.days = days;
  sc.seed = seed;
  sc.tweets_per_bin = 2.0;
  cmd_synth(sc, dir);
  return dir;
}

// Tiny and fast: 16/8 days of training, 8 test days.
KeyValues tiny(const fs::path& data, const fs::path& out) {
  return {{"candles", (data / "candles.csv").string()},
          {"tweets", (data / "tweets.csv").string()},
          {"out_dir", out.string()},
          {"train_days", "16"},
          {"validation_days", "8"},
          {"test_days", "8"},
          {"epochs", "2"},
          {"filters", "3"},
          {"kernel", "3"},
          {"dilation_base", "4"},
          {"dropout", "0.1"},
          {"epsilon", "0"},
          {"learning_rate", "0.001"},
          {"threads", "1"}};
}

KeyValues with(KeyValues kv, const KeyValues& extra) {
  for (const auto& [k, v] : extra) kv[k] = v;
  return kv;
}

std::vector<double> pred_values(const RunManifest& m) {
  std::vector<double> v;
  for (const auto& p : m.predictions) v.push_back(p.pred_rv);
  return v;
}

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

}  // namespace

TEST_CASE("key=value grammar") {
  const auto kv = parse_key_values("# experiment\n model = tcn  \n\nepochs=3 # short\nfeatures = Count, User\n");
  CHECK(kv.size() == 3);
  CHECK(kv.at("model") == "tcn");
  CHECK(kv.at("epochs") == "3");
  CHECK(kv.at("features") == "Count, User");
  CHECK_THROWS_AS(parse_key_values("epochs = 3\nepochs = 4\n"), ValidationError);
  CHECK_THROWS_AS(parse_key_values("just words\n"), ValidationError);
  CHECK_THROWS_AS(parse_key_values("Bad Key = 1\n"), ValidationError);
  try {
    parse_key_values("a = 1\n\nnope\n");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
}

TEST_CASE("configuration defaults and validation") {
  const auto c = make_config({{"candles", "x.csv"}});
  CHECK(c.train_days == 72);
  CHECK(c.validation_days == 24);
  CHECK(c.horizon() == 96);
  CHECK(c.test_days == 48);
  CHECK(c.epochs == 30);
  CHECK(c.runs == 20);
  CHECK(c.ablation_runs == 40);
  // Tuned TCN defaults.
  CHECK(c.hyper.filters == 287);
  CHECK(c.hyper.dropout == 0.217);
  CHECK(c.hyper.epsilon == 0.0913);
  CHECK(c.hyper.learning_rate == 6.49e-5);
  CHECK(c.hyper.weight_decay == 5.93e-6);
  CHECK(c.hyper.kernel == 5);
  CHECK(c.hyper.dilation_base == 4);
  CHECK(c.hyper.skip_connections);
  CHECK(c.hyper.normalization == nn::Normalization::none);

  const auto lstm = make_config({{"candles", "x.csv"}, {"model", "lstm"}});
  CHECK(lstm.hyper.filters == 261);
  CHECK(lstm.hyper.learning_rate == 0.00521);
  const auto gru = make_config({{"candles", "x.csv"}, {"model", "GRU"}, {"hidden", "12"}});
  CHECK(gru.hyper.filters == 12);
  CHECK(gru.hyper.epsilon == 0.0431);

  CHECK_THROWS_AS(make_config({}), ValidationError);
  CHECK_THROWS_AS(make_config({{"candles", "x"}, {"colour", "blue"}}), ValidationError);
  CHECK_THROWS_AS(make_config({{"candles", "x"}, {"runs", "0"}}), ValidationError);
  CHECK_THROWS_AS(make_config({{"candles", "x"}, {"epochs", "three"}}), ValidationError);
  CHECK_THROWS_AS(make_config({{"candles", "x"}, {"model", "dtcn"}}), ValidationError);
  CHECK_THROWS_AS(make_config({{"candles", "x"}, {"model", "dtcn"}, {"features", "none"}}), ValidationError);
  CHECK_NOTHROW(make_config({{"candles", "x"}, {"model", "dtcn"}, {"features", "user"}}));
  CHECK_THROWS_AS(make_config({{"candles", "x"}, {"normalization", "group"}}), ValidationError);
  CHECK_THROWS_AS(make_config({{"candles", "x"}, {"model", "svm"}}), ValidationError);
  // Generator and search keys belong to their own parsers.
  CHECK_NOTHROW(make_config({{"candles", "x"}, {"synth.days", "10"}, {"hpo.budget", "3"}}));
  CHECK_THROWS_AS(make_synth_config({{"synth.colour", "1"}}), ValidationError);
}

TEST_CASE("configuration hash covers every result-changing setting") {
  const KeyValues base{{"candles", "x.csv"}};
  const auto h = make_config(base).hash();
  CHECK(h.size() == 16);
  CHECK(make_config(base).hash() == h);
  CHECK(make_config(with(base, {{"threads", "7"}, {"out_dir", "elsewhere"}, {"runs", "3"}})).hash() == h);
  for (const auto& [k, v] : KeyValues{{"seed", "2"},
                                      {"epochs", "29"},
                                      {"dropout", "0.2"},
                                      {"learning_rate", "1e-3"},
                                      {"kernel", "3"},
                                      {"normalization", "batch"},
                                      {"test_days", "40"},
                                      {"model", "gru"}}) {
    CAPTURE(k);
    CHECK(make_config(with(base, {{k, v}})).hash() != h);
  }
  // The canonical text parses back to the same configuration.
  const auto c = make_config(with(base, {{"model", "dtcn"}, {"features", "user,count"}, {"dropout", "0.123456789"}}));
  const auto back = make_config(parse_key_values(c.canonical()));
  CHECK(back.canonical() == c.canonical());
  CHECK(back.hyper == c.hyper);
  CHECK(back.features == c.features);
}

TEST_CASE("labels and file names") {
  CHECK(model_label(Method::tcn) == "TCN");
  CHECK(model_label(Method::dtcn, features::FeatureSet::parse("user")) == "D-TCN_User");
  CHECK(model_label(Method::dtcn, features::FeatureSet::parse("all")) == "D-TCN_Count, VADER, Tweet, User");
  CHECK(slug("D-TCN_Count, VADER, Tweet, User") == "d-tcn_count-vader-tweet-user");
  CHECK(slug("Constant mean") == "constant-mean");
  CHECK(parse_method("AR-RV") == Method::arrv);
  CHECK(!is_neural(Method::garch));
}

TEST_CASE("synthetic generator") {
  synth::SynthConfig sc;
  sc.days = 60;
  sc.seed = 5;
  const auto a = synth::generate(sc);
  const auto b = synth::generate(sc);
  CHECK(a.candles.size() == 60 * 96 + 1);
  CHECK(a.tweets == b.tweets);
  CHECK(std::equal(a.candles.begin(), a.candles.end(), b.candles.begin(),
                   [](const auto& x, const auto& y) { return x.timestamp == y.timestamp && x.close == y.close; }));
  CHECK(std::is_sorted(a.tweets.begin(), a.tweets.end(),
                       [](const auto& x, const auto& y) { return x.created_at < y.created_at; }));

  auto panel = features::build_panel(a.candles, a.tweets);
  REQUIRE(panel.size() == 60);

  // The coupling only touches the tweets.
  auto off = sc;
  off.coupling = 0.0;
  const auto c = synth::generate(off);
  CHECK(std::equal(a.candles.begin(), a.candles.end(), c.candles.begin(),
                   [](const auto& x, const auto& y) { return x.close == y.close; }));

  // Day-mean log followers against the next day's surprise.
  auto corr_with_next_surprise = [&](const synth::SynthData& data) {
    auto p = features::build_panel(data.candles, data.tweets);
    std::vector<double> x, y;
    for (std::size_t d = 0; d + 1 < p.size(); ++d) {
      double s = 0.0;
      auto f = p.day_features(d);
      for (std::size_t t = 0; t < 96; ++t) s += f[t * features::kColumnCount + features::kFollowers];
      x.push_back(std::log(s / 96.0));
      y.push_back(data.surprises[d + 1]);
    }
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / x.size();
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / y.size();
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      sxy += (x[i] - mx) * (y[i] - my);
      sxx += (x[i] - mx) * (x[i] - mx);
      syy += (y[i] - my) * (y[i] - my);
    }
    return sxy / std::sqrt(sxx * syy);
  };
  CHECK(corr_with_next_surprise(a) > 0.9);
  CHECK(std::abs(corr_with_next_surprise(c)) < 0.35);

  sc.days = 0;
  CHECK_THROWS(synth::generate(sc));
}

TEST_CASE("deterministic models run once") {
  const auto data = small_dataset();
  const auto out = scratch("train_det");
  for (const char* model : {"arrv", "garch", "constant_mean"}) {
    CAPTURE(model);
    const auto c = make_config(with(tiny(data, out), {{"model", model}, {"runs", "5"}}));
    const auto ms = cmd_train(c);
    REQUIRE(ms.size() == 1);
    CHECK(ms[0].ok);
    CHECK(ms[0].predictions.size() == 8);
    CHECK(ms[0].head_bias.empty());
    CHECK(fs::exists(ms[0].artifacts.at("manifest")));
  }
}

TEST_CASE("constant-mean and AR-RV baselines against direct computation") {
  const auto data = small_dataset();
  const auto out = scratch("baselines");
  const auto cfg = with(tiny(data, out), {{"runs", "1"}});
  const auto cm = cmd_train(make_config(with(cfg, {{"model", "constant_mean"}})))[0];
  const auto ar = cmd_train(make_config(with(cfg, {{"model", "arrv"}})))[0];

  const auto panel = load_dataset(make_config(cfg)).panel;
  std::vector<double> rv;
  for (std::size_t d = 0; d < panel.size(); ++d) {
    double s = 0.0;
    for (double r : panel.day_returns(d)) s += r * r;
    rv.push_back(std::sqrt(s));
  }
  const double mean_train = std::accumulate(rv.begin(), rv.begin() + 24, 0.0) / 24.0;
  // AR(1) by the closed-form simple regression.
  double mx = 0, my = 0;
  for (std::size_t t = 1; t < 24; ++t) mx += rv[t - 1], my += rv[t];
  mx /= 23;
  my /= 23;
  double sxy = 0, sxx = 0;
  for (std::size_t t = 1; t < 24; ++t) sxy += (rv[t - 1] - mx) * (rv[t] - my), sxx += (rv[t - 1] - mx) * (rv[t - 1] - mx);
  const double b = sxy / sxx, a = my - b * mx;

  std::vector<double> y, pc, pa;
  for (std::size_t t = 24; t < 32; ++t) {
    y.push_back(rv[t]);
    pc.push_back(mean_train);
    pa.push_back(a + b * rv[t - 1]);
  }
  for (std::size_t i = 0; i < 8; ++i) {
    CHECK(cm.predictions[i].true_rv == doctest::Approx(y[i]).epsilon(1e-12));
    CHECK(cm.predictions[i].pred_rv == doctest::Approx(pc[i]).epsilon(1e-12));
    CHECK(ar.predictions[i].pred_rv == doctest::Approx(pa[i]).epsilon(1e-9));
  }
  const auto dm = testing::direct_metrics(y, pa);
  CHECK(ar.metrics.mape == doctest::Approx(dm.mape).epsilon(1e-9));
}

TEST_CASE("neural runs: seeds, determinism, manifests and reruns") {
  const auto data = small_dataset();
  const auto cfg = with(tiny(data, scratch("train_a")), {{"runs", "3"}, {"seed", "11"}});
  const auto a = cmd_train(make_config(cfg));
  REQUIRE(a.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(a[i].ok);
    CHECK(a[i].run_index == i);
    CHECK(a[i].seed == 11 + i);
    CHECK(a[i].head_bias.size() == 96);
    CHECK(a[i].config_hash == make_config(cfg).hash());
  }
  CHECK(pred_values(a[0]) != pred_values(a[1]));

  // Same configuration elsewhere: identical numbers.
  auto cfg_b = cfg;
  cfg_b["out_dir"] = scratch("train_b").string();
  cfg_b["threads"] = "2";
  const auto b = cmd_train(make_config(cfg_b));
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(pred_values(a[i]) == pred_values(b[i]));
    CHECK(same_bits(a[i].metrics.mape, b[i].metrics.mape));
    CHECK(a[i].head_bias == b[i].head_bias);
  }

  // The manifest round-trips through its file and reruns bitwise.
  const auto back = read_manifest(a[1].artifacts.at("manifest"));
  CHECK(pred_values(back) == pred_values(a[1]));
  CHECK(same_bits(back.metrics.msle, a[1].metrics.msle));
  CHECK(same_bits(back.final_loss, a[1].final_loss));
  const auto again = rerun(back);
  CHECK(pred_values(again) == pred_values(a[1]));
  for (auto m : eval::kMetrics) CHECK(same_bits(again.metrics.get(m), a[1].metrics.get(m)));

  const auto all = read_manifests({fs::path(cfg.at("out_dir"))});
  CHECK(all.size() == 3);
}

TEST_CASE("a diverging run is recorded as failed") {
  const auto data = small_dataset();
  const auto out = scratch("train_fail");
  const auto ms = cmd_train(make_config(with(tiny(data, out), {{"runs", "2"}, {"learning_rate", "1e300"}})));
  REQUIRE(ms.size() == 2);
  for (const auto& m : ms) {
    CHECK_FALSE(m.ok);
    CHECK(m.error.find("non-finite") != std::string::npos);
    const auto back = read_manifest(m.artifacts.at("manifest"));
    CHECK_FALSE(back.ok);
    CHECK(std::isnan(back.metrics.mape));
  }
}

TEST_CASE("trained TCN beats the constant-mean forecast on synthetic data") {
  const auto data = small_dataset(144, 7);
  const auto out = scratch("tcn_vs_cm");
  const auto cfg = make_config({{"candles", (data / "candles.csv").string()},
                                {"out_dir", out.string()},
                                {"train_days", "72"},
                                {"validation_days", "24"},
                                {"test_days", "48"},
                                {"runs", "1"},
                                {"filters", "8"},
                                {"dropout", "0"},
                                {"epsilon", "0"},
                                {"learning_rate", "1e-3"},
                                {"threads", "1"}});
  const auto tcn = cmd_train(cfg)[0];
  REQUIRE(tcn.ok);

  // Oracle: the mean training-day RV, predicted for every test day.
  const auto panel = load_dataset(cfg).panel;
  double mean = 0.0;
  for (std::size_t d = 0; d < 96; ++d) mean += features::realized_volatility(panel.day_returns(d));
  mean /= 96.0;
  std::vector<double> y, p;
  for (std::size_t d = 96; d < 144; ++d) {
    y.push_back(features::realized_volatility(panel.day_returns(d)));
    p.push_back(mean);
  }
  const double oracle = testing::direct_metrics(y, p).mape;
  MESSAGE("TCN MAPE " << tcn.metrics.mape << ", constant mean " << oracle);
  CHECK(tcn.metrics.mape < oracle);
}

TEST_CASE("ablation: validation, table shape and the identity") {
  const auto data = small_dataset();
  const auto out = scratch("ablate");
  const auto c = make_config(with(tiny(data, out), {{"ablation_runs", "2"}, {"epochs", "1"}, {"filters", "2"}}));
  CHECK_THROWS_AS(cmd_ablate(c, {features::FeatureSet{}}), ValidationError);
  CHECK_THROWS_AS(cmd_ablate(c, {}), ValidationError);

  const auto all = features::all_feature_subsets();
  const auto res = cmd_ablate(c, all);
  REQUIRE(res.table.size() == 16);
  CHECK(res.table[0].label == "TCN");
  CHECK(std::isnan(res.table[0].p[0]));
  CHECK(res.table[1].label == "D-TCN_User");
  CHECK(res.table[15].label == "D-TCN_Count, VADER");
  for (std::size_t i = 1; i < 16; ++i) CHECK(res.table[i].runs == 2);
  CHECK(res.manifests.size() == 32);
  CHECK(res.identity_holds);
  CHECK(res.text.find("bitwise identical") != std::string::npos);
  CHECK(fs::exists(out / "ablation" / "significance.csv"));
  CHECK(io::read_csv(out / "ablation" / "significance.csv").size() == 17);
}

TEST_CASE("search space") {
  const auto s = SearchSpace::standard(Method::tcn);
  CHECK(s.filters.low == 32);
  CHECK(s.filters.high == 512);
  CHECK(s.dropout.high == 0.5);
  CHECK(s.epsilon.low == 0.01);
  CHECK(s.epsilon.high == 0.1);
  CHECK(s.learning_rate.low == 1e-7);
  CHECK(s.learning_rate.high == 1e-2);
  CHECK(s.learning_rate.log_scale);
  CHECK(s.weight_decay.low == 1e-9);
  CHECK(s.weight_decay.high == 1e-2);
  CHECK(s.kernel.low == 2);
  CHECK(s.kernel.high == 6);
  CHECK(s.dilation_base.low == 2);
  CHECK(s.dilation_base.high == 4);

  nn::Rng rng(3);
  std::set<int> norms, kernels;
  std::set<bool> skips;
  std::size_t below_1e_4 = 0;
  const std::size_t n = 2000;
  for (std::size_t i = 0; i < n; ++i) {
    const auto h = s.sample(rng, Hyperparameters{}, Method::tcn);
    REQUIRE(s.contains(h, Method::tcn));
    norms.insert(static_cast<int>(h.normalization));
    kernels.insert(h.kernel);
    skips.insert(h.skip_connections);
    below_1e_4 += h.learning_rate < 1e-4 ? 1 : 0;
  }
  CHECK(norms.size() == 4);
  CHECK(kernels.size() == 5);
  CHECK(skips.size() == 2);
  // Log-uniform: 1e-7..1e-4 is three of the five decades.
  CHECK(static_cast<double>(below_1e_4) / n == doctest::Approx(0.6).epsilon(0.08));

  const auto r = SearchSpace::from(Method::gru, {{"hpo.filters", "4:8"}, {"hpo.budget", "9"}});
  CHECK(r.filters.low == 4);
  CHECK_FALSE(r.search_normalization);
  const auto g = r.sample(rng, Hyperparameters{}, Method::gru);
  CHECK(g.normalization == nn::Normalization::none);
  CHECK_THROWS_AS(SearchSpace::from(Method::tcn, {{"hpo.filters", "9:4"}}), ValidationError);
  CHECK_THROWS_AS(SearchSpace::from(Method::tcn, {{"hpo.learning_rate", "0:1"}}), ValidationError);
}

TEST_CASE("random search") {
  const auto data = small_dataset();
  const auto out = scratch("hpo");
  const auto c = make_config(with(tiny(data, out), {{"epochs", "1"}}));
  const auto small = SearchSpace::from(Method::tcn, {{"hpo.filters", "2:4"}, {"hpo.kernel", "2:3"}});
  CHECK_THROWS_AS(cmd_hpo(c, small, 0), ValidationError);

  const auto one = cmd_hpo(c, small, 1, false);
  REQUIRE(one.trials.size() == 1);
  CHECK(one.best == 0);
  CHECK(small.contains(one.best_trial().hyper, Method::tcn));

  // The default configuration is scored first; the search can only improve on it.
  const auto res = cmd_hpo(c, small, 6);
  REQUIRE(res.trials.size() == 7);
  CHECK(res.trials[0].is_default);
  CHECK(res.trials[0].hyper == c.hyper);
  for (std::size_t i = 1; i < res.trials.size(); ++i) CHECK(small.contains(res.trials[i].hyper, Method::tcn));
  CHECK(res.best_trial().validation_mape <= res.trials[0].validation_mape);
  const auto log = io::parse_csv(trial_log_csv(res));
  CHECK(log.size() == 8);
  CHECK(best_config_text(res).find("filters = ") != std::string::npos);

  // Same seed, same search.
  const auto again = cmd_hpo(c, small, 6);
  for (std::size_t i = 0; i < res.trials.size(); ++i) {
    CHECK(again.trials[i].hyper == res.trials[i].hyper);
    CHECK(same_bits(again.trials[i].validation_mape, res.trials[i].validation_mape));
  }

  const auto doomed = SearchSpace::from(Method::tcn, {{"hpo.filters", "2:2"}, {"hpo.learning_rate", "1e300:1e300"}});
  CHECK_THROWS_AS(cmd_hpo(c, doomed, 2, false), std::runtime_error);
  CHECK_THROWS_AS(cmd_hpo(make_config(with(tiny(data, out), {{"model", "arrv"}})), small, 2), ValidationError);
}

TEST_CASE("comparisons between run sets") {
  auto run = [](std::vector<double> truth, std::vector<double> pred) {
    RunManifest m;
    for (std::size_t i = 0; i < truth.size(); ++i) m.predictions.push_back({static_cast<std::int64_t>(i), truth[i], pred[i]});
    m.metrics = eval::metrics(truth, pred);
    return m;
  };
  const std::vector<double> y{1.0, 2.0, 3.0, 4.0, 5.0};
  const auto good = run(y, {1.1, 2.1, 2.8, 4.3, 5.2});
  const auto bad = run(y, {1.6, 2.9, 2.0, 5.1, 3.9});
  // Two deterministic models on the same days: paired test of the daily
  // absolute percentage errors. Reference from scipy.stats.ttest_1samp.
  CHECK(compare({good}, {bad}, eval::Metric::mape, eval::TTest::welch) == doctest::Approx(0.0036184642951430546).epsilon(1e-6));
  // Different days: Welch (scipy.stats.ttest_ind, equal_var=False).
  auto shifted = bad;
  for (auto& p : shifted.predictions) p.day += 86400;
  CHECK(compare({good}, {shifted}, eval::Metric::mape, eval::TTest::welch) ==
        doctest::Approx(0.004834558124641599).epsilon(1e-6));

  // Runs against one deterministic score: the one-sample test.
  std::vector<RunManifest> runs;
  std::vector<double> mapes;
  for (double shift : {0.0, 0.05, -0.05, 0.1}) {
    runs.push_back(run(y, {1.1 + shift, 2.1, 2.8, 4.3, 5.2}));
    mapes.push_back(runs.back().metrics.mape);
  }
  CHECK(compare(runs, {bad}, eval::Metric::mape, eval::TTest::welch) ==
        doctest::Approx(eval::one_sided_t(std::vector<double>{bad.metrics.mape}, mapes, eval::TTest::student)));
  // And the mirror image.
  const double p_rev = compare({bad}, runs, eval::Metric::mape, eval::TTest::welch);
  CHECK(p_rev > 0.99);
  auto failed = good;
  failed.ok = false;
  CHECK(std::isnan(compare({failed}, {bad}, eval::Metric::mape, eval::TTest::welch)));
}

TEST_CASE("report outputs") {
  const auto data = small_dataset();
  const auto out = scratch("report_runs");
  const auto cfg = with(tiny(data, out), {{"runs", "3"}});
  cmd_train(make_config(cfg));
  cmd_train(make_config(with(cfg, {{"model", "arrv"}})));
  cmd_train(make_config(with(cfg, {{"model", "constant_mean"}})));
  const auto ms = read_manifests({out});
  REQUIRE(ms.size() == 5);

  const auto r1 = scratch("report_1"), r2 = scratch("report_2");
  const auto s1 = cmd_report(ms, r1);
  cmd_report(read_manifests({out}), r2);
  for (const auto& f : s1.files) {
    CAPTURE(f);
    CHECK(io::read_file(f) == io::read_file(r2 / f.filename()));
  }
  REQUIRE(s1.table.size() == 3);
  CHECK(s1.table[0].label == "TCN");
  CHECK(s1.table[1].label == "AR-RV");

  const auto tcn_svg = io::read_file(r1 / "predictions_tcn.svg");
  CHECK(tcn_svg.find("class=\"band\"") != std::string::npos);
  const auto ar_svg = io::read_file(r1 / "predictions_ar-rv.svg");
  CHECK(ar_svg.find("class=\"band\"") == std::string::npos);
  // One x-point per test day.
  std::smatch m;
  const std::regex truth_line("class=\"truth\"[^>]*points=\"([^\"]*)\"");
  REQUIRE(std::regex_search(tcn_svg, m, truth_line));
  const std::string pts = m[1];
  CHECK(std::count(pts.begin(), pts.end(), ',') == 8);

  CHECK(io::read_csv(r1 / "bias_tcn.csv").size() == 97);
  CHECK_FALSE(fs::exists(r1 / "bias_ar-rv.csv"));
  const auto pct = io::read_csv(r1 / "percentile_mape.csv");
  CHECK(pct.size() == 1 + 3 * 4);
  const auto pair = io::read_csv(r1 / "pairwise_mape.csv");
  REQUIRE(pair.size() == 4);
  CHECK(pair[0][1] == "TCN");
  CHECK(pair[1][1].empty());
  CHECK_FALSE(pair[2][1].empty());

  CHECK_THROWS_AS(cmd_report({}, r1), ValidationError);
}

TEST_CASE("ingest and featurize commands") {
  const auto dir = scratch("pipeline");
  const auto empty = dir / "empty.jsonl";
  io::write_file(empty, "");
  auto s = cmd_ingest({empty}, {}, dir / "empty.csv");
  CHECK(s.rows == 0);
  CHECK(s.diagnostics.rejected == 0);
  CHECK(ingest::read_records(dir / "empty.csv").empty());

  s = cmd_ingest({kFixtures / "tweets_raw.jsonl"}, VOLCAST_DATA_DIR, dir / "tweets.csv");
  CHECK(s.rows == 50);
  CHECK(io::read_file(dir / "tweets.csv") == io::read_file(kFixtures / "tweets_ingested.csv"));

  // One malformed line among ten.
  std::istringstream in(io::read_file(kFixtures / "tweets_raw.jsonl"));
  std::string text, line;
  for (int i = 0; i < 9 && std::getline(in, line); ++i) text += line + "\n";
  text += "{\"created_at\": \n";
  io::write_file(dir / "ten.jsonl", text);
  s = cmd_ingest({dir / "ten.jsonl"}, {}, dir / "ten.csv");
  CHECK(s.rows == 9);
  CHECK(s.diagnostics.rejected == 1);

  const auto f = cmd_featurize(kFixtures / "candles.csv", dir / "tweets.csv", dir / "features.csv");
  CHECK(f.days == 3);
  CHECK(io::read_file(dir / "features.csv") == io::read_file(kFixtures / "features_golden.csv"));

  CHECK_THROWS_AS(cmd_ingest({dir / "missing.jsonl"}, {}, dir / "x.csv"), ValidationError);
  CHECK_THROWS_AS(cmd_featurize(dir / "missing.csv", {}, dir / "x.csv"), ValidationError);
}
