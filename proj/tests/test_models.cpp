#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <random>
#include <vector>

#include "doctest.h"
#include "grad_suite.hpp"
#include "volcast/models.hpp"

using namespace volcast;
using namespace volcast::models;
using features::DayWindow;
using features::kBinsPerDay;

namespace {

DayWindow random_window(std::mt19937_64& rng, std::size_t F, std::int64_t day = 1551398400) {
  std::uniform_real_distribution<double> u(-0.25, 0.25);
  DayWindow w;
  w.input_day = day;
  w.target_day = day + 86400;
  w.inputs.resize(kBinsPerDay);
  w.target.resize(kBinsPerDay);
  w.target_raw.resize(kBinsPerDay);
  for (auto& x : w.inputs) x = u(rng);
  for (std::size_t k = 0; k < kBinsPerDay; ++k) {
    w.target[k] = u(rng);
    w.target_raw[k] = w.target[k] * 0.01;
  }
  w.feature_dim = F;
  w.features.resize(kBinsPerDay * F);
  for (auto& x : w.features) x = u(rng);
  return w;
}

ModelConfig small(ModelKind kind, std::size_t F = 0) {
  ModelConfig c;
  c.kind = kind;
  c.filters = 6;
  c.kernel = 3;
  c.dilation_base = 2;
  c.bottleneck = 4;
  c.feature_dim = F;
  return c;
}

bool bitwise_equal(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

void zero_all(Forecaster& m) {
  for (auto& p : m.parameters()) {
    auto v = p.tensor->mutable_values();
    std::fill(v.begin(), v.end(), 0.0);
  }
}

}  // namespace

TEST_CASE("model kinds parse and print") {
  for (auto k : {ModelKind::tcn, ModelKind::dtcn, ModelKind::lstm, ModelKind::gru})
    CHECK(parse_model_kind(to_string(k)) == k);
  CHECK(parse_model_kind("D-TCN") == ModelKind::dtcn);
  CHECK_THROWS_AS(parse_model_kind("transformer"), std::invalid_argument);
}

TEST_CASE("predict_rv") {
  std::vector<double> z(96, 0.0);
  CHECK(predict_rv(z) == 0.0);
  z[0] = 0.3;
  z[1] = 0.4;
  CHECK(predict_rv(z) == doctest::Approx(0.5).epsilon(1e-15));
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 0.02);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<double> v(96), neg(96);
    long double s = 0.0L;
    for (std::size_t i = 0; i < 96; ++i) {
      v[i] = n(rng);
      neg[i] = -v[i];
      s += static_cast<long double>(v[i]) * v[i];
    }
    CHECK(predict_rv(v) >= 0.0);
    CHECK(predict_rv(v) == predict_rv(neg));
    CHECK(predict_rv(v) == doctest::Approx(static_cast<double>(std::sqrt(s))).epsilon(1e-14));
  }
}

TEST_CASE("forecast head") {
  ForecastHead head(10, 8);
  CHECK(head.interpolator.bias.size() == 96);
  CHECK(head.bottleneck.out_features() == 8);
  Rng rng(3);
  head.init(rng);
  auto w = head.interpolator.weight.mutable_values();
  std::fill(w.begin(), w.end(), 0.0);
  auto b = head.interpolator.bias.mutable_values();
  for (std::size_t i = 0; i < 96; ++i) b[i] = 0.001 * static_cast<double>(i);
  auto y = head.forward(tensor::Tensor::vector(std::vector<double>(10, 0.7)));
  for (std::size_t i = 0; i < 96; ++i) CHECK(y[i] == b[i]);
}

TEST_CASE("every model kind yields 96 outputs") {
  std::mt19937_64 data(5);
  for (auto kind : {ModelKind::tcn, ModelKind::dtcn, ModelKind::lstm, ModelKind::gru}) {
    for (auto norm : {nn::Normalization::none, nn::Normalization::batch, nn::Normalization::layer,
                      nn::Normalization::weight}) {
      auto cfg = small(kind, kind == ModelKind::dtcn ? 3 : 0);
      cfg.normalization = norm;
      cfg.dropout = 0.2;
      Forecaster m(cfg);
      Rng rng(7);
      m.init(rng);
      auto w = random_window(data, cfg.feature_dim);
      CAPTURE(to_string(kind));
      CHECK(m.forward(w, Mode::train, &rng).size() == 96);
      auto p = m.predict(w);
      CHECK(p.size() == 96);
      for (double x : p) CHECK(std::isfinite(x));
    }
  }
}

TEST_CASE("zero head weights give the bias vector") {
  std::mt19937_64 data(6);
  for (auto kind : {ModelKind::tcn, ModelKind::dtcn, ModelKind::lstm, ModelKind::gru}) {
    Forecaster m(small(kind, kind == ModelKind::dtcn ? 2 : 0));
    Rng rng(1);
    m.init(rng);
    for (auto* t : {&m.head().bottleneck.weight, &m.head().interpolator.weight}) {
      auto v = t->mutable_values();
      std::fill(v.begin(), v.end(), 0.0);
    }
    auto b = m.head().interpolator.bias.mutable_values();
    for (std::size_t i = 0; i < 96; ++i) b[i] = std::sin(static_cast<double>(i));
    auto p = m.predict(random_window(data, m.config().feature_dim));
    for (std::size_t i = 0; i < 96; ++i) CHECK(p[i] == b[i]);
  }
}

TEST_CASE("D-TCN with a zeroed lower pipeline matches the TCN bitwise") {
  std::mt19937_64 data(8);
  for (auto norm : {nn::Normalization::none, nn::Normalization::batch, nn::Normalization::layer,
                    nn::Normalization::weight}) {
    CAPTURE(nn::to_string(norm));
    auto tc = small(ModelKind::tcn);
    tc.normalization = norm;
    tc.dropout = 0.1;
    Forecaster tcn(tc);
    Rng rng(11);
    tcn.init(rng);
    // A little training so batch statistics and weights are non-trivial.
    std::vector<DayWindow> train;
    for (int i = 0; i < 4; ++i) train.push_back(random_window(data, 0));
    TrainConfig t;
    t.epochs = 2;
    t.epsilon = 0.001;
    t.optimizer.learning_rate = 1e-2;
    fit(tcn, train, t);

    auto dc = tc;
    dc.kind = ModelKind::dtcn;
    dc.feature_dim = 5;
    Forecaster dtcn(dc);
    Rng rng2(12);
    dtcn.init(rng2);
    transplant_tcn(tcn, dtcn);
    for (int rep = 0; rep < 5; ++rep) {
      auto w = random_window(data, 5);
      CHECK(bitwise_equal(tcn.predict(w), dtcn.predict(w)));
    }
  }

  SUBCASE("zero lower parameters alone suffice with zero features") {
    Forecaster tcn(small(ModelKind::tcn));
    Rng rng(13);
    tcn.init(rng);
    auto dc = small(ModelKind::dtcn, 3);
    Forecaster dtcn(dc);
    dtcn.init(rng);
    transplant_tcn(tcn, dtcn);
    // Restore random head columns for the lower pipeline: its zero output
    // must make them irrelevant.
    auto w = dtcn.head().bottleneck.weight.mutable_values();
    const std::size_t cols = dtcn.head().bottleneck.weight.cols();
    for (std::size_t r = 0; r < dtcn.head().bottleneck.weight.rows(); ++r)
      for (std::size_t c = dc.filters; c < cols; ++c) w[r * cols + c] = 0.1 * static_cast<double>(r + c);
    auto win = random_window(data, 3);
    std::fill(win.features.begin(), win.features.end(), 0.0);
    CHECK(bitwise_equal(tcn.predict(win), dtcn.predict(win)));
  }
}

TEST_CASE("upper TCN activations are causal") {
  std::mt19937_64 data(9);
  Forecaster m(small(ModelKind::tcn));
  Rng rng(2);
  m.init(rng);
  auto w = random_window(data, 0);
  for (std::size_t t : {0, 17, 50, 95}) {
    auto x = tensor::Tensor::matrix(96, 1, w.inputs);
    auto base = m.upper().forward(x, Mode::eval, nullptr);
    auto perturbed_in = w.inputs;
    perturbed_in[t] += 0.1;
    auto alt = m.upper().forward(tensor::Tensor::matrix(96, 1, perturbed_in), Mode::eval, nullptr);
    const std::size_t C = base.cols();
    for (std::size_t s = 0; s < t; ++s)
      for (std::size_t c = 0; c < C; ++c) CHECK(base.at(s, c) == alt.at(s, c));
    bool changed = false;
    for (std::size_t c = 0; c < C; ++c) changed |= base.at(t, c) != alt.at(t, c);
    CHECK(changed);
  }
}

TEST_CASE("unscaled or mismatched inputs are rejected") {
  std::mt19937_64 data(10);
  Forecaster m(small(ModelKind::tcn));
  Rng rng(1);
  m.init(rng);
  auto w = random_window(data, 0);
  w.inputs[3] = 4200.0;
  CHECK_THROWS_AS(m.predict(w), std::invalid_argument);
  w.inputs.pop_back();
  CHECK_THROWS_AS(m.predict(w), std::invalid_argument);

  Forecaster d(small(ModelKind::dtcn, 2));
  d.init(rng);
  auto wd = random_window(data, 3);
  CHECK_THROWS_AS(d.predict(wd), std::invalid_argument);
  auto wf = random_window(data, 2);
  wf.features[0] = 150000.0;
  CHECK_THROWS_AS(d.predict(wf), std::invalid_argument);
  CHECK_THROWS_AS(Forecaster(small(ModelKind::dtcn, 0)), std::invalid_argument);
}

TEST_CASE("training") {
  std::mt19937_64 data(12);
  std::vector<DayWindow> train;
  for (int i = 0; i < 6; ++i) train.push_back(random_window(data, 2));

  SUBCASE("same seed, same parameters") {
    for (auto kind : {ModelKind::tcn, ModelKind::dtcn, ModelKind::lstm, ModelKind::gru}) {
      auto cfg = small(kind, kind == ModelKind::dtcn ? 2 : 0);
      cfg.dropout = 0.1;
      TrainConfig t;
      t.epochs = 3;
      t.optimizer.learning_rate = 1e-3;
      t.seed = 99;
      std::vector<std::vector<double>> params;
      for (int run = 0; run < 2; ++run) {
        Forecaster m(cfg);
        Rng rng(5);
        m.init(rng);
        auto r = fit(m, train, t);
        CHECK(r.epoch_loss.size() == 3);
        CHECK(r.steps == 18);
        CHECK(std::isfinite(r.final_loss));
        std::vector<double> flat;
        for (auto& p : m.parameters()) flat.insert(flat.end(), p.tensor->values().begin(), p.tensor->values().end());
        params.push_back(flat);
      }
      CHECK(bitwise_equal(params[0], params[1]));
    }
  }

  SUBCASE("constant returns drive the loss to zero") {
    std::vector<DayWindow> flat = train;
    for (auto& w : flat) {
      std::fill(w.inputs.begin(), w.inputs.end(), -0.25);
      std::fill(w.target.begin(), w.target.end(), -0.25);
    }
    Forecaster m(small(ModelKind::tcn));
    Rng rng(3);
    m.init(rng);
    TrainConfig t;
    t.epochs = 30;
    t.epsilon = 0.01;
    t.optimizer.learning_rate = 1e-2;
    auto r = fit(m, flat, t);
    CHECK(r.final_loss == 0.0);
  }

  SUBCASE("a non-finite target aborts with context") {
    auto bad = train;
    bad[2].target[5] = std::nan("");
    Forecaster m(small(ModelKind::tcn));
    Rng rng(3);
    m.init(rng);
    TrainConfig t;
    t.epochs = 1;
    try {
      fit(m, bad, t);
      FAIL("expected an exception");
    } catch (const std::runtime_error& e) {
      CHECK(std::string(e.what()).find("non-finite loss") != std::string::npos);
    }
  }
  Forecaster untouched(small(ModelKind::tcn));
  CHECK_THROWS_AS(fit(untouched, std::span<const DayWindow>{}, TrainConfig{}), std::invalid_argument);
}

TEST_CASE("evaluation") {
  std::mt19937_64 data(13);
  auto scaler = features::Scaler::fit(std::vector<double>{-0.02, 0.03}, 1);
  auto w = random_window(data, 0);
  for (std::size_t k = 0; k < 96; ++k) {
    w.target_raw[k] = 0.01 * std::sin(0.3 * static_cast<double>(k));
    w.target[k] = scaler.transform(w.target_raw[k], 0);
  }
  Forecaster m(small(ModelKind::tcn));
  Rng rng(1);
  m.init(rng);
  auto zero_weights_bias = [&](auto bias_of) {
    zero_all(m);
    auto b = m.head().interpolator.bias.mutable_values();
    for (std::size_t k = 0; k < 96; ++k) b[k] = bias_of(k);
  };

  SUBCASE("oracle model") {
    zero_weights_bias([&](std::size_t k) { return w.target[k]; });
    auto res = evaluate(m, std::vector<DayWindow>{w}, scaler);
    REQUIRE(res.size() == 1);
    CHECK(res[0].day == w.target_day);
    CHECK(res[0].true_rv == doctest::Approx(predict_rv(w.target_raw)).epsilon(1e-15));
    CHECK(std::abs(res[0].pred_rv - res[0].true_rv) / res[0].true_rv < 1e-12);
  }
  SUBCASE("zero model") {
    zero_weights_bias([&](std::size_t) { return scaler.transform(0.0, 0); });
    auto res = evaluate(m, std::vector<DayWindow>{w, w}, scaler);
    for (const auto& r : res) CHECK(std::abs(r.true_rv - r.pred_rv) / r.true_rv == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("checkpoint reload reproduces predictions bitwise") {
  std::mt19937_64 data(14);
  for (auto kind : {ModelKind::tcn, ModelKind::dtcn, ModelKind::lstm, ModelKind::gru}) {
    auto cfg = small(kind, kind == ModelKind::dtcn ? 2 : 0);
    cfg.normalization = nn::Normalization::batch;
    Forecaster m(cfg);
    Rng rng(4);
    m.init(rng);
    std::vector<DayWindow> train{random_window(data, cfg.feature_dim), random_window(data, cfg.feature_dim)};
    TrainConfig t;
    t.epochs = 2;
    fit(m, train, t);
    const auto path = std::filesystem::temp_directory_path() / ("volcast_model_" + to_string(kind) + ".ckpt");
    nn::save_checkpoint(path, m.state());
    Forecaster back(cfg);
    nn::load_checkpoint(path, back.state());
    auto w = random_window(data, cfg.feature_dim);
    CHECK(bitwise_equal(m.predict(w), back.predict(w)));
  }
}

TEST_CASE("head bias export") {
  Forecaster m(small(ModelKind::tcn));
  auto rows = export_head_bias(m);
  REQUIRE(rows.size() == 96);
  for (const auto& r : rows) CHECK(r.bias == 0.0);
  CHECK(rows[0].time_of_day == "00:00");
  CHECK(rows[1].time_of_day == "00:15");
  CHECK(rows[4].time_of_day == "01:00");
  CHECK(rows[95].time_of_day == "23:45");
}

TEST_CASE("whole-model gradients match finite differences") {
  for (const auto& [name, err] : testing::model_gradient_cases(3)) {
    CAPTURE(name);
    CAPTURE(err);
    CHECK(err < 1e-4);
  }
}
