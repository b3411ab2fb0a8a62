#pragma once

// Finite-difference checks over every differentiable tensor operation and
// over full forecaster forward passes, shared by the unit tests and the
// acceptance run.

#include <random>
#include <string>
#include <utility>
#include <vector>

#include "gradcheck.hpp"
#include "volcast/models.hpp"
#include "volcast/synth.hpp"

namespace volcast::testing {

using GradCase = std::pair<std::string, double>;  // name, max relative error

inline std::vector<GradCase> op_gradient_cases(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Tensor v = random_tensor({6}, rng);
  Tensor u = random_tensor({6}, rng);
  Tensor w = random_tensor({4, 6}, rng);
  Tensor b = random_tensor({4}, rng);
  Tensor X = random_tensor({7, 3}, rng);
  Tensor W = random_tensor({5, 3 * 3}, rng);
  Tensor B = random_tensor({5}, rng);
  Tensor R = random_tensor({2, 3}, rng);
  Tensor rb = random_tensor({2}, rng);
  Tensor G = random_tensor({5}, rng, true, 0.5, 1.5);
  Tensor x1 = random_tensor({12}, rng);
  Tensor f1 = random_tensor({3}, rng);
  const Tensor p3 = probe_weights(3, rng);
  const Tensor p4 = probe_weights(4, rng);
  const Tensor p6 = probe_weights(6, rng);
  const Tensor p12 = probe_weights(12, rng);
  const Tensor p14 = probe_weights(14, rng);
  const Tensor p21 = probe_weights(21, rng);
  const Tensor p35 = probe_weights(35, rng);
  const Tensor p45 = probe_weights(45, rng);
  const std::vector<double> rm{0.1, -0.2, 0.3}, rv{1.5, 0.7, 2.0};

  std::vector<GradCase> out;
  auto add = [&](const char* name, auto&& loss, std::vector<Tensor*> leaves) {
    out.emplace_back(name, grad_check(loss, std::move(leaves)).max_rel_error);
  };
  add("dense", [&] { return weighted_sum(tensor::dense(v, w, b), p4); }, {&v, &w, &b});
  add("matvec", [&] { return weighted_sum(tensor::matvec(w, v), p4); }, {&v, &w});
  add("dense_rows", [&] { return weighted_sum(tensor::dense_rows(X, R, rb), p14); }, {&X, &R, &rb});
  add("causal_dilated_conv1d", [&] { return weighted_sum(tensor::causal_dilated_conv1d(x1, f1, 2), p12); }, {&x1, &f1});
  add("causal_conv", [&] { return weighted_sum(tensor::causal_conv(X, W, B, 3, 2), p35); }, {&X, &W, &B});
  add("relu", [&] { return weighted_sum(tensor::relu(v), p6); }, {&v});
  add("sigmoid", [&] { return weighted_sum(tensor::sigmoid(v), p6); }, {&v});
  add("tanh", [&] { return weighted_sum(tensor::tanh(v), p6); }, {&v});
  add("add", [&] { return weighted_sum(tensor::add(v, u), p6); }, {&v, &u});
  add("sub", [&] { return weighted_sum(tensor::sub(v, u), p6); }, {&v, &u});
  add("mul", [&] { return weighted_sum(tensor::mul(v, u), p6); }, {&v, &u});
  add("affine", [&] { return weighted_sum(tensor::affine(v, -1.5, 0.3), p6); }, {&v});
  add("mean", [&] { return tensor::mean(tensor::mul(v, v)); }, {&v});
  add("row", [&] { return weighted_sum(tensor::row(X, 4), p3); }, {&X});
  add("stack_rows",
      [&] {
        const Tensor rows[] = {v, u};
        return weighted_sum(tensor::stack_rows(rows), p12);
      },
      {&v, &u});
  add("concat", [&] { return weighted_sum(tensor::concat(v, u), p12); }, {&v, &u});
  add("as_column", [&] { return weighted_sum(tensor::as_column(v), p6); }, {&v});
  add("layer_norm_rows", [&] { return weighted_sum(tensor::layer_norm_rows(X), p21); }, {&X});
  add("batch_norm_cols (batch)", [&] { return weighted_sum(tensor::batch_norm_cols(X, {}, {}), p21); }, {&X});
  add("batch_norm_cols (running)", [&] { return weighted_sum(tensor::batch_norm_cols(X, rm, rv), p21); }, {&X});
  add("weight_norm_rows", [&] { return weighted_sum(tensor::weight_norm_rows(W, G), p45); }, {&W, &G});
  return out;
}

/// One scaled day window with two feature sets from a short synthetic panel.
/// The feature values are replaced with random ones inside the scaled band:
/// on the first day they all sit at the band edge, which parks every unit of
/// the feature pipeline exactly on the ReLU kink.
inline features::DayWindow small_window(std::mt19937_64& rng) {
  synth::SynthConfig sc;
  sc.days = 4;
  sc.tweets_per_bin = 1.0;
  const auto data = synth::generate(sc);
  const auto panel = features::build_panel(data.candles, data.tweets);
  auto ws = features::make_day_windows(panel, features::FeatureSet::parse("count,user"), features::Split{3, 1});
  features::DayWindow w = ws.train.front();
  std::uniform_real_distribution<double> band(-0.25, 0.25);
  for (double& x : w.features) x = band(rng);
  return w;
}

/// Whole-model forward passes (96 steps in, 96 outputs) with every parameter
/// as a leaf.
inline std::vector<GradCase> model_gradient_cases(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  features::DayWindow window = small_window(rng);
  const Tensor probe = probe_weights(96, rng);
  std::vector<GradCase> out;
  auto run = [&](const std::string& name, models::ModelConfig mc) {
    mc.feature_dim = window.feature_dim;
    models::Forecaster m(mc);
    nn::Rng init(seed);
    m.init(init);
    // Biases start at exactly zero and the feature pipeline feeds exact zeros
    // out of a ReLU, which puts conv outputs on the next kink. Check at a
    // generic point nearby instead.
    std::uniform_real_distribution<double> jitter(-0.05, 0.05);
    auto params = m.parameters();
    std::vector<Tensor*> leaves;
    for (auto& p : params) {
      for (double& v : p.tensor->mutable_values()) v += jitter(rng);
      leaves.push_back(p.tensor);
    }
    out.emplace_back(name, grad_check([&] { return weighted_sum(m.forward(window, nn::Mode::eval, nullptr), probe); },
                                      leaves)
                               .max_rel_error);
  };
  for (auto norm : {nn::Normalization::none, nn::Normalization::batch, nn::Normalization::layer,
                    nn::Normalization::weight}) {
    models::ModelConfig mc{.kind = models::ModelKind::tcn, .filters = 3, .kernel = 2, .dilation_base = 4};
    mc.normalization = norm;
    run("TCN forward (" + nn::to_string(norm) + ")", mc);
  }
  run("D-TCN forward", {.kind = models::ModelKind::dtcn, .filters = 3, .kernel = 2, .dilation_base = 4, .lower_dim = 2});
  run("LSTM forward", {.kind = models::ModelKind::lstm, .filters = 2});
  run("GRU forward", {.kind = models::ModelKind::gru, .filters = 2});
  return out;
}

}  // namespace volcast::testing
