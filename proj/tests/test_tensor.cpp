#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "grad_suite.hpp"
#include "oracles.hpp"
#include "volcast/tensor.hpp"

using namespace volcast;
using tensor::Tensor;

namespace {

std::vector<double> vals(const Tensor& t) { return {t.values().begin(), t.values().end()}; }

}  // namespace

TEST_CASE("causal dilated conv matches the hand-evaluated sums") {
  const Tensor x = Tensor::vector({1, 2, 3, 4});
  const Tensor f = Tensor::vector({1, 1});
  CHECK(vals(tensor::causal_dilated_conv1d(x, f, 1)) == std::vector<double>{1, 3, 5, 7});
  CHECK(vals(tensor::causal_dilated_conv1d(x, f, 2)) == std::vector<double>{1, 2, 4, 6});
  for (int d = 1; d <= 5; ++d) {
    CHECK(vals(tensor::causal_dilated_conv1d(x, Tensor::vector({1}), d)) == vals(x));
  }
}

TEST_CASE("causal dilated conv rejects bad arguments") {
  const Tensor x = Tensor::vector({1, 2});
  CHECK_THROWS_AS(tensor::causal_dilated_conv1d(x, Tensor::vector({1}), 0), std::invalid_argument);
  CHECK_THROWS_AS(tensor::causal_dilated_conv1d(x, Tensor::vector({}), 1), std::invalid_argument);
  CHECK_THROWS_AS(tensor::causal_dilated_conv1d(Tensor::vector({}), Tensor::vector({1}), 1),
                  std::invalid_argument);
}

TEST_CASE("dilation 1 equals a plain convolution bitwise") {
  std::mt19937_64 rng(7);
  for (int c = 0; c < 200; ++c) {
    const std::size_t T = 1 + rng() % 40, k = 1 + rng() % 7;
    const Tensor x = testing::random_tensor({T}, rng, false, -3, 3);
    const Tensor f = testing::random_tensor({k}, rng, false, -3, 3);
    const auto expected = testing::plain_convolution(vals(x), vals(f));
    REQUIRE(vals(tensor::causal_dilated_conv1d(x, f, 1)) == expected);
  }
}

TEST_CASE("dense examples") {
  CHECK(vals(tensor::dense(Tensor::vector({3, 5}), Tensor::matrix(2, 2, {1, 0, 0, 1}), Tensor::vector({0, 0}))) ==
        std::vector<double>{3, 5});
  CHECK(vals(tensor::dense(Tensor::vector({4, -2, 9}), Tensor::zeros({1, 3}), Tensor::vector({7}))) ==
        std::vector<double>{7});
  CHECK(vals(tensor::dense(Tensor::vector({3, 4}), Tensor::matrix(1, 2, {1, 2}), Tensor::vector({0}))) ==
        std::vector<double>{11});
  CHECK_THROWS_AS(tensor::dense(Tensor::vector({1, 2, 3}), Tensor::matrix(1, 2, {1, 2}), Tensor::vector({0})),
                  tensor::ShapeError);
  CHECK_THROWS_AS(tensor::dense(Tensor::vector({1, 2}), Tensor::matrix(1, 2, {1, 2}), Tensor::vector({0, 0})),
                  tensor::ShapeError);
}

TEST_CASE("elementwise examples") {
  CHECK(vals(tensor::relu(Tensor::vector({-1, 0, 2}))) == std::vector<double>{0, 0, 2});
  CHECK(tensor::sigmoid(Tensor::vector({0}))[0] == 0.5);
  CHECK(tensor::tanh(Tensor::vector({0}))[0] == 0.0);
  const Tensor a = Tensor::vector({1, 2});
  const Tensor b = Tensor::vector({3, 4});
  const Tensor ab[] = {a, b};
  CHECK(vals(tensor::elementwise(tensor::Elementwise::add, ab)) == std::vector<double>{4, 6});
  CHECK(vals(tensor::elementwise(tensor::Elementwise::mul, ab)) == std::vector<double>{3, 8});
  CHECK_THROWS_AS(tensor::add(a, Tensor::vector({1, 2, 3})), tensor::ShapeError);
  CHECK_THROWS_AS(tensor::mul(a, Tensor::matrix(2, 1, {1, 2})), tensor::ShapeError);
}

TEST_CASE("backward examples") {
  SUBCASE("x*x at 3") {
    Tensor x = Tensor::vector({3}, true);
    tensor::backward(tensor::sum(tensor::mul(x, x)));
    CHECK(x.grad()[0] == 6.0);
  }
  SUBCASE("relu dead region") {
    Tensor x = Tensor::vector({-1}, true);
    tensor::backward(tensor::sum(tensor::relu(x)));
    CHECK(x.grad()[0] == 0.0);
  }
  SUBCASE("sum of dilated conv against finite differences") {
    std::mt19937_64 rng(3);
    Tensor x = testing::random_tensor({12}, rng);
    Tensor f = testing::random_tensor({3}, rng);
    const auto res = testing::grad_check([&] { return tensor::sum(tensor::causal_dilated_conv1d(x, f, 2)); },
                                         {&x, &f});
    CHECK(res.max_rel_error < 1e-5);
  }
}

TEST_CASE("backward misuse is reported") {
  Tensor x = Tensor::vector({1, 2}, true);
  CHECK_THROWS_AS(tensor::backward(tensor::relu(x)), tensor::ShapeError);
  const Tensor loss = tensor::sum(tensor::mul(x, x));
  tensor::backward(loss);
  CHECK_THROWS_AS(tensor::backward(loss), tensor::GraphError);
  CHECK_THROWS_AS(tensor::backward(tensor::sum(Tensor::vector({1, 2}))), tensor::GraphError);
}

TEST_CASE("leaf gradients accumulate until reset") {
  Tensor x = Tensor::vector({2}, true);
  tensor::backward(tensor::sum(tensor::mul(x, x)));
  tensor::backward(tensor::sum(tensor::mul(x, x)));
  CHECK(x.grad()[0] == 8.0);
  x.zero_grad();
  CHECK(x.grad()[0] == 0.0);
}

TEST_CASE("gradient check across every differentiable op") {
  for (const auto& [name, err] : testing::op_gradient_cases(11)) {
    CAPTURE(name);
    CHECK(err < 1e-4);
  }
}

TEST_CASE("causality: perturbing x[t] never moves earlier outputs") {
  std::mt19937_64 rng(5);
  for (int c = 0; c < 30; ++c) {
    const std::size_t T = 20;
    const int d = 1 + static_cast<int>(rng() % 4);
    const Tensor f = testing::random_tensor({3}, rng, false);
    const Tensor W = testing::random_tensor({2, 3 * 2}, rng, false);
    const Tensor B = testing::random_tensor({2}, rng, false);
    std::vector<double> xs(T), xm(2 * T);
    for (double& v : xs) v = std::uniform_real_distribution<double>(-1, 1)(rng);
    for (double& v : xm) v = std::uniform_real_distribution<double>(-1, 1)(rng);
    const std::size_t t = rng() % T;
    auto base1 = tensor::causal_dilated_conv1d(Tensor::vector(xs), f, d);
    auto base2 = tensor::causal_conv(Tensor::matrix(T, 2, xm), W, B, 3, d);
    xs[t] += 1.0;
    xm[2 * t + 1] += 1.0;
    auto pert1 = tensor::causal_dilated_conv1d(Tensor::vector(xs), f, d);
    auto pert2 = tensor::causal_conv(Tensor::matrix(T, 2, xm), W, B, 3, d);
    for (std::size_t s = 0; s < t; ++s) {
      REQUIRE(base1[s] == pert1[s]);
      REQUIRE(base2.at(s, 0) == pert2.at(s, 0));
      REQUIRE(base2.at(s, 1) == pert2.at(s, 1));
    }
  }
}

TEST_CASE("shape invariants") {
  CHECK_THROWS_AS(Tensor::from({2, 2}, {1, 2, 3}), tensor::ShapeError);
  Tensor x = Tensor::vector({1, 2, 3}, true);
  tensor::backward(tensor::sum(tensor::mul(x, x)));
  CHECK(x.grad().size() == x.size());
  CHECK(Tensor::scalar(2.0).shape().empty());
  CHECK(Tensor::scalar(2.0).item() == 2.0);
}
