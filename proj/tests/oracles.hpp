#pragma once

// Independent reference computations used as test oracles. Deliberately
// written without any volcast code.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

namespace volcast::testing {

/// Standard (undilated) discrete convolution, truncated to the input length:
/// y[s] = sum_j x[j] * f[s - j] over 0 <= s - j < k.
inline std::vector<double> plain_convolution(const std::vector<double>& x, const std::vector<double>& f) {
  std::vector<double> y(x.size(), 0.0);
  for (std::size_t s = 0; s < x.size(); ++s) {
    double acc = 0.0;
    const std::size_t first = s + 1 >= f.size() ? s + 1 - f.size() : 0;
    for (std::size_t j = first; j <= s; ++j) acc += x[j] * f[s - j];
    y[s] = acc;
  }
  return y;
}

struct DirectMetrics {
  double mape, mae, rmse, msle;
};

/// MAPE, MAE, RMSE and MSLE by direct summation.
inline DirectMetrics direct_metrics(const std::vector<double>& y, const std::vector<double>& p) {
  long double a = 0, b = 0, c = 0, d = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    a += std::fabs((y[i] - p[i]) / y[i]);
    b += std::fabs(y[i] - p[i]);
    c += (y[i] - p[i]) * (y[i] - p[i]);
    const long double l = std::log(y[i] + 1.0) - std::log(p[i] + 1.0);
    d += l * l;
  }
  const long double n = static_cast<long double>(y.size());
  return {static_cast<double>(a / n), static_cast<double>(b / n), static_cast<double>(std::sqrt(c / n)),
          static_cast<double>(d / n)};
}

/// GARCH(1,1) returns after a 500-step burn-in.
inline std::vector<double> simulate_garch(double omega, double alpha, double beta, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  std::vector<double> r;
  double s2 = omega / (1.0 - alpha - beta), prev = 0.0;
  for (std::size_t t = 0; t < n + 500; ++t) {
    s2 = omega + alpha * prev * prev + beta * s2;
    prev = std::sqrt(s2) * z(rng);
    if (t >= 500) r.push_back(prev);
  }
  return r;
}

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace volcast::testing
