#pragma once

// Classical baselines: AR-RV by ordinary least squares and GARCH(1,1) by
// Gaussian maximum likelihood, plus the constant-mean predictor.

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace volcast::econ {

struct ARRVModel {
  int p = 1;
  double intercept = 0.0;
  std::vector<double> coefficients;     // coefficients[i] multiplies RV_{t-1-i}
  std::vector<double> standard_errors;  // intercept first, then coefficients
  std::vector<double> residuals;
};

/// OLS of RV_t on (1, RV_{t-1}, ..., RV_{t-p}). A constant series is its own
/// fixed point (intercept = c, zero coefficients); any other rank-deficient
/// design throws std::domain_error.
ARRVModel arrv_fit(std::span<const double> daily_rv, int p = 1);
/// `recent` holds exactly p values, oldest first.
double arrv_predict(const ARRVModel& model, std::span<const double> recent);

struct GARCHModel {
  double omega = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
  double mean = 0.0;  // removed before fitting
  double log_likelihood = 0.0;
  double initial_log_likelihood = 0.0;
  double presample_variance = 0.0;
  std::vector<double> variance;  // fitted sigma^2_t, one per observation
  bool converged = false;
  int iterations = 0;
  std::string message;
};

struct GarchOptions {
  int max_iterations = 4000;
  double tolerance = 1e-10;
  bool constant_variance = false;  // fix alpha = beta = 0
};

/// Sum over t of -0.5 * (log s2_t + r_t^2 / s2_t) with
/// s2_t = omega + alpha * r_{t-1}^2 + beta * s2_{t-1}; the pre-sample r^2 and
/// s2 are both `presample_variance`. Returns -inf for a non-positive variance.
double garch_log_likelihood(std::span<const double> demeaned, double omega, double alpha, double beta,
                            double presample_variance, std::vector<double>* variance = nullptr);

/// Needs at least 50 returns. The result always carries the best point found;
/// `converged` is false when the iteration budget ran out first.
GARCHModel garch_fit(std::span<const double> returns, const GarchOptions& options = {});

/// Conditional variance path of `returns` (demeaned with the model mean),
/// continuing from the model's pre-sample state.
std::vector<double> garch_filter(const GARCHModel& model, std::span<const double> returns);

/// sqrt of the summed conditional variances of the next `steps` returns given
/// the last observed return and its conditional variance.
double garch_forecast_daily_rv(const GARCHModel& model, double last_return, double last_variance, int steps = 96);

/// Mean of the training RVs.
double constant_mean_forecast(std::span<const double> train_rv);

// ---- optimizer -----------------------------------------------------------------

struct NelderMeadResult {
  std::vector<double> x;
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Minimizes f from `start` with an axis-aligned initial simplex of `step`.
NelderMeadResult nelder_mead(const std::function<double(const std::vector<double>&)>& f, std::vector<double> start,
                             double step, int max_iterations, double tolerance);

}  // namespace volcast::econ
