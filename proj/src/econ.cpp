#include "volcast/econ.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace volcast::econ {

ARRVModel arrv_fit(std::span<const double> daily_rv, int p) {
  if (p < 1) throw std::invalid_argument("arrv_fit: lag order must be at least 1");
  const std::size_t P = static_cast<std::size_t>(p);
  if (daily_rv.size() <= P + 1)
    throw std::invalid_argument("arrv_fit: need more than p + 1 observations, got " + std::to_string(daily_rv.size()));
  for (double v : daily_rv)
    if (!std::isfinite(v)) throw std::invalid_argument("arrv_fit: non-finite RV");

  ARRVModel m;
  m.p = p;
  const std::size_t n = daily_rv.size() - P;

  if (std::all_of(daily_rv.begin(), daily_rv.end(), [&](double v) { return v == daily_rv[0]; })) {
    m.intercept = daily_rv[0];
    m.coefficients.assign(P, 0.0);
    m.standard_errors.assign(P + 1, 0.0);
    m.residuals.assign(n, 0.0);
    return m;
  }

  Eigen::MatrixXd X(n, P + 1);
  Eigen::VectorXd y(n);
  for (std::size_t t = 0; t < n; ++t) {
    y(t) = daily_rv[t + P];
    X(t, 0) = 1.0;
    for (std::size_t i = 0; i < P; ++i) X(t, i + 1) = daily_rv[t + P - 1 - i];
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  if (qr.rank() < static_cast<Eigen::Index>(P + 1)) throw std::domain_error("arrv_fit: rank-deficient design matrix");
  const Eigen::VectorXd beta = qr.solve(y);
  const Eigen::VectorXd resid = y - X * beta;

  m.intercept = beta(0);
  for (std::size_t i = 0; i < P; ++i) m.coefficients.push_back(beta(i + 1));
  m.residuals.assign(resid.data(), resid.data() + n);

  if (n > P + 1) {
    const double sigma2 = resid.squaredNorm() / static_cast<double>(n - P - 1);
    const Eigen::MatrixXd cov = sigma2 * (X.transpose() * X).inverse();
    for (std::size_t i = 0; i <= P; ++i) m.standard_errors.push_back(std::sqrt(std::max(0.0, cov(i, i))));
  } else {
    m.standard_errors.assign(P + 1, 0.0);
  }
  for (double c : m.coefficients)
    if (!std::isfinite(c)) throw std::domain_error("arrv_fit: non-finite coefficient");
  return m;
}

double arrv_predict(const ARRVModel& model, std::span<const double> recent) {
  if (recent.size() != static_cast<std::size_t>(model.p))
    throw std::invalid_argument("arrv_predict: expected " + std::to_string(model.p) + " lagged values, got " +
                                std::to_string(recent.size()));
  double y = model.intercept;
  for (std::size_t i = 0; i < model.coefficients.size(); ++i) y += model.coefficients[i] * recent[recent.size() - 1 - i];
  return y;
}

// ---- Nelder-Mead ------------------------------------------------------------------

NelderMeadResult nelder_mead(const std::function<double(const std::vector<double>&)>& f, std::vector<double> start,
                             double step, int max_iterations, double tolerance) {
  const std::size_t n = start.size();
  std::vector<std::vector<double>> pts(n + 1, start);
  for (std::size_t i = 0; i < n; ++i) pts[i + 1][i] += step;
  std::vector<double> val(n + 1);
  auto eval = [&](const std::vector<double>& x) {
    const double v = f(x);
    return std::isnan(v) ? std::numeric_limits<double>::infinity() : v;
  };
  for (std::size_t i = 0; i <= n; ++i) val[i] = eval(pts[i]);

  NelderMeadResult res;
  std::vector<std::size_t> idx(n + 1);
  int it = 0;
  for (; it < max_iterations; ++it) {
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return val[a] < val[b]; });
    const std::size_t best = idx[0], worst = idx[n], second = idx[n - 1];

    double spread = std::abs(val[worst] - val[best]);
    double size = 0.0;
    for (std::size_t i = 0; i <= n; ++i)
      for (std::size_t j = 0; j < n; ++j) size = std::max(size, std::abs(pts[i][j] - pts[best][j]));
    if (spread <= tolerance * (std::abs(val[best]) + tolerance) && size <= 1e-7) {
      res.converged = true;
      break;
    }

    std::vector<double> centroid(n, 0.0);
    for (std::size_t i = 0; i <= n; ++i)
      if (i != worst)
        for (std::size_t j = 0; j < n; ++j) centroid[j] += pts[i][j] / static_cast<double>(n);
    auto towards = [&](double coef) {
      std::vector<double> x(n);
      for (std::size_t j = 0; j < n; ++j) x[j] = centroid[j] + coef * (pts[worst][j] - centroid[j]);
      return x;
    };

    auto xr = towards(-1.0);
    const double fr = eval(xr);
    if (fr < val[best]) {
      auto xe = towards(-2.0);
      const double fe = eval(xe);
      if (fe < fr) {
        pts[worst] = xe;
        val[worst] = fe;
      } else {
        pts[worst] = xr;
        val[worst] = fr;
      }
      continue;
    }
    if (fr < val[second]) {
      pts[worst] = xr;
      val[worst] = fr;
      continue;
    }
    const bool outside = fr < val[worst];
    auto xc = towards(outside ? -0.5 : 0.5);
    const double fc = eval(xc);
    if (fc < (outside ? fr : val[worst])) {
      pts[worst] = xc;
      val[worst] = fc;
      continue;
    }
    for (std::size_t i = 0; i <= n; ++i) {
      if (i == best) continue;
      for (std::size_t j = 0; j < n; ++j) pts[i][j] = pts[best][j] + 0.5 * (pts[i][j] - pts[best][j]);
      val[i] = eval(pts[i]);
    }
  }
  const std::size_t b = static_cast<std::size_t>(std::min_element(val.begin(), val.end()) - val.begin());
  res.x = pts[b];
  res.value = val[b];
  res.iterations = it;
  return res;
}

// ---- GARCH ------------------------------------------------------------------------

double garch_log_likelihood(std::span<const double> demeaned, double omega, double alpha, double beta,
                            double presample_variance, std::vector<double>* variance) {
  if (variance) variance->assign(demeaned.size(), 0.0);
  double r2_prev = presample_variance, s2_prev = presample_variance;
  double ll = 0.0;
  for (std::size_t t = 0; t < demeaned.size(); ++t) {
    const double s2 = omega + alpha * r2_prev + beta * s2_prev;
    if (!(s2 > 0.0) || !std::isfinite(s2)) return -std::numeric_limits<double>::infinity();
    const double r2 = demeaned[t] * demeaned[t];
    ll += -0.5 * (std::log(s2) + r2 / s2);
    if (variance) (*variance)[t] = s2;
    r2_prev = r2;
    s2_prev = s2;
  }
  return ll;
}

namespace {

constexpr double kUnidentifiedAlpha = 1e-4;

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }
double logit(double p) { return std::log(p / (1.0 - p)); }

struct Params {
  double omega, alpha, beta;
};

// x = (log omega, logit(alpha + beta), logit(alpha / (alpha + beta))).
Params unpack(const std::vector<double>& x) {
  const double s = logistic(x[1]);
  const double a = logistic(x[2]);
  return {std::exp(x[0]), s * a, s * (1.0 - a)};
}

}  // namespace

GARCHModel garch_fit(std::span<const double> returns, const GarchOptions& options) {
  if (returns.size() < 50) throw std::invalid_argument("garch_fit: need at least 50 returns");
  for (double r : returns)
    if (!std::isfinite(r)) throw std::invalid_argument("garch_fit: non-finite return");
  GARCHModel m;
  const double n = static_cast<double>(returns.size());
  m.mean = std::accumulate(returns.begin(), returns.end(), 0.0) / n;
  std::vector<double> r(returns.begin(), returns.end());
  for (double& x : r) x -= m.mean;
  double var = 0.0;
  for (double x : r) var += x * x;
  var /= n;
  if (std::all_of(returns.begin(), returns.end(), [&](double x) { return x == returns[0]; }) || !(var > 0.0))
    throw std::invalid_argument("garch_fit: returns have zero variance");
  m.presample_variance = var;

  if (options.constant_variance) {
    auto f = [&](const std::vector<double>& x) { return -garch_log_likelihood(r, std::exp(x[0]), 0.0, 0.0, var); };
    const std::vector<double> x0{std::log(var) + 0.5};
    m.initial_log_likelihood = -f(x0);
    auto res = nelder_mead(f, x0, 0.3, options.max_iterations, options.tolerance);
    m.omega = std::exp(res.x[0]);
    m.log_likelihood = -res.value;
    m.converged = res.converged;
    m.iterations = res.iterations;
  } else {
    auto f = [&](const std::vector<double>& x) {
      const auto p = unpack(x);
      return -garch_log_likelihood(r, p.omega, p.alpha, p.beta, var);
    };
    // A few persistence levels; the best end point wins, so the result is
    // never worse than the first start.
    const double starts[][2] = {{0.1, 0.8}, {0.05, 0.05}, {0.05, 0.9}};
    bool first = true;
    NelderMeadResult best;
    best.value = std::numeric_limits<double>::infinity();
    int total_iterations = 0;
    for (const auto& s : starts) {
      const double pers = s[0] + s[1];
      std::vector<double> x0{std::log(var * (1.0 - pers)), logit(pers), logit(s[0] / pers)};
      if (first) {
        m.initial_log_likelihood = -f(x0);
        first = false;
      }
      auto res = nelder_mead(f, x0, 0.5, options.max_iterations, options.tolerance);
      // Restart once from the end point to escape a collapsed simplex.
      auto again = nelder_mead(f, res.x, 0.1, options.max_iterations, options.tolerance);
      total_iterations += res.iterations + again.iterations;
      if (again.value < best.value) best = again;
    }
    const auto p = unpack(best.x);
    m.omega = p.omega;
    m.alpha = p.alpha;
    m.beta = p.beta;
    m.log_likelihood = -best.value;
    if (m.alpha < kUnidentifiedAlpha) {
      // With alpha at the boundary beta only shapes the start-up transient
      // and is not identified; report the constant-variance fit instead.
      m.omega = var;
      m.alpha = 0.0;
      m.beta = 0.0;
      m.log_likelihood = garch_log_likelihood(r, var, 0.0, 0.0, var);
      m.message = "alpha at the boundary; collapsed to constant variance";
    }
    m.converged = best.converged;
    m.iterations = total_iterations;
  }
  if (!m.converged) m.message += std::string(m.message.empty() ? "" : "; ") + "iteration budget exhausted; returning the best point found";
  garch_log_likelihood(r, m.omega, m.alpha, m.beta, var, &m.variance);
  return m;
}

std::vector<double> garch_filter(const GARCHModel& model, std::span<const double> returns) {
  std::vector<double> r(returns.begin(), returns.end());
  for (double& x : r) x -= model.mean;
  std::vector<double> v;
  garch_log_likelihood(r, model.omega, model.alpha, model.beta, model.presample_variance, &v);
  return v;
}

double garch_forecast_daily_rv(const GARCHModel& model, double last_return, double last_variance, int steps) {
  if (steps <= 0) throw std::invalid_argument("garch_forecast_daily_rv: steps must be positive");
  const double e = last_return - model.mean;
  double s2 = model.omega + model.alpha * e * e + model.beta * last_variance;
  double total = s2;
  for (int h = 1; h < steps; ++h) {
    s2 = model.omega + (model.alpha + model.beta) * s2;
    total += s2;
  }
  return std::sqrt(total);
}

double constant_mean_forecast(std::span<const double> train_rv) {
  if (train_rv.empty()) throw std::invalid_argument("constant_mean_forecast: empty training set");
  return std::accumulate(train_rv.begin(), train_rv.end(), 0.0) / static_cast<double>(train_rv.size());
}

}  // namespace volcast::econ
