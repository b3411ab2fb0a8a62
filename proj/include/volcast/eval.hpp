#pragma once

// Forecast metrics, one-sided t-tests with significance codes, bootstrap
// bands over runs, percentile-bucketed MAPE and report rendering.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace volcast::eval {

enum class Metric { mape, mae, rmse, msle };
inline constexpr std::array<Metric, 4> kMetrics{Metric::mape, Metric::mae, Metric::rmse, Metric::msle};
const char* metric_name(Metric m);  // "MAPE", ...

/// MAPE and MSLE are NaN ("undefined") when some true RV is not strictly
/// positive, or (MSLE) when a prediction is <= -1.
struct MetricVector {
  double mape = 0.0;
  double mae = 0.0;
  double rmse = 0.0;
  double msle = 0.0;

  double get(Metric m) const;
};

MetricVector metrics(std::span<const double> y, std::span<const double> y_hat);

enum class TTest { student, welch };

/// p-value of the one-sided alternative "mean(model) < mean(baseline)".
/// Student with a single baseline value is the one-sample test against that
/// fixed score; with more values it is the pooled two-sample test. Throws
/// std::domain_error when both samples have zero variance.
double one_sided_t(std::span<const double> baseline, std::span<const double> model, TTest kind);

/// "***" < 0.001, "**" < 0.01, "*" < 0.05, "." < 0.1, otherwise "" (also for NaN).
std::string significance_code(double p);

struct BootstrapBand {
  std::vector<double> lower;
  std::vector<double> mean;
  std::vector<double> upper;
};

/// Resamples whole runs with replacement; each sample contributes the per-day
/// mean over the drawn runs. Bounds are type-7 percentiles, widened if needed
/// so that lower <= mean <= upper.
BootstrapBand bootstrap_band(const std::vector<std::vector<double>>& runs_by_day, std::size_t samples = 1000,
                             double level = 0.95, std::uint64_t seed = 0);

/// Type-7 (linear interpolation) sample quantile.
double quantile(std::vector<double> values, double q);

struct BucketMape {
  std::vector<double> edges;        // buckets + 1 quantiles of y
  std::vector<std::size_t> counts;  // days per bucket
  std::vector<double> mape;         // NaN for an empty bucket
};

/// Bucket b holds days with edges[b] < y <= edges[b+1] (the first bucket
/// also takes y == edges[0]).
BucketMape percentile_mape(std::span<const double> y, std::span<const double> y_hat, std::size_t buckets = 4);

// ---- significance tables -------------------------------------------------------

struct SignificanceEntry {
  std::string label;
  std::size_t runs = 0;
  std::array<double, 4> mean{};
  std::array<double, 4> sd{};
  std::array<double, 4> p{};  // NaN: no test (baseline row, or undefined)
  std::array<std::string, 4> code{};
};

/// Mean and sample standard deviation per metric, and the one-sided p-value
/// against the baseline scores (no test when `baseline` is empty).
SignificanceEntry summarize(const std::string& label, const std::vector<MetricVector>& runs,
                            const std::vector<MetricVector>& baseline, TTest kind);

std::string render_text(const std::vector<SignificanceEntry>& entries, const std::string& title = "");
std::string render_csv(const std::vector<SignificanceEntry>& entries);

// ---- plots -------------------------------------------------------------------

struct PlotInput {
  std::string title;
  std::vector<std::string> x_labels;     // one per day
  std::vector<double> truth;
  std::vector<double> prediction;        // mean prediction
  std::optional<BootstrapBand> band;     // drawn as a polygon when present
};

std::string render_svg(const PlotInput& plot);

}  // namespace volcast::eval
