#pragma once

// Deep daily forecasters (TCN, D-TCN, LSTM, GRU) sharing one bottleneck
// interpolator head, plus training, evaluation and daily-RV aggregation.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "volcast/features.hpp"
#include "volcast/nn.hpp"

namespace volcast::models {

using features::DayWindow;
using nn::Mode;
using nn::Rng;
using tensor::Tensor;

enum class ModelKind { tcn, dtcn, lstm, gru };
std::string to_string(ModelKind k);
ModelKind parse_model_kind(const std::string& s);

/// Dense(in -> B) with no activation, then Dense(B -> 96). The interpolator
/// bias has one entry per 15-minute slot.
struct ForecastHead {
  nn::Dense bottleneck;
  nn::Dense interpolator;

  ForecastHead() = default;
  ForecastHead(std::size_t in, std::size_t bottleneck_dim);
  void init(Rng& rng);
  Tensor forward(const Tensor& representation) const;
  void collect(const std::string& prefix, nn::ParameterList& out);
};

struct ModelConfig {
  ModelKind kind = ModelKind::tcn;
  std::size_t filters = 32;  // TCN filters or recurrent hidden units
  int kernel = 5;
  int dilation_base = 4;
  int layers = 0;  // 0: smallest depth covering 96 steps
  double dropout = 0.0;
  bool skip_connections = true;
  nn::Normalization normalization = nn::Normalization::none;
  std::size_t bottleneck = 8;
  std::size_t feature_dim = 0;  // D-TCN only
  std::size_t lower_dim = 4;    // D-TCN width after the feature dense layer
};

/// Largest magnitude accepted from a scaled input; anything bigger means the
/// caller forgot to scale.
inline constexpr double kMaxScaledMagnitude = 10.0;

class Forecaster {
 public:
  explicit Forecaster(ModelConfig config);

  const ModelConfig& config() const { return config_; }
  void init(Rng& rng);

  /// 96 predictions in scaled log-return space.
  Tensor forward(const DayWindow& window, Mode mode, Rng* rng);
  /// Eval-mode forward without a graph.
  std::vector<double> predict(const DayWindow& window);

  nn::ParameterList parameters();
  /// Parameters plus non-trainable buffers, for checkpoints.
  nn::ParameterList state();

  ForecastHead& head() { return head_; }
  nn::TCNBlock& upper() { return upper_; }
  nn::TCNBlock& lower() { return lower_; }
  nn::Dense& lower_dense() { return lower_dense_; }
  nn::RecurrentCell& recurrent() { return recurrent_; }

  /// Sets every lower-pipeline parameter and buffer to zero, including the
  /// head's lower input columns (D-TCN only).
  void zero_lower_pipeline();

 private:
  void zero_head_lower_columns();

  ModelConfig config_;
  nn::TCNBlock upper_;
  nn::TCNBlock lower_;
  nn::Dense lower_dense_;
  nn::RecurrentCell recurrent_;
  ForecastHead head_;
};

/// Copies the upper pipeline and head of a TCN into a D-TCN built with the
/// same upper configuration; the lower pipeline is zeroed.
void transplant_tcn(Forecaster& tcn, Forecaster& dtcn);

/// sqrt(sum r^2) of raw (unscaled) returns.
double predict_rv(std::span<const double> returns);

struct TrainConfig {
  int epochs = 30;
  double epsilon = 0.0913;
  nn::AdamWConfig optimizer{6.49e-5, 5.93e-6};
  std::uint64_t seed = 1;
};

struct FitResult {
  std::vector<double> epoch_loss;  // mean per-window loss of each epoch
  double final_loss = 0.0;         // mean loss over the training windows after the last epoch (eval mode)
  long long steps = 0;
};

/// Per-window AdamW steps, windows shuffled each epoch with the seeded
/// generator. Throws std::runtime_error with context on a non-finite loss or
/// gradient.
FitResult fit(Forecaster& model, std::span<const DayWindow> train, const TrainConfig& config);

struct DayPrediction {
  std::int64_t day = 0;  // target day, UTC midnight
  double true_rv = 0.0;
  double pred_rv = 0.0;
};

/// Eval-mode predictions, unscaled with the return scaler, aggregated to RV.
std::vector<DayPrediction> evaluate(Forecaster& model, std::span<const DayWindow> test,
                                    const features::Scaler& return_scaler);

struct BiasRow {
  std::string time_of_day;  // "HH:MM" UTC
  double bias = 0.0;
};
/// The interpolator's 96 bias values against their slot start times.
std::vector<BiasRow> export_head_bias(Forecaster& model);
void write_head_bias(const std::filesystem::path& path, std::span<const BiasRow> rows);
void write_predictions(const std::filesystem::path& path, std::span<const DayPrediction> rows);

}  // namespace volcast::models
