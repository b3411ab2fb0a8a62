#pragma once

// Layers, the squared epsilon-insensitive loss, AdamW, weight initialization
// and the parameter checkpoint format.

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "volcast/tensor.hpp"

namespace volcast::nn {

using tensor::Tensor;
using Rng = std::mt19937_64;

enum class Mode { train, eval };
enum class Normalization { none, batch, layer, weight };
enum class RecurrentKind { lstm, gru };

std::string to_string(Normalization n);
Normalization parse_normalization(const std::string& s);

/// A trainable tensor with a stable dotted name (used by checkpoints).
struct NamedParameter {
  std::string name;
  Tensor* tensor;
};
using ParameterList = std::vector<NamedParameter>;

/// Fan-in scaled uniform draw: U(-a, a) with a = sqrt(3 / fan_in), so the
/// weight variance is 1 / fan_in.
void init_uniform_fan_in(Tensor& weights, std::size_t fan_in, Rng& rng);

/// Inverted dropout; identity in eval mode or when rate == 0.
Tensor dropout(const Tensor& x, double rate, Mode mode, Rng* rng);

struct Dense {
  Tensor weight;  // [out x in]
  Tensor bias;    // [out]

  Dense() = default;
  Dense(std::size_t in, std::size_t out);
  std::size_t in_features() const { return weight.cols(); }
  std::size_t out_features() const { return weight.rows(); }
  void init(Rng& rng);
  Tensor forward(const Tensor& x) const;       // [in] -> [out]
  Tensor forward_rows(const Tensor& x) const;  // [T x in] -> [T x out]
  void collect(const std::string& prefix, ParameterList& out);
};

/// Causal dilated convolution over a [T x C_in] sequence, optionally weight
/// normalized (effective weight = gain * v / ||v|| per output channel).
struct CausalConv {
  int kernel = 1;
  int dilation = 1;
  bool weight_norm = false;
  Tensor weight;  // v when weight_norm is set; [C_out x (k * C_in)]
  Tensor gain;    // [C_out], weight_norm only
  Tensor bias;    // [C_out]

  CausalConv() = default;
  CausalConv(std::size_t in, std::size_t out, int kernel, int dilation, bool weight_norm);
  std::size_t out_channels() const { return weight.rows(); }
  void init(Rng& rng);
  Tensor forward(const Tensor& x) const;
  void collect(const std::string& prefix, ParameterList& out);
};

/// receptive_field(k, b, L) = 1 + (k - 1) * (b^L - 1) / (b - 1); for b == 1
/// it degenerates to 1 + (k - 1) * L.
long long receptive_field(int kernel, int dilation_base, int layers);
/// Smallest L whose receptive field reaches `target` timesteps.
int layers_for_receptive_field(int kernel, int dilation_base, int target = 96);

struct TCNBlockConfig {
  std::size_t in_channels = 1;
  std::size_t filters = 32;
  int kernel = 5;
  int dilation_base = 4;
  int layers = 0;  // 0: derive from a 96-step receptive field
  double dropout = 0.0;
  bool skip_connections = true;
  Normalization normalization = Normalization::none;
};

/// Stack of causal dilated convolutions; layer l uses dilation base^l. Each
/// layer is conv -> normalization -> ReLU -> dropout, plus an identity (or
/// 1x1 projection) path when skip connections are on.
class TCNBlock {
 public:
  TCNBlock() = default;
  explicit TCNBlock(TCNBlockConfig config);

  const TCNBlockConfig& config() const { return config_; }
  int layer_count() const { return static_cast<int>(convs_.size()); }
  long long receptive_field() const;
  void init(Rng& rng);
  Tensor forward(const Tensor& x, Mode mode, Rng* rng);
  void collect(const std::string& prefix, ParameterList& out);
  /// Non-trainable state (batch-norm running statistics) that still belongs
  /// in a checkpoint.
  void collect_buffers(const std::string& prefix, ParameterList& out);

 private:
  struct RunningStats {
    Tensor mean, var;
  };
  TCNBlockConfig config_;
  std::vector<CausalConv> convs_;
  std::vector<Dense> projections_;  // empty Dense (undefined weight) means identity
  std::vector<RunningStats> stats_;
};

struct RecurrentConfig {
  RecurrentKind kind = RecurrentKind::lstm;
  std::size_t input_dim = 1;
  std::size_t hidden = 32;
  double dropout = 0.0;
};

/// LSTM or GRU over a [T x C_in] sequence with zero initial state; returns the
/// hidden sequence [T x hidden]. GRU update: h' = z * n + (1 - z) * h.
class RecurrentCell {
 public:
  RecurrentCell() = default;
  explicit RecurrentCell(RecurrentConfig config);

  const RecurrentConfig& config() const { return config_; }
  void init(Rng& rng);
  Tensor forward(const Tensor& x, Mode mode, Rng* rng) const;
  void collect(const std::string& prefix, ParameterList& out);

  // Per gate input/recurrent weights and bias. LSTM gates: i, f, g, o.
  // GRU gates: z, r, n.
  std::vector<Dense> input_gates;
  std::vector<Tensor> recurrent_gates;

 private:
  RecurrentConfig config_;
};

/// mean over elements of max(0, (r - r_hat)^2 - epsilon).
Tensor epsilon_insensitive_loss(const Tensor& r, const Tensor& r_hat, double epsilon);

struct AdamWConfig {
  double learning_rate = 1e-3;
  double weight_decay = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// AdamW with decoupled weight decay and bias-corrected moments.
class AdamW {
 public:
  AdamW(AdamWConfig config, ParameterList params);

  /// Applies one update from the parameters' accumulated gradients. Returns
  /// false (and changes nothing) when any gradient is non-finite.
  bool step();
  void zero_grad();
  long long steps() const { return t_; }
  const AdamWConfig& config() const { return config_; }
  std::span<const double> first_moment(std::size_t i) const { return m_[i]; }
  std::span<const double> second_moment(std::size_t i) const { return v_[i]; }

 private:
  AdamWConfig config_;
  ParameterList params_;
  std::vector<std::vector<double>> m_, v_;
  long long t_ = 0;
};

// ---- checkpoints ------------------------------------------------------------
//
// Little-endian flat file:
//   magic "VCKP" | u32 version (1) | u32 count
//   count x { u32 name_len | name bytes | u32 rank | rank x u64 dim |
//             prod(dims) x f64 }

void save_checkpoint(const std::filesystem::path& path, const ParameterList& params);
/// Loads values into parameters of matching name and shape; every parameter
/// must be present in the file.
void load_checkpoint(const std::filesystem::path& path, const ParameterList& params);

/// Copies parameter values between two lists with identical names/shapes.
void copy_parameters(const ParameterList& from, const ParameterList& to);
std::size_t parameter_count(const ParameterList& params);

}  // namespace volcast::nn
