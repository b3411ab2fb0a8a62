#include "volcast/nn.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>

namespace volcast::nn {

using tensor::Shape;

std::string to_string(Normalization n) {
  switch (n) {
    case Normalization::none: return "none";
    case Normalization::batch: return "batch";
    case Normalization::layer: return "layer";
    case Normalization::weight: return "weight";
  }
  return "none";
}

Normalization parse_normalization(const std::string& s) {
  if (s == "none") return Normalization::none;
  if (s == "batch") return Normalization::batch;
  if (s == "layer") return Normalization::layer;
  if (s == "weight") return Normalization::weight;
  throw std::invalid_argument("unknown normalization '" + s + "'");
}

void init_uniform_fan_in(Tensor& weights, std::size_t fan_in, Rng& rng) {
  if (fan_in == 0) throw std::invalid_argument("init: zero fan-in");
  const double a = std::sqrt(3.0 / static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-a, a);
  for (double& w : weights.mutable_values()) w = dist(rng);
}

Tensor dropout(const Tensor& x, double rate, Mode mode, Rng* rng) {
  if (mode == Mode::eval || rate <= 0.0) return x;
  if (rate >= 1.0) throw std::invalid_argument("dropout: rate must be below 1");
  if (!rng) throw std::invalid_argument("dropout: training mode needs an rng");
  std::bernoulli_distribution keep(1.0 - rate);
  const double scale = 1.0 / (1.0 - rate);
  std::vector<double> factors(x.size());
  for (double& f : factors) f = keep(*rng) ? scale : 0.0;
  return tensor::mask(x, std::move(factors));
}

// ---- Dense --------------------------------------------------------------

Dense::Dense(std::size_t in, std::size_t out)
    : weight(Tensor::zeros({out, in}, true)), bias(Tensor::zeros({out}, true)) {}

void Dense::init(Rng& rng) {
  init_uniform_fan_in(weight, in_features(), rng);
  std::fill(bias.mutable_values().begin(), bias.mutable_values().end(), 0.0);
}

Tensor Dense::forward(const Tensor& x) const { return tensor::dense(x, weight, bias); }

Tensor Dense::forward_rows(const Tensor& x) const { return tensor::dense_rows(x, weight, bias); }

void Dense::collect(const std::string& prefix, ParameterList& out) {
  out.push_back({prefix + ".weight", &weight});
  out.push_back({prefix + ".bias", &bias});
}

// ---- CausalConv -----------------------------------------------------------

CausalConv::CausalConv(std::size_t in, std::size_t out, int kernel_, int dilation_, bool wn)
    : kernel(kernel_),
      dilation(dilation_),
      weight_norm(wn),
      weight(Tensor::zeros({out, static_cast<std::size_t>(kernel_) * in}, true)),
      bias(Tensor::zeros({out}, true)) {
  if (kernel < 1 || dilation < 1) throw std::invalid_argument("conv: kernel and dilation must be positive");
  if (weight_norm) gain = Tensor::zeros({out}, true);
}

void CausalConv::init(Rng& rng) {
  init_uniform_fan_in(weight, weight.cols(), rng);
  std::fill(bias.mutable_values().begin(), bias.mutable_values().end(), 0.0);
  if (weight_norm) {
    auto w = weight.values();
    auto g = gain.mutable_values();
    const std::size_t n = weight.cols();
    for (std::size_t i = 0; i < g.size(); ++i) {
      double ss = 0.0;
      for (std::size_t j = 0; j < n; ++j) ss += w[i * n + j] * w[i * n + j];
      g[i] = std::sqrt(ss);
    }
  }
}

Tensor CausalConv::forward(const Tensor& x) const {
  const Tensor w = weight_norm ? tensor::weight_norm_rows(weight, gain) : weight;
  return tensor::causal_conv(x, w, bias, kernel, dilation);
}

void CausalConv::collect(const std::string& prefix, ParameterList& out) {
  out.push_back({prefix + (weight_norm ? ".v" : ".weight"), &weight});
  if (weight_norm) out.push_back({prefix + ".gain", &gain});
  out.push_back({prefix + ".bias", &bias});
}

// ---- TCN --------------------------------------------------------------------

long long receptive_field(int kernel, int dilation_base, int layers) {
  if (kernel < 1 || dilation_base < 1 || layers < 0) throw std::invalid_argument("receptive_field: bad arguments");
  if (dilation_base == 1) return 1 + static_cast<long long>(kernel - 1) * layers;
  long long pow = 1;
  for (int l = 0; l < layers; ++l) pow *= dilation_base;
  return 1 + static_cast<long long>(kernel - 1) * (pow - 1) / (dilation_base - 1);
}

int layers_for_receptive_field(int kernel, int dilation_base, int target) {
  if (kernel < 2) throw std::invalid_argument("layers_for_receptive_field: kernel must be at least 2");
  int layers = 1;
  while (receptive_field(kernel, dilation_base, layers) < target) ++layers;
  return layers;
}

TCNBlock::TCNBlock(TCNBlockConfig config) : config_(config) {
  if (config_.filters == 0 || config_.in_channels == 0) throw std::invalid_argument("tcn: zero channels");
  const int layers = config_.layers > 0 ? config_.layers
                                        : layers_for_receptive_field(config_.kernel, config_.dilation_base);
  const bool wn = config_.normalization == Normalization::weight;
  int dilation = 1;
  for (int l = 0; l < layers; ++l) {
    const std::size_t in = l == 0 ? config_.in_channels : config_.filters;
    convs_.emplace_back(in, config_.filters, config_.kernel, dilation, wn);
    projections_.push_back(config_.skip_connections && in != config_.filters ? Dense(in, config_.filters)
                                                                              : Dense());
    stats_.push_back({Tensor::vector(std::vector<double>(config_.filters, 0.0)),
                      Tensor::vector(std::vector<double>(config_.filters, 1.0))});
    dilation *= config_.dilation_base;
  }
}

long long TCNBlock::receptive_field() const {
  return nn::receptive_field(config_.kernel, config_.dilation_base, layer_count());
}

void TCNBlock::init(Rng& rng) {
  for (auto& c : convs_) c.init(rng);
  for (auto& p : projections_)
    if (p.weight.defined()) p.init(rng);
  for (auto& s : stats_) {
    std::ranges::fill(s.mean.mutable_values(), 0.0);
    std::ranges::fill(s.var.mutable_values(), 1.0);
  }
}

Tensor TCNBlock::forward(const Tensor& x, Mode mode, Rng* rng) {
  if (x.rank() != 2 || x.cols() != config_.in_channels) {
    throw tensor::ShapeError("tcn: expected input [T x " + std::to_string(config_.in_channels) + "]");
  }
  constexpr double kMomentum = 0.1;
  Tensor h = x;
  for (std::size_t l = 0; l < convs_.size(); ++l) {
    Tensor y = convs_[l].forward(h);
    switch (config_.normalization) {
      case Normalization::layer: y = tensor::layer_norm_rows(y); break;
      case Normalization::batch: {
        auto& st = stats_[l];
        if (mode == Mode::train) {
          const std::size_t T = y.rows(), C = y.cols();
          auto v = y.values();
          auto rm = st.mean.mutable_values();
          auto rv = st.var.mutable_values();
          for (std::size_t c = 0; c < C; ++c) {
            double mu = 0.0, var = 0.0;
            for (std::size_t t = 0; t < T; ++t) mu += v[t * C + c];
            mu /= static_cast<double>(T);
            for (std::size_t t = 0; t < T; ++t) var += (v[t * C + c] - mu) * (v[t * C + c] - mu);
            var /= static_cast<double>(T);
            rm[c] = (1.0 - kMomentum) * rm[c] + kMomentum * mu;
            rv[c] = (1.0 - kMomentum) * rv[c] + kMomentum * var;
          }
          y = tensor::batch_norm_cols(y, {}, {});
        } else {
          y = tensor::batch_norm_cols(y, st.mean.values(), st.var.values());
        }
        break;
      }
      case Normalization::none:
      case Normalization::weight: break;
    }
    y = dropout(tensor::relu(y), config_.dropout, mode, rng);
    if (config_.skip_connections) {
      const Tensor identity = projections_[l].weight.defined() ? projections_[l].forward_rows(h) : h;
      y = tensor::add(y, identity);
    }
    h = y;
  }
  return h;
}

void TCNBlock::collect(const std::string& prefix, ParameterList& out) {
  for (std::size_t l = 0; l < convs_.size(); ++l) {
    const std::string p = prefix + ".layer" + std::to_string(l);
    convs_[l].collect(p + ".conv", out);
    if (projections_[l].weight.defined()) projections_[l].collect(p + ".proj", out);
  }
}

void TCNBlock::collect_buffers(const std::string& prefix, ParameterList& out) {
  if (config_.normalization != Normalization::batch) return;
  for (std::size_t l = 0; l < stats_.size(); ++l) {
    const std::string p = prefix + ".layer" + std::to_string(l);
    out.push_back({p + ".bn_mean", &stats_[l].mean});
    out.push_back({p + ".bn_var", &stats_[l].var});
  }
}

// ---- recurrent ------------------------------------------------------------

RecurrentCell::RecurrentCell(RecurrentConfig config) : config_(config) {
  if (config_.hidden == 0 || config_.input_dim == 0) throw std::invalid_argument("recurrent: zero dimension");
  const std::size_t gates = config_.kind == RecurrentKind::lstm ? 4 : 3;
  for (std::size_t g = 0; g < gates; ++g) {
    input_gates.emplace_back(config_.input_dim, config_.hidden);
    recurrent_gates.push_back(Tensor::zeros({config_.hidden, config_.hidden}, true));
  }
}

void RecurrentCell::init(Rng& rng) {
  for (std::size_t g = 0; g < input_gates.size(); ++g) {
    input_gates[g].init(rng);
    init_uniform_fan_in(recurrent_gates[g], config_.hidden, rng);
  }
}

Tensor RecurrentCell::forward(const Tensor& x, Mode mode, Rng* rng) const {
  if (x.rank() != 2 || x.cols() != config_.input_dim) {
    throw tensor::ShapeError("recurrent: expected input [T x " + std::to_string(config_.input_dim) + "]");
  }
  const std::size_t T = x.rows(), H = config_.hidden;
  Tensor h = Tensor::zeros({H});
  Tensor c = Tensor::zeros({H});
  std::vector<Tensor> outputs;
  outputs.reserve(T);
  auto pre = [&](std::size_t g, const Tensor& xt, const Tensor& hp) {
    return tensor::add(input_gates[g].forward(xt), tensor::matvec(recurrent_gates[g], hp));
  };
  for (std::size_t t = 0; t < T; ++t) {
    const Tensor xt = tensor::row(x, t);
    if (config_.kind == RecurrentKind::lstm) {
      const Tensor i = tensor::sigmoid(pre(0, xt, h));
      const Tensor f = tensor::sigmoid(pre(1, xt, h));
      const Tensor g = tensor::tanh(pre(2, xt, h));
      const Tensor o = tensor::sigmoid(pre(3, xt, h));
      c = tensor::add(tensor::mul(f, c), tensor::mul(i, g));
      h = tensor::mul(o, tensor::tanh(c));
    } else {
      const Tensor z = tensor::sigmoid(pre(0, xt, h));
      const Tensor r = tensor::sigmoid(pre(1, xt, h));
      const Tensor n = tensor::tanh(
          tensor::add(input_gates[2].forward(xt), tensor::mul(r, tensor::matvec(recurrent_gates[2], h))));
      h = tensor::add(tensor::mul(z, n), tensor::mul(tensor::affine(z, -1.0, 1.0), h));
    }
    outputs.push_back(h);
  }
  return dropout(tensor::stack_rows(outputs), config_.dropout, mode, rng);
}

void RecurrentCell::collect(const std::string& prefix, ParameterList& out) {
  static constexpr const char* kLstm[] = {"i", "f", "g", "o"};
  static constexpr const char* kGru[] = {"z", "r", "n"};
  for (std::size_t g = 0; g < input_gates.size(); ++g) {
    const std::string name = config_.kind == RecurrentKind::lstm ? kLstm[g] : kGru[g];
    input_gates[g].collect(prefix + ".input_" + name, out);
    out.push_back({prefix + ".recurrent_" + name, &recurrent_gates[g]});
  }
}

// ---- loss -----------------------------------------------------------------

Tensor epsilon_insensitive_loss(const Tensor& r, const Tensor& r_hat, double epsilon) {
  if (!(epsilon >= 0.0)) throw std::invalid_argument("epsilon_insensitive_loss: epsilon must be non-negative");
  if (r.shape() != r_hat.shape()) throw tensor::ShapeError("epsilon_insensitive_loss: shape mismatch");
  if (r.size() == 0) throw tensor::ShapeError("epsilon_insensitive_loss: empty input");
  const std::size_t n = r.size();
  auto rv = r.values();
  auto pv = r_hat.values();
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = rv[i] - pv[i];
    const double l = e * e - epsilon;
    if (!(l <= 0.0)) acc += l;  // NaN propagates
  }
  return tensor::make_result({}, {acc / static_cast<double>(n)}, {r, r_hat},
                             [n, epsilon](tensor::detail::Node& self) {
    auto& rn = *self.parents[0];
    auto& pn = *self.parents[1];
    const double scale = self.grad[0] * 2.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double e = rn.value[i] - pn.value[i];
      if (e * e - epsilon <= 0.0) continue;
      if (rn.requires_grad) rn.grad_buffer()[i] += scale * e;
      if (pn.requires_grad) pn.grad_buffer()[i] -= scale * e;
    }
  });
}

// ---- AdamW ----------------------------------------------------------------

AdamW::AdamW(AdamWConfig config, ParameterList params) : config_(config), params_(std::move(params)) {
  if (!(config_.learning_rate > 0.0) || config_.weight_decay < 0.0) {
    throw std::invalid_argument("adamw: learning rate must be positive and weight decay non-negative");
  }
  for (const auto& p : params_) {
    m_.emplace_back(p.tensor->size(), 0.0);
    v_.emplace_back(p.tensor->size(), 0.0);
  }
}

bool AdamW::step() {
  for (const auto& p : params_) {
    for (double g : p.tensor->grad())
      if (!std::isfinite(g)) return false;
  }
  ++t_;
  const double lr = config_.learning_rate;
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  const double decay = 1.0 - lr * config_.weight_decay;
  for (std::size_t k = 0; k < params_.size(); ++k) {
    auto w = params_[k].tensor->mutable_values();
    auto g = params_[k].tensor->grad();
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gi = g.empty() ? 0.0 : g[i];
      w[i] *= decay;
      m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * gi;
      v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * gi * gi;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      w[i] -= lr * mhat / (std::sqrt(vhat) + config_.eps);
    }
  }
  return true;
}

void AdamW::zero_grad() {
  for (auto& p : params_) p.tensor->zero_grad();
}

// ---- checkpoints ------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'V', 'C', 'K', 'P'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put(std::ostream& os, T v) {
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
    os.write(reinterpret_cast<const char*>(b), sizeof(T));
  } else {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }
}

template <class T>
T get(std::istream& is) {
  T v{};
  unsigned char b[sizeof(T)];
  if (!is.read(reinterpret_cast<char*>(b), sizeof(T))) throw std::runtime_error("checkpoint: truncated file");
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
  }
  std::memcpy(&v, b, sizeof(T));
  return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ParameterList& params) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("checkpoint: cannot open '" + path.string() + "' for writing");
  os.write(kMagic, 4);
  put<std::uint32_t>(os, kVersion);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    put<std::uint32_t>(os, static_cast<std::uint32_t>(p.name.size()));
    os.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    const Shape& shape = p.tensor->shape();
    put<std::uint32_t>(os, static_cast<std::uint32_t>(shape.size()));
    for (std::size_t d : shape) put<std::uint64_t>(os, d);
    for (double v : p.tensor->values()) put<double>(os, v);
  }
  if (!os) throw std::runtime_error("checkpoint: write failed for '" + path.string() + "'");
}

void load_checkpoint(const std::filesystem::path& path, const ParameterList& params) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot open '" + path.string() + "'");
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) throw std::runtime_error("checkpoint: bad magic");
  if (get<std::uint32_t>(is) != kVersion) throw std::runtime_error("checkpoint: unsupported version");
  const auto count = get<std::uint32_t>(is);
  std::map<std::string, std::pair<Shape, std::vector<double>>> entries;
  for (std::uint32_t e = 0; e < count; ++e) {
    const auto len = get<std::uint32_t>(is);
    std::string name(len, '\0');
    if (!is.read(name.data(), len)) throw std::runtime_error("checkpoint: truncated name");
    const auto rank = get<std::uint32_t>(is);
    Shape shape(rank);
    std::size_t n = 1;
    for (auto& d : shape) {
      d = static_cast<std::size_t>(get<std::uint64_t>(is));
      n *= d;
    }
    std::vector<double> values(n);
    for (double& v : values) v = get<double>(is);
    entries[name] = {std::move(shape), std::move(values)};
  }
  for (const auto& p : params) {
    auto it = entries.find(p.name);
    if (it == entries.end()) throw std::runtime_error("checkpoint: missing parameter '" + p.name + "'");
    if (it->second.first != p.tensor->shape()) throw std::runtime_error("checkpoint: shape mismatch for '" + p.name + "'");
    auto dst = p.tensor->mutable_values();
    std::copy(it->second.second.begin(), it->second.second.end(), dst.begin());
  }
}

void copy_parameters(const ParameterList& from, const ParameterList& to) {
  if (from.size() != to.size()) throw std::invalid_argument("copy_parameters: parameter count differs");
  for (std::size_t i = 0; i < from.size(); ++i) {
    if (from[i].name != to[i].name || from[i].tensor->shape() != to[i].tensor->shape()) {
      throw std::invalid_argument("copy_parameters: mismatch at '" + from[i].name + "'");
    }
    auto src = from[i].tensor->values();
    auto dst = to[i].tensor->mutable_values();
    std::copy(src.begin(), src.end(), dst.begin());
  }
}

std::size_t parameter_count(const ParameterList& params) {
  std::size_t n = 0;
  for (const auto& p : params) n += p.tensor->size();
  return n;
}

}  // namespace volcast::nn
