#include "volcast/models.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "volcast/table_io.hpp"

namespace volcast::models {

std::string to_string(ModelKind k) {
  switch (k) {
    case ModelKind::tcn: return "tcn";
    case ModelKind::dtcn: return "dtcn";
    case ModelKind::lstm: return "lstm";
    case ModelKind::gru: return "gru";
  }
  return "?";
}

ModelKind parse_model_kind(const std::string& s) {
  std::string t;
  for (char c : s)
    if (c != '-' && c != '_') t += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (t == "tcn") return ModelKind::tcn;
  if (t == "dtcn") return ModelKind::dtcn;
  if (t == "lstm") return ModelKind::lstm;
  if (t == "gru") return ModelKind::gru;
  throw std::invalid_argument("unknown model kind '" + s + "' (expected tcn, dtcn, lstm or gru)");
}

ForecastHead::ForecastHead(std::size_t in, std::size_t bottleneck_dim)
    : bottleneck(in, bottleneck_dim), interpolator(bottleneck_dim, features::kBinsPerDay) {}

void ForecastHead::init(Rng& rng) {
  bottleneck.init(rng);
  interpolator.init(rng);
}

Tensor ForecastHead::forward(const Tensor& representation) const {
  return interpolator.forward(bottleneck.forward(representation));
}

void ForecastHead::collect(const std::string& prefix, nn::ParameterList& out) {
  bottleneck.collect(prefix + ".bottleneck", out);
  interpolator.collect(prefix + ".interpolator", out);
}

namespace {

nn::TCNBlockConfig block_config(const ModelConfig& c, std::size_t in_channels) {
  nn::TCNBlockConfig b;
  b.in_channels = in_channels;
  b.filters = c.filters;
  b.kernel = c.kernel;
  b.dilation_base = c.dilation_base;
  b.layers = c.layers;
  b.dropout = c.dropout;
  b.skip_connections = c.skip_connections;
  b.normalization = c.normalization;
  return b;
}

void zero_tensor(Tensor& t) {
  if (!t.defined()) return;
  auto v = t.mutable_values();
  std::fill(v.begin(), v.end(), 0.0);
}

}  // namespace

Forecaster::Forecaster(ModelConfig config) : config_(config) {
  if (config_.filters == 0) throw std::invalid_argument("model: filters must be positive");
  if (config_.bottleneck == 0) throw std::invalid_argument("model: bottleneck must be positive");
  if (config_.dropout < 0.0 || config_.dropout >= 1.0) throw std::invalid_argument("model: dropout must be in [0, 1)");
  std::size_t rep = config_.filters;
  switch (config_.kind) {
    case ModelKind::tcn: upper_ = nn::TCNBlock(block_config(config_, 1)); break;
    case ModelKind::dtcn:
      if (config_.feature_dim == 0) throw std::invalid_argument("D-TCN needs a non-empty feature set");
      if (config_.lower_dim == 0) throw std::invalid_argument("D-TCN lower dimension must be positive");
      upper_ = nn::TCNBlock(block_config(config_, 1));
      lower_dense_ = nn::Dense(config_.feature_dim, config_.lower_dim);
      lower_ = nn::TCNBlock(block_config(config_, config_.lower_dim));
      rep = 2 * config_.filters;
      break;
    case ModelKind::lstm:
    case ModelKind::gru: {
      nn::RecurrentConfig rc;
      rc.kind = config_.kind == ModelKind::lstm ? nn::RecurrentKind::lstm : nn::RecurrentKind::gru;
      rc.input_dim = 1;
      rc.hidden = config_.filters;
      rc.dropout = config_.dropout;
      recurrent_ = nn::RecurrentCell(rc);
      break;
    }
  }
  head_ = ForecastHead(rep, config_.bottleneck);
}

void Forecaster::init(Rng& rng) {
  switch (config_.kind) {
    case ModelKind::tcn: upper_.init(rng); break;
    case ModelKind::dtcn:
      upper_.init(rng);
      lower_dense_.init(rng);
      lower_.init(rng);
      break;
    case ModelKind::lstm:
    case ModelKind::gru: recurrent_.init(rng); break;
  }
  head_.init(rng);
}

Tensor Forecaster::forward(const DayWindow& window, Mode mode, Rng* rng) {
  constexpr std::size_t T = features::kBinsPerDay;
  if (window.inputs.size() != T) throw std::invalid_argument("forward_day: expected 96 input returns");
  for (double x : window.inputs)
    if (!(std::abs(x) <= kMaxScaledMagnitude))
      throw std::invalid_argument("forward_day: input magnitude looks unscaled (" + io::format_double(x) + ")");
  const Tensor x = Tensor::matrix(T, 1, window.inputs);
  Tensor rep;
  switch (config_.kind) {
    case ModelKind::tcn: rep = tensor::row(upper_.forward(x, mode, rng), T - 1); break;
    case ModelKind::dtcn: {
      if (window.feature_dim != config_.feature_dim || window.features.size() != T * config_.feature_dim)
        throw std::invalid_argument("forward_day: window has " + std::to_string(window.feature_dim) +
                                    " feature columns, model expects " + std::to_string(config_.feature_dim));
      for (double f : window.features)
        if (!(std::abs(f) <= kMaxScaledMagnitude))
          throw std::invalid_argument("forward_day: feature magnitude looks unscaled (" + io::format_double(f) + ")");
      const Tensor up = tensor::row(upper_.forward(x, mode, rng), T - 1);
      const Tensor fx = Tensor::matrix(T, config_.feature_dim, window.features);
      const Tensor low_in = tensor::relu(lower_dense_.forward_rows(fx));
      const Tensor low = tensor::row(lower_.forward(low_in, mode, rng), T - 1);
      rep = tensor::concat(up, low);
      break;
    }
    case ModelKind::lstm:
    case ModelKind::gru: rep = tensor::row(recurrent_.forward(x, mode, rng), T - 1); break;
  }
  return head_.forward(rep);
}

std::vector<double> Forecaster::predict(const DayWindow& window) {
  const Tensor y = forward(window, Mode::eval, nullptr);
  auto v = y.values();
  return {v.begin(), v.end()};
}

nn::ParameterList Forecaster::parameters() {
  nn::ParameterList out;
  switch (config_.kind) {
    case ModelKind::tcn: upper_.collect("upper", out); break;
    case ModelKind::dtcn:
      upper_.collect("upper", out);
      lower_dense_.collect("lower.dense", out);
      lower_.collect("lower", out);
      break;
    case ModelKind::lstm:
    case ModelKind::gru: recurrent_.collect("recurrent", out); break;
  }
  head_.collect("head", out);
  return out;
}

nn::ParameterList Forecaster::state() {
  auto out = parameters();
  upper_.collect_buffers("upper", out);
  if (config_.kind == ModelKind::dtcn) lower_.collect_buffers("lower", out);
  return out;
}

void Forecaster::zero_lower_pipeline() {
  if (config_.kind != ModelKind::dtcn) throw std::logic_error("zero_lower_pipeline: not a D-TCN");
  nn::ParameterList lower;
  lower_dense_.collect("lower.dense", lower);
  lower_.collect("lower", lower);
  lower_.collect_buffers("lower", lower);
  for (auto& p : lower) zero_tensor(*p.tensor);
  zero_head_lower_columns();
}

void Forecaster::zero_head_lower_columns() {
  auto w = head_.bottleneck.weight.mutable_values();
  const std::size_t rows = head_.bottleneck.weight.rows(), cols = head_.bottleneck.weight.cols();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = config_.filters; c < cols; ++c) w[r * cols + c] = 0.0;
}

void transplant_tcn(Forecaster& tcn, Forecaster& dtcn) {
  if (tcn.config().kind != ModelKind::tcn || dtcn.config().kind != ModelKind::dtcn)
    throw std::invalid_argument("transplant_tcn: expects a TCN and a D-TCN");
  nn::ParameterList from, to;
  tcn.upper().collect("upper", from);
  tcn.upper().collect_buffers("upper", from);
  dtcn.upper().collect("upper", to);
  dtcn.upper().collect_buffers("upper", to);
  nn::copy_parameters(from, to);
  dtcn.zero_lower_pipeline();

  auto& hs = tcn.head();
  auto& hd = dtcn.head();
  if (hs.bottleneck.out_features() != hd.bottleneck.out_features())
    throw std::invalid_argument("transplant_tcn: bottleneck widths differ");
  const std::size_t rows = hs.bottleneck.weight.rows(), n_src = hs.bottleneck.weight.cols();
  const std::size_t n_dst = hd.bottleneck.weight.cols();
  auto ws = hs.bottleneck.weight.values();
  auto wd = hd.bottleneck.weight.mutable_values();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < n_src; ++c) wd[r * n_dst + c] = ws[r * n_src + c];
  nn::ParameterList a, b;
  a.push_back({"bias", &hs.bottleneck.bias});
  b.push_back({"bias", &hd.bottleneck.bias});
  hs.interpolator.collect("interpolator", a);
  hd.interpolator.collect("interpolator", b);
  nn::copy_parameters(a, b);
}

double predict_rv(std::span<const double> returns) {
  double s = 0.0;
  for (double r : returns) s += r * r;
  return std::sqrt(s);
}

FitResult fit(Forecaster& model, std::span<const DayWindow> train, const TrainConfig& config) {
  if (train.empty()) throw std::invalid_argument("fit: no training windows");
  if (config.epochs <= 0) throw std::invalid_argument("fit: epochs must be positive");
  if (config.epsilon < 0.0) throw std::invalid_argument("fit: epsilon must be non-negative");
  std::seed_seq shuffle_seed{config.seed, std::uint64_t{0x5f}};
  std::seed_seq dropout_seed{config.seed, std::uint64_t{0xd0}};
  Rng shuffle_rng(shuffle_seed);
  Rng dropout_rng(dropout_seed);

  nn::AdamW opt(config.optimizer, model.parameters());
  FitResult result;
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  auto diagnose = [&](const char* what, int epoch, const DayWindow& w, double loss) {
    std::ostringstream os;
    os << "fit: non-finite " << what << " at epoch " << epoch + 1 << ", target day " << io::format_date(w.target_day)
       << " (loss " << io::format_double(loss) << ", lr " << io::format_double(config.optimizer.learning_rate)
       << ", step " << opt.steps() << ")";
    return std::runtime_error(os.str());
  };

  for (int e = 0; e < config.epochs; ++e) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double total = 0.0;
    for (std::size_t i : order) {
      const DayWindow& w = train[i];
      opt.zero_grad();
      const Tensor pred = model.forward(w, Mode::train, &dropout_rng);
      const Tensor target = Tensor::vector(w.target);
      const Tensor loss = nn::epsilon_insensitive_loss(target, pred, config.epsilon);
      const double lv = loss.item();
      if (!std::isfinite(lv)) throw diagnose("loss", e, w, lv);
      tensor::backward(loss);
      if (!opt.step()) throw diagnose("gradient", e, w, lv);
      total += lv;
    }
    result.epoch_loss.push_back(total / static_cast<double>(train.size()));
  }

  double total = 0.0;
  for (const auto& w : train) {
    const Tensor pred = model.forward(w, Mode::eval, nullptr);
    total += nn::epsilon_insensitive_loss(Tensor::vector(w.target), pred.detach(), config.epsilon).item();
  }
  result.final_loss = total / static_cast<double>(train.size());
  if (!std::isfinite(result.final_loss)) throw std::runtime_error("fit: final loss is not finite");
  result.steps = opt.steps();
  return result;
}

std::vector<DayPrediction> evaluate(Forecaster& model, std::span<const DayWindow> test,
                                    const features::Scaler& return_scaler) {
  std::vector<DayPrediction> out;
  out.reserve(test.size());
  for (const auto& w : test) {
    auto scaled = model.predict(w);
    for (double& v : scaled) v = return_scaler.inverse(v, 0);
    out.push_back({w.target_day, w.true_rv(), predict_rv(scaled)});
  }
  return out;
}

std::vector<BiasRow> export_head_bias(Forecaster& model) {
  auto b = model.head().interpolator.bias.values();
  std::vector<BiasRow> rows;
  for (std::size_t k = 0; k < b.size(); ++k) {
    const std::int64_t minutes = static_cast<std::int64_t>(k) * 15;
    char buf[8];
    std::snprintf(buf, sizeof buf, "%02d:%02d", static_cast<int>(minutes / 60), static_cast<int>(minutes % 60));
    rows.push_back({buf, b[k]});
  }
  return rows;
}

void write_head_bias(const std::filesystem::path& path, std::span<const BiasRow> rows) {
  std::ostringstream os;
  os << "time_utc,bias\n";
  for (const auto& r : rows) os << r.time_of_day << ',' << io::format_double(r.bias) << '\n';
  io::write_file(path, os.str());
}

void write_predictions(const std::filesystem::path& path, std::span<const DayPrediction> rows) {
  std::ostringstream os;
  os << "date,true_rv,pred_rv\n";
  for (const auto& r : rows)
    os << io::format_date(r.day) << ',' << io::format_double(r.true_rv) << ',' << io::format_double(r.pred_rv) << '\n';
  io::write_file(path, os.str());
}

}  // namespace volcast::models
