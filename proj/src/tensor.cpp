#include "volcast/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_set>

namespace volcast::tensor {

namespace {

std::atomic<std::uint64_t> g_sequence{0};

std::size_t product(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
  os << ']';
  return os.str();
}

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (!t.defined()) throw ShapeError(std::string(op) + ": undefined tensor");
  if (t.rank() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                     shape_str(t.shape()));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
}

bool wants_grad(const detail::Node& n) { return n.requires_grad; }

}  // namespace

std::vector<double>& detail::Node::grad_buffer() {
  if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
  return grad;
}

// ---- Tensor ---------------------------------------------------------------

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  if (product(shape) != values.size()) {
    throw ShapeError("tensor: shape " + shape_str(shape) + " does not hold " +
                     std::to_string(values.size()) + " values");
  }
  auto n = std::make_shared<detail::Node>();
  n->shape = std::move(shape);
  n->value = std::move(values);
  n->requires_grad = requires_grad;
  n->seq = g_sequence.fetch_add(1, std::memory_order_relaxed);
  return Tensor(std::move(n));
}

Tensor Tensor::vector(std::vector<double> values, bool requires_grad) {
  const std::size_t n = values.size();
  return from({n}, std::move(values), requires_grad);
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values,
                      bool requires_grad) {
  return from({rows, cols}, std::move(values), requires_grad);
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  const std::size_t n = product(shape);
  return from(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::scalar(double v, bool requires_grad) { return from({}, {v}, requires_grad); }

const Shape& Tensor::shape() const {
  if (!node_) throw ShapeError("tensor: undefined");
  return node_->shape;
}

std::size_t Tensor::size() const { return node_ ? node_->value.size() : 0; }

std::size_t Tensor::rows() const {
  require_rank(*this, 2, "rows");
  return node_->shape[0];
}

std::size_t Tensor::cols() const {
  require_rank(*this, 2, "cols");
  return node_->shape[1];
}

std::span<const double> Tensor::values() const {
  if (!node_) return {};
  return node_->value;
}

std::span<double> Tensor::mutable_values() {
  if (!is_leaf()) throw GraphError("mutable_values: only leaves may be written in place");
  return node_->value;
}

double Tensor::item() const {
  if (size() != 1) throw ShapeError("item: tensor is not scalar " + shape_str(shape()));
  return node_->value[0];
}

double Tensor::at(std::size_t r, std::size_t c) const {
  require_rank(*this, 2, "at");
  return node_->value[r * node_->shape[1] + c];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

bool Tensor::is_leaf() const { return node_ && node_->parents.empty() && !node_->backward; }

std::span<const double> Tensor::grad() const {
  if (!node_) return {};
  return node_->grad;
}

std::span<double> Tensor::mutable_grad() {
  if (!node_) return {};
  return node_->grad_buffer();
}

void Tensor::zero_grad() {
  if (node_) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

Tensor Tensor::detach() const { return from(shape(), node_->value, false); }

Tensor make_result(Shape shape, std::vector<double> values, std::vector<Tensor> parents,
                   detail::BackwardFn backward) {
  Tensor out = Tensor::from(std::move(shape), std::move(values), false);
  const bool rg = std::any_of(parents.begin(), parents.end(),
                              [](const Tensor& p) { return p.requires_grad(); });
  if (rg) {
    for (const Tensor& p : parents) {
      if (p.node()->backward_done && !p.is_leaf()) {
        throw GraphError("op input belongs to a graph that was already differentiated");
      }
    }
    out.node_->requires_grad = true;
    out.node_->parents.reserve(parents.size());
    for (Tensor& p : parents) out.node_->parents.push_back(p.node());
    out.node_->backward = std::move(backward);
  }
  return out;
}

void backward(const Tensor& loss) {
  if (!loss.defined()) throw GraphError("backward: undefined loss");
  if (loss.size() != 1) throw ShapeError("backward: loss must be scalar, got " + shape_str(loss.shape()));
  auto& root = loss.node();
  if (root->backward_done) throw GraphError("backward: already called on this loss; run a new forward pass");
  if (!root->requires_grad) throw GraphError("backward: loss is detached from every parameter");

  // Shared ownership keeps every node alive while the tape is being released.
  std::vector<std::shared_ptr<detail::Node>> order;
  std::unordered_set<detail::Node*> seen;
  std::vector<std::shared_ptr<detail::Node>> stack{root};
  while (!stack.empty()) {
    auto n = std::move(stack.back());
    stack.pop_back();
    if (!seen.insert(n.get()).second) continue;
    for (auto& p : n->parents) {
      if (p->requires_grad) stack.push_back(p);
    }
    order.push_back(std::move(n));
  }
  std::sort(order.begin(), order.end(), [](const auto& a, const auto& b) { return a->seq > b->seq; });

  for (auto& n : order) {
    if (n->backward) n->grad.assign(n->value.size(), 0.0);
    else n->grad_buffer();
  }
  root->grad_buffer()[0] += 1.0;
  for (auto& n : order) {
    if (n->backward) n->backward(*n);
  }
  for (auto& n : order) {
    if (n->backward) {
      n->backward = nullptr;
      n->parents.clear();
      n->backward_done = true;
    }
  }
  root->backward_done = true;
}

// ---- convolution --------------------------------------------------------

Tensor causal_dilated_conv1d(const Tensor& x, const Tensor& filter, int dilation) {
  require_rank(x, 1, "causal_dilated_conv1d(x)");
  require_rank(filter, 1, "causal_dilated_conv1d(filter)");
  if (dilation < 1) throw std::invalid_argument("causal_dilated_conv1d: dilation must be positive");
  if (filter.size() == 0) throw std::invalid_argument("causal_dilated_conv1d: empty filter");
  if (x.size() == 0) throw std::invalid_argument("causal_dilated_conv1d: empty input");

  const auto T = static_cast<std::ptrdiff_t>(x.size());
  const auto k = static_cast<std::ptrdiff_t>(filter.size());
  const std::ptrdiff_t d = dilation;
  auto xv = x.values();
  auto fv = filter.values();
  std::vector<double> out(static_cast<std::size_t>(T), 0.0);
  // Oldest tap first so the accumulation order matches a direct convolution
  // summed over increasing input time.
  for (std::ptrdiff_t s = 0; s < T; ++s) {
    double acc = 0.0;
    for (std::ptrdiff_t i = k - 1; i >= 0; --i) {
      const std::ptrdiff_t src = s - d * i;
      if (src < 0) continue;
      acc += fv[i] * xv[src];
    }
    out[s] = acc;
  }
  return make_result({x.size()}, std::move(out), {x, filter}, [T, k, d](detail::Node& self) {
    auto& xn = *self.parents[0];
    auto& fn = *self.parents[1];
    const auto& g = self.grad;
    if (wants_grad(xn)) {
      auto& gx = xn.grad_buffer();
      for (std::ptrdiff_t s = 0; s < T; ++s)
        for (std::ptrdiff_t i = 0; i < k; ++i) {
          const std::ptrdiff_t src = s - d * i;
          if (src >= 0) gx[src] += fn.value[i] * g[s];
        }
    }
    if (wants_grad(fn)) {
      auto& gf = fn.grad_buffer();
      for (std::ptrdiff_t s = 0; s < T; ++s)
        for (std::ptrdiff_t i = 0; i < k; ++i) {
          const std::ptrdiff_t src = s - d * i;
          if (src >= 0) gf[i] += xn.value[src] * g[s];
        }
    }
  });
}

Tensor causal_conv(const Tensor& x, const Tensor& weight, const Tensor& bias, int kernel,
                   int dilation) {
  require_rank(x, 2, "causal_conv(x)");
  require_rank(weight, 2, "causal_conv(weight)");
  require_rank(bias, 1, "causal_conv(bias)");
  if (kernel < 1 || dilation < 1) throw std::invalid_argument("causal_conv: kernel and dilation must be positive");
  const std::size_t T = x.rows(), cin = x.cols(), cout = weight.rows();
  const auto k = static_cast<std::size_t>(kernel);
  if (weight.cols() != k * cin || bias.size() != cout) {
    throw ShapeError("causal_conv: weight " + shape_str(weight.shape()) + " / bias " +
                     shape_str(bias.shape()) + " incompatible with input " + shape_str(x.shape()) +
                     " and kernel " + std::to_string(kernel));
  }
  const auto d = static_cast<std::ptrdiff_t>(dilation);
  auto xv = x.values();
  auto wv = weight.values();
  auto bv = bias.values();
  std::vector<double> out(T * cout);
  for (std::size_t s = 0; s < T; ++s) {
    for (std::size_t o = 0; o < cout; ++o) {
      double acc = 0.0;
      const double* wrow = wv.data() + o * k * cin;
      for (std::ptrdiff_t i = static_cast<std::ptrdiff_t>(k) - 1; i >= 0; --i) {
        const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(s) - d * i;
        if (src < 0) continue;
        const double* xr = xv.data() + static_cast<std::size_t>(src) * cin;
        const double* wr = wrow + static_cast<std::size_t>(i) * cin;
        for (std::size_t c = 0; c < cin; ++c) acc += wr[c] * xr[c];
      }
      out[s * cout + o] = acc + bv[o];
    }
  }
  return make_result({T, cout}, std::move(out), {x, weight, bias},
                     [T, cin, cout, k, d](detail::Node& self) {
    auto& xn = *self.parents[0];
    auto& wn = *self.parents[1];
    auto& bn = *self.parents[2];
    const auto& g = self.grad;
    double* gx = wants_grad(xn) ? xn.grad_buffer().data() : nullptr;
    double* gw = wants_grad(wn) ? wn.grad_buffer().data() : nullptr;
    double* gb = wants_grad(bn) ? bn.grad_buffer().data() : nullptr;
    for (std::size_t s = 0; s < T; ++s) {
      for (std::size_t o = 0; o < cout; ++o) {
        const double go = g[s * cout + o];
        if (go == 0.0) continue;
        if (gb) gb[o] += go;
        for (std::size_t i = 0; i < k; ++i) {
          const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(s) - d * static_cast<std::ptrdiff_t>(i);
          if (src < 0) break;
          const std::size_t xo = static_cast<std::size_t>(src) * cin;
          const std::size_t wo = o * k * cin + i * cin;
          if (gx)
            for (std::size_t c = 0; c < cin; ++c) gx[xo + c] += wn.value[wo + c] * go;
          if (gw)
            for (std::size_t c = 0; c < cin; ++c) gw[wo + c] += xn.value[xo + c] * go;
        }
      }
    }
  });
}

// ---- linear algebra -----------------------------------------------------

Tensor matvec(const Tensor& weights, const Tensor& x) {
  require_rank(weights, 2, "matvec(weights)");
  require_rank(x, 1, "matvec(x)");
  const std::size_t m = weights.rows(), n = weights.cols();
  if (x.size() != n) {
    throw ShapeError("matvec: weights " + shape_str(weights.shape()) + " vs x " + shape_str(x.shape()));
  }
  auto wv = weights.values();
  auto xv = x.values();
  std::vector<double> out(m);
  for (std::size_t i = 0; i < m; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) acc += wv[i * n + j] * xv[j];
    out[i] = acc;
  }
  return make_result({m}, std::move(out), {weights, x}, [m, n](detail::Node& self) {
    auto& wn = *self.parents[0];
    auto& xn = *self.parents[1];
    const auto& g = self.grad;
    if (wants_grad(wn)) {
      auto& gw = wn.grad_buffer();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) gw[i * n + j] += g[i] * xn.value[j];
    }
    if (wants_grad(xn)) {
      auto& gx = xn.grad_buffer();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) gx[j] += wn.value[i * n + j] * g[i];
    }
  });
}

Tensor dense(const Tensor& x, const Tensor& weights, const Tensor& bias) {
  require_rank(x, 1, "dense(x)");
  require_rank(weights, 2, "dense(weights)");
  require_rank(bias, 1, "dense(bias)");
  const std::size_t m = weights.rows(), n = weights.cols();
  if (x.size() != n || bias.size() != m) {
    throw ShapeError("dense: weights " + shape_str(weights.shape()) + ", x " + shape_str(x.shape()) +
                     ", bias " + shape_str(bias.shape()));
  }
  auto wv = weights.values();
  auto xv = x.values();
  auto bv = bias.values();
  std::vector<double> out(m);
  for (std::size_t i = 0; i < m; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) acc += wv[i * n + j] * xv[j];
    out[i] = acc + bv[i];
  }
  return make_result({m}, std::move(out), {x, weights, bias}, [m, n](detail::Node& self) {
    auto& xn = *self.parents[0];
    auto& wn = *self.parents[1];
    auto& bn = *self.parents[2];
    const auto& g = self.grad;
    if (wants_grad(xn)) {
      auto& gx = xn.grad_buffer();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) gx[j] += wn.value[i * n + j] * g[i];
    }
    if (wants_grad(wn)) {
      auto& gw = wn.grad_buffer();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) gw[i * n + j] += g[i] * xn.value[j];
    }
    if (wants_grad(bn)) {
      auto& gb = bn.grad_buffer();
      for (std::size_t i = 0; i < m; ++i) gb[i] += g[i];
    }
  });
}

Tensor dense_rows(const Tensor& x, const Tensor& weights, const Tensor& bias) {
  require_rank(x, 2, "dense_rows(x)");
  require_rank(weights, 2, "dense_rows(weights)");
  require_rank(bias, 1, "dense_rows(bias)");
  const std::size_t T = x.rows(), n = x.cols(), m = weights.rows();
  if (weights.cols() != n || bias.size() != m) {
    throw ShapeError("dense_rows: weights " + shape_str(weights.shape()) + ", x " +
                     shape_str(x.shape()) + ", bias " + shape_str(bias.shape()));
  }
  auto wv = weights.values();
  auto xv = x.values();
  auto bv = bias.values();
  std::vector<double> out(T * m);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t i = 0; i < m; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += wv[i * n + j] * xv[t * n + j];
      out[t * m + i] = acc + bv[i];
    }
  return make_result({T, m}, std::move(out), {x, weights, bias}, [T, n, m](detail::Node& self) {
    auto& xn = *self.parents[0];
    auto& wn = *self.parents[1];
    auto& bn = *self.parents[2];
    const auto& g = self.grad;
    double* gx = wants_grad(xn) ? xn.grad_buffer().data() : nullptr;
    double* gw = wants_grad(wn) ? wn.grad_buffer().data() : nullptr;
    double* gb = wants_grad(bn) ? bn.grad_buffer().data() : nullptr;
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t i = 0; i < m; ++i) {
        const double gi = g[t * m + i];
        if (gb) gb[i] += gi;
        for (std::size_t j = 0; j < n; ++j) {
          if (gx) gx[t * n + j] += wn.value[i * n + j] * gi;
          if (gw) gw[i * n + j] += gi * xn.value[t * n + j];
        }
      }
  });
}

// ---- elementwise ----------------------------------------------------------

Tensor relu(const Tensor& x) {
  auto xv = x.values();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = xv[i] > 0.0 ? xv[i] : 0.0;
  return make_result(x.shape(), std::move(out), {x}, [](detail::Node& self) {
    auto& xn = *self.parents[0];
    auto& gx = xn.grad_buffer();
    for (std::size_t i = 0; i < gx.size(); ++i)
      if (xn.value[i] > 0.0) gx[i] += self.grad[i];
  });
}

Tensor sigmoid(const Tensor& x) {
  auto xv = x.values();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) {
    const double v = xv[i];
    out[i] = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
  }
  return make_result(x.shape(), std::move(out), {x}, [](detail::Node& self) {
    auto& gx = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < gx.size(); ++i) {
      const double y = self.value[i];
      gx[i] += self.grad[i] * y * (1.0 - y);
    }
  });
}

Tensor tanh(const Tensor& x) {
  auto xv = x.values();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = std::tanh(xv[i]);
  return make_result(x.shape(), std::move(out), {x}, [](detail::Node& self) {
    auto& gx = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < gx.size(); ++i) {
      const double y = self.value[i];
      gx[i] += self.grad[i] * (1.0 - y * y);
    }
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  auto av = a.values();
  auto bv = b.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] + bv[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](detail::Node& self) {
    for (auto& p : self.parents) {
      if (!wants_grad(*p)) continue;
      auto& g = p->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  auto av = a.values();
  auto bv = b.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] - bv[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](detail::Node& self) {
    if (wants_grad(*self.parents[0])) {
      auto& g = self.parents[0]->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (wants_grad(*self.parents[1])) {
      auto& g = self.parents[1]->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  auto av = a.values();
  auto bv = b.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] * bv[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](detail::Node& self) {
    auto& an = *self.parents[0];
    auto& bn = *self.parents[1];
    if (wants_grad(an)) {
      auto& g = an.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * bn.value[i];
    }
    if (wants_grad(bn)) {
      auto& g = bn.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * an.value[i];
    }
  });
}

Tensor elementwise(Elementwise kind, std::span<const Tensor> inputs) {
  const bool binary = kind == Elementwise::add || kind == Elementwise::mul;
  if (inputs.size() != (binary ? 2u : 1u)) {
    throw std::invalid_argument("elementwise: wrong operand count");
  }
  switch (kind) {
    case Elementwise::relu: return relu(inputs[0]);
    case Elementwise::sigmoid: return sigmoid(inputs[0]);
    case Elementwise::tanh: return tanh(inputs[0]);
    case Elementwise::add: return add(inputs[0], inputs[1]);
    case Elementwise::mul: return mul(inputs[0], inputs[1]);
  }
  throw std::invalid_argument("elementwise: unknown kind");
}

Tensor affine(const Tensor& x, double scale, double shift) {
  auto xv = x.values();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = scale * xv[i] + shift;
  return make_result(x.shape(), std::move(out), {x}, [scale](detail::Node& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += scale * self.grad[i];
  });
}

Tensor mask(const Tensor& x, std::vector<double> factors) {
  if (factors.size() != x.size()) throw ShapeError("mask: factor count differs from tensor size");
  auto xv = x.values();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = xv[i] * factors[i];
  return make_result(x.shape(), std::move(out), {x},
                     [f = std::move(factors)](detail::Node& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += f[i] * self.grad[i];
  });
}

// ---- reductions & reshaping ---------------------------------------------

Tensor sum(const Tensor& x) {
  double acc = 0.0;
  for (double v : x.values()) acc += v;
  return make_result({}, {acc}, {x}, [](detail::Node& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (double& v : g) v += self.grad[0];
  });
}

Tensor mean(const Tensor& x) {
  if (x.size() == 0) throw ShapeError("mean: empty tensor");
  const double n = static_cast<double>(x.size());
  double acc = 0.0;
  for (double v : x.values()) acc += v;
  return make_result({}, {acc / n}, {x}, [n](detail::Node& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (double& v : g) v += self.grad[0] / n;
  });
}

Tensor row(const Tensor& x, std::size_t t) {
  require_rank(x, 2, "row");
  const std::size_t C = x.cols();
  if (t >= x.rows()) throw ShapeError("row: index out of range");
  auto xv = x.values();
  std::vector<double> out(xv.begin() + static_cast<std::ptrdiff_t>(t * C),
                          xv.begin() + static_cast<std::ptrdiff_t>((t + 1) * C));
  return make_result({C}, std::move(out), {x}, [t, C](detail::Node& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (std::size_t c = 0; c < C; ++c) g[t * C + c] += self.grad[c];
  });
}

Tensor stack_rows(std::span<const Tensor> rows) {
  if (rows.empty()) throw ShapeError("stack_rows: no rows");
  const std::size_t C = rows[0].size();
  std::vector<double> out;
  out.reserve(rows.size() * C);
  for (const Tensor& r : rows) {
    require_rank(r, 1, "stack_rows");
    if (r.size() != C) throw ShapeError("stack_rows: ragged rows");
    auto v = r.values();
    out.insert(out.end(), v.begin(), v.end());
  }
  std::vector<Tensor> parents(rows.begin(), rows.end());
  return make_result({rows.size(), C}, std::move(out), std::move(parents), [C](detail::Node& self) {
    for (std::size_t r = 0; r < self.parents.size(); ++r) {
      auto& p = *self.parents[r];
      if (!wants_grad(p)) continue;
      auto& g = p.grad_buffer();
      for (std::size_t c = 0; c < C; ++c) g[c] += self.grad[r * C + c];
    }
  });
}

Tensor concat(const Tensor& a, const Tensor& b) {
  require_rank(a, 1, "concat(a)");
  require_rank(b, 1, "concat(b)");
  std::vector<double> out(a.values().begin(), a.values().end());
  out.insert(out.end(), b.values().begin(), b.values().end());
  const std::size_t na = a.size();
  return make_result({na + b.size()}, std::move(out), {a, b}, [na](detail::Node& self) {
    auto& an = *self.parents[0];
    auto& bn = *self.parents[1];
    if (wants_grad(an)) {
      auto& g = an.grad_buffer();
      for (std::size_t i = 0; i < na; ++i) g[i] += self.grad[i];
    }
    if (wants_grad(bn)) {
      auto& g = bn.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[na + i];
    }
  });
}

Tensor as_column(const Tensor& x) {
  Shape s;
  if (x.rank() == 1) {
    s = {x.size(), 1};
  } else if (x.rank() == 2 && x.cols() == 1) {
    s = {x.rows()};
  } else {
    throw ShapeError("as_column: expected a vector or a single-column matrix");
  }
  std::vector<double> out(x.values().begin(), x.values().end());
  return make_result(std::move(s), std::move(out), {x}, [](detail::Node& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

// ---- normalization ------------------------------------------------------

namespace {

// Standardizes `n` values spaced by `stride` starting at `base`.
void standardize(const double* x, double* y, std::size_t n, std::size_t stride, double eps,
                 double* inv_std_out) {
  double mu = 0.0;
  for (std::size_t i = 0; i < n; ++i) mu += x[i * stride];
  mu /= static_cast<double>(n);
  double var = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = x[i * stride] - mu;
    var += d * d;
  }
  var /= static_cast<double>(n);
  const double inv = 1.0 / std::sqrt(var + eps);
  for (std::size_t i = 0; i < n; ++i) y[i * stride] = (x[i * stride] - mu) * inv;
  *inv_std_out = inv;
}

void standardize_backward(const double* y, const double* g, double* gx, std::size_t n,
                          std::size_t stride, double inv) {
  double mg = 0.0, mgy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mg += g[i * stride];
    mgy += g[i * stride] * y[i * stride];
  }
  mg /= static_cast<double>(n);
  mgy /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    gx[i * stride] += inv * (g[i * stride] - mg - y[i * stride] * mgy);
  }
}

}  // namespace

Tensor layer_norm_rows(const Tensor& x, double eps) {
  require_rank(x, 2, "layer_norm_rows");
  const std::size_t T = x.rows(), C = x.cols();
  std::vector<double> out(T * C);
  std::vector<double> inv(T);
  for (std::size_t t = 0; t < T; ++t) {
    standardize(x.values().data() + t * C, out.data() + t * C, C, 1, eps, &inv[t]);
  }
  return make_result({T, C}, std::move(out), {x}, [T, C, inv = std::move(inv)](detail::Node& self) {
    auto& gx = self.parents[0]->grad_buffer();
    for (std::size_t t = 0; t < T; ++t) {
      standardize_backward(self.value.data() + t * C, self.grad.data() + t * C, gx.data() + t * C,
                           C, 1, inv[t]);
    }
  });
}

Tensor batch_norm_cols(const Tensor& x, std::span<const double> mean, std::span<const double> var,
                       double eps) {
  require_rank(x, 2, "batch_norm_cols");
  const std::size_t T = x.rows(), C = x.cols();
  std::vector<double> out(T * C);
  std::vector<double> inv(C);
  const bool running = !mean.empty();
  if (running && (mean.size() != C || var.size() != C)) {
    throw ShapeError("batch_norm_cols: running statistics do not match column count");
  }
  for (std::size_t c = 0; c < C; ++c) {
    if (running) {
      inv[c] = 1.0 / std::sqrt(var[c] + eps);
      for (std::size_t t = 0; t < T; ++t) out[t * C + c] = (x.values()[t * C + c] - mean[c]) * inv[c];
    } else {
      standardize(x.values().data() + c, out.data() + c, T, C, eps, &inv[c]);
    }
  }
  return make_result({T, C}, std::move(out), {x},
                     [T, C, running, inv = std::move(inv)](detail::Node& self) {
    auto& gx = self.parents[0]->grad_buffer();
    for (std::size_t c = 0; c < C; ++c) {
      if (running) {
        for (std::size_t t = 0; t < T; ++t) gx[t * C + c] += inv[c] * self.grad[t * C + c];
      } else {
        standardize_backward(self.value.data() + c, self.grad.data() + c, gx.data() + c, T, C, inv[c]);
      }
    }
  });
}

Tensor weight_norm_rows(const Tensor& v, const Tensor& g) {
  require_rank(v, 2, "weight_norm_rows(v)");
  require_rank(g, 1, "weight_norm_rows(g)");
  const std::size_t m = v.rows(), n = v.cols();
  if (g.size() != m) throw ShapeError("weight_norm_rows: gain length differs from row count");
  std::vector<double> out(m * n);
  std::vector<double> norms(m);
  auto vv = v.values();
  for (std::size_t i = 0; i < m; ++i) {
    double ss = 0.0;
    for (std::size_t j = 0; j < n; ++j) ss += vv[i * n + j] * vv[i * n + j];
    norms[i] = std::sqrt(ss);
    const double nrm = norms[i] > 0.0 ? norms[i] : 1.0;
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = g[i] * vv[i * n + j] / nrm;
  }
  return make_result({m, n}, std::move(out), {v, g},
                     [m, n, norms = std::move(norms)](detail::Node& self) {
    auto& vn = *self.parents[0];
    auto& gn = *self.parents[1];
    for (std::size_t i = 0; i < m; ++i) {
      const double nrm = norms[i] > 0.0 ? norms[i] : 1.0;
      double dot = 0.0;  // G_i . u_i
      for (std::size_t j = 0; j < n; ++j) dot += self.grad[i * n + j] * vn.value[i * n + j] / nrm;
      if (wants_grad(gn)) gn.grad_buffer()[i] += dot;
      if (wants_grad(vn)) {
        auto& gv = vn.grad_buffer();
        const double gain = gn.value[i];
        for (std::size_t j = 0; j < n; ++j) {
          const double u = vn.value[i * n + j] / nrm;
          gv[i * n + j] += gain / nrm * (self.grad[i * n + j] - dot * u);
        }
      }
    }
  });
}

}  // namespace volcast::tensor
