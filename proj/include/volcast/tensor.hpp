#pragma once

// Minimal reverse-mode automatic differentiation over dense 1-D and 2-D
// float64 arrays. Every op records a node on an implicit tape; node sequence
// numbers give a topological order (parents are always created first).

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace volcast::tensor {

using Shape = std::vector<std::size_t>;

/// Raised on shape disagreement between operands (no broadcasting).
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised on misuse of the differentiation graph.
class GraphError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

namespace detail {

struct Node;
using BackwardFn = std::function<void(Node&)>;

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until materialized
  bool requires_grad = false;
  bool backward_done = false;
  std::uint64_t seq = 0;
  std::vector<std::shared_ptr<Node>> parents;
  BackwardFn backward;

  std::vector<double>& grad_buffer();
};

}  // namespace detail

class Tensor {
 public:
  Tensor() = default;

  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor vector(std::vector<double> values, bool requires_grad = false);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values,
                       bool requires_grad = false);
  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor scalar(double v, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t size() const;
  std::size_t rows() const;  // rank-2 only
  std::size_t cols() const;  // rank-2 only

  std::span<const double> values() const;
  /// Writable view; only allowed on leaves (parameters and inputs).
  std::span<double> mutable_values();
  double item() const;
  double operator[](std::size_t i) const { return values()[i]; }
  double at(std::size_t r, std::size_t c) const;

  bool requires_grad() const;
  bool is_leaf() const;
  /// Accumulated gradient; empty span when none has been materialized.
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();

  /// Copy of the values with no graph attached.
  Tensor detach() const;

  const std::shared_ptr<detail::Node>& node() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> n) : node_(std::move(n)) {}
  friend Tensor make_result(Shape, std::vector<double>, std::vector<Tensor>, detail::BackwardFn);
  std::shared_ptr<detail::Node> node_;
};

/// Records an op result. `backward` receives the result node (its `grad` is
/// populated) and must accumulate into the parents' grad buffers. It is only
/// stored when some parent requires a gradient.
Tensor make_result(Shape shape, std::vector<double> values, std::vector<Tensor> parents,
                   detail::BackwardFn backward);

/// Reverse traversal from a scalar loss. Calling twice on the same loss is an
/// error; the tape behind the loss is released afterwards.
void backward(const Tensor& loss);

// ---- convolution --------------------------------------------------------

/// out[s] = sum_i filter[i] * x[s - dilation*i], out-of-range x read as 0.
Tensor causal_dilated_conv1d(const Tensor& x, const Tensor& filter, int dilation);

/// Multichannel causal convolution. x: [T x C_in]; weight: [C_out x (k*C_in)]
/// laid out tap-major (column i*C_in + c is tap i, input channel c);
/// bias: [C_out]. Returns [T x C_out].
Tensor causal_conv(const Tensor& x, const Tensor& weight, const Tensor& bias, int kernel,
                   int dilation);

// ---- linear algebra -----------------------------------------------------

/// weights [m x n] * x [n] + bias [m].
Tensor dense(const Tensor& x, const Tensor& weights, const Tensor& bias);
/// weights [m x n] * x [n].
Tensor matvec(const Tensor& weights, const Tensor& x);
/// Row-wise dense: X [T x n] -> [T x m].
Tensor dense_rows(const Tensor& x, const Tensor& weights, const Tensor& bias);

// ---- elementwise ----------------------------------------------------------

enum class Elementwise { relu, sigmoid, tanh, add, mul };

Tensor elementwise(Elementwise kind, std::span<const Tensor> inputs);
Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
/// scale * x + shift.
Tensor affine(const Tensor& x, double scale, double shift);
/// Multiplies by a constant mask of the same shape (no gradient to the mask).
Tensor mask(const Tensor& x, std::vector<double> factors);

// ---- reductions & reshaping ---------------------------------------------

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
/// Row t of a matrix as a vector.
Tensor row(const Tensor& x, std::size_t t);
/// Stacks equal-length vectors into a [n x len] matrix.
Tensor stack_rows(std::span<const Tensor> rows);
/// Concatenates two vectors.
Tensor concat(const Tensor& a, const Tensor& b);
/// Reinterprets a vector of length n as [n x 1] (or back).
Tensor as_column(const Tensor& x);

// ---- normalization ------------------------------------------------------

/// Normalizes each row of X to zero mean and unit variance over its columns.
Tensor layer_norm_rows(const Tensor& x, double eps = 1e-5);
/// Normalizes each column of X over its rows with the given statistics
/// source: batch statistics when `mean`/`var` are empty, else the supplied
/// per-column running statistics (treated as constants).
Tensor batch_norm_cols(const Tensor& x, std::span<const double> mean, std::span<const double> var,
                       double eps = 1e-5);
/// w[i,:] = g[i] * v[i,:] / ||v[i,:]||.
Tensor weight_norm_rows(const Tensor& v, const Tensor& g);

}  // namespace volcast::tensor
