#pragma once
// Minimal dense tensors and a reverse-mode tape, sized for the four-head model.

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace dingdate {

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0);
  Tensor(std::vector<std::size_t> shape, std::vector<double> values);

  static Tensor matrix(std::size_t rows, std::size_t cols,
                       std::initializer_list<double> values);
  static Tensor vector(std::initializer_list<double> values);

  const std::vector<std::size_t>& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return values_.size(); }
  // 2-D helpers; a rank-1 tensor is treated as a single row.
  std::size_t rows() const noexcept;
  std::size_t cols() const noexcept;

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }
  std::vector<double>& storage() noexcept { return values_; }

  double& operator[](std::size_t i) noexcept { return values_[i]; }
  double operator[](std::size_t i) const noexcept { return values_[i]; }
  double& at(std::size_t r, std::size_t c) noexcept { return values_[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const noexcept { return values_[r * cols() + c]; }

  std::span<const double> row(std::size_t r) const noexcept {
    return std::span<const double>(values_).subspan(r * cols(), cols());
  }
  std::span<double> row(std::size_t r) noexcept {
    return std::span<double>(values_).subspan(r * cols(), cols());
  }

  bool same_shape(const Tensor& other) const noexcept { return shape_ == other.shape_; }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> values_;
};

std::string shape_string(const std::vector<std::size_t>& shape);

/// Handle to a value recorded on a Tape.
struct Var {
  std::size_t index = 0;
};

class Tape;

/// Gradients produced by Tape::backward, one tensor per recorded node.
class Gradients {
 public:
  const Tensor& operator[](Var v) const { return grads_.at(v.index); }

 private:
  friend class Tape;
  std::vector<Tensor> grads_;
};

/// Records forward operations; `backward` replays them in reverse.
///
/// A tape is single-owner. Values are immutable once recorded, so backward can
/// be called any number of times and always produces the same gradients.
class Tape {
 public:
  /// Backward callback of a custom node: receives the upstream gradient of
  /// the node's output and accumulates into the gradients of its inputs.
  using BackwardFn =
      std::function<void(const Tensor& upstream, std::span<Tensor* const> input_grads)>;

  Var leaf(Tensor value);

  const Tensor& value(Var v) const { return nodes_.at(v.index).value; }
  std::size_t size() const noexcept { return nodes_.size(); }

  // x[b x i] * w[i x o] + bias[o]
  Var linear(Var x, Var w, Var bias);
  Var relu(Var x);
  Var sigmoid(Var x);
  // Softmax over the last dimension.
  Var softmax_rows(Var x);
  Var add(Var a, Var b);
  /// Forward a + b; backward routes the gradient to `a` only.
  Var stop_grad_add(Var a, Var detached);
  /// Column-wise concatenation of matrices with equal row counts.
  Var concat_cols(std::span<const Var> parts);
  Var sum(Var x);
  /// sum_i weights[i] * terms[i] over scalar terms.
  Var weighted_sum(std::span<const Var> terms, std::span<const double> weights);
  Var custom(std::vector<Var> inputs, Tensor value, BackwardFn backward);

  /// Reverse-mode gradients of the scalar `loss` with respect to every node.
  Gradients backward(Var loss) const;

 private:
  enum class Op { Leaf, Linear, Relu, Sigmoid, Softmax, Add, StopGradAdd, Concat, Sum,
                  WeightedSum, Custom };

  struct Node {
    Op op;
    Tensor value;
    std::vector<Var> inputs;
    std::vector<double> weights;
    BackwardFn backward;
  };

  Var push(Node node);
  void backprop(const Node& node, const Tensor& upstream, std::vector<Tensor>& grads) const;

  std::vector<Node> nodes_;
};

}  // namespace dingdate
