#include "dingdate/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dingdate/error.hpp"
#include "dingdate/kernels.hpp"

namespace dingdate {
namespace {

std::size_t product(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(Errc::ShapeMismatch, what);
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape, double fill)
    : shape_(std::move(shape)), values_(product(shape_), fill) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  require(values_.size() == product(shape_),
          "value count " + std::to_string(values_.size()) + " does not match shape " +
              shape_string(shape_));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::initializer_list<double> values) {
  return Tensor({rows, cols}, std::vector<double>(values));
}

Tensor Tensor::vector(std::initializer_list<double> values) {
  return Tensor({values.size()}, std::vector<double>(values));
}

std::size_t Tensor::rows() const noexcept {
  if (shape_.size() < 2) return 1;
  return shape_[0];
}

std::size_t Tensor::cols() const noexcept {
  if (shape_.empty()) return 1;
  return shape_.back();
}

std::string shape_string(const std::vector<std::size_t>& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var{nodes_.size() - 1};
}

Var Tape::leaf(Tensor value) { return push({Op::Leaf, std::move(value), {}, {}, {}}); }

Var Tape::linear(Var x, Var w, Var bias) {
  const Tensor& xv = value(x);
  const Tensor& wv = value(w);
  const Tensor& bv = value(bias);
  require(xv.rank() == 2 && wv.rank() == 2 && bv.rank() == 1, "linear expects x[b x i], w[i x o], bias[o]");
  require(xv.cols() == wv.rows(), "linear: x " + shape_string(xv.shape()) + " vs w " +
                                      shape_string(wv.shape()));
  require(bv.size() == wv.cols(), "linear: bias size does not match output width");
  const std::size_t b = xv.rows();
  const std::size_t i = xv.cols();
  const std::size_t o = wv.cols();
  Tensor out({b, o});
  for (std::size_t r = 0; r < b; ++r) std::copy(bv.values().begin(), bv.values().end(), out.row(r).begin());
  kernels::gemm_nn(xv.values(), wv.values(), out.values(), b, i, o);
  return push({Op::Linear, std::move(out), {x, w, bias}, {}, {}});
}

Var Tape::relu(Var x) {
  Tensor out = value(x);
  for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
  return push({Op::Relu, std::move(out), {x}, {}, {}});
}

Var Tape::sigmoid(Var x) {
  Tensor out = value(x);
  for (double& v : out.values()) {
    v = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
  }
  return push({Op::Sigmoid, std::move(out), {x}, {}, {}});
}

Var Tape::softmax_rows(Var x) {
  Tensor out = value(x);
  const std::size_t rows = out.size() / out.cols();
  for (std::size_t r = 0; r < rows; ++r) {
    auto row = out.row(r);
    const double mx = *std::max_element(row.begin(), row.end());
    double total = 0.0;
    for (double& v : row) {
      v = std::exp(v - mx);
      total += v;
    }
    for (double& v : row) v /= total;
  }
  return push({Op::Softmax, std::move(out), {x}, {}, {}});
}

Var Tape::add(Var a, Var b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  require(av.same_shape(bv), "add: " + shape_string(av.shape()) + " vs " + shape_string(bv.shape()));
  Tensor out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  return push({Op::Add, std::move(out), {a, b}, {}, {}});
}

Var Tape::stop_grad_add(Var a, Var detached) {
  const Tensor& av = value(a);
  const Tensor& bv = value(detached);
  require(av.same_shape(bv),
          "stop_grad_add: " + shape_string(av.shape()) + " vs " + shape_string(bv.shape()));
  Tensor out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  return push({Op::StopGradAdd, std::move(out), {a, detached}, {}, {}});
}

Var Tape::concat_cols(std::span<const Var> parts) {
  require(!parts.empty(), "concat of nothing");
  const std::size_t rows = value(parts.front()).rows();
  std::size_t width = 0;
  for (Var p : parts) {
    require(value(p).rank() == 2 && value(p).rows() == rows, "concat: row counts differ");
    width += value(p).cols();
  }
  Tensor out({rows, width});
  for (std::size_t r = 0; r < rows; ++r) {
    auto dst = out.row(r).begin();
    for (Var p : parts) {
      auto src = value(p).row(r);
      dst = std::copy(src.begin(), src.end(), dst);
    }
  }
  return push({Op::Concat, std::move(out), {parts.begin(), parts.end()}, {}, {}});
}

Var Tape::sum(Var x) {
  Tensor out({1}, kernels::pairwise_sum(value(x).values()));
  return push({Op::Sum, std::move(out), {x}, {}, {}});
}

Var Tape::weighted_sum(std::span<const Var> terms, std::span<const double> weights) {
  require(terms.size() == weights.size(), "weighted_sum: term/weight count mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    require(value(terms[i]).size() == 1, "weighted_sum expects scalar terms");
    total += weights[i] * value(terms[i])[0];
  }
  return push({Op::WeightedSum, Tensor({1}, total), {terms.begin(), terms.end()},
               {weights.begin(), weights.end()}, {}});
}

Var Tape::custom(std::vector<Var> inputs, Tensor value, BackwardFn backward) {
  return push({Op::Custom, std::move(value), std::move(inputs), {}, std::move(backward)});
}

Gradients Tape::backward(Var loss) const {
  if (value(loss).size() != 1) {
    throw Error(Errc::NotScalar, "backward from a tensor of shape " + shape_string(value(loss).shape()));
  }
  Gradients out;
  out.grads_.reserve(nodes_.size());
  for (const Node& n : nodes_) out.grads_.emplace_back(n.value.shape());
  out.grads_[loss.index][0] = 1.0;
  for (std::size_t i = loss.index + 1; i-- > 0;) {
    backprop(nodes_[i], out.grads_[i], out.grads_);
  }
  return out;
}

void Tape::backprop(const Node& node, const Tensor& upstream, std::vector<Tensor>& grads) const {
  switch (node.op) {
    case Op::Leaf:
      return;
    case Op::Linear: {
      const Tensor& x = value(node.inputs[0]);
      const Tensor& w = value(node.inputs[1]);
      const std::size_t b = x.rows();
      const std::size_t i = x.cols();
      const std::size_t o = w.cols();
      kernels::gemm_nt(upstream.values(), w.values(), grads[node.inputs[0].index].values(), b, o, i);
      kernels::gemm_tn(x.values(), upstream.values(), grads[node.inputs[1].index].values(), b, i, o);
      Tensor& gb = grads[node.inputs[2].index];
      for (std::size_t r = 0; r < b; ++r) {
        kernels::axpy(1.0, upstream.row(r), gb.values());
      }
      return;
    }
    case Op::Relu: {
      Tensor& gx = grads[node.inputs[0].index];
      const Tensor& x = value(node.inputs[0]);
      for (std::size_t k = 0; k < x.size(); ++k) {
        if (x[k] > 0.0) gx[k] += upstream[k];
      }
      return;
    }
    case Op::Sigmoid: {
      Tensor& gx = grads[node.inputs[0].index];
      for (std::size_t k = 0; k < node.value.size(); ++k) {
        const double s = node.value[k];
        gx[k] += upstream[k] * s * (1.0 - s);
      }
      return;
    }
    case Op::Softmax: {
      Tensor& gx = grads[node.inputs[0].index];
      const std::size_t cols = node.value.cols();
      const std::size_t rows = node.value.size() / cols;
      for (std::size_t r = 0; r < rows; ++r) {
        const double* s = node.value.values().data() + r * cols;
        const double* g = upstream.values().data() + r * cols;
        double inner = 0.0;
        for (std::size_t c = 0; c < cols; ++c) inner += s[c] * g[c];
        for (std::size_t c = 0; c < cols; ++c) gx[r * cols + c] += s[c] * (g[c] - inner);
      }
      return;
    }
    case Op::Add:
      kernels::axpy(1.0, upstream.values(), grads[node.inputs[0].index].values());
      kernels::axpy(1.0, upstream.values(), grads[node.inputs[1].index].values());
      return;
    case Op::StopGradAdd:
      kernels::axpy(1.0, upstream.values(), grads[node.inputs[0].index].values());
      return;
    case Op::Concat: {
      const std::size_t rows = node.value.rows();
      std::size_t offset = 0;
      for (Var p : node.inputs) {
        Tensor& gp = grads[p.index];
        const std::size_t w = gp.cols();
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t c = 0; c < w; ++c) gp.at(r, c) += upstream.at(r, offset + c);
        }
        offset += w;
      }
      return;
    }
    case Op::Sum: {
      Tensor& gx = grads[node.inputs[0].index];
      for (double& v : gx.values()) v += upstream[0];
      return;
    }
    case Op::WeightedSum:
      for (std::size_t k = 0; k < node.inputs.size(); ++k) {
        grads[node.inputs[k].index][0] += node.weights[k] * upstream[0];
      }
      return;
    case Op::Custom: {
      std::vector<Tensor*> targets;
      targets.reserve(node.inputs.size());
      for (Var v : node.inputs) targets.push_back(&grads[v.index]);
      node.backward(upstream, targets);
      return;
    }
  }
}

}  // namespace dingdate
