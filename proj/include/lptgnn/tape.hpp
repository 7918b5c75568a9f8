#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "lptgnn/tensor.hpp"

namespace lptgnn {

// Handle to a node on a Tape.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

// Reverse-mode autodiff over a linear tape of tensor operations. A Tape is
// built per forward pass; backward() accumulates gradients into every node
// reachable from the loss, and leaves created with requires_grad expose them
// through grad().
class Tape {
public:
  Var leaf(Tensor value, bool requires_grad = false);

  // Elementwise, identical shapes.
  Var add(Var a, Var b);
  Var scale(Var x, double factor);
  // bias shape must equal the trailing modes of x; broadcast over the rest.
  Var add_bias(Var x, Var bias);
  // Elementwise product with right-aligned broadcasting (extents must match
  // or be 1 on either side).
  Var mul(Var a, Var b);
  Var matmul(Var a, Var b);
  Var relu(Var x);
  Var permute(Var x, const std::vector<int>& perm);
  Var reshape(Var x, Shape shape);
  Var sum_axis(Var x, int axis);
  Var sum_all(Var x);
  // Maximum over the leading axis; ties resolve to the lowest index.
  Var max_axis0(Var x);
  // Stack same-shape inputs along a new leading axis.
  Var stack_rows(const std::vector<Var>& rows);
  // Row means per group: x is (B, d), output (G, d). Groups must be
  // nonempty; indices may repeat across groups.
  Var aggregate_rows(Var x, const std::vector<std::vector<std::int64_t>>& groups);
  // x (C, H, W), weight (O, C, k, k) with odd k, bias (O); stride 1 and zero
  // padding k/2 keep the spatial extent.
  Var conv2d(Var x, Var weight, Var bias);
  // 2x2 window, stride 2, trailing rows/columns dropped.
  Var maxpool2d(Var x);

  struct BatchNormStats {
    Tensor mean;
    Tensor var;
  };
  // x (B, d); normalizes with biased batch statistics. When stats is given
  // the batch mean/variance are copied out for running-average updates.
  Var batchnorm_train(Var x, Var gamma, Var beta, BatchNormStats* stats = nullptr);
  Var batchnorm_eval(Var x, Var gamma, Var beta, const Tensor& running_mean,
                     const Tensor& running_var);
  // Sum over rows of cross-entropy between softmax(logits) and labels.
  Var softmax_ce_sum(Var logits, const std::vector<int>& labels);

  const Tensor& value(Var v) const;
  const Tensor& grad(Var v) const;
  bool has_grad(Var v) const;

  // Seeds d(loss)/d(loss) = 1 and sweeps the tape in reverse. loss must be
  // scalar; may be called once per tape.
  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }

private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool grad_alloc = false;
    bool requires_grad = false;
    std::function<void(Tape&, int)> backprop;
  };

  Var push(Tensor value, bool requires_grad, std::function<void(Tape&, int)> backprop);
  Node& node(Var v);
  const Node& node(Var v) const;
  Tensor& grad_buffer(int id);
  void accumulate(int id, const Tensor& delta);

  std::vector<Node> nodes_;
  bool swept_ = false;
};

// Broadcast result shape under right-aligned rules, or throws ShapeError.
Shape broadcast_shape(const Shape& a, const Shape& b);
// Sum src over broadcast modes so the result has the target shape.
Tensor reduce_to_shape(const Tensor& src, const Shape& target);

// Row-wise softmax of a (B, C) matrix (plain value helper, no tape).
Tensor softmax_rows(const Tensor& logits);

inline constexpr double kBatchNormEps = 1e-5;

}  // namespace lptgnn
