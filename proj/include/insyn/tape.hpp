#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "insyn/tensor.hpp"

namespace insyn::nn {

// Reverse-mode tape. Ops evaluate eagerly and record a pull-based backward
// closure; backward() walks the tape in reverse and accumulates parameter
// gradients into the bound external tensors. One tape per forward pass.
class Tape {
 public:
  using Ref = int;

  // Leaf bound to external storage: backward adds this node's gradient into
  // external.g. Used for parameters and for inputs whose gradient is checked.
  Ref param(Tensor& external);
  // Tracked copy of a tensor (gradient kept on the tape only).
  Ref input(const Tensor& t);
  // Untracked constant.
  Ref constant(const Tensor& t);
  Ref constant(Tensor&& t);

  Ref matmul(Ref a, Ref b, bool trans_a = false, bool trans_b = false);
  Ref add(Ref a, Ref b);
  Ref sub(Ref a, Ref b);
  Ref mul(Ref a, Ref b);
  Ref add_rowvec(Ref a, Ref row);
  Ref scale(Ref a, double s);
  Ref add_const(Ref a, double s);
  Ref sigmoid(Ref a);
  Ref tanh(Ref a);
  Ref relu(Ref a);
  Ref exp(Ref a);
  Ref square(Ref a);
  // Row-wise softmax. allowed_prefix[i] limits row i to its first k columns
  // (masked entries get weight exactly 0); empty means no mask.
  Ref softmax_rows(Ref a, const std::vector<int>& allowed_prefix = {});
  Ref layer_norm(Ref x, Ref gamma, Ref beta, double eps = 1e-5);
  Ref concat_cols(Ref a, Ref b);
  Ref slice_cols(Ref a, int c0, int c1);
  Ref slice_rows(Ref a, int r0, int r1);
  Ref concat_rows(const std::vector<Ref>& parts);
  Ref tile_rows(Ref row, int n);
  Ref embed_rows(Ref table, const std::vector<int>& indices);
  // Max over an axis; backward routes gradient to the (first) argmax only.
  // axis 0 -> [1, cols], axis 1 -> [rows, 1].
  Ref max_axis(Ref a, int axis);
  Ref sum_all(Ref a);
  Ref mean_all(Ref a);

  // mean over all elements of (a - b)^2
  Ref mse(Ref a, Ref b) { return mean_all(square(sub(a, b))); }
  Ref dense(Ref x, Ref w, Ref b) { return add_rowvec(matmul(x, w), b); }

  void backward(Ref scalar_loss);

  const Tensor& val(Ref r) const { return nodes_[r].t; }
  const Tensor& grad_holder(Ref r) const { return nodes_[r].t; }
  double scalar(Ref r) const { return nodes_[r].t.v[0]; }
  size_t num_nodes() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor t;  // value in t.v, upstream gradient accumulates in t.g
    bool needs_grad = false;
    Tensor* external = nullptr;
    std::function<void()> backward;
  };

  Ref push(Tensor t, bool needs_grad);
  bool tracked(Ref r) const { return nodes_[r].needs_grad; }

  std::vector<Node> nodes_;
};

}  // namespace insyn::nn
