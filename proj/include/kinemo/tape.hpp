#pragma once

#include <functional>
#include <vector>

#include "kinemo/linalg.hpp"

namespace kinemo::ad {

/// Dense row-major matrix; row vectors are 1 x n.
struct Tensor {
  std::vector<double> v;
  int rows = 0, cols = 0;

  Tensor() = default;
  Tensor(int r, int c) : v(static_cast<std::size_t>(r) * c, 0.0), rows(r), cols(c) {}

  static Tensor row(std::vector<double> data) {
    Tensor t;
    t.rows = 1;
    t.cols = static_cast<int>(data.size());
    t.v = std::move(data);
    return t;
  }

  double* row_ptr(int r) { return v.data() + static_cast<std::size_t>(r) * cols; }
  const double* row_ptr(int r) const {
    return v.data() + static_cast<std::size_t>(r) * cols;
  }
  int size() const { return rows * cols; }
};

/// Define-by-run reverse-mode tape. Build the forward computation through
/// the ops below, then backward(root) accumulates d root / d param into each
/// param's external gradient buffer. One tape per forward pass; nodes hold
/// values (and gradients during backward), backward closures only indices.
class Tape {
 public:
  using Id = int;

  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}

  Id constant(Tensor t);
  /// Parameter leaf: value is copied in, gradients accumulate into *grad
  /// (same shape) during backward. `grad` may be null when grads are off.
  Id param(const Tensor& value, Tensor* grad);

  /// Y = X W^T + 1 b  with X [n x in], W [out x in], b [1 x out] or -1.
  Id matmul_rows(Id X, Id W, Id b);
  Id tanh_(Id x);
  Id sigmoid_(Id x);
  Id relu_(Id x);
  Id colmax(Id X);      // [n x f] -> [1 x f]
  Id mean_rows(Id X);   // [n x f] -> [1 x f]
  Id concat(const std::vector<Id>& rows);  // 1 x * each -> 1 x sum
  Id stack_rows(const std::vector<Id>& rows);  // k of 1 x n -> k x n
  Id add(Id a, Id b);
  Id scale(Id a, double s);
  Id mean_of(const std::vector<Id>& rows);  // elementwise mean, same shapes
  Id softmax(Id logits);                    // 1 x k
  Id pick_neglog(Id probs, int index);      // scalar -log p[index]
  Id l2_normalize(Id v, double eps);        // 1 x n
  Id sq_norm_diff(Id v, const std::vector<double>& target);            // scalar
  Id norm_diff(Id v, const std::vector<double>& target, double eps);   // scalar
  /// || (p - p_hat) x d_hat || / || d_hat ||  for a 1 x 3 node.
  Id line_distance(Id p, const Vec3& p_hat, const Vec3& d_hat);
  Id bce_with_logits(Id z, double label);   // scalar from scalar logit
  Id add_weighted(const std::vector<Id>& scalars, const std::vector<double>& w);

  const Tensor& value(Id id) const { return nodes_[id].val; }
  bool grad_enabled() const { return grad_enabled_; }
  std::size_t size() const { return nodes_.size(); }

  /// Root must be scalar (1 x 1). Seeds 1 and runs all backward closures in
  /// reverse order, then flushes parameter gradients to their buffers.
  void backward(Id root);

 private:
  struct Node {
    Tensor val;
    Tensor grad;
    bool needs_grad = false;
    std::function<void(Tape&, Id)> back;  // second arg: the node's own id
    Tensor* sink = nullptr;               // param gradient buffer
  };

  Id push(Tensor val, bool needs_grad, std::function<void(Tape&, Id)> back);
  Tensor& grad(Id id) { return nodes_[id].grad; }
  bool needs(Id id) const { return nodes_[id].needs_grad; }
  /// Adds dY into the input's gradient unless the input doesn't need one.
  void accumulate(Id input, const double* dy, int n);

  std::vector<Node> nodes_;
  bool grad_enabled_;
};

}  // namespace kinemo::ad
