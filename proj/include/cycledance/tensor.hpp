#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "cycledance/errors.hpp"

namespace cycledance {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

/// One record of the dynamic tape. `value` is the saved activation;
/// `recompute` replays it from the inputs' values, `backward` accumulates
/// this node's grad into the inputs' grads. Values are immutable after the
/// initial forward; only `grad` mutates afterwards.
struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // allocated lazily, same length as value
  bool requires_grad = false;
  bool is_leaf = true;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> recompute;
  std::function<void(Node&)> backward;

  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
  }
};

}  // namespace detail

/// Scoped guard that disables graph recording (evaluation / transfer paths).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;
  static bool recording();

 private:
  bool prev_;
};

/// Dense row-major 64-bit float tensor with a gradient slot. Value-semantic
/// handle onto a shared graph node; copying a Tensor aliases the node.
class Tensor {
 public:
  Tensor() = default;

  const Shape& shape() const { return node_->shape; }
  std::size_t ndim() const { return node_->shape.size(); }
  std::size_t size() const { return node_->value.size(); }
  std::size_t dim(std::size_t i) const { return node_->shape[i]; }

  const std::vector<double>& data() const { return node_->value; }
  double item() const;

  bool requires_grad() const { return node_->requires_grad; }
  bool is_leaf() const { return node_->is_leaf; }
  bool has_grad() const { return !node_->grad.empty(); }
  const std::vector<double>& grad() const;
  void zero_grad() {
    if (!node_->grad.empty()) node_->grad.assign(node_->value.size(), 0.0);
  }

  /// In-place value update for leaf parameters (optimizer use only).
  void set_data(const std::vector<double>& values);

  bool defined() const { return static_cast<bool>(node_); }
  detail::Node* node() const { return node_.get(); }
  const std::shared_ptr<detail::Node>& node_ptr() const { return node_; }

  static Tensor wrap(std::shared_ptr<detail::Node> n) {
    Tensor t;
    t.node_ = std::move(n);
    return t;
  }

 private:
  std::shared_ptr<detail::Node> node_;
};

/// Leaf constructors. All reject non-finite values.
Tensor tensor(Shape shape, std::vector<double> data, bool requires_grad = false);
Tensor zeros(Shape shape, bool requires_grad = false);
Tensor full(Shape shape, double value, bool requires_grad = false);
Tensor scalar(double value);

// ---- forward ops suite ----------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor neg(const Tensor& a);
Tensor add_scalar(const Tensor& a, double c);
Tensor mul_scalar(const Tensor& a, double c);

/// [n,m] + [m], broadcast over rows.
Tensor add_rowvec(const Tensor& mat, const Tensor& vec);
/// [n,m] + [n], broadcast over columns (per-channel bias).
Tensor add_colvec(const Tensor& mat, const Tensor& vec);

Tensor matmul(const Tensor& a, const Tensor& b);

/// x: [Cin,T], w: [Cout,Cin,K]; zero padding `pad` on both ends.
Tensor conv1d(const Tensor& x, const Tensor& w, std::size_t stride, std::size_t pad);
/// x: [Cin,H,W], w: [Cout,Cin,KH,KW].
Tensor conv2d(const Tensor& x, const Tensor& w, std::size_t stride_h,
              std::size_t stride_w, std::size_t pad_h, std::size_t pad_w);

/// Channel-to-width sub-pixel upsample: [C*r, T] -> [C, T*r].
Tensor pixel_shuffle1d(const Tensor& x, std::size_t r);
/// [C*r*r, H, W] -> [C, H*r, W*r].
Tensor pixel_shuffle2d(const Tensor& x, std::size_t r);

Tensor sigmoid(const Tensor& a);
Tensor log(const Tensor& a);
Tensor softmax(const Tensor& a, std::size_t axis);
/// Normalizes the last axis; gain/bias are 1-D of that extent.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double eps = 1e-5);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

Tensor reshape(const Tensor& a, Shape new_shape);
Tensor transpose2d(const Tensor& a);
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
/// Slice `len` indices starting at `start` along `axis`.
Tensor narrow(const Tensor& a, std::size_t axis, std::size_t start, std::size_t len);

/// Scalar mean absolute difference.
Tensor l1_distance(const Tensor& a, const Tensor& b);

Tensor clamp(const Tensor& a, double lo, double hi);

/// Gated linear unit: a * sigmoid(b). Shapes must match.
Tensor glu(const Tensor& a, const Tensor& b);

/// Cuts the graph: returns a constant leaf sharing a's values.
Tensor detach(const Tensor& a);

/// Reverse-mode sweep from a scalar loss. Leaf gradients accumulate across
/// calls; interior gradients are reset per call.
void backward(const Tensor& loss);

/// View over the recorded graph reachable from a root, in a topological
/// order where every input precedes its consumers.
class Graph {
 public:
  explicit Graph(const Tensor& root);

  struct NodeInfo {
    const char* op;
    std::vector<std::size_t> input_ids;
    const std::vector<double>* value;
  };

  std::size_t size() const { return order_.size(); }
  std::vector<NodeInfo> nodes() const;

  /// Re-runs every recorded forward from the leaves, in place. Replayed
  /// activations are bit-identical to the saved ones.
  void replay();

 private:
  std::vector<std::shared_ptr<detail::Node>> order_;
};

}  // namespace cycledance
