#pragma once

// Minimal reverse-mode differentiation over dense double arrays.
//
// A Tensor is a shared handle to a graph node. Shapes are (channels, height, width);
// token matrices use (1, tokens, dim). Matrix-style ops view a tensor as a
// (channels * height) x width row-major matrix.
//
// A graph instance is single-threaded. Independent graphs may run concurrently.

#include <Eigen/Core>

#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

namespace mtpano::nn {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Shape {
  int c = 1;
  int h = 1;
  int w = 1;

  int size() const { return c * h * w; }
  int rows() const { return c * h; }
  int cols() const { return w; }
  bool operator==(const Shape&) const = default;
  std::string str() const;
};

namespace detail {
struct Node {
  Shape shape;
  Eigen::ArrayXd value;
  Eigen::ArrayXd grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;
};
}  // namespace detail

class Tensor {
 public:
  Tensor() = default;

  static Tensor constant(Shape shape, Eigen::ArrayXd values);
  static Tensor parameter(Shape shape, Eigen::ArrayXd values);
  static Tensor constant(const RowMatrix& m);
  static Tensor parameter(const RowMatrix& m);
  static Tensor scalar(double v) { return constant({1, 1, 1}, Eigen::ArrayXd::Constant(1, v)); }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  bool requires_grad() const { return node_->requires_grad; }
  const Eigen::ArrayXd& value() const { return node_->value; }
  /// In-place access for optimizers and finite differences; never call mid-backward.
  Eigen::ArrayXd& mutable_value() { return node_->value; }
  double item() const { return node_->value[0]; }

  Eigen::Map<const RowMatrix> matrix() const {
    return {node_->value.data(), node_->shape.rows(), node_->shape.cols()};
  }

  const std::shared_ptr<detail::Node>& node() const { return node_; }
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<detail::Node> node_;
};

/// Gradients of one scalar with respect to every tensor its reverse pass reached.
class Gradients {
 public:
  /// d(loss)/d(t); exactly zero for tensors the reverse pass never reached.
  Eigen::ArrayXd of(const Tensor& t) const;
  bool reached(const Tensor& t) const { return grads_.count(t.node().get()) != 0; }

 private:
  friend Gradients backward(const Tensor& loss);
  std::unordered_map<const detail::Node*, Eigen::ArrayXd> grads_;
};

/// Reverse pass from a scalar loss.
Gradients backward(const Tensor& loss);

Tensor add(const Tensor& a, const Tensor& b);
/// a (rows x cols) + b (rows x 1), broadcast along columns.
Tensor add_bias(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor tanh(const Tensor& a);
/// Matrix product of the 2D views; transpose_b multiplies by b^T.
Tensor matmul(const Tensor& a, const Tensor& b, bool transpose_b = false);
Tensor transpose(const Tensor& a);
Tensor reshape(const Tensor& a, Shape shape);
Tensor slice_rows(const Tensor& a, int begin, int count);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor softmax_rows(const Tensor& a);

/// Per-channel ("depthwise") 2D cross-correlation of x (C, H, W) with kernel (C, kh, kw),
/// odd kh/kw, same-size output. Columns wrap around (equirectangular seam), rows replicate.
Tensor depthwise_conv2d(const Tensor& x, const Tensor& kernel);

/// (1 + gamma) * f + beta, all of one shape.
Tensor affine_modulate(const Tensor& f, const Tensor& gamma, const Tensor& beta);

/// Forward identity; contributes nothing to upstream gradients.
Tensor stop_gradient(const Tensor& a);

/// Mean of a over entries where mask != 0. An empty mask yields the constant 0.
Tensor masked_mean(const Tensor& a, const Eigen::ArrayXd& mask);
/// Masked mean of |pred - target|.
Tensor l1_loss(const Tensor& pred, const Tensor& target, const Eigen::ArrayXd& mask);
/// Per-pixel softmax cross-entropy of logits (C, H, W) against labels (H * W), masked mean.
Tensor cross_entropy(const Tensor& logits, const Eigen::ArrayXi& labels, const Eigen::ArrayXd& mask);

}  // namespace mtpano::nn
