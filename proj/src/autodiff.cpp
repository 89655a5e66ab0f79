#include "mtpano/autodiff.hpp"

#include <cmath>
#include <sstream>
#include <unordered_set>

#include "mtpano/error.hpp"

namespace mtpano::nn {

using detail::Node;
using NodePtr = std::shared_ptr<Node>;
using ConstMatMap = Eigen::Map<const RowMatrix>;
using MatMap = Eigen::Map<RowMatrix>;

std::string Shape::str() const {
  std::ostringstream s;
  s << "(" << c << ", " << h << ", " << w << ")";
  return s.str();
}

namespace {

NodePtr leaf(Shape shape, Eigen::ArrayXd values, bool requires_grad) {
  if (values.size() != shape.size()) {
    throw ContractError("tensor values do not match shape " + shape.str());
  }
  auto n = std::make_shared<Node>();
  n->shape = shape;
  n->value = std::move(values);
  n->requires_grad = requires_grad;
  return n;
}

Tensor make(Shape shape, Eigen::ArrayXd value, std::vector<NodePtr> parents,
            std::function<void(Node&)> backward_fn) {
  auto n = std::make_shared<Node>();
  n->shape = shape;
  n->value = std::move(value);
  for (const auto& p : parents) n->requires_grad = n->requires_grad || p->requires_grad;
  if (n->requires_grad) {
    n->parents = std::move(parents);
    n->backward = std::move(backward_fn);
  }
  return Tensor(std::move(n));
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!(a.shape() == b.shape())) {
    throw ContractError(std::string(op) + ": shape mismatch " + a.shape().str() + " vs " + b.shape().str());
  }
}

ConstMatMap as_matrix(const Eigen::ArrayXd& v, int rows, int cols) { return {v.data(), rows, cols}; }
MatMap as_matrix(Eigen::ArrayXd& v, int rows, int cols) { return {v.data(), rows, cols}; }

}  // namespace

Tensor Tensor::constant(Shape shape, Eigen::ArrayXd values) {
  return Tensor(leaf(shape, std::move(values), false));
}

Tensor Tensor::parameter(Shape shape, Eigen::ArrayXd values) {
  return Tensor(leaf(shape, std::move(values), true));
}

Tensor Tensor::constant(const RowMatrix& m) {
  Eigen::ArrayXd v = Eigen::Map<const Eigen::ArrayXd>(m.data(), m.size());
  return constant({1, static_cast<int>(m.rows()), static_cast<int>(m.cols())}, std::move(v));
}

Tensor Tensor::parameter(const RowMatrix& m) {
  Eigen::ArrayXd v = Eigen::Map<const Eigen::ArrayXd>(m.data(), m.size());
  return parameter({1, static_cast<int>(m.rows()), static_cast<int>(m.cols())}, std::move(v));
}

Eigen::ArrayXd Gradients::of(const Tensor& t) const {
  const auto it = grads_.find(t.node().get());
  if (it == grads_.end()) return Eigen::ArrayXd::Zero(t.shape().size());
  return it->second;
}

Gradients backward(const Tensor& loss) {
  if (loss.shape().size() != 1) throw ContractError("backward: loss must be a scalar");
  // Iterative post-order DFS; only nodes that require gradients are visited.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack;
  Node* root = loss.node().get();
  Gradients out;
  if (!root->requires_grad) return out;
  stack.emplace_back(root, 0);
  seen.insert(root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  for (Node* n : order) n->grad = Eigen::ArrayXd::Zero(n->value.size());
  root->grad[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->backward) (*it)->backward(**it);
  }
  for (Node* n : order) {
    out.grads_[n] = n->grad;
  }
  for (Node* n : order) n->grad.resize(0);
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  return make(a.shape(), a.value() + b.value(), {a.node(), b.node()}, [](Node& self) {
    for (auto& p : self.parents)
      if (p->requires_grad) p->grad += self.grad;
  });
}

Tensor add_bias(const Tensor& a, const Tensor& b) {
  const int rows = a.shape().rows(), cols = a.shape().cols();
  if (b.shape().size() != rows) throw ContractError("add_bias: bias must have one entry per row");
  Eigen::ArrayXd out = a.value();
  as_matrix(out, rows, cols).colwise() += as_matrix(b.value(), rows, 1).col(0);
  return make(a.shape(), std::move(out), {a.node(), b.node()}, [rows, cols](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    if (pa.requires_grad) pa.grad += self.grad;
    if (pb.requires_grad) {
      as_matrix(pb.grad, rows, 1).col(0) += as_matrix(self.grad, rows, cols).rowwise().sum();
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  return make(a.shape(), a.value() * b.value(), {a.node(), b.node()}, [](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    if (pa.requires_grad) pa.grad += self.grad * pb.value;
    if (pb.requires_grad) pb.grad += self.grad * pa.value;
  });
}

Tensor scale(const Tensor& a, double s) {
  return make(a.shape(), a.value() * s, {a.node()}, [s](Node& self) { self.parents[0]->grad += self.grad * s; });
}

Tensor tanh(const Tensor& a) {
  return make(a.shape(), a.value().tanh(), {a.node()}, [](Node& self) {
    self.parents[0]->grad += self.grad * (1.0 - self.value.square());
  });
}

Tensor matmul(const Tensor& a, const Tensor& b, bool transpose_b) {
  const int m = a.shape().rows(), k = a.shape().cols();
  const int br = b.shape().rows(), bc = b.shape().cols();
  const int inner = transpose_b ? bc : br;
  const int n = transpose_b ? br : bc;
  if (inner != k) {
    throw ContractError("matmul: inner dimensions differ " + a.shape().str() + " x " + b.shape().str() +
                        (transpose_b ? "^T" : ""));
  }
  Eigen::ArrayXd out(m * n);
  if (transpose_b) {
    as_matrix(out, m, n).noalias() = a.matrix() * b.matrix().transpose();
  } else {
    as_matrix(out, m, n).noalias() = a.matrix() * b.matrix();
  }
  return make({1, m, n}, std::move(out), {a.node(), b.node()}, [m, k, n, br, bc, transpose_b](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    const auto g = as_matrix(self.grad, m, n);
    const auto av = as_matrix(pa.value, m, k);
    const auto bv = as_matrix(pb.value, br, bc);
    if (pa.requires_grad) {
      if (transpose_b) as_matrix(pa.grad, m, k).noalias() += g * bv;
      else as_matrix(pa.grad, m, k).noalias() += g * bv.transpose();
    }
    if (pb.requires_grad) {
      if (transpose_b) as_matrix(pb.grad, br, bc).noalias() += g.transpose() * av;
      else as_matrix(pb.grad, br, bc).noalias() += av.transpose() * g;
    }
  });
}

Tensor transpose(const Tensor& a) {
  const int r = a.shape().rows(), c = a.shape().cols();
  Eigen::ArrayXd out(r * c);
  as_matrix(out, c, r) = a.matrix().transpose();
  return make({1, c, r}, std::move(out), {a.node()}, [r, c](Node& self) {
    as_matrix(self.parents[0]->grad, r, c) += as_matrix(self.grad, c, r).transpose();
  });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape.size() != a.shape().size()) {
    throw ContractError("reshape: " + a.shape().str() + " -> " + shape.str() + " changes size");
  }
  return make(shape, a.value(), {a.node()}, [](Node& self) { self.parents[0]->grad += self.grad; });
}

Tensor slice_rows(const Tensor& a, int begin, int count) {
  const int rows = a.shape().rows(), cols = a.shape().cols();
  if (begin < 0 || count < 0 || begin + count > rows) throw ContractError("slice_rows: out of range");
  const int offset = begin * cols, len = count * cols;
  return make({1, count, cols}, a.value().segment(offset, len), {a.node()}, [offset, len](Node& self) {
    self.parents[0]->grad.segment(offset, len) += self.grad;
  });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ContractError("concat_rows: no inputs");
  const int cols = parts.front().shape().cols();
  int rows = 0;
  std::vector<NodePtr> parents;
  for (const auto& p : parts) {
    if (p.shape().cols() != cols) throw ContractError("concat_rows: column counts differ");
    rows += p.shape().rows();
    parents.push_back(p.node());
  }
  Eigen::ArrayXd out(rows * cols);
  int offset = 0;
  for (const auto& p : parts) {
    out.segment(offset, p.shape().size()) = p.value();
    offset += p.shape().size();
  }
  return make({1, rows, cols}, std::move(out), std::move(parents), [](Node& self) {
    int off = 0;
    for (auto& p : self.parents) {
      const int len = static_cast<int>(p->value.size());
      if (p->requires_grad) p->grad += self.grad.segment(off, len);
      off += len;
    }
  });
}

Tensor softmax_rows(const Tensor& a) {
  const int rows = a.shape().rows(), cols = a.shape().cols();
  Eigen::ArrayXd out(rows * cols);
  auto y = as_matrix(out, rows, cols);
  const auto x = a.matrix();
  for (int r = 0; r < rows; ++r) {
    const double mx = x.row(r).maxCoeff();
    y.row(r) = (x.row(r).array() - mx).exp().matrix();
    y.row(r) /= y.row(r).sum();
  }
  return make(a.shape(), std::move(out), {a.node()}, [rows, cols](Node& self) {
    const auto yv = as_matrix(self.value, rows, cols);
    const auto g = as_matrix(self.grad, rows, cols);
    auto gx = as_matrix(self.parents[0]->grad, rows, cols);
    for (int r = 0; r < rows; ++r) {
      const double dot = g.row(r).dot(yv.row(r));
      gx.row(r).array() += yv.row(r).array() * (g.row(r).array() - dot);
    }
  });
}

Tensor depthwise_conv2d(const Tensor& x, const Tensor& kernel) {
  const Shape xs = x.shape(), ks = kernel.shape();
  if (ks.c != xs.c) throw ContractError("depthwise_conv2d: kernel channels differ from input");
  if (ks.h % 2 == 0 || ks.w % 2 == 0) throw ContractError("depthwise_conv2d: kernel dims must be odd");
  if (ks.w > xs.w) throw ContractError("depthwise_conv2d: kernel wider than input");
  const int C = xs.c, H = xs.h, W = xs.w, KH = ks.h, KW = ks.w;
  const int ry = KH / 2, rx = KW / 2;
  auto xi = [=](int c, int i, int j) {
    i = std::clamp(i, 0, H - 1);
    j = ((j % W) + W) % W;
    return (c * H + i) * W + j;
  };
  auto ki = [=](int c, int a, int b) { return (c * KH + a) * KW + b; };

  Eigen::ArrayXd out = Eigen::ArrayXd::Zero(xs.size());
  const Eigen::ArrayXd& xv = x.value();
  const Eigen::ArrayXd& kv = kernel.value();
  for (int c = 0; c < C; ++c)
    for (int i = 0; i < H; ++i)
      for (int j = 0; j < W; ++j) {
        double acc = 0;
        for (int a = 0; a < KH; ++a)
          for (int b = 0; b < KW; ++b) acc += kv[ki(c, a, b)] * xv[xi(c, i + a - ry, j + b - rx)];
        out[(c * H + i) * W + j] = acc;
      }

  return make(xs, std::move(out), {x.node(), kernel.node()}, [=](Node& self) {
    Node& px = *self.parents[0];
    Node& pk = *self.parents[1];
    for (int c = 0; c < C; ++c)
      for (int i = 0; i < H; ++i)
        for (int j = 0; j < W; ++j) {
          const double g = self.grad[(c * H + i) * W + j];
          if (g == 0) continue;
          for (int a = 0; a < KH; ++a)
            for (int b = 0; b < KW; ++b) {
              const int src = xi(c, i + a - ry, j + b - rx);
              if (px.requires_grad) px.grad[src] += g * pk.value[ki(c, a, b)];
              if (pk.requires_grad) pk.grad[ki(c, a, b)] += g * px.value[src];
            }
        }
  });
}

Tensor affine_modulate(const Tensor& f, const Tensor& gamma, const Tensor& beta) {
  require_same_shape(f, gamma, "affine_modulate");
  require_same_shape(f, beta, "affine_modulate");
  Eigen::ArrayXd out = (1.0 + gamma.value()) * f.value() + beta.value();
  return make(f.shape(), std::move(out), {f.node(), gamma.node(), beta.node()}, [](Node& self) {
    Node& pf = *self.parents[0];
    Node& pg = *self.parents[1];
    Node& pb = *self.parents[2];
    if (pf.requires_grad) pf.grad += self.grad * (1.0 + pg.value);
    if (pg.requires_grad) pg.grad += self.grad * pf.value;
    if (pb.requires_grad) pb.grad += self.grad;
  });
}

Tensor stop_gradient(const Tensor& a) { return Tensor::constant(a.shape(), a.value()); }

Tensor masked_mean(const Tensor& a, const Eigen::ArrayXd& mask) {
  if (mask.size() != a.shape().size()) throw ContractError("masked_mean: mask size differs from tensor");
  const Eigen::ArrayXd ind = (mask != 0).cast<double>();
  const double n = ind.sum();
  if (n == 0) return Tensor::scalar(0.0);
  Eigen::ArrayXd out(1);
  out[0] = (a.value() * ind).sum() / n;
  return make({1, 1, 1}, std::move(out), {a.node()}, [ind, n](Node& self) {
    self.parents[0]->grad += ind * (self.grad[0] / n);
  });
}

Tensor l1_loss(const Tensor& pred, const Tensor& target, const Eigen::ArrayXd& mask) {
  require_same_shape(pred, target, "l1_loss");
  if (mask.size() != pred.shape().size()) throw ContractError("l1_loss: mask size differs from tensor");
  const Eigen::ArrayXd ind = (mask != 0).cast<double>();
  const double n = ind.sum();
  if (n == 0) return Tensor::scalar(0.0);
  const Eigen::ArrayXd diff = pred.value() - target.value();
  Eigen::ArrayXd out(1);
  out[0] = (diff.abs() * ind).sum() / n;
  return make({1, 1, 1}, std::move(out), {pred.node(), target.node()}, [ind, n, diff](Node& self) {
    const Eigen::ArrayXd g = diff.sign() * ind * (self.grad[0] / n);
    if (self.parents[0]->requires_grad) self.parents[0]->grad += g;
    if (self.parents[1]->requires_grad) self.parents[1]->grad -= g;
  });
}

Tensor cross_entropy(const Tensor& logits, const Eigen::ArrayXi& labels, const Eigen::ArrayXd& mask) {
  const int C = logits.shape().c, P = logits.shape().h * logits.shape().w;
  if (labels.size() != P || mask.size() != P) throw ContractError("cross_entropy: labels/mask size differs from pixels");
  if ((labels < 0).any() || (labels >= C).any()) throw ContractError("cross_entropy: label out of range");
  const Eigen::ArrayXd ind = (mask != 0).cast<double>();
  const double n = ind.sum();
  if (n == 0) return Tensor::scalar(0.0);
  // Logits are channel-major: value[c * P + p].
  const auto z = as_matrix(logits.value(), C, P);
  RowMatrix prob(C, P);
  double total = 0;
  for (int p = 0; p < P; ++p) {
    const double mx = z.col(p).maxCoeff();
    prob.col(p) = (z.col(p).array() - mx).exp().matrix();
    const double s = prob.col(p).sum();
    prob.col(p) /= s;
    if (ind[p] != 0) total += (mx + std::log(s)) - z(labels[p], p);
  }
  Eigen::ArrayXd out(1);
  out[0] = total / n;
  return make({1, 1, 1}, std::move(out), {logits.node()}, [prob, labels, ind, n, C, P](Node& self) {
    auto g = as_matrix(self.parents[0]->grad, C, P);
    const double scale_g = self.grad[0] / n;
    for (int p = 0; p < P; ++p) {
      if (ind[p] == 0) continue;
      g.col(p) += prob.col(p) * scale_g;
      g(labels[p], p) -= scale_g;
    }
  });
}

}  // namespace mtpano::nn
