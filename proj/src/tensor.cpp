#include "docnmt/tensor.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <unordered_set>

namespace docnmt {

namespace {

using detail::Node;
using NodePtr = std::shared_ptr<Node>;
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

thread_local bool g_grad_enabled = true;

NodePtr make_node(Shape shape, std::vector<double> value) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  return node;
}

// Wraps an op result; records parents and the backward closure only when some
// input needs a gradient and recording is enabled.
Tensor make_result(Shape shape, std::vector<double> value, std::initializer_list<const Tensor*> inputs,
                   std::function<void(Node&)> backward_fn) {
  auto node = make_node(std::move(shape), std::move(value));
  if (g_grad_enabled) {
    bool any = false;
    for (const Tensor* in : inputs) any = any || in->requires_grad();
    if (any) {
      node->requires_grad = true;
      for (const Tensor* in : inputs) node->parents.push_back(in->node());
      node->backward_fn = std::move(backward_fn);
    }
  }
  return Tensor(std::move(node));
}

Tensor make_result(Shape shape, std::vector<double> value, const std::vector<Tensor>& inputs,
                   std::function<void(Node&)> backward_fn) {
  auto node = make_node(std::move(shape), std::move(value));
  if (g_grad_enabled) {
    bool any = std::any_of(inputs.begin(), inputs.end(), [](const Tensor& t) { return t.requires_grad(); });
    if (any) {
      node->requires_grad = true;
      for (const Tensor& in : inputs) node->parents.push_back(in.node());
      node->backward_fn = std::move(backward_fn);
    }
  }
  return Tensor(std::move(node));
}

// Parent gradient buffer, or nullptr when that parent does not need one.
double* grad_of(Node& self, std::size_t i) {
  Node& p = *self.parents[i];
  if (!p.requires_grad) return nullptr;
  p.ensure_grad();
  return p.grad.data();
}

void require(bool cond, const std::string& what) {
  if (!cond) throw ShapeError(what);
}

std::size_t prod(const Shape& s, std::size_t begin, std::size_t end) {
  std::size_t p = 1;
  for (std::size_t i = begin; i < end; ++i) p *= s[i];
  return p;
}

}  // namespace

std::size_t numel(const Shape& shape) { return prod(shape, 0, shape.size()); }

std::string to_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) out << (i ? "," : "") << shape[i];
  out << ']';
  return out.str();
}

// ---------------------------------------------------------------------------
// Tensor

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  for (std::size_t d : shape) require(d > 0, "tensor dimensions must be positive: " + to_string(shape));
  const std::size_t n = docnmt::numel(shape);
  auto node = make_node(std::move(shape), std::vector<double>(n, value));
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data, bool requires_grad) {
  for (std::size_t d : shape) require(d > 0, "tensor dimensions must be positive: " + to_string(shape));
  require(docnmt::numel(shape) == data.size(),
          "data length " + std::to_string(data.size()) + " does not match shape " + to_string(shape));
  auto node = make_node(std::move(shape), std::move(data));
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value, bool requires_grad) { return from_data({1}, {value}, requires_grad); }

const Shape& Tensor::shape() const { return node_->shape; }

std::size_t Tensor::size(std::size_t axis) const {
  require(axis < rank(), "axis out of range");
  return shape()[axis];
}

std::size_t Tensor::numel() const { return node_->value.size(); }

std::span<const double> Tensor::data() const { return node_->value; }

std::span<double> Tensor::mutable_data() { return node_->value; }

double Tensor::item() const {
  require(numel() == 1, "item() needs a single-element tensor, got " + to_string(shape()));
  return node_->value[0];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

std::span<const double> Tensor::grad() const { return node_->grad; }

std::span<double> Tensor::mutable_grad() {
  node_->ensure_grad();
  return node_->grad;
}

void Tensor::zero_grad() { node_->grad.clear(); }

void Tensor::backward() const {
  if (numel() != 1) throw ShapeError("backward() needs a scalar loss, got " + to_string(shape()));
  if (!node_->requires_grad) return;

  // Iterative post-order DFS gives a topological order (parents first).
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack{{node_.get(), 0}};
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent->requires_grad && !visited.count(parent)) {
        visited.insert(parent);
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  node_->ensure_grad();
  node_->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn && !n->grad.empty()) n->backward_fn(*n);
  }
}

Tensor Tensor::detach() const {
  auto node = make_node(shape(), node_->value);
  return Tensor(std::move(node));
}

Tensor Tensor::clone() const {
  auto node = make_node(shape(), node_->value);
  node->requires_grad = node_->requires_grad && node_->parents.empty();
  return Tensor(std::move(node));
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_enabled() { return g_grad_enabled; }

// ---------------------------------------------------------------------------
// Ops

Tensor matmul(const Tensor& a, const Tensor& b, bool transpose_b) {
  require(a.rank() >= 2 && b.rank() >= 2, "matmul needs rank >= 2 operands");
  const Shape& as = a.shape();
  const Shape& bs = b.shape();
  const std::size_t m = as[as.size() - 2];
  const std::size_t k = as.back();
  const std::size_t bk = transpose_b ? bs.back() : bs[bs.size() - 2];
  const std::size_t n = transpose_b ? bs[bs.size() - 2] : bs.back();
  if (k != bk) {
    throw ShapeError("matmul inner dimension mismatch: " + to_string(as) + " x " + to_string(bs) +
                     (transpose_b ? "^T" : ""));
  }
  const bool shared_b = b.rank() == 2;
  if (!shared_b) {
    require(a.rank() == b.rank() && std::equal(as.begin(), as.end() - 2, bs.begin()),
            "matmul batch axes differ: " + to_string(as) + " x " + to_string(bs));
  }
  const std::size_t batch = prod(as, 0, as.size() - 2);
  Shape out_shape(as.begin(), as.end() - 2);
  out_shape.push_back(m);
  out_shape.push_back(n);

  std::vector<double> out(batch * m * n);
  const double* ad = a.data().data();
  const double* bd = b.data().data();
  // With a shared right operand the batch folds into rows: one large product.
  const std::size_t rows = shared_b ? batch * m : m;
  const std::size_t loops = shared_b ? 1 : batch;
  for (std::size_t i = 0; i < loops; ++i) {
    ConstMatMap A(ad + i * m * k, rows, k);
    MatMap C(out.data() + i * m * n, rows, n);
    if (transpose_b) {
      ConstMatMap B(bd + (shared_b ? 0 : i * n * k), n, k);
      C.noalias() = A * B.transpose();
    } else {
      ConstMatMap B(bd + (shared_b ? 0 : i * k * n), k, n);
      C.noalias() = A * B;
    }
  }

  return make_result(out_shape, std::move(out), {&a, &b},
                     [m, k, n, rows, loops, shared_b, transpose_b](Node& self) {
                       const Node& an = *self.parents[0];
                       const Node& bn = *self.parents[1];
                       double* ga = grad_of(self, 0);
                       double* gb = grad_of(self, 1);
                       for (std::size_t i = 0; i < loops; ++i) {
                         ConstMatMap G(self.grad.data() + i * m * n, rows, n);
                         ConstMatMap A(an.value.data() + i * m * k, rows, k);
                         const std::size_t boff = shared_b ? 0 : i * k * n;
                         if (transpose_b) {
                           ConstMatMap B(bn.value.data() + boff, n, k);
                           if (ga) MatMap(ga + i * m * k, rows, k).noalias() += G * B;
                           if (gb) MatMap(gb + boff, n, k).noalias() += G.transpose() * A;
                         } else {
                           ConstMatMap B(bn.value.data() + boff, k, n);
                           if (ga) MatMap(ga + i * m * k, rows, k).noalias() += G * B.transpose();
                           if (gb) MatMap(gb + boff, k, n).noalias() += A.transpose() * G;
                         }
                       }
                     });
}

namespace {

Tensor elementwise_binary(const Tensor& a, const Tensor& b, int op) {
  if (a.shape() != b.shape()) {
    throw ShapeError("elementwise shape mismatch: " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  }
  const auto ad = a.data();
  const auto bd = b.data();
  std::vector<double> out(ad.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = op == 0 ? ad[i] + bd[i] : op == 1 ? ad[i] - bd[i] : ad[i] * bd[i];
  }
  return make_result(a.shape(), std::move(out), {&a, &b}, [op](Node& self) {
    const std::size_t n = self.grad.size();
    double* ga = grad_of(self, 0);
    double* gb = grad_of(self, 1);
    const double* g = self.grad.data();
    if (op == 2) {
      const double* av = self.parents[0]->value.data();
      const double* bv = self.parents[1]->value.data();
      if (ga)
        for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] * bv[i];
      if (gb)
        for (std::size_t i = 0; i < n; ++i) gb[i] += g[i] * av[i];
      return;
    }
    const double sign_b = op == 0 ? 1.0 : -1.0;
    if (ga)
      for (std::size_t i = 0; i < n; ++i) ga[i] += g[i];
    if (gb)
      for (std::size_t i = 0; i < n; ++i) gb[i] += sign_b * g[i];
  });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return elementwise_binary(a, b, 0); }
Tensor sub(const Tensor& a, const Tensor& b) { return elementwise_binary(a, b, 1); }
Tensor mul(const Tensor& a, const Tensor& b) { return elementwise_binary(a, b, 2); }

Tensor scale(const Tensor& x, double factor) {
  const auto xd = x.data();
  std::vector<double> out(xd.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xd[i] * factor;
  return make_result(x.shape(), std::move(out), {&x}, [factor](Node& self) {
    if (double* gx = grad_of(self, 0))
      for (std::size_t i = 0; i < self.grad.size(); ++i) gx[i] += factor * self.grad[i];
  });
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  require(bias.rank() == 1 && x.shape().back() == bias.size(0),
          "add_bias shape mismatch: " + to_string(x.shape()) + " + " + to_string(bias.shape()));
  const std::size_t n = bias.size(0);
  const auto xd = x.data();
  const auto bd = bias.data();
  std::vector<double> out(xd.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xd[i] + bd[i % n];
  return make_result(x.shape(), std::move(out), {&x, &bias}, [n](Node& self) {
    const double* g = self.grad.data();
    if (double* gx = grad_of(self, 0))
      for (std::size_t i = 0; i < self.grad.size(); ++i) gx[i] += g[i];
    if (double* gb = grad_of(self, 1))
      for (std::size_t i = 0; i < self.grad.size(); ++i) gb[i % n] += g[i];
  });
}

Tensor relu(const Tensor& x) {
  const auto xd = x.data();
  std::vector<double> out(xd.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xd[i] > 0.0 ? xd[i] : 0.0;
  return make_result(x.shape(), std::move(out), {&x}, [](Node& self) {
    if (double* gx = grad_of(self, 0)) {
      const double* y = self.value.data();
      for (std::size_t i = 0; i < self.grad.size(); ++i)
        if (y[i] > 0.0) gx[i] += self.grad[i];
    }
  });
}

Tensor sum(const Tensor& x) {
  const auto xd = x.data();
  const double total = std::accumulate(xd.begin(), xd.end(), 0.0);
  return make_result({1}, {total}, {&x}, [](Node& self) {
    if (double* gx = grad_of(self, 0)) {
      const std::size_t n = self.parents[0]->value.size();
      for (std::size_t i = 0; i < n; ++i) gx[i] += self.grad[0];
    }
  });
}

Tensor mean(const Tensor& x) { return scale(sum(x), 1.0 / static_cast<double>(x.numel())); }

Tensor softmax(const Tensor& x, std::size_t axis) {
  require(axis < x.rank(), "softmax axis out of range");
  const Shape& s = x.shape();
  const std::size_t outer = prod(s, 0, axis);
  const std::size_t n = s[axis];
  const std::size_t inner = prod(s, axis + 1, s.size());
  const auto xd = x.data();
  std::vector<double> out(xd.size());
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * n * inner + in;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < n; ++j) mx = std::max(mx, xd[base + j * inner]);
      double z = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double e = std::exp(xd[base + j * inner] - mx);
        out[base + j * inner] = e;
        z += e;
      }
      for (std::size_t j = 0; j < n; ++j) out[base + j * inner] /= z;
    }
  }
  return make_result(s, std::move(out), {&x}, [outer, n, inner](Node& self) {
    double* gx = grad_of(self, 0);
    if (!gx) return;
    const double* y = self.value.data();
    const double* g = self.grad.data();
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t in = 0; in < inner; ++in) {
        const std::size_t base = o * n * inner + in;
        double dot = 0.0;
        for (std::size_t j = 0; j < n; ++j) dot += g[base + j * inner] * y[base + j * inner];
        for (std::size_t j = 0; j < n; ++j) {
          const std::size_t idx = base + j * inner;
          gx[idx] += y[idx] * (g[idx] - dot);
        }
      }
    }
  });
}

Tensor log_softmax(const Tensor& x) {
  const std::size_t n = x.shape().back();
  const std::size_t rows = x.numel() / n;
  const auto xd = x.data();
  std::vector<double> out(xd.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = xd.data() + r * n;
    const double mx = *std::max_element(row, row + n);
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) z += std::exp(row[j] - mx);
    const double lse = mx + std::log(z);
    for (std::size_t j = 0; j < n; ++j) out[r * n + j] = row[j] - lse;
  }
  return make_result(x.shape(), std::move(out), {&x}, [rows, n](Node& self) {
    double* gx = grad_of(self, 0);
    if (!gx) return;
    const double* y = self.value.data();
    const double* g = self.grad.data();
    for (std::size_t r = 0; r < rows; ++r) {
      double gsum = 0.0;
      for (std::size_t j = 0; j < n; ++j) gsum += g[r * n + j];
      for (std::size_t j = 0; j < n; ++j) gx[r * n + j] += g[r * n + j] - std::exp(y[r * n + j]) * gsum;
    }
  });
}

Tensor masked_fill(const Tensor& x, std::span<const std::uint8_t> mask, double value) {
  require(mask.size() == x.numel(), "mask length does not match tensor " + to_string(x.shape()));
  const auto xd = x.data();
  std::vector<double> out(xd.begin(), xd.end());
  for (std::size_t i = 0; i < out.size(); ++i)
    if (mask[i]) out[i] = value;
  std::vector<std::uint8_t> keep(mask.begin(), mask.end());
  return make_result(x.shape(), std::move(out), {&x}, [keep = std::move(keep)](Node& self) {
    if (double* gx = grad_of(self, 0))
      for (std::size_t i = 0; i < self.grad.size(); ++i)
        if (!keep[i]) gx[i] += self.grad[i];
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  const std::size_t n = x.shape().back();
  require(gamma.rank() == 1 && gamma.size(0) == n && beta.rank() == 1 && beta.size(0) == n,
          "layer_norm parameter shape mismatch for input " + to_string(x.shape()));
  const std::size_t rows = x.numel() / n;
  const auto xd = x.data();
  const auto gd = gamma.data();
  const auto bd = beta.data();
  std::vector<double> out(xd.size());
  std::vector<double> xhat(xd.size());
  std::vector<double> inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = xd.data() + r * n;
    double mu = 0.0;
    for (std::size_t j = 0; j < n; ++j) mu += row[j];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<double>(n);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j) {
      const double h = (row[j] - mu) * inv_std[r];
      xhat[r * n + j] = h;
      out[r * n + j] = h * gd[j] + bd[j];
    }
  }
  return make_result(
      x.shape(), std::move(out), {&x, &gamma, &beta},
      [rows, n, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& self) {
        const double* g = self.grad.data();
        const double* gam = self.parents[1]->value.data();
        double* gx = grad_of(self, 0);
        double* ggamma = grad_of(self, 1);
        double* gbeta = grad_of(self, 2);
        for (std::size_t r = 0; r < rows; ++r) {
          const double* gr = g + r * n;
          const double* hr = xhat.data() + r * n;
          if (ggamma)
            for (std::size_t j = 0; j < n; ++j) ggamma[j] += gr[j] * hr[j];
          if (gbeta)
            for (std::size_t j = 0; j < n; ++j) gbeta[j] += gr[j];
          if (!gx) continue;
          double mean_d = 0.0;
          double mean_dh = 0.0;
          for (std::size_t j = 0; j < n; ++j) {
            const double d = gr[j] * gam[j];
            mean_d += d;
            mean_dh += d * hr[j];
          }
          mean_d /= static_cast<double>(n);
          mean_dh /= static_cast<double>(n);
          for (std::size_t j = 0; j < n; ++j) {
            const double d = gr[j] * gam[j];
            gx[r * n + j] += inv_std[r] * (d - mean_d - hr[j] * mean_dh);
          }
        }
      });
}

Tensor embedding(const Tensor& table, std::span<const int> ids, const Shape& index_shape) {
  require(table.rank() == 2, "embedding table must be rank 2");
  require(docnmt::numel(index_shape) == ids.size(), "embedding index shape does not match id count");
  const std::size_t vocab = table.size(0);
  const std::size_t d = table.size(1);
  const auto td = table.data();
  std::vector<double> out(ids.size() * d);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= vocab) {
      throw std::out_of_range("token id " + std::to_string(ids[i]) + " outside vocabulary of size " +
                              std::to_string(vocab));
    }
    std::copy_n(td.data() + static_cast<std::size_t>(ids[i]) * d, d, out.data() + i * d);
  }
  Shape out_shape = index_shape;
  out_shape.push_back(d);
  std::vector<int> idx(ids.begin(), ids.end());
  return make_result(out_shape, std::move(out), {&table}, [d, idx = std::move(idx)](Node& self) {
    double* gt = grad_of(self, 0);
    if (!gt) return;
    for (std::size_t i = 0; i < idx.size(); ++i) {
      double* row = gt + static_cast<std::size_t>(idx[i]) * d;
      const double* g = self.grad.data() + i * d;
      for (std::size_t j = 0; j < d; ++j) row[j] += g[j];
    }
  });
}

Tensor cross_entropy(const Tensor& logits, std::span<const int> targets, int ignore_index) {
  require(logits.rank() == 2 && logits.size(0) == targets.size(),
          "cross_entropy expects logits [N, V] with N targets, got " + to_string(logits.shape()));
  const std::size_t rows = logits.size(0);
  const std::size_t v = logits.size(1);
  const auto xd = logits.data();
  std::vector<double> probs(xd.size());
  double total = 0.0;
  std::size_t counted = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = xd.data() + r * v;
    const double mx = *std::max_element(row, row + v);
    double z = 0.0;
    for (std::size_t j = 0; j < v; ++j) {
      probs[r * v + j] = std::exp(row[j] - mx);
      z += probs[r * v + j];
    }
    for (std::size_t j = 0; j < v; ++j) probs[r * v + j] /= z;
    if (targets[r] == ignore_index) continue;
    if (targets[r] < 0 || static_cast<std::size_t>(targets[r]) >= v) {
      throw std::out_of_range("target id " + std::to_string(targets[r]) + " outside vocabulary");
    }
    total -= row[targets[r]] - mx - std::log(z);
    ++counted;
  }
  const double denom = counted ? static_cast<double>(counted) : 1.0;
  std::vector<int> tg(targets.begin(), targets.end());
  return make_result({1}, {total / denom}, {&logits},
                     [rows, v, denom, ignore_index, tg = std::move(tg), probs = std::move(probs)](Node& self) {
                       double* gx = grad_of(self, 0);
                       if (!gx) return;
                       const double g = self.grad[0] / denom;
                       for (std::size_t r = 0; r < rows; ++r) {
                         if (tg[r] == ignore_index) continue;
                         for (std::size_t j = 0; j < v; ++j) gx[r * v + j] += g * probs[r * v + j];
                         gx[r * v + static_cast<std::size_t>(tg[r])] -= g;
                       }
                     });
}

Tensor reshape(const Tensor& x, Shape shape) {
  require(docnmt::numel(shape) == x.numel(), "cannot reshape " + to_string(x.shape()) + " to " + to_string(shape));
  std::vector<double> out(x.data().begin(), x.data().end());
  return make_result(std::move(shape), std::move(out), {&x}, [](Node& self) {
    if (double* gx = grad_of(self, 0))
      for (std::size_t i = 0; i < self.grad.size(); ++i) gx[i] += self.grad[i];
  });
}

Tensor permute(const Tensor& x, const std::vector<std::size_t>& axes) {
  const std::size_t r = x.rank();
  require(axes.size() == r, "permute needs one entry per axis");
  std::vector<bool> seen(r, false);
  for (std::size_t a : axes) {
    require(a < r && !seen[a], "permute axes must be a permutation");
    seen[a] = true;
  }
  const Shape& s = x.shape();
  Shape out_shape(r);
  for (std::size_t i = 0; i < r; ++i) out_shape[i] = s[axes[i]];
  std::vector<std::size_t> in_strides(r, 1);
  for (std::size_t i = r - 1; i-- > 0;) in_strides[i] = in_strides[i + 1] * s[i + 1];
  // Source offset for each output element, walked with an odometer.
  const std::size_t n = x.numel();
  std::vector<std::size_t> src(n);
  std::vector<std::size_t> counter(r, 0);
  std::size_t offset = 0;
  for (std::size_t i = 0; i < n; ++i) {
    src[i] = offset;
    for (std::size_t ax = r; ax-- > 0;) {
      counter[ax]++;
      offset += in_strides[axes[ax]];
      if (counter[ax] < out_shape[ax]) break;
      offset -= in_strides[axes[ax]] * out_shape[ax];
      counter[ax] = 0;
    }
  }
  const auto xd = x.data();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = xd[src[i]];
  return make_result(out_shape, std::move(out), {&x}, [src = std::move(src)](Node& self) {
    if (double* gx = grad_of(self, 0))
      for (std::size_t i = 0; i < src.size(); ++i) gx[src[i]] += self.grad[i];
  });
}

Tensor concat(std::span<const Tensor> parts, std::size_t axis) {
  require(!parts.empty(), "concat of zero tensors");
  const Shape& first = parts[0].shape();
  require(axis < first.size(), "concat axis out of range");
  std::size_t total = 0;
  for (const Tensor& p : parts) {
    const Shape& s = p.shape();
    require(s.size() == first.size(), "concat rank mismatch");
    for (std::size_t i = 0; i < s.size(); ++i)
      require(i == axis || s[i] == first[i], "concat shape mismatch: " + to_string(first) + " vs " + to_string(s));
    total += s[axis];
  }
  Shape out_shape = first;
  out_shape[axis] = total;
  const std::size_t outer = prod(first, 0, axis);
  const std::size_t inner = prod(first, axis + 1, first.size());
  std::vector<double> out(docnmt::numel(out_shape));
  std::vector<std::size_t> widths;
  std::size_t col = 0;
  for (const Tensor& p : parts) {
    const std::size_t w = p.shape()[axis] * inner;
    widths.push_back(w);
    const auto pd = p.data();
    for (std::size_t o = 0; o < outer; ++o)
      std::copy_n(pd.data() + o * w, w, out.data() + o * total * inner + col);
    col += w;
  }
  std::vector<Tensor> inputs(parts.begin(), parts.end());
  return make_result(out_shape, std::move(out), inputs,
                     [outer, row = total * inner, widths = std::move(widths)](Node& self) {
                       std::size_t c = 0;
                       for (std::size_t p = 0; p < widths.size(); ++p) {
                         if (double* gp = grad_of(self, p)) {
                           for (std::size_t o = 0; o < outer; ++o)
                             for (std::size_t j = 0; j < widths[p]; ++j)
                               gp[o * widths[p] + j] += self.grad[o * row + c + j];
                         }
                         c += widths[p];
                       }
                     });
}

Tensor slice(const Tensor& x, std::size_t axis, std::size_t begin, std::size_t end) {
  const Shape& s = x.shape();
  require(axis < s.size() && begin < end && end <= s[axis], "slice out of range on " + to_string(s));
  const std::size_t outer = prod(s, 0, axis);
  const std::size_t inner = prod(s, axis + 1, s.size());
  const std::size_t in_row = s[axis] * inner;
  const std::size_t w = (end - begin) * inner;
  Shape out_shape = s;
  out_shape[axis] = end - begin;
  const auto xd = x.data();
  std::vector<double> out(outer * w);
  for (std::size_t o = 0; o < outer; ++o) std::copy_n(xd.data() + o * in_row + begin * inner, w, out.data() + o * w);
  return make_result(out_shape, std::move(out), {&x}, [outer, in_row, w, off = begin * inner](Node& self) {
    if (double* gx = grad_of(self, 0))
      for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t j = 0; j < w; ++j) gx[o * in_row + off + j] += self.grad[o * w + j];
  });
}

Tensor index_select(const Tensor& x, std::size_t axis, std::span<const std::size_t> indices) {
  const Shape& s = x.shape();
  require(axis < s.size() && !indices.empty(), "index_select axis out of range or empty index");
  for (std::size_t i : indices) require(i < s[axis], "index_select index out of range");
  const std::size_t outer = prod(s, 0, axis);
  const std::size_t inner = prod(s, axis + 1, s.size());
  Shape out_shape = s;
  out_shape[axis] = indices.size();
  const auto xd = x.data();
  std::vector<double> out(outer * indices.size() * inner);
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t k = 0; k < indices.size(); ++k)
      std::copy_n(xd.data() + (o * s[axis] + indices[k]) * inner, inner,
                  out.data() + (o * indices.size() + k) * inner);
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  return make_result(out_shape, std::move(out), {&x}, [outer, inner, len = s[axis], idx = std::move(idx)](Node& self) {
    double* gx = grad_of(self, 0);
    if (!gx) return;
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t k = 0; k < idx.size(); ++k)
        for (std::size_t j = 0; j < inner; ++j)
          gx[(o * len + idx[k]) * inner + j] += self.grad[(o * idx.size() + k) * inner + j];
  });
}

Tensor dropout(const Tensor& x, double rate, std::mt19937_64& rng) {
  if (rate <= 0.0) return x;
  if (rate >= 1.0) throw std::invalid_argument("dropout rate must be below 1");
  std::bernoulli_distribution keep(1.0 - rate);
  const double inv = 1.0 / (1.0 - rate);
  std::vector<double> factor(x.numel());
  for (double& f : factor) f = keep(rng) ? inv : 0.0;
  const auto xd = x.data();
  std::vector<double> out(xd.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xd[i] * factor[i];
  return make_result(x.shape(), std::move(out), {&x}, [factor = std::move(factor)](Node& self) {
    if (double* gx = grad_of(self, 0))
      for (std::size_t i = 0; i < factor.size(); ++i) gx[i] += self.grad[i] * factor[i];
  });
}

}  // namespace docnmt
