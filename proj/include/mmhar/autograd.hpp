// Minimal reverse-mode autodiff over Eigen matrices: a per-sample tape of
// ops sufficient for the transformer families here (matmul, broadcast adds,
// layer norm, GELU, grouped multi-head attention, pooling, concat, dropout,
// softmax cross-entropy). Parameters enter as leaves referencing external
// storage; after backward() their gradients are read back by slot. All loops
// run in a fixed order, so identical inputs give bit-identical results.
#pragma once

#include "mmhar/common.hpp"
#include "mmhar/rng.hpp"

#include <cmath>
#include <functional>
#include <memory>
#include <utility>
#include <vector>

namespace mmhar::ag {

struct Var {
  int id = -1;
};

template <class S>
class Tape {
 public:
  using M = Mat<S>;

  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}

  bool grad_enabled() const { return grad_enabled_; }

  Var input(M v) { return push(std::move(v), nullptr, false); }

  // Leaf bound to an external parameter matrix. `slot` identifies it in the
  // owning ParamStore; the value is not copied.
  Var param(const M& p, int slot) {
    Node n;
    n.external = &p;
    n.requires_grad = grad_enabled_;
    n.slot = slot;
    nodes_.push_back(std::move(n));
    const Var var{static_cast<int>(nodes_.size()) - 1};
    if (slot >= 0) param_nodes_.emplace_back(slot, var.id);
    return var;
  }

  const M& val(Var v) const {
    const Node& n = nodes_[static_cast<std::size_t>(v.id)];
    return n.external ? *n.external : n.value;
  }

  const M& grad_of(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].grad; }

  // Gradient of the parameter bound to `slot`, or nullptr if it never
  // received one (e.g. an unused head).
  const M* param_grad(int slot) const {
    for (const auto& [s, id] : param_nodes_)
      if (s == slot) {
        const M& g = nodes_[static_cast<std::size_t>(id)].grad;
        return g.size() > 0 ? &g : nullptr;
      }
    return nullptr;
  }

  Var matmul(Var a, Var b) {
    const M& av = val(a);
    const M& bv = val(b);
    if (av.cols() != bv.rows()) throw ShapeMismatch("matmul inner dims differ");
    M out = av * bv;
    Var r = push(std::move(out), nullptr, needs_grad(a) || needs_grad(b));
    if (track(r)) {
      set_back(r, [this, a, b, r] {
        const M& g = grad_ref(r);
        if (needs_grad(a)) acc_grad(a, g * val(b).transpose());
        if (needs_grad(b)) acc_grad(b, val(a).transpose() * g);
      });
    }
    return r;
  }

  Var add(Var a, Var b) {
    if (val(a).rows() != val(b).rows() || val(a).cols() != val(b).cols())
      throw ShapeMismatch("add shape mismatch");
    M out = val(a) + val(b);
    Var r = push(std::move(out), nullptr, needs_grad(a) || needs_grad(b));
    if (track(r)) {
      set_back(r, [this, a, b, r] {
        const M& g = grad_ref(r);
        if (needs_grad(a)) acc_grad(a, g);
        if (needs_grad(b)) acc_grad(b, g);
      });
    }
    return r;
  }

  // a + bias with bias (1 x C) broadcast over rows.
  Var add_rowvec(Var a, Var bias) {
    if (val(bias).rows() != 1 || val(bias).cols() != val(a).cols())
      throw ShapeMismatch("bias must be 1 x cols(a)");
    M out = val(a).rowwise() + val(bias).row(0);
    Var r = push(std::move(out), nullptr, needs_grad(a) || needs_grad(bias));
    if (track(r)) {
      set_back(r, [this, a, bias, r] {
        const M& g = grad_ref(r);
        if (needs_grad(a)) acc_grad(a, g);
        if (needs_grad(bias)) acc_grad(bias, g.colwise().sum());
      });
    }
    return r;
  }

  // a + p tiled vertically `repeats` times (positional embeddings shared
  // across groups).
  Var add_tiled(Var a, Var p, int repeats) {
    const M& av = val(a);
    const M& pv = val(p);
    if (av.rows() != pv.rows() * repeats || av.cols() != pv.cols())
      throw ShapeMismatch("add_tiled shape mismatch");
    M out = av;
    const Eigen::Index n = pv.rows();
    for (int rep = 0; rep < repeats; ++rep) out.middleRows(rep * n, n) += pv;
    Var r = push(std::move(out), nullptr, needs_grad(a) || needs_grad(p));
    if (track(r)) {
      set_back(r, [this, a, p, repeats, n, r] {
        const M& g = grad_ref(r);
        if (needs_grad(a)) acc_grad(a, g);
        if (needs_grad(p)) {
          M gp = M::Zero(n, g.cols());
          for (int rep = 0; rep < repeats; ++rep) gp += g.middleRows(rep * n, n);
          acc_grad(p, gp);
        }
      });
    }
    return r;
  }

  Var layer_norm(Var x, Var gamma, Var beta) {
    const M& xv = val(x);
    const Eigen::Index d = xv.cols();
    if (val(gamma).cols() != d || val(beta).cols() != d)
      throw ShapeMismatch("layer_norm parameter width mismatch");
    const S eps = static_cast<S>(1e-5);
    M xhat(xv.rows(), d);
    Eigen::Matrix<S, Eigen::Dynamic, 1> inv_std(xv.rows());
    for (Eigen::Index i = 0; i < xv.rows(); ++i) {
      const S mu = xv.row(i).mean();
      const S var = (xv.row(i).array() - mu).square().sum() / static_cast<S>(d);
      inv_std(i) = S(1) / std::sqrt(var + eps);
      xhat.row(i) = (xv.row(i).array() - mu) * inv_std(i);
    }
    M out = (xhat.array().rowwise() * val(gamma).row(0).array()).rowwise() +
            val(beta).row(0).array();
    Var r = push(std::move(out), nullptr, needs_grad(x) || needs_grad(gamma) || needs_grad(beta));
    if (track(r)) {
      set_back(r, [this, x, gamma, beta, r, xhat = std::move(xhat), inv_std = std::move(inv_std)] {
        const M& g = grad_ref(r);
        const Eigen::Index d = g.cols();
        if (needs_grad(gamma)) acc_grad(gamma, (g.array() * xhat.array()).colwise().sum().matrix());
        if (needs_grad(beta)) acc_grad(beta, g.colwise().sum());
        if (needs_grad(x)) {
          M gx(g.rows(), d);
          for (Eigen::Index i = 0; i < g.rows(); ++i) {
            const auto gy = g.row(i).array() * val(gamma).row(0).array();
            const S m1 = gy.mean();
            const S m2 = (gy * xhat.row(i).array()).mean();
            gx.row(i) = ((gy - m1 - xhat.row(i).array() * m2) * inv_std(i)).matrix();
          }
          acc_grad(x, gx);
        }
      });
    }
    return r;
  }

  Var gelu(Var x) {
    const M& xv = val(x);
    constexpr double kInvSqrt2 = 0.7071067811865475244;
    M out = xv.unaryExpr([](S v) {
      return static_cast<S>(0.5 * static_cast<double>(v) *
                            (1.0 + std::erf(static_cast<double>(v) * kInvSqrt2)));
    });
    Var r = push(std::move(out), nullptr, needs_grad(x));
    if (track(r)) {
      set_back(r, [this, x, r] {
        constexpr double kInvSqrt2pi = 0.3989422804014326779;
        const M dgelu = val(x).unaryExpr([](S v) {
          const double xd = static_cast<double>(v);
          const double cdf = 0.5 * (1.0 + std::erf(xd * kInvSqrt2));
          const double pdf = kInvSqrt2pi * std::exp(-0.5 * xd * xd);
          return static_cast<S>(cdf + xd * pdf);
        });
        acc_grad(x, grad_ref(r).cwiseProduct(dgelu));
      });
    }
    return r;
  }

  // Scaled dot-product multi-head self-attention over `groups` independent
  // row blocks (sequences) of q/k/v. Softmax matrices are cached for the
  // backward pass.
  Var attention(Var q, Var k, Var v, int groups, int heads) {
    const M& qv = val(q);
    const Eigen::Index rows = qv.rows();
    const Eigen::Index d = qv.cols();
    if (val(k).rows() != rows || val(v).rows() != rows || val(k).cols() != d || val(v).cols() != d)
      throw ShapeMismatch("attention expects q/k/v of equal shape");
    if (rows % groups != 0) throw ShapeMismatch("attention rows not divisible by groups");
    if (d % heads != 0) throw ShapeMismatch("model dim not divisible by heads");
    const Eigen::Index n = rows / groups;
    const Eigen::Index dh = d / heads;
    const S scale = S(1) / std::sqrt(static_cast<S>(dh));

    M out(rows, d);
    auto probs = std::make_shared<std::vector<M>>();
    if (grad_enabled_) probs->reserve(static_cast<std::size_t>(groups) * heads);
    for (int g = 0; g < groups; ++g)
      for (int h = 0; h < heads; ++h) {
        const auto qb = qv.block(g * n, h * dh, n, dh);
        const auto kb = val(k).block(g * n, h * dh, n, dh);
        const auto vb = val(v).block(g * n, h * dh, n, dh);
        M scores = qb * kb.transpose() * scale;
        for (Eigen::Index i = 0; i < n; ++i) {
          const S m = scores.row(i).maxCoeff();
          scores.row(i) = (scores.row(i).array() - m).exp();
          scores.row(i) /= scores.row(i).sum();
        }
        out.block(g * n, h * dh, n, dh) = scores * vb;
        if (grad_enabled_) probs->push_back(std::move(scores));
      }

    Var r = push(std::move(out), nullptr, needs_grad(q) || needs_grad(k) || needs_grad(v));
    if (track(r)) {
      set_back(r, [this, q, k, v, groups, heads, n, dh, scale, probs, r] {
        const M& g_out = grad_ref(r);
        M gq = M::Zero(val(q).rows(), val(q).cols());
        M gk = gq, gv = gq;
        for (int g = 0; g < groups; ++g)
          for (int h = 0; h < heads; ++h) {
            const M& p = (*probs)[static_cast<std::size_t>(g * heads + h)];
            const auto qb = val(q).block(g * n, h * dh, n, dh);
            const auto kb = val(k).block(g * n, h * dh, n, dh);
            const auto vb = val(v).block(g * n, h * dh, n, dh);
            const auto go = g_out.block(g * n, h * dh, n, dh);
            gv.block(g * n, h * dh, n, dh) = p.transpose() * go;
            M dp = go * vb.transpose();
            const Eigen::Array<S, Eigen::Dynamic, 1> rowdot = (dp.array() * p.array()).rowwise().sum();
            M ds = (p.array() * (dp.array().colwise() - rowdot)).matrix();
            gq.block(g * n, h * dh, n, dh) = ds * kb * scale;
            gk.block(g * n, h * dh, n, dh) = ds.transpose() * qb * scale;
          }
        if (needs_grad(q)) acc_grad(q, gq);
        if (needs_grad(k)) acc_grad(k, gk);
        if (needs_grad(v)) acc_grad(v, gv);
      });
    }
    return r;
  }

  // (groups*n x d) -> (groups x d) mean over each group's rows.
  Var mean_rows(Var x, int groups) {
    const M& xv = val(x);
    if (xv.rows() % groups != 0) throw ShapeMismatch("mean_rows rows not divisible by groups");
    const Eigen::Index n = xv.rows() / groups;
    M out(groups, xv.cols());
    for (int g = 0; g < groups; ++g) out.row(g) = xv.middleRows(g * n, n).colwise().mean();
    Var r = push(std::move(out), nullptr, needs_grad(x));
    if (track(r)) {
      set_back(r, [this, x, groups, n, r] {
        const M& g_out = grad_ref(r);
        M gx(n * groups, g_out.cols());
        for (int g = 0; g < groups; ++g)
          gx.middleRows(g * n, n) = (g_out.row(g) / static_cast<S>(n)).replicate(n, 1);
        acc_grad(x, gx);
      });
    }
    return r;
  }

  Var concat_cols(const std::vector<Var>& parts) {
    if (parts.empty()) throw ShapeMismatch("concat_cols: empty");
    const Eigen::Index rows = val(parts[0]).rows();
    Eigen::Index cols = 0;
    bool req = false;
    for (Var p : parts) {
      if (val(p).rows() != rows) throw ShapeMismatch("concat_cols row mismatch");
      cols += val(p).cols();
      req = req || needs_grad(p);
    }
    M out(rows, cols);
    Eigen::Index off = 0;
    for (Var p : parts) {
      out.middleCols(off, val(p).cols()) = val(p);
      off += val(p).cols();
    }
    Var r = push(std::move(out), nullptr, req);
    if (track(r)) {
      set_back(r, [this, parts, r] {
        const M& g = grad_ref(r);
        Eigen::Index off = 0;
        for (Var p : parts) {
          const Eigen::Index c = val(p).cols();
          if (needs_grad(p)) acc_grad(p, g.middleCols(off, c));
          off += c;
        }
      });
    }
    return r;
  }

  // Inverted dropout; draws consume the rng in row-major order.
  Var dropout(Var x, double rate, Rng& rng) {
    if (rate <= 0.0) return x;
    if (rate >= 1.0) throw Error("dropout rate must be < 1");
    const M& xv = val(x);
    M mask(xv.rows(), xv.cols());
    const S keep_scale = static_cast<S>(1.0 / (1.0 - rate));
    for (Eigen::Index i = 0; i < xv.rows(); ++i)
      for (Eigen::Index j = 0; j < xv.cols(); ++j)
        mask(i, j) = rng.uniform() >= rate ? keep_scale : S(0);
    M out = xv.cwiseProduct(mask);
    Var r = push(std::move(out), nullptr, needs_grad(x));
    if (track(r)) {
      set_back(r, [this, x, r, mask = std::move(mask)] {
        acc_grad(x, grad_ref(r).cwiseProduct(mask));
      });
    }
    return r;
  }

  // logits: 1 x C row; returns the 1x1 cross-entropy loss.
  Var softmax_cross_entropy(Var logits, int label) {
    const M& lv = val(logits);
    if (lv.rows() != 1) throw ShapeMismatch("softmax_cross_entropy expects a single row");
    if (label < 0 || label >= lv.cols()) throw Error("label out of range");
    const S m = lv.row(0).maxCoeff();
    M p = (lv.array() - m).exp();
    const S z = p.sum();
    p /= z;
    M out(1, 1);
    out(0, 0) = std::log(z) + m - lv(0, label);
    Var r = push(std::move(out), nullptr, needs_grad(logits));
    if (track(r)) {
      set_back(r, [this, logits, label, r, p = std::move(p)] {
        const S g = grad_ref(r)(0, 0);
        M gl = p * g;
        gl(0, label) -= g;
        acc_grad(logits, gl);
      });
    }
    return r;
  }

  void backward(Var loss) {
    if (!grad_enabled_) throw Error("backward on a no-grad tape");
    Node& last = nodes_[static_cast<std::size_t>(loss.id)];
    const M& lv = val(loss);
    if (lv.rows() != 1 || lv.cols() != 1) throw ShapeMismatch("backward expects a scalar loss");
    last.grad = M::Ones(1, 1);
    for (int i = loss.id; i >= 0; --i) {
      Node& n = nodes_[static_cast<std::size_t>(i)];
      if (n.grad.size() > 0 && n.back) n.back();
    }
  }

 private:
  struct Node {
    M value;
    const M* external = nullptr;
    M grad;
    std::function<void()> back;
    bool requires_grad = false;
    int slot = -1;
  };

  bool needs_grad(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].requires_grad; }
  bool track(Var v) const { return grad_enabled_ && needs_grad(v); }
  const M& grad_ref(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].grad; }

  template <class Expr>
  void acc_grad(Var v, const Expr& g) {
    Node& n = nodes_[static_cast<std::size_t>(v.id)];
    if (n.grad.size() == 0)
      n.grad = g;
    else
      n.grad += g;
  }

  Var push(M value, const M* external, bool req) {
    Node n;
    n.value = std::move(value);
    n.external = external;
    n.requires_grad = req && grad_enabled_;
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
  }

  void set_back(Var v, std::function<void()> fn) {
    nodes_[static_cast<std::size_t>(v.id)].back = std::move(fn);
  }

  bool grad_enabled_;
  std::vector<Node> nodes_;
  std::vector<std::pair<int, int>> param_nodes_;  // (slot, node id)
};

}  // namespace mmhar::ag
