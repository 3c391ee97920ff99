// Parameter storage, seeded initializers, the Adam optimizer and the shared
// pre-norm transformer encoder block.
#pragma once

#include "mmhar/autograd.hpp"
#include "mmhar/rng.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace mmhar::nn {

struct TrainCtx {
  bool training = false;
  Rng* rng = nullptr;  // drives dropout masks when training
};

template <class S>
class ParamStore {
 public:
  struct Entry {
    std::string name;
    Mat<S> value;
  };

  int add(std::string name, Mat<S> value) {
    entries_.push_back({std::move(name), std::move(value)});
    return static_cast<int>(entries_.size()) - 1;
  }

  int size() const { return static_cast<int>(entries_.size()); }
  Mat<S>& value(int slot) { return entries_[static_cast<std::size_t>(slot)].value; }
  const Mat<S>& value(int slot) const { return entries_[static_cast<std::size_t>(slot)].value; }
  const std::string& name(int slot) const { return entries_[static_cast<std::size_t>(slot)].name; }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += static_cast<std::size_t>(e.value.size());
    return n;
  }

  // FNV-1a over the canonical (double) serialization of every parameter.
  std::uint64_t checksum() const {
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&h](const void* p, std::size_t n) {
      const auto* bytes = static_cast<const unsigned char*>(p);
      for (std::size_t i = 0; i < n; ++i) {
        h ^= bytes[i];
        h *= 1099511628211ULL;
      }
    };
    for (const auto& e : entries_) {
      mix(e.name.data(), e.name.size());
      for (Eigen::Index i = 0; i < e.value.rows(); ++i)
        for (Eigen::Index j = 0; j < e.value.cols(); ++j) {
          const double v = static_cast<double>(e.value(i, j));
          mix(&v, sizeof(v));
        }
    }
    return h;
  }

 private:
  std::vector<Entry> entries_;
};

namespace init {

// Per-parameter rng streams keyed by name keep initialization independent of
// registration order.
template <class S>
Mat<S> xavier_uniform(int rows, int cols, std::uint64_t seed, const std::string& name) {
  Rng rng(mix_seed(seed, hash_str(name)));
  const double limit = std::sqrt(6.0 / (rows + cols));
  Mat<S> m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = static_cast<S>(rng.uniform(-limit, limit));
  return m;
}

template <class S>
Mat<S> gaussian(int rows, int cols, double std, std::uint64_t seed, const std::string& name) {
  Rng rng(mix_seed(seed, hash_str(name)));
  Mat<S> m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = static_cast<S>(std * rng.gaussian());
  return m;
}

}  // namespace init

template <class S>
class Adam {
 public:
  Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  // grads[slot] may be empty (size 0) for parameters that received no
  // gradient this step.
  void step(ParamStore<S>& params, const std::vector<Mat<S>>& grads) {
    if (m_.empty()) {
      m_.resize(static_cast<std::size_t>(params.size()));
      v_.resize(static_cast<std::size_t>(params.size()));
      for (int s = 0; s < params.size(); ++s) {
        m_[static_cast<std::size_t>(s)] = Mat<S>::Zero(params.value(s).rows(), params.value(s).cols());
        v_[static_cast<std::size_t>(s)] = Mat<S>::Zero(params.value(s).rows(), params.value(s).cols());
      }
    }
    ++t_;
    const S c1 = static_cast<S>(1.0 - std::pow(beta1_, t_));
    const S c2 = static_cast<S>(1.0 - std::pow(beta2_, t_));
    for (int s = 0; s < params.size(); ++s) {
      const Mat<S>& g = grads[static_cast<std::size_t>(s)];
      if (g.size() == 0) continue;
      auto& m = m_[static_cast<std::size_t>(s)];
      auto& v = v_[static_cast<std::size_t>(s)];
      m = static_cast<S>(beta1_) * m + static_cast<S>(1.0 - beta1_) * g;
      v = (static_cast<S>(beta2_) * v.array() + static_cast<S>(1.0 - beta2_) * g.array().square()).matrix();
      params.value(s).array() -=
          static_cast<S>(lr_) * (m.array() / c1) / ((v.array() / c2).sqrt() + static_cast<S>(eps_));
    }
  }

 private:
  double lr_, beta1_, beta2_, eps_;
  int t_ = 0;
  std::vector<Mat<S>> m_, v_;
};

// Slots of one pre-norm encoder block: x += MHA(LN(x)); x += MLP(LN(x)).
struct EncoderBlockSlots {
  int ln1_g, ln1_b;
  int wq, bq, wk, bk, wv, bv, wo, bo;
  int ln2_g, ln2_b;
  int w1, b1, w2, b2;
};

template <class S>
EncoderBlockSlots add_encoder_block(ParamStore<S>& p, const std::string& prefix, int d, int mlp,
                                    std::uint64_t seed) {
  EncoderBlockSlots s{};
  auto lin = [&](const char* tag, int rows, int cols, int& w_slot, int& b_slot) {
    const std::string name = prefix + "." + tag;
    w_slot = p.add(name + ".w", init::xavier_uniform<S>(rows, cols, seed, name + ".w"));
    b_slot = p.add(name + ".b", Mat<S>::Zero(1, cols));
  };
  s.ln1_g = p.add(prefix + ".ln1.g", Mat<S>::Ones(1, d));
  s.ln1_b = p.add(prefix + ".ln1.b", Mat<S>::Zero(1, d));
  lin("q", d, d, s.wq, s.bq);
  lin("k", d, d, s.wk, s.bk);
  lin("v", d, d, s.wv, s.bv);
  lin("o", d, d, s.wo, s.bo);
  s.ln2_g = p.add(prefix + ".ln2.g", Mat<S>::Ones(1, d));
  s.ln2_b = p.add(prefix + ".ln2.b", Mat<S>::Zero(1, d));
  lin("mlp1", d, mlp, s.w1, s.b1);
  lin("mlp2", mlp, d, s.w2, s.b2);
  return s;
}

template <class S>
ag::Var linear(ag::Tape<S>& t, ag::Var x, const ParamStore<S>& p, int w_slot, int b_slot) {
  return t.add_rowvec(t.matmul(x, t.param(p.value(w_slot), w_slot)), t.param(p.value(b_slot), b_slot));
}

template <class S>
ag::Var encoder_block(ag::Tape<S>& t, ag::Var x, const ParamStore<S>& p,
                      const EncoderBlockSlots& s, int groups, int heads, double dropout,
                      const TrainCtx* ctx) {
  const bool drop = ctx && ctx->training && dropout > 0.0;
  ag::Var a = t.layer_norm(x, t.param(p.value(s.ln1_g), s.ln1_g), t.param(p.value(s.ln1_b), s.ln1_b));
  ag::Var attn = t.attention(linear(t, a, p, s.wq, s.bq), linear(t, a, p, s.wk, s.bk),
                             linear(t, a, p, s.wv, s.bv), groups, heads);
  ag::Var o = linear(t, attn, p, s.wo, s.bo);
  if (drop) o = t.dropout(o, dropout, *ctx->rng);
  x = t.add(x, o);
  ag::Var m = t.layer_norm(x, t.param(p.value(s.ln2_g), s.ln2_g), t.param(p.value(s.ln2_b), s.ln2_b));
  ag::Var h = linear(t, t.gelu(linear(t, m, p, s.w1, s.b1)), p, s.w2, s.b2);
  if (drop) h = t.dropout(h, dropout, *ctx->rng);
  return t.add(x, h);
}

}  // namespace mmhar::nn
