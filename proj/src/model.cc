// Copyright 2026 The PueLab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "puelab/model.h"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "puelab/error.h"

namespace puelab {
namespace {

using RowMat =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;
using Vec = Eigen::VectorXd;

constexpr double kLayerNormEps = 1e-5;
constexpr double kInitStd = 0.02;

// Offset and layout index of one parameter array.
struct Ref {
  std::size_t off = 0;
  std::size_t idx = 0;
};

struct LayerRefs {
  Ref ln1_g, ln1_b, wq, bq, wk, bk, wv, bv, wo, bo, ln2_g, ln2_b, w1, b1, w2,
      b2;
};

struct Refs {
  Ref tok_emb, pos_emb;
  std::vector<LayerRefs> layers;
  Ref lnf_g, lnf_b;
};

std::string layer_name(int l, std::string_view leaf) {
  return "h" + std::to_string(l) + "." + std::string(leaf);
}

Refs make_refs(const ModelConfig& c, const ParamLayout& layout) {
  auto ref = [&](const std::string& name) {
    const std::size_t idx = layout.index_of(name);
    return Ref{layout.entries()[idx].offset, idx};
  };
  Refs r;
  r.tok_emb = ref("tok_emb");
  r.pos_emb = ref("pos_emb");
  for (int l = 0; l < c.n_layers; ++l) {
    LayerRefs lr;
    lr.ln1_g = ref(layer_name(l, "ln1.g"));
    lr.ln1_b = ref(layer_name(l, "ln1.b"));
    lr.wq = ref(layer_name(l, "attn.wq"));
    lr.bq = ref(layer_name(l, "attn.bq"));
    lr.wk = ref(layer_name(l, "attn.wk"));
    lr.bk = ref(layer_name(l, "attn.bk"));
    lr.wv = ref(layer_name(l, "attn.wv"));
    lr.bv = ref(layer_name(l, "attn.bv"));
    lr.wo = ref(layer_name(l, "attn.wo"));
    lr.bo = ref(layer_name(l, "attn.bo"));
    lr.ln2_g = ref(layer_name(l, "ln2.g"));
    lr.ln2_b = ref(layer_name(l, "ln2.b"));
    lr.w1 = ref(layer_name(l, "mlp.w1"));
    lr.b1 = ref(layer_name(l, "mlp.b1"));
    lr.w2 = ref(layer_name(l, "mlp.w2"));
    lr.b2 = ref(layer_name(l, "mlp.b2"));
    r.layers.push_back(lr);
  }
  r.lnf_g = ref("lnf.g");
  r.lnf_b = ref("lnf.b");
  return r;
}

ConstMap cmat(const std::vector<double>& v, Ref r, Eigen::Index rows,
              Eigen::Index cols) {
  return ConstMap(v.data() + r.off, rows, cols);
}

MutMap mmat(std::vector<double>& v, Ref r, Eigen::Index rows,
            Eigen::Index cols) {
  return MutMap(v.data() + r.off, rows, cols);
}

Eigen::Map<const Eigen::RowVectorXd> cvec(const std::vector<double>& v, Ref r,
                                          Eigen::Index n) {
  return Eigen::Map<const Eigen::RowVectorXd>(v.data() + r.off, n);
}

Eigen::Map<Eigen::RowVectorXd> mvec(std::vector<double>& v, Ref r,
                                    Eigen::Index n) {
  return Eigen::Map<Eigen::RowVectorXd>(v.data() + r.off, n);
}

void count(OpCounter* counter, std::uint64_t m, std::uint64_t k,
           std::uint64_t n) {
  if (counter != nullptr) counter->add(m * k * n);
}

// y = x W^T + b with W stored [out, in].
void linear(const RowMat& x, ConstMap w, Eigen::Map<const Eigen::RowVectorXd> b,
            RowMat& y, OpCounter* counter) {
  y.noalias() = x * w.transpose();
  y.rowwise() += b;
  count(counter, x.rows(), x.cols(), w.rows());
}

struct LayerNormCache {
  RowMat xhat;
  Vec rstd;
};

void layer_norm(const RowMat& x, Eigen::Map<const Eigen::RowVectorXd> g,
                Eigen::Map<const Eigen::RowVectorXd> b, LayerNormCache& cache,
                RowMat& y) {
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  cache.xhat.resize(n, d);
  cache.rstd.resize(n);
  y.resize(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mean = x.row(i).mean();
    const double var = (x.row(i).array() - mean).square().mean();
    const double rstd = 1.0 / std::sqrt(var + kLayerNormEps);
    cache.rstd(i) = rstd;
    cache.xhat.row(i) = (x.row(i).array() - mean) * rstd;
    y.row(i) = cache.xhat.row(i).cwiseProduct(g) + b;
  }
}

// Accumulates dg/db (when requested) and returns dx.
void layer_norm_backward(const RowMat& dy, const LayerNormCache& cache,
                         Eigen::Map<const Eigen::RowVectorXd> g, double* dg,
                         double* db, RowMat& dx) {
  const Eigen::Index n = dy.rows();
  const Eigen::Index d = dy.cols();
  // Column sums go through owned temporaries: fused into an assignment to
  // an unaligned map they are split at the map's alignment boundary, and the
  // two halves sum rows in different orders.
  if (dg != nullptr) {
    const Eigen::RowVectorXd sum =
        (dy.array() * cache.xhat.array()).colwise().sum().matrix();
    Eigen::Map<Eigen::RowVectorXd>(dg, d) += sum;
  }
  if (db != nullptr) {
    const Eigen::RowVectorXd sum = dy.colwise().sum();
    Eigen::Map<Eigen::RowVectorXd>(db, d) += sum;
  }
  dx.resize(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::RowVectorXd dxhat = dy.row(i).cwiseProduct(g);
    const double mean_dxhat = dxhat.mean();
    const double mean_dxhat_xhat = dxhat.dot(cache.xhat.row(i)) / double(d);
    dx.row(i) = cache.rstd(i) *
                (dxhat.array() - mean_dxhat -
                 cache.xhat.row(i).array() * mean_dxhat_xhat)
                    .matrix();
  }
}

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2 / pi)
constexpr double kGeluA = 0.044715;

// tanh(kGeluC * (u + kGeluA * u^3)) elementwise, as 1 - 2 / (exp(2z) + 1).
RowMat gelu_tanh(const RowMat& u) {
  const auto z = kGeluC * (u.array() + kGeluA * u.array().cube());
  return (1.0 - 2.0 / ((2.0 * z).exp() + 1.0)).matrix();
}

RowMat gelu(const RowMat& u, const RowMat& t) {
  return (0.5 * u.array() * (1.0 + t.array())).matrix();
}

RowMat gelu_grad(const RowMat& u, const RowMat& t) {
  const auto ua = u.array();
  const auto ta = t.array();
  return (0.5 * (1.0 + ta) + 0.5 * ua * (1.0 - ta.square()) * kGeluC *
                                 (1.0 + 3.0 * kGeluA * ua.square()))
      .matrix();
}

struct LayerCache {
  RowMat x_in;
  LayerNormCache ln1;
  RowMat a;
  RowMat q, k, v;
  // Per head an [n, n] block; row i is meaningful in columns < the end of
  // its row block, exactly zero for columns j > i inside it and unspecified
  // beyond it. Vectorized row sums
  // peel up to the first aligned element, so the base alignment is fixed to
  // keep results independent of the heap state.
  std::vector<double, Eigen::aligned_allocator<double>> probs;
  RowMat att;
  RowMat x_mid;
  LayerNormCache ln2;
  RowMat m;
  RowMat u, t, g;
};

struct ForwardCache {
  std::vector<LayerCache> layers;
  RowMat x_final;
  LayerNormCache lnf;
  RowMat hf;
  RowMat logits;
};

// Buffers reused by every pass on the calling thread; after the first window
// of a given length no allocation happens.
ForwardCache& thread_cache() {
  thread_local ForwardCache cache;
  return cache;
}

// Gradient temporaries of one backward pass, reused like the forward cache.
struct BackwardWork {
  RowMat dlogits, dhf, dx, dg, du, dm, dmid, datt, dq, dk, dv, dp, da, tmp,
      dxin;
};

BackwardWork& thread_work() {
  thread_local BackwardWork work;
  return work;
}

// Attention rows are processed in blocks; block [r0, r1) only touches key
// columns [0, r1), so the products skip the masked upper triangle except
// for the diagonal blocks.
constexpr Eigen::Index kAttnBlock = 64;

void attention_forward(const ModelConfig& c, LayerCache& lc,
                       OpCounter* counter) {
  const Eigen::Index n = lc.q.rows();
  const int heads = c.n_heads;
  const Eigen::Index dh = c.d_model / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  lc.probs.resize(static_cast<std::size_t>(heads * n * n));
  lc.att.resize(n, c.d_model);
  for (int h = 0; h < heads; ++h) {
    const Eigen::Index ho = h * dh;
    MutMap P(lc.probs.data() + static_cast<std::size_t>(h) * n * n, n, n);
    const auto Q = lc.q.middleCols(ho, dh);
    const auto K = lc.k.middleCols(ho, dh);
    const auto V = lc.v.middleCols(ho, dh);
    for (Eigen::Index r0 = 0; r0 < n; r0 += kAttnBlock) {
      const Eigen::Index r1 = std::min(n, r0 + kAttnBlock);
      const Eigen::Index rows = r1 - r0;
      auto S = P.block(r0, 0, rows, r1);
      S.noalias() = scale * (Q.middleRows(r0, rows) * K.topRows(r1).transpose());
      for (Eigen::Index ii = 0; ii < rows; ++ii) {
        const Eigen::Index valid = r0 + ii + 1;
        auto row = S.row(ii);
        auto head = row.head(valid).array();
        head = (head - head.maxCoeff()).exp();
        head /= head.sum();
        row.tail(r1 - valid).setZero();
      }
      lc.att.block(r0, ho, rows, dh).noalias() = S * V.topRows(r1);
      count(counter, 2 * static_cast<std::uint64_t>(rows), r1, dh);
    }
  }
}

void attention_backward(const ModelConfig& c, const LayerCache& lc,
                        const RowMat& datt, RowMat& dq, RowMat& dk, RowMat& dv,
                        RowMat& dp, OpCounter* counter) {
  const Eigen::Index n = lc.q.rows();
  const int heads = c.n_heads;
  const Eigen::Index dh = c.d_model / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  dq.setZero(n, c.d_model);
  dk.setZero(n, c.d_model);
  dv.setZero(n, c.d_model);
  for (int h = 0; h < heads; ++h) {
    const Eigen::Index ho = h * dh;
    ConstMap P(lc.probs.data() + static_cast<std::size_t>(h) * n * n, n, n);
    const auto Q = lc.q.middleCols(ho, dh);
    const auto K = lc.k.middleCols(ho, dh);
    const auto V = lc.v.middleCols(ho, dh);
    for (Eigen::Index r0 = 0; r0 < n; r0 += kAttnBlock) {
      const Eigen::Index r1 = std::min(n, r0 + kAttnBlock);
      const Eigen::Index rows = r1 - r0;
      const auto Pb = P.block(r0, 0, rows, r1);
      const auto dO = datt.block(r0, ho, rows, dh);
      dp.noalias() = dO * V.topRows(r1).transpose();
      dv.block(0, ho, r1, dh).noalias() += Pb.transpose() * dO;
      const Eigen::ArrayXd row_dot =
          (dp.array() * Pb.array()).rowwise().sum();
      // Masked entries have P = 0 and so receive no score gradient.
      dp = (Pb.array() * (dp.array().colwise() - row_dot) * scale).matrix();
      dq.block(r0, ho, rows, dh).noalias() = dp * K.topRows(r1);
      dk.block(0, ho, r1, dh).noalias() += dp.transpose() * Q.middleRows(r0, rows);
      count(counter, 4 * static_cast<std::uint64_t>(rows), r1, dh);
    }
  }
}

void check_tokens(const ModelConfig& c, std::span<const TokenId> tokens) {
  if (tokens.empty()) throw ConfigError("forward needs at least one token");
  if (tokens.size() > static_cast<std::size_t>(c.context_len)) {
    throw ConfigError("input of " + std::to_string(tokens.size()) +
                      " tokens exceeds context_len " +
                      std::to_string(c.context_len));
  }
  for (TokenId t : tokens) {
    if (t < 0 || t >= c.vocab_size) {
      throw ConfigError("token id " + std::to_string(t) + " out of range");
    }
  }
}

void run_forward(const ModelState& state, std::span<const TokenId> tokens,
                 ForwardCache& cache, OpCounter* counter) {
  const ModelConfig& c = state.config;
  check_tokens(c, tokens);
  const Refs r = make_refs(c, state.layout);
  const auto& p = state.values;
  const Eigen::Index n = static_cast<Eigen::Index>(tokens.size());
  const Eigen::Index d = c.d_model;

  RowMat x(n, d);
  const ConstMap tok = cmat(p, r.tok_emb, c.vocab_size, d);
  const ConstMap pos = cmat(p, r.pos_emb, c.context_len, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    x.row(i) = tok.row(tokens[i]) + pos.row(i);
  }

  cache.layers.resize(static_cast<std::size_t>(c.n_layers));
  for (int l = 0; l < c.n_layers; ++l) {
    const LayerRefs& lr = r.layers[l];
    LayerCache& lc = cache.layers[l];
    lc.x_in = x;
    layer_norm(x, cvec(p, lr.ln1_g, d), cvec(p, lr.ln1_b, d), lc.ln1, lc.a);
    linear(lc.a, cmat(p, lr.wq, d, d), cvec(p, lr.bq, d), lc.q, counter);
    linear(lc.a, cmat(p, lr.wk, d, d), cvec(p, lr.bk, d), lc.k, counter);
    linear(lc.a, cmat(p, lr.wv, d, d), cvec(p, lr.bv, d), lc.v, counter);
    attention_forward(c, lc, counter);
    RowMat proj;
    linear(lc.att, cmat(p, lr.wo, d, d), cvec(p, lr.bo, d), proj, counter);
    x += proj;
    lc.x_mid = x;
    layer_norm(x, cvec(p, lr.ln2_g, d), cvec(p, lr.ln2_b, d), lc.ln2, lc.m);
    linear(lc.m, cmat(p, lr.w1, c.d_ff, d), cvec(p, lr.b1, c.d_ff), lc.u,
           counter);
    lc.t = gelu_tanh(lc.u);
    lc.g = gelu(lc.u, lc.t);
    RowMat mlp_out;
    linear(lc.g, cmat(p, lr.w2, d, c.d_ff), cvec(p, lr.b2, d), mlp_out,
           counter);
    x += mlp_out;
  }
  cache.x_final = x;
  layer_norm(x, cvec(p, r.lnf_g, d), cvec(p, r.lnf_b, d), cache.lnf, cache.hf);
  cache.logits.noalias() = cache.hf * tok.transpose();
  count(counter, n, d, c.vocab_size);
}

// Stable row-wise log-sum-exp. The row is copied to aligned storage so the
// split between scalar and packet exp does not follow the caller's address.
double log_sum_exp(const double* row, std::size_t n) {
  const Eigen::ArrayXd r =
      Eigen::Map<const Eigen::ArrayXd>(row, static_cast<Eigen::Index>(n));
  const double mx = r.maxCoeff();
  return mx + std::log((r - mx).exp().sum());
}

std::span<const TokenId> inputs_of(const TokenBatch& seq) {
  return std::span<const TokenId>(seq.token_ids).first(seq.size() - 1);
}

std::span<const TokenId> targets_of(const TokenBatch& seq) {
  return std::span<const TokenId>(seq.token_ids).subspan(1);
}

void require_targets(const TokenBatch& seq) {
  if (seq.size() < 2) {
    throw ConfigError("window " + seq.doc_id + " has no next-token target");
  }
}

}  // namespace

void ModelConfig::validate() const {
  if (vocab_size < kVocabSize || context_len < 1 || d_model < 1 ||
      n_layers < 1 || n_heads < 1 || d_ff < 1) {
    throw ConfigError("model dimensions must be >= 1 and vocab_size >= 257");
  }
  if (d_model % n_heads != 0) {
    throw ConfigError("d_model must be divisible by n_heads");
  }
}

void ParamLayout::add(std::string name, std::vector<std::size_t> shape) {
  const std::size_t size = std::accumulate(shape.begin(), shape.end(),
                                           std::size_t{1}, std::multiplies<>());
  entries_.push_back({std::move(name), std::move(shape), total_, size});
  total_ += size;
}

const ParamEntry& ParamLayout::find(std::string_view name) const {
  return entries_[index_of(name)];
}

std::size_t ParamLayout::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].name == name) return i;
  }
  throw ConfigError("unknown parameter: " + std::string(name));
}

bool ParamLayout::contains(std::string_view name) const {
  return std::any_of(entries_.begin(), entries_.end(),
                     [&](const ParamEntry& e) { return e.name == name; });
}

ParamLayout model_layout(const ModelConfig& c) {
  c.validate();
  const auto d = static_cast<std::size_t>(c.d_model);
  const auto ff = static_cast<std::size_t>(c.d_ff);
  ParamLayout layout;
  layout.add("tok_emb", {static_cast<std::size_t>(c.vocab_size), d});
  layout.add("pos_emb", {static_cast<std::size_t>(c.context_len), d});
  for (int l = 0; l < c.n_layers; ++l) {
    layout.add(layer_name(l, "ln1.g"), {d});
    layout.add(layer_name(l, "ln1.b"), {d});
    for (const char* proj : {"q", "k", "v", "o"}) {
      layout.add(layer_name(l, std::string("attn.w") + proj), {d, d});
      layout.add(layer_name(l, std::string("attn.b") + proj), {d});
    }
    layout.add(layer_name(l, "ln2.g"), {d});
    layout.add(layer_name(l, "ln2.b"), {d});
    layout.add(layer_name(l, "mlp.w1"), {ff, d});
    layout.add(layer_name(l, "mlp.b1"), {ff});
    layout.add(layer_name(l, "mlp.w2"), {d, ff});
    layout.add(layer_name(l, "mlp.b2"), {d});
  }
  layout.add("lnf.g", {d});
  layout.add("lnf.b", {d});
  return layout;
}

std::span<double> ModelState::param(std::string_view name) {
  const auto& e = layout.find(name);
  return std::span<double>(values).subspan(e.offset, e.size);
}

std::span<const double> ModelState::param(std::string_view name) const {
  const auto& e = layout.find(name);
  return std::span<const double>(values).subspan(e.offset, e.size);
}

GradientSet GradientSet::zeros(const ParamLayout& layout) {
  return GradientSet{layout, std::vector<double>(layout.total_size(), 0.0)};
}

double GradientSet::global_norm() const {
  double s = 0.0;
  for (double v : values) s += v * v;
  return std::sqrt(s);
}

std::span<double> GradientSet::param(std::string_view name) {
  const auto& e = layout.find(name);
  return std::span<double>(values).subspan(e.offset, e.size);
}

std::span<const double> GradientSet::param(std::string_view name) const {
  const auto& e = layout.find(name);
  return std::span<const double>(values).subspan(e.offset, e.size);
}

ModelState init_params(const ModelConfig& config, std::uint64_t seed) {
  ModelState state{config, model_layout(config), {}};
  state.values.assign(state.layout.total_size(), 0.0);
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32), 0x1417u};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> normal(0.0, kInitStd);
  for (const auto& e : state.layout.entries()) {
    auto span = std::span<double>(state.values).subspan(e.offset, e.size);
    const std::string_view leaf =
        std::string_view(e.name).substr(e.name.rfind('.') + 1);
    if (e.shape.size() == 2) {
      for (double& v : span) v = normal(rng);
    } else if (leaf == "g") {
      std::fill(span.begin(), span.end(), 1.0);
    }
  }
  return state;
}

Logits forward(const ModelState& state, std::span<const TokenId> tokens,
               OpCounter* counter) {
  ForwardCache& cache = thread_cache();
  run_forward(state, tokens, cache, counter);
  Logits out;
  out.rows = static_cast<std::size_t>(cache.logits.rows());
  out.cols = static_cast<std::size_t>(cache.logits.cols());
  out.data.assign(cache.logits.data(),
                  cache.logits.data() + cache.logits.size());
  return out;
}

std::vector<double> per_token_loss(const Logits& logits,
                                   std::span<const TokenId> targets) {
  if (targets.size() != logits.rows) {
    throw ConfigError("targets length does not match logits rows");
  }
  std::vector<double> loss(targets.size());
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const double* row = logits.data.data() + i * logits.cols;
    if (targets[i] < 0 || static_cast<std::size_t>(targets[i]) >= logits.cols) {
      throw ConfigError("target id out of range");
    }
    loss[i] = log_sum_exp(row, logits.cols) - row[targets[i]];
  }
  return loss;
}

std::vector<double> sequence_token_losses(const ModelState& state,
                                          const TokenBatch& seq,
                                          OpCounter* counter) {
  require_targets(seq);
  ForwardCache& cache = thread_cache();
  run_forward(state, inputs_of(seq), cache, counter);
  const auto targets = targets_of(seq);
  const auto V = static_cast<std::size_t>(cache.logits.cols());
  std::vector<double> loss(targets.size());
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const double* row = cache.logits.data() + i * V;
    loss[i] = log_sum_exp(row, V) - row[targets[i]];
  }
  return loss;
}

double sequence_loss(const ModelState& state, const TokenBatch& seq) {
  const auto losses = sequence_token_losses(state, seq);
  return std::accumulate(losses.begin(), losses.end(), 0.0) /
         static_cast<double>(losses.size());
}

double batch_loss(const ModelState& state, std::span<const TokenBatch> batch) {
  if (batch.empty()) throw ConfigError("empty batch");
  double total = 0.0;
  for (const auto& seq : batch) total += sequence_loss(state, seq);
  return total / static_cast<double>(batch.size());
}

double accumulate_gradient(const ModelState& state, const TokenBatch& seq,
                           double scale, GradientSet& grad,
                           const std::vector<bool>& trainable,
                           OpCounter* counter) {
  require_targets(seq);
  if (grad.values.size() != state.values.size()) {
    throw ConfigError("gradient buffer does not match the model layout");
  }
  const ModelConfig& c = state.config;
  const auto inputs = inputs_of(seq);
  const auto targets = targets_of(seq);
  ForwardCache& cache = thread_cache();
  run_forward(state, inputs, cache, counter);

  const Refs r = make_refs(c, state.layout);
  const auto& p = state.values;
  auto& gv = grad.values;
  auto wants = [&](Ref ref) { return trainable.empty() || trainable[ref.idx]; };
  const Eigen::Index n = static_cast<Eigen::Index>(inputs.size());
  const Eigen::Index d = c.d_model;
  const Eigen::Index V = c.vocab_size;

  BackwardWork& w = thread_work();
  // Softmax cross-entropy: dlogits = (softmax - onehot) * scale / n.
  RowMat& dlogits = w.dlogits;
  dlogits = cache.logits;
  double loss_sum = 0.0;
  const double coef = scale / static_cast<double>(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double* row = dlogits.data() + i * V;
    const double lse = log_sum_exp(row, static_cast<std::size_t>(V));
    loss_sum += lse - row[targets[i]];
    Eigen::Map<Eigen::ArrayXd> r(row, V);
    r = (r - lse).exp() * coef;
    row[targets[i]] -= coef;
  }

  const ConstMap tok = cmat(p, r.tok_emb, V, d);
  if (wants(r.tok_emb)) {
    mmat(gv, r.tok_emb, V, d).noalias() += dlogits.transpose() * cache.hf;
    count(counter, V, n, d);
  }
  RowMat& dhf = w.dhf;
  dhf.noalias() = dlogits * tok;
  count(counter, n, V, d);

  RowMat& dx = w.dx;
  layer_norm_backward(dhf, cache.lnf, cvec(p, r.lnf_g, d),
                      wants(r.lnf_g) ? gv.data() + r.lnf_g.off : nullptr,
                      wants(r.lnf_b) ? gv.data() + r.lnf_b.off : nullptr, dx);

  // Linear backward: dX = dY W, dW += dY^T X, db += colsum(dY).
  auto linear_back = [&](const RowMat& x_in, const RowMat& dy, Ref wr, Ref b,
                         Eigen::Index out, Eigen::Index in, RowMat* dx_out) {
    if (wants(wr)) {
      mmat(gv, wr, out, in).noalias() += dy.transpose() * x_in;
      count(counter, out, dy.rows(), in);
    }
    if (wants(b)) {
      const Eigen::RowVectorXd sum = dy.colwise().sum();
      mvec(gv, b, out) += sum;
    }
    if (dx_out != nullptr) {
      dx_out->noalias() = dy * cmat(p, wr, out, in);
      count(counter, dy.rows(), out, in);
    }
  };

  for (int l = c.n_layers - 1; l >= 0; --l) {
    const LayerRefs& lr = r.layers[l];
    const LayerCache& lc = cache.layers[l];

    // MLP branch; dx is the gradient w.r.t. the layer output.
    linear_back(lc.g, dx, lr.w2, lr.b2, d, c.d_ff, &w.dg);
    w.du = w.dg.cwiseProduct(gelu_grad(lc.u, lc.t));
    linear_back(lc.m, w.du, lr.w1, lr.b1, c.d_ff, d, &w.dm);
    RowMat& dmid = w.dmid;
    layer_norm_backward(w.dm, lc.ln2, cvec(p, lr.ln2_g, d),
                        wants(lr.ln2_g) ? gv.data() + lr.ln2_g.off : nullptr,
                        wants(lr.ln2_b) ? gv.data() + lr.ln2_b.off : nullptr,
                        dmid);
    dmid += dx;

    // Attention branch.
    linear_back(lc.att, dmid, lr.wo, lr.bo, d, d, &w.datt);
    attention_backward(c, lc, w.datt, w.dq, w.dk, w.dv, w.dp, counter);
    linear_back(lc.a, w.dq, lr.wq, lr.bq, d, d, &w.da);
    linear_back(lc.a, w.dk, lr.wk, lr.bk, d, d, &w.tmp);
    w.da += w.tmp;
    linear_back(lc.a, w.dv, lr.wv, lr.bv, d, d, &w.tmp);
    w.da += w.tmp;
    layer_norm_backward(w.da, lc.ln1, cvec(p, lr.ln1_g, d),
                        wants(lr.ln1_g) ? gv.data() + lr.ln1_g.off : nullptr,
                        wants(lr.ln1_b) ? gv.data() + lr.ln1_b.off : nullptr,
                        w.dxin);
    dx = w.dxin + dmid;
  }

  if (wants(r.tok_emb)) {
    MutMap dtok = mmat(gv, r.tok_emb, V, d);
    for (Eigen::Index i = 0; i < n; ++i) dtok.row(inputs[i]) += dx.row(i);
  }
  if (wants(r.pos_emb)) {
    mmat(gv, r.pos_emb, c.context_len, d).topRows(n) += dx;
  }
  return loss_sum / static_cast<double>(n);
}

GradientSet backward(const ModelState& state, std::span<const TokenBatch> batch,
                     OpCounter* counter) {
  if (batch.empty()) throw ConfigError("backward needs a non-empty batch");
  GradientSet grad = GradientSet::zeros(state.layout);
  const double scale = 1.0 / static_cast<double>(batch.size());
  for (const auto& seq : batch) {
    accumulate_gradient(state, seq, scale, grad, {}, counter);
  }
  return grad;
}

std::vector<TokenId> greedy_generate(const ModelState& state,
                                     std::span<const TokenId> prefix,
                                     std::size_t n_new) {
  if (prefix.empty()) throw ConfigError("generation prefix must be non-empty");
  std::vector<TokenId> out(prefix.begin(), prefix.end());
  const auto ctx = static_cast<std::size_t>(state.config.context_len);
  for (std::size_t step = 0; step < n_new; ++step) {
    const std::size_t start = out.size() > ctx ? out.size() - ctx : 0;
    const auto window = std::span<const TokenId>(out).subspan(start);
    const Logits logits = forward(state, window);
    const auto last = logits.row(logits.rows - 1);
    // max_element returns the first maximum, i.e. the lowest id on ties.
    const auto best = std::max_element(last.begin(), last.end());
    out.push_back(static_cast<TokenId>(best - last.begin()));
  }
  return out;
}

}  // namespace puelab
