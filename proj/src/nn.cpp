#include "insyn/nn.hpp"

#include <algorithm>
#include <cmath>

#include "insyn/error.hpp"
#include "insyn/rng.hpp"

namespace insyn::nn {

ParamSet::ParamSet(uint64_t seed) : seed_(seed) {}

Tensor& ParamSet::add(const std::string& name, Tensor t) {
  if (index_.count(name)) fail("bad-config", "duplicate parameter '" + name + "'");
  index_[name] = tensors_.size();
  names_.push_back(name);
  tensors_.push_back(std::move(t));
  return tensors_.back();
}

Tensor& ParamSet::matrix(const std::string& name, int fan_in, int fan_out) {
  Tensor t(fan_in, fan_out);
  double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  Rng rng(mix_seed(seed_ + draws_++));
  for (double& x : t.v) x = rng.uniform(-bound, bound);
  return add(name, std::move(t));
}

Tensor& ParamSet::bias(const std::string& name, int n) {
  ++draws_;
  return add(name, Tensor(1, n));
}

Tensor& ParamSet::gain(const std::string& name, int n) {
  ++draws_;
  Tensor t(1, n);
  std::fill(t.v.begin(), t.v.end(), 1.0);
  return add(name, std::move(t));
}

Tensor& ParamSet::embedding(const std::string& name, int rows, int cols) {
  Tensor t(rows, cols);
  double bound = 1.0 / std::sqrt(static_cast<double>(cols));
  Rng rng(mix_seed(seed_ + draws_++));
  for (double& x : t.v) x = rng.uniform(-bound, bound);
  return add(name, std::move(t));
}

Tensor& ParamSet::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) fail("bad-config", "unknown parameter '" + name + "'");
  return tensors_[it->second];
}

const Tensor& ParamSet::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) fail("bad-config", "unknown parameter '" + name + "'");
  return tensors_[it->second];
}

void ParamSet::zero_grads() {
  for (Tensor& t : tensors_) t.zero_grad();
}

size_t ParamSet::total_size() const {
  size_t n = 0;
  for (const Tensor& t : tensors_) n += t.size();
  return n;
}

uint64_t ParamSet::value_hash() const {
  uint64_t h = 1469598103934665603ULL;
  auto feed = [&h](const void* data, size_t len) {
    const unsigned char* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < len; ++i) {
      h ^= p[i];
      h *= 1099511628211ULL;
    }
  };
  for (const Tensor& t : tensors_) feed(t.v.data(), t.v.size() * sizeof(double));
  return h;
}

RecurrentState recurrent_cell(Tape& tape, Tape::Ref x, RecurrentState prev, Tape::Ref w,
                              Tape::Ref b, int hidden) {
  Tape::Ref zx = tape.concat_cols(x, prev.h);
  Tape::Ref gates = tape.dense(zx, w, b);
  Tape::Ref i = tape.sigmoid(tape.slice_cols(gates, 0, hidden));
  Tape::Ref f = tape.sigmoid(tape.slice_cols(gates, hidden, 2 * hidden));
  Tape::Ref g = tape.tanh(tape.slice_cols(gates, 2 * hidden, 3 * hidden));
  Tape::Ref o = tape.sigmoid(tape.slice_cols(gates, 3 * hidden, 4 * hidden));
  Tape::Ref c = tape.add(tape.mul(f, prev.c), tape.mul(i, g));
  Tape::Ref h = tape.mul(o, tape.tanh(c));
  return {h, c};
}

Tape::Ref recurrent_last_hidden(Tape& tape, Tape::Ref sequence, Tape::Ref w, Tape::Ref b,
                                int hidden) {
  int steps = tape.val(sequence).rows;
  RecurrentState state{tape.constant(Tensor(1, hidden)), tape.constant(Tensor(1, hidden))};
  for (int t = 0; t < steps; ++t) {
    Tape::Ref x = tape.slice_rows(sequence, t, t + 1);
    state = recurrent_cell(tape, x, state, w, b, hidden);
  }
  return state.h;
}

Tensor positional_encoding(int seq_len, int model_dim) {
  if (model_dim % 2 != 0) fail("bad-config", "positional encoding needs an even model dim");
  Tensor pe(seq_len, model_dim);
  for (int t = 0; t < seq_len; ++t)
    for (int i = 0; i < model_dim / 2; ++i) {
      double rate = std::pow(10000.0, -2.0 * i / model_dim);
      pe.at(t, 2 * i) = std::sin(t * rate);
      pe.at(t, 2 * i + 1) = std::cos(t * rate);
    }
  return pe;
}

AttentionParams attention_params(Tape& tape, ParamSet& params, const std::string& prefix,
                                 int model_dim) {
  (void)model_dim;
  AttentionParams p;
  p.wq = tape.param(params.at(prefix + ".wq"));
  p.bq = tape.param(params.at(prefix + ".bq"));
  p.wk = tape.param(params.at(prefix + ".wk"));
  p.bk = tape.param(params.at(prefix + ".bk"));
  p.wv = tape.param(params.at(prefix + ".wv"));
  p.bv = tape.param(params.at(prefix + ".bv"));
  p.wo = tape.param(params.at(prefix + ".wo"));
  p.bo = tape.param(params.at(prefix + ".bo"));
  return p;
}

std::vector<int> causal_prefix(int seq_len) {
  std::vector<int> prefix(seq_len);
  for (int i = 0; i < seq_len; ++i) prefix[i] = i + 1;
  return prefix;
}

Tape::Ref multi_head_attention(Tape& tape, Tape::Ref query, Tape::Ref keys, Tape::Ref values,
                               const AttentionParams& p, int n_heads,
                               const std::vector<int>& allowed_prefix) {
  int model_dim = tape.val(query).cols;
  if (model_dim % n_heads != 0)
    fail("shape-mismatch", "head count must divide the model dimension");
  int d_head = model_dim / n_heads;

  Tape::Ref q = tape.dense(query, p.wq, p.bq);
  Tape::Ref k = tape.dense(keys, p.wk, p.bk);
  Tape::Ref v = tape.dense(values, p.wv, p.bv);

  std::vector<Tape::Ref> heads;
  heads.reserve(n_heads);
  double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(d_head));
  for (int h = 0; h < n_heads; ++h) {
    Tape::Ref qh = tape.slice_cols(q, h * d_head, (h + 1) * d_head);
    Tape::Ref kh = tape.slice_cols(k, h * d_head, (h + 1) * d_head);
    Tape::Ref vh = tape.slice_cols(v, h * d_head, (h + 1) * d_head);
    Tape::Ref scores = tape.scale(tape.matmul(qh, kh, false, true), inv_sqrt);
    Tape::Ref weights = tape.softmax_rows(scores, allowed_prefix);
    heads.push_back(tape.matmul(weights, vh));
  }
  Tape::Ref ctx = heads[0];
  for (int h = 1; h < n_heads; ++h) ctx = tape.concat_cols(ctx, heads[h]);
  return tape.dense(ctx, p.wo, p.bo);
}

namespace {

void register_attention(ParamSet& params, const std::string& prefix, int model_dim) {
  params.matrix(prefix + ".wq", model_dim, model_dim);
  params.bias(prefix + ".bq", model_dim);
  params.matrix(prefix + ".wk", model_dim, model_dim);
  params.bias(prefix + ".bk", model_dim);
  params.matrix(prefix + ".wv", model_dim, model_dim);
  params.bias(prefix + ".bv", model_dim);
  params.matrix(prefix + ".wo", model_dim, model_dim);
  params.bias(prefix + ".bo", model_dim);
}

void register_ffn_norms(ParamSet& params, const std::string& prefix, int model_dim, int ffn_dim,
                        int n_norms) {
  params.matrix(prefix + ".ffn.w1", model_dim, ffn_dim);
  params.bias(prefix + ".ffn.b1", ffn_dim);
  params.matrix(prefix + ".ffn.w2", ffn_dim, model_dim);
  params.bias(prefix + ".ffn.b2", model_dim);
  for (int i = 1; i <= n_norms; ++i) {
    params.gain(prefix + ".ln" + std::to_string(i) + ".g", model_dim);
    params.bias(prefix + ".ln" + std::to_string(i) + ".b", model_dim);
  }
}

Tape::Ref feed_forward(Tape& tape, ParamSet& params, const std::string& prefix, Tape::Ref x) {
  Tape::Ref w1 = tape.param(params.at(prefix + ".ffn.w1"));
  Tape::Ref b1 = tape.param(params.at(prefix + ".ffn.b1"));
  Tape::Ref w2 = tape.param(params.at(prefix + ".ffn.w2"));
  Tape::Ref b2 = tape.param(params.at(prefix + ".ffn.b2"));
  return tape.dense(tape.relu(tape.dense(x, w1, b1)), w2, b2);
}

Tape::Ref residual_norm(Tape& tape, ParamSet& params, const std::string& ln, Tape::Ref x,
                        Tape::Ref sublayer) {
  Tape::Ref g = tape.param(params.at(ln + ".g"));
  Tape::Ref b = tape.param(params.at(ln + ".b"));
  return tape.layer_norm(tape.add(x, sublayer), g, b);
}

}  // namespace

void register_encoder_block(ParamSet& params, const std::string& prefix, int model_dim,
                            int ffn_dim) {
  register_attention(params, prefix + ".attn", model_dim);
  register_ffn_norms(params, prefix, model_dim, ffn_dim, 2);
}

void register_decoder_block(ParamSet& params, const std::string& prefix, int model_dim,
                            int ffn_dim) {
  register_attention(params, prefix + ".self", model_dim);
  register_attention(params, prefix + ".cross", model_dim);
  register_ffn_norms(params, prefix, model_dim, ffn_dim, 3);
}

Tape::Ref encoder_block(Tape& tape, ParamSet& params, const std::string& prefix, Tape::Ref x,
                        int model_dim, int ffn_dim, int n_heads) {
  (void)ffn_dim;
  AttentionParams attn = attention_params(tape, params, prefix + ".attn", model_dim);
  Tape::Ref a = multi_head_attention(tape, x, x, x, attn, n_heads);
  x = residual_norm(tape, params, prefix + ".ln1", x, a);
  Tape::Ref f = feed_forward(tape, params, prefix, x);
  return residual_norm(tape, params, prefix + ".ln2", x, f);
}

Tape::Ref decoder_block(Tape& tape, ParamSet& params, const std::string& prefix, Tape::Ref x,
                        Tape::Ref memory, int model_dim, int ffn_dim, int n_heads) {
  (void)ffn_dim;
  int seq = tape.val(x).rows;
  AttentionParams self_attn = attention_params(tape, params, prefix + ".self", model_dim);
  Tape::Ref a = multi_head_attention(tape, x, x, x, self_attn, n_heads, causal_prefix(seq));
  x = residual_norm(tape, params, prefix + ".ln1", x, a);
  AttentionParams cross_attn = attention_params(tape, params, prefix + ".cross", model_dim);
  Tape::Ref c = multi_head_attention(tape, x, memory, memory, cross_attn, n_heads);
  x = residual_norm(tape, params, prefix + ".ln2", x, c);
  Tape::Ref f = feed_forward(tape, params, prefix, x);
  return residual_norm(tape, params, prefix + ".ln3", x, f);
}

double grad_check(ParamSet& params, const std::function<double(bool accumulate)>& run,
                  double epsilon, int max_coords_per_tensor, uint64_t sample_seed) {
  if (epsilon < 1e-6 || epsilon > 1e-3) fail("bad-config", "epsilon outside [1e-6, 1e-3]");

  params.zero_grads();
  run(true);

  double max_rel = 0.0;
  for (const std::string& name : params.names()) {
    Tensor& t = params.at(name);
    std::vector<size_t> coords(t.size());
    for (size_t i = 0; i < coords.size(); ++i) coords[i] = i;
    if (max_coords_per_tensor > 0 && coords.size() > static_cast<size_t>(max_coords_per_tensor)) {
      Rng rng(derive_seed(sample_seed, name));
      rng.shuffle(coords);
      coords.resize(max_coords_per_tensor);
    }
    for (size_t i : coords) {
      double saved = t.v[i];
      t.v[i] = saved + epsilon;
      double up = run(false);
      t.v[i] = saved - epsilon;
      double down = run(false);
      t.v[i] = saved;
      double numeric = (up - down) / (2.0 * epsilon);
      double analytic = t.g[i];
      double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
      max_rel = std::max(max_rel, std::abs(analytic - numeric) / denom);
    }
  }
  return max_rel;
}

}  // namespace insyn::nn
