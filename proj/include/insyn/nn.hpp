#pragma once

#include <deque>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "insyn/tape.hpp"
#include "insyn/tensor.hpp"

namespace insyn::nn {

// Named parameter tensors with deterministic, registration-ordered
// initialization: matrices U(+-1/sqrt(fan_in)), biases 0, gains 1.
class ParamSet {
 public:
  explicit ParamSet(uint64_t seed);

  Tensor& matrix(const std::string& name, int fan_in, int fan_out);
  Tensor& bias(const std::string& name, int n);
  Tensor& gain(const std::string& name, int n);  // ones; layer-norm gamma
  Tensor& embedding(const std::string& name, int rows, int cols);

  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;
  bool has(const std::string& name) const { return index_.count(name) != 0; }

  const std::vector<std::string>& names() const { return names_; }
  void zero_grads();
  size_t total_size() const;

  // FNV-1a over values; used by the component-independence checks.
  uint64_t value_hash() const;

 private:
  Tensor& add(const std::string& name, Tensor t);

  uint64_t seed_;
  uint64_t draws_ = 0;
  std::vector<std::string> names_;
  std::map<std::string, size_t> index_;
  std::deque<Tensor> tensors_;  // deque keeps Tensor& stable across adds
};

// Single gated recurrent step. W is [(in+hidden) x 4*hidden] with gate order
// input, forget, candidate, output; b is [1 x 4*hidden].
struct RecurrentState {
  Tape::Ref h;
  Tape::Ref c;
};
RecurrentState recurrent_cell(Tape& tape, Tape::Ref x, RecurrentState prev, Tape::Ref w,
                              Tape::Ref b, int hidden);

// Runs the cell over the rows of a [T x in] sequence from a zero state and
// returns the final hidden state [1 x hidden].
Tape::Ref recurrent_last_hidden(Tape& tape, Tape::Ref sequence, Tape::Ref w, Tape::Ref b,
                                int hidden);

// Standard sinusoid table [seq_len x model_dim]; model_dim must be even.
Tensor positional_encoding(int seq_len, int model_dim);

struct AttentionParams {
  Tape::Ref wq, bq, wk, bk, wv, bv, wo, bo;
};
AttentionParams attention_params(Tape& tape, ParamSet& params, const std::string& prefix,
                                 int model_dim);

// softmax(Q Kt / sqrt(d_head)) V per head, concatenated and projected.
// A non-empty allowed_prefix masks query row i to key columns < prefix[i].
Tape::Ref multi_head_attention(Tape& tape, Tape::Ref query, Tape::Ref keys, Tape::Ref values,
                               const AttentionParams& p, int n_heads,
                               const std::vector<int>& allowed_prefix = {});

std::vector<int> causal_prefix(int seq_len);

// Post-norm transformer blocks (attention + feed-forward with residuals).
Tape::Ref encoder_block(Tape& tape, ParamSet& params, const std::string& prefix, Tape::Ref x,
                        int model_dim, int ffn_dim, int n_heads);
Tape::Ref decoder_block(Tape& tape, ParamSet& params, const std::string& prefix, Tape::Ref x,
                        Tape::Ref memory, int model_dim, int ffn_dim, int n_heads);

// Registers the parameters the blocks above look up, so construction happens
// once at model-build time rather than during the first forward.
void register_encoder_block(ParamSet& params, const std::string& prefix, int model_dim,
                            int ffn_dim);
void register_decoder_block(ParamSet& params, const std::string& prefix, int model_dim,
                            int ffn_dim);

// Central-finite-difference check of d(run)/d(params) for every tensor in
// `params`. `run(accumulate)` must rebuild the graph and return the loss,
// accumulating parameter gradients when asked. Checks every coordinate unless
// max_coords_per_tensor caps it (deterministic subsample). Returns the
// maximum relative error.
double grad_check(ParamSet& params, const std::function<double(bool accumulate)>& run,
                  double epsilon = 1e-5, int max_coords_per_tensor = -1,
                  uint64_t sample_seed = 1);

}  // namespace insyn::nn
