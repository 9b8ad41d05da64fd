#include "insyn/model.hpp"

#include <cmath>

#include "insyn/error.hpp"
#include "insyn/rng.hpp"

namespace insyn {

using nn::Tape;

nlohmann::json ModelConfig::to_json() const {
  return {{"model_dim", model_dim},
          {"heads", heads},
          {"enc_layers", enc_layers},
          {"dec_layers", dec_layers},
          {"ffn_dim", ffn_dim},
          {"neighbor_hidden", neighbor_hidden},
          {"cvae_hidden", cvae_hidden},
          {"cvae_latent", cvae_latent},
          {"cvae_cond_dim", cvae_cond_dim},
          {"cvae_expand_hidden", cvae_expand_hidden},
          {"cvae_expand_dim", cvae_expand_dim},
          {"cvae_dec_hidden", cvae_dec_hidden}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.model_dim = j.at("model_dim");
  c.heads = j.at("heads");
  c.enc_layers = j.at("enc_layers");
  c.dec_layers = j.at("dec_layers");
  c.ffn_dim = j.at("ffn_dim");
  c.neighbor_hidden = j.at("neighbor_hidden");
  c.cvae_hidden = j.at("cvae_hidden");
  c.cvae_latent = j.at("cvae_latent");
  c.cvae_cond_dim = j.at("cvae_cond_dim");
  c.cvae_expand_hidden = j.at("cvae_expand_hidden");
  c.cvae_expand_dim = j.at("cvae_expand_dim");
  c.cvae_dec_hidden = j.at("cvae_dec_hidden");
  return c;
}

nlohmann::json AblationFlags::to_json() const {
  return {{"use_region_partition", use_region_partition},
          {"use_interaction_state", use_interaction_state},
          {"use_ssos", use_ssos}};
}

AblationFlags AblationFlags::from_json(const nlohmann::json& j) {
  AblationFlags f;
  f.use_region_partition = j.at("use_region_partition");
  f.use_interaction_state = j.at("use_interaction_state");
  f.use_ssos = j.at("use_ssos");
  return f;
}

std::vector<Position> observed_positions(const SampleWindow& w) {
  std::vector<Position> out;
  out.reserve(kObsSteps);
  for (const WalkingState& ws : w.obs) out.push_back(ws.position);
  return out;
}

namespace {

nn::Tensor positions_tensor(const std::vector<Position>& positions) {
  nn::Tensor t(static_cast<int>(positions.size()), 2);
  for (size_t i = 0; i < positions.size(); ++i) {
    t.at(static_cast<int>(i), 0) = positions[i].x;
    t.at(static_cast<int>(i), 1) = positions[i].y;
  }
  return t;
}

void window_features(const SampleWindow& w, bool use_interaction_state, int step,
                     std::array<int, kNumRegions>& states,
                     std::array<double, kNumRegions>& dists) {
  if (!w.normalized) fail("bad-config", "model input windows must be normalized");
  for (int r = 0; r < kNumRegions; ++r) {
    const RegionSlot& slot = w.obs[step].interaction.slots[r];
    states[r] = use_interaction_state ? static_cast<int>(slot.state)
                                      : static_cast<int>(InteractionState::InSync);
    dists[r] = slot.distance;
  }
}

}  // namespace

GeneratorModel::GeneratorModel(const ModelConfig& cfg, const AblationFlags& flags,
                               uint64_t init_seed)
    : cfg_(cfg),
      flags_(flags),
      encoder_params_(derive_seed(init_seed, "encoder")),
      generator_params_(derive_seed(init_seed, "generator")),
      pos_encoding_(nn::positional_encoding(kEncoderTokens, cfg.model_dim)) {
  int h = cfg_.neighbor_hidden;
  int d = cfg_.model_dim;
  encoder_params_.embedding("nb.embed", 3, h);
  encoder_params_.matrix("nb.gate.w", 1, h);
  encoder_params_.bias("nb.gate.b", h);
  encoder_params_.matrix("nb.lstm.w", 2 * h, 4 * h);
  encoder_params_.bias("nb.lstm.b", 4 * h);
  encoder_params_.matrix("tok.w", 3, d);
  encoder_params_.bias("tok.b", d);
  encoder_params_.matrix("fuse.w", d + h, d);
  encoder_params_.bias("fuse.b", d);
  for (int i = 0; i < cfg_.enc_layers; ++i)
    nn::register_encoder_block(encoder_params_, "enc" + std::to_string(i), d, cfg_.ffn_dim);

  generator_params_.matrix("dec.tok.w", 2, d);
  generator_params_.bias("dec.tok.b", d);
  for (int i = 0; i < cfg_.dec_layers; ++i)
    nn::register_decoder_block(generator_params_, "dec" + std::to_string(i), d, cfg_.ffn_dim);
  generator_params_.matrix("out.w", d, 2);
  generator_params_.bias("out.b", 2);
}

Tape::Ref GeneratorModel::neighbor_encode(Tape& tape, const std::array<int, kNumRegions>& states,
                                          const std::array<double, kNumRegions>& distances) {
  for (int s : states)
    if (s < 0 || s > 2) fail("bad-index", "interaction state index out of range");
  Tape::Ref table = tape.param(encoder_params_.at("nb.embed"));
  Tape::Ref embeds = tape.embed_rows(table, {states.begin(), states.end()});
  nn::Tensor d(kNumRegions, 1);
  for (int r = 0; r < kNumRegions; ++r) d.at(r, 0) = distances[r];
  Tape::Ref gate_w = tape.param(encoder_params_.at("nb.gate.w"));
  Tape::Ref gate_b = tape.param(encoder_params_.at("nb.gate.b"));
  Tape::Ref gate = tape.sigmoid(tape.dense(tape.constant(std::move(d)), gate_w, gate_b));
  return tape.max_axis(tape.mul(embeds, gate), 0);
}

Tape::Ref GeneratorModel::encode(Tape& tape, const SampleWindow& w, const Position& goal) {
  int h = cfg_.neighbor_hidden;
  int d = cfg_.model_dim;

  std::vector<Tape::Ref> pooled;
  pooled.reserve(kObsSteps);
  for (int t = 0; t < kObsSteps; ++t) {
    std::array<int, kNumRegions> states;
    std::array<double, kNumRegions> dists;
    window_features(w, flags_.use_interaction_state, t, states, dists);
    pooled.push_back(neighbor_encode(tape, states, dists));
  }
  Tape::Ref sequence = tape.concat_rows(pooled);
  Tape::Ref lstm_w = tape.param(encoder_params_.at("nb.lstm.w"));
  Tape::Ref lstm_b = tape.param(encoder_params_.at("nb.lstm.b"));
  Tape::Ref h_last = nn::recurrent_last_hidden(tape, sequence, lstm_w, lstm_b, h);

  // Token layout: observed positions, pad tokens, then the goal at the final
  // index so it picks up the last positional-encoding row. The third channel
  // flags padding so a pad is distinct from a genuine (0,0) position.
  nn::Tensor tokens(kEncoderTokens, 3);
  for (int t = 0; t < kObsSteps; ++t) {
    tokens.at(t, 0) = w.obs[t].position.x;
    tokens.at(t, 1) = w.obs[t].position.y;
  }
  for (int t = kObsSteps; t < kEncoderTokens - 1; ++t) tokens.at(t, 2) = 1.0;
  tokens.at(kEncoderTokens - 1, 0) = goal.x;
  tokens.at(kEncoderTokens - 1, 1) = goal.y;

  Tape::Ref tok_w = tape.param(encoder_params_.at("tok.w"));
  Tape::Ref tok_b = tape.param(encoder_params_.at("tok.b"));
  Tape::Ref x = tape.dense(tape.constant(std::move(tokens)), tok_w, tok_b);
  x = tape.add(x, tape.constant(pos_encoding_));
  x = tape.concat_cols(x, tape.tile_rows(h_last, kEncoderTokens));
  Tape::Ref fuse_w = tape.param(encoder_params_.at("fuse.w"));
  Tape::Ref fuse_b = tape.param(encoder_params_.at("fuse.b"));
  x = tape.dense(x, fuse_w, fuse_b);
  for (int i = 0; i < cfg_.enc_layers; ++i)
    x = nn::encoder_block(tape, encoder_params_, "enc" + std::to_string(i), x, d, cfg_.ffn_dim,
                          cfg_.heads);
  return x;
}

Tape::Ref GeneratorModel::decoder_forward(Tape& tape, Tape::Ref memory,
                                          const std::vector<Position>& tokens) {
  int len = static_cast<int>(tokens.size());
  Tape::Ref tok_w = tape.param(generator_params_.at("dec.tok.w"));
  Tape::Ref tok_b = tape.param(generator_params_.at("dec.tok.b"));
  Tape::Ref x = tape.dense(tape.constant(positions_tensor(tokens)), tok_w, tok_b);

  nn::Tensor pe(len, cfg_.model_dim);
  std::copy(pos_encoding_.v.begin(),
            pos_encoding_.v.begin() + static_cast<size_t>(len) * cfg_.model_dim, pe.v.begin());
  x = tape.add(x, tape.constant(std::move(pe)));

  for (int i = 0; i < cfg_.dec_layers; ++i)
    x = nn::decoder_block(tape, generator_params_, "dec" + std::to_string(i), x, memory,
                          cfg_.model_dim, cfg_.ffn_dim, cfg_.heads);
  Tape::Ref out_w = tape.param(generator_params_.at("out.w"));
  Tape::Ref out_b = tape.param(generator_params_.at("out.b"));
  return tape.dense(x, out_w, out_b);
}

GeneratorModel::LossRefs GeneratorModel::build_loss(Tape& tape, const SampleWindow& w,
                                                    const LossWeights& weights) {
  Tape::Ref memory = encode(tape, w, w.goal());

  std::vector<Position> inputs;
  std::vector<Position> all = observed_positions(w);
  all.insert(all.end(), w.future.begin(), w.future.end());  // positions 0..19

  LossRefs refs;
  if (flags_.use_ssos) {
    // Teacher forcing over positions 0..18: slot i predicts position i+1.
    // Slots 0..6 reconstruct the observed trajectory, slots 7..17 predict the
    // future, slot 18 (the sampled goal) is excluded from the loss.
    inputs.assign(all.begin(), all.end() - 1);
    Tape::Ref out = decoder_forward(tape, memory, inputs);
    Tape::Ref recon_target =
        tape.constant(positions_tensor({all.begin() + 1, all.begin() + kObsSteps}));
    Tape::Ref pred_target =
        tape.constant(positions_tensor({all.begin() + kObsSteps, all.end() - 1}));
    refs.recon = tape.mse(tape.slice_rows(out, 0, kObsSteps - 1), recon_target);
    refs.pred = tape.mse(tape.slice_rows(out, kObsSteps - 1, kWindowSteps - 2), pred_target);
    refs.total = tape.add(tape.scale(refs.recon, weights.lambda_recon),
                          tape.scale(refs.pred, weights.lambda_pred));
  } else {
    // Single start token: the last observed position.
    inputs.assign(all.begin() + kObsSteps - 1, all.end() - 1);
    Tape::Ref out = decoder_forward(tape, memory, inputs);
    Tape::Ref pred_target =
        tape.constant(positions_tensor({all.begin() + kObsSteps, all.end() - 1}));
    refs.recon = -1;
    refs.pred = tape.mse(tape.slice_rows(out, 0, kFutureSteps - 1), pred_target);
    refs.total = tape.scale(refs.pred, weights.lambda_pred);
  }
  return refs;
}

std::array<Position, kFutureSteps> GeneratorModel::decode(const SampleWindow& w,
                                                          const Position& goal) {
  Tape tape;
  Tape::Ref memory = encode(tape, w, goal);

  std::vector<Position> tokens;
  if (flags_.use_ssos) {
    tokens = observed_positions(w);
  } else {
    tokens = {w.obs[kObsSteps - 1].position};
  }

  std::array<Position, kFutureSteps> result;
  for (int step = 0; step < kFutureSteps - 1; ++step) {
    Tape::Ref out = decoder_forward(tape, memory, tokens);
    const nn::Tensor& t = tape.val(out);
    Position next{t.at(t.rows - 1, 0), t.at(t.rows - 1, 1)};
    if (!std::isfinite(next.x) || !std::isfinite(next.y))
      fail("diverged", "non-finite decoder output");
    result[step] = next;
    tokens.push_back(next);
  }
  result[kFutureSteps - 1] = goal;
  return result;
}

CvaeModel::CvaeModel(const ModelConfig& cfg, uint64_t init_seed)
    : cfg_(cfg), params_(derive_seed(init_seed, "cvae")) {
  int h = cfg_.cvae_hidden;
  params_.matrix("cond.lstm.w", 2 + h, 4 * h);
  params_.bias("cond.lstm.b", 4 * h);
  params_.matrix("cond.fc.w", h, cfg_.cvae_cond_dim);
  params_.bias("cond.fc.b", cfg_.cvae_cond_dim);
  params_.matrix("expand.w1", 2, cfg_.cvae_expand_hidden);
  params_.bias("expand.b1", cfg_.cvae_expand_hidden);
  params_.matrix("expand.w2", cfg_.cvae_expand_hidden, cfg_.cvae_expand_dim);
  params_.bias("expand.b2", cfg_.cvae_expand_dim);
  int post_in = cfg_.cvae_expand_dim + cfg_.cvae_cond_dim;
  params_.matrix("post.mu.w", post_in, cfg_.cvae_latent);
  params_.bias("post.mu.b", cfg_.cvae_latent);
  params_.matrix("post.ls.w", post_in, cfg_.cvae_latent);
  params_.bias("post.ls.b", cfg_.cvae_latent);
  params_.matrix("dec.w1", cfg_.cvae_latent + h, cfg_.cvae_dec_hidden);
  params_.bias("dec.b1", cfg_.cvae_dec_hidden);
  params_.matrix("dec.w2", cfg_.cvae_dec_hidden, 2);
  params_.bias("dec.b2", 2);
}

Tape::Ref CvaeModel::condition(Tape& tape, const SampleWindow& w) {
  Tape::Ref obs = tape.constant(positions_tensor(observed_positions(w)));
  Tape::Ref lstm_w = tape.param(params_.at("cond.lstm.w"));
  Tape::Ref lstm_b = tape.param(params_.at("cond.lstm.b"));
  return nn::recurrent_last_hidden(tape, obs, lstm_w, lstm_b, cfg_.cvae_hidden);
}

CvaeModel::LossRefs CvaeModel::build_loss(Tape& tape, const SampleWindow& w,
                                          const nn::Tensor& eps, double beta_kl) {
  if (eps.rows != 1 || eps.cols != cfg_.cvae_latent)
    fail("shape-mismatch", "eps must be [1 x latent]");

  Tape::Ref c_decoder = condition(tape, w);
  Tape::Ref c_encoder = tape.dense(c_decoder, tape.param(params_.at("cond.fc.w")),
                                   tape.param(params_.at("cond.fc.b")));

  Tape::Ref goal = tape.constant(positions_tensor({w.goal()}));
  Tape::Ref expanded = tape.dense(
      tape.relu(tape.dense(goal, tape.param(params_.at("expand.w1")),
                           tape.param(params_.at("expand.b1")))),
      tape.param(params_.at("expand.w2")), tape.param(params_.at("expand.b2")));

  Tape::Ref post_in = tape.concat_cols(expanded, c_encoder);
  Tape::Ref mu = tape.dense(post_in, tape.param(params_.at("post.mu.w")),
                            tape.param(params_.at("post.mu.b")));
  Tape::Ref log_sigma = tape.dense(post_in, tape.param(params_.at("post.ls.w")),
                                   tape.param(params_.at("post.ls.b")));
  Tape::Ref sigma = tape.exp(log_sigma);
  Tape::Ref z = tape.add(mu, tape.mul(sigma, tape.constant(eps)));

  Tape::Ref dec_in = tape.concat_cols(z, c_decoder);
  Tape::Ref hidden = tape.relu(tape.dense(dec_in, tape.param(params_.at("dec.w1")),
                                          tape.param(params_.at("dec.b1"))));
  Tape::Ref goal_hat = tape.dense(hidden, tape.param(params_.at("dec.w2")),
                                  tape.param(params_.at("dec.b2")));

  LossRefs refs;
  refs.recon = tape.mse(goal_hat, goal);
  // KL(N(mu, sigma^2) || N(0, I)) = sum 0.5*(mu^2 + sigma^2 - 1) - log sigma
  Tape::Ref kl_vec = tape.sub(
      tape.scale(tape.add_const(tape.add(tape.square(mu), tape.square(sigma)), -1.0), 0.5),
      log_sigma);
  refs.kl = tape.sum_all(kl_vec);
  refs.total = tape.add(refs.recon, tape.scale(refs.kl, beta_kl));
  return refs;
}

std::vector<Position> CvaeModel::sample(const SampleWindow& w, int k, uint64_t seed) {
  if (k < 1) fail("bad-config", "sample count must be >= 1");
  Tape tape;
  Tape::Ref c_decoder = condition(tape, w);

  Rng rng(seed);
  std::vector<Position> goals;
  goals.reserve(k);
  for (int i = 0; i < k; ++i) {
    nn::Tensor z(1, cfg_.cvae_latent);
    for (double& x : z.v) x = rng.normal();
    Tape::Ref dec_in = tape.concat_cols(tape.constant(std::move(z)), c_decoder);
    Tape::Ref hidden = tape.relu(tape.dense(dec_in, tape.param(params_.at("dec.w1")),
                                            tape.param(params_.at("dec.b1"))));
    Tape::Ref goal_hat = tape.dense(hidden, tape.param(params_.at("dec.w2")),
                                    tape.param(params_.at("dec.b2")));
    const nn::Tensor& g = tape.val(goal_hat);
    if (!std::isfinite(g.v[0]) || !std::isfinite(g.v[1]))
      fail("diverged", "non-finite sampled goal");
    goals.push_back(Position{g.v[0], g.v[1]});
  }
  return goals;
}

Position CvaeModel::mode_goal(const SampleWindow& w) {
  Tape tape;
  Tape::Ref c_decoder = condition(tape, w);
  Tape::Ref dec_in = tape.concat_cols(tape.constant(nn::Tensor(1, cfg_.cvae_latent)), c_decoder);
  Tape::Ref hidden = tape.relu(tape.dense(dec_in, tape.param(params_.at("dec.w1")),
                                          tape.param(params_.at("dec.b1"))));
  Tape::Ref goal_hat = tape.dense(hidden, tape.param(params_.at("dec.w2")),
                                  tape.param(params_.at("dec.b2")));
  return Position{tape.val(goal_hat).v[0], tape.val(goal_hat).v[1]};
}

Position CvaeModel::reconstruct_mean(const SampleWindow& w, const Position& goal) {
  Tape tape;
  Tape::Ref c_decoder = condition(tape, w);
  Tape::Ref c_encoder = tape.dense(c_decoder, tape.param(params_.at("cond.fc.w")),
                                   tape.param(params_.at("cond.fc.b")));
  Tape::Ref goal_ref = tape.constant(positions_tensor({goal}));
  Tape::Ref expanded = tape.dense(
      tape.relu(tape.dense(goal_ref, tape.param(params_.at("expand.w1")),
                           tape.param(params_.at("expand.b1")))),
      tape.param(params_.at("expand.w2")), tape.param(params_.at("expand.b2")));
  Tape::Ref post_in = tape.concat_cols(expanded, c_encoder);
  Tape::Ref mu = tape.dense(post_in, tape.param(params_.at("post.mu.w")),
                            tape.param(params_.at("post.mu.b")));
  Tape::Ref dec_in = tape.concat_cols(mu, c_decoder);
  Tape::Ref hidden = tape.relu(tape.dense(dec_in, tape.param(params_.at("dec.w1")),
                                          tape.param(params_.at("dec.b1"))));
  Tape::Ref goal_hat = tape.dense(hidden, tape.param(params_.at("dec.w2")),
                                  tape.param(params_.at("dec.b2")));
  const nn::Tensor& g = tape.val(goal_hat);
  return Position{g.v[0], g.v[1]};
}

}  // namespace insyn
