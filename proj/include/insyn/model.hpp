#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "insyn/nn.hpp"
#include "insyn/preprocess.hpp"

namespace insyn {

struct ModelConfig {
  int model_dim = 128;
  int heads = 4;
  int enc_layers = 2;
  int dec_layers = 2;
  int ffn_dim = 256;
  int neighbor_hidden = 128;
  int cvae_hidden = 256;
  int cvae_latent = 256;
  int cvae_cond_dim = 128;
  int cvae_expand_hidden = 64;
  int cvae_expand_dim = 256;
  int cvae_dec_hidden = 256;

  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
};

struct AblationFlags {
  bool use_region_partition = true;
  bool use_interaction_state = true;
  bool use_ssos = true;

  RegionMode region_mode() const {
    return use_region_partition ? RegionMode::FourQuadrants : RegionMode::SingleNearest;
  }
  nlohmann::json to_json() const;
  static AblationFlags from_json(const nlohmann::json& j);
};

struct LossWeights {
  double lambda_recon = 1.0;  // weight of the reconstructed observed trajectory
  double lambda_pred = 1.0;   // weight of the predicted trajectory
  double beta_kl = 5.0;
};

// Interaction Encoder plus Trajectory Generator. The two parameter groups are
// trained jointly but checkpointed as separate sections.
class GeneratorModel {
 public:
  // Length of the teacher-forced decoder input: the full observed sequence
  // plus the future except the goal, or just the last observed step when the
  // sequence start is disabled.
  static constexpr int kEncoderTokens = kWindowSteps;

  GeneratorModel(const ModelConfig& cfg, const AblationFlags& flags, uint64_t init_seed);

  // Gated region embeddings pooled over the four slots -> [1 x hidden].
  // States and distances must be the model-ready features (normalized).
  nn::Tape::Ref neighbor_encode(nn::Tape& tape, const std::array<int, kNumRegions>& states,
                                const std::array<double, kNumRegions>& distances);

  // Full interaction-encoder memory [kEncoderTokens x model_dim].
  nn::Tape::Ref encode(nn::Tape& tape, const SampleWindow& w, const Position& goal);

  struct LossRefs {
    nn::Tape::Ref total;
    nn::Tape::Ref recon;  // -1 when the reconstruction term is absent
    nn::Tape::Ref pred;
  };
  // Teacher-forced loss for one window; ground-truth goal at the final token.
  LossRefs build_loss(nn::Tape& tape, const SampleWindow& w, const LossWeights& weights);

  // Autoregressive decode; the final returned step is the goal itself.
  std::array<Position, kFutureSteps> decode(const SampleWindow& w, const Position& goal);

  int decoder_input_len() const { return flags_.use_ssos ? kWindowSteps - 1 : kFutureSteps; }
  int recon_pred_split() const { return flags_.use_ssos ? kObsSteps - 1 : 0; }

  const ModelConfig& config() const { return cfg_; }
  const AblationFlags& flags() const { return flags_; }
  nn::ParamSet& encoder_params() { return encoder_params_; }
  nn::ParamSet& generator_params() { return generator_params_; }

 private:
  nn::Tape::Ref decoder_forward(nn::Tape& tape, nn::Tape::Ref memory,
                                const std::vector<Position>& tokens);

  ModelConfig cfg_;
  AblationFlags flags_;
  nn::ParamSet encoder_params_;
  nn::ParamSet generator_params_;
  nn::Tensor pos_encoding_;
};

// Sequence-conditioned variational goal sampler.
class CvaeModel {
 public:
  CvaeModel(const ModelConfig& cfg, uint64_t init_seed);

  struct LossRefs {
    nn::Tape::Ref total;
    nn::Tape::Ref recon;
    nn::Tape::Ref kl;
  };
  // ELBO-style loss with the reparameterization trick; `eps` is the [1 x
  // latent] standard-normal draw supplied by the caller.
  LossRefs build_loss(nn::Tape& tape, const SampleWindow& w, const nn::Tensor& eps,
                      double beta_kl);

  // K goals decoded from z ~ N(0, I); deterministic given the seed.
  std::vector<Position> sample(const SampleWindow& w, int k, uint64_t seed);

  // Degenerate latent: the goal decoded from z = 0.
  Position mode_goal(const SampleWindow& w);

  // Posterior-mean reconstruction of a known goal (z = mu).
  Position reconstruct_mean(const SampleWindow& w, const Position& goal);

  const ModelConfig& config() const { return cfg_; }
  nn::ParamSet& params() { return params_; }

 private:
  nn::Tape::Ref condition(nn::Tape& tape, const SampleWindow& w);

  ModelConfig cfg_;
  nn::ParamSet params_;
};

std::vector<Position> observed_positions(const SampleWindow& w);

}  // namespace insyn
