#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "insyn/model.hpp"
#include "insyn/preprocess.hpp"

namespace insyn {

struct TrainConfig {
  double lr_generator = 1e-4;
  double lr_cvae = 1e-3;
  int epochs = 50;
  int batch_size = 32;
  uint64_t seed = 1;
  LossWeights weights;
  AblationFlags ablations;
  // Caps the per-step parameter-delta norm at lr * clip by rescaling the Adam
  // update direction; <= 0 disables.
  double clip = 1.0;
  int checkpoint_every = 0;  // epochs between checkpoint callbacks; 0 = final only
};

// Bias-corrected Adam over one or more parameter sets, with an optional bound
// on the global update norm.
class Adam {
 public:
  Adam(std::vector<nn::ParamSet*> sets, double lr, double clip,
       double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

  // Applies one update from the accumulated gradients and zeroes them.
  void step();
  int64_t step_count() const { return step_; }
  double lr() const { return lr_; }

 private:
  std::vector<nn::ParamSet*> sets_;
  double lr_, clip_, beta1_, beta2_, eps_;
  int64_t step_ = 0;
  std::vector<std::vector<double>> m_, v_;  // aligned with sets_/names order
};

struct LossCurvePoint {
  int epoch = 0;
  std::string component;
  std::string term;
  double value = 0.0;
};

void write_loss_curve(std::ostream& out, const std::vector<LossCurvePoint>& curve);

struct GeneratorTraining {
  std::unique_ptr<GeneratorModel> model;
  std::vector<LossCurvePoint> curve;
};

struct CvaeTraining {
  std::unique_ptr<CvaeModel> model;
  std::vector<LossCurvePoint> curve;
};

using EpochCallback = std::function<void(int epoch)>;

// Trains the Interaction Encoder + Trajectory Generator with teacher forcing
// and ground-truth goals at the final token.
GeneratorTraining train_generator(const std::vector<SampleWindow>& dataset,
                                  const TrainConfig& config, const ModelConfig& model_config,
                                  const EpochCallback& on_epoch = {});

// In-place variant for callers that keep ownership (the checkpoint callback
// may reference the model).
std::vector<LossCurvePoint> train_generator(const std::vector<SampleWindow>& dataset,
                                            const TrainConfig& config, GeneratorModel& model,
                                            const EpochCallback& on_epoch = {});

CvaeTraining train_seqcvae(const std::vector<SampleWindow>& dataset, const TrainConfig& config,
                           const ModelConfig& model_config, const EpochCallback& on_epoch = {});

std::vector<LossCurvePoint> train_seqcvae(const std::vector<SampleWindow>& dataset,
                                          const TrainConfig& config, CvaeModel& model,
                                          const EpochCallback& on_epoch = {});

}  // namespace insyn
