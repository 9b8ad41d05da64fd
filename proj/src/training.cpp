#include "insyn/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "insyn/error.hpp"
#include "insyn/rng.hpp"

namespace insyn {

Adam::Adam(std::vector<nn::ParamSet*> sets, double lr, double clip, double beta1, double beta2,
           double eps)
    : sets_(std::move(sets)), lr_(lr), clip_(clip), beta1_(beta1), beta2_(beta2), eps_(eps) {
  if (lr_ <= 0.0) fail("bad-config", "learning rate must be > 0");
  for (nn::ParamSet* set : sets_) {
    for (const std::string& name : set->names()) {
      size_t n = set->at(name).size();
      m_.push_back(std::vector<double>(n, 0.0));
      v_.push_back(std::vector<double>(n, 0.0));
    }
  }
}

void Adam::step() {
  ++step_;
  double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(step_));
  double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(step_));

  // First pass: moments and the bias-corrected update direction.
  std::vector<std::vector<double>> updates;
  size_t slot = 0;
  double norm_sq = 0.0;
  for (nn::ParamSet* set : sets_) {
    for (const std::string& name : set->names()) {
      nn::Tensor& t = set->at(name);
      std::vector<double>& m = m_[slot];
      std::vector<double>& v = v_[slot];
      std::vector<double> u(t.size());
      for (size_t i = 0; i < t.size(); ++i) {
        double g = t.g[i];
        if (!std::isfinite(g)) fail("diverged", "non-finite gradient in '" + name + "'");
        m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
        v[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
        double m_hat = m[i] / bc1;
        double v_hat = v[i] / bc2;
        u[i] = m_hat / (std::sqrt(v_hat) + eps_);
        norm_sq += u[i] * u[i];
      }
      updates.push_back(std::move(u));
      ++slot;
    }
  }

  double scale = 1.0;
  if (clip_ > 0.0) {
    double norm = std::sqrt(norm_sq);
    if (norm > clip_) scale = clip_ / norm;
  }

  slot = 0;
  for (nn::ParamSet* set : sets_) {
    for (const std::string& name : set->names()) {
      nn::Tensor& t = set->at(name);
      const std::vector<double>& u = updates[slot];
      for (size_t i = 0; i < t.size(); ++i) t.v[i] -= lr_ * scale * u[i];
      ++slot;
    }
    set->zero_grads();
  }
}

void write_loss_curve(std::ostream& out, const std::vector<LossCurvePoint>& curve) {
  out << "epoch,component,term,value\n";
  char buf[128];
  for (const LossCurvePoint& p : curve) {
    std::snprintf(buf, sizeof(buf), "%d,%s,%s,%.9g\n", p.epoch, p.component.c_str(),
                  p.term.c_str(), p.value);
    out << buf;
  }
}

namespace {

void check_dataset(const std::vector<SampleWindow>& dataset) {
  if (dataset.empty()) fail("empty-dataset", "training requires at least one window");
  for (const SampleWindow& w : dataset)
    if (!w.normalized) fail("bad-config", "training windows must be normalized");
}

std::vector<size_t> epoch_order(size_t n, uint64_t seed, int epoch) {
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  Rng rng(mix_seed(seed + static_cast<uint64_t>(epoch)));
  rng.shuffle(order);
  return order;
}

}  // namespace

GeneratorTraining train_generator(const std::vector<SampleWindow>& dataset,
                                  const TrainConfig& config, const ModelConfig& model_config,
                                  const EpochCallback& on_epoch) {
  GeneratorTraining result;
  result.model = std::make_unique<GeneratorModel>(model_config, config.ablations,
                                                  derive_seed(config.seed, "generator-init"));
  result.curve = train_generator(dataset, config, *result.model, on_epoch);
  return result;
}

std::vector<LossCurvePoint> train_generator(const std::vector<SampleWindow>& dataset,
                                            const TrainConfig& config, GeneratorModel& net,
                                            const EpochCallback& on_epoch) {
  check_dataset(dataset);
  if (config.epochs < 1) fail("bad-config", "epochs must be >= 1");
  int batch_size = std::max(1, config.batch_size);

  std::vector<LossCurvePoint> curve;
  Adam adam({&net.encoder_params(), &net.generator_params()}, config.lr_generator, config.clip);
  uint64_t shuffle_seed = derive_seed(config.seed, "generator-shuffle");

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::vector<size_t> order = epoch_order(dataset.size(), shuffle_seed, epoch);
    double sum_total = 0.0, sum_recon = 0.0, sum_pred = 0.0;
    for (size_t begin = 0; begin < order.size(); begin += batch_size) {
      size_t end = std::min(order.size(), begin + batch_size);
      double inv = 1.0 / static_cast<double>(end - begin);
      for (size_t i = begin; i < end; ++i) {
        nn::Tape tape;
        auto refs = net.build_loss(tape, dataset[order[i]], config.weights);
        sum_total += tape.scalar(refs.total);
        sum_pred += tape.scalar(refs.pred);
        if (refs.recon >= 0) sum_recon += tape.scalar(refs.recon);
        tape.backward(tape.scale(refs.total, inv));
      }
      adam.step();
    }
    double n = static_cast<double>(dataset.size());
    curve.push_back({epoch, "generator", "total", sum_total / n});
    curve.push_back({epoch, "generator", "recon", sum_recon / n});
    curve.push_back({epoch, "generator", "pred", sum_pred / n});
    if (on_epoch && config.checkpoint_every > 0 && epoch % config.checkpoint_every == 0)
      on_epoch(epoch);
  }
  return curve;
}

CvaeTraining train_seqcvae(const std::vector<SampleWindow>& dataset, const TrainConfig& config,
                           const ModelConfig& model_config, const EpochCallback& on_epoch) {
  CvaeTraining result;
  result.model =
      std::make_unique<CvaeModel>(model_config, derive_seed(config.seed, "cvae-init"));
  result.curve = train_seqcvae(dataset, config, *result.model, on_epoch);
  return result;
}

std::vector<LossCurvePoint> train_seqcvae(const std::vector<SampleWindow>& dataset,
                                          const TrainConfig& config, CvaeModel& net,
                                          const EpochCallback& on_epoch) {
  check_dataset(dataset);
  if (config.epochs < 1) fail("bad-config", "epochs must be >= 1");
  int batch_size = std::max(1, config.batch_size);

  std::vector<LossCurvePoint> curve;
  Adam adam({&net.params()}, config.lr_cvae, config.clip);
  uint64_t shuffle_seed = derive_seed(config.seed, "cvae-shuffle");
  uint64_t eps_seed = derive_seed(config.seed, "cvae-eps");
  int latent = net.config().cvae_latent;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::vector<size_t> order = epoch_order(dataset.size(), shuffle_seed, epoch);
    Rng eps_rng(mix_seed(eps_seed + static_cast<uint64_t>(epoch)));
    double sum_total = 0.0, sum_recon = 0.0, sum_kl = 0.0;
    for (size_t begin = 0; begin < order.size(); begin += batch_size) {
      size_t end = std::min(order.size(), begin + batch_size);
      double inv = 1.0 / static_cast<double>(end - begin);
      for (size_t i = begin; i < end; ++i) {
        nn::Tensor eps(1, latent);
        for (double& x : eps.v) x = eps_rng.normal();
        nn::Tape tape;
        auto refs = net.build_loss(tape, dataset[order[i]], eps, config.weights.beta_kl);
        sum_total += tape.scalar(refs.total);
        sum_recon += tape.scalar(refs.recon);
        sum_kl += tape.scalar(refs.kl);
        tape.backward(tape.scale(refs.total, inv));
      }
      adam.step();
    }
    double n = static_cast<double>(dataset.size());
    curve.push_back({epoch, "cvae", "total", sum_total / n});
    curve.push_back({epoch, "cvae", "recon", sum_recon / n});
    curve.push_back({epoch, "cvae", "kl", sum_kl / n});
    if (on_epoch && config.checkpoint_every > 0 && epoch % config.checkpoint_every == 0)
      on_epoch(epoch);
  }
  return curve;
}

}  // namespace insyn
