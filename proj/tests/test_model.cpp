#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "insyn/checkpoint.hpp"
#include "insyn/error.hpp"
#include "insyn/model.hpp"
#include "insyn/preprocess.hpp"
#include "insyn/rng.hpp"
#include "insyn/synth.hpp"

using namespace insyn;
using nn::Tape;
using nn::Tensor;

namespace {

ModelConfig tiny_config() {
  ModelConfig cfg;
  cfg.model_dim = 16;
  cfg.heads = 2;
  cfg.enc_layers = 1;
  cfg.dec_layers = 1;
  cfg.ffn_dim = 24;
  cfg.neighbor_hidden = 8;
  cfg.cvae_hidden = 12;
  cfg.cvae_latent = 6;
  cfg.cvae_cond_dim = 5;
  cfg.cvae_expand_hidden = 4;
  cfg.cvae_expand_dim = 7;
  cfg.cvae_dec_hidden = 9;
  return cfg;
}

std::vector<SampleWindow> normalized_windows(uint64_t seed, int steps = 24,
                                             double noise = 0.02) {
  synth::ScenarioSpec spec;
  spec.kind = synth::ScenarioKind::Mixed;
  spec.steps = steps;
  spec.seed = seed;
  spec.noise = noise;
  spec.mixed_groups = 3;
  Scene scene = synth::generate(spec).scene;
  auto windows = window_scene(scene, 2.0, RegionMode::FourQuadrants, "t");
  FeatureStats stats = fit_stats(windows);
  std::vector<SampleWindow> out;
  for (const SampleWindow& w : windows) out.push_back(apply_stats(w, stats));
  return out;
}

}  // namespace

TEST_CASE("neighbor_encode pools identical region vectors to the shared vector") {
  GeneratorModel model(tiny_config(), {}, 1);
  Tape tape;
  std::array<int, 4> states = {0, 0, 0, 0};
  std::array<double, 4> dists = {0.2, 0.2, 0.2, 0.2};
  Tape::Ref pooled = model.neighbor_encode(tape, states, dists);

  // expected: one region vector, computed directly from the parameters
  const Tensor& table = model.encoder_params().at("nb.embed");
  const Tensor& gw = model.encoder_params().at("nb.gate.w");
  const Tensor& gb = model.encoder_params().at("nb.gate.b");
  for (int j = 0; j < 8; ++j) {
    double gate = 1.0 / (1.0 + std::exp(-(gw.at(0, j) * 0.2 + gb.at(0, j))));
    CHECK(tape.val(pooled).v[j] == doctest::Approx(table.at(0, j) * gate).epsilon(1e-12));
  }
}

TEST_CASE("neighbor_encode with zeroed gate parameters halves the embedding max") {
  GeneratorModel model(tiny_config(), {}, 2);
  Tensor& gw = model.encoder_params().at("nb.gate.w");
  Tensor& gb = model.encoder_params().at("nb.gate.b");
  std::fill(gw.v.begin(), gw.v.end(), 0.0);
  std::fill(gb.v.begin(), gb.v.end(), 0.0);

  Tape tape;
  std::array<int, 4> states = {0, 1, 2, 1};
  std::array<double, 4> dists = {0.1, 0.9, 0.4, 0.0};
  Tape::Ref pooled = model.neighbor_encode(tape, states, dists);
  const Tensor& table = model.encoder_params().at("nb.embed");
  for (int j = 0; j < 8; ++j) {
    double m = std::max({table.at(0, j), table.at(1, j), table.at(2, j)});
    CHECK(tape.val(pooled).v[j] == doctest::Approx(0.5 * m).epsilon(1e-12));
  }
}

TEST_CASE("neighbor_encode matches the reference implementation on random inputs") {
  GeneratorModel model(tiny_config(), {}, 3);
  const Tensor& table = model.encoder_params().at("nb.embed");
  const Tensor& gw = model.encoder_params().at("nb.gate.w");
  const Tensor& gb = model.encoder_params().at("nb.gate.b");
  Rng rng(33);
  for (int trial = 0; trial < 1000; ++trial) {
    std::array<int, 4> states;
    std::array<double, 4> dists;
    for (int r = 0; r < 4; ++r) {
      states[r] = static_cast<int>(rng.below(3));
      dists[r] = rng.uniform(0.0, 1.0);
    }
    Tape tape;
    Tape::Ref pooled = model.neighbor_encode(tape, states, dists);
    // embed, gate, multiply, componentwise max
    for (int j = 0; j < 8; ++j) {
      double best = -1e300;
      for (int r = 0; r < 4; ++r) {
        double gate = 1.0 / (1.0 + std::exp(-(gw.at(0, j) * dists[r] + gb.at(0, j))));
        best = std::max(best, table.at(states[r], j) * gate);
      }
      CHECK(tape.val(pooled).v[j] == doctest::Approx(best).epsilon(1e-9));
    }
  }
}

TEST_CASE("neighbor_encode rejects invalid state indices") {
  GeneratorModel model(tiny_config(), {}, 4);
  Tape tape;
  CHECK_THROWS_AS(model.neighbor_encode(tape, {0, 1, 3, 0}, {0.1, 0.1, 0.1, 0.1}), Error);
}

TEST_CASE("a dominating region vector wins the pooling exactly") {
  GeneratorModel model(tiny_config(), {}, 5);
  Tensor& table = model.encoder_params().at("nb.embed");
  Tensor& gw = model.encoder_params().at("nb.gate.w");
  Tensor& gb = model.encoder_params().at("nb.gate.b");
  std::fill(gw.v.begin(), gw.v.end(), 0.0);
  std::fill(gb.v.begin(), gb.v.end(), 0.0);
  for (int j = 0; j < 8; ++j) {
    table.at(0, j) = -0.5;
    table.at(1, j) = 0.25;
    table.at(2, j) = 10.0 + j;  // dominates every component
  }
  Tape tape;
  Tape::Ref pooled = model.neighbor_encode(tape, {0, 1, 2, 1}, {0.5, 0.5, 0.5, 0.5});
  for (int j = 0; j < 8; ++j)
    CHECK(tape.val(pooled).v[j] == 0.5 * (10.0 + j));  // exact argmax routing
}

TEST_CASE("distance gate activations stay strictly inside (0,1)") {
  GeneratorModel model(tiny_config(), {}, 6);
  const Tensor& gw = model.encoder_params().at("nb.gate.w");
  const Tensor& gb = model.encoder_params().at("nb.gate.b");
  Rng rng(66);
  for (int trial = 0; trial < 2000; ++trial) {
    double d = rng.uniform(0.0, 1.0);
    for (int j = 0; j < 8; ++j) {
      double gate = 1.0 / (1.0 + std::exp(-(gw.at(0, j) * d + gb.at(0, j))));
      CHECK(gate > 0.0);
      CHECK(gate < 1.0);
    }
  }
}

TEST_CASE("encoder memory has one row per token and sees the goal") {
  auto windows = normalized_windows(7);
  REQUIRE_FALSE(windows.empty());
  GeneratorModel model(tiny_config(), {}, 7);
  Tape tape;
  Tape::Ref mem_a = model.encode(tape, windows[0], Position{1.0, 2.0});
  CHECK(tape.val(mem_a).rows == kWindowSteps);
  CHECK(tape.val(mem_a).cols == 16);

  Tape::Ref mem_b = model.encode(tape, windows[0], Position{-1.0, 0.5});
  double diff = 0.0;
  for (size_t i = 0; i < tape.val(mem_a).v.size(); ++i)
    diff += std::abs(tape.val(mem_a).v[i] - tape.val(mem_b).v[i]);
  CHECK(diff > 1e-9);
}

TEST_CASE("permuting interaction history changes the memory") {
  auto windows = normalized_windows(8);
  // pick a window whose interaction features vary over time
  const SampleWindow* chosen = nullptr;
  for (const SampleWindow& w : windows) {
    for (int t = 1; t < kObsSteps; ++t)
      if (w.obs[t].interaction.slots != w.obs[0].interaction.slots) { chosen = &w; break; }
    if (chosen) break;
  }
  REQUIRE(chosen != nullptr);

  SampleWindow permuted = *chosen;
  // reverse the interaction sequence but keep positions
  for (int t = 0; t < kObsSteps; ++t)
    permuted.obs[t].interaction = chosen->obs[kObsSteps - 1 - t].interaction;

  GeneratorModel model(tiny_config(), {}, 8);
  Tape tape;
  Tape::Ref a = model.encode(tape, *chosen, chosen->goal());
  Tape::Ref b = model.encode(tape, permuted, permuted.goal());
  double diff = 0.0;
  for (size_t i = 0; i < tape.val(a).v.size(); ++i)
    diff += std::abs(tape.val(a).v[i] - tape.val(b).v[i]);
  CHECK(diff > 1e-9);
}

TEST_CASE("memory of a neighbor-free scene is radius-invariant") {
  synth::ScenarioSpec spec;
  spec.kind = synth::ScenarioKind::LoneWalker;
  spec.steps = 20;
  spec.seed = 9;
  Scene scene = synth::generate(spec).scene;
  auto build = [&](double radius) {
    auto windows = window_scene(scene, radius);
    FeatureStats stats = fit_stats(windows);
    return apply_stats(windows.at(0), stats);
  };
  SampleWindow near = build(2.0);
  SampleWindow far = build(5.0);
  GeneratorModel model(tiny_config(), {}, 9);
  Tape tape;
  Tape::Ref a = model.encode(tape, near, near.goal());
  Tape::Ref b = model.encode(tape, far, far.goal());
  CHECK(tape.val(a).v == tape.val(b).v);
}

TEST_CASE("the goal token carries the final positional-encoding row") {
  // with no encoder layers the memory is the fused projection, so the token
  // layout (pads flagged, goal at the last index, PE row T) is directly
  // observable
  ModelConfig cfg = tiny_config();
  cfg.enc_layers = 0;
  auto windows = normalized_windows(10);
  REQUIRE_FALSE(windows.empty());
  const SampleWindow& w = windows[0];
  GeneratorModel model(cfg, {}, 10);
  Position goal{0.3, -0.8};

  Tape tape;
  Tape::Ref memory = model.encode(tape, w, goal);

  // hand-build the expected goal-token row
  nn::ParamSet& p = model.encoder_params();
  Tensor pe = nn::positional_encoding(kWindowSteps, cfg.model_dim);
  Tape check;
  std::vector<Tape::Ref> pooled;
  for (int t = 0; t < kObsSteps; ++t) {
    std::array<int, 4> states;
    std::array<double, 4> dists;
    for (int r = 0; r < 4; ++r) {
      states[r] = static_cast<int>(w.obs[t].interaction.slots[r].state);
      dists[r] = w.obs[t].interaction.slots[r].distance;
    }
    pooled.push_back(model.neighbor_encode(check, states, dists));
  }
  Tape::Ref seq = check.concat_rows(pooled);
  Tape::Ref h = nn::recurrent_last_hidden(check, seq, check.param(p.at("nb.lstm.w")),
                                          check.param(p.at("nb.lstm.b")), cfg.neighbor_hidden);
  Tensor goal_tok(1, 3);
  goal_tok.at(0, 0) = goal.x;
  goal_tok.at(0, 1) = goal.y;
  Tape::Ref row = check.dense(check.constant(goal_tok), check.param(p.at("tok.w")),
                              check.param(p.at("tok.b")));
  Tensor pe_row(1, cfg.model_dim);
  for (int j = 0; j < cfg.model_dim; ++j) pe_row.at(0, j) = pe.at(kWindowSteps - 1, j);
  row = check.add(row, check.constant(pe_row));
  row = check.concat_cols(row, h);
  row = check.dense(row, check.param(p.at("fuse.w")), check.param(p.at("fuse.b")));

  for (int j = 0; j < cfg.model_dim; ++j)
    CHECK(tape.val(memory).at(kWindowSteps - 1, j) ==
          doctest::Approx(check.val(row).at(0, j)).epsilon(1e-12));
}

TEST_CASE("SSOS slot alignment is structural") {
  GeneratorModel ssos(tiny_config(), {}, 11);
  CHECK(ssos.decoder_input_len() == 19);
  CHECK(ssos.recon_pred_split() == 7);

  AblationFlags sos;
  sos.use_ssos = false;
  GeneratorModel plain(tiny_config(), sos, 11);
  CHECK(plain.decoder_input_len() == 12);
  CHECK(plain.recon_pred_split() == 0);
}

TEST_CASE("ssos loss combines recon and pred with the configured weights") {
  auto windows = normalized_windows(12);
  GeneratorModel model(tiny_config(), {}, 12);

  LossWeights both{1.0, 1.0, 5.0};
  Tape t1;
  auto refs = model.build_loss(t1, windows[0], both);
  CHECK(t1.scalar(refs.total) ==
        doctest::Approx(t1.scalar(refs.recon) + t1.scalar(refs.pred)).epsilon(1e-12));

  LossWeights pred_only{0.0, 1.0, 5.0};
  Tape t2;
  auto refs2 = model.build_loss(t2, windows[0], pred_only);
  CHECK(t2.scalar(refs2.total) == doctest::Approx(t2.scalar(refs2.pred)).epsilon(1e-12));

  // perfect outputs mean zero loss
  Tape t3;
  Tape::Ref same = t3.mse(t3.constant(Tensor::row({1.0, 2.0})),
                          t3.constant(Tensor::row({1.0, 2.0})));
  CHECK(t3.scalar(same) == 0.0);
}

TEST_CASE("ssos loss gradients match finite differences") {
  ModelConfig cfg = tiny_config();
  cfg.model_dim = 8;
  cfg.ffn_dim = 12;
  cfg.neighbor_hidden = 6;
  auto windows = normalized_windows(13);
  GeneratorModel model(cfg, {}, 13);
  LossWeights weights{0.7, 1.3, 5.0};
  auto run = [&](bool accumulate) {
    Tape tape;
    auto refs = model.build_loss(tape, windows[0], weights);
    if (accumulate) tape.backward(refs.total);
    return tape.scalar(refs.total);
  };
  // both parameter sets feed the loss
  double err = 0.0;
  {
    nn::ParamSet& enc = model.encoder_params();
    err = std::max(err, nn::grad_check(enc, run, 1e-5, 25, 7));
    nn::ParamSet& gen = model.generator_params();
    err = std::max(err, nn::grad_check(gen, run, 1e-5, 25, 8));
  }
  CHECK(err < 1e-3);
}

TEST_CASE("decode returns 12 steps ending exactly at the goal, deterministically") {
  auto windows = normalized_windows(14);
  GeneratorModel model(tiny_config(), {}, 14);
  Position goal{0.8, -0.2};
  auto traj = model.decode(windows[0], goal);
  CHECK(traj.size() == kFutureSteps);
  CHECK(traj[kFutureSteps - 1].x == goal.x);
  CHECK(traj[kFutureSteps - 1].y == goal.y);
  auto again = model.decode(windows[0], goal);
  for (int t = 0; t < kFutureSteps; ++t) {
    CHECK(traj[t].x == again[t].x);
    CHECK(traj[t].y == again[t].y);
  }

  AblationFlags sos;
  sos.use_ssos = false;
  GeneratorModel plain(tiny_config(), sos, 14);
  auto traj2 = plain.decode(windows[0], goal);
  CHECK(traj2[kFutureSteps - 1].x == goal.x);
}

TEST_CASE("cvae loss: zeroed posterior heads give exactly zero KL") {
  auto windows = normalized_windows(15);
  CvaeModel model(tiny_config(), 15);
  for (const char* name : {"post.mu.w", "post.mu.b", "post.ls.w", "post.ls.b"}) {
    Tensor& t = model.params().at(name);
    std::fill(t.v.begin(), t.v.end(), 0.0);
  }
  Tensor eps(1, 6);
  Tape tape;
  auto refs = model.build_loss(tape, windows[0], eps, 5.0);
  CHECK(tape.scalar(refs.kl) == 0.0);  // mu = 0, log sigma = 0
}

TEST_CASE("KL to the standard normal is nonnegative") {
  // closed form per dimension: 0.5*(mu^2 + sigma^2 - 1) - log sigma
  Rng rng(16);
  for (int i = 0; i < 10000; ++i) {
    double mu = rng.uniform(-4, 4);
    double log_sigma = rng.uniform(-3, 3);
    double sigma = std::exp(log_sigma);
    double kl = 0.5 * (mu * mu + sigma * sigma - 1.0) - log_sigma;
    CHECK(kl >= -1e-12);
  }
  // and through the model path
  auto windows = normalized_windows(16);
  CvaeModel model(tiny_config(), 16);
  for (int i = 0; i < 50; ++i) {
    Tensor eps(1, 6);
    Rng erng(100 + i);
    for (double& x : eps.v) x = erng.normal();
    Tape tape;
    auto refs = model.build_loss(tape, windows[i % windows.size()], eps, 5.0);
    CHECK(tape.scalar(refs.kl) >= 0.0);
  }
}

TEST_CASE("cvae loss is deterministic for a fixed eps and passes the gradient check") {
  auto windows = normalized_windows(17);
  CvaeModel model(tiny_config(), 17);
  Tensor eps(1, 6);
  Rng rng(17);
  for (double& x : eps.v) x = rng.normal();

  auto run = [&](bool accumulate) {
    Tape tape;
    auto refs = model.build_loss(tape, windows[0], eps, 5.0);
    if (accumulate) tape.backward(refs.total);
    return tape.scalar(refs.total);
  };
  CHECK(run(false) == run(false));
  CHECK(nn::grad_check(model.params(), run, 1e-5, 30, 3) < 1e-3);
}

TEST_CASE("checkpoints round-trip at float32 and validate shapes on load") {
  namespace fs = std::filesystem;
  fs::path path = fs::temp_directory_path() / "insyn_test_model.ckpt";
  ModelConfig cfg = tiny_config();
  GeneratorModel model(cfg, {}, 21);
  CvaeModel cvae(cfg, 22);
  nlohmann::json meta = {{"model", cfg.to_json()}};
  save_checkpoint(path.string(), meta,
                  {{"encoder", &model.encoder_params()},
                   {"generator", &model.generator_params()},
                   {"cvae", &cvae.params()}});

  GeneratorModel reloaded(cfg, {}, 99);  // different init, overwritten by the load
  CvaeModel reloaded_cvae(cfg, 98);
  nlohmann::json back =
      load_checkpoint(path.string(), {{"encoder", &reloaded.encoder_params()},
                                      {"generator", &reloaded.generator_params()},
                                      {"cvae", &reloaded_cvae.params()}});
  CHECK(back.at("model") == cfg.to_json());
  for (const std::string& name : model.encoder_params().names()) {
    const nn::Tensor& a = model.encoder_params().at(name);
    const nn::Tensor& b = reloaded.encoder_params().at(name);
    for (size_t i = 0; i < a.size(); ++i)
      CHECK(b.v[i] == static_cast<double>(static_cast<float>(a.v[i])));
  }

  // a model with different dimensions must refuse the checkpoint
  ModelConfig other = cfg;
  other.model_dim = 24;
  other.heads = 2;
  GeneratorModel wrong(other, {}, 1);
  CvaeModel wrong_cvae(other, 1);
  CHECK_THROWS_AS(load_checkpoint(path.string(),
                                  {{"encoder", &wrong.encoder_params()},
                                   {"generator", &wrong.generator_params()},
                                   {"cvae", &wrong_cvae.params()}}),
                  Error);
  fs::remove(path);
}

TEST_CASE("sampling yields K spread-out goals, deterministic per seed") {
  auto windows = normalized_windows(18);
  CvaeModel model(tiny_config(), 18);
  auto goals = model.sample(windows[0], 20, 5);
  REQUIRE(goals.size() == 20);
  auto again = model.sample(windows[0], 20, 5);
  for (int i = 0; i < 20; ++i) {
    CHECK(goals[i].x == again[i].x);
    CHECK(goals[i].y == again[i].y);
  }
  bool all_same = true;
  for (int i = 1; i < 20; ++i)
    if (goals[i].x != goals[0].x || goals[i].y != goals[0].y) all_same = false;
  CHECK_FALSE(all_same);

  Position mode = model.mode_goal(windows[0]);
  Position mode2 = model.mode_goal(windows[0]);
  CHECK(mode.x == mode2.x);
  CHECK(mode.y == mode2.y);

  CHECK_THROWS_AS(model.sample(windows[0], 0, 5), Error);
}
