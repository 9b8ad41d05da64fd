#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "insyn/error.hpp"
#include "insyn/evaluation.hpp"
#include "insyn/rng.hpp"
#include "insyn/synth.hpp"

using namespace insyn;

namespace {

std::array<Position, kFutureSteps> shifted(const std::array<Position, kFutureSteps>& base,
                                           double dx, double dy) {
  std::array<Position, kFutureSteps> out = base;
  for (Position& p : out) {
    p.x += dx;
    p.y += dy;
  }
  return out;
}

std::array<Position, kFutureSteps> random_traj(Rng& rng) {
  std::array<Position, kFutureSteps> out;
  for (Position& p : out) p = Position{rng.uniform(-5, 5), rng.uniform(-5, 5)};
  return out;
}

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

std::vector<SampleWindow> normalized_windows(uint64_t seed) {
  synth::ScenarioSpec spec;
  spec.kind = synth::ScenarioKind::Mixed;
  spec.steps = 24;
  spec.seed = seed;
  spec.noise = 0.02;
  spec.mixed_groups = 3;
  Scene scene = synth::generate(spec).scene;
  auto windows = window_scene(scene, 2.0, RegionMode::FourQuadrants, "e");
  FeatureStats stats = fit_stats(windows);
  std::vector<SampleWindow> out;
  for (const SampleWindow& w : windows) out.push_back(apply_stats(w, stats));
  return out;
}

}  // namespace

TEST_CASE("metric hand cases") {
  Rng rng(1);
  auto truth = random_traj(rng);
  CHECK(ade(truth, truth) == 0.0);
  CHECK(fde(truth[11], truth[11]) == 0.0);
  CHECK(ide(truth[0], truth[0]) == 0.0);

  // 3-4-5 triangle: every step offset by (0.3, 0.4) is 0.5 away
  auto offset = shifted(truth, 0.3, 0.4);
  CHECK(ade(offset, truth) == doctest::Approx(0.5).epsilon(1e-12));

  CHECK(fde(Position{0, 0}, Position{1, 1}) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
  CHECK(ide(Position{0.06, 0.08}, Position{0, 0}) == doctest::Approx(0.1).epsilon(1e-12));

  // a single-step window degenerates to FDE
  std::vector<Position> one_pred = {Position{2, 2}};
  std::vector<Position> one_truth = {Position{1, 1}};
  CHECK(ade(one_pred, one_truth) == fde(one_pred[0], one_truth[0]));

  // IDE depends only on the first prediction step
  auto late = truth;
  for (int t = 1; t < kFutureSteps; ++t) late[t] = Position{99, 99};
  CHECK(ide(late[0], truth[0]) == 0.0);
}

TEST_CASE("metric symmetry and translation invariance") {
  Rng rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    auto a = random_traj(rng);
    auto b = random_traj(rng);
    CHECK(ade(a, b) == ade(b, a));
    double dx = rng.uniform(-10, 10), dy = rng.uniform(-10, 10);
    CHECK(ade(shifted(a, dx, dy), shifted(b, dx, dy)) ==
          doctest::Approx(ade(a, b)).epsilon(1e-9));
  }
}

TEST_CASE("best_of_k selects the ADE-minimizing sample and logs independent minima") {
  Rng rng(3);
  auto truth = random_traj(rng);

  PredictionSet single;
  single.trajectories = {shifted(truth, 0.3, 0.4)};
  single.goals = {single.trajectories[0][11]};
  BestOfK one = best_of_k(single, truth);
  CHECK(one.best_index == 0);
  CHECK(one.ade == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(one.fde == one.fde_min);
  CHECK(one.ide == one.ide_min);

  PredictionSet with_perfect = single;
  with_perfect.trajectories.push_back(truth);
  with_perfect.goals.push_back(truth[11]);
  BestOfK best = best_of_k(with_perfect, truth);
  CHECK(best.best_index == 1);
  CHECK(best.ade == 0.0);

  for (int trial = 0; trial < 200; ++trial) {
    int k = 1 + static_cast<int>(rng.below(20));
    PredictionSet pset;
    for (int i = 0; i < k; ++i) {
      pset.trajectories.push_back(random_traj(rng));
      pset.goals.push_back(pset.trajectories.back()[11]);
    }
    BestOfK b = best_of_k(pset, truth);
    double prev_best = 1e300;
    for (int i = 0; i < k; ++i) {
      double a = ade(pset.trajectories[i], truth);
      CHECK(b.ade <= a);  // min property, exhaustive
      prev_best = std::min(prev_best, a);
    }
    CHECK(b.ade == prev_best);
    CHECK(b.ide >= b.ide_min);
    CHECK(b.fde >= b.fde_min);

    // adding a sample never increases the best ADE
    PredictionSet grown = pset;
    grown.trajectories.push_back(random_traj(rng));
    grown.goals.push_back(grown.trajectories.back()[11]);
    CHECK(best_of_k(grown, truth).ade <= b.ade + 1e-15);
  }
}

TEST_CASE("oracle injection drives the report to zero ADE") {
  auto windows = normalized_windows(60);
  REQUIRE_FALSE(windows.empty());
  GeneratorModel generator(tiny_config(), {}, 61);
  CvaeModel cvae(tiny_config(), 62);

  EvalOptions options;
  options.k = 3;
  options.inject_truth = true;
  MetricReport report = evaluate_split(generator, cvae, windows, options);
  CHECK(report.mean_ade == 0.0);
  CHECK(report.mean_fde == 0.0);
  CHECK(report.mean_ide == 0.0);
  CHECK(report.rows.size() == windows.size());
}

TEST_CASE("evaluation reports are deterministic and job-count independent") {
  auto windows = normalized_windows(63);
  GeneratorModel generator(tiny_config(), {}, 64);
  CvaeModel cvae(tiny_config(), 65);

  EvalOptions options;
  options.k = 4;
  options.seed = 9;
  options.with_plot_dump = true;
  MetricReport a = evaluate_split(generator, cvae, windows, options);
  MetricReport b = evaluate_split(generator, cvae, windows, options);
  EvalOptions parallel = options;
  parallel.jobs = 3;
  MetricReport c = evaluate_split(generator, cvae, windows, parallel);

  REQUIRE(a.rows.size() == b.rows.size());
  REQUIRE(a.rows.size() == c.rows.size());
  for (size_t i = 0; i < a.rows.size(); ++i) {
    CHECK(a.rows[i].best.ade == b.rows[i].best.ade);
    CHECK(a.rows[i].best.ade == c.rows[i].best.ade);
    CHECK(a.rows[i].best.fde == c.rows[i].best.fde);
  }
  CHECK(a.plot.size() == c.plot.size());

  std::ostringstream ra, rc;
  write_report(ra, a, "cafe");
  write_report(rc, c, "cafe");
  CHECK(ra.str() == rc.str());
}

TEST_CASE("truth goal mode pins the final step to the ground-truth goal") {
  auto windows = normalized_windows(66);
  GeneratorModel generator(tiny_config(), {}, 67);
  CvaeModel cvae(tiny_config(), 68);
  EvalOptions options;
  options.goal_mode = GoalMode::Truth;
  MetricReport report = evaluate_split(generator, cvae, windows, options);
  for (const WindowMetrics& m : report.rows) CHECK(m.best.fde == 0.0);
}

TEST_CASE("report and plot dumps are well-formed") {
  auto windows = normalized_windows(69);
  GeneratorModel generator(tiny_config(), {}, 70);
  CvaeModel cvae(tiny_config(), 71);
  EvalOptions options;
  options.k = 2;
  options.with_plot_dump = true;
  MetricReport report = evaluate_split(generator, cvae, windows, options);

  std::ostringstream out;
  write_report(out, report, "feed");
  std::string text = out.str();
  CHECK(text.find("# insyn-report 1") == 0);
  CHECK(text.find("# config feed") != std::string::npos);
  CHECK(text.find("scene,agent,start,ade,fde,ide") != std::string::npos);

  std::ostringstream plot;
  write_plot_dump(plot, report.plot);
  CHECK(report.plot.size() == windows.size() * 2);
  CHECK(plot.str().find("goal_x") != std::string::npos);
}

TEST_CASE("evaluate_split validates its inputs") {
  GeneratorModel generator(tiny_config(), {}, 72);
  CvaeModel cvae(tiny_config(), 73);
  CHECK_THROWS_AS(evaluate_split(generator, cvae, {}, EvalOptions{}), Error);
  auto windows = normalized_windows(74);
  EvalOptions bad;
  bad.k = 0;
  CHECK_THROWS_AS(evaluate_split(generator, cvae, windows, bad), Error);
}
