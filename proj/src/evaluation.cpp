#include "insyn/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <ostream>
#include <thread>

#include "insyn/error.hpp"
#include "insyn/rng.hpp"

namespace insyn {

double ade(const std::array<Position, kFutureSteps>& pred,
           const std::array<Position, kFutureSteps>& truth) {
  double sum = 0.0;
  for (int t = 0; t < kFutureSteps; ++t) sum += distance(pred[t], truth[t]);
  return sum / kFutureSteps;
}

double ade(const std::vector<Position>& pred, const std::vector<Position>& truth) {
  if (pred.size() != truth.size() || pred.empty())
    fail("shape-mismatch", "ade needs equal non-empty trajectories");
  double sum = 0.0;
  for (size_t t = 0; t < pred.size(); ++t) sum += distance(pred[t], truth[t]);
  return sum / static_cast<double>(pred.size());
}

double fde(const Position& pred_goal, const Position& truth_goal) {
  return distance(pred_goal, truth_goal);
}

double ide(const Position& pred_first, const Position& truth_first) {
  return distance(pred_first, truth_first);
}

BestOfK best_of_k(const PredictionSet& pset, const std::array<Position, kFutureSteps>& truth) {
  if (pset.trajectories.empty() || pset.trajectories.size() != pset.goals.size())
    fail("shape-mismatch", "prediction set must hold K matching trajectories and goals");

  BestOfK best;
  double best_ade = std::numeric_limits<double>::infinity();
  best.fde_min = std::numeric_limits<double>::infinity();
  best.ide_min = std::numeric_limits<double>::infinity();
  for (size_t k = 0; k < pset.trajectories.size(); ++k) {
    const auto& traj = pset.trajectories[k];
    double a = ade(traj, truth);
    double f = fde(traj[kFutureSteps - 1], truth[kFutureSteps - 1]);
    double i = ide(traj[0], truth[0]);
    if (a < best_ade) {
      best_ade = a;
      best.best_index = static_cast<int>(k);
      best.ade = a;
      best.fde = f;
      best.ide = i;
    }
    best.fde_min = std::min(best.fde_min, f);
    best.ide_min = std::min(best.ide_min, i);
  }
  return best;
}

namespace {

WindowMetrics evaluate_window(GeneratorModel& generator, CvaeModel& cvae, const SampleWindow& w,
                              const EvalOptions& options, std::vector<PlotRecord>* plot) {
  // The per-window seed depends on the window identity, not its position in
  // the split, so reports are stable under reordering and parallelism.
  uint64_t window_seed = derive_seed(
      options.seed, w.scene + "/" + std::to_string(w.agent) + "/" + std::to_string(w.start));

  PredictionSet pset;
  if (options.goal_mode == GoalMode::Truth) {
    pset.goals.assign(1, w.goal());
  } else {
    pset.goals = cvae.sample(w, options.k, window_seed);
  }
  for (const Position& goal : pset.goals)
    pset.trajectories.push_back(generator.decode(w, goal));
  if (options.inject_truth) {
    pset.goals.push_back(w.goal());
    pset.trajectories.push_back(w.future);
  }

  WindowMetrics metrics;
  metrics.scene = w.scene;
  metrics.agent = w.agent;
  metrics.start = w.start;
  metrics.best = best_of_k(pset, w.future);

  if (plot) {
    for (size_t k = 0; k < pset.trajectories.size(); ++k) {
      PlotRecord rec;
      rec.scene = w.scene;
      rec.agent = w.agent;
      rec.start = w.start;
      rec.sample = static_cast<int>(k);
      rec.goal = Position{pset.goals[k].x + w.origin.x, pset.goals[k].y + w.origin.y};
      for (int t = 0; t < kFutureSteps; ++t)
        rec.trajectory[t] = Position{pset.trajectories[k][t].x + w.origin.x,
                                     pset.trajectories[k][t].y + w.origin.y};
      plot->push_back(std::move(rec));
    }
  }
  return metrics;
}

}  // namespace

MetricReport evaluate_split(GeneratorModel& generator, CvaeModel& cvae,
                            const std::vector<SampleWindow>& windows,
                            const EvalOptions& options) {
  if (windows.empty()) fail("empty-dataset", "no windows to evaluate");
  if (options.k < 1) fail("bad-config", "K must be >= 1");

  MetricReport report;
  report.rows.resize(windows.size());
  std::vector<std::vector<PlotRecord>> plots(windows.size());

  int jobs = std::max(1, options.jobs);
  if (jobs == 1) {
    for (size_t i = 0; i < windows.size(); ++i)
      report.rows[i] = evaluate_window(generator, cvae, windows[i], options,
                                       options.with_plot_dump ? &plots[i] : nullptr);
  } else {
    // Windows are independent and the models are read-only here; results land
    // in per-window slots so the report is identical for any job count.
    std::vector<std::thread> workers;
    std::atomic<size_t> next{0};
    for (int j = 0; j < jobs; ++j)
      workers.emplace_back([&] {
        for (size_t i = next.fetch_add(1); i < windows.size(); i = next.fetch_add(1))
          report.rows[i] = evaluate_window(generator, cvae, windows[i], options,
                                           options.with_plot_dump ? &plots[i] : nullptr);
      });
    for (std::thread& t : workers) t.join();
  }

  for (std::vector<PlotRecord>& p : plots)
    report.plot.insert(report.plot.end(), p.begin(), p.end());

  double n = static_cast<double>(report.rows.size());
  for (const WindowMetrics& m : report.rows) {
    report.mean_ade += m.best.ade / n;
    report.mean_fde += m.best.fde / n;
    report.mean_ide += m.best.ide / n;
    report.mean_fde_min += m.best.fde_min / n;
    report.mean_ide_min += m.best.ide_min / n;
  }
  return report;
}

void write_report(std::ostream& out, const MetricReport& report, const std::string& config_hash) {
  char buf[256];
  out << "# insyn-report 1\n";
  out << "# config " << config_hash << '\n';
  out << "# windows " << report.rows.size() << '\n';
  std::snprintf(buf, sizeof(buf),
                "# mean ade %.6f fde %.6f ide %.6f fde_min %.6f ide_min %.6f\n",
                report.mean_ade, report.mean_fde, report.mean_ide, report.mean_fde_min,
                report.mean_ide_min);
  out << buf;
  // per-scene breakdown, in first-appearance order
  std::vector<std::string> scene_order;
  std::map<std::string, std::pair<int, std::array<double, 3>>> per_scene;
  for (const WindowMetrics& m : report.rows) {
    auto [it, fresh] = per_scene.try_emplace(m.scene, 0, std::array<double, 3>{});
    if (fresh) scene_order.push_back(m.scene);
    it->second.first += 1;
    it->second.second[0] += m.best.ade;
    it->second.second[1] += m.best.fde;
    it->second.second[2] += m.best.ide;
  }
  for (const std::string& scene : scene_order) {
    const auto& [count, sums] = per_scene.at(scene);
    std::snprintf(buf, sizeof(buf), "# scene %s windows %d ade %.6f fde %.6f ide %.6f\n",
                  scene.empty() ? "-" : scene.c_str(), count, sums[0] / count, sums[1] / count,
                  sums[2] / count);
    out << buf;
  }
  out << "scene,agent,start,ade,fde,ide,fde_min,ide_min\n";
  for (const WindowMetrics& m : report.rows) {
    std::snprintf(buf, sizeof(buf), "%s,%lld,%d,%.6f,%.6f,%.6f,%.6f,%.6f\n",
                  m.scene.empty() ? "-" : m.scene.c_str(), static_cast<long long>(m.agent),
                  m.start, m.best.ade, m.best.fde, m.best.ide, m.best.fde_min, m.best.ide_min);
    out << buf;
  }
}

void write_plot_dump(std::ostream& out, const std::vector<PlotRecord>& plot,
                     const std::string& config_hash) {
  out << "# config " << (config_hash.empty() ? "-" : config_hash) << '\n';
  out << "scene,agent,start,sample,goal_x,goal_y";
  for (int t = 0; t < kFutureSteps; ++t) out << ",x" << t << ",y" << t;
  out << '\n';
  char buf[64];
  for (const PlotRecord& rec : plot) {
    out << (rec.scene.empty() ? "-" : rec.scene) << ',' << rec.agent << ',' << rec.start << ','
        << rec.sample;
    std::snprintf(buf, sizeof(buf), ",%.6f,%.6f", rec.goal.x, rec.goal.y);
    out << buf;
    for (const Position& p : rec.trajectory) {
      std::snprintf(buf, sizeof(buf), ",%.6f,%.6f", p.x, p.y);
      out << buf;
    }
    out << '\n';
  }
}

}  // namespace insyn
