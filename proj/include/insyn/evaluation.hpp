#pragma once

#include <array>
#include <iosfwd>
#include <string>
#include <vector>

#include "insyn/model.hpp"
#include "insyn/preprocess.hpp"

namespace insyn {

// Mean Euclidean error over the predicted steps.
double ade(const std::array<Position, kFutureSteps>& pred,
           const std::array<Position, kFutureSteps>& truth);
double ade(const std::vector<Position>& pred, const std::vector<Position>& truth);

// Error of the final predicted step (the goal).
double fde(const Position& pred_goal, const Position& truth_goal);

// Error of the first predicted step.
double ide(const Position& pred_first, const Position& truth_first);

// K goals and the K trajectories generated for them; every trajectory ends at
// its goal.
struct PredictionSet {
  std::vector<std::array<Position, kFutureSteps>> trajectories;
  std::vector<Position> goals;
};

struct BestOfK {
  int best_index = 0;  // ADE-minimizing sample; FDE/IDE below come from it
  double ade = 0.0;
  double fde = 0.0;
  double ide = 0.0;
  // independent per-metric minima over the K samples
  double fde_min = 0.0;
  double ide_min = 0.0;
};

BestOfK best_of_k(const PredictionSet& pset, const std::array<Position, kFutureSteps>& truth);

enum class GoalMode {
  Sampled,  // goals drawn from the Seq-CVAE (best-of-K protocol)
  Truth,    // ground-truth goal conditioning; isolates the generator
};

struct EvalOptions {
  int k = 20;
  uint64_t seed = 1;
  GoalMode goal_mode = GoalMode::Sampled;
  bool inject_truth = false;  // adds the ground-truth future as one extra sample
  bool with_plot_dump = false;
  int jobs = 1;
};

struct WindowMetrics {
  std::string scene;
  PedId agent = 0;
  int start = 0;
  BestOfK best;
};

struct PlotRecord {
  std::string scene;
  PedId agent = 0;
  int start = 0;
  int sample = 0;
  Position goal;                                   // world coordinates
  std::array<Position, kFutureSteps> trajectory;   // world coordinates
};

struct MetricReport {
  double mean_ade = 0.0;
  double mean_fde = 0.0;
  double mean_ide = 0.0;
  double mean_fde_min = 0.0;
  double mean_ide_min = 0.0;
  std::vector<WindowMetrics> rows;
  std::vector<PlotRecord> plot;
};

MetricReport evaluate_split(GeneratorModel& generator, CvaeModel& cvae,
                            const std::vector<SampleWindow>& windows, const EvalOptions& options);

void write_report(std::ostream& out, const MetricReport& report, const std::string& config_hash);
void write_plot_dump(std::ostream& out, const std::vector<PlotRecord>& plot,
                     const std::string& config_hash = "-");

}  // namespace insyn
