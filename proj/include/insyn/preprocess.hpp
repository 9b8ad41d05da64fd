#pragma once

#include <array>
#include <iosfwd>
#include <string>
#include <vector>

#include "insyn/interaction.hpp"
#include "insyn/scene.hpp"

namespace insyn {

inline constexpr int kObsSteps = 8;      // 3.2 s at 0.4 s per step
inline constexpr int kFutureSteps = 12;  // 4.8 s
inline constexpr int kWindowSteps = kObsSteps + kFutureSteps;

// One model-ready example: 8 observed walking states plus 12 future positions,
// shifted so the first observed position is the origin. Interaction slots hold
// raw distances in meters until apply_stats replaces them with normalized
// reciprocal features (tracked by `normalized`).
struct SampleWindow {
  std::string scene;
  PedId agent = 0;
  int start = 0;
  Position origin;
  std::array<WalkingState, kObsSteps> obs;
  std::array<Position, kFutureSteps> future;
  bool normalized = false;

  const Position& goal() const { return future[kFutureSteps - 1]; }
};

// Min-max range of the reciprocal-distance feature, one entry per region slot.
struct FeatureStats {
  std::array<double, kNumRegions> min{};
  std::array<double, kNumRegions> max{};
};

// One window per (agent, start) where the agent covers 20 consecutive steps;
// stride 1. Interaction features are computed on the raw scene before the
// origin shift.
std::vector<SampleWindow> window_scene(const Scene& scene, double radius,
                                       RegionMode mode = RegionMode::FourQuadrants,
                                       const std::string& scene_id = "");

// Rotates every position by k*90 degrees CCW about the origin and permutes the
// region slots by the induced quadrant permutation.
SampleWindow rotate_window(const SampleWindow& w, int quarter_turns);

// Scales positions and region distances; states are unchanged.
SampleWindow scale_window(const SampleWindow& w, double factor);

// Reciprocal-distance feature, taken before min-max normalization.
double distance_feature(double d);

FeatureStats fit_stats(const std::vector<SampleWindow>& train);

// Replaces each slot distance with the min-max-normalized reciprocal feature,
// clamped to [0, 1]; a degenerate max == min channel maps to 0.
SampleWindow apply_stats(const SampleWindow& w, const FeatureStats& stats);

void write_samples(std::ostream& out, const std::vector<SampleWindow>& samples,
                   const FeatureStats& stats, const std::string& config_hash = "-");
void write_samples_file(const std::string& path, const std::vector<SampleWindow>& samples,
                        const FeatureStats& stats, const std::string& config_hash = "-");
struct SampleFile {
  std::vector<SampleWindow> samples;
  FeatureStats stats;
  std::string config_hash;
};
SampleFile read_samples(std::istream& in);
SampleFile read_samples_file(const std::string& path);

}  // namespace insyn
