#include "insyn/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "insyn/error.hpp"

namespace insyn {

std::vector<SampleWindow> window_scene(const Scene& scene, double radius, RegionMode mode,
                                       const std::string& scene_id) {
  std::vector<SampleWindow> windows;
  for (const auto& [ped, track] : scene.tracks) {
    for (int start = track.first_step; start + kWindowSteps - 1 <= track.last_step(); ++start) {
      SampleWindow w;
      w.scene = scene_id;
      w.agent = ped;
      w.start = start;
      w.origin = track.at(start);
      auto states = extract_walking_states(scene, ped, start, kObsSteps, radius, mode);
      for (int t = 0; t < kObsSteps; ++t) {
        w.obs[t] = states[t];
        w.obs[t].position.x -= w.origin.x;
        w.obs[t].position.y -= w.origin.y;
      }
      for (int t = 0; t < kFutureSteps; ++t) {
        const Position& p = track.at(start + kObsSteps + t);
        w.future[t] = Position{p.x - w.origin.x, p.y - w.origin.y};
      }
      windows.push_back(std::move(w));
    }
  }
  return windows;
}

namespace {

Position rotate90(const Position& p) { return Position{-p.y, p.x}; }

// 90-degree CCW rotation carries RU occupants into LU, LU into LD, LD into RD
// and RD into RU.
InteractionInfo rotate_info(const InteractionInfo& info) {
  InteractionInfo out;
  out.slot(RegionId::LU) = info.slot(RegionId::RU);
  out.slot(RegionId::LD) = info.slot(RegionId::LU);
  out.slot(RegionId::RD) = info.slot(RegionId::LD);
  out.slot(RegionId::RU) = info.slot(RegionId::RD);
  return out;
}

}  // namespace

SampleWindow rotate_window(const SampleWindow& w, int quarter_turns) {
  if (quarter_turns < 0 || quarter_turns > 3)
    fail("bad-config", "quarter_turns must be in {0,1,2,3}");
  SampleWindow out = w;
  for (int k = 0; k < quarter_turns; ++k) {
    out.origin = rotate90(out.origin);
    for (auto& ws : out.obs) {
      ws.position = rotate90(ws.position);
      ws.interaction = rotate_info(ws.interaction);
    }
    for (auto& p : out.future) p = rotate90(p);
  }
  return out;
}

SampleWindow scale_window(const SampleWindow& w, double factor) {
  if (factor <= 0.0) fail("bad-config", "scale factor must be > 0");
  SampleWindow out = w;
  out.origin = Position{w.origin.x * factor, w.origin.y * factor};
  for (auto& ws : out.obs) {
    ws.position.x *= factor;
    ws.position.y *= factor;
    for (auto& slot : ws.interaction.slots)
      if (slot.state != InteractionState::NoNeighbor) slot.distance *= factor;
  }
  for (auto& p : out.future) {
    p.x *= factor;
    p.y *= factor;
  }
  return out;
}

double distance_feature(double d) {
  if (d <= 0.0) fail("bad-config", "distance must be > 0");
  return 1.0 / d;
}

FeatureStats fit_stats(const std::vector<SampleWindow>& train) {
  if (train.empty()) fail("empty-dataset", "cannot fit stats on an empty training set");
  FeatureStats stats;
  stats.min.fill(std::numeric_limits<double>::infinity());
  stats.max.fill(-std::numeric_limits<double>::infinity());
  for (const SampleWindow& w : train) {
    if (w.normalized) fail("bad-config", "fit_stats expects raw-distance windows");
    for (const WalkingState& ws : w.obs)
      for (int r = 0; r < kNumRegions; ++r) {
        double f = distance_feature(ws.interaction.slots[r].distance);
        stats.min[r] = std::min(stats.min[r], f);
        stats.max[r] = std::max(stats.max[r], f);
      }
  }
  return stats;
}

SampleWindow apply_stats(const SampleWindow& w, const FeatureStats& stats) {
  if (w.normalized) fail("bad-config", "window already normalized");
  SampleWindow out = w;
  out.normalized = true;
  for (auto& ws : out.obs)
    for (int r = 0; r < kNumRegions; ++r) {
      double f = distance_feature(ws.interaction.slots[r].distance);
      double range = stats.max[r] - stats.min[r];
      double v = range > 0.0 ? (f - stats.min[r]) / range : 0.0;
      ws.interaction.slots[r].distance = std::clamp(v, 0.0, 1.0);
    }
  return out;
}

void write_samples(std::ostream& out, const std::vector<SampleWindow>& samples,
                   const FeatureStats& stats, const std::string& config_hash) {
  char buf[512];
  out << "insyn-samples 1\n";
  out << "config " << (config_hash.empty() ? "-" : config_hash) << '\n';
  out << "windows " << samples.size() << '\n';
  int normalized = samples.empty() ? 1 : (samples.front().normalized ? 1 : 0);
  out << "normalized " << normalized << '\n';
  out << "stats";
  for (int r = 0; r < kNumRegions; ++r) {
    std::snprintf(buf, sizeof(buf), " %.17g %.17g", stats.min[r], stats.max[r]);
    out << buf;
  }
  out << '\n';
  for (const SampleWindow& w : samples) {
    if (static_cast<int>(w.normalized) != normalized)
      fail("bad-config", "mixed normalized/raw windows in one file");
    std::snprintf(buf, sizeof(buf), "window %s %lld %d %.6f %.6f\n",
                  w.scene.empty() ? "-" : w.scene.c_str(), static_cast<long long>(w.agent),
                  w.start, w.origin.x, w.origin.y);
    out << buf;
    for (const WalkingState& ws : w.obs) {
      int n = std::snprintf(buf, sizeof(buf), "obs %.6f %.6f", ws.position.x, ws.position.y);
      for (const RegionSlot& slot : ws.interaction.slots) {
        long long occ = slot.occupant ? static_cast<long long>(*slot.occupant) : -1;
        n += std::snprintf(buf + n, sizeof(buf) - n, " %d %.17g %lld",
                           static_cast<int>(slot.state), slot.distance, occ);
      }
      out << buf << '\n';
    }
    for (const Position& p : w.future) {
      std::snprintf(buf, sizeof(buf), "fut %.6f %.6f\n", p.x, p.y);
      out << buf;
    }
  }
}

void write_samples_file(const std::string& path, const std::vector<SampleWindow>& samples,
                        const FeatureStats& stats, const std::string& config_hash) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("io", "cannot write '" + path + "'");
  write_samples(out, samples, stats, config_hash);
}

SampleFile read_samples(std::istream& in) {
  std::string magic;
  int version = 0;
  in >> magic >> version;
  if (magic != "insyn-samples" || version != 1)
    fail("bad-format", "not an insyn-samples v1 file");
  std::string key;
  size_t count = 0;
  int normalized = 0;
  SampleFile header_probe;
  in >> key >> header_probe.config_hash;
  if (key != "config") fail("bad-format", "expected config header");
  in >> key >> count;
  if (key != "windows") fail("bad-format", "expected windows header");
  in >> key >> normalized;
  if (key != "normalized") fail("bad-format", "expected normalized header");
  SampleFile file;
  file.config_hash = header_probe.config_hash;
  in >> key;
  if (key != "stats") fail("bad-format", "expected stats header");
  for (int r = 0; r < kNumRegions; ++r) in >> file.stats.min[r] >> file.stats.max[r];

  for (size_t i = 0; i < count; ++i) {
    SampleWindow w;
    w.normalized = normalized != 0;
    long long agent = 0;
    in >> key >> w.scene >> agent >> w.start >> w.origin.x >> w.origin.y;
    if (!in || key != "window") fail("bad-format", "expected window record");
    if (w.scene == "-") w.scene.clear();
    w.agent = agent;
    for (int t = 0; t < kObsSteps; ++t) {
      in >> key >> w.obs[t].position.x >> w.obs[t].position.y;
      if (!in || key != "obs") fail("bad-format", "expected obs record");
      for (int r = 0; r < kNumRegions; ++r) {
        int state = 0;
        long long occ = 0;
        RegionSlot& slot = w.obs[t].interaction.slots[r];
        in >> state >> slot.distance >> occ;
        if (state < 0 || state > 2) fail("bad-format", "bad state code");
        slot.state = static_cast<InteractionState>(state);
        slot.occupant = occ >= 0 ? std::optional<PedId>(occ) : std::nullopt;
      }
    }
    for (int t = 0; t < kFutureSteps; ++t) {
      in >> key >> w.future[t].x >> w.future[t].y;
      if (!in || key != "fut") fail("bad-format", "expected fut record");
    }
    file.samples.push_back(std::move(w));
  }
  return file;
}

SampleFile read_samples_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("io", "cannot open '" + path + "'");
  return read_samples(in);
}

}  // namespace insyn
