#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace insyn {

using PedId = int64_t;

struct Position {
  double x = 0.0;
  double y = 0.0;
};

inline bool operator==(const Position& a, const Position& b) {
  return a.x == b.x && a.y == b.y;
}

double distance(const Position& a, const Position& b);

// One line of a raw trajectory export.
struct RawRecord {
  int64_t frame_id = 0;
  PedId ped_id = 0;
  double x = 0.0;
  double y = 0.0;
};

// Which whitespace-delimited columns hold frame/id/x/y. Raw ETH/UCY exports
// vary in column order, so this is configurable.
struct ColumnSpec {
  int frame = 0;
  int ped = 1;
  int x = 2;
  int y = 3;
};

// A pedestrian's contiguous appearance: positions at steps
// first_step .. first_step + positions.size() - 1.
struct Track {
  int first_step = 0;
  std::vector<Position> positions;

  int last_step() const { return first_step + static_cast<int>(positions.size()) - 1; }
  bool covers(int step) const { return step >= first_step && step <= last_step(); }
  const Position& at(int step) const { return positions[step - first_step]; }
};

// Uniform-time-grid multi-pedestrian scene. Steps are 0..num_steps()-1 and
// each track is contiguous (gaps were interpolated or split at build time).
struct Scene {
  double dt = 0.4;
  std::vector<std::vector<std::pair<PedId, Position>>> frames;  // step -> sorted by ped id
  std::map<PedId, Track> tracks;

  int num_steps() const { return static_cast<int>(frames.size()); }
  bool present(PedId ped, int step) const;
  const Position& position(PedId ped, int step) const;
};

std::vector<RawRecord> parse_dataset(std::istream& in, const ColumnSpec& columns = {});
std::vector<RawRecord> parse_dataset_file(const std::string& path, const ColumnSpec& columns = {});

// Keeps frames with frame_id % frame_stride == 0, renumbers them onto the
// uniform grid, interpolates single missing steps and splits longer gaps into
// fresh synthetic tracks.
Scene build_scene(std::vector<RawRecord> records, int frame_stride, double dt);

// All other pedestrians at `step` within `radius` of `agent`, sorted by
// distance then ped id.
std::vector<std::pair<PedId, Position>> neighbors_at(const Scene& scene, int step,
                                                     PedId agent, double radius);

void write_scene(std::ostream& out, const Scene& scene);
void write_scene_file(const std::string& path, const Scene& scene);
Scene read_scene(std::istream& in);
Scene read_scene_file(const std::string& path);

}  // namespace insyn
