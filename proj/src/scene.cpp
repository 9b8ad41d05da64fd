#include "insyn/scene.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "insyn/error.hpp"

namespace insyn {

double distance(const Position& a, const Position& b) {
  double dx = b.x - a.x;
  double dy = b.y - a.y;
  return std::sqrt(dx * dx + dy * dy);
}

bool Scene::present(PedId ped, int step) const {
  auto it = tracks.find(ped);
  return it != tracks.end() && it->second.covers(step);
}

const Position& Scene::position(PedId ped, int step) const {
  auto it = tracks.find(ped);
  if (it == tracks.end() || !it->second.covers(step))
    fail("agent-not-present", "pedestrian " + std::to_string(ped) + " absent at step " +
                                  std::to_string(step));
  return it->second.at(step);
}

namespace {

bool parse_number(const std::string& token, double& out) {
  try {
    size_t pos = 0;
    out = std::stod(token, &pos);
    return pos == token.size();
  } catch (...) {
    return false;
  }
}

bool parse_integral(const std::string& token, int64_t& out) {
  double v = 0.0;
  if (!parse_number(token, v)) return false;
  if (!std::isfinite(v) || v != std::floor(v)) return false;
  out = static_cast<int64_t>(v);
  return true;
}

}  // namespace

std::vector<RawRecord> parse_dataset(std::istream& in, const ColumnSpec& columns) {
  int max_col = std::max({columns.frame, columns.ped, columns.x, columns.y});
  std::vector<RawRecord> records;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ss(line);
    std::vector<std::string> tokens;
    std::string tok;
    while (ss >> tok) tokens.push_back(tok);
    if (tokens.empty()) continue;  // blank line
    if (static_cast<int>(tokens.size()) <= max_col)
      fail("malformed-line", "line " + std::to_string(lineno) + ": expected at least " +
                                 std::to_string(max_col + 1) + " columns, got " +
                                 std::to_string(tokens.size()));
    RawRecord r;
    if (!parse_integral(tokens[columns.frame], r.frame_id))
      fail("malformed-line", "line " + std::to_string(lineno) + ": bad frame id '" +
                                 tokens[columns.frame] + "'");
    if (!parse_integral(tokens[columns.ped], r.ped_id))
      fail("malformed-line",
           "line " + std::to_string(lineno) + ": bad ped id '" + tokens[columns.ped] + "'");
    if (!parse_number(tokens[columns.x], r.x) || !parse_number(tokens[columns.y], r.y))
      fail("malformed-line", "line " + std::to_string(lineno) + ": bad coordinate");
    if (!std::isfinite(r.x) || !std::isfinite(r.y))
      fail("non-finite", "line " + std::to_string(lineno) + ": non-finite coordinate");
    records.push_back(r);
  }
  return records;
}

std::vector<RawRecord> parse_dataset_file(const std::string& path, const ColumnSpec& columns) {
  std::ifstream in(path);
  if (!in) fail("io", "cannot open '" + path + "'");
  return parse_dataset(in, columns);
}

Scene build_scene(std::vector<RawRecord> records, int frame_stride, double dt) {
  if (frame_stride < 1) fail("bad-config", "frame_stride must be >= 1");
  if (dt <= 0.0) fail("bad-config", "dt must be > 0");

  std::erase_if(records, [&](const RawRecord& r) { return r.frame_id % frame_stride != 0; });
  if (records.empty()) fail("empty-scene", "no records after frame filtering");

  std::stable_sort(records.begin(), records.end(), [](const RawRecord& a, const RawRecord& b) {
    return a.frame_id != b.frame_id ? a.frame_id < b.frame_id : a.ped_id < b.ped_id;
  });

  // Steps keep their spacing relative to the first kept frame; a hole in the
  // raw frames shows up as a track gap rather than a silently stitched jump.
  int64_t first_frame = records.front().frame_id;
  std::map<PedId, std::vector<std::pair<int, Position>>> per_ped;
  std::set<std::pair<int64_t, PedId>> seen;
  PedId max_id = 0;
  for (const RawRecord& r : records) {
    if (!seen.insert({r.frame_id, r.ped_id}).second)
      fail("duplicate-record", "duplicate (frame " + std::to_string(r.frame_id) + ", ped " +
                                   std::to_string(r.ped_id) + ")");
    int step = static_cast<int>((r.frame_id - first_frame) / frame_stride);
    per_ped[r.ped_id].push_back({step, Position{r.x, r.y}});
    max_id = std::max(max_id, r.ped_id);
  }

  // Single missing steps are interpolated at the midpoint; longer gaps split
  // the pedestrian into separate synthetic tracks.
  Scene scene;
  scene.dt = dt;
  PedId next_synthetic = max_id + 1;
  int max_step = 0;
  for (auto& [ped, obs] : per_ped) {
    std::vector<Track> pieces;
    Track cur;
    cur.first_step = obs.front().first;
    cur.positions.push_back(obs.front().second);
    for (size_t i = 1; i < obs.size(); ++i) {
      int prev_step = cur.last_step();
      int step = obs[i].first;
      const Position& pos = obs[i].second;
      if (step == prev_step + 1) {
        cur.positions.push_back(pos);
      } else if (step == prev_step + 2) {
        const Position& a = cur.positions.back();
        cur.positions.push_back(Position{(a.x + pos.x) / 2.0, (a.y + pos.y) / 2.0});
        cur.positions.push_back(pos);
      } else {
        pieces.push_back(std::move(cur));
        cur = Track{};
        cur.first_step = step;
        cur.positions.push_back(pos);
      }
    }
    pieces.push_back(std::move(cur));
    for (size_t i = 0; i < pieces.size(); ++i) {
      PedId id = (i == 0) ? ped : next_synthetic++;
      max_step = std::max(max_step, pieces[i].last_step());
      scene.tracks.emplace(id, std::move(pieces[i]));
    }
  }

  scene.frames.assign(max_step + 1, {});
  for (const auto& [ped, track] : scene.tracks)
    for (int s = track.first_step; s <= track.last_step(); ++s)
      scene.frames[s].push_back({ped, track.at(s)});
  for (auto& frame : scene.frames)
    std::sort(frame.begin(), frame.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
  return scene;
}

std::vector<std::pair<PedId, Position>> neighbors_at(const Scene& scene, int step, PedId agent,
                                                     double radius) {
  const Position& origin = scene.position(agent, step);  // throws if absent
  std::vector<std::pair<PedId, Position>> result;
  for (const auto& [ped, pos] : scene.frames[step]) {
    if (ped == agent) continue;
    if (distance(origin, pos) <= radius) result.push_back({ped, pos});
  }
  std::sort(result.begin(), result.end(), [&](const auto& a, const auto& b) {
    double da = distance(origin, a.second);
    double db = distance(origin, b.second);
    return da != db ? da < db : a.first < b.first;
  });
  return result;
}

void write_scene(std::ostream& out, const Scene& scene) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), "insyn-scene 1\ndt %.6f\nsteps %d\n", scene.dt,
                scene.num_steps());
  out << buf;
  for (int s = 0; s < scene.num_steps(); ++s)
    for (const auto& [ped, pos] : scene.frames[s]) {
      std::snprintf(buf, sizeof(buf), "%d %lld %.6f %.6f\n", s, static_cast<long long>(ped),
                    pos.x, pos.y);
      out << buf;
    }
}

void write_scene_file(const std::string& path, const Scene& scene) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("io", "cannot write '" + path + "'");
  write_scene(out, scene);
}

Scene read_scene(std::istream& in) {
  std::string magic;
  int version = 0;
  in >> magic >> version;
  if (magic != "insyn-scene" || version != 1) fail("bad-format", "not an insyn-scene v1 file");
  std::string key;
  double dt = 0.0;
  int steps = 0;
  in >> key >> dt;
  if (key != "dt") fail("bad-format", "expected dt header");
  in >> key >> steps;
  if (key != "steps") fail("bad-format", "expected steps header");
  if (dt <= 0.0 || steps < 0) fail("bad-format", "invalid scene header");

  std::map<PedId, std::vector<std::pair<int, Position>>> per_ped;
  int step = 0;
  long long ped = 0;
  double x = 0.0, y = 0.0;
  while (in >> step >> ped >> x >> y) {
    if (step < 0 || step >= steps) fail("bad-format", "record step out of range");
    per_ped[ped].push_back({step, Position{x, y}});
  }

  Scene scene;
  scene.dt = dt;
  scene.frames.assign(steps, {});
  for (auto& [id, obs] : per_ped) {
    Track track;
    track.first_step = obs.front().first;
    for (size_t i = 0; i < obs.size(); ++i) {
      if (obs[i].first != track.first_step + static_cast<int>(i))
        fail("bad-format", "track for ped " + std::to_string(id) + " is not contiguous");
      track.positions.push_back(obs[i].second);
    }
    for (int s = track.first_step; s <= track.last_step(); ++s)
      scene.frames[s].push_back({id, track.at(s)});
    scene.tracks.emplace(id, std::move(track));
  }
  for (auto& frame : scene.frames)
    std::sort(frame.begin(), frame.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
  return scene;
}

Scene read_scene_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("io", "cannot open '" + path + "'");
  return read_scene(in);
}

}  // namespace insyn
