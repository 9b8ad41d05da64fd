#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <sstream>

#include "insyn/error.hpp"
#include "insyn/rng.hpp"
#include "insyn/scene.hpp"

using namespace insyn;

namespace {

Scene scene_from_tracks(const std::vector<std::vector<Position>>& tracks, double dt = 0.4) {
  Scene scene;
  scene.dt = dt;
  int steps = 0;
  for (const auto& t : tracks) steps = std::max(steps, static_cast<int>(t.size()));
  scene.frames.assign(steps, {});
  for (size_t i = 0; i < tracks.size(); ++i) {
    Track track;
    track.first_step = 0;
    track.positions = tracks[i];
    PedId id = static_cast<PedId>(i) + 1;
    for (int s = 0; s <= track.last_step(); ++s) scene.frames[s].push_back({id, track.at(s)});
    scene.tracks.emplace(id, std::move(track));
  }
  return scene;
}

}  // namespace

TEST_CASE("parse_dataset maps fields through the column spec") {
  std::istringstream in("0 1 2.0 3.0\n");
  auto records = parse_dataset(in);
  REQUIRE(records.size() == 1);
  CHECK(records[0].frame_id == 0);
  CHECK(records[0].ped_id == 1);
  CHECK(records[0].x == 2.0);
  CHECK(records[0].y == 3.0);

  // biwi-style float frame ids are integral-valued
  std::istringstream biwi("840.0\t5.0\t8.46\t3.59\n");
  auto rec2 = parse_dataset(biwi);
  REQUIRE(rec2.size() == 1);
  CHECK(rec2[0].frame_id == 840);
  CHECK(rec2[0].ped_id == 5);

  std::istringstream reordered("2.0 3.0 0 1\n");
  ColumnSpec spec{2, 3, 0, 1};
  auto rec3 = parse_dataset(reordered, spec);
  REQUIRE(rec3.size() == 1);
  CHECK(rec3[0].frame_id == 0);
  CHECK(rec3[0].x == 2.0);
}

TEST_CASE("parse_dataset on an empty stream yields an empty list") {
  std::istringstream in("");
  CHECK(parse_dataset(in).empty());
}

TEST_CASE("parse_dataset rejects bad lines with their line number") {
  std::istringstream nan_in("0 1 2.0 3.0\n0 2 NaN 3.0\n");
  CHECK_THROWS_WITH_AS(parse_dataset(nan_in), doctest::Contains("line 2"), Error);
  std::istringstream nan_in2("0 2 NaN 3.0\n");
  try {
    parse_dataset(nan_in2);
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.kind() == "non-finite");
  }
  std::istringstream short_in("0 1 2.0\n");
  try {
    parse_dataset(short_in);
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.kind() == "malformed-line");
  }
  std::istringstream junk("0 x 2.0 3.0\n");
  CHECK_THROWS_AS(parse_dataset(junk), Error);
}

TEST_CASE("build_scene renumbers strided frames") {
  std::vector<RawRecord> records = {{0, 1, 0.0, 0.0}, {6, 1, 1.0, 0.0}, {12, 1, 2.0, 0.0},
                                    {3, 2, 9.0, 9.0}};  // frame 3 dropped by stride 6
  Scene scene = build_scene(records, 6, 0.4);
  CHECK(scene.num_steps() == 3);
  REQUIRE(scene.tracks.count(1) == 1);
  CHECK(scene.tracks.at(1).first_step == 0);
  CHECK(scene.tracks.at(1).positions.size() == 3);
  CHECK(scene.tracks.count(2) == 0);
  CHECK(scene.dt == 0.4);
}

TEST_CASE("build_scene interpolates a single missing step at the midpoint") {
  std::vector<RawRecord> records = {{0, 1, 1.0, 2.0}, {2, 1, 3.0, 6.0}};
  Scene scene = build_scene(records, 1, 0.4);
  REQUIRE(scene.tracks.at(1).positions.size() == 3);
  // linear interpolation oracle: midpoint of the surrounding observations
  Position expected{(1.0 + 3.0) / 2.0, (2.0 + 6.0) / 2.0};
  CHECK(scene.position(1, 1).x == expected.x);
  CHECK(scene.position(1, 1).y == expected.y);
}

TEST_CASE("build_scene splits longer gaps into separate tracks") {
  std::vector<RawRecord> records = {{0, 1, 0.0, 0.0}, {4, 1, 4.0, 0.0}};
  Scene scene = build_scene(records, 1, 0.4);
  // gap-split rule applied by hand: steps {0,4} leave a 3-step hole
  CHECK(scene.tracks.size() == 2);
  REQUIRE(scene.tracks.count(1) == 1);
  CHECK(scene.tracks.at(1).positions.size() == 1);
  REQUIRE(scene.tracks.count(2) == 1);  // synthetic id
  CHECK(scene.tracks.at(2).first_step == 4);
}

TEST_CASE("build_scene errors") {
  std::vector<RawRecord> none = {{1, 1, 0.0, 0.0}, {5, 1, 1.0, 0.0}};
  try {
    build_scene(none, 6, 0.4);  // nothing divisible by 6
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.kind() == "empty-scene");
  }
  std::vector<RawRecord> dup = {{0, 1, 0.0, 0.0}, {0, 1, 1.0, 0.0}};
  CHECK_THROWS_AS(build_scene(dup, 1, 0.4), Error);
}

TEST_CASE("resampling an already-strided scene with stride 1 is the identity") {
  Rng rng(7);
  std::vector<RawRecord> records;
  for (int ped = 1; ped <= 4; ++ped)
    for (int f = 0; f < 15; ++f)
      records.push_back({f, ped, rng.uniform(-5, 5), rng.uniform(-5, 5)});
  Scene first = build_scene(records, 1, 0.4);

  std::vector<RawRecord> again;
  for (const auto& [ped, track] : first.tracks)
    for (int s = track.first_step; s <= track.last_step(); ++s)
      again.push_back({s, ped, track.at(s).x, track.at(s).y});
  Scene second = build_scene(again, 1, 0.4);

  REQUIRE(second.num_steps() == first.num_steps());
  REQUIRE(second.tracks.size() == first.tracks.size());
  for (const auto& [ped, track] : first.tracks) {
    REQUIRE(second.tracks.count(ped) == 1);
    const Track& other = second.tracks.at(ped);
    CHECK(other.first_step == track.first_step);
    REQUIRE(other.positions.size() == track.positions.size());
    for (size_t i = 0; i < track.positions.size(); ++i) {
      CHECK(other.positions[i].x == track.positions[i].x);
      CHECK(other.positions[i].y == track.positions[i].y);
    }
  }
}

TEST_CASE("neighbors_at respects the radius and sorts by distance then id") {
  Scene scene = scene_from_tracks({{{0.0, 0.0}}, {{1.0, 0.0}}, {{3.0, 0.0}}});
  auto close = neighbors_at(scene, 0, 1, 2.0);
  REQUIRE(close.size() == 1);
  CHECK(close[0].first == 2);
  CHECK(close[0].second.x == 1.0);

  auto none = neighbors_at(scene, 0, 2, 0.5);
  CHECK(none.empty());

  try {
    neighbors_at(scene, 0, 99, 2.0);
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.kind() == "agent-not-present");
  }
}

TEST_CASE("neighbor ordering ties break by ped id") {
  // ids 3 and 5 both at distance 1; id 3 must come first
  Scene scene;
  scene.dt = 0.4;
  scene.frames.assign(1, {});
  auto add = [&](PedId id, Position p) {
    Track t;
    t.first_step = 0;
    t.positions = {p};
    scene.frames[0].push_back({id, p});
    scene.tracks.emplace(id, std::move(t));
  };
  add(1, {0.0, 0.0});
  add(5, {1.0, 0.0});
  add(3, {0.0, 1.0});
  auto ordered = neighbors_at(scene, 0, 1, 2.0);
  REQUIRE(ordered.size() == 2);
  CHECK(ordered[0].first == 3);
  CHECK(ordered[1].first == 5);
}

TEST_CASE("neighbors_at matches a brute-force comparator on random scenes") {
  Rng rng(99);
  for (int trial = 0; trial < 200; ++trial) {
    int n = 2 + static_cast<int>(rng.below(8));
    std::vector<std::vector<Position>> tracks;
    for (int i = 0; i < n; ++i)
      tracks.push_back({{rng.uniform(-3, 3), rng.uniform(-3, 3)}});
    Scene scene = scene_from_tracks(tracks);
    double radius = rng.uniform(0.5, 4.0);

    auto got = neighbors_at(scene, 0, 1, radius);
    // brute force over all pairs
    std::vector<std::pair<PedId, Position>> want;
    const Position& origin = scene.position(1, 0);
    for (const auto& [ped, track] : scene.tracks) {
      if (ped == 1) continue;
      if (distance(origin, track.at(0)) <= radius) want.push_back({ped, track.at(0)});
    }
    std::sort(want.begin(), want.end(), [&](const auto& a, const auto& b) {
      double da = distance(origin, a.second), db = distance(origin, b.second);
      return da != db ? da < db : a.first < b.first;
    });
    REQUIRE(got.size() == want.size());
    for (size_t i = 0; i < got.size(); ++i) CHECK(got[i].first == want[i].first);
  }
}

TEST_CASE("scene files round-trip bit-exactly at six decimals") {
  Rng rng(4);
  std::vector<std::vector<Position>> tracks;
  for (int i = 0; i < 5; ++i) {
    std::vector<Position> t;
    for (int s = 0; s < 12; ++s) t.push_back({rng.uniform(-9, 9), rng.uniform(-9, 9)});
    tracks.push_back(t);
  }
  Scene scene = scene_from_tracks(tracks);

  std::ostringstream first;
  write_scene(first, scene);
  std::istringstream back(first.str());
  Scene reread = read_scene(back);
  std::ostringstream second;
  write_scene(second, reread);
  CHECK(first.str() == second.str());
  CHECK(reread.dt == scene.dt);
  CHECK(reread.num_steps() == scene.num_steps());
}
