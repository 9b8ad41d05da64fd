#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "insyn/error.hpp"
#include "insyn/synth.hpp"

using namespace insyn;
using synth::ScenarioKind;
using synth::ScenarioSpec;

TEST_CASE("lone walker moves in a straight line at constant speed") {
  ScenarioSpec spec;
  spec.kind = ScenarioKind::LoneWalker;
  spec.steps = 20;
  spec.speed = 1.2;
  auto labeled = synth::generate(spec);
  REQUIRE(labeled.scene.tracks.size() == 1);
  const Track& track = labeled.scene.tracks.at(1);
  REQUIRE(track.positions.size() == 20);
  for (int t = 1; t < 20; ++t) {
    double step = distance(track.positions[t - 1], track.positions[t]);
    CHECK(step == doctest::Approx(1.2 * 0.4).epsilon(1e-9));
  }
  // straight: displacement after 19 steps equals 19 step lengths
  CHECK(distance(track.positions[0], track.positions[19]) ==
        doctest::Approx(19 * 1.2 * 0.4).epsilon(1e-9));
  // every label is NoNeighbor
  for (const InteractionInfo& info : labeled.expected.at(1))
    for (const RegionSlot& slot : info.slots) CHECK(slot.state == InteractionState::NoNeighbor);
}

TEST_CASE("in-sync pair keeps its exact offset and labels InSync after step 0") {
  ScenarioSpec spec;
  spec.kind = ScenarioKind::InSyncPair;
  spec.steps = 20;
  spec.offset = 0.5;
  auto labeled = synth::generate(spec);
  const Track& a = labeled.scene.tracks.at(1);
  const Track& b = labeled.scene.tracks.at(2);
  for (int t = 0; t < 20; ++t) {
    CHECK(b.positions[t].x == a.positions[t].x);
    CHECK(b.positions[t].y - a.positions[t].y == 0.5);
  }
  const auto& labels = labeled.expected.at(1);
  CHECK(labels[0].slot(RegionId::RU).state == InteractionState::Conflict);
  for (int t = 1; t < 20; ++t) {
    CHECK(labels[t].slot(RegionId::RU).state == InteractionState::InSync);
    CHECK(labels[t].slot(RegionId::RU).distance == 0.5);
    CHECK(labels[t].slot(RegionId::RU).occupant == 2);
  }
  // partner sees the agent below itself
  CHECK(labeled.expected.at(2)[5].slot(RegionId::LD).state == InteractionState::InSync);
}

TEST_CASE("head-on conflict first appears at the scripted entry step") {
  ScenarioSpec spec;
  spec.kind = ScenarioKind::HeadOnConflict;
  spec.steps = 24;
  spec.entry_step = 7;
  auto labeled = synth::generate(spec);
  const auto& labels = labeled.expected.at(1);
  auto occupied = [](const InteractionInfo& info) {
    for (const RegionSlot& slot : info.slots)
      if (slot.state != InteractionState::NoNeighbor) return true;
    return false;
  };
  for (int t = 0; t < 7; ++t) CHECK_FALSE(occupied(labels[t]));
  REQUIRE(occupied(labels[7]));
  bool conflict = false;
  for (const RegionSlot& slot : labels[7].slots)
    if (slot.state == InteractionState::Conflict) conflict = true;
  CHECK(conflict);
  // the pair separates again before the scene ends
  CHECK_FALSE(occupied(labels[23]));
}

TEST_CASE("crossing walkers meet near the scripted entry step") {
  ScenarioSpec spec;
  spec.kind = ScenarioKind::CrossingConflict;
  spec.steps = 24;
  spec.entry_step = 6;
  auto labeled = synth::generate(spec);
  const auto& labels = labeled.expected.at(1);
  int first_contact = -1;
  for (int t = 0; t < 24 && first_contact < 0; ++t)
    for (const RegionSlot& slot : labels[t].slots)
      if (slot.state != InteractionState::NoNeighbor) {
        first_contact = t;
        break;
      }
  REQUIRE(first_contact >= 0);
  CHECK(std::abs(first_contact - 6) <= 1);
}

TEST_CASE("specs are validated") {
  ScenarioSpec bad;
  bad.kind = ScenarioKind::InSyncPair;
  bad.offset = 2.5;  // >= radius
  try {
    synth::generate(bad);
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.kind() == "bad-spec");
  }
  ScenarioSpec neg;
  neg.noise = -0.1;
  CHECK_THROWS_AS(synth::generate(neg), Error);
  ScenarioSpec slow;
  slow.speed = 0.0;
  CHECK_THROWS_AS(synth::generate(slow), Error);
}

TEST_CASE("generated scenes satisfy scene invariants") {
  for (auto kind : {ScenarioKind::LoneWalker, ScenarioKind::InSyncPair,
                    ScenarioKind::HeadOnConflict, ScenarioKind::CrossingConflict,
                    ScenarioKind::Mixed}) {
    ScenarioSpec spec;
    spec.kind = kind;
    spec.steps = 22;
    spec.seed = 5;
    spec.noise = 0.05;
    auto labeled = synth::generate(spec);
    CHECK(labeled.scene.num_steps() == 22);
    for (const auto& [ped, track] : labeled.scene.tracks) {
      CHECK(track.first_step == 0);
      CHECK(static_cast<int>(track.positions.size()) == 22);
      for (const Position& p : track.positions) {
        CHECK(std::isfinite(p.x));
        CHECK(std::isfinite(p.y));
      }
      CHECK(labeled.expected.count(ped) == 1);
    }
  }
}

TEST_CASE("noise-free scenarios agree with the interaction module") {
  for (auto kind : {ScenarioKind::LoneWalker, ScenarioKind::InSyncPair,
                    ScenarioKind::HeadOnConflict, ScenarioKind::CrossingConflict,
                    ScenarioKind::Mixed}) {
    for (uint64_t seed = 1; seed <= 12; ++seed) {
      ScenarioSpec spec;
      spec.kind = kind;
      spec.steps = 24;
      spec.seed = seed;
      auto labeled = synth::generate(spec);
      auto mismatches = synth::verify_labels(labeled, 2.0);
      CHECK(mismatches.empty());
    }
  }
}

TEST_CASE("verify_labels reports a deliberately corrupted label exactly once") {
  ScenarioSpec spec;
  spec.kind = ScenarioKind::InSyncPair;
  spec.steps = 20;
  auto labeled = synth::generate(spec);
  labeled.expected.at(1)[4].slot(RegionId::RU).state = InteractionState::Conflict;
  auto mismatches = synth::verify_labels(labeled, 2.0);
  REQUIRE(mismatches.size() == 1);
  CHECK(mismatches[0].agent == 1);
  CHECK(mismatches[0].step == 4);
  CHECK(mismatches[0].region == RegionId::RU);
  CHECK(mismatches[0].expected_state == InteractionState::Conflict);
  CHECK(mismatches[0].got_state == InteractionState::InSync);
}

TEST_CASE("scenario kinds parse from their names") {
  CHECK(synth::scenario_kind_from_string("mixed") == ScenarioKind::Mixed);
  CHECK(synth::scenario_kind_from_string("lone") == ScenarioKind::LoneWalker);
  CHECK_THROWS_AS(synth::scenario_kind_from_string("bogus"), Error);
}
