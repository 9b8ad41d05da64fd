#include "insyn/synth.hpp"

#include <algorithm>
#include <cmath>

#include "insyn/error.hpp"
#include "insyn/rng.hpp"

namespace insyn::synth {

ScenarioKind scenario_kind_from_string(const std::string& name) {
  if (name == "lone") return ScenarioKind::LoneWalker;
  if (name == "insync") return ScenarioKind::InSyncPair;
  if (name == "headon") return ScenarioKind::HeadOnConflict;
  if (name == "crossing") return ScenarioKind::CrossingConflict;
  if (name == "mixed") return ScenarioKind::Mixed;
  fail("bad-config", "unknown scenario kind '" + name + "'");
}

const char* to_string(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::LoneWalker: return "lone";
    case ScenarioKind::InSyncPair: return "insync";
    case ScenarioKind::HeadOnConflict: return "headon";
    case ScenarioKind::CrossingConflict: return "crossing";
    case ScenarioKind::Mixed: return "mixed";
  }
  return "?";
}

namespace {

constexpr double kDt = 0.4;

struct TrackBuild {
  std::vector<Position> positions;  // from step 0
};

// Cosine ramp from 0 to 1 over `span` steps, starting at `begin`.
double avoidance_ramp(int step, int begin, int span) {
  if (step < begin) return 0.0;
  double u = static_cast<double>(step - begin) / span;
  if (u >= 1.0) return 1.0;
  return 0.5 * (1.0 - std::cos(M_PI * u));
}

std::vector<TrackBuild> build_lone(const ScenarioSpec& spec, Rng& rng) {
  double heading = rng.uniform(0.0, 2.0 * M_PI);
  Position start{rng.uniform(-5.0, 5.0), rng.uniform(-5.0, 5.0)};
  TrackBuild track;
  for (int t = 0; t < spec.steps; ++t)
    track.positions.push_back(Position{start.x + spec.speed * kDt * t * std::cos(heading),
                                       start.y + spec.speed * kDt * t * std::sin(heading)});
  return {track};
}

// Two parallel walkers heading +x, the second one `offset` above the first.
// The partner positions reuse the leader's coordinates so the lateral gap is
// exact at every step.
std::vector<TrackBuild> build_insync(const ScenarioSpec& spec, Rng& rng) {
  if (spec.offset <= 0.0 || spec.offset >= spec.radius)
    fail("bad-spec", "in-sync offset must lie in (0, radius)");
  Position start{rng.uniform(-5.0, 5.0), rng.uniform(-5.0, 5.0)};
  TrackBuild a, b;
  for (int t = 0; t < spec.steps; ++t) {
    Position p{start.x + spec.speed * kDt * t, start.y};
    a.positions.push_back(p);
    b.positions.push_back(Position{p.x, p.y + spec.offset});
  }
  return {a, b};
}

// Head-on pair with scripted right-right avoidance arcs that begin the step
// the other walker enters the radius.
std::vector<TrackBuild> build_headon(const ScenarioSpec& spec, Rng& rng) {
  if (spec.entry_step < 1 || spec.entry_step >= spec.steps - 1)
    fail("bad-spec", "entry step must fall inside the scenario");
  double lateral = 0.12;
  double margin = 0.05;
  double along = std::sqrt(std::max(0.01, (spec.radius - margin) * (spec.radius - margin) -
                                              lateral * lateral));
  // Separation shrinks by 2*v*dt per step; solve for first entry at entry_step.
  double gap0 = 2.0 * spec.speed * kDt * spec.entry_step + along;
  Position start{rng.uniform(-5.0, 5.0), rng.uniform(-5.0, 5.0)};
  double amp = 0.7;
  int span = 6;
  TrackBuild a, b;
  for (int t = 0; t < spec.steps; ++t) {
    double ramp = avoidance_ramp(t, spec.entry_step, span);
    a.positions.push_back(Position{start.x + spec.speed * kDt * t, start.y - amp * ramp});
    b.positions.push_back(Position{start.x + gap0 - spec.speed * kDt * t,
                                   start.y + lateral + amp * ramp});
  }
  return {a, b};
}

// Perpendicular paths timed to near-cross around entry_step + a few steps.
std::vector<TrackBuild> build_crossing(const ScenarioSpec& spec, Rng& rng) {
  if (spec.entry_step < 1 || spec.entry_step >= spec.steps - 1)
    fail("bad-spec", "entry step must fall inside the scenario");
  Position start{rng.uniform(-5.0, 5.0), rng.uniform(-5.0, 5.0)};
  // Walker A heads +x; walker B heads -y and reaches A's line where their
  // paths meet. Choose the meeting distance so B enters the radius near
  // entry_step; diagonal approach closes at sqrt(2)*v*dt per step.
  double close_rate = std::sqrt(2.0) * spec.speed * kDt;
  double enter_gap = close_rate * spec.entry_step + spec.radius - 0.05;
  double meet_x = start.x + enter_gap / std::sqrt(2.0) + 0.3;
  double meet_y = start.y;
  double amp = 0.7;
  int span = 6;
  TrackBuild a, b;
  for (int t = 0; t < spec.steps; ++t) {
    double ramp = avoidance_ramp(t, spec.entry_step, span);
    a.positions.push_back(Position{start.x + spec.speed * kDt * t, start.y - amp * ramp});
    b.positions.push_back(Position{meet_x + amp * ramp,
                                   meet_y + enter_gap / std::sqrt(2.0) + 0.3 -
                                       spec.speed * kDt * t});
  }
  return {a, b};
}

Position rotate_about(const Position& p, const Position& c, double angle) {
  double ca = std::cos(angle), sa = std::sin(angle);
  double dx = p.x - c.x, dy = p.y - c.y;
  return Position{c.x + ca * dx - sa * dy, c.y + sa * dx + ca * dy};
}

std::vector<TrackBuild> build_group(const ScenarioSpec& spec, ScenarioKind kind, Rng& rng) {
  ScenarioSpec sub = spec;
  sub.kind = kind;
  switch (kind) {
    case ScenarioKind::LoneWalker: return build_lone(sub, rng);
    case ScenarioKind::InSyncPair: return build_insync(sub, rng);
    case ScenarioKind::HeadOnConflict: return build_headon(sub, rng);
    case ScenarioKind::CrossingConflict: return build_crossing(sub, rng);
    case ScenarioKind::Mixed: break;
  }
  fail("bad-spec", "mixed groups cannot nest");
}

std::vector<TrackBuild> build_mixed(const ScenarioSpec& spec, Rng& rng) {
  if (spec.mixed_groups < 1) fail("bad-spec", "mixed needs at least one group");
  std::vector<TrackBuild> tracks;
  for (int g = 0; g < spec.mixed_groups; ++g) {
    ScenarioKind kind;
    double pick = rng.uniform();
    if (pick < 0.25) kind = ScenarioKind::LoneWalker;
    else if (pick < 0.55) kind = ScenarioKind::InSyncPair;
    else if (pick < 0.80) kind = ScenarioKind::HeadOnConflict;
    else kind = ScenarioKind::CrossingConflict;

    ScenarioSpec sub = spec;
    int entry_hi = std::max(2, spec.steps - 6);
    sub.entry_step = 2 + static_cast<int>(rng.below(static_cast<uint64_t>(entry_hi - 1)));
    std::vector<TrackBuild> group = build_group(sub, kind, rng);

    // Spread groups out and rotate them so headings vary across the scene.
    Position shift{rng.uniform(-14.0, 14.0), rng.uniform(-14.0, 14.0)};
    double angle = rng.uniform(0.0, 2.0 * M_PI);
    Position pivot = group[0].positions[0];
    for (TrackBuild& track : group)
      for (Position& p : track.positions) {
        p = rotate_about(p, pivot, angle);
        p.x += shift.x;
        p.y += shift.y;
      }
    for (TrackBuild& track : group) tracks.push_back(std::move(track));
  }
  return tracks;
}

// Direct application of the labeling rules to the constructed tracks: nearest
// neighbor per sign-pattern quadrant, identity carried between steps. Kept
// deliberately separate from the interaction module.
int quadrant_index(double dx, double dy) {
  if (dy > 0.0) return dx >= 0.0 ? 1 : 0;   // RU : LU
  if (dy < 0.0) return dx <= 0.0 ? 2 : 3;   // LD : RD
  return dx > 0.0 ? 3 : 0;                  // RD : LU
}

struct OracleSlot {
  bool occupied = false;
  PedId ped = 0;
  double dist = 0.0;
};

std::map<PedId, std::vector<InteractionInfo>> label_tracks(
    const std::vector<TrackBuild>& tracks, int steps, double radius) {
  std::map<PedId, std::vector<InteractionInfo>> labels;
  int n = static_cast<int>(tracks.size());
  for (int agent = 0; agent < n; ++agent) {
    std::vector<InteractionInfo> per_step;
    std::array<OracleSlot, kNumRegions> prev{};
    for (int t = 0; t < steps; ++t) {
      std::array<OracleSlot, kNumRegions> curr{};
      const Position& origin = tracks[agent].positions[t];
      for (int other = 0; other < n; ++other) {
        if (other == agent) continue;
        const Position& p = tracks[other].positions[t];
        double dx = p.x - origin.x;
        double dy = p.y - origin.y;
        double d = std::sqrt(dx * dx + dy * dy);
        if (d > radius || d == 0.0) continue;
        OracleSlot& slot = curr[quadrant_index(dx, dy)];
        PedId id = other + 1;
        if (!slot.occupied || d < slot.dist || (d == slot.dist && id < slot.ped)) {
          slot.occupied = true;
          slot.ped = id;
          slot.dist = d;
        }
      }
      InteractionInfo info;
      for (int r = 0; r < kNumRegions; ++r) {
        if (!curr[r].occupied) continue;
        RegionSlot& out = info.slots[r];
        out.occupant = curr[r].ped;
        out.distance = curr[r].dist;
        out.state = (prev[r].occupied && prev[r].ped == curr[r].ped)
                        ? InteractionState::InSync
                        : InteractionState::Conflict;
      }
      per_step.push_back(info);
      prev = curr;
    }
    labels.emplace(agent + 1, std::move(per_step));
  }
  return labels;
}

}  // namespace

LabeledScene generate(const ScenarioSpec& spec) {
  if (spec.steps < 2) fail("bad-spec", "scenario needs at least two steps");
  if (spec.speed <= 0.0) fail("bad-spec", "speed must be > 0");
  if (spec.noise < 0.0) fail("bad-spec", "noise must be >= 0");
  if (spec.radius <= 0.0) fail("bad-spec", "radius must be > 0");

  Rng rng(spec.seed);
  std::vector<TrackBuild> tracks;
  switch (spec.kind) {
    case ScenarioKind::LoneWalker: tracks = build_lone(spec, rng); break;
    case ScenarioKind::InSyncPair: tracks = build_insync(spec, rng); break;
    case ScenarioKind::HeadOnConflict: tracks = build_headon(spec, rng); break;
    case ScenarioKind::CrossingConflict: tracks = build_crossing(spec, rng); break;
    case ScenarioKind::Mixed: tracks = build_mixed(spec, rng); break;
  }

  LabeledScene ls;
  ls.expected = label_tracks(tracks, spec.steps, spec.radius);

  if (spec.noise > 0.0)
    for (TrackBuild& track : tracks)
      for (Position& p : track.positions) {
        p.x += rng.normal(0.0, spec.noise);
        p.y += rng.normal(0.0, spec.noise);
      }

  ls.scene.dt = kDt;
  ls.scene.frames.assign(spec.steps, {});
  for (size_t i = 0; i < tracks.size(); ++i) {
    Track track;
    track.first_step = 0;
    track.positions = tracks[i].positions;
    PedId id = static_cast<PedId>(i) + 1;
    for (int s = 0; s < spec.steps; ++s) ls.scene.frames[s].push_back({id, track.at(s)});
    ls.scene.tracks.emplace(id, std::move(track));
  }
  return ls;
}

std::vector<LabelMismatch> verify_labels(const LabeledScene& ls, double radius) {
  std::vector<LabelMismatch> mismatches;
  int steps = ls.scene.num_steps();
  for (const auto& [agent, expected] : ls.expected) {
    auto states = extract_walking_states(ls.scene, agent, 0, steps, radius);
    for (int t = 0; t < steps; ++t)
      for (int r = 0; r < kNumRegions; ++r) {
        const RegionSlot& want = expected[t].slots[r];
        const RegionSlot& got = states[t].interaction.slots[r];
        bool state_ok = want.state == got.state && want.occupant == got.occupant;
        bool dist_ok = std::abs(want.distance - got.distance) <= 1e-12;
        if (!state_ok || !dist_ok)
          mismatches.push_back({agent, t, kRegionOrder[r], want.state, got.state, want.distance,
                                got.distance});
      }
  }
  return mismatches;
}

}  // namespace insyn::synth
