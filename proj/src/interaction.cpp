#include "insyn/interaction.hpp"

#include <cstdio>
#include <ostream>

#include "insyn/error.hpp"

namespace insyn {

const char* to_string(RegionId region) {
  switch (region) {
    case RegionId::LU: return "LU";
    case RegionId::RU: return "RU";
    case RegionId::LD: return "LD";
    case RegionId::RD: return "RD";
  }
  return "?";
}

const char* to_string(InteractionState state) {
  switch (state) {
    case InteractionState::NoNeighbor: return "NoNeighbor";
    case InteractionState::InSync: return "InSync";
    case InteractionState::Conflict: return "Conflict";
  }
  return "?";
}

RegionId region_of(const Position& agent, const Position& other) {
  double dx = other.x - agent.x;
  double dy = other.y - agent.y;
  if (dx == 0.0 && dy == 0.0)
    fail("degenerate", "coincident points have no region");
  if (dy > 0.0) return dx >= 0.0 ? RegionId::RU : RegionId::LU;
  if (dy < 0.0) return dx <= 0.0 ? RegionId::LD : RegionId::RD;
  return dx > 0.0 ? RegionId::RD : RegionId::LU;
}

RegionOccupancy nearest_in_regions(const Scene& scene, int step, PedId agent, double radius) {
  const Position& origin = scene.position(agent, step);
  RegionOccupancy occ;
  // neighbors_at is sorted by (distance, ped id), so the first hit per region
  // is the winner under the tie-break rule.
  for (const auto& [ped, pos] : neighbors_at(scene, step, agent, radius)) {
    if (pos == origin) continue;
    int r = static_cast<int>(region_of(origin, pos));
    if (!occ.regions[r]) occ.regions[r] = {ped, distance(origin, pos)};
  }
  return occ;
}

RegionOccupancy nearest_overall(const Scene& scene, int step, PedId agent, double radius) {
  const Position& origin = scene.position(agent, step);
  RegionOccupancy occ;
  for (const auto& [ped, pos] : neighbors_at(scene, step, agent, radius)) {
    if (pos == origin) continue;
    std::pair<PedId, double> hit{ped, distance(origin, pos)};
    for (auto& slot : occ.regions) slot = hit;
    break;
  }
  return occ;
}

InteractionInfo classify_step(const RegionOccupancy& prev, const RegionOccupancy& curr) {
  InteractionInfo info;
  for (int r = 0; r < kNumRegions; ++r) {
    RegionSlot& slot = info.slots[r];
    if (!curr.regions[r]) {
      slot = RegionSlot{};  // NoNeighbor, kLargeDistance
      continue;
    }
    const auto& [ped, dist] = *curr.regions[r];
    slot.occupant = ped;
    slot.distance = dist;
    slot.state = (prev.regions[r] && prev.regions[r]->first == ped) ? InteractionState::InSync
                                                                    : InteractionState::Conflict;
  }
  return info;
}

std::vector<WalkingState> extract_walking_states(const Scene& scene, PedId agent, int first_step,
                                                 int count, double radius, RegionMode mode) {
  if (count <= 0) fail("bad-config", "walking-state range must be non-empty");
  for (int s = first_step; s < first_step + count; ++s)
    if (!scene.present(agent, s))
      fail("agent-not-present", "pedestrian " + std::to_string(agent) + " absent at step " +
                                    std::to_string(s));

  auto occupancy = [&](int step) {
    return mode == RegionMode::FourQuadrants ? nearest_in_regions(scene, step, agent, radius)
                                             : nearest_overall(scene, step, agent, radius);
  };

  RegionOccupancy prev;  // all-absent unless a pre-window step exists
  if (first_step > 0 && scene.present(agent, first_step - 1))
    prev = occupancy(first_step - 1);

  std::vector<WalkingState> states;
  states.reserve(count);
  for (int s = first_step; s < first_step + count; ++s) {
    RegionOccupancy curr = occupancy(s);
    WalkingState ws;
    ws.position = scene.position(agent, s);
    ws.interaction = classify_step(prev, curr);
    states.push_back(ws);
    prev = curr;
  }
  return states;
}

void write_walking_states(std::ostream& out, const std::vector<WalkingState>& states,
                          int first_step) {
  char buf[256];
  for (size_t i = 0; i < states.size(); ++i) {
    const WalkingState& ws = states[i];
    int n = std::snprintf(buf, sizeof(buf), "%d %.6f %.6f |", first_step + static_cast<int>(i),
                          ws.position.x, ws.position.y);
    out.write(buf, n);
    for (const RegionSlot& slot : ws.interaction.slots) {
      n = std::snprintf(buf, sizeof(buf), " %d:%.6f", static_cast<int>(slot.state),
                        slot.distance);
      out.write(buf, n);
    }
    out << '\n';
  }
}

}  // namespace insyn
