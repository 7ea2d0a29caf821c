#pragma once

#include <vector>

#include "mpom/env.hpp"

namespace mpom {

constexpr int kNumChannels = 28;

// Channel-major 28 x size x size encoding. Layout (frozen project
// convention, pinned by a golden checksum test):
//   0  Passage                      1  Rigid
//   2  Wood                         3  bomb positions
//   4  bomb fuse / 10               5  bomb blast radius / size
//   6  flame positions              7  flame remaining life / 2
//   8  ExtraBomb power-ups          9  BlastRadius power-ups
//   10 Kick power-ups (8-10: visible on passages only)
//   11-14 agent-position one-hots for 4 slots; slot 0 is always the
//         observing agent, slot 1 the opponent, slots 2-3 all-zero
//   15 constant-1 plane
//   16-27 ability planes: per slot (ammo/5 clipped, blast_radius/size,
//         can_kick) broadcast as constant planes
struct FeatureTensor {
  int size = 8;
  std::vector<double> data;  // kNumChannels * size * size

  double& at(int ch, int r, int c) { return data[(ch * size + r) * size + c]; }
  double at(int ch, int r, int c) const { return data[(ch * size + r) * size + c]; }
};

/// Pure function of (state, agent_id). Swapping agent_id permutes the
/// agent-slot channels and changes nothing else.
FeatureTensor encode(const GameState& state, int agent_id);

}  // namespace mpom
