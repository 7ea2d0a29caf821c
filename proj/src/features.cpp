#include "mpom/features.hpp"

#include <algorithm>
#include <stdexcept>

namespace mpom {

FeatureTensor encode(const GameState& state, int agent_id) {
  if (agent_id != 0 && agent_id != 1) throw std::invalid_argument("encode: bad agent_id");
  const int n = state.size;
  FeatureTensor t;
  t.size = n;
  t.data.assign(static_cast<size_t>(kNumChannels) * n * n, 0.0);

  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      const Cell& cell = state.cell(r, c);
      switch (cell.kind) {
        case CellKind::Passage: t.at(0, r, c) = 1.0; break;
        case CellKind::Rigid: t.at(1, r, c) = 1.0; break;
        case CellKind::Wood: t.at(2, r, c) = 1.0; break;
      }
      if (cell.kind == CellKind::Passage && cell.powerup != Powerup::None) {
        const int ch = 8 + static_cast<int>(cell.powerup) - 1;
        t.at(ch, r, c) = 1.0;
      }
    }
  }

  for (const Bomb& b : state.bombs) {
    t.at(3, b.pos.row, b.pos.col) = 1.0;
    t.at(4, b.pos.row, b.pos.col) = static_cast<double>(b.fuse) / kBombFuse;
    t.at(5, b.pos.row, b.pos.col) = static_cast<double>(b.blast_radius) / n;
  }
  for (const Flame& f : state.flames) {
    t.at(6, f.pos.row, f.pos.col) = 1.0;
    t.at(7, f.pos.row, f.pos.col) = static_cast<double>(f.life) / kFlameLife;
  }

  // slot 0 = observing agent, slot 1 = opponent; slots 2-3 stay zero
  const int ids[2] = {agent_id, 1 - agent_id};
  for (int slot = 0; slot < 2; ++slot) {
    const AgentAttr& a = state.agents[ids[slot]];
    if (a.alive) t.at(11 + slot, a.pos.row, a.pos.col) = 1.0;
    const double ammo = std::min(a.ammo / 5.0, 1.0);
    const double blast = static_cast<double>(a.blast_radius) / n;
    const double kick = a.can_kick ? 1.0 : 0.0;
    for (int r = 0; r < n; ++r) {
      for (int c = 0; c < n; ++c) {
        t.at(16 + slot * 3 + 0, r, c) = ammo;
        t.at(16 + slot * 3 + 1, r, c) = blast;
        t.at(16 + slot * 3 + 2, r, c) = kick;
      }
    }
  }

  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) t.at(15, r, c) = 1.0;

  return t;
}

}  // namespace mpom
