#include "mpom/opponents.hpp"

#include <algorithm>
#include <limits>
#include <queue>
#include <vector>

namespace mpom {

namespace {

constexpr int kDirRow[4] = {-1, 1, 0, 0};
constexpr int kDirCol[4] = {0, 0, -1, 1};
constexpr int kInf = std::numeric_limits<int>::max();

struct Plan {
  std::vector<int> dist;       // Dijkstra distance from the agent
  std::vector<int> first_dir;  // first move (action ordinal) toward each cell
  std::vector<int> blast_fuse; // min fuse among bombs covering the cell, kInf if none
  int size = 0;

  bool covered(Coord p) const { return blast_fuse[p.row * size + p.col] < kInf; }
};

bool walkable(const GameState& s, int agent_id, Coord p) {
  if (!s.in_bounds(p)) return false;
  if (s.cell(p.row, p.col).kind != CellKind::Passage) return false;
  if (s.bomb_at(p)) return false;
  if (s.flame_at(p)) return false;  // never step onto an active flame
  const int other = 1 - agent_id;
  if (s.agents[other].alive && s.agents[other].pos == p) return false;
  return true;
}

Plan make_plan(const GameState& s, int agent_id, int slack) {
  const int n = s.size;
  Plan plan;
  plan.size = n;
  plan.dist.assign(static_cast<size_t>(n) * n, kInf);
  plan.first_dir.assign(static_cast<size_t>(n) * n, -1);
  plan.blast_fuse.assign(static_cast<size_t>(n) * n, kInf);

  // Chain-aware fuses: a bomb inside another blast inherits the earlier
  // fuse, since chains detonate it in the same step.
  std::vector<int> fuse(s.bombs.size());
  for (size_t i = 0; i < s.bombs.size(); ++i) fuse[i] = s.bombs[i].fuse;
  for (bool changed = true; changed;) {
    changed = false;
    for (size_t i = 0; i < s.bombs.size(); ++i)
      for (Coord p : blast_cells(s, s.bombs[i]))
        for (size_t j = 0; j < s.bombs.size(); ++j)
          if (s.bombs[j].pos == p && fuse[i] < fuse[j]) {
            fuse[j] = fuse[i];
            changed = true;
          }
  }
  for (size_t i = 0; i < s.bombs.size(); ++i)
    for (Coord p : blast_cells(s, s.bombs[i]))
      plan.blast_fuse[p.row * n + p.col] =
          std::min(plan.blast_fuse[p.row * n + p.col], fuse[i]);

  // Unit edge weights, so Dijkstra reduces to a FIFO expansion. Cells inside
  // a pending blast zone are traversable only when the fuse leaves slack
  // steps beyond the arrival time.
  using Item = std::pair<int, int>;  // (dist, cell index) — kept sorted by the queue
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  const Coord start = s.agents[agent_id].pos;
  plan.dist[start.row * n + start.col] = 0;
  pq.push({0, start.row * n + start.col});
  while (!pq.empty()) {
    const auto [d, idx] = pq.top();
    pq.pop();
    if (d > plan.dist[idx]) continue;
    const Coord p{idx / n, idx % n};
    for (int dir = 0; dir < 4; ++dir) {
      const Coord q{p.row + kDirRow[dir], p.col + kDirCol[dir]};
      if (!walkable(s, agent_id, q)) continue;
      const int qi = q.row * n + q.col;
      const int nd = d + 1;
      if (plan.blast_fuse[qi] < kInf && plan.blast_fuse[qi] <= nd + slack) continue;
      if (nd >= plan.dist[qi]) continue;
      plan.dist[qi] = nd;
      plan.first_dir[qi] = d == 0 ? dir : plan.first_dir[idx];
      pq.push({nd, qi});
    }
  }
  return plan;
}

bool clear_blast_line(const GameState& s, Coord from, Coord to, int radius) {
  if (from.row != to.row && from.col != to.col) return false;
  const int dist = std::abs(from.row - to.row) + std::abs(from.col - to.col);
  if (dist > radius - 1) return false;
  const int dr = (to.row > from.row) - (to.row < from.row);
  const int dc = (to.col > from.col) - (to.col < from.col);
  for (Coord p{from.row + dr, from.col + dc}; !(p == to); p = {p.row + dr, p.col + dc}) {
    const CellKind k = s.cell(p.row, p.col).kind;
    if (k != CellKind::Passage) return false;
  }
  return true;
}

// A bomb is only worth placing when the plan that includes it still reaches
// a cell outside every pending blast zone.
bool bomb_escape_exists(const GameState& s, int agent_id, int slack) {
  GameState with_bomb = s;
  Bomb b;
  b.pos = s.agents[agent_id].pos;
  b.blast_radius = s.agents[agent_id].blast_radius;
  b.owner = agent_id;
  with_bomb.bombs.push_back(b);
  const Plan plan = make_plan(with_bomb, agent_id, slack);
  const int n = s.size;
  for (int i = 0; i < n * n; ++i)
    if (plan.dist[i] != kInf && plan.dist[i] > 0 && plan.blast_fuse[i] == kInf) return true;
  return false;
}

}  // namespace

Action static_policy(const GameState&, int) { return Action::Stop; }

Action rule_based_policy(const GameState& s, int agent_id, Rng& rng, int safety_slack) {
  const AgentAttr& me = s.agents[agent_id];
  const AgentAttr& opp = s.agents[1 - agent_id];
  const int n = s.size;
  const Plan plan = make_plan(s, agent_id, safety_slack);
  const int here = me.pos.row * n + me.pos.col;

  // (1) flee a pending blast zone: shortest safe path to the nearest
  // uncovered cell
  if (plan.blast_fuse[here] < kInf) {
    int best = -1, best_d = kInf;
    for (int i = 0; i < n * n; ++i) {
      if (plan.dist[i] == kInf || plan.dist[i] == 0) continue;
      if (plan.blast_fuse[i] < kInf) continue;
      if (plan.dist[i] < best_d) {
        best_d = plan.dist[i];
        best = i;
      }
    }
    if (best >= 0) return static_cast<Action>(plan.first_dir[best]);
    return Action::Stop;
  }

  // (2) opponent within blast radius along a clear line
  if (opp.alive && me.ammo > 0 && clear_blast_line(s, me.pos, opp.pos, me.blast_radius) &&
      bomb_escape_exists(s, agent_id, safety_slack))
    return Action::Bomb;

  // (3) walk toward the nearest visible power-up
  {
    int best = -1, best_d = kInf;
    for (int i = 0; i < n * n; ++i) {
      const Cell& c = s.grid[i];
      if (c.kind != CellKind::Passage || c.powerup == Powerup::None) continue;
      if (plan.dist[i] == kInf || plan.dist[i] == 0) continue;
      if (plan.dist[i] < best_d) {
        best_d = plan.dist[i];
        best = i;
      }
    }
    if (best >= 0) return static_cast<Action>(plan.first_dir[best]);
  }

  // (4) bomb adjacent wood
  if (me.ammo > 0) {
    bool wood = false;
    for (int dir = 0; dir < 4 && !wood; ++dir) {
      const Coord q{me.pos.row + kDirRow[dir], me.pos.col + kDirCol[dir]};
      wood = s.in_bounds(q) && s.cell(q.row, q.col).kind == CellKind::Wood;
    }
    if (wood && rng.bernoulli(0.5) && bomb_escape_exists(s, agent_id, safety_slack))
      return Action::Bomb;
  }

  // (5) random move that stays out of pending blast zones
  {
    int candidates[4];
    int count = 0;
    for (int dir = 0; dir < 4; ++dir) {
      const Coord q{me.pos.row + kDirRow[dir], me.pos.col + kDirCol[dir]};
      if (!walkable(s, agent_id, q)) continue;
      if (plan.covered(q)) continue;
      candidates[count++] = dir;
    }
    if (count > 0) return static_cast<Action>(candidates[rng.uniform_int(count)]);
  }
  return Action::Stop;
}

Action opponent_action(OpponentKind kind, const GameState& s, int agent_id, Rng& rng) {
  return kind == OpponentKind::Static ? static_policy(s, agent_id)
                                      : rule_based_policy(s, agent_id, rng, 2);
}

}  // namespace mpom
