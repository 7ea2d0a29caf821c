#include "mpom/env.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace mpom {

namespace {

constexpr int kDirRow[4] = {-1, 1, 0, 0};  // Up, Down, Left, Right
constexpr int kDirCol[4] = {0, 0, -1, 1};

bool is_move(Action a) { return static_cast<int>(a) < 4; }

Coord moved(Coord p, Action a) {
  const int d = static_cast<int>(a);
  return {p.row + kDirRow[d], p.col + kDirCol[d]};
}

Bomb* bomb_at_mut(GameState& s, Coord p) {
  for (auto& b : s.bombs)
    if (b.pos == p) return &b;
  return nullptr;
}

void add_flame(GameState& s, Coord p) {
  for (auto& f : s.flames) {
    if (f.pos == p) {
      f.life = kFlameLife;
      return;
    }
  }
  s.flames.push_back({p, kFlameLife});
}

// Flood fill from agent 0's start treating Wood as traversable.
bool starts_connected(const GameState& s) {
  std::vector<char> seen(s.grid.size(), 0);
  std::vector<Coord> stack{s.agents[0].pos};
  seen[s.agents[0].pos.row * s.size + s.agents[0].pos.col] = 1;
  while (!stack.empty()) {
    const Coord p = stack.back();
    stack.pop_back();
    if (p == s.agents[1].pos) return true;
    for (int d = 0; d < 4; ++d) {
      const Coord q{p.row + kDirRow[d], p.col + kDirCol[d]};
      if (!s.in_bounds(q) || seen[q.row * s.size + q.col]) continue;
      if (s.cell(q.row, q.col).kind == CellKind::Rigid) continue;
      seen[q.row * s.size + q.col] = 1;
      stack.push_back(q);
    }
  }
  return false;
}

GameState try_generate(uint64_t seed, int size, const BoardConfig& cfg) {
  Rng rng(seed);
  GameState s;
  s.size = size;
  s.seed = seed;
  s.grid.assign(static_cast<size_t>(size) * size, Cell{});

  const std::array<Coord, 4> corners{
      Coord{0, 0}, Coord{0, size - 1}, Coord{size - 1, 0}, Coord{size - 1, size - 1}};
  const int c0 = rng.uniform_int(4);
  int c1 = rng.uniform_int(3);
  if (c1 >= c0) ++c1;
  s.agents[0].pos = corners[c0];
  s.agents[1].pos = corners[c1];

  for (int r = 0; r < size; ++r) {
    for (int c = 0; c < size; ++c) {
      const Coord p{r, c};
      if (p == s.agents[0].pos || p == s.agents[1].pos) continue;
      const double u = rng.uniform_real();
      if (u < cfg.rigid_frac) {
        s.cell(r, c).kind = CellKind::Rigid;
      } else if (u < cfg.rigid_frac + cfg.wood_frac) {
        s.cell(r, c).kind = CellKind::Wood;
        if (rng.bernoulli(cfg.powerup_frac)) {
          static const Powerup kKinds[3] = {Powerup::ExtraBomb, Powerup::BlastRadius,
                                            Powerup::Kick};
          s.cell(r, c).powerup = kKinds[rng.uniform_int(3)];
        }
      }
    }
  }

  // Cleared access arms around each spawn (as in the reference simulator):
  // without them an agent can start inside a pocket smaller than its own
  // blast radius, where placing any bomb is suicide.
  for (const AgentAttr& a : s.agents) {
    const int dr = a.pos.row == 0 ? 1 : -1;
    const int dc = a.pos.col == 0 ? 1 : -1;
    for (int k = 1; k <= 2; ++k) {
      s.cell(a.pos.row, a.pos.col + dc * k) = Cell{};
      s.cell(a.pos.row + dr * k, a.pos.col) = Cell{};
    }
  }
  return s;
}

}  // namespace

const Bomb* GameState::bomb_at(Coord p) const {
  for (const auto& b : bombs)
    if (b.pos == p) return &b;
  return nullptr;
}

const Flame* GameState::flame_at(Coord p) const {
  for (const auto& f : flames)
    if (f.pos == p) return &f;
  return nullptr;
}

GameState generate_board(uint64_t seed, int size, const BoardConfig& cfg) {
  if (size < 6) throw std::invalid_argument("generate_board: size must be >= 6");
  uint64_t attempt_seed = seed;
  for (int attempt = 0; attempt < cfg.max_retries; ++attempt) {
    GameState s = try_generate(attempt_seed, size, cfg);
    if (starts_connected(s)) {
      s.seed = seed;  // replays reference the caller's seed
      return s;
    }
    attempt_seed = Rng::derive(seed, static_cast<uint64_t>(attempt) + 1);
  }
  throw std::runtime_error("generate_board: no connected board found");
}

std::vector<Coord> blast_cells(const GameState& state, const Bomb& bomb) {
  std::vector<Coord> cells{bomb.pos};
  for (int d = 0; d < 4; ++d) {
    for (int step = 1; step <= bomb.blast_radius - 1; ++step) {
      const Coord p{bomb.pos.row + kDirRow[d] * step, bomb.pos.col + kDirCol[d] * step};
      if (!state.in_bounds(p)) break;
      const CellKind kind = state.cell(p.row, p.col).kind;
      if (kind == CellKind::Rigid) break;
      cells.push_back(p);
      if (kind == CellKind::Wood) break;  // wood burns and stops the ray
    }
  }
  return cells;
}

std::optional<StepResult> terminal_info(const GameState& state) {
  const bool a0 = state.agents[0].alive;
  const bool a1 = state.agents[1].alive;
  if (a0 && a1 && state.timestep < kMaxEpisodeLen) return std::nullopt;
  StepResult r;
  r.next = state;
  r.terminal = true;
  if (a0 && !a1) {
    r.outcome = Outcome::Win0;
    r.rewards = {1.0, -1.0};
  } else if (!a0 && a1) {
    r.outcome = Outcome::Win1;
    r.rewards = {-1.0, 1.0};
  } else {
    r.outcome = Outcome::Tie;
    r.rewards = {-1.0, -1.0};
  }
  return r;
}

StepResult step(const GameState& state, std::array<Action, 2> actions) {
  if (terminal_info(state)) throw std::logic_error("step: state is terminal");
  for (Action a : actions) {
    const int v = static_cast<int>(a);
    if (v < 0 || v >= kNumActions) throw std::invalid_argument("step: malformed action");
  }

  GameState s = state;

  // (1) flame decay
  std::erase_if(s.flames, [](Flame& f) { return --f.life <= 0; });

  // (2) fuse decrement and explosion resolution with chain reactions
  for (auto& b : s.bombs) --b.fuse;
  {
    std::vector<size_t> queue;
    std::vector<char> exploded(s.bombs.size(), 0);
    for (size_t i = 0; i < s.bombs.size(); ++i) {
      if (s.bombs[i].fuse <= 0 || s.flame_at(s.bombs[i].pos)) {
        exploded[i] = 1;
        queue.push_back(i);
      }
    }
    for (size_t qi = 0; qi < queue.size(); ++qi) {
      const Bomb& b = s.bombs[queue[qi]];
      for (Coord p : blast_cells(s, b)) {
        add_flame(s, p);
        if (s.cell(p.row, p.col).kind == CellKind::Wood)
          s.cell(p.row, p.col).kind = CellKind::Passage;  // reveals any power-up
        for (size_t j = 0; j < s.bombs.size(); ++j) {
          if (!exploded[j] && s.bombs[j].pos == p) {
            exploded[j] = 1;
            queue.push_back(j);
          }
        }
      }
    }
    std::vector<Bomb> remaining;
    for (size_t i = 0; i < s.bombs.size(); ++i) {
      if (exploded[i]) {
        if (s.bombs[i].owner >= 0) ++s.agents[s.bombs[i].owner].ammo;
      } else {
        remaining.push_back(s.bombs[i]);
      }
    }
    s.bombs = std::move(remaining);
  }

  // (3) agent movement with collision resolution
  {
    std::array<Coord, 2> target{s.agents[0].pos, s.agents[1].pos};
    std::array<int, 2> kick_dir{-1, -1};
    for (int i = 0; i < 2; ++i) {
      const AgentAttr& a = s.agents[i];
      if (!a.alive || !is_move(actions[i])) continue;
      const Coord t = moved(a.pos, actions[i]);
      if (!s.in_bounds(t)) continue;
      if (s.cell(t.row, t.col).kind != CellKind::Passage) continue;
      if (s.bomb_at(t)) {
        // kick: allowed when the cell beyond the bomb is a free passage
        if (!a.can_kick) continue;
        const Coord beyond = moved(t, actions[i]);
        if (!s.in_bounds(beyond)) continue;
        if (s.cell(beyond.row, beyond.col).kind != CellKind::Passage) continue;
        if (s.bomb_at(beyond)) continue;
        if (beyond == s.agents[0].pos || beyond == s.agents[1].pos) continue;
        kick_dir[i] = static_cast<int>(actions[i]);
      }
      target[i] = t;
    }
    // same-cell conflicts and head-on swaps: neither agent moves
    if (s.agents[0].alive && s.agents[1].alive) {
      const bool same = target[0] == target[1];
      const bool swap = target[0] == s.agents[1].pos && target[1] == s.agents[0].pos &&
                        !(target[0] == s.agents[0].pos);
      if (same || swap) {
        target = {s.agents[0].pos, s.agents[1].pos};
        kick_dir = {-1, -1};
      }
    }
    // moving into the other agent's (unchanged) cell
    for (int i = 0; i < 2; ++i) {
      const int o = 1 - i;
      if (s.agents[o].alive && target[i] == s.agents[o].pos && target[o] == s.agents[o].pos &&
          !(target[i] == s.agents[i].pos)) {
        target[i] = s.agents[i].pos;
        kick_dir[i] = -1;
      }
    }
    for (int i = 0; i < 2; ++i) {
      if (!s.agents[i].alive) continue;
      if (kick_dir[i] >= 0) {
        if (Bomb* b = bomb_at_mut(s, target[i])) b->moving_dir = kick_dir[i];
      }
      s.agents[i].pos = target[i];
    }
  }

  // (4) bomb placement (ammo 0, or an occupied cell, degrades to Stop)
  for (int i = 0; i < 2; ++i) {
    AgentAttr& a = s.agents[i];
    if (!a.alive || actions[i] != Action::Bomb) continue;
    if (a.ammo <= 0 || s.bomb_at(a.pos)) continue;
    s.bombs.push_back({a.pos, kBombFuse, a.blast_radius, i, -1});
    --a.ammo;
  }

  // (5) kicked-bomb movement
  for (auto& b : s.bombs) {
    if (b.moving_dir < 0) continue;
    const Coord t = moved(b.pos, static_cast<Action>(b.moving_dir));
    const bool blocked = !s.in_bounds(t) || s.cell(t.row, t.col).kind != CellKind::Passage ||
                         s.bomb_at(t) != nullptr ||
                         (s.agents[0].alive && t == s.agents[0].pos) ||
                         (s.agents[1].alive && t == s.agents[1].pos);
    if (blocked) {
      b.moving_dir = -1;
    } else {
      b.pos = t;
    }
  }

  // (6) power-up pickup
  for (auto& a : s.agents) {
    if (!a.alive) continue;
    Cell& c = s.cell(a.pos.row, a.pos.col);
    if (c.kind != CellKind::Passage || c.powerup == Powerup::None) continue;
    switch (c.powerup) {
      case Powerup::ExtraBomb: ++a.ammo; break;
      case Powerup::BlastRadius: ++a.blast_radius; break;
      case Powerup::Kick: a.can_kick = true; break;
      case Powerup::None: break;
    }
    c.powerup = Powerup::None;
  }

  // (7) death check
  for (auto& a : s.agents) {
    if (a.alive && s.flame_at(a.pos)) a.alive = false;
  }

  // (8) timestep increment and terminal check
  ++s.timestep;
  if (auto t = terminal_info(s)) return *t;

  StepResult r;
  r.next = std::move(s);
  return r;
}

void write_replay(std::ostream& os, const Replay& replay) {
  os << "seed " << replay.seed << " size " << replay.size << "\n";
  for (const auto& pair : replay.steps)
    os << static_cast<int>(pair[0]) << " " << static_cast<int>(pair[1]) << "\n";
}

Replay read_replay(std::istream& is) {
  Replay r;
  std::string word;
  if (!(is >> word) || word != "seed" || !(is >> r.seed))
    throw std::runtime_error("replay: bad header");
  if (!(is >> word) || word != "size" || !(is >> r.size))
    throw std::runtime_error("replay: bad header");
  int a0 = 0, a1 = 0;
  while (is >> a0 >> a1) {
    if (a0 < 0 || a0 >= kNumActions || a1 < 0 || a1 >= kNumActions)
      throw std::runtime_error("replay: bad action");
    r.steps.push_back({static_cast<Action>(a0), static_cast<Action>(a1)});
  }
  return r;
}

std::vector<StepResult> rederive_trace(const Replay& replay) {
  GameState s = generate_board(replay.seed, replay.size);
  std::vector<StepResult> trace;
  trace.reserve(replay.steps.size());
  for (const auto& pair : replay.steps) {
    trace.push_back(step(s, pair));
    if (trace.back().terminal) break;
    s = trace.back().next;
  }
  return trace;
}

const char* action_name(Action a) {
  switch (a) {
    case Action::Up: return "Up";
    case Action::Down: return "Down";
    case Action::Left: return "Left";
    case Action::Right: return "Right";
    case Action::Stop: return "Stop";
    case Action::Bomb: return "Bomb";
  }
  return "?";
}

std::string render(const GameState& state) {
  std::ostringstream os;
  for (int r = 0; r < state.size; ++r) {
    for (int c = 0; c < state.size; ++c) {
      const Coord p{r, c};
      char ch = '.';
      switch (state.cell(r, c).kind) {
        case CellKind::Passage:
          ch = state.cell(r, c).powerup != Powerup::None ? '+' : '.';
          break;
        case CellKind::Rigid: ch = '#'; break;
        case CellKind::Wood: ch = 'w'; break;
      }
      if (state.bomb_at(p)) ch = 'o';
      if (state.flame_at(p)) ch = '*';
      if (state.agents[0].alive && state.agents[0].pos == p) ch = 'A';
      if (state.agents[1].alive && state.agents[1].pos == p) ch = 'B';
      os << ch;
    }
    os << '\n';
  }
  os << "t=" << state.timestep << " ammo=(" << state.agents[0].ammo << ","
     << state.agents[1].ammo << ")\n";
  return os.str();
}

}  // namespace mpom
