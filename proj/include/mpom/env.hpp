#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mpom/rng.hpp"

namespace mpom {

constexpr int kNumActions = 6;
constexpr int kMaxEpisodeLen = 800;
constexpr int kBombFuse = 10;
constexpr int kFlameLife = 2;

enum class Action : int { Up = 0, Down = 1, Left = 2, Right = 3, Stop = 4, Bomb = 5 };

enum class CellKind : uint8_t { Passage, Rigid, Wood };
enum class Powerup : uint8_t { None, ExtraBomb, BlastRadius, Kick };

struct Cell {
  CellKind kind = CellKind::Passage;
  Powerup powerup = Powerup::None;
};

struct Coord {
  int row = 0;
  int col = 0;
  bool operator==(const Coord&) const = default;
};

struct Bomb {
  Coord pos;
  int fuse = kBombFuse;          // timesteps until explosion, in [1, 10]
  int blast_radius = 2;
  int owner = -1;
  int moving_dir = -1;           // action ordinal of a kick direction, -1 if static
};

struct Flame {
  Coord pos;
  int life = kFlameLife;         // remaining timesteps, in [1, 2]
};

struct AgentAttr {
  Coord pos;
  bool alive = true;
  int ammo = 1;
  int blast_radius = 2;
  bool can_kick = false;
};

struct GameState {
  int size = 8;
  std::vector<Cell> grid;        // row-major, size*size
  std::vector<Bomb> bombs;
  std::vector<Flame> flames;
  std::array<AgentAttr, 2> agents;
  int timestep = 0;
  uint64_t seed = 0;             // generation seed, kept for replay

  Cell& cell(int r, int c) { return grid[r * size + c]; }
  const Cell& cell(int r, int c) const { return grid[r * size + c]; }
  bool in_bounds(int r, int c) const { return r >= 0 && r < size && c >= 0 && c < size; }
  bool in_bounds(Coord p) const { return in_bounds(p.row, p.col); }

  const Bomb* bomb_at(Coord p) const;
  const Flame* flame_at(Coord p) const;
};

enum class Outcome { Win0, Win1, Tie };

struct StepResult {
  GameState next;
  std::array<double, 2> rewards{0.0, 0.0};
  bool terminal = false;
  std::optional<Outcome> outcome;
};

struct BoardConfig {
  double rigid_frac = 0.15;
  double wood_frac = 0.25;
  double powerup_frac = 0.5;     // fraction of wood cells hiding a power-up
  int max_retries = 64;          // connectivity regeneration attempts
};

/// Generates a random board: agents in two distinct corners, random
/// rigid/wood layout, power-ups hidden under wood. A Passage-or-Wood path
/// between the agent starts is guaranteed (regenerates from a derived
/// sub-seed on failure). Identical seed gives a bit-identical state.
GameState generate_board(uint64_t seed, int size, const BoardConfig& cfg = {});

/// Advances the world one timestep with both agents' simultaneous actions.
/// Phase order is fixed: flame decay, explosions (with chains), movement,
/// bomb placement, kicked-bomb movement, power-up pickup, death check,
/// timestep increment + terminal check.
StepResult step(const GameState& state, std::array<Action, 2> actions);

/// Cross-shaped blast footprint of a bomb: origin plus up to blast_radius-1
/// cells in each cardinal direction. Rays stop at Rigid (exclusive) and at
/// Wood (inclusive).
std::vector<Coord> blast_cells(const GameState& state, const Bomb& bomb);

/// Terminal status derivable from a bare state (used by rollouts): set when
/// any agent is dead or the step cap is reached.
std::optional<StepResult> terminal_info(const GameState& state);

// --- Episode replay ---------------------------------------------------------
// Line-oriented record: a header with the generation seed and board size,
// then one "a0 a1" action pair per step. Enough to re-derive the full trace.

struct Replay {
  uint64_t seed = 0;
  int size = 8;
  std::vector<std::array<Action, 2>> steps;
};

void write_replay(std::ostream& os, const Replay& replay);
Replay read_replay(std::istream& is);

/// Re-runs a replay from its seed and returns the per-step results.
std::vector<StepResult> rederive_trace(const Replay& replay);

const char* action_name(Action a);
std::string render(const GameState& state);

}  // namespace mpom
