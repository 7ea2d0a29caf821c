#pragma once

#include <array>
#include <cmath>

#include "mpom/env.hpp"
#include "mpom/net.hpp"
#include "mpom/rng.hpp"

namespace mpom {

enum class RolloutPolicy { UniformRandom, PolicyHead };

struct SearchConfig {
  int rollout_budget = 75;
  double exploration = std::sqrt(2.0);
  int max_tree_depth = 25;
  int rollout_depth_limit = 25;
  RolloutPolicy rollout_policy = RolloutPolicy::UniformRandom;
};

struct SearchResult {
  Action action;
  std::array<int, kNumActions> root_visits{};
};

/// UCB1 value for an edge; unvisited edges rank +infinity so they are
/// selected first.
double ucb1(double q, int n_parent, int n_child, double c);

/// UCT search from the planner agent's perspective: UCB1 selection,
/// single-node expansion, depth-limited rollout, undiscounted backup of the
/// terminal reward (0 when no terminal is reached). The opponent is sampled
/// uniformly at random on first expansion of an edge and frozen thereafter.
/// Final move: Robust Child (max visits, ties to the lowest ordinal).
SearchResult search(const GameState& root, int agent_id, const SearchConfig& config,
                    const Network* net, Rng& rng);

/// Depth-limited playout; returns the planner agent's terminal reward, or 0
/// if the depth limit is hit first. PolicyHead mode samples the planner's
/// moves from the network's policy; the opponent is always uniform random.
double rollout(const GameState& leaf, int agent_id, const SearchConfig& config,
               const Network* net, Rng& rng);

}  // namespace mpom
