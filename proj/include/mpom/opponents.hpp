#pragma once

#include "mpom/env.hpp"
#include "mpom/rng.hpp"

namespace mpom {

enum class OpponentKind { Static, RuleBased };

/// Always 'stay put'.
Action static_policy(const GameState& state, int agent_id);

/// Scripted benchmark agent. Priority cascade, re-planned with Dijkstra
/// every step: flee pending blasts, bomb a reachable opponent in line,
/// walk to the nearest visible power-up, bomb adjacent wood (p=0.5), else
/// a random safe move. Never steps onto an active flame.
Action rule_based_policy(const GameState& state, int agent_id, Rng& rng,
                         int safety_slack = 2);

Action opponent_action(OpponentKind kind, const GameState& state, int agent_id, Rng& rng);

}  // namespace mpom
