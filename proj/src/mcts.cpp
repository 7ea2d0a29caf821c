#include "mpom/mcts.hpp"

#include <limits>
#include <memory>
#include <stdexcept>
#include <vector>

#include "mpom/features.hpp"

namespace mpom {

namespace {

// Children are keyed by the planner's action; the opponent move is sampled
// uniformly when an edge is first expanded and the resulting child state is
// frozen (single determinization).
struct Node {
  GameState state;
  bool terminal = false;
  double terminal_reward = 0.0;  // planner perspective, set when terminal
  int visits = 1;                // n(s) = sum of edge visits + 1
  struct Edge {
    int visits = 0;
    double q = 0.0;
    std::unique_ptr<Node> child;
  };
  std::array<Edge, kNumActions> edges;
};

int sample_policy(const Network& net, const GameState& s, int agent_id, Rng& rng) {
  const NetOutput out = forward(net, encode(s, agent_id));
  double u = rng.uniform_real();
  for (int a = 0; a < kNumActions; ++a) {
    u -= out.policy[a];
    if (u < 0) return a;
  }
  return kNumActions - 1;
}

}  // namespace

double ucb1(double q, int n_parent, int n_child, double c) {
  if (n_child == 0) return std::numeric_limits<double>::infinity();
  return q + c * std::sqrt(std::log(static_cast<double>(n_parent)) / n_child);
}

double rollout(const GameState& leaf, int agent_id, const SearchConfig& config,
               const Network* net, Rng& rng) {
  if (config.rollout_policy == RolloutPolicy::PolicyHead && net == nullptr)
    throw std::invalid_argument("rollout: PolicyHead mode requires a network");
  if (auto t = terminal_info(leaf)) return t->rewards[agent_id];
  GameState s = leaf;
  for (int d = 0; d < config.rollout_depth_limit; ++d) {
    std::array<Action, 2> joint;
    joint[1 - agent_id] = static_cast<Action>(rng.uniform_int(kNumActions));
    joint[agent_id] = config.rollout_policy == RolloutPolicy::PolicyHead
                          ? static_cast<Action>(sample_policy(*net, s, agent_id, rng))
                          : static_cast<Action>(rng.uniform_int(kNumActions));
    StepResult r = step(s, joint);
    if (r.terminal) return r.rewards[agent_id];
    s = std::move(r.next);
  }
  return 0.0;
}

SearchResult search(const GameState& root_state, int agent_id, const SearchConfig& config,
                    const Network* net, Rng& rng) {
  if (terminal_info(root_state)) throw std::invalid_argument("search: terminal root");
  if (!root_state.agents[agent_id].alive)
    throw std::invalid_argument("search: planner agent is dead");

  Node root;
  root.state = root_state;

  std::vector<std::pair<Node*, int>> path;  // (node, action) edges traversed
  for (int iter = 0; iter < config.rollout_budget; ++iter) {
    path.clear();
    Node* cur = &root;
    int depth = 0;
    double value = 0.0;

    for (;;) {
      if (cur->terminal) {
        value = cur->terminal_reward;
        break;
      }
      if (depth >= config.max_tree_depth) {
        value = rollout(cur->state, agent_id, config, net, rng);
        break;
      }
      int chosen = -1;
      for (int a = 0; a < kNumActions; ++a) {
        if (cur->edges[a].visits == 0) {
          chosen = a;
          break;
        }
      }
      const bool expanding = chosen >= 0;
      if (!expanding) {
        // argmax UCB1; exact ties broken uniformly at random so flat-value
        // regions don't funnel every descent down the same ordinal
        double best_score = -std::numeric_limits<double>::infinity();
        int num_tied = 0;
        for (int a = 0; a < kNumActions; ++a) {
          const double score =
              ucb1(cur->edges[a].q, cur->visits, cur->edges[a].visits, config.exploration);
          if (score > best_score) {
            best_score = score;
            chosen = a;
            num_tied = 1;
          } else if (score == best_score && rng.uniform_int(++num_tied) == 0) {
            chosen = a;
          }
        }
      }

      path.emplace_back(cur, chosen);
      if (expanding) {
        std::array<Action, 2> joint;
        joint[agent_id] = static_cast<Action>(chosen);
        joint[1 - agent_id] = static_cast<Action>(rng.uniform_int(kNumActions));
        StepResult r = step(cur->state, joint);
        auto child = std::make_unique<Node>();
        child->state = std::move(r.next);
        child->terminal = r.terminal;
        child->terminal_reward = r.terminal ? r.rewards[agent_id] : 0.0;
        cur->edges[chosen].child = std::move(child);
        Node* leaf = cur->edges[chosen].child.get();
        value = leaf->terminal ? leaf->terminal_reward
                               : rollout(leaf->state, agent_id, config, net, rng);
        break;
      }
      cur = cur->edges[chosen].child.get();
      ++depth;
    }

    for (auto& [node, action] : path) {
      Node::Edge& e = node->edges[action];
      ++node->visits;
      ++e.visits;
      e.q += (value - e.q) / e.visits;
    }
  }

  SearchResult result;
  int best = 0;
  for (int a = 0; a < kNumActions; ++a) {
    result.root_visits[a] = root.edges[a].visits;
    if (result.root_visits[a] > result.root_visits[best]) best = a;
  }
  result.action = static_cast<Action>(best);
  return result;
}

}  // namespace mpom
