#pragma once

#include <array>
#include <vector>

#include "mpom/features.hpp"

namespace mpom {

struct TrajStep {
  FeatureTensor obs;
  int action = 0;                      // action executed in the environment
  double reward = 0.0;
  double value = 0.0;                  // V(s_t) under the acting snapshot
  std::array<double, kNumActions> policy{};  // policy probs under the snapshot
  int planner_action = -1;             // MCTS action, demonstrator steps only
};

// One update segment: up to t_max steps or until terminal.
struct Trajectory {
  std::vector<TrajStep> steps;
  double bootstrap_value = 0.0;        // V(s_{t+n}), 0 if terminal
  bool demonstrator = false;
};

struct LossSpec {
  double lambda_v = 0.5;
  double lambda_pi = 1.0;
  double lambda_h = 0.01;
  double lambda_planner = 1.0;
  double gamma = 0.999;
  double clip_norm = 40.0;
};

struct LossComponents {
  double total = 0.0;
  double policy = 0.0;
  double value = 0.0;
  double entropy = 0.0;
  double planner_imitation = 0.0;
  double grad_norm = 0.0;              // pre-clip global norm (0 for scalar-only paths)
  int clamped_logs = 0;                // planner-action probs clamped at 1e-10
};

enum class LossKind { A3C, PiA3C };

}  // namespace mpom
