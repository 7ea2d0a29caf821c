#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "mpom/mcts.hpp"
#include "mpom/net.hpp"
#include "mpom/opponents.hpp"
#include "mpom/trajectory.hpp"

namespace mpom {

/// n-step advantages: for each t, the n-step return (n shrinking toward the
/// segment end, bootstrapped with traj.bootstrap_value) minus the stored
/// V(s_t).
std::vector<double> compute_advantages(const Trajectory& traj, double gamma);

/// n-step return targets R_t (same recursion the advantages use).
std::vector<double> nstep_returns(const Trajectory& traj, double gamma);

/// Scalar A3C loss from the recorded policy probabilities; the gradient
/// path lives in loss_and_grad and is cross-checked against this.
LossComponents a3c_loss(const Trajectory& traj, const std::vector<double>& advantages,
                        const LossSpec& spec);

/// Mean cross-entropy between the planner's one-hot actions and the policy.
/// Zero-probability planner actions are clamped at 1e-10 and counted.
double planner_imitation_loss(const std::vector<int>& planner_actions,
                              const std::vector<std::array<double, kNumActions>>& policy_probs,
                              int* clamped = nullptr);

LossComponents pi_a3c_loss(const Trajectory& traj, const std::vector<double>& advantages,
                           const LossSpec& spec);

// ---------------------------------------------------------------------------

/// Global parameter store. apply() is serialized: one Adam step per
/// submitted gradient, version incremented by exactly 1. Snapshot reads
/// block only for the duration of a copy.
class GlobalStore {
 public:
  GlobalStore(Network net, AdamState opt)
      : net_(std::move(net)), opt_(std::move(opt)) {}

  Network snapshot() const {
    std::lock_guard<std::mutex> lock(mu_);
    return net_;
  }

  /// Returns the new version. Non-finite gradients are rejected (version
  /// unchanged, skip counter incremented) and reported as 0.
  uint64_t apply(const std::vector<double>& grads);

  uint64_t version() const { return version_.load(); }
  uint64_t skipped() const { return skipped_.load(); }

 private:
  mutable std::mutex mu_;
  Network net_;
  AdamState opt_;
  std::atomic<uint64_t> version_{0};
  std::atomic<uint64_t> skipped_{0};
};

enum class WorkerKind { ModelFree, Demonstrator };

struct EpisodeSummary {
  double wall_clock_s = 0.0;
  uint64_t global_version = 0;
  int worker_id = 0;
  WorkerKind worker_kind = WorkerKind::ModelFree;
  double episode_reward = 0.0;
  int episode_length = 0;
  Outcome outcome = Outcome::Tie;
  LossComponents last_loss;
};

struct WorkerConfig {
  int worker_id = 0;
  WorkerKind kind = WorkerKind::ModelFree;
  OpponentKind opponent = OpponentKind::Static;
  int board_size = 8;
  int t_max = 20;
  uint64_t seed = 0;
  LossSpec loss;
  SearchConfig search;   // demonstrator workers only
  BoardConfig board;
};

/// Runs episodes until stop is set: pull snapshot, act for up to t_max
/// steps (model-free: sample from the policy; demonstrator: MCTS action,
/// with the network's own policy recorded alongside), compute gradients on
/// the snapshot, submit, repeat. Environment errors abort the episode only.
void worker_loop(GlobalStore& store, const WorkerConfig& config,
                 const std::function<void(const EpisodeSummary&)>& on_episode,
                 const std::atomic<bool>& stop);

const char* worker_kind_name(WorkerKind k);
const char* outcome_name(Outcome o);

}  // namespace mpom
