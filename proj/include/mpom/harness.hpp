#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mpom/trainer.hpp"

namespace mpom {

struct ExperimentConfig {
  OpponentKind opponent = OpponentKind::Static;
  int board_size = 8;
  int num_workers = 24;
  int num_demonstrators = 0;           // k; 0 is the vanilla A3C baseline
  int rollout_budget = 75;
  RolloutPolicy rollout_policy = RolloutPolicy::UniformRandom;
  std::vector<uint64_t> seeds = {1, 2, 3};
  uint64_t episode_budget = 100000;    // model-free episodes per seed
  double time_budget_s = 0.0;          // 0 = unlimited
  LossSpec loss;
  int t_max = 20;
  BoardConfig board;

  // optional early stop: halt a run once the windowed mean model-free
  // reward reaches the threshold
  std::optional<double> reward_threshold;
  int reward_window = 200;
  int curve_bucket = 100;              // learning-curve bucket width
  int checkpoint_every = 0;            // episodes between checkpoints, 0 = final only

  void validate() const;               // throws on inconsistent settings
};

ExperimentConfig parse_config(std::istream& is);
ExperimentConfig load_config(const std::string& path);
/// "key=value" override, same keys as the config file.
void apply_override(ExperimentConfig& cfg, const std::string& key, const std::string& value);

struct SeedRunResult {
  uint64_t seed = 0;
  uint64_t model_free_episodes = 0;
  uint64_t total_episodes = 0;
  int64_t episodes_to_threshold = -1;  // model-free episodes, -1 if never reached
  std::vector<double> model_free_rewards;
};

/// Trains one run per seed, writing per-seed metric streams, checkpoints,
/// and a merged mean/stddev learning-curve CSV into out_dir.
std::vector<SeedRunResult> run_training(const ExperimentConfig& cfg,
                                        const std::string& out_dir);

// --- Evaluation -------------------------------------------------------------

struct AgentSpec {
  enum class Kind { VanillaMCTS, Checkpoint, RuleBased, Static } kind = Kind::VanillaMCTS;
  int rollout_budget = 75;             // VanillaMCTS only
  std::string checkpoint_path;         // Checkpoint only
};

struct EvalReport {
  int games = 0;
  int wins = 0;
  int losses = 0;
  int ties = 0;
  double mean_reward() const {
    return static_cast<double>(wins - losses - ties) / games;
  }
};

/// Plays games with per-game fresh boards and seeds derived from the master
/// seed; deterministic given seed. Per-game records go to `per_game` when
/// provided.
EvalReport run_eval(const AgentSpec& agent, OpponentKind opponent, int games, uint64_t seed,
                    int board_size = 8, std::ostream* per_game = nullptr);

std::string format_report(const EvalReport& r);

}  // namespace mpom
