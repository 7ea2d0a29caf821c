#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "mpom/harness.hpp"

namespace {

using namespace mpom;

int cmd_train(const std::string& config_path, const std::vector<std::string>& overrides,
              uint64_t seed, const std::string& out_dir) {
  ExperimentConfig cfg = config_path.empty() ? ExperimentConfig{} : load_config(config_path);
  for (const std::string& ov : overrides) {
    const auto eq = ov.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("override must be key=value: " + ov);
    apply_override(cfg, ov.substr(0, eq), ov.substr(eq + 1));
  }
  if (seed != 0) cfg.seeds = {seed};
  cfg.validate();
  const auto results = run_training(cfg, out_dir);
  for (const auto& r : results) {
    std::cout << "seed=" << r.seed << " model_free_episodes=" << r.model_free_episodes
              << " total_episodes=" << r.total_episodes;
    if (r.episodes_to_threshold >= 0)
      std::cout << " episodes_to_threshold=" << r.episodes_to_threshold;
    std::cout << "\n";
  }
  return 0;
}

AgentSpec parse_agent(const std::string& s) {
  AgentSpec spec;
  if (s == "static") {
    spec.kind = AgentSpec::Kind::Static;
  } else if (s == "rule_based") {
    spec.kind = AgentSpec::Kind::RuleBased;
  } else if (s.rfind("mcts", 0) == 0) {
    spec.kind = AgentSpec::Kind::VanillaMCTS;
    spec.rollout_budget = s.size() > 4 ? std::stoi(s.substr(4)) : 75;
  } else {
    spec.kind = AgentSpec::Kind::Checkpoint;
    spec.checkpoint_path = s;
  }
  return spec;
}

int cmd_eval(const std::string& agent, const std::string& opponent, int games, uint64_t seed,
             int board_size, const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  std::ofstream per_game(out_dir + "/eval_games.log");
  const OpponentKind opp = opponent == "static" ? OpponentKind::Static
                                                : OpponentKind::RuleBased;
  const EvalReport report = run_eval(parse_agent(agent), opp, games, seed, board_size,
                                     &per_game);
  const std::string line = format_report(report);
  std::ofstream(out_dir + "/eval_report.txt") << line << "\n";
  std::cout << line << "\n";
  return 0;
}

int cmd_replay(const std::string& path) {
  std::ifstream is(path);
  if (!is) {
    std::cerr << "replay: cannot open " << path << "\n";
    return 1;
  }
  const Replay replay = read_replay(is);
  GameState s = generate_board(replay.seed, replay.size);
  std::cout << "seed=" << replay.seed << " size=" << replay.size << "\n" << render(s);
  const auto trace = rederive_trace(replay);
  for (size_t i = 0; i < trace.size(); ++i) {
    std::cout << "step " << i + 1 << ": " << action_name(replay.steps[i][0]) << " / "
              << action_name(replay.steps[i][1]) << "\n"
              << render(trace[i].next);
    if (trace[i].terminal) {
      std::cout << "terminal: rewards (" << trace[i].rewards[0] << ", " << trace[i].rewards[1]
                << ")\n";
    }
  }
  return 0;
}

#define SELFTEST_CHECK(cond, name)                          \
  do {                                                      \
    if (cond) {                                             \
      std::cout << "ok   " << name << "\n";                 \
    } else {                                                \
      std::cout << "FAIL " << name << "\n";                 \
      failures++;                                           \
    }                                                       \
  } while (0)

int cmd_selftest() {
  int failures = 0;

  // environment invariants
  {
    const GameState a = generate_board(42, 8);
    const GameState b = generate_board(42, 8);
    SELFTEST_CHECK(render(a) == render(b), "board generation deterministic");

    GameState s = generate_board(7, 8);
    StepResult r = step(s, {Action::Bomb, Action::Stop});
    int calls_after = 0;
    while (!r.terminal && calls_after < 12 && r.next.flames.empty()) {
      r = step(r.next, {Action::Stop, Action::Stop});
      ++calls_after;
    }
    SELFTEST_CHECK(calls_after == 10, "bomb explodes after 10 steps");
  }

  // gradient check on a handful of coordinates
  {
    NetShape shape;
    shape.board = 6;
    const Network net = init_network(5, shape);
    Trajectory traj;
    Rng rng(9);
    GameState s = generate_board(3, 6);
    for (int t = 0; t < 3; ++t) {
      TrajStep ts;
      ts.obs = encode(s, 0);
      ts.action = t % kNumActions;
      ts.planner_action = (t + 1) % kNumActions;
      ts.reward = t == 2 ? 1.0 : 0.0;
      ts.value = 0.1 * t;
      traj.steps.push_back(std::move(ts));
      s = step(s, {Action::Stop, Action::Stop}).next;
    }
    traj.bootstrap_value = 0.25;
    LossSpec spec;
    spec.clip_norm = 0;  // unclipped for the comparison
    auto [loss, grads] = loss_and_grad(net, traj, spec, LossKind::PiA3C);
    double worst = 0;
    for (int k = 0; k < 20; ++k) {
      const int idx = rng.uniform_int(shape.param_count());
      Network pert = net;
      const double eps = 1e-4;
      pert.params[idx] = net.params[idx] + eps;
      const double up = loss_and_grad(pert, traj, spec, LossKind::PiA3C).first.total;
      pert.params[idx] = net.params[idx] - eps;
      const double dn = loss_and_grad(pert, traj, spec, LossKind::PiA3C).first.total;
      const double fd = (up - dn) / (2 * eps);
      const double denom = std::max({std::abs(fd), std::abs(grads[idx]), 1e-8});
      worst = std::max(worst, std::abs(fd - grads[idx]) / denom);
    }
    SELFTEST_CHECK(worst < 1e-3, "finite-difference gradient check");
  }

  // eval report identity
  {
    const EvalReport r = run_eval(AgentSpec{AgentSpec::Kind::Static}, OpponentKind::Static,
                                  3, 11, 8);
    SELFTEST_CHECK(r.ties == 3 && r.mean_reward() == -1.0, "static vs static all ties");
  }

  std::cout << (failures == 0 ? "selftest passed" : "selftest FAILED") << "\n";
  return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mini-Pommerman PI-A3C trainer and evaluation harness"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "out";
  uint64_t seed = 0;
  std::vector<std::string> overrides;

  auto* train = app.add_subcommand("train", "run a training experiment");
  train->add_option("--config", config_path, "experiment config file (key=value lines)");
  train->add_option("--set", overrides, "config override key=value (repeatable)");
  train->add_option("--seed", seed, "single training seed (overrides config seeds)");
  train->add_option("--out-dir", out_dir, "output directory");

  std::string agent = "mcts75", opponent = "static";
  int games = 200, board_size = 8;
  auto* eval = app.add_subcommand("eval", "play an evaluation tournament");
  eval->add_option("--agent", agent, "static | rule_based | mcts<budget> | <checkpoint path>");
  eval->add_option("--opponent", opponent, "static | rule_based");
  eval->add_option("--games", games, "number of games");
  eval->add_option("--seed", seed, "master seed");
  eval->add_option("--board-size", board_size, "board size");
  eval->add_option("--out-dir", out_dir, "output directory");

  std::string replay_path;
  auto* replay = app.add_subcommand("replay", "re-derive and pretty-print a stored episode");
  replay->add_option("file", replay_path, "replay file")->required();

  app.add_subcommand("selftest", "run the invariant and gradient self-checks");

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand("train")) return cmd_train(config_path, overrides, seed, out_dir);
    if (app.got_subcommand("eval"))
      return cmd_eval(agent, opponent, games, seed == 0 ? 1 : seed, board_size, out_dir);
    if (app.got_subcommand("replay")) return cmd_replay(replay_path);
    if (app.got_subcommand("selftest")) return cmd_selftest();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
