#include "mpom/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "mpom/features.hpp"

namespace mpom {

namespace {

OpponentKind parse_opponent(const std::string& v) {
  if (v == "static") return OpponentKind::Static;
  if (v == "rule_based") return OpponentKind::RuleBased;
  throw std::invalid_argument("config: unknown opponent '" + v + "'");
}

RolloutPolicy parse_rollout_policy(const std::string& v) {
  if (v == "uniform") return RolloutPolicy::UniformRandom;
  if (v == "policy_head") return RolloutPolicy::PolicyHead;
  throw std::invalid_argument("config: unknown rollout_policy '" + v + "'");
}

std::vector<uint64_t> parse_seed_list(const std::string& v) {
  std::vector<uint64_t> seeds;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) seeds.push_back(std::stoull(item));
  }
  if (seeds.empty()) throw std::invalid_argument("config: empty seed list");
  return seeds;
}

void write_metrics_line(std::ostream& os, const EpisodeSummary& e) {
  os << "wall_clock_s=" << e.wall_clock_s << " global_version=" << e.global_version
     << " worker_id=" << e.worker_id << " worker_kind=" << worker_kind_name(e.worker_kind)
     << " episode_reward=" << e.episode_reward << " episode_length=" << e.episode_length
     << " outcome=" << outcome_name(e.outcome) << " loss_total=" << e.last_loss.total
     << " loss_policy=" << e.last_loss.policy << " loss_value=" << e.last_loss.value
     << " loss_entropy=" << e.last_loss.entropy
     << " loss_planner_imitation=" << e.last_loss.planner_imitation << "\n";
}

}  // namespace

void ExperimentConfig::validate() const {
  if (board_size < 6) throw std::invalid_argument("config: board_size must be >= 6");
  if (num_workers < 1) throw std::invalid_argument("config: num_workers must be >= 1");
  if (num_demonstrators < 0 || num_demonstrators >= num_workers)
    throw std::invalid_argument("config: need 0 <= num_demonstrators < num_workers");
  if (rollout_budget < 1) throw std::invalid_argument("config: rollout_budget must be >= 1");
  if (t_max < 1) throw std::invalid_argument("config: t_max must be >= 1");
  if (seeds.empty()) throw std::invalid_argument("config: seeds must be nonempty");
  if (loss.lambda_v < 0 || loss.lambda_pi < 0 || loss.lambda_h < 0 || loss.lambda_planner < 0)
    throw std::invalid_argument("config: loss weights must be >= 0");
}

void apply_override(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "opponent") cfg.opponent = parse_opponent(value);
  else if (key == "board_size") cfg.board_size = std::stoi(value);
  else if (key == "num_workers") cfg.num_workers = std::stoi(value);
  else if (key == "num_demonstrators") cfg.num_demonstrators = std::stoi(value);
  else if (key == "rollout_budget") cfg.rollout_budget = std::stoi(value);
  else if (key == "rollout_policy") cfg.rollout_policy = parse_rollout_policy(value);
  else if (key == "seeds") cfg.seeds = parse_seed_list(value);
  else if (key == "episode_budget") cfg.episode_budget = std::stoull(value);
  else if (key == "time_budget_s") cfg.time_budget_s = std::stod(value);
  else if (key == "lambda_v") cfg.loss.lambda_v = std::stod(value);
  else if (key == "lambda_pi") cfg.loss.lambda_pi = std::stod(value);
  else if (key == "lambda_h") cfg.loss.lambda_h = std::stod(value);
  else if (key == "lambda_planner") cfg.loss.lambda_planner = std::stod(value);
  else if (key == "gamma") cfg.loss.gamma = std::stod(value);
  else if (key == "clip_norm") cfg.loss.clip_norm = std::stod(value);
  else if (key == "t_max") cfg.t_max = std::stoi(value);
  else if (key == "reward_threshold") cfg.reward_threshold = std::stod(value);
  else if (key == "reward_window") cfg.reward_window = std::stoi(value);
  else if (key == "curve_bucket") cfg.curve_bucket = std::stoi(value);
  else if (key == "checkpoint_every") cfg.checkpoint_every = std::stoi(value);
  else if (key == "rigid_frac") cfg.board.rigid_frac = std::stod(value);
  else if (key == "wood_frac") cfg.board.wood_frac = std::stod(value);
  else if (key == "powerup_frac") cfg.board.powerup_frac = std::stod(value);
  else throw std::invalid_argument("config: unknown key '" + key + "'");
}

ExperimentConfig parse_config(std::istream& is) {
  ExperimentConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key=value");
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r");
      const auto b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    apply_override(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("config: cannot open " + path);
  return parse_config(is);
}

std::vector<SeedRunResult> run_training(const ExperimentConfig& cfg,
                                        const std::string& out_dir) {
  cfg.validate();
  std::filesystem::create_directories(out_dir);

  std::vector<SeedRunResult> results;
  for (uint64_t seed : cfg.seeds) {
    SeedRunResult result;
    result.seed = seed;

    NetShape shape;
    shape.board = cfg.board_size;
    GlobalStore store(init_network(seed, shape), init_adam(shape.param_count()));

    std::ofstream metrics(out_dir + "/metrics_seed_" + std::to_string(seed) + ".log");
    if (!metrics) throw std::runtime_error("run_training: cannot write metrics in " + out_dir);

    std::mutex mu;
    std::atomic<bool> stop{false};
    const auto start = std::chrono::steady_clock::now();
    double window_sum = 0.0;

    auto on_episode = [&](const EpisodeSummary& e) {
      std::lock_guard<std::mutex> lock(mu);
      write_metrics_line(metrics, e);
      ++result.total_episodes;
      if (e.worker_kind == WorkerKind::ModelFree) {
        // demonstrator rewards are tracked but excluded from the curve
        result.model_free_rewards.push_back(e.episode_reward);
        ++result.model_free_episodes;
        window_sum += e.episode_reward;
        const size_t n = result.model_free_rewards.size();
        if (n > static_cast<size_t>(cfg.reward_window))
          window_sum -= result.model_free_rewards[n - cfg.reward_window - 1];
        if (cfg.reward_threshold && result.episodes_to_threshold < 0 &&
            n >= static_cast<size_t>(cfg.reward_window) &&
            window_sum / cfg.reward_window >= *cfg.reward_threshold) {
          result.episodes_to_threshold = static_cast<int64_t>(n);
          stop.store(true);
        }
        if (result.model_free_episodes >= cfg.episode_budget) stop.store(true);
        if (cfg.checkpoint_every > 0 &&
            result.model_free_episodes % static_cast<uint64_t>(cfg.checkpoint_every) == 0) {
          save_checkpoint(out_dir + "/checkpoint_seed_" + std::to_string(seed) + "_ep" +
                              std::to_string(result.model_free_episodes) + ".bin",
                          store.snapshot());
        }
      }
      if (cfg.time_budget_s > 0 &&
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() >=
              cfg.time_budget_s)
        stop.store(true);
    };

    std::vector<std::thread> threads;
    threads.reserve(cfg.num_workers);
    for (int w = 0; w < cfg.num_workers; ++w) {
      WorkerConfig wc;
      wc.worker_id = w;
      wc.kind = w < cfg.num_demonstrators ? WorkerKind::Demonstrator : WorkerKind::ModelFree;
      wc.opponent = cfg.opponent;
      wc.board_size = cfg.board_size;
      wc.t_max = cfg.t_max;
      wc.seed = seed;
      wc.loss = cfg.loss;
      wc.search.rollout_budget = cfg.rollout_budget;
      wc.search.rollout_policy = cfg.rollout_policy;
      wc.board = cfg.board;
      threads.emplace_back(
          [&store, wc, &on_episode, &stop] { worker_loop(store, wc, on_episode, stop); });
    }
    for (auto& t : threads) t.join();

    save_checkpoint(out_dir + "/checkpoint_seed_" + std::to_string(seed) + ".bin",
                    store.snapshot());
    results.push_back(std::move(result));
  }

  // merged learning curve over seeds, bucketed by model-free episode index
  {
    std::ofstream csv(out_dir + "/learning_curve.csv");
    csv << "episode_bucket,mean_reward,std_reward\n";
    size_t max_len = 0;
    for (const auto& r : results) max_len = std::max(max_len, r.model_free_rewards.size());
    const size_t w = static_cast<size_t>(cfg.curve_bucket);
    for (size_t b = 0; b * w < max_len; ++b) {
      std::vector<double> per_seed;
      for (const auto& r : results) {
        const size_t lo = b * w, hi = std::min(r.model_free_rewards.size(), (b + 1) * w);
        if (lo >= hi) continue;
        double sum = 0;
        for (size_t i = lo; i < hi; ++i) sum += r.model_free_rewards[i];
        per_seed.push_back(sum / static_cast<double>(hi - lo));
      }
      if (per_seed.empty()) continue;
      double mean = 0;
      for (double v : per_seed) mean += v;
      mean /= static_cast<double>(per_seed.size());
      double var = 0;
      for (double v : per_seed) var += (v - mean) * (v - mean);
      const double stddev = std::sqrt(var / static_cast<double>(per_seed.size()));
      csv << b * w << "," << mean << "," << stddev << "\n";
    }
  }
  return results;
}

EvalReport run_eval(const AgentSpec& agent, OpponentKind opponent, int games, uint64_t seed,
                    int board_size, std::ostream* per_game) {
  if (games < 1) throw std::invalid_argument("run_eval: games must be >= 1");
  std::optional<Network> net;
  if (agent.kind == AgentSpec::Kind::Checkpoint) {
    net = load_checkpoint(agent.checkpoint_path);
    NetShape expected;
    expected.board = board_size;
    if (!(net->shape == expected))
      throw std::runtime_error("run_eval: checkpoint architecture mismatch");
  }

  SearchConfig search_cfg;
  search_cfg.rollout_budget = agent.rollout_budget;

  std::vector<int8_t> outcomes(games);  // +1 win, -1 loss, 0 tie
  std::vector<int> lengths(games);

#pragma omp parallel for schedule(dynamic)
  for (int g = 0; g < games; ++g) {
    Rng rng(Rng::derive(seed, static_cast<uint64_t>(g)));
    GameState state = generate_board(Rng::derive(seed, 0x47000000u + g), board_size);
    Outcome outcome = Outcome::Tie;
    for (;;) {
      Action a0 = Action::Stop;
      switch (agent.kind) {
        case AgentSpec::Kind::VanillaMCTS:
          a0 = search(state, 0, search_cfg, nullptr, rng).action;
          break;
        case AgentSpec::Kind::Checkpoint: {
          const NetOutput out = forward(*net, encode(state, 0));
          double u = rng.uniform_real();
          int a = kNumActions - 1;
          for (int i = 0; i < kNumActions; ++i) {
            u -= out.policy[i];
            if (u < 0) {
              a = i;
              break;
            }
          }
          a0 = static_cast<Action>(a);
          break;
        }
        case AgentSpec::Kind::RuleBased:
          a0 = rule_based_policy(state, 0, rng);
          break;
        case AgentSpec::Kind::Static:
          a0 = static_policy(state, 0);
          break;
      }
      const Action a1 = opponent_action(opponent, state, 1, rng);
      StepResult r = step(state, {a0, a1});
      if (r.terminal) {
        outcome = *r.outcome;
        lengths[g] = r.next.timestep;
        break;
      }
      state = std::move(r.next);
    }
    outcomes[g] = outcome == Outcome::Win0 ? 1 : (outcome == Outcome::Win1 ? -1 : 0);
  }

  EvalReport report;
  report.games = games;
  for (int g = 0; g < games; ++g) {
    if (outcomes[g] > 0) ++report.wins;
    else if (outcomes[g] < 0) ++report.losses;
    else ++report.ties;
    if (per_game) {
      *per_game << "game=" << g << " outcome="
                << (outcomes[g] > 0 ? "win" : outcomes[g] < 0 ? "loss" : "tie")
                << " length=" << lengths[g] << "\n";
    }
  }
  return report;
}

std::string format_report(const EvalReport& r) {
  std::ostringstream os;
  os << "games=" << r.games << " wins=" << r.wins << " losses=" << r.losses
     << " ties=" << r.ties << " mean_reward=" << r.mean_reward();
  return os.str();
}

}  // namespace mpom
