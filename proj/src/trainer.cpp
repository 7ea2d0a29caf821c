#include "mpom/trainer.hpp"

#include <chrono>
#include <cmath>
#include <exception>

namespace mpom {

namespace {
constexpr double kLogClamp = 1e-10;

double clamped_log(double p, int* clamped) {
  if (p < kLogClamp) {
    if (clamped) ++*clamped;
    p = kLogClamp;
  }
  return std::log(p);
}
}  // namespace

std::vector<double> nstep_returns(const Trajectory& traj, double gamma) {
  std::vector<double> returns(traj.steps.size());
  double running = traj.bootstrap_value;
  for (size_t i = traj.steps.size(); i-- > 0;) {
    running = traj.steps[i].reward + gamma * running;
    returns[i] = running;
  }
  return returns;
}

std::vector<double> compute_advantages(const Trajectory& traj, double gamma) {
  std::vector<double> adv = nstep_returns(traj, gamma);
  for (size_t i = 0; i < adv.size(); ++i) adv[i] -= traj.steps[i].value;
  return adv;
}

LossComponents a3c_loss(const Trajectory& traj, const std::vector<double>& advantages,
                        const LossSpec& spec) {
  LossComponents out;
  const std::vector<double> returns = nstep_returns(traj, spec.gamma);
  const double inv_n = 1.0 / static_cast<double>(traj.steps.size());
  for (size_t i = 0; i < traj.steps.size(); ++i) {
    const TrajStep& st = traj.steps[i];
    out.policy += -clamped_log(st.policy[st.action], &out.clamped_logs) * advantages[i] * inv_n;
    const double verr = returns[i] - st.value;
    out.value += verr * verr * inv_n;
    double h = 0;
    for (double p : st.policy)
      if (p > 0) h -= p * std::log(p);
    out.entropy += h * inv_n;
  }
  out.total = spec.lambda_v * out.value + spec.lambda_pi * out.policy -
              spec.lambda_h * out.entropy;
  return out;
}

double planner_imitation_loss(const std::vector<int>& planner_actions,
                              const std::vector<std::array<double, kNumActions>>& policy_probs,
                              int* clamped) {
  if (planner_actions.empty() || planner_actions.size() != policy_probs.size())
    throw std::invalid_argument("planner_imitation_loss: misaligned inputs");
  double sum = 0;
  for (size_t i = 0; i < planner_actions.size(); ++i)
    sum += -clamped_log(policy_probs[i][planner_actions[i]], clamped);
  return sum / static_cast<double>(planner_actions.size());
}

LossComponents pi_a3c_loss(const Trajectory& traj, const std::vector<double>& advantages,
                           const LossSpec& spec) {
  std::vector<int> planner_actions;
  std::vector<std::array<double, kNumActions>> probs;
  planner_actions.reserve(traj.steps.size());
  for (const auto& st : traj.steps) {
    if (st.planner_action < 0)
      throw std::invalid_argument("pi_a3c_loss: missing planner actions");
    planner_actions.push_back(st.planner_action);
    probs.push_back(st.policy);
  }
  LossComponents out = a3c_loss(traj, advantages, spec);
  out.planner_imitation = planner_imitation_loss(planner_actions, probs, &out.clamped_logs);
  out.total += spec.lambda_planner * out.planner_imitation;
  return out;
}

uint64_t GlobalStore::apply(const std::vector<double>& grads) {
  for (double g : grads) {
    if (!std::isfinite(g)) {
      ++skipped_;
      return 0;
    }
  }
  std::lock_guard<std::mutex> lock(mu_);
  adam_step(opt_, net_.params, grads);
  return ++version_;
}

void worker_loop(GlobalStore& store, const WorkerConfig& config,
                 const std::function<void(const EpisodeSummary&)>& on_episode,
                 const std::atomic<bool>& stop) {
  Rng rng(Rng::derive(config.seed, static_cast<uint64_t>(config.worker_id)));
  const auto start_time = std::chrono::steady_clock::now();
  uint64_t episode_index = 0;

  while (!stop.load(std::memory_order_relaxed)) {
    const uint64_t board_seed =
        Rng::derive(Rng::derive(config.seed, 0x0EAD0000u + config.worker_id), episode_index);
    ++episode_index;
    try {
      GameState state = generate_board(board_seed, config.board_size, config.board);
      Network net = store.snapshot();
      double episode_reward = 0.0;
      Outcome outcome = Outcome::Tie;
      LossComponents last_loss;
      bool terminal = false;
      int episode_length = 0;

      while (!terminal && !stop.load(std::memory_order_relaxed)) {
        Trajectory traj;
        traj.demonstrator = config.kind == WorkerKind::Demonstrator;
        double bootstrap = 0.0;

        for (int t = 0; t < config.t_max; ++t) {
          TrajStep ts;
          ts.obs = encode(state, 0);
          const NetOutput out = forward(net, ts.obs);
          ts.policy = out.policy;
          ts.value = out.value;

          if (config.kind == WorkerKind::Demonstrator) {
            const SearchResult sr = search(state, 0, config.search,
                                           config.search.rollout_policy ==
                                                   RolloutPolicy::PolicyHead
                                               ? &net
                                               : nullptr,
                                           rng);
            ts.action = static_cast<int>(sr.action);
            ts.planner_action = ts.action;
          } else {
            double u = rng.uniform_real();
            int a = kNumActions - 1;
            for (int i = 0; i < kNumActions; ++i) {
              u -= out.policy[i];
              if (u < 0) {
                a = i;
                break;
              }
            }
            ts.action = a;
          }

          const Action opp = opponent_action(config.opponent, state, 1, rng);
          StepResult r = step(state, {static_cast<Action>(ts.action), opp});
          ts.reward = r.rewards[0];
          episode_reward += r.rewards[0];
          episode_length = r.next.timestep;
          traj.steps.push_back(std::move(ts));
          terminal = r.terminal;
          if (terminal) {
            outcome = *r.outcome;
            break;
          }
          state = std::move(r.next);
        }

        if (!terminal && !traj.steps.empty())
          bootstrap = forward(net, encode(state, 0)).value;
        traj.bootstrap_value = bootstrap;

        if (!traj.steps.empty()) {
          const LossKind kind = traj.demonstrator ? LossKind::PiA3C : LossKind::A3C;
          auto [components, grads] = loss_and_grad(net, traj, config.loss, kind);
          last_loss = components;
          store.apply(grads);
          net = store.snapshot();
        }
      }

      if (terminal) {
        EpisodeSummary summary;
        summary.wall_clock_s =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start_time)
                .count();
        summary.global_version = store.version();
        summary.worker_id = config.worker_id;
        summary.worker_kind = config.kind;
        summary.episode_reward = episode_reward;
        summary.episode_length = episode_length;
        summary.outcome = outcome;
        summary.last_loss = last_loss;
        on_episode(summary);
      }
    } catch (const std::exception&) {
      // environment/search failures abort the episode, never the worker
      continue;
    }
  }
}

const char* worker_kind_name(WorkerKind k) {
  return k == WorkerKind::ModelFree ? "model_free" : "demonstrator";
}

const char* outcome_name(Outcome o) {
  switch (o) {
    case Outcome::Win0: return "win";
    case Outcome::Win1: return "loss";
    case Outcome::Tie: return "tie";
  }
  return "?";
}

}  // namespace mpom
