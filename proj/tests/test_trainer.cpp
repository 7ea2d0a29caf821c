#include <atomic>
#include <cmath>
#include <thread>

#include "doctest.h"
#include "mpom/trainer.hpp"

using namespace mpom;

namespace {

Trajectory make_traj(const std::vector<double>& rewards, const std::vector<double>& values,
                     double bootstrap) {
  Trajectory traj;
  for (size_t i = 0; i < rewards.size(); ++i) {
    TrajStep ts;
    ts.action = 0;
    ts.reward = rewards[i];
    ts.value = values[i];
    ts.policy = {1.0 / 6, 1.0 / 6, 1.0 / 6, 1.0 / 6, 1.0 / 6, 1.0 / 6};
    traj.steps.push_back(std::move(ts));
  }
  traj.bootstrap_value = bootstrap;
  return traj;
}

}  // namespace

TEST_CASE("advantages: all-zero rewards and values give zero") {
  const Trajectory traj = make_traj({0, 0, 0}, {0, 0, 0}, 0.0);
  for (double a : compute_advantages(traj, 0.999)) CHECK(a == 0.0);
}

TEST_CASE("advantages: single terminal step") {
  const Trajectory traj = make_traj({1.0}, {0.0}, 0.0);
  const auto adv = compute_advantages(traj, 0.999);
  REQUIRE(adv.size() == 1);
  CHECK(adv[0] == doctest::Approx(1.0));
}

TEST_CASE("advantages: two-step hand-derived value") {
  // oracle: A_0 = 0 + 0.999*1 + 0.999^2*0.5 - 0.2 = 1.2980005
  const Trajectory traj = make_traj({0.0, 1.0}, {0.2, 0.0}, 0.5);
  const auto adv = compute_advantages(traj, 0.999);
  REQUIRE(adv.size() == 2);
  CHECK(adv[0] == doctest::Approx(0.999 + 0.999 * 0.999 * 0.5 - 0.2).epsilon(1e-12));
  CHECK(adv[0] == doctest::Approx(1.2980005).epsilon(1e-9));
  CHECK(adv[1] == doctest::Approx(1.0 + 0.999 * 0.5).epsilon(1e-9));
}

TEST_CASE("a3c loss: uniform policy with matched targets leaves only entropy") {
  Trajectory traj = make_traj({0, 0}, {0, 0}, 0.0);
  LossSpec spec;
  const auto adv = compute_advantages(traj, spec.gamma);
  const LossComponents out = a3c_loss(traj, adv, spec);
  CHECK(out.policy == doctest::Approx(0.0));
  CHECK(out.value == doctest::Approx(0.0));
  CHECK(out.entropy == doctest::Approx(std::log(6.0)).epsilon(1e-6));
  CHECK(out.total == doctest::Approx(-spec.lambda_h * std::log(6.0)).epsilon(1e-6));
}

TEST_CASE("a3c loss: deterministic policy on the taken action zeroes the policy term") {
  Trajectory traj = make_traj({0.0}, {0.0}, 0.0);
  traj.steps[0].policy = {1.0, 0.0, 0.0, 0.0, 0.0, 0.0};
  LossSpec spec;
  const LossComponents out = a3c_loss(traj, {1.0}, spec);
  CHECK(out.policy == doctest::Approx(0.0));  // log 1 = 0
}

TEST_CASE("a3c loss: single-step hand value") {
  // pi(a) = 0.5, advantage 2, R - V = 1, lambda_h = 0:
  // total = 0.5*1 + 1.0*(-ln 0.5 * 2) = 1.8863
  Trajectory traj = make_traj({1.0}, {0.0}, 0.0);
  traj.steps[0].policy = {0.5, 0.1, 0.1, 0.1, 0.1, 0.1};
  LossSpec spec;
  spec.lambda_h = 0.0;
  const LossComponents out = a3c_loss(traj, {2.0}, spec);
  CHECK(out.total == doctest::Approx(0.5 + 2.0 * std::log(2.0)).epsilon(1e-9));
  CHECK(out.total == doctest::Approx(1.8863).epsilon(1e-4));
}

TEST_CASE("planner imitation loss hand values") {
  using Probs = std::array<double, kNumActions>;
  const Probs uniform{1.0 / 6, 1.0 / 6, 1.0 / 6, 1.0 / 6, 1.0 / 6, 1.0 / 6};
  CHECK(planner_imitation_loss({2, 4, 1}, {uniform, uniform, uniform}) ==
        doctest::Approx(std::log(6.0)).epsilon(1e-9));

  const Probs sure{0.0, 1.0, 0.0, 0.0, 0.0, 0.0};
  CHECK(planner_imitation_loss({1, 1}, {sure, sure}) == doctest::Approx(0.0));

  // N=2, probs on the planner actions 0.5 and 0.25
  Probs p1 = uniform, p2 = uniform;
  p1[3] = 0.5;
  p2[0] = 0.25;
  CHECK(planner_imitation_loss({3, 0}, {p1, p2}) ==
        doctest::Approx((std::log(2.0) + std::log(4.0)) / 2.0).epsilon(1e-9));
  CHECK(planner_imitation_loss({3, 0}, {p1, p2}) == doctest::Approx(1.0397).epsilon(1e-4));
}

TEST_CASE("planner imitation loss clamps zero probabilities and flags it") {
  using Probs = std::array<double, kNumActions>;
  const Probs zero_on{0.0, 1.0, 0.0, 0.0, 0.0, 0.0};
  int clamped = 0;
  const double loss = planner_imitation_loss({0}, {zero_on}, &clamped);
  CHECK(clamped == 1);
  CHECK(loss == doctest::Approx(-std::log(1e-10)));
}

TEST_CASE("pi-a3c loss composition") {
  Trajectory traj = make_traj({0, 0}, {0, 0}, 0.0);
  traj.demonstrator = true;
  for (auto& st : traj.steps) st.planner_action = st.action;
  LossSpec spec;
  const auto adv = compute_advantages(traj, spec.gamma);

  SUBCASE("lambda_PI = 0 equals a3c loss exactly") {
    LossSpec zero = spec;
    zero.lambda_planner = 0.0;
    CHECK(pi_a3c_loss(traj, adv, zero).total == doctest::Approx(a3c_loss(traj, adv, zero).total));
  }
  SUBCASE("perfect imitation adds nothing") {
    for (auto& st : traj.steps) {
      st.policy = {0, 0, 0, 0, 0, 0};
      st.policy[st.planner_action] = 1.0;
    }
    CHECK(pi_a3c_loss(traj, adv, spec).total ==
          doctest::Approx(a3c_loss(traj, adv, spec).total));
  }
  SUBCASE("uniform policy, zero advantages, matched targets, lambda_h 0: only L_PI") {
    LossSpec no_h = spec;
    no_h.lambda_h = 0.0;
    CHECK(pi_a3c_loss(traj, adv, no_h).total == doctest::Approx(std::log(6.0)).epsilon(1e-9));
  }
  SUBCASE("missing planner actions are rejected") {
    traj.steps[0].planner_action = -1;
    CHECK_THROWS(pi_a3c_loss(traj, adv, spec));
  }
}

TEST_CASE("global store applies serialized updates with exact version counting") {
  NetShape sh;
  sh.board = 6;
  GlobalStore store(init_network(1, sh), init_adam(sh.param_count()));
  const std::vector<double> zero(sh.param_count(), 0.0);

  SUBCASE("zero gradient bumps the version but changes nothing with zero decay") {
    // weight decay is nonzero by default, so use a tiny-but-real check:
    // sequential submissions count exactly
    for (int i = 1; i <= 5; ++i) CHECK(store.apply(zero) == static_cast<uint64_t>(i));
    CHECK(store.version() == 5);
  }
  SUBCASE("non-finite gradients are rejected and counted") {
    std::vector<double> bad = zero;
    bad[3] = std::nan("");
    CHECK(store.apply(bad) == 0);
    CHECK(store.version() == 0);
    CHECK(store.skipped() == 1);
  }
}

TEST_CASE("zero gradient with zero decay and zero moments is a fixed point") {
  NetShape sh;
  sh.board = 6;
  Network net = init_network(2, sh);
  AdamState opt = init_adam(sh.param_count());
  opt.weight_decay = 0.0;
  const std::vector<double> before = net.params;
  GlobalStore store(std::move(net), std::move(opt));
  CHECK(store.apply(std::vector<double>(sh.param_count(), 0.0)) == 1);
  CHECK(store.snapshot().params == before);
}

TEST_CASE("concurrent submissions are all applied exactly once") {
  NetShape sh;
  sh.board = 6;
  GlobalStore store(init_network(3, sh), init_adam(sh.param_count()));
  constexpr int kThreads = 8;
  constexpr int kPerThread = 50;
  std::vector<std::thread> threads;
  for (int t = 0; t < kThreads; ++t) {
    threads.emplace_back([&store, t, count = sh.param_count()] {
      Rng rng(static_cast<uint64_t>(t));
      std::vector<double> g(count, 0.0);
      for (int i = 0; i < kPerThread; ++i) {
        g[rng.uniform_int(count)] = rng.uniform_real() - 0.5;
        store.apply(g);
      }
    });
  }
  for (auto& t : threads) t.join();
  CHECK(store.version() == kThreads * kPerThread);
  CHECK(store.skipped() == 0);
  for (double p : store.snapshot().params) CHECK(std::isfinite(p));
}

TEST_CASE("model-free worker gradients never include a planner component") {
  NetShape sh;
  sh.board = 6;
  GlobalStore store(init_network(4, sh), init_adam(sh.param_count()));
  WorkerConfig wc;
  wc.board_size = 6;
  wc.kind = WorkerKind::ModelFree;
  wc.seed = 9;
  std::atomic<bool> stop{false};
  int episodes = 0;
  worker_loop(store, wc,
              [&](const EpisodeSummary& e) {
                CHECK(e.last_loss.planner_imitation == 0.0);
                CHECK(e.worker_kind == WorkerKind::ModelFree);
                if (++episodes >= 3) stop.store(true);
              },
              stop);
  CHECK(episodes >= 3);
  CHECK(store.version() > 0);
}

TEST_CASE("demonstrator worker reports planner-imitation loss components") {
  NetShape sh;
  sh.board = 6;
  GlobalStore store(init_network(5, sh), init_adam(sh.param_count()));
  WorkerConfig wc;
  wc.board_size = 6;
  wc.kind = WorkerKind::Demonstrator;
  wc.seed = 10;
  wc.search.rollout_budget = 8;  // keep the test quick
  std::atomic<bool> stop{false};
  int episodes = 0;
  worker_loop(store, wc,
              [&](const EpisodeSummary& e) {
                CHECK(e.worker_kind == WorkerKind::Demonstrator);
                CHECK(e.last_loss.planner_imitation > 0.0);
                if (++episodes >= 1) stop.store(true);
              },
              stop);
  CHECK(episodes >= 1);
}

TEST_CASE("single-worker seeded run is deterministic end to end") {
  auto run_once = [](int episodes) {
    NetShape sh;
    sh.board = 6;
    GlobalStore store(init_network(6, sh), init_adam(sh.param_count()));
    WorkerConfig wc;
    wc.board_size = 6;
    wc.seed = 77;
    std::atomic<bool> stop{false};
    int done = 0;
    worker_loop(store, wc,
                [&](const EpisodeSummary&) {
                  if (++done >= episodes) stop.store(true);
                },
                stop);
    return store.snapshot().params;
  };
  const auto a = run_once(5);
  const auto b = run_once(5);
  CHECK(a == b);
}

TEST_CASE("staleness stress: randomized interleavings never lose updates") {
  NetShape sh;
  sh.board = 6;
  GlobalStore store(init_network(7, sh), init_adam(sh.param_count()));
  constexpr int kThreads = 8;
  constexpr int kPerThread = 125;
  std::vector<std::thread> threads;
  for (int t = 0; t < kThreads; ++t) {
    threads.emplace_back([&store, t, count = sh.param_count()] {
      Rng rng(static_cast<uint64_t>(1000 + t));
      for (int i = 0; i < kPerThread; ++i) {
        Network snap = store.snapshot();  // stale by the time we submit
        std::vector<double> g(count, 0.0);
        for (int k = 0; k < 10; ++k) g[rng.uniform_int(count)] = rng.uniform_real() - 0.5;
        if (rng.uniform_int(4) == 0) std::this_thread::yield();
        store.apply(g);
      }
    });
  }
  for (auto& t : threads) t.join();
  CHECK(store.version() == kThreads * kPerThread);
}
