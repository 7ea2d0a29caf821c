#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "mpom/net.hpp"

using namespace mpom;

namespace {

// Independent straight-line reimplementation of the forward pass, kept
// deliberately naive; the production path is checked against it.
NetOutput naive_forward(const Network& net, const FeatureTensor& input) {
  const NetShape& sh = net.shape;
  const int n = sh.board;
  std::vector<double> x = input.data;
  for (int l = 0; l < sh.conv_layers; ++l) {
    const int ic = sh.conv_in(l);
    const double* w = net.params.data() + sh.conv_offset(l);
    const double* b = w + sh.conv_weights(l);
    std::vector<double> y(static_cast<size_t>(sh.filters) * n * n, 0.0);
    for (int o = 0; o < sh.filters; ++o)
      for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) {
          double acc = b[o];
          for (int ch = 0; ch < ic; ++ch)
            for (int kr = 0; kr < 3; ++kr)
              for (int kc = 0; kc < 3; ++kc) {
                const int sr = r + kr - 1, sc = c + kc - 1;
                if (sr < 0 || sr >= n || sc < 0 || sc >= n) continue;
                acc += w[((static_cast<size_t>(o) * ic + ch) * 3 + kr) * 3 + kc] *
                       x[(static_cast<size_t>(ch) * n + sr) * n + sc];
              }
          y[(static_cast<size_t>(o) * n + r) * n + c] = std::max(acc, 0.0);
        }
    x = std::move(y);
  }
  const double* wd = net.params.data() + sh.dense_offset();
  const double* bd = wd + static_cast<size_t>(sh.dense) * sh.flat_conv();
  std::vector<double> h(sh.dense);
  for (int o = 0; o < sh.dense; ++o) {
    double acc = bd[o];
    for (int i = 0; i < sh.flat_conv(); ++i)
      acc += wd[static_cast<size_t>(o) * sh.flat_conv() + i] * x[i];
    h[o] = std::max(acc, 0.0);
  }
  const double* wp = net.params.data() + sh.policy_offset();
  const double* bp = wp + static_cast<size_t>(sh.actions) * sh.dense;
  std::array<double, kNumActions> logits{};
  for (int a = 0; a < sh.actions; ++a) {
    logits[a] = bp[a];
    for (int i = 0; i < sh.dense; ++i)
      logits[a] += wp[static_cast<size_t>(a) * sh.dense + i] * h[i];
  }
  double mx = logits[0];
  for (double v : logits) mx = std::max(mx, v);
  NetOutput out;
  double sum = 0;
  for (int a = 0; a < sh.actions; ++a) {
    out.policy[a] = std::exp(logits[a] - mx);
    sum += out.policy[a];
  }
  for (int a = 0; a < sh.actions; ++a) out.policy[a] /= sum;
  const double* wv = net.params.data() + sh.value_offset();
  out.value = wv[sh.dense];
  for (int i = 0; i < sh.dense; ++i) out.value += wv[i] * h[i];
  return out;
}

FeatureTensor random_input(const NetShape& sh, uint64_t seed) {
  FeatureTensor t;
  t.size = sh.board;
  t.data.resize(static_cast<size_t>(sh.channels) * sh.board * sh.board);
  Rng rng(seed);
  for (double& v : t.data) v = rng.uniform_real();
  return t;
}

Trajectory random_trajectory(const NetShape& sh, uint64_t seed, int n, bool planner) {
  Trajectory traj;
  traj.demonstrator = planner;
  Rng rng(seed);
  for (int i = 0; i < n; ++i) {
    TrajStep ts;
    ts.obs = random_input(sh, rng.next_u64());
    ts.action = rng.uniform_int(kNumActions);
    ts.planner_action = planner ? rng.uniform_int(kNumActions) : -1;
    ts.reward = rng.uniform_real() * 2 - 1;
    ts.value = rng.uniform_real() * 0.5;
    traj.steps.push_back(std::move(ts));
  }
  traj.bootstrap_value = rng.uniform_real();
  return traj;
}

}  // namespace

TEST_CASE("parameter count follows the shape table") {
  NetShape sh;  // 28 channels, 8x8 board
  const int conv = 28 * 32 * 9 + 32 + 3 * (32 * 32 * 9 + 32);
  const int dense = 32 * 8 * 8 * 128 + 128;
  const int heads = 128 * 6 + 6 + 128 + 1;
  CHECK(sh.param_count() == conv + dense + heads);
  CHECK(init_network(1, sh).params.size() == static_cast<size_t>(sh.param_count()));
}

TEST_CASE("init is deterministic with zero biases") {
  NetShape sh;
  sh.board = 6;
  const Network a = init_network(42, sh);
  const Network b = init_network(42, sh);
  CHECK(a.params == b.params);
  const Network c = init_network(43, sh);
  CHECK(a.params != c.params);
  // conv biases sit right after the first weight block
  for (int i = 0; i < sh.filters; ++i) CHECK(a.params[sh.conv_weights(0) + i] == 0.0);
}

TEST_CASE("init weight variance matches the fan-in/fan-out scheme") {
  NetShape sh;
  sh.board = 6;
  const Network net = init_network(5, sh);
  // dense layer has by far the most weights
  const int count = sh.dense * sh.flat_conv();
  const double* w = net.params.data() + sh.dense_offset();
  double mean = 0;
  for (int i = 0; i < count; ++i) mean += w[i];
  mean /= count;
  double var = 0;
  for (int i = 0; i < count; ++i) var += (w[i] - mean) * (w[i] - mean);
  var /= count;
  const double expected = 2.0 / (sh.flat_conv() + sh.dense);
  CHECK(var == doctest::Approx(expected).epsilon(0.2));
}

TEST_CASE("zero weights give a uniform policy and zero value") {
  NetShape sh;
  sh.board = 6;
  Network net{sh, std::vector<double>(sh.param_count(), 0.0)};
  FeatureTensor input;
  input.size = 6;
  input.data.assign(static_cast<size_t>(sh.channels) * 36, 0.0);
  const NetOutput out = forward(net, input);
  for (double p : out.policy) CHECK(p == doctest::Approx(1.0 / 6).epsilon(1e-12));
  CHECK(out.value == 0.0);
}

TEST_CASE("policy always sums to 1") {
  NetShape sh;
  sh.board = 6;
  const Network net = init_network(7, sh);
  for (uint64_t s = 0; s < 10; ++s) {
    const NetOutput out = forward(net, random_input(sh, s));
    double sum = 0;
    for (double p : out.policy) {
      CHECK(p >= 0.0);
      sum += p;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("forward matches an independent naive reimplementation") {
  for (int board : {6, 8}) {
    NetShape sh;
    sh.board = board;
    const Network net = init_network(11, sh);
    const FeatureTensor input = random_input(sh, 99);
    const NetOutput fast = forward(net, input);
    const NetOutput slow = naive_forward(net, input);
    for (int a = 0; a < kNumActions; ++a)
      CHECK(fast.policy[a] == doctest::Approx(slow.policy[a]).epsilon(1e-5));
    CHECK(fast.value == doctest::Approx(slow.value).epsilon(1e-5));
  }
}

TEST_CASE("forward is pure and rejects non-finite input") {
  NetShape sh;
  sh.board = 6;
  const Network net = init_network(3, sh);
  FeatureTensor input = random_input(sh, 1);
  const NetOutput a = forward(net, input);
  const NetOutput b = forward(net, input);
  CHECK(a.policy == b.policy);
  CHECK(a.value == b.value);
  input.data[0] = std::nan("");
  CHECK_THROWS(forward(net, input));
}

TEST_CASE("finite-difference gradient check for both loss compositions") {
  NetShape sh;
  sh.board = 6;
  for (uint64_t seed : {1u, 2u, 3u}) {
    const Network net = init_network(seed, sh);
    for (const LossKind kind : {LossKind::A3C, LossKind::PiA3C}) {
      const Trajectory traj = random_trajectory(sh, seed * 31 + 7, 4, true);
      LossSpec spec;
      spec.clip_norm = 0;  // compare unclipped gradients
      const auto [loss, grads] = loss_and_grad(net, traj, spec, kind);

      // stratified sample: conv, dense, policy, value layers all covered
      Rng rng(seed + 100);
      std::vector<int> coords;
      for (int i = 0; i < 6; ++i) {
        coords.push_back(rng.uniform_int(sh.conv_weights(0)));
        coords.push_back(sh.conv_offset(3) + rng.uniform_int(sh.conv_weights(3)));
        coords.push_back(sh.dense_offset() + rng.uniform_int(sh.dense * sh.flat_conv()));
        coords.push_back(sh.policy_offset() + rng.uniform_int(sh.actions * sh.dense));
        coords.push_back(sh.value_offset() + rng.uniform_int(sh.dense + 1));
      }
      for (int idx : coords) {
        const double eps = 1e-4;
        Network pert = net;
        pert.params[idx] = net.params[idx] + eps;
        const double up = loss_and_grad(pert, traj, spec, kind).first.total;
        pert.params[idx] = net.params[idx] - eps;
        const double dn = loss_and_grad(pert, traj, spec, kind).first.total;
        const double fd = (up - dn) / (2 * eps);
        const double rel =
            std::abs(fd - grads[idx]) / std::max({std::abs(fd), std::abs(grads[idx]), 1e-6});
        CAPTURE(idx);
        CHECK(rel < 1e-3);
      }
    }
  }
}

TEST_CASE("degenerate loss: zero advantages and matched targets leave only entropy") {
  NetShape sh;
  sh.board = 6;
  Network net{sh, std::vector<double>(sh.param_count(), 0.0)};  // uniform policy, V = 0
  Trajectory traj;
  TrajStep ts;
  ts.obs.size = 6;
  ts.obs.data.assign(static_cast<size_t>(sh.channels) * 36, 0.0);
  ts.action = 2;
  ts.reward = 0.0;
  ts.value = 0.0;  // advantage = 0, return = 0 = V
  traj.steps.push_back(ts);
  traj.bootstrap_value = 0.0;
  LossSpec spec;
  const auto [loss, grads] = loss_and_grad(net, traj, spec, LossKind::A3C);
  CHECK(loss.policy == doctest::Approx(0.0));
  CHECK(loss.value == doctest::Approx(0.0));
  CHECK(loss.entropy == doctest::Approx(std::log(6.0)).epsilon(1e-9));
  CHECK(loss.total == doctest::Approx(-spec.lambda_h * std::log(6.0)).epsilon(1e-9));
}

TEST_CASE("gradient clipping caps the global norm") {
  NetShape sh;
  sh.board = 6;
  const Network net = init_network(17, sh);
  Trajectory traj = random_trajectory(sh, 4, 3, false);
  for (auto& st : traj.steps) st.reward = 100.0;  // huge advantages
  LossSpec spec;
  spec.clip_norm = 1.0;
  const auto [loss, grads] = loss_and_grad(net, traj, spec, LossKind::A3C);
  double sq = 0;
  for (double g : grads) sq += g * g;
  CHECK(std::sqrt(sq) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(loss.grad_norm > 1.0);  // reported pre-clip norm
}

TEST_CASE("adam zero gradient with zero decay is a fixed point") {
  AdamState opt = init_adam(3);
  opt.weight_decay = 0;
  std::vector<double> params{0.5, -0.25, 1.0};
  const std::vector<double> before = params;
  adam_step(opt, params, {0, 0, 0});
  CHECK(params == before);
  CHECK(opt.step == 1);
}

TEST_CASE("adam single-step hand value") {
  // w=0, g=1, step 1: m_hat = 1, v_hat = 1, so w' = -lr / (1 + eps)
  AdamState opt = init_adam(1);
  opt.weight_decay = 0;
  std::vector<double> params{0.0};
  adam_step(opt, params, {1.0});
  CHECK(params[0] == doctest::Approx(-1e-4 / (1.0 + 1e-5)).epsilon(1e-12));
}

TEST_CASE("weight decay alone shrinks parameters") {
  AdamState opt = init_adam(1);
  std::vector<double> params{1.0};
  adam_step(opt, params, {0.0});
  // effective gradient is wd * w = 1e-5 > 0, so the parameter decreases
  CHECK(params[0] < 1.0);
}

TEST_CASE("adam rejects shape mismatches") {
  AdamState opt = init_adam(2);
  std::vector<double> params{0.0, 0.0};
  CHECK_THROWS(adam_step(opt, params, {1.0}));
}

TEST_CASE("checkpoint round-trip is byte-identical") {
  namespace fs = std::filesystem;
  NetShape sh;
  sh.board = 6;
  Network net = init_network(23, sh);
  const fs::path dir = fs::temp_directory_path() / "mpom_ckpt_test";
  fs::create_directories(dir);
  const std::string p1 = (dir / "a.bin").string();
  const std::string p2 = (dir / "b.bin").string();
  save_checkpoint(p1, net);
  const Network back = load_checkpoint(p1);
  CHECK(back.shape == net.shape);
  save_checkpoint(p2, back);

  std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
  const std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  const std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
  CHECK(b1 == b2);
  fs::remove_all(dir);
}

TEST_CASE("checkpoint loader rejects corrupt headers") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "mpom_ckpt_bad";
  fs::create_directories(dir);
  const std::string p = (dir / "bad.bin").string();
  std::ofstream(p, std::ios::binary) << "not a checkpoint";
  CHECK_THROWS(load_checkpoint(p));
  fs::remove_all(dir);
}
