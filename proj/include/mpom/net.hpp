#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mpom/rng.hpp"
#include "mpom/trajectory.hpp"

namespace mpom {

// Conv actor-critic: 4 conv layers (32 filters, 3x3, stride 1, pad 1),
// dense 128, softmax policy head (6) and linear value head. All parameters
// live in one flat vector; layout is fixed by the shape table.
struct NetShape {
  int channels = kNumChannels;
  int board = 8;
  int filters = 32;
  int conv_layers = 4;
  int dense = 128;
  int actions = kNumActions;

  int conv_in(int layer) const { return layer == 0 ? channels : filters; }
  int conv_weights(int layer) const { return filters * conv_in(layer) * 9; }
  int flat_conv() const { return filters * board * board; }
  int param_count() const;
  int conv_offset(int layer) const;   // weights, biases follow immediately
  int dense_offset() const;
  int policy_offset() const;
  int value_offset() const;
  uint64_t hash() const;
  bool operator==(const NetShape&) const = default;
};

struct Network {
  NetShape shape;
  std::vector<double> params;
};

struct NetOutput {
  std::array<double, kNumActions> policy{};
  double value = 0.0;
};

// Post-activation tensors kept for the backward pass.
struct ForwardCache {
  std::vector<std::vector<double>> conv_act;  // conv_layers+1 entries; [0] = input
  std::vector<double> dense_act;              // post-ReLU
  std::array<double, kNumActions> probs{};
  double value = 0.0;
};

/// Deterministic scaled-uniform fan-in init; biases zero.
Network init_network(uint64_t seed, const NetShape& shape = {});

NetOutput forward(const Network& net, const FeatureTensor& input,
                  ForwardCache* cache = nullptr);

/// Accumulates parameter gradients given output-side gradients (w.r.t. the
/// policy logits and the value output).
void backward(const Network& net, const ForwardCache& cache,
              const std::array<double, kNumActions>& dlogits, double dvalue,
              std::vector<double>& grads);

/// Total loss (A3C or PI-A3C composition), per-component values, and the
/// exact analytic gradient, global-norm clipped at spec.clip_norm.
/// Advantages and value targets are computed from the trajectory's stored
/// rewards, snapshot values, and bootstrap; they are constants w.r.t. params.
std::pair<LossComponents, std::vector<double>> loss_and_grad(const Network& net,
                                                             const Trajectory& traj,
                                                             const LossSpec& spec,
                                                             LossKind kind);

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  int64_t step = 0;
  double lr = 1e-4;
  double eps = 1e-5;
  double weight_decay = 1e-5;  // coupled: L2 added to the gradient
  double beta1 = 0.9;
  double beta2 = 0.999;
};

AdamState init_adam(int param_count);
void adam_step(AdamState& opt, std::vector<double>& params, const std::vector<double>& grads);

// Checkpoint file: fixed-width header (magic, format version, shape table,
// shape hash, parameter count) followed by little-endian float32 params.
void save_checkpoint(const std::string& path, const Network& net);
Network load_checkpoint(const std::string& path);

}  // namespace mpom
