#include "mpom/net.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace mpom {

namespace {

constexpr char kMagic[8] = {'M', 'P', 'O', 'M', 'N', 'E', 'T', '1'};
constexpr uint32_t kFormatVersion = 1;
constexpr double kLogClamp = 1e-10;

void relu(std::vector<double>& x) {
  for (double& v : x)
    if (v < 0) v = 0;
}

std::array<double, kNumActions> softmax(const double* logits, int n) {
  std::array<double, kNumActions> p{};
  double mx = logits[0];
  for (int i = 1; i < n; ++i) mx = std::max(mx, logits[i]);
  double sum = 0;
  for (int i = 0; i < n; ++i) {
    p[i] = std::exp(logits[i] - mx);
    sum += p[i];
  }
  for (int i = 0; i < n; ++i) p[i] /= sum;
  return p;
}

// y[oc][r][c] += conv(x), 3x3, stride 1, pad 1
void conv3x3(const double* w, const double* b, const std::vector<double>& x, int ic, int n,
             int oc, std::vector<double>& y) {
  y.assign(static_cast<size_t>(oc) * n * n, 0.0);
  for (int o = 0; o < oc; ++o) {
    double* yo = y.data() + static_cast<size_t>(o) * n * n;
    for (int i = 0; i < n * n; ++i) yo[i] = b[o];
    for (int ch = 0; ch < ic; ++ch) {
      const double* xc = x.data() + static_cast<size_t>(ch) * n * n;
      const double* wk = w + (static_cast<size_t>(o) * ic + ch) * 9;
      for (int r = 0; r < n; ++r) {
        for (int kr = 0; kr < 3; ++kr) {
          const int sr = r + kr - 1;
          if (sr < 0 || sr >= n) continue;
          const double* xrow = xc + sr * n;
          double* yrow = yo + r * n;
          for (int kc = 0; kc < 3; ++kc) {
            const double wv = wk[kr * 3 + kc];
            if (wv == 0.0) continue;
            const int lo = std::max(0, 1 - kc);
            const int hi = std::min(n, n + 1 - kc);
            for (int c = lo; c < hi; ++c) yrow[c] += wv * xrow[c + kc - 1];
          }
        }
      }
    }
  }
}

// Gradients of a 3x3 conv: dy is the gradient at the (pre-ReLU) output.
void conv3x3_backward(const double* w, const std::vector<double>& x,
                      const std::vector<double>& dy, int ic, int n, int oc, double* gw,
                      double* gb, std::vector<double>* dx) {
  if (dx) dx->assign(static_cast<size_t>(ic) * n * n, 0.0);
  for (int o = 0; o < oc; ++o) {
    const double* dyo = dy.data() + static_cast<size_t>(o) * n * n;
    for (int i = 0; i < n * n; ++i) gb[o] += dyo[i];
    for (int ch = 0; ch < ic; ++ch) {
      const double* xc = x.data() + static_cast<size_t>(ch) * n * n;
      double* gwk = gw + (static_cast<size_t>(o) * ic + ch) * 9;
      const double* wk = w + (static_cast<size_t>(o) * ic + ch) * 9;
      double* dxc = dx ? dx->data() + static_cast<size_t>(ch) * n * n : nullptr;
      for (int r = 0; r < n; ++r) {
        for (int kr = 0; kr < 3; ++kr) {
          const int sr = r + kr - 1;
          if (sr < 0 || sr >= n) continue;
          const double* xrow = xc + sr * n;
          const double* dyrow = dyo + r * n;
          double* dxrow = dxc ? dxc + sr * n : nullptr;
          for (int kc = 0; kc < 3; ++kc) {
            const int lo = std::max(0, 1 - kc);
            const int hi = std::min(n, n + 1 - kc);
            double acc = 0;
            for (int c = lo; c < hi; ++c) acc += dyrow[c] * xrow[c + kc - 1];
            gwk[kr * 3 + kc] += acc;
            if (dxrow) {
              const double wv = wk[kr * 3 + kc];
              for (int c = lo; c < hi; ++c) dxrow[c + kc - 1] += wv * dyrow[c];
            }
          }
        }
      }
    }
  }
}

uint64_t fnv1a(const void* data, size_t len, uint64_t h = 0xcbf29ce484222325ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

int NetShape::param_count() const { return value_offset() + dense + 1; }

int NetShape::conv_offset(int layer) const {
  int off = 0;
  for (int l = 0; l < layer; ++l) off += conv_weights(l) + filters;
  return off;
}

int NetShape::dense_offset() const { return conv_offset(conv_layers); }

int NetShape::policy_offset() const { return dense_offset() + dense * flat_conv() + dense; }

int NetShape::value_offset() const { return policy_offset() + actions * dense + actions; }

uint64_t NetShape::hash() const {
  const int fields[6] = {channels, board, filters, conv_layers, dense, actions};
  return fnv1a(fields, sizeof(fields));
}

Network init_network(uint64_t seed, const NetShape& shape) {
  Network net{shape, std::vector<double>(shape.param_count(), 0.0)};
  Rng rng(seed);
  auto fill_uniform = [&](int offset, int count, int fan_in, int fan_out) {
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    for (int i = 0; i < count; ++i)
      net.params[offset + i] = (rng.uniform_real() * 2.0 - 1.0) * limit;
  };
  for (int l = 0; l < shape.conv_layers; ++l)
    fill_uniform(shape.conv_offset(l), shape.conv_weights(l), shape.conv_in(l) * 9,
                 shape.filters * 9);
  fill_uniform(shape.dense_offset(), shape.dense * shape.flat_conv(), shape.flat_conv(),
               shape.dense);
  fill_uniform(shape.policy_offset(), shape.actions * shape.dense, shape.dense, shape.actions);
  fill_uniform(shape.value_offset(), shape.dense, shape.dense, 1);
  return net;
}

NetOutput forward(const Network& net, const FeatureTensor& input, ForwardCache* cache) {
  const NetShape& sh = net.shape;
  if (input.size != sh.board ||
      input.data.size() != static_cast<size_t>(sh.channels) * sh.board * sh.board)
    throw std::invalid_argument("forward: input shape mismatch");
  for (double v : input.data)
    if (!std::isfinite(v)) throw std::invalid_argument("forward: non-finite input");

  const int n = sh.board;
  ForwardCache local;
  ForwardCache& cc = cache ? *cache : local;
  cc.conv_act.assign(sh.conv_layers + 1, {});
  cc.conv_act[0] = input.data;

  for (int l = 0; l < sh.conv_layers; ++l) {
    const double* w = net.params.data() + sh.conv_offset(l);
    const double* b = w + sh.conv_weights(l);
    conv3x3(w, b, cc.conv_act[l], sh.conv_in(l), n, sh.filters, cc.conv_act[l + 1]);
    relu(cc.conv_act[l + 1]);
  }

  const std::vector<double>& flat = cc.conv_act[sh.conv_layers];
  const double* wd = net.params.data() + sh.dense_offset();
  const double* bd = wd + static_cast<size_t>(sh.dense) * sh.flat_conv();
  cc.dense_act.assign(sh.dense, 0.0);
  for (int o = 0; o < sh.dense; ++o) {
    const double* row = wd + static_cast<size_t>(o) * sh.flat_conv();
    double acc = bd[o];
    for (int i = 0; i < sh.flat_conv(); ++i) acc += row[i] * flat[i];
    cc.dense_act[o] = acc;
  }
  relu(cc.dense_act);

  const double* wp = net.params.data() + sh.policy_offset();
  const double* bp = wp + static_cast<size_t>(sh.actions) * sh.dense;
  double logits[kNumActions];
  for (int a = 0; a < sh.actions; ++a) {
    double acc = bp[a];
    const double* row = wp + static_cast<size_t>(a) * sh.dense;
    for (int i = 0; i < sh.dense; ++i) acc += row[i] * cc.dense_act[i];
    logits[a] = acc;
  }
  cc.probs = softmax(logits, sh.actions);

  const double* wv = net.params.data() + sh.value_offset();
  double value = wv[sh.dense];
  for (int i = 0; i < sh.dense; ++i) value += wv[i] * cc.dense_act[i];
  cc.value = value;

  return {cc.probs, cc.value};
}

void backward(const Network& net, const ForwardCache& cache,
              const std::array<double, kNumActions>& dlogits, double dvalue,
              std::vector<double>& grads) {
  const NetShape& sh = net.shape;
  const int n = sh.board;

  std::vector<double> dh(sh.dense, 0.0);
  {
    const double* wp = net.params.data() + sh.policy_offset();
    double* gwp = grads.data() + sh.policy_offset();
    double* gbp = gwp + static_cast<size_t>(sh.actions) * sh.dense;
    for (int a = 0; a < sh.actions; ++a) {
      const double d = dlogits[a];
      gbp[a] += d;
      const double* row = wp + static_cast<size_t>(a) * sh.dense;
      double* grow = gwp + static_cast<size_t>(a) * sh.dense;
      for (int i = 0; i < sh.dense; ++i) {
        grow[i] += d * cache.dense_act[i];
        dh[i] += d * row[i];
      }
    }
    const double* wv = net.params.data() + sh.value_offset();
    double* gwv = grads.data() + sh.value_offset();
    for (int i = 0; i < sh.dense; ++i) {
      gwv[i] += dvalue * cache.dense_act[i];
      dh[i] += dvalue * wv[i];
    }
    gwv[sh.dense] += dvalue;
  }

  for (int i = 0; i < sh.dense; ++i)
    if (cache.dense_act[i] <= 0) dh[i] = 0;

  std::vector<double> dflat(sh.flat_conv(), 0.0);
  {
    const double* wd = net.params.data() + sh.dense_offset();
    double* gwd = grads.data() + sh.dense_offset();
    double* gbd = gwd + static_cast<size_t>(sh.dense) * sh.flat_conv();
    const std::vector<double>& flat = cache.conv_act[sh.conv_layers];
    for (int o = 0; o < sh.dense; ++o) {
      const double d = dh[o];
      gbd[o] += d;
      if (d == 0.0) continue;
      const double* row = wd + static_cast<size_t>(o) * sh.flat_conv();
      double* grow = gwd + static_cast<size_t>(o) * sh.flat_conv();
      for (int i = 0; i < sh.flat_conv(); ++i) {
        grow[i] += d * flat[i];
        dflat[i] += d * row[i];
      }
    }
  }

  std::vector<double> dy = std::move(dflat);
  for (int l = sh.conv_layers - 1; l >= 0; --l) {
    const std::vector<double>& act = cache.conv_act[l + 1];
    for (size_t i = 0; i < dy.size(); ++i)
      if (act[i] <= 0) dy[i] = 0;
    const double* w = net.params.data() + sh.conv_offset(l);
    double* gw = grads.data() + sh.conv_offset(l);
    double* gb = gw + sh.conv_weights(l);
    std::vector<double> dx;
    conv3x3_backward(w, cache.conv_act[l], dy, sh.conv_in(l), n, sh.filters, gw, gb,
                     l > 0 ? &dx : nullptr);
    dy = std::move(dx);
  }
}

std::pair<LossComponents, std::vector<double>> loss_and_grad(const Network& net,
                                                             const Trajectory& traj,
                                                             const LossSpec& spec,
                                                             LossKind kind) {
  if (traj.steps.empty()) throw std::invalid_argument("loss_and_grad: empty trajectory");
  if (kind == LossKind::PiA3C) {
    for (const auto& st : traj.steps)
      if (st.planner_action < 0)
        throw std::invalid_argument("loss_and_grad: missing planner action");
  }

  const size_t n = traj.steps.size();
  const double inv_n = 1.0 / static_cast<double>(n);

  // n-step returns and advantages from stored rewards / snapshot values;
  // both are constants w.r.t. the parameters being differentiated.
  std::vector<double> returns(n);
  double running = traj.bootstrap_value;
  for (size_t i = n; i-- > 0;) {
    running = traj.steps[i].reward + spec.gamma * running;
    returns[i] = running;
  }

  LossComponents out;
  std::vector<double> grads(net.params.size(), 0.0);

  for (size_t i = 0; i < n; ++i) {
    const TrajStep& st = traj.steps[i];
    ForwardCache cache;
    const NetOutput y = forward(net, st.obs, &cache);
    const double adv = returns[i] - st.value;

    double entropy = 0;
    for (int a = 0; a < kNumActions; ++a)
      if (y.policy[a] > 0) entropy -= y.policy[a] * std::log(y.policy[a]);

    const double logp = std::log(std::max(y.policy[st.action], kLogClamp));
    out.policy += -logp * adv * inv_n;
    const double verr = returns[i] - y.value;
    out.value += verr * verr * inv_n;
    out.entropy += entropy * inv_n;

    std::array<double, kNumActions> dlogits{};
    for (int a = 0; a < kNumActions; ++a) {
      // policy-gradient term: -adv/N * (e_a - pi)
      dlogits[a] += -spec.lambda_pi * adv * inv_n *
                    ((a == st.action ? 1.0 : 0.0) - y.policy[a]);
      // entropy bonus: d(-H)/dz_j = pi_j (log pi_j + H)
      dlogits[a] += spec.lambda_h * inv_n * y.policy[a] *
                    (std::log(std::max(y.policy[a], kLogClamp)) + entropy);
    }
    if (kind == LossKind::PiA3C) {
      const double p = y.policy[st.planner_action];
      if (p < kLogClamp) ++out.clamped_logs;
      out.planner_imitation += -std::log(std::max(p, kLogClamp)) * inv_n;
      if (p >= kLogClamp) {
        for (int a = 0; a < kNumActions; ++a)
          dlogits[a] += spec.lambda_planner * inv_n *
                        (y.policy[a] - (a == st.planner_action ? 1.0 : 0.0));
      }
    }
    const double dvalue = spec.lambda_v * 2.0 * (y.value - returns[i]) * inv_n;

    backward(net, cache, dlogits, dvalue, grads);
  }

  out.total = spec.lambda_v * out.value + spec.lambda_pi * out.policy -
              spec.lambda_h * out.entropy;
  if (kind == LossKind::PiA3C) out.total += spec.lambda_planner * out.planner_imitation;

  const double checks[5] = {out.total, out.policy, out.value, out.entropy,
                            out.planner_imitation};
  const char* names[5] = {"total", "policy", "value", "entropy", "planner_imitation"};
  for (int i = 0; i < 5; ++i)
    if (!std::isfinite(checks[i]))
      throw std::runtime_error(std::string("loss_and_grad: non-finite loss component: ") +
                               names[i]);

  double sq = 0;
  for (double g : grads) sq += g * g;
  out.grad_norm = std::sqrt(sq);
  if (!std::isfinite(out.grad_norm))
    throw std::runtime_error("loss_and_grad: non-finite gradient");
  if (out.grad_norm > spec.clip_norm && spec.clip_norm > 0) {
    const double scale = spec.clip_norm / out.grad_norm;
    for (double& g : grads) g *= scale;
  }
  return {out, std::move(grads)};
}

AdamState init_adam(int param_count) {
  AdamState s;
  s.m.assign(param_count, 0.0);
  s.v.assign(param_count, 0.0);
  return s;
}

void adam_step(AdamState& opt, std::vector<double>& params, const std::vector<double>& grads) {
  if (params.size() != grads.size() || params.size() != opt.m.size())
    throw std::invalid_argument("adam_step: shape mismatch");
  ++opt.step;
  const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(opt.step));
  const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(opt.step));
  for (size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i] + opt.weight_decay * params[i];
    opt.m[i] = opt.beta1 * opt.m[i] + (1.0 - opt.beta1) * g;
    opt.v[i] = opt.beta2 * opt.v[i] + (1.0 - opt.beta2) * g * g;
    const double mhat = opt.m[i] / bc1;
    const double vhat = opt.v[i] / bc2;
    params[i] -= opt.lr * mhat / (std::sqrt(vhat) + opt.eps);
  }
}

void save_checkpoint(const std::string& path, const Network& net) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("save_checkpoint: cannot open " + path);
  os.write(kMagic, sizeof(kMagic));
  auto put_u32 = [&](uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<char*>(b), 4);
  };
  auto put_u64 = [&](uint64_t v) {
    put_u32(static_cast<uint32_t>(v));
    put_u32(static_cast<uint32_t>(v >> 32));
  };
  put_u32(kFormatVersion);
  const NetShape& sh = net.shape;
  for (int f : {sh.channels, sh.board, sh.filters, sh.conv_layers, sh.dense, sh.actions})
    put_u32(static_cast<uint32_t>(f));
  put_u64(sh.hash());
  put_u64(static_cast<uint64_t>(net.params.size()));
  for (double d : net.params) {
    const float f = static_cast<float>(d);
    uint32_t bits;
    std::memcpy(&bits, &f, 4);
    put_u32(bits);
  }
  if (!os) throw std::runtime_error("save_checkpoint: write failed: " + path);
}

Network load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_checkpoint: cannot open " + path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kMagic, 8) != 0)
    throw std::runtime_error("load_checkpoint: bad magic");
  auto get_u32 = [&]() {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
  };
  auto get_u64 = [&]() {
    const uint64_t lo = get_u32();
    return lo | (static_cast<uint64_t>(get_u32()) << 32);
  };
  if (get_u32() != kFormatVersion) throw std::runtime_error("load_checkpoint: bad version");
  NetShape sh;
  sh.channels = static_cast<int>(get_u32());
  sh.board = static_cast<int>(get_u32());
  sh.filters = static_cast<int>(get_u32());
  sh.conv_layers = static_cast<int>(get_u32());
  sh.dense = static_cast<int>(get_u32());
  sh.actions = static_cast<int>(get_u32());
  if (get_u64() != sh.hash()) throw std::runtime_error("load_checkpoint: shape hash mismatch");
  const uint64_t count = get_u64();
  if (count != static_cast<uint64_t>(sh.param_count()))
    throw std::runtime_error("load_checkpoint: parameter count mismatch");
  Network net{sh, std::vector<double>(count)};
  for (uint64_t i = 0; i < count; ++i) {
    const uint32_t bits = get_u32();
    float f;
    std::memcpy(&f, &bits, 4);
    net.params[i] = static_cast<double>(f);
  }
  if (!is) throw std::runtime_error("load_checkpoint: truncated file");
  return net;
}

}  // namespace mpom
