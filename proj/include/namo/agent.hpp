#pragma once

#include "namo/env.hpp"
#include "namo/nn.hpp"

namespace namo {

struct TrainConfig {
  double gamma = 0.99;
  double clip_epsilon = 0.2;
  double entropy_coef = 0.01;
  double value_coef = 0.5;
  double learning_rate = 3e-4;  // shared actor/critic rate via the shared trunk
  double kl_target = 0.008;
  int horizon = 50;
  int minibatch = 2000;
  int mini_epochs = 2;
  int envs = 64;
  int total_updates = 3000;
  double grad_clip_norm = 1.0;
  double weight_decay = 1e-4;
  bool curriculum = true;
  bool advantage_norm = true;
  int curriculum_window = 200;
  int checkpoint_every = 500;
  double lr_min = 1e-6;
  double lr_max = 1e-2;
};

void validate_train_config(const TrainConfig& cfg);

template <typename S>
struct PolicyForwardNodes {
  int mean = -1;       // [B, 2]
  int log_sigma = -1;  // [2], clamped
  int value = -1;      // [B, 1]
};

constexpr int kActionDim = 2;
constexpr double kLogSigmaMin = -5.0;
constexpr double kLogSigmaMax = 1.0;

// The multi-modal actor-critic network: a 242-vector stream and a 48x48 grid
// stream fused by a shared trunk with separate value and action heads plus a
// state-independent learnable log-sigma.
template <typename S>
class PolicyNetT {
 public:
  PolicyNetT()
      : vec_fc("vec_fc", kVectorSize, 128),
        vec_ln("vec_ln", 128),
        conv1("conv1", 1, 16, 8, 4),
        bn1("bn1", 16),
        conv2("conv2", 16, 32, 4, 2),
        bn2("bn2", 32),
        grid_fc("grid_fc", 512, 128),
        grid_ln("grid_ln", 128),
        trunk1("trunk1", 256, 128),
        trunk1_ln("trunk1_ln", 128),
        trunk2("trunk2", 128, 64),
        trunk2_ln("trunk2_ln", 64),
        value_head("value_head", 64, 1),
        action_head("action_head", 64, kActionDim) {
    log_sigma = {"log_sigma", TensorT<S>({kActionDim})};
  }

  void init(uint64_t seed) {
    Rng rng(seed, 0x17);
    vec_fc.init(rng);
    conv1.init(rng);
    conv2.init(rng);
    grid_fc.init(rng);
    trunk1.init(rng);
    trunk2.init(rng);
    value_head.init(rng, 0.01);
    action_head.init(rng, 0.01);
    for (S& v : log_sigma.value.data) v = S(0);
  }

  // vec: [B, 242], grid: [B, 48, 48, 1]
  PolicyForwardNodes<S> forward(TapeT<S>& t, Bindings<S>& bind, int vec_node,
                                int grid_node, bool training) {
    int v = op_relu(t, vec_fc.forward(t, bind, vec_node));
    v = vec_ln.forward(t, bind, v);

    int g = op_relu(t, conv1.forward(t, bind, grid_node));
    g = bn1.forward(t, bind, g, training);
    g = op_relu(t, conv2.forward(t, bind, g));
    g = bn2.forward(t, bind, g, training);
    int batch = t.value(grid_node).shape[0];
    g = op_reshape(t, g, {batch, 512});
    g = op_relu(t, grid_fc.forward(t, bind, g));
    g = grid_ln.forward(t, bind, g);

    int h = op_concat(t, v, g);
    h = op_relu(t, trunk1.forward(t, bind, h));
    h = trunk1_ln.forward(t, bind, h);
    h = op_relu(t, trunk2.forward(t, bind, h));
    h = trunk2_ln.forward(t, bind, h);

    PolicyForwardNodes<S> out;
    out.value = value_head.forward(t, bind, h);
    out.mean = action_head.forward(t, bind, h);
    out.log_sigma = op_clip(t, bind.bind(t, log_sigma), S(kLogSigmaMin), S(kLogSigmaMax));
    return out;
  }

  std::vector<Parameter<S>*> parameters() {
    std::vector<Parameter<S>*> out;
    vec_fc.collect(out);
    vec_ln.collect(out);
    conv1.collect(out);
    bn1.collect(out);
    conv2.collect(out);
    bn2.collect(out);
    grid_fc.collect(out);
    grid_ln.collect(out);
    trunk1.collect(out);
    trunk1_ln.collect(out);
    trunk2.collect(out);
    trunk2_ln.collect(out);
    value_head.collect(out);
    action_head.collect(out);
    out.push_back(&log_sigma);
    return out;
  }

  Linear<S> vec_fc;
  LayerNorm<S> vec_ln;
  Conv2d<S> conv1;
  BatchNorm<S> bn1;
  Conv2d<S> conv2;
  BatchNorm<S> bn2;
  Linear<S> grid_fc;
  LayerNorm<S> grid_ln;
  Linear<S> trunk1;
  LayerNorm<S> trunk1_ln;
  Linear<S> trunk2;
  LayerNorm<S> trunk2_ln;
  Linear<S> value_head;
  Linear<S> action_head;
  Parameter<S> log_sigma;
};

using PolicyNet = PolicyNetT<float>;

template <typename S>
struct LossBatch {
  TensorT<S> vec;            // [B, 242]
  TensorT<S> grid;           // [B, 48, 48, 1]
  TensorT<S> actions;        // [B, 2]
  TensorT<S> old_log_probs;  // [B]
  TensorT<S> advantages;     // [B]
  TensorT<S> returns;        // [B]
};

struct LossCoefficients {
  double clip_epsilon = 0.2;
  double entropy_coef = 0.01;
  double value_coef = 0.5;
};

template <typename S>
struct LossNodes {
  int loss = -1;        // scalar
  int pg_loss = -1;     // scalar, -L^CLIP
  int value_loss = -1;  // scalar
  int entropy = -1;     // scalar
  int log_prob = -1;    // [B]
  int ratio = -1;       // [B]
};

// loss = -L^CLIP - c_H * H + value_coef * MSE(V, R)
template <typename S>
LossNodes<S> build_clipped_loss(TapeT<S>& t, Bindings<S>& bind, PolicyNetT<S>& net,
                                const LossBatch<S>& batch, const LossCoefficients& coef,
                                bool training) {
  int vec_node = t.leaf(batch.vec, false);
  int grid_node = t.leaf(batch.grid, false);
  PolicyForwardNodes<S> fw = net.forward(t, bind, vec_node, grid_node, training);

  LossNodes<S> nodes;
  nodes.log_prob = op_gaussian_log_prob(t, fw.mean, fw.log_sigma, batch.actions);
  int old_lp = t.leaf(batch.old_log_probs, false);
  nodes.ratio = op_exp(t, op_sub(t, nodes.log_prob, old_lp));

  int adv = t.leaf(batch.advantages, false);
  int surr1 = op_mul(t, nodes.ratio, adv);
  int clipped = op_clip(t, nodes.ratio, S(1.0 - coef.clip_epsilon), S(1.0 + coef.clip_epsilon));
  int surr2 = op_mul(t, clipped, adv);
  nodes.pg_loss = op_scale(t, op_mean(t, op_min(t, surr1, surr2)), S(-1));

  nodes.entropy = op_gaussian_entropy(t, fw.log_sigma);

  int batch_size = batch.vec.shape[0];
  int value_flat = op_reshape(t, fw.value, {batch_size});
  int ret = t.leaf(batch.returns, false);
  nodes.value_loss = op_mean(t, op_square(t, op_sub(t, value_flat, ret)));

  int loss = op_add(t, nodes.pg_loss, op_scale(t, nodes.entropy, S(-coef.entropy_coef)));
  nodes.loss = op_add(t, loss, op_scale(t, nodes.value_loss, S(coef.value_coef)));
  return nodes;
}

// Diagonal Gaussian sample clamped to the action envelope; the log-prob is of
// the pre-clamp sample.
struct SampledAction {
  Action action;
  double log_prob = 0.0;
};
SampledAction sample_action(const float* mean, const float* log_sigma, Rng& rng,
                            const PhysicsParams& phys);
double gaussian_log_prob_scalar(const double* mean, const double* log_sigma,
                                const double* action, int dims);

// ---- rollout storage and advantages ----

struct RolloutBuffer {
  int envs = 0;
  int horizon = 0;
  std::vector<float> vec_obs;    // [T, E, 242]
  std::vector<float> grid_obs;   // [T, E, 2304]
  std::vector<float> actions;    // [T, E, 2]
  std::vector<float> log_probs;  // [T, E]
  std::vector<float> rewards;    // [T, E]
  std::vector<uint8_t> dones;    // [T, E]: episode ended on this transition
  std::vector<float> values;     // [T, E]
  std::vector<float> bootstrap_values;  // [E]: V(s_T) of the ongoing episode

  void resize(int envs_, int horizon_);
  int count() const { return envs * horizon; }
  int slot(int t, int e) const { return t * envs + e; }
};

struct AdvantageEstimate {
  std::vector<double> advantages;  // [T * E], slot-indexed like the buffer
  std::vector<double> returns;
};

// n-step advantage to the earlier of episode end or horizon end; no value
// bootstrap across terminations.
AdvantageEstimate compute_advantages(const RolloutBuffer& buffer, double gamma);

// In-place normalization to zero mean / unit std.
void normalize_advantages(std::vector<double>& advantages);

// KL-band learning-rate controller.
double adaptive_lr(double lr, double approx_kl, double kl_target,
                   double lr_min = 1e-6, double lr_max = 1e-2);

}  // namespace namo
