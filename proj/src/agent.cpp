#include "namo/agent.hpp"

#include <cmath>

namespace namo {

void validate_train_config(const TrainConfig& cfg) {
  if (cfg.gamma <= 0.0 || cfg.gamma > 1.0) throw ContractViolation("gamma must lie in (0, 1]");
  if (cfg.clip_epsilon <= 0.0) throw ContractViolation("clip_epsilon must be > 0");
  if (cfg.entropy_coef < 0.0 || cfg.value_coef < 0.0 || cfg.weight_decay < 0.0 ||
      cfg.grad_clip_norm < 0.0) {
    throw ContractViolation("loss coefficients must be >= 0");
  }
  if (cfg.learning_rate <= 0.0) throw ContractViolation("learning_rate must be > 0");
  if (cfg.horizon < 1 || cfg.minibatch < 1 || cfg.mini_epochs < 1 || cfg.envs < 1) {
    throw ContractViolation("horizon, minibatch, mini_epochs, envs must be >= 1");
  }
}

SampledAction sample_action(const float* mean, const float* log_sigma, Rng& rng,
                            const PhysicsParams& phys) {
  double mu[kActionDim], ls[kActionDim], raw[kActionDim];
  for (int d = 0; d < kActionDim; ++d) {
    mu[d] = mean[d];
    ls[d] = clamp(log_sigma[d], kLogSigmaMin, kLogSigmaMax);
    raw[d] = mu[d] + std::exp(ls[d]) * rng.normal();
  }
  SampledAction out;
  out.log_prob = gaussian_log_prob_scalar(mu, ls, raw, kActionDim);
  out.action.v_x = clamp(raw[0], phys.v_min, phys.v_max);
  out.action.theta_dot_z = clamp(raw[1], -phys.omega_max, phys.omega_max);
  return out;
}

double gaussian_log_prob_scalar(const double* mean, const double* log_sigma,
                                const double* action, int dims) {
  double acc = 0.0;
  for (int d = 0; d < dims; ++d) {
    double sigma = std::exp(log_sigma[d]);
    double z = (action[d] - mean[d]) / sigma;
    acc += -0.5 * z * z - log_sigma[d] - 0.5 * std::log(2.0 * kPi);
  }
  return acc;
}

void RolloutBuffer::resize(int envs_, int horizon_) {
  envs = envs_;
  horizon = horizon_;
  int n = envs * horizon;
  vec_obs.assign(static_cast<size_t>(n) * kVectorSize, 0.0f);
  grid_obs.assign(static_cast<size_t>(n) * SemanticGrid::kCells, 0.0f);
  actions.assign(static_cast<size_t>(n) * kActionDim, 0.0f);
  log_probs.assign(n, 0.0f);
  rewards.assign(n, 0.0f);
  dones.assign(n, 0);
  values.assign(n, 0.0f);
  bootstrap_values.assign(envs, 0.0f);
}

AdvantageEstimate compute_advantages(const RolloutBuffer& buffer, double gamma) {
  if (buffer.count() == 0) throw ContractViolation("compute_advantages: empty buffer");
  AdvantageEstimate est;
  est.advantages.assign(buffer.count(), 0.0);
  est.returns.assign(buffer.count(), 0.0);
  for (int e = 0; e < buffer.envs; ++e) {
    double ret = buffer.bootstrap_values[e];
    for (int t = buffer.horizon - 1; t >= 0; --t) {
      int i = buffer.slot(t, e);
      if (buffer.dones[i]) {
        ret = buffer.rewards[i];
      } else {
        ret = buffer.rewards[i] + gamma * ret;
      }
      est.returns[i] = ret;
      est.advantages[i] = ret - buffer.values[i];
    }
  }
  return est;
}

void normalize_advantages(std::vector<double>& advantages) {
  if (advantages.empty()) return;
  double mean = 0.0;
  for (double a : advantages) mean += a;
  mean /= advantages.size();
  double var = 0.0;
  for (double a : advantages) var += (a - mean) * (a - mean);
  var /= advantages.size();
  double inv_std = 1.0 / (std::sqrt(var) + 1e-8);
  for (double& a : advantages) a = (a - mean) * inv_std;
}

double adaptive_lr(double lr, double approx_kl, double kl_target,
                   double lr_min, double lr_max) {
  if (lr <= 0.0) throw ContractViolation("adaptive_lr: lr must be > 0");
  if (approx_kl > 2.0 * kl_target) {
    lr /= 1.5;
  } else if (approx_kl < 0.5 * kl_target) {
    lr *= 1.5;
  }
  return clamp(lr, lr_min, lr_max);
}

}  // namespace namo
