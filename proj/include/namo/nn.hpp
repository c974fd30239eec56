#pragma once

#include <map>
#include <string>

#include "namo/rng.hpp"
#include "namo/tensor.hpp"

namespace namo {

template <typename S>
struct Parameter {
  std::string name;
  TensorT<S> value;
};

template <typename S>
struct ParamBinding {
  Parameter<S>* param;
  int node;
};

template <typename S>
class Bindings {
 public:
  int bind(TapeT<S>& tape, Parameter<S>& p, bool needs_grad = true) {
    int node = tape.leaf(p.value, needs_grad);
    items.push_back({&p, node});
    return node;
  }
  std::vector<ParamBinding<S>> items;
};

// Fan-in scaled normal init; heads use scale 0.01.
template <typename S>
void init_fan_in(Parameter<S>& p, int fan_in, Rng& rng, double scale = 1.0) {
  double std_dev = scale * std::sqrt(2.0 / fan_in);
  for (S& v : p.value.data) v = static_cast<S>(std_dev * rng.normal());
}

template <typename S>
struct Linear {
  Parameter<S> w, b;
  int in = 0, out = 0;

  Linear() = default;
  Linear(const std::string& name, int in_, int out_) : in(in_), out(out_) {
    w = {name + ".w", TensorT<S>({out_, in_})};
    b = {name + ".b", TensorT<S>({out_})};
  }
  void init(Rng& rng, double scale = 1.0) { init_fan_in(w, in, rng, scale); }
  int forward(TapeT<S>& t, Bindings<S>& bind, int x) {
    return op_linear(t, x, bind.bind(t, w), bind.bind(t, b));
  }
  void collect(std::vector<Parameter<S>*>& out_params) {
    out_params.push_back(&w);
    out_params.push_back(&b);
  }
};

template <typename S>
struct Conv2d {
  Parameter<S> w, b;
  int in_channels = 0, filters = 0, kernel = 0, stride = 1;

  Conv2d() = default;
  Conv2d(const std::string& name, int in_c, int k_filters, int kernel_, int stride_)
      : in_channels(in_c), filters(k_filters), kernel(kernel_), stride(stride_) {
    w = {name + ".w", TensorT<S>({k_filters, kernel_, kernel_, in_c})};
    b = {name + ".b", TensorT<S>({k_filters})};
  }
  void init(Rng& rng, double scale = 1.0) {
    init_fan_in(w, kernel * kernel * in_channels, rng, scale);
  }
  int forward(TapeT<S>& t, Bindings<S>& bind, int x) {
    return op_conv2d(t, x, bind.bind(t, w), bind.bind(t, b), stride);
  }
  void collect(std::vector<Parameter<S>*>& out_params) {
    out_params.push_back(&w);
    out_params.push_back(&b);
  }
};

// Normalizes over every axis except the trailing channel axis. Training mode
// uses batch statistics and maintains running ones (momentum 0.9); inference
// uses the running statistics. Until the first training update the running
// stats are the identity (mean 0, var 1), and using them is flagged.
template <typename S>
struct BatchNorm {
  Parameter<S> gamma, beta;
  TensorT<S> running_mean, running_var;
  bool has_stats = false;
  mutable bool used_before_update = false;
  double momentum = 0.9;
  double eps = 1e-5;
  int channels = 0;

  BatchNorm() = default;
  BatchNorm(const std::string& name, int channels_) : channels(channels_) {
    gamma = {name + ".gamma", TensorT<S>({channels_})};
    beta = {name + ".beta", TensorT<S>({channels_})};
    for (S& v : gamma.value.data) v = S(1);
    running_mean = TensorT<S>({channels_});
    running_var = TensorT<S>({channels_});
    for (S& v : running_var.data) v = S(1);
  }

  int forward(TapeT<S>& t, Bindings<S>& bind, int x, bool training) {
    const auto& xv = t.value(x);
    if (xv.shape.back() != channels) throw ContractViolation("batch_norm: channel mismatch");
    int c = channels;
    int n = xv.size() / c;
    int g_node = bind.bind(t, gamma);
    int b_node = bind.bind(t, beta);

    if (training) {
      if (xv.shape[0] < 2) {
        throw ContractViolation("batch_norm: training mode requires batch >= 2");
      }
      std::vector<S> mean(c, S(0)), var(c, S(0));
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < c; ++j) mean[j] += xv[i * c + j];
      }
      for (int j = 0; j < c; ++j) mean[j] /= S(n);
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < c; ++j) {
          S d = xv[i * c + j] - mean[j];
          var[j] += d * d;
        }
      }
      for (int j = 0; j < c; ++j) var[j] /= S(n);

      for (int j = 0; j < c; ++j) {
        running_mean[j] = S(momentum) * running_mean[j] + S(1.0 - momentum) * mean[j];
        running_var[j] = S(momentum) * running_var[j] + S(1.0 - momentum) * var[j];
      }
      has_stats = true;

      std::vector<S> inv_std(c);
      for (int j = 0; j < c; ++j) inv_std[j] = S(1) / std::sqrt(var[j] + S(eps));

      TensorT<S> out(xv.shape);
      const auto& gv = t.value(g_node);
      const auto& bv = t.value(b_node);
      std::vector<S> xhat(xv.size());
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < c; ++j) {
          S h = (xv[i * c + j] - mean[j]) * inv_std[j];
          xhat[i * c + j] = h;
          out[i * c + j] = gv[j] * h + bv[j];
        }
      }
      return t.push(std::move(out), {x, g_node, b_node},
                    [x, g_node, b_node, n, c, xhat = std::move(xhat),
                     inv_std = std::move(inv_std)](TapeT<S>& t, int self) {
        const auto& g = t.grad(self);
        const auto& gv = t.value(g_node);
        auto& ggamma = t.grad(g_node);
        auto& gbeta = t.grad(b_node);
        std::vector<S> sum_dy(c, S(0)), sum_dy_xhat(c, S(0));
        for (int i = 0; i < n; ++i) {
          for (int j = 0; j < c; ++j) {
            sum_dy[j] += g[i * c + j];
            sum_dy_xhat[j] += g[i * c + j] * xhat[i * c + j];
          }
        }
        for (int j = 0; j < c; ++j) {
          ggamma[j] += sum_dy_xhat[j];
          gbeta[j] += sum_dy[j];
        }
        if (t.needs(x)) {
          auto& gx = t.grad(x);
          for (int i = 0; i < n; ++i) {
            for (int j = 0; j < c; ++j) {
              gx[i * c + j] += gv[j] * inv_std[j] *
                  (g[i * c + j] - sum_dy[j] / S(n) - xhat[i * c + j] * sum_dy_xhat[j] / S(n));
            }
          }
        }
      });
    }

    // Inference: affine map with frozen statistics.
    if (!has_stats) used_before_update = true;
    std::vector<S> inv_std(c);
    for (int j = 0; j < c; ++j) inv_std[j] = S(1) / std::sqrt(running_var[j] + S(eps));
    TensorT<S> out(xv.shape);
    const auto& gv = t.value(g_node);
    const auto& bv = t.value(b_node);
    std::vector<S> xhat(xv.size());
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < c; ++j) {
        S h = (xv[i * c + j] - running_mean[j]) * inv_std[j];
        xhat[i * c + j] = h;
        out[i * c + j] = gv[j] * h + bv[j];
      }
    }
    return t.push(std::move(out), {x, g_node, b_node},
                  [x, g_node, b_node, n, c, xhat = std::move(xhat),
                   inv_std = std::move(inv_std)](TapeT<S>& t, int self) {
      const auto& g = t.grad(self);
      const auto& gv = t.value(g_node);
      auto& ggamma = t.grad(g_node);
      auto& gbeta = t.grad(b_node);
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < c; ++j) {
          ggamma[j] += g[i * c + j] * xhat[i * c + j];
          gbeta[j] += g[i * c + j];
        }
      }
      if (t.needs(x)) {
        auto& gx = t.grad(x);
        for (int i = 0; i < n; ++i) {
          for (int j = 0; j < c; ++j) gx[i * c + j] += g[i * c + j] * gv[j] * inv_std[j];
        }
      }
    });
  }

  void collect(std::vector<Parameter<S>*>& out_params) {
    out_params.push_back(&gamma);
    out_params.push_back(&beta);
  }
};

// Per-row normalization over the trailing feature axis.
template <typename S>
struct LayerNorm {
  Parameter<S> gamma, beta;
  double eps = 1e-5;
  int features = 0;

  LayerNorm() = default;
  LayerNorm(const std::string& name, int features_) : features(features_) {
    gamma = {name + ".gamma", TensorT<S>({features_})};
    beta = {name + ".beta", TensorT<S>({features_})};
    for (S& v : gamma.value.data) v = S(1);
  }

  int forward(TapeT<S>& t, Bindings<S>& bind, int x) {
    const auto& xv = t.value(x);
    if (xv.shape.back() != features) throw ContractViolation("layer_norm: feature mismatch");
    int d = features;
    int rows = xv.size() / d;
    int g_node = bind.bind(t, gamma);
    int b_node = bind.bind(t, beta);

    TensorT<S> out(xv.shape);
    const auto& gv = t.value(g_node);
    const auto& bv = t.value(b_node);
    std::vector<S> xhat(xv.size()), inv_std(rows);
    for (int r = 0; r < rows; ++r) {
      const S* xr = &xv[r * d];
      S mean = S(0);
      for (int j = 0; j < d; ++j) mean += xr[j];
      mean /= S(d);
      S var = S(0);
      for (int j = 0; j < d; ++j) {
        S diff = xr[j] - mean;
        var += diff * diff;
      }
      var /= S(d);
      S is = S(1) / std::sqrt(var + S(eps));
      inv_std[r] = is;
      for (int j = 0; j < d; ++j) {
        S h = (xr[j] - mean) * is;
        xhat[r * d + j] = h;
        out[r * d + j] = gv[j] * h + bv[j];
      }
    }
    return t.push(std::move(out), {x, g_node, b_node},
                  [x, g_node, b_node, rows, d, xhat = std::move(xhat),
                   inv_std = std::move(inv_std)](TapeT<S>& t, int self) {
      const auto& g = t.grad(self);
      const auto& gv = t.value(g_node);
      auto& ggamma = t.grad(g_node);
      auto& gbeta = t.grad(b_node);
      for (int r = 0; r < rows; ++r) {
        for (int j = 0; j < d; ++j) {
          ggamma[j] += g[r * d + j] * xhat[r * d + j];
          gbeta[j] += g[r * d + j];
        }
      }
      if (t.needs(x)) {
        auto& gx = t.grad(x);
        for (int r = 0; r < rows; ++r) {
          S sum_gh = S(0), sum_gh_xhat = S(0);
          for (int j = 0; j < d; ++j) {
            S gh = g[r * d + j] * gv[j];
            sum_gh += gh;
            sum_gh_xhat += gh * xhat[r * d + j];
          }
          for (int j = 0; j < d; ++j) {
            S gh = g[r * d + j] * gv[j];
            gx[r * d + j] += inv_std[r] *
                (gh - sum_gh / S(d) - xhat[r * d + j] * sum_gh_xhat / S(d));
          }
        }
      }
    });
  }

  void collect(std::vector<Parameter<S>*>& out_params) {
    out_params.push_back(&gamma);
    out_params.push_back(&beta);
  }
};

// ---- optimizer ----

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-4;  // decoupled
  double clip_norm = 1.0;      // global gradient max-norm
};

struct AdamStepInfo {
  bool applied = false;
  double grad_norm = 0.0;
  double clipped_norm = 0.0;
};

template <typename S>
class AdamOptimizer {
 public:
  AdamOptimizer() = default;
  explicit AdamOptimizer(AdamConfig cfg) : cfg_(cfg) {}

  void attach(const std::vector<Parameter<S>*>& params) {
    params_ = params;
    m_.clear();
    v_.clear();
    for (Parameter<S>* p : params) {
      m_.emplace_back(p->value.shape);
      v_.emplace_back(p->value.shape);
    }
    step_count_ = 0;
    skipped_ = 0;
  }

  // Applies one update from the gradients sitting on the tape. Bindings must
  // cover the attached parameters (same pointers).
  AdamStepInfo step(TapeT<S>& tape, const std::vector<ParamBinding<S>>& bindings, double lr) {
    AdamStepInfo info;
    std::map<const Parameter<S>*, int> node_of;
    for (const ParamBinding<S>& b : bindings) node_of[b.param] = b.node;

    double norm_sq = 0.0;
    bool finite = true;
    for (size_t i = 0; i < params_.size(); ++i) {
      auto it = node_of.find(params_[i]);
      if (it == node_of.end()) throw ContractViolation("adam: unbound parameter");
      const TensorT<S>& g = tape.grad(it->second);
      for (S v : g.data) {
        double d = static_cast<double>(v);
        if (!std::isfinite(d)) finite = false;
        norm_sq += d * d;
      }
    }
    info.grad_norm = std::sqrt(norm_sq);
    if (!finite) {
      ++skipped_;
      return info;
    }
    double scale = 1.0;
    if (info.grad_norm > cfg_.clip_norm && info.grad_norm > 0.0) {
      scale = cfg_.clip_norm / info.grad_norm;
    }
    info.clipped_norm = info.grad_norm * scale;

    ++step_count_;
    double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_count_));
    double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_count_));
    for (size_t i = 0; i < params_.size(); ++i) {
      const TensorT<S>& g = tape.grad(node_of[params_[i]]);
      TensorT<S>& m = m_[i];
      TensorT<S>& v = v_[i];
      TensorT<S>& p = params_[i]->value;
      for (int j = 0; j < p.size(); ++j) {
        double gj = static_cast<double>(g[j]) * scale;
        double mj = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * gj;
        double vj = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * gj * gj;
        m[j] = static_cast<S>(mj);
        v[j] = static_cast<S>(vj);
        double update = (mj / bc1) / (std::sqrt(vj / bc2) + cfg_.eps);
        p[j] = static_cast<S>(p[j] - lr * update - lr * cfg_.weight_decay * p[j]);
      }
    }
    info.applied = true;
    return info;
  }

  const AdamConfig& config() const { return cfg_; }
  AdamConfig& config() { return cfg_; }
  int64_t step_count() const { return step_count_; }
  void set_step_count(int64_t n) { step_count_ = n; }
  int skipped() const { return skipped_; }
  std::vector<TensorT<S>>& first_moments() { return m_; }
  std::vector<TensorT<S>>& second_moments() { return v_; }

 private:
  AdamConfig cfg_;
  std::vector<Parameter<S>*> params_;
  std::vector<TensorT<S>> m_, v_;
  int64_t step_count_ = 0;
  int skipped_ = 0;
};

// ---- finite-difference gradient verification (64-bit) ----

struct GradCheckReport {
  int checked = 0;
  int failures = 0;
  double max_rel_error = 0.0;
};

// build: constructs the scalar loss on the tape and records bindings.
// Probes random parameter elements with central differences.
inline GradCheckReport grad_check(
    const std::vector<Parameter<double>*>& params,
    const std::function<int(TapeT<double>&, Bindings<double>&)>& build, Rng& rng,
    int probes, double h = 1e-5, double tol = 1e-4) {
  GradCheckReport report;

  TapeT<double> tape;
  Bindings<double> bind;
  int loss = build(tape, bind);
  tape.backward(loss);
  std::map<const Parameter<double>*, TensorT<double>> ad_grads;
  for (const ParamBinding<double>& b : bind.items) ad_grads[b.param] = tape.grad(b.node);

  auto eval = [&]() {
    TapeT<double> t2;
    Bindings<double> b2;
    return t2.value(build(t2, b2))[0];
  };

  for (int probe = 0; probe < probes; ++probe) {
    Parameter<double>* p = params[rng.uniform_int(static_cast<int>(params.size()))];
    if (p->value.size() == 0) continue;
    int j = rng.uniform_int(p->value.size());
    double saved = p->value[j];
    p->value[j] = saved + h;
    double f_plus = eval();
    p->value[j] = saved - h;
    double f_minus = eval();
    p->value[j] = saved;

    double fd = (f_plus - f_minus) / (2.0 * h);
    double ad = ad_grads[p][j];
    double rel = std::abs(ad - fd) / std::max({1.0, std::abs(ad), std::abs(fd)});
    report.max_rel_error = std::max(report.max_rel_error, rel);
    if (rel > tol) ++report.failures;
    ++report.checked;
  }
  return report;
}

}  // namespace namo
