#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <vector>

#include "namo/common.hpp"

namespace namo {

template <typename S>
struct TensorT {
  std::vector<int> shape;
  std::vector<S> data;

  TensorT() = default;
  explicit TensorT(std::vector<int> shape_) : shape(std::move(shape_)) {
    data.assign(count(shape), S(0));
  }
  TensorT(std::vector<int> shape_, std::vector<S> data_)
      : shape(std::move(shape_)), data(std::move(data_)) {
    if (static_cast<int>(data.size()) != count(shape)) {
      throw ContractViolation("tensor data length does not match shape");
    }
  }

  static int count(const std::vector<int>& s) {
    int n = 1;
    for (int d : s) n *= d;
    return n;
  }
  int size() const { return static_cast<int>(data.size()); }
  S& operator[](int i) { return data[i]; }
  const S& operator[](int i) const { return data[i]; }

  bool all_finite() const {
    for (S v : data) {
      if (!std::isfinite(static_cast<double>(v))) return false;
    }
    return true;
  }
};

using Tensor = TensorT<float>;

// Append-only reverse-mode tape. Creation order is a topological order, so
// the backward sweep visits each node exactly once in reverse.
template <typename S>
class TapeT {
 public:
  struct Node {
    TensorT<S> value;
    TensorT<S> grad;
    std::vector<int> inputs;
    std::function<void(TapeT&, int)> backward;  // empty for leaves
    bool needs_grad = false;
  };

  int leaf(TensorT<S> value, bool needs_grad) {
    Node n;
    n.value = std::move(value);
    n.needs_grad = needs_grad;
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
  }

  int push(TensorT<S> value, std::vector<int> inputs,
           std::function<void(TapeT&, int)> backward) {
    Node n;
    n.value = std::move(value);
    n.inputs = std::move(inputs);
    for (int in : n.inputs) n.needs_grad |= nodes_[in].needs_grad;
    if (n.needs_grad) n.backward = std::move(backward);
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
  }

  TensorT<S>& value(int id) { return nodes_[id].value; }
  const TensorT<S>& value(int id) const { return nodes_[id].value; }
  bool needs(int id) const { return nodes_[id].needs_grad; }

  // Gradient buffer, allocated on first touch.
  TensorT<S>& grad(int id) {
    Node& n = nodes_[id];
    if (n.grad.shape.empty() && !n.value.shape.empty()) {
      n.grad = TensorT<S>(n.value.shape);
    }
    return n.grad;
  }

  void backward(int root) {
    if (value(root).size() != 1) {
      throw ContractViolation("backward root must be a scalar");
    }
    grad(root).data[0] = S(1);
    for (int id = root; id >= 0; --id) {
      Node& n = nodes_[id];
      if (!n.needs_grad || !n.backward) continue;
      if (n.grad.shape.empty()) continue;  // no gradient flowed here
      n.backward(*this, id);
    }
  }

  size_t size() const { return nodes_.size(); }

 private:
  std::vector<Node> nodes_;
};

using Tape = TapeT<float>;

// ---- elementwise and reduction ops ----

template <typename S>
int op_relu(TapeT<S>& t, int x) {
  TensorT<S> out(t.value(x).shape);
  const auto& xv = t.value(x);
  for (int i = 0; i < out.size(); ++i) out[i] = xv[i] > S(0) ? xv[i] : S(0);
  return t.push(std::move(out), {x}, [x](TapeT<S>& t, int self) {
    const auto& g = t.grad(self);
    const auto& xv = t.value(x);
    auto& gx = t.grad(x);
    for (int i = 0; i < g.size(); ++i) {
      if (xv[i] > S(0)) gx[i] += g[i];
    }
  });
}

template <typename S>
int op_add(TapeT<S>& t, int a, int b) {
  const auto& av = t.value(a);
  const auto& bv = t.value(b);
  if (av.shape != bv.shape) throw ContractViolation("op_add: shape mismatch");
  TensorT<S> out(av.shape);
  for (int i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  return t.push(std::move(out), {a, b}, [a, b](TapeT<S>& t, int self) {
    const auto& g = t.grad(self);
    auto& ga = t.grad(a);
    auto& gb = t.grad(b);
    for (int i = 0; i < g.size(); ++i) {
      ga[i] += g[i];
      gb[i] += g[i];
    }
  });
}

template <typename S>
int op_sub(TapeT<S>& t, int a, int b) {
  const auto& av = t.value(a);
  const auto& bv = t.value(b);
  if (av.shape != bv.shape) throw ContractViolation("op_sub: shape mismatch");
  TensorT<S> out(av.shape);
  for (int i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  return t.push(std::move(out), {a, b}, [a, b](TapeT<S>& t, int self) {
    const auto& g = t.grad(self);
    auto& ga = t.grad(a);
    auto& gb = t.grad(b);
    for (int i = 0; i < g.size(); ++i) {
      ga[i] += g[i];
      gb[i] -= g[i];
    }
  });
}

template <typename S>
int op_mul(TapeT<S>& t, int a, int b) {
  const auto& av = t.value(a);
  const auto& bv = t.value(b);
  if (av.shape != bv.shape) throw ContractViolation("op_mul: shape mismatch");
  TensorT<S> out(av.shape);
  for (int i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return t.push(std::move(out), {a, b}, [a, b](TapeT<S>& t, int self) {
    const auto& g = t.grad(self);
    const auto& av = t.value(a);
    const auto& bv = t.value(b);
    auto& ga = t.grad(a);
    auto& gb = t.grad(b);
    for (int i = 0; i < g.size(); ++i) {
      ga[i] += g[i] * bv[i];
      gb[i] += g[i] * av[i];
    }
  });
}

template <typename S>
int op_scale(TapeT<S>& t, int x, S c) {
  TensorT<S> out(t.value(x).shape);
  const auto& xv = t.value(x);
  for (int i = 0; i < out.size(); ++i) out[i] = xv[i] * c;
  return t.push(std::move(out), {x}, [x, c](TapeT<S>& t, int self) {
    const auto& g = t.grad(self);
    auto& gx = t.grad(x);
    for (int i = 0; i < g.size(); ++i) gx[i] += g[i] * c;
  });
}

template <typename S>
int op_exp(TapeT<S>& t, int x) {
  TensorT<S> out(t.value(x).shape);
  const auto& xv = t.value(x);
  for (int i = 0; i < out.size(); ++i) out[i] = std::exp(xv[i]);
  return t.push(std::move(out), {x}, [x](TapeT<S>& t, int self) {
    const auto& g = t.grad(self);
    const auto& yv = t.value(self);
    auto& gx = t.grad(x);
    for (int i = 0; i < g.size(); ++i) gx[i] += g[i] * yv[i];
  });
}

template <typename S>
int op_square(TapeT<S>& t, int x) {
  TensorT<S> out(t.value(x).shape);
  const auto& xv = t.value(x);
  for (int i = 0; i < out.size(); ++i) out[i] = xv[i] * xv[i];
  return t.push(std::move(out), {x}, [x](TapeT<S>& t, int self) {
    const auto& g = t.grad(self);
    const auto& xv = t.value(x);
    auto& gx = t.grad(x);
    for (int i = 0; i < g.size(); ++i) gx[i] += S(2) * g[i] * xv[i];
  });
}

// min(a, b); ties route the gradient to `a`, so the unclipped surrogate
// branch wins at ratio exactly 1.
template <typename S>
int op_min(TapeT<S>& t, int a, int b) {
  const auto& av = t.value(a);
  const auto& bv = t.value(b);
  if (av.shape != bv.shape) throw ContractViolation("op_min: shape mismatch");
  TensorT<S> out(av.shape);
  for (int i = 0; i < out.size(); ++i) out[i] = av[i] <= bv[i] ? av[i] : bv[i];
  return t.push(std::move(out), {a, b}, [a, b](TapeT<S>& t, int self) {
    const auto& g = t.grad(self);
    const auto& av = t.value(a);
    const auto& bv = t.value(b);
    auto& ga = t.grad(a);
    auto& gb = t.grad(b);
    for (int i = 0; i < g.size(); ++i) {
      if (av[i] <= bv[i]) {
        ga[i] += g[i];
      } else {
        gb[i] += g[i];
      }
    }
  });
}

template <typename S>
int op_clip(TapeT<S>& t, int x, S lo, S hi) {
  TensorT<S> out(t.value(x).shape);
  const auto& xv = t.value(x);
  for (int i = 0; i < out.size(); ++i) out[i] = xv[i] < lo ? lo : (xv[i] > hi ? hi : xv[i]);
  return t.push(std::move(out), {x}, [x, lo, hi](TapeT<S>& t, int self) {
    const auto& g = t.grad(self);
    const auto& xv = t.value(x);
    auto& gx = t.grad(x);
    for (int i = 0; i < g.size(); ++i) {
      if (xv[i] >= lo && xv[i] <= hi) gx[i] += g[i];
    }
  });
}

template <typename S>
int op_mean(TapeT<S>& t, int x) {
  const auto& xv = t.value(x);
  S acc = S(0);
  for (int i = 0; i < xv.size(); ++i) acc += xv[i];
  int n = xv.size();
  TensorT<S> out({1});
  out[0] = acc / S(n);
  return t.push(std::move(out), {x}, [x, n](TapeT<S>& t, int self) {
    S g = t.grad(self)[0] / S(n);
    auto& gx = t.grad(x);
    for (int i = 0; i < gx.size(); ++i) gx[i] += g;
  });
}

template <typename S>
int op_reshape(TapeT<S>& t, int x, std::vector<int> shape) {
  if (TensorT<S>::count(shape) != t.value(x).size()) {
    throw ContractViolation("op_reshape: element count mismatch");
  }
  TensorT<S> out(shape, t.value(x).data);
  return t.push(std::move(out), {x}, [x](TapeT<S>& t, int self) {
    const auto& g = t.grad(self);
    auto& gx = t.grad(x);
    for (int i = 0; i < g.size(); ++i) gx[i] += g[i];
  });
}

// Concatenate two [B, N] tensors along the feature axis.
template <typename S>
int op_concat(TapeT<S>& t, int a, int b) {
  const auto& av = t.value(a);
  const auto& bv = t.value(b);
  if (av.shape.size() != 2 || bv.shape.size() != 2 || av.shape[0] != bv.shape[0]) {
    throw ContractViolation("op_concat: expects [B, N] tensors with equal batch");
  }
  int batch = av.shape[0], na = av.shape[1], nb = bv.shape[1];
  TensorT<S> out({batch, na + nb});
  for (int r = 0; r < batch; ++r) {
    for (int i = 0; i < na; ++i) out[r * (na + nb) + i] = av[r * na + i];
    for (int i = 0; i < nb; ++i) out[r * (na + nb) + na + i] = bv[r * nb + i];
  }
  return t.push(std::move(out), {a, b}, [a, b, batch, na, nb](TapeT<S>& t, int self) {
    const auto& g = t.grad(self);
    auto& ga = t.grad(a);
    auto& gb = t.grad(b);
    for (int r = 0; r < batch; ++r) {
      for (int i = 0; i < na; ++i) ga[r * na + i] += g[r * (na + nb) + i];
      for (int i = 0; i < nb; ++i) gb[r * nb + i] += g[r * (na + nb) + na + i];
    }
  });
}

// ---- dense layers ----

// x: [B, N], w: [M, N], b: [M] -> [B, M]
template <typename S>
int op_linear(TapeT<S>& t, int x, int w, int b) {
  const auto& xv = t.value(x);
  const auto& wv = t.value(w);
  const auto& bv = t.value(b);
  if (xv.shape.size() != 2 || wv.shape.size() != 2 || xv.shape[1] != wv.shape[1] ||
      bv.size() != wv.shape[0]) {
    throw ContractViolation("op_linear: shape mismatch (x [B,N], w [M,N], b [M])");
  }
  int batch = xv.shape[0], n = xv.shape[1], m = wv.shape[0];
  TensorT<S> out({batch, m});
  parallel_chunks(batch, [&](int r0, int r1) {
    for (int r = r0; r < r1; ++r) {
      const S* xr = &xv[r * n];
      S* yr = &out[r * m];
      for (int j = 0; j < m; ++j) {
        const S* wr = &wv[j * n];
        S acc = bv[j];
        for (int i = 0; i < n; ++i) acc += wr[i] * xr[i];
        yr[j] = acc;
      }
    }
  });
  return t.push(std::move(out), {x, w, b},
                [x, w, b, batch, n, m](TapeT<S>& t, int self) {
    const auto& g = t.grad(self);
    const auto& xv = t.value(x);
    const auto& wv = t.value(w);
    auto& gw = t.grad(w);
    auto& gb = t.grad(b);
    if (t.needs(x)) {
      // dx[r,:] += g[r,:] * W   (parallel rows, disjoint)
      auto& gx = t.grad(x);
      parallel_chunks(batch, [&](int r0, int r1) {
        for (int r = r0; r < r1; ++r) {
          const S* gr = &g[r * m];
          S* gxr = &gx[r * n];
          for (int j = 0; j < m; ++j) {
            const S gj = gr[j];
            if (gj == S(0)) continue;
            const S* wr = &wv[j * n];
            for (int i = 0; i < n; ++i) gxr[i] += gj * wr[i];
          }
        }
      });
    }
    // dW[j,:] = sum_r g[r,j] x[r,:]  (parallel output rows, fixed batch order)
    parallel_chunks(m, [&](int j0, int j1) {
      for (int j = j0; j < j1; ++j) {
        S* gwr = &gw[j * n];
        S gbj = S(0);
        for (int r = 0; r < batch; ++r) {
          const S gj = g[r * m + j];
          gbj += gj;
          if (gj == S(0)) continue;
          const S* xr = &xv[r * n];
          for (int i = 0; i < n; ++i) gwr[i] += gj * xr[i];
        }
        gb[j] += gbj;
      }
    });
  });
}

// x: [B, H, W, C], w: [K, kh, kw, C], b: [K], valid convolution with stride.
template <typename S>
int op_conv2d(TapeT<S>& t, int x, int w, int b, int stride) {
  const auto& xv = t.value(x);
  const auto& wv = t.value(w);
  const auto& bv = t.value(b);
  if (xv.shape.size() != 4 || wv.shape.size() != 4 || xv.shape[3] != wv.shape[3] ||
      bv.size() != wv.shape[0]) {
    throw ContractViolation("op_conv2d: shape mismatch (x [B,H,W,C], w [K,kh,kw,C], b [K])");
  }
  int batch = xv.shape[0], h = xv.shape[1], win = xv.shape[2], c = xv.shape[3];
  int k = wv.shape[0], kh = wv.shape[1], kw = wv.shape[2];
  if (h < kh || win < kw) throw ContractViolation("op_conv2d: input smaller than kernel");
  int ho = (h - kh) / stride + 1;
  int wo = (win - kw) / stride + 1;

  TensorT<S> out({batch, ho, wo, k});
  int row = win * c, kernel_row = kw * c;
  parallel_chunks(batch, [&](int b0, int b1) {
    for (int bi = b0; bi < b1; ++bi) {
      const S* xb = &xv[bi * h * row];
      S* yb = &out[bi * ho * wo * k];
      for (int oy = 0; oy < ho; ++oy) {
        for (int ox = 0; ox < wo; ++ox) {
          const S* patch = xb + (oy * stride) * row + (ox * stride) * c;
          S* ycell = yb + (oy * wo + ox) * k;
          for (int f = 0; f < k; ++f) {
            const S* wf = &wv[f * kh * kernel_row];
            S acc = bv[f];
            for (int ky = 0; ky < kh; ++ky) {
              const S* prow = patch + ky * row;
              const S* wrow = wf + ky * kernel_row;
              for (int i = 0; i < kernel_row; ++i) acc += prow[i] * wrow[i];
            }
            ycell[f] = acc;
          }
        }
      }
    }
  });

  return t.push(std::move(out), {x, w, b},
                [x, w, b, stride, batch, h, win, c, k, kh, kw, ho, wo](TapeT<S>& t, int self) {
    const auto& g = t.grad(self);
    const auto& xv = t.value(x);
    const auto& wv = t.value(w);
    auto& gw = t.grad(w);
    auto& gb = t.grad(b);
    int row = win * c, kernel_row = kw * c;

    if (t.needs(x)) {
      auto& gx = t.grad(x);
      parallel_chunks(batch, [&](int b0, int b1) {
        for (int bi = b0; bi < b1; ++bi) {
          const S* gbatch = &g[bi * ho * wo * k];
          S* gxb = &gx[bi * h * row];
          for (int oy = 0; oy < ho; ++oy) {
            for (int ox = 0; ox < wo; ++ox) {
              const S* gcell = gbatch + (oy * wo + ox) * k;
              S* gpatch = gxb + (oy * stride) * row + (ox * stride) * c;
              for (int f = 0; f < k; ++f) {
                const S gf = gcell[f];
                if (gf == S(0)) continue;
                const S* wf = &wv[f * kh * kernel_row];
                for (int ky = 0; ky < kh; ++ky) {
                  S* grow = gpatch + ky * row;
                  const S* wrow = wf + ky * kernel_row;
                  for (int i = 0; i < kernel_row; ++i) grow[i] += gf * wrow[i];
                }
              }
            }
          }
        }
      });
    }

    parallel_chunks(k, [&](int f0, int f1) {
      for (int f = f0; f < f1; ++f) {
        S* gwf = &gw[f * kh * kernel_row];
        S gbf = S(0);
        for (int bi = 0; bi < batch; ++bi) {
          const S* gbatch = &g[bi * ho * wo * k];
          const S* xb = &xv[bi * h * row];
          for (int oy = 0; oy < ho; ++oy) {
            for (int ox = 0; ox < wo; ++ox) {
              const S gf = gbatch[(oy * wo + ox) * k + f];
              gbf += gf;
              if (gf == S(0)) continue;
              const S* patch = xb + (oy * stride) * row + (ox * stride) * c;
              for (int ky = 0; ky < kh; ++ky) {
                const S* prow = patch + ky * row;
                S* wrow = gwf + ky * kernel_row;
                for (int i = 0; i < kernel_row; ++i) wrow[i] += gf * prow[i];
              }
            }
          }
        }
        gb[f] += gbf;
      }
    });
  });
}

// ---- distribution heads ----

// mean: [B, D], log_sigma: [D], actions: constant [B, D] -> log-prob [B]
template <typename S>
int op_gaussian_log_prob(TapeT<S>& t, int mean, int log_sigma, const TensorT<S>& actions) {
  const auto& mv = t.value(mean);
  const auto& lv = t.value(log_sigma);
  if (mv.shape.size() != 2 || lv.size() != mv.shape[1] || actions.shape != mv.shape) {
    throw ContractViolation("op_gaussian_log_prob: shape mismatch");
  }
  int batch = mv.shape[0], d = mv.shape[1];
  const S log_2pi = S(std::log(2.0 * kPi));
  TensorT<S> out({batch});
  TensorT<S> act = actions;
  for (int r = 0; r < batch; ++r) {
    S acc = S(0);
    for (int j = 0; j < d; ++j) {
      S sigma = std::exp(lv[j]);
      S z = (act[r * d + j] - mv[r * d + j]) / sigma;
      acc += S(-0.5) * z * z - lv[j] - S(0.5) * log_2pi;
    }
    out[r] = acc;
  }
  return t.push(std::move(out), {mean, log_sigma},
                [mean, log_sigma, act = std::move(act), batch, d](TapeT<S>& t, int self) {
    const auto& g = t.grad(self);
    const auto& mv = t.value(mean);
    const auto& lv = t.value(log_sigma);
    auto& gm = t.grad(mean);
    auto& gl = t.grad(log_sigma);
    for (int j = 0; j < d; ++j) {
      S inv_var = std::exp(S(-2) * lv[j]);
      S gl_acc = S(0);
      for (int r = 0; r < batch; ++r) {
        S diff = act[r * d + j] - mv[r * d + j];
        gm[r * d + j] += g[r] * diff * inv_var;
        gl_acc += g[r] * (diff * diff * inv_var - S(1));
      }
      gl[j] += gl_acc;
    }
  });
}

// Diagonal Gaussian entropy: sum_d (log_sigma_d + 0.5 log(2 pi e)); scalar.
template <typename S>
int op_gaussian_entropy(TapeT<S>& t, int log_sigma) {
  const auto& lv = t.value(log_sigma);
  const S half_log_2pie = S(0.5 * std::log(2.0 * kPi * std::exp(1.0)));
  S acc = S(0);
  for (int j = 0; j < lv.size(); ++j) acc += lv[j] + half_log_2pie;
  TensorT<S> out({1});
  out[0] = acc;
  return t.push(std::move(out), {log_sigma}, [log_sigma](TapeT<S>& t, int self) {
    S g = t.grad(self)[0];
    auto& gl = t.grad(log_sigma);
    for (int j = 0; j < gl.size(); ++j) gl[j] += g;
  });
}

}  // namespace namo
