#pragma once

#include <cmath>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "fdnet/layers.hpp"
#include "fdnet/tensor.hpp"

namespace fdnet {

enum class PassMode { LowPass, HighPass };

/// Per-skip Gaussian filter description: kernel width, sigma (fixed or
/// trainable), and which band the skip carries.
struct GaussianSpec {
  int64_t kernel_size = 3;  // odd, one of {1,3,5,7}
  double sigma = 1.0;       // initial value when trainable
  bool sigma_trainable = false;
  PassMode mode = PassMode::LowPass;

  void validate() const {
    if (kernel_size != 1 && kernel_size != 3 && kernel_size != 5 && kernel_size != 7) {
      throw ShapeError("GaussianSpec.kernel_size must be one of {1,3,5,7}, got " +
                       std::to_string(kernel_size));
    }
    if (!(sigma > 0.0)) {
      throw ShapeError("GaussianSpec.sigma must be positive, got " + std::to_string(sigma));
    }
  }
};

// ---------------------------------------------------------------------------
// 1-D Gaussian kernels
// ---------------------------------------------------------------------------

/// w[i] ∝ exp(-(i-c)^2 / (2 sigma^2)), normalized by the computed sum.
template <typename T>
std::vector<T> gaussian_kernel_1d(int64_t size, T sigma) {
  if (size < 1 || size % 2 == 0) {
    throw ShapeError("gaussian_kernel_1d: size must be odd and positive, got " + std::to_string(size));
  }
  if (!(sigma > T(0))) {
    throw ShapeError("gaussian_kernel_1d: sigma must be positive, got " + std::to_string(sigma));
  }
  const int64_t c = (size - 1) / 2;
  std::vector<T> w(static_cast<size_t>(size));
  T sum = T(0);
  for (int64_t i = 0; i < size; ++i) {
    const T d = static_cast<T>(i - c);
    w[static_cast<size_t>(i)] = std::exp(-(d * d) / (T(2) * sigma * sigma));
    sum += w[static_cast<size_t>(i)];
  }
  for (T& x : w) x /= sum;
  return w;
}

/// Differentiable kernel from a scalar sigma tensor. The backward applies
/// d w_i / d sigma = (u_i' S - u_i S') / S^2 with u_i' = u_i d_i^2 / sigma^3.
template <typename T>
Tensor<T> gaussian_kernel_1d(int64_t size, const Tensor<T>& sigma) {
  if (sigma.numel() != 1) {
    throw ShapeError("gaussian_kernel_1d: sigma tensor must be scalar, got " + shape_str(sigma.shape()));
  }
  const T sv = sigma.values()[0];
  auto w = gaussian_kernel_1d<T>(size, sv);
  auto out = Tensor<T>::from({size}, w);

  auto ss = sigma.storage();
  detail::record<T>(out, {sigma}, [ss, size](detail::Storage<T>& o) {
    ss->ensure_grad();
    const T s = ss->v[0];
    const int64_t c = (size - 1) / 2;
    std::vector<T> u(static_cast<size_t>(size)), du(static_cast<size_t>(size));
    T S = T(0), dS = T(0);
    for (int64_t i = 0; i < size; ++i) {
      const T d = static_cast<T>(i - c);
      const T ui = std::exp(-(d * d) / (T(2) * s * s));
      const T dui = ui * (d * d) / (s * s * s);
      u[static_cast<size_t>(i)] = ui;
      du[static_cast<size_t>(i)] = dui;
      S += ui;
      dS += dui;
    }
    T acc = T(0);
    for (int64_t i = 0; i < size; ++i) {
      const T dw = (du[static_cast<size_t>(i)] * S - u[static_cast<size_t>(i)] * dS) / (S * S);
      acc += o.g[static_cast<size_t>(i)] * dw;
    }
    ss->g[0] += acc;
  });
  return out;
}

// ---------------------------------------------------------------------------
// Softplus reparameterization for trainable sigma
// ---------------------------------------------------------------------------

template <typename T>
T softplus_value(T x) {
  // Stable in both tails: x + log1p(exp(-x)) for positive x.
  if (x > T(0)) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

template <typename T>
Tensor<T> softplus(const Tensor<T>& x) {
  auto out = Tensor<T>::zeros(x.shape());
  const T* xp = x.values().data();
  T* op = out.values_mut().data();
  const int64_t n = x.numel();
  for (int64_t i = 0; i < n; ++i) op[i] = softplus_value(xp[i]);
  auto xs = x.storage();
  detail::record<T>(out, {x}, [xs, n](detail::Storage<T>& o) {
    xs->ensure_grad();
    for (int64_t i = 0; i < n; ++i) {
      const T v = xs->v[static_cast<size_t>(i)];
      const T sig = T(1) / (T(1) + std::exp(-v));
      xs->g[static_cast<size_t>(i)] += o.g[static_cast<size_t>(i)] * sig;
    }
  });
  return out;
}

/// Raw value whose softplus reproduces `target` bit-exactly. The analytic
/// inverse log(e^t - 1) lands within a couple of ulps; nudge from there.
template <typename T>
T softplus_inverse_exact(T target) {
  if (!(target > T(0))) throw ShapeError("softplus_inverse_exact: target must be positive");
  T raw = static_cast<T>(std::log(std::expm1(static_cast<double>(target))));
  if (softplus_value(raw) == target) return raw;
  for (int dir = 0; dir < 2; ++dir) {
    T y = raw;
    const T towards = dir == 0 ? std::numeric_limits<T>::infinity() : -std::numeric_limits<T>::infinity();
    for (int step = 0; step < 1000; ++step) {
      y = std::nextafter(y, towards);
      if (softplus_value(y) == target) return y;
    }
  }
  throw NumericError("softplus_inverse_exact: no exact preimage near target");
}

/// Trainable sigma parameter: sigma = softplus(raw) keeps sigma positive for
/// every raw value; raw is initialized so the effective sigma starts at the
/// configured value exactly.
template <typename T>
struct TrainableSigma {
  Tensor<T> raw;  // scalar parameter

  static TrainableSigma init(T sigma0) {
    TrainableSigma s;
    s.raw = Tensor<T>::scalar(softplus_inverse_exact(sigma0)).set_requires_grad(true);
    return s;
  }

  Tensor<T> effective() const { return softplus(raw); }
  T value() const { return softplus_value(raw.values()[0]); }
};

/// Effective sigma of a spec (trainable or fixed) given its current state.
template <typename T>
T effective_sigma(const GaussianSpec& spec, const TrainableSigma<T>* state) {
  if (spec.sigma_trainable) {
    if (!state) throw ShapeError("effective_sigma: trainable spec has no sigma state");
    return state->value();
  }
  return static_cast<T>(spec.sigma);
}

// ---------------------------------------------------------------------------
// Depthwise separable filtering
// ---------------------------------------------------------------------------

enum class Axis2d { H, W };

/// 1-D correlation with `kernel` along one spatial axis of [N,C,H,W], per
/// channel, reflect padding of width (size-1)/2. Differentiable in both the
/// input and the kernel.
template <typename T>
Tensor<T> depthwise_filter_1d(const Tensor<T>& x, const Tensor<T>& kernel, Axis2d axis) {
  if (x.ndim() != 4) throw ShapeError("depthwise_filter_1d: expected [N,C,H,W], got " + shape_str(x.shape()));
  if (kernel.ndim() != 1 || kernel.dim(0) % 2 == 0) {
    throw ShapeError("depthwise_filter_1d: kernel must be 1-d with odd size, got " +
                     shape_str(kernel.shape()));
  }
  const int64_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int64_t k = kernel.dim(0);
  const int64_t p = (k - 1) / 2;
  const int64_t len = axis == Axis2d::W ? W : H;
  if (p > len - 1) {
    throw ShapeError("depthwise_filter_1d: spatial dim " + std::to_string(len) +
                     " smaller than reflect padding requirement " + std::to_string(p + 1));
  }

  auto out = Tensor<T>::zeros(x.shape());
  const T* xp = x.values().data();
  const T* kp = kernel.values().data();
  T* op = out.values_mut().data();

  if (axis == Axis2d::W) {
    for (int64_t nc = 0; nc < N * C; ++nc) {
      for (int64_t h = 0; h < H; ++h) {
        const T* row = xp + (nc * H + h) * W;
        T* dst = op + (nc * H + h) * W;
        for (int64_t w = 0; w < W; ++w) {
          T acc = T(0);
          for (int64_t t = 0; t < k; ++t) {
            acc += kp[t] * row[detail::reflect_index(w + t - p, W)];
          }
          dst[w] = acc;
        }
      }
    }
  } else {
    for (int64_t nc = 0; nc < N * C; ++nc) {
      const T* plane = xp + nc * H * W;
      T* dst = op + nc * H * W;
      for (int64_t h = 0; h < H; ++h) {
        for (int64_t t = 0; t < k; ++t) {
          const T kv = kp[t];
          const T* src = plane + detail::reflect_index(h + t - p, H) * W;
          T* d = dst + h * W;
          for (int64_t w = 0; w < W; ++w) d[w] += kv * src[w];
        }
      }
    }
  }

  auto xs = x.storage();
  auto ks = kernel.storage();
  detail::record<T>(out, {x, kernel}, [xs, ks, N, C, H, W, k, p, axis](detail::Storage<T>& o) {
    const bool wx = xs->active(), wk = ks->active();
    if (wx) xs->ensure_grad();
    if (wk) ks->ensure_grad();
    const int64_t len = axis == Axis2d::W ? W : H;
    for (int64_t nc = 0; nc < N * C; ++nc) {
      for (int64_t h = 0; h < H; ++h) {
        for (int64_t w = 0; w < W; ++w) {
          const int64_t pos = axis == Axis2d::W ? w : h;
          const size_t oidx = static_cast<size_t>((nc * H + h) * W + w);
          const T g = o.g[oidx];
          if (g == T(0)) continue;
          for (int64_t t = 0; t < k; ++t) {
            const int64_t src_pos = detail::reflect_index(pos + t - p, len);
            const size_t sidx = axis == Axis2d::W
                                    ? static_cast<size_t>((nc * H + h) * W + src_pos)
                                    : static_cast<size_t>((nc * H + src_pos) * W + w);
            if (wx) xs->g[sidx] += ks->v[static_cast<size_t>(t)] * g;
            if (wk) ks->g[static_cast<size_t>(t)] += xs->v[sidx] * g;
          }
        }
      }
    }
  });
  return out;
}

/// Separable 2-D Gaussian smoothing: 1-D kernel along W, then along H.
template <typename T>
Tensor<T> separable_filter(const Tensor<T>& x, const Tensor<T>& kernel) {
  return depthwise_filter_1d(depthwise_filter_1d(x, kernel, Axis2d::W), kernel, Axis2d::H);
}

template <typename T>
Tensor<T> low_pass(const Tensor<T>& x, const Tensor<T>& kernel) {
  return separable_filter(x, kernel);
}

/// Complement form: keeps whatever the low pass removes, so the two bands
/// add back to the input.
template <typename T>
Tensor<T> high_pass(const Tensor<T>& x, const Tensor<T>& kernel) {
  return sub(x, separable_filter(x, kernel));
}

template <typename T>
Tensor<T> low_pass(const Tensor<T>& x, const GaussianSpec& spec) {
  spec.validate();
  if (spec.mode != PassMode::LowPass) throw ShapeError("low_pass: spec.mode is not LowPass");
  auto k = Tensor<T>::from({spec.kernel_size}, gaussian_kernel_1d<T>(spec.kernel_size, static_cast<T>(spec.sigma)));
  return low_pass(x, k);
}

template <typename T>
Tensor<T> high_pass(const Tensor<T>& x, const GaussianSpec& spec) {
  spec.validate();
  if (spec.mode != PassMode::HighPass) throw ShapeError("high_pass: spec.mode is not HighPass");
  auto k = Tensor<T>::from({spec.kernel_size}, gaussian_kernel_1d<T>(spec.kernel_size, static_cast<T>(spec.sigma)));
  return high_pass(x, k);
}

}  // namespace fdnet
