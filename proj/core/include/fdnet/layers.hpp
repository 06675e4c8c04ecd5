#pragma once

#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fdnet/tensor.hpp"

namespace fdnet {

enum class Mode { Train, Eval };
enum class PaddingMode { Zeros, Reflect };

namespace detail {

// Reflect-101 index mapping (no edge repetition): -1 -> 1, n -> n-2.
inline int64_t reflect_index(int64_t i, int64_t n) {
  if (i < 0) return -i;
  if (i >= n) return 2 * n - 2 - i;
  return i;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// im2col (per-sample [K, S] column buffers)
// ---------------------------------------------------------------------------

namespace detail {

struct ConvGeometry {
  int64_t C, H, W, kh, kw, stride, pad, OH, OW;
  PaddingMode pm;
};

/// Gathers one sample's patches into columns [K, S] with K = C*kh*kw and
/// S = OH*OW. Row (c,dy,dx) holds that tap across all output positions, so
/// writes are contiguous and stride-1 interiors reduce to copies.
template <typename T>
void im2col_sample(const T* sample, T* cols, const ConvGeometry& g) {
  const int64_t S = g.OH * g.OW;
  for (int64_t c = 0; c < g.C; ++c) {
    const T* plane = sample + c * g.H * g.W;
    for (int64_t dy = 0; dy < g.kh; ++dy) {
      for (int64_t dx = 0; dx < g.kw; ++dx) {
        T* dst = cols + ((c * g.kh + dy) * g.kw + dx) * S;
        const int64_t w0 = dx - g.pad;
        for (int64_t oh = 0; oh < g.OH; ++oh, dst += g.OW) {
          const int64_t h = oh * g.stride - g.pad + dy;
          const bool h_in = h >= 0 && h < g.H;
          if (!h_in && g.pm == PaddingMode::Zeros) {
            for (int64_t ow = 0; ow < g.OW; ++ow) dst[ow] = T(0);
            continue;
          }
          const T* src = plane + (h_in ? h : reflect_index(h, g.H)) * g.W;
          if (g.stride == 1) {
            const int64_t lo = std::max<int64_t>(0, -w0);
            const int64_t hi = std::min(g.OW, g.W - w0);
            if (g.pm == PaddingMode::Zeros) {
              for (int64_t ow = 0; ow < lo; ++ow) dst[ow] = T(0);
              for (int64_t ow = hi; ow < g.OW; ++ow) dst[ow] = T(0);
            } else {
              for (int64_t ow = 0; ow < lo; ++ow) dst[ow] = src[reflect_index(w0 + ow, g.W)];
              for (int64_t ow = hi; ow < g.OW; ++ow) dst[ow] = src[reflect_index(w0 + ow, g.W)];
            }
            for (int64_t ow = lo; ow < hi; ++ow) dst[ow] = src[w0 + ow];
          } else {
            for (int64_t ow = 0; ow < g.OW; ++ow) {
              const int64_t w = ow * g.stride + w0;
              if (w >= 0 && w < g.W) {
                dst[ow] = src[w];
              } else {
                dst[ow] = g.pm == PaddingMode::Zeros ? T(0) : src[reflect_index(w, g.W)];
              }
            }
          }
        }
      }
    }
  }
}

/// Scatter-add of column gradients back onto one sample, inverse of
/// im2col_sample.
template <typename T>
void col2im_sample(const T* cols, T* sample_grad, const ConvGeometry& g) {
  const int64_t S = g.OH * g.OW;
  for (int64_t c = 0; c < g.C; ++c) {
    T* plane = sample_grad + c * g.H * g.W;
    for (int64_t dy = 0; dy < g.kh; ++dy) {
      for (int64_t dx = 0; dx < g.kw; ++dx) {
        const T* src = cols + ((c * g.kh + dy) * g.kw + dx) * S;
        const int64_t w0 = dx - g.pad;
        for (int64_t oh = 0; oh < g.OH; ++oh, src += g.OW) {
          const int64_t h = oh * g.stride - g.pad + dy;
          const bool h_in = h >= 0 && h < g.H;
          if (!h_in && g.pm == PaddingMode::Zeros) continue;
          T* dst = plane + (h_in ? h : reflect_index(h, g.H)) * g.W;
          for (int64_t ow = 0; ow < g.OW; ++ow) {
            const int64_t w = ow * g.stride + w0;
            if (w >= 0 && w < g.W) {
              dst[w] += src[ow];
            } else if (g.pm == PaddingMode::Reflect) {
              dst[reflect_index(w, g.W)] += src[ow];
            }
          }
        }
      }
    }
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Convolution
// ---------------------------------------------------------------------------

template <typename T>
struct Conv2d {
  Tensor<T> weight;               // [outC, inC, kh, kw]
  std::optional<Tensor<T>> bias;  // [outC]
  int64_t stride = 1;
  int64_t padding = 0;
  PaddingMode padding_mode = PaddingMode::Zeros;

  static Conv2d make(int64_t in_ch, int64_t out_ch, int64_t k, int64_t stride = 1, int64_t padding = 0,
                     bool with_bias = false, PaddingMode pm = PaddingMode::Zeros) {
    if (in_ch < 1 || out_ch < 1 || k < 1) throw ShapeError("Conv2d: channels and kernel must be positive");
    Conv2d layer;
    layer.weight = Tensor<T>::zeros({out_ch, in_ch, k, k}).set_requires_grad(true);
    if (with_bias) layer.bias = Tensor<T>::zeros({out_ch}).set_requires_grad(true);
    layer.stride = stride;
    layer.padding = padding;
    layer.padding_mode = pm;
    return layer;
  }

  int64_t out_channels() const { return weight.dim(0); }
  int64_t in_channels() const { return weight.dim(1); }
  int64_t fan_in() const { return weight.dim(1) * weight.dim(2) * weight.dim(3); }
};

/// Cross-correlation as explicit im2col + GEMM: per sample, the weight matrix
/// [outC, K] times the column buffer [K, S] lands directly in the NCHW output
/// plane. Backward reuses the stored columns and the transposed GEMM kernels.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Conv2d<T>& layer) {
  if (x.ndim() != 4) throw ShapeError("conv2d: expected [N,C,H,W], got " + shape_str(x.shape()));
  const int64_t inC = layer.weight.dim(1);
  if (x.dim(1) != inC) {
    throw ShapeError("conv2d: input has " + std::to_string(x.dim(1)) + " channels but layer expects " +
                     std::to_string(inC) + " (input " + shape_str(x.shape()) + ", weight " +
                     shape_str(layer.weight.shape()) + ")");
  }
  const int64_t N = x.dim(0), H = x.dim(2), W = x.dim(3);
  const int64_t outC = layer.weight.dim(0), kh = layer.weight.dim(2), kw = layer.weight.dim(3);
  if (layer.stride < 1 || layer.padding < 0) throw ShapeError("conv2d: bad stride/padding");
  const int64_t OH = (H + 2 * layer.padding - kh) / layer.stride + 1;
  const int64_t OW = (W + 2 * layer.padding - kw) / layer.stride + 1;
  if (H + 2 * layer.padding < kh || W + 2 * layer.padding < kw || OH < 1 || OW < 1) {
    throw ShapeError("conv2d: non-positive output size for input " + shape_str(x.shape()) + ", kernel " +
                     std::to_string(kh) + "x" + std::to_string(kw) + ", stride " +
                     std::to_string(layer.stride) + ", padding " + std::to_string(layer.padding));
  }
  if (layer.padding_mode == PaddingMode::Reflect && (layer.padding > H - 1 || layer.padding > W - 1)) {
    throw ShapeError("conv2d: reflect padding " + std::to_string(layer.padding) +
                     " needs spatial dims > padding, got " + shape_str(x.shape()));
  }

  const detail::ConvGeometry geom{inC, H,  W,  kh, kw, layer.stride, layer.padding,
                                  OH,  OW, layer.padding_mode};
  const int64_t K = inC * kh * kw;
  const int64_t S = OH * OW;

  auto out = Tensor<T>::zeros({N, outC, OH, OW});
  // Shared with the backward closure; uninitialized, im2col fills every slot.
  auto cols = std::shared_ptr<T[]>(new T[static_cast<size_t>(N * K * S)]);
  const T* xp = x.values().data();
  const T* wp = layer.weight.values().data();
  T* op = out.values_mut().data();
  for (int64_t n = 0; n < N; ++n) {
    T* cols_n = cols.get() + n * K * S;
    detail::im2col_sample(xp + n * inC * H * W, cols_n, geom);
    detail::gemm_nn(wp, cols_n, op + n * outC * S, outC, K, S);
  }
  if (layer.bias) {
    const T* bp = layer.bias->values().data();
    for (int64_t n = 0; n < N; ++n) {
      for (int64_t o = 0; o < outC; ++o) {
        T* dst = op + (n * outC + o) * S;
        const T b = bp[o];
        for (int64_t s = 0; s < S; ++s) dst[s] += b;
      }
    }
  }

  auto xs = x.storage();
  auto ws = layer.weight.storage();
  auto bs = layer.bias ? layer.bias->storage() : nullptr;
  std::vector<Tensor<T>> inputs{x, layer.weight};
  if (layer.bias) inputs.push_back(*layer.bias);
  detail::record<T>(out, inputs, [xs, ws, bs, cols, geom, N, outC, K, S](detail::Storage<T>& o) {
    const bool wx = xs->active(), ww = ws->active(), wb = bs && bs->active();
    if (wx) xs->ensure_grad();
    if (ww) ws->ensure_grad();
    if (wb) bs->ensure_grad();
    std::vector<T> dcols;
    if (wx) dcols.assign(static_cast<size_t>(K * S), T(0));
    for (int64_t n = 0; n < N; ++n) {
      const T* g_n = o.g.data() + n * outC * S;
      const T* cols_n = cols.get() + n * K * S;
      if (ww) {
        // dW[o,q] = sum_s g[o,s] * cols[q,s]
        detail::gemm_nt(g_n, cols_n, ws->g.data(), outC, S, K);
      }
      if (wb) {
        for (int64_t oc = 0; oc < outC; ++oc) {
          T acc = T(0);
          const T* row = g_n + oc * S;
          for (int64_t s = 0; s < S; ++s) acc += row[s];
          bs->g[static_cast<size_t>(oc)] += acc;
        }
      }
      if (wx) {
        std::fill(dcols.begin(), dcols.end(), T(0));
        // dcols[q,s] = sum_o W[o,q] * g[o,s]
        detail::gemm_tn(ws->v.data(), g_n, dcols.data(), K, outC, S);
        detail::col2im_sample(dcols.data(), xs->g.data() + n * geom.C * geom.H * geom.W, geom);
      }
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// Batch normalization
// ---------------------------------------------------------------------------

template <typename T>
struct BatchNorm2d {
  Tensor<T> gamma, beta;               // [C], trainable
  Tensor<T> running_mean, running_var; // [C], buffers
  double momentum = 0.1;
  double eps = 1e-5;

  static BatchNorm2d make(int64_t channels, double momentum = 0.1, double eps = 1e-5) {
    if (channels < 1) throw ShapeError("BatchNorm2d: channels must be positive");
    BatchNorm2d bn;
    bn.gamma = Tensor<T>::ones({channels}).set_requires_grad(true);
    bn.beta = Tensor<T>::zeros({channels}).set_requires_grad(true);
    bn.running_mean = Tensor<T>::zeros({channels});
    bn.running_var = Tensor<T>::ones({channels});
    bn.momentum = momentum;
    bn.eps = eps;
    return bn;
  }

  int64_t channels() const { return gamma.dim(0); }
};

/// Train mode normalizes by batch statistics (gradients flow through them)
/// and updates the running stats; eval mode normalizes by running stats and
/// is a pure per-element function of the input.
template <typename T>
Tensor<T> batchnorm2d(const Tensor<T>& x, BatchNorm2d<T>& layer, Mode mode) {
  if (x.ndim() != 4) throw ShapeError("batchnorm2d: expected [N,C,H,W], got " + shape_str(x.shape()));
  const int64_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  if (C != layer.channels()) {
    throw ShapeError("batchnorm2d: input has " + std::to_string(C) + " channels but layer has " +
                     std::to_string(layer.channels()));
  }
  const int64_t m = N * H * W;  // elements per channel
  const int64_t HW = H * W;
  auto out = Tensor<T>::zeros(x.shape());
  const T* xp = x.values().data();
  T* op = out.values_mut().data();
  const T* gam = layer.gamma.values().data();
  const T* bet = layer.beta.values().data();

  if (mode == Mode::Eval) {
    const T* rm = layer.running_mean.values().data();
    const T* rv = layer.running_var.values().data();
    std::vector<T> inv(static_cast<size_t>(C));
    for (int64_t c = 0; c < C; ++c) {
      inv[static_cast<size_t>(c)] = T(1) / std::sqrt(rv[c] + static_cast<T>(layer.eps));
    }
    for (int64_t n = 0; n < N; ++n) {
      for (int64_t c = 0; c < C; ++c) {
        const T* src = xp + (n * C + c) * HW;
        T* dst = op + (n * C + c) * HW;
        const T ic = inv[static_cast<size_t>(c)], mu = rm[c], ga = gam[c], be = bet[c];
        for (int64_t i = 0; i < HW; ++i) dst[i] = ga * (src[i] - mu) * ic + be;
      }
    }
    auto xs = x.storage();
    auto gs = layer.gamma.storage();
    auto bs = layer.beta.storage();
    auto rm_s = layer.running_mean.storage();
    auto inv_sh = std::make_shared<std::vector<T>>(std::move(inv));
    detail::record<T>(out, {x, layer.gamma, layer.beta},
                      [xs, gs, bs, rm_s, inv_sh, N, C, HW](detail::Storage<T>& o) {
                        const bool wx = xs->active(), wg = gs->active(), wb = bs->active();
                        if (wx) xs->ensure_grad();
                        if (wg) gs->ensure_grad();
                        if (wb) bs->ensure_grad();
                        for (int64_t n = 0; n < N; ++n) {
                          for (int64_t c = 0; c < C; ++c) {
                            const size_t base = static_cast<size_t>((n * C + c) * HW);
                            const T ic = (*inv_sh)[static_cast<size_t>(c)];
                            const T mu = rm_s->v[static_cast<size_t>(c)];
                            const T ga = gs->v[static_cast<size_t>(c)];
                            for (int64_t i = 0; i < HW; ++i) {
                              const T g = o.g[base + static_cast<size_t>(i)];
                              if (wx) xs->g[base + static_cast<size_t>(i)] += g * ga * ic;
                              if (wg) gs->g[static_cast<size_t>(c)] += g * (xs->v[base + static_cast<size_t>(i)] - mu) * ic;
                              if (wb) bs->g[static_cast<size_t>(c)] += g;
                            }
                          }
                        }
                      });
    return out;
  }

  // Train mode.
  if (m < 2) {
    throw ShapeError("batchnorm2d: train mode needs at least 2 elements per channel, got N*H*W = " +
                     std::to_string(m));
  }
  std::vector<T> mu(static_cast<size_t>(C), T(0)), var(static_cast<size_t>(C), T(0)),
      inv(static_cast<size_t>(C), T(0));
  std::vector<T> xhat(static_cast<size_t>(x.numel()));
  for (int64_t c = 0; c < C; ++c) {
    T acc = T(0);
    for (int64_t n = 0; n < N; ++n) {
      const T* src = xp + (n * C + c) * HW;
      for (int64_t i = 0; i < HW; ++i) acc += src[i];
    }
    const T mc = acc / static_cast<T>(m);
    T vacc = T(0);
    for (int64_t n = 0; n < N; ++n) {
      const T* src = xp + (n * C + c) * HW;
      for (int64_t i = 0; i < HW; ++i) {
        const T d = src[i] - mc;
        vacc += d * d;
      }
    }
    const T vc = vacc / static_cast<T>(m);  // biased, used for normalization
    mu[static_cast<size_t>(c)] = mc;
    var[static_cast<size_t>(c)] = vc;
    inv[static_cast<size_t>(c)] = T(1) / std::sqrt(vc + static_cast<T>(layer.eps));
  }
  for (int64_t n = 0; n < N; ++n) {
    for (int64_t c = 0; c < C; ++c) {
      const T* src = xp + (n * C + c) * HW;
      T* dst = op + (n * C + c) * HW;
      T* xh = xhat.data() + (n * C + c) * HW;
      const T mc = mu[static_cast<size_t>(c)], ic = inv[static_cast<size_t>(c)];
      const T ga = gam[c], be = bet[c];
      for (int64_t i = 0; i < HW; ++i) {
        const T h = (src[i] - mc) * ic;
        xh[i] = h;
        dst[i] = ga * h + be;
      }
    }
  }

  // Running stats update (unbiased variance), outside the tape.
  {
    T* rm = layer.running_mean.values_mut().data();
    T* rv = layer.running_var.values_mut().data();
    const T mom = static_cast<T>(layer.momentum);
    const T unbias = static_cast<T>(m) / static_cast<T>(m - 1);
    for (int64_t c = 0; c < C; ++c) {
      rm[c] = (T(1) - mom) * rm[c] + mom * mu[static_cast<size_t>(c)];
      rv[c] = (T(1) - mom) * rv[c] + mom * var[static_cast<size_t>(c)] * unbias;
    }
  }

  auto xs = x.storage();
  auto gs = layer.gamma.storage();
  auto bs = layer.beta.storage();
  auto xhat_sh = std::make_shared<std::vector<T>>(std::move(xhat));
  auto inv_sh = std::make_shared<std::vector<T>>(std::move(inv));
  detail::record<T>(out, {x, layer.gamma, layer.beta},
                    [xs, gs, bs, xhat_sh, inv_sh, N, C, HW, m](detail::Storage<T>& o) {
                      const auto& xh = *xhat_sh;
                      const bool wx = xs->active(), wg = gs->active(), wb = bs->active();
                      if (wx) xs->ensure_grad();
                      if (wg) gs->ensure_grad();
                      if (wb) bs->ensure_grad();
                      for (int64_t c = 0; c < C; ++c) {
                        const T ga = gs->v[static_cast<size_t>(c)];
                        const T ic = (*inv_sh)[static_cast<size_t>(c)];
                        // Channel-level reductions over dxhat.
                        T sum_dxh = T(0), sum_dxh_xh = T(0), sum_g = T(0);
                        for (int64_t n = 0; n < N; ++n) {
                          const size_t base = static_cast<size_t>((n * C + c) * HW);
                          for (int64_t i = 0; i < HW; ++i) {
                            const T g = o.g[base + static_cast<size_t>(i)];
                            const T dxh = g * ga;
                            sum_g += g;
                            sum_dxh += dxh;
                            sum_dxh_xh += dxh * xh[base + static_cast<size_t>(i)];
                          }
                        }
                        if (wg || wb) {
                          T dgamma = T(0);
                          for (int64_t n = 0; n < N && wg; ++n) {
                            const size_t base = static_cast<size_t>((n * C + c) * HW);
                            for (int64_t i = 0; i < HW; ++i) {
                              dgamma += o.g[base + static_cast<size_t>(i)] * xh[base + static_cast<size_t>(i)];
                            }
                          }
                          if (wg) gs->g[static_cast<size_t>(c)] += dgamma;
                          if (wb) bs->g[static_cast<size_t>(c)] += sum_g;
                        }
                        if (wx) {
                          const T inv_m = T(1) / static_cast<T>(m);
                          for (int64_t n = 0; n < N; ++n) {
                            const size_t base = static_cast<size_t>((n * C + c) * HW);
                            for (int64_t i = 0; i < HW; ++i) {
                              const T g = o.g[base + static_cast<size_t>(i)];
                              const T dxh = g * ga;
                              xs->g[base + static_cast<size_t>(i)] +=
                                  ic * (dxh - inv_m * sum_dxh -
                                        xh[base + static_cast<size_t>(i)] * inv_m * sum_dxh_xh);
                            }
                          }
                        }
                      }
                    });
  return out;
}

// ---------------------------------------------------------------------------
// Activations and pooling
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  auto out = Tensor<T>::zeros(x.shape());
  const T* xp = x.values().data();
  T* op = out.values_mut().data();
  const int64_t n = x.numel();
  for (int64_t i = 0; i < n; ++i) op[i] = xp[i] > T(0) ? xp[i] : T(0);
  auto xs = x.storage();
  detail::record<T>(out, {x}, [xs, n](detail::Storage<T>& o) {
    xs->ensure_grad();
    for (int64_t i = 0; i < n; ++i) {
      if (xs->v[static_cast<size_t>(i)] > T(0)) xs->g[static_cast<size_t>(i)] += o.g[static_cast<size_t>(i)];
    }
  });
  return out;
}

template <typename T>
Tensor<T> max_pool2d(const Tensor<T>& x, int64_t k, int64_t stride) {
  if (x.ndim() != 4) throw ShapeError("max_pool2d: expected [N,C,H,W], got " + shape_str(x.shape()));
  if (k < 1 || stride < 1) throw ShapeError("max_pool2d: kernel and stride must be positive");
  const int64_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  if (k > H || k > W) {
    throw ShapeError("max_pool2d: window " + std::to_string(k) + " larger than input " + shape_str(x.shape()));
  }
  const int64_t OH = (H - k) / stride + 1;
  const int64_t OW = (W - k) / stride + 1;
  auto out = Tensor<T>::zeros({N, C, OH, OW});
  std::vector<int64_t> argmax(static_cast<size_t>(out.numel()));
  const T* xp = x.values().data();
  T* op = out.values_mut().data();
  int64_t oi = 0;
  for (int64_t n = 0; n < N; ++n) {
    for (int64_t c = 0; c < C; ++c) {
      const T* plane = xp + (n * C + c) * H * W;
      const int64_t plane_off = (n * C + c) * H * W;
      for (int64_t oh = 0; oh < OH; ++oh) {
        for (int64_t ow = 0; ow < OW; ++ow, ++oi) {
          T best = plane[(oh * stride) * W + (ow * stride)];
          int64_t best_idx = (oh * stride) * W + (ow * stride);
          for (int64_t dy = 0; dy < k; ++dy) {
            for (int64_t dx = 0; dx < k; ++dx) {
              const int64_t idx = (oh * stride + dy) * W + (ow * stride + dx);
              if (plane[idx] > best) {  // first max wins ties: deterministic routing
                best = plane[idx];
                best_idx = idx;
              }
            }
          }
          op[oi] = best;
          argmax[static_cast<size_t>(oi)] = plane_off + best_idx;
        }
      }
    }
  }
  auto xs = x.storage();
  auto am = std::make_shared<std::vector<int64_t>>(std::move(argmax));
  detail::record<T>(out, {x}, [xs, am](detail::Storage<T>& o) {
    xs->ensure_grad();
    const auto& a = *am;
    for (size_t i = 0; i < a.size(); ++i) xs->g[static_cast<size_t>(a[i])] += o.g[i];
  });
  return out;
}

/// Spatial mean per channel: [N,C,H,W] -> [N,C].
template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& x) {
  if (x.ndim() != 4) throw ShapeError("global_avg_pool: expected [N,C,H,W], got " + shape_str(x.shape()));
  const int64_t N = x.dim(0), C = x.dim(1), HW = x.dim(2) * x.dim(3);
  auto out = Tensor<T>::zeros({N, C});
  const T* xp = x.values().data();
  T* op = out.values_mut().data();
  for (int64_t nc = 0; nc < N * C; ++nc) {
    T acc = T(0);
    const T* src = xp + nc * HW;
    for (int64_t i = 0; i < HW; ++i) acc += src[i];
    op[nc] = acc / static_cast<T>(HW);
  }
  auto xs = x.storage();
  detail::record<T>(out, {x}, [xs, N, C, HW](detail::Storage<T>& o) {
    xs->ensure_grad();
    const T scale = T(1) / static_cast<T>(HW);
    for (int64_t nc = 0; nc < N * C; ++nc) {
      const T g = o.g[static_cast<size_t>(nc)] * scale;
      T* dst = xs->g.data() + nc * HW;
      for (int64_t i = 0; i < HW; ++i) dst[i] += g;
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// Fully connected
// ---------------------------------------------------------------------------

template <typename T>
struct Linear {
  Tensor<T> weight;  // [out, in]
  Tensor<T> bias;    // [out]

  static Linear make(int64_t in_features, int64_t out_features) {
    if (in_features < 1 || out_features < 1) throw ShapeError("Linear: feature counts must be positive");
    Linear l;
    l.weight = Tensor<T>::zeros({out_features, in_features}).set_requires_grad(true);
    l.bias = Tensor<T>::zeros({out_features}).set_requires_grad(true);
    return l;
  }

  int64_t in_features() const { return weight.dim(1); }
  int64_t out_features() const { return weight.dim(0); }
};

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Linear<T>& layer) {
  if (x.ndim() != 2 || x.dim(1) != layer.in_features()) {
    throw ShapeError("linear: input " + shape_str(x.shape()) + " incompatible with weight " +
                     shape_str(layer.weight.shape()));
  }
  return add(matmul(x, transpose2d(layer.weight)), layer.bias);
}

// ---------------------------------------------------------------------------
// Cross-entropy
// ---------------------------------------------------------------------------

/// Mean over the batch of -log softmax(logits)[label], stabilized with
/// log-sum-exp. Backward is (softmax - onehot)/N.
template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, const std::vector<int>& labels) {
  if (logits.ndim() != 2) throw ShapeError("cross_entropy: expected [N,K] logits, got " + shape_str(logits.shape()));
  const int64_t N = logits.dim(0), K = logits.dim(1);
  if (static_cast<int64_t>(labels.size()) != N) {
    throw ShapeError("cross_entropy: " + std::to_string(labels.size()) + " labels for batch of " +
                     std::to_string(N));
  }
  for (int64_t i = 0; i < N; ++i) {
    if (labels[static_cast<size_t>(i)] < 0 || labels[static_cast<size_t>(i)] >= K) {
      throw ShapeError("cross_entropy: label " + std::to_string(labels[static_cast<size_t>(i)]) +
                       " out of range [0," + std::to_string(K) + ") at row " + std::to_string(i));
    }
  }

  const T* lp = logits.values().data();
  std::vector<T> probs(static_cast<size_t>(N * K));
  T loss_acc = T(0);
  for (int64_t i = 0; i < N; ++i) {
    const T* row = lp + i * K;
    T mx = row[0];
    for (int64_t k = 1; k < K; ++k) mx = std::max(mx, row[k]);
    T sum = T(0);
    for (int64_t k = 0; k < K; ++k) {
      const T e = std::exp(row[k] - mx);
      probs[static_cast<size_t>(i * K + k)] = e;
      sum += e;
    }
    const T lse = mx + std::log(sum);
    for (int64_t k = 0; k < K; ++k) probs[static_cast<size_t>(i * K + k)] /= sum;
    loss_acc += lse - row[labels[static_cast<size_t>(i)]];
  }
  auto out = Tensor<T>::scalar(loss_acc / static_cast<T>(N));

  auto ls = logits.storage();
  auto probs_sh = std::make_shared<std::vector<T>>(std::move(probs));
  auto labels_sh = std::make_shared<std::vector<int>>(labels);
  detail::record<T>(out, {logits}, [ls, probs_sh, labels_sh, N, K](detail::Storage<T>& o) {
    ls->ensure_grad();
    const T g = o.g[0] / static_cast<T>(N);
    const auto& p = *probs_sh;
    const auto& lab = *labels_sh;
    for (int64_t i = 0; i < N; ++i) {
      for (int64_t k = 0; k < K; ++k) {
        const T onehot = (k == lab[static_cast<size_t>(i)]) ? T(1) : T(0);
        ls->g[static_cast<size_t>(i * K + k)] += g * (p[static_cast<size_t>(i * K + k)] - onehot);
      }
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// Initialization
// ---------------------------------------------------------------------------

/// He-normal fill: std = sqrt(2 / fan_in).
template <typename T>
void he_normal_fill(Tensor<T>& w, int64_t fan_in, Rng& rng) {
  const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
  for (T& x : w.values_mut()) x = static_cast<T>(rng.normal() * stddev);
}

}  // namespace fdnet
