#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <type_traits>
#include <unordered_set>
#include <utility>
#include <vector>

#include "fdnet/common.hpp"
#include "fdnet/rng.hpp"

namespace fdnet {

namespace autograd {
// Tape recording switch for the current thread.
inline thread_local bool enabled = true;
}  // namespace autograd

/// Disables tape recording for the current scope (inference, preprocessing).
struct NoGradGuard {
  bool prev;
  NoGradGuard() : prev(autograd::enabled) { autograd::enabled = false; }
  ~NoGradGuard() { autograd::enabled = prev; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;
};

template <typename T>
class Tensor;

namespace detail {

template <typename T>
struct Storage;

/// One recorded operation. `inputs` keeps producer storages alive for the
/// reverse pass; `backward` reads the output's grad and accumulates into the
/// inputs' grads.
template <typename T>
struct Node {
  std::vector<std::shared_ptr<Storage<T>>> inputs;
  std::function<void(Storage<T>&)> backward;
};

template <typename T>
struct Storage {
  Shape shape;
  std::vector<T> v;
  std::vector<T> g;  // empty until a backward pass reaches this tensor
  bool requires_grad = false;
  std::shared_ptr<Node<T>> node;  // creator; null for leaves

  int64_t numel() const { return static_cast<int64_t>(v.size()); }
  bool active() const { return requires_grad || node != nullptr; }
  void ensure_grad() {
    if (g.size() != v.size()) g.assign(v.size(), T(0));
  }
};

}  // namespace detail

/// Dense n-dimensional array with reverse-mode autodiff. Value semantics:
/// copies share the underlying storage (and therefore the grad). Scalars are
/// rank-0 (shape []). Precision is the template parameter: double for
/// gradient checks, float for training.
template <typename T>
class Tensor {
  static_assert(std::is_floating_point_v<T>, "Tensor requires float or double");

 public:
  using StoragePtr = std::shared_ptr<detail::Storage<T>>;

  Tensor() : s_(std::make_shared<detail::Storage<T>>()) {}
  explicit Tensor(StoragePtr s) : s_(std::move(s)) {}

  static Tensor full(const Shape& shape, T value) {
    for (int64_t d : shape) {
      if (d <= 0) throw ShapeError("tensor dimensions must be positive, got " + shape_str(shape));
    }
    auto s = std::make_shared<detail::Storage<T>>();
    s->shape = shape;
    s->v.assign(static_cast<size_t>(numel_of(shape)), value);
    return Tensor(std::move(s));
  }
  static Tensor zeros(const Shape& shape) { return full(shape, T(0)); }
  static Tensor ones(const Shape& shape) { return full(shape, T(1)); }
  static Tensor zeros_like(const Tensor& t) { return zeros(t.shape()); }

  static Tensor from(const Shape& shape, std::vector<T> data) {
    if (numel_of(shape) != static_cast<int64_t>(data.size())) {
      throw ShapeError("data size " + std::to_string(data.size()) + " does not match shape " +
                       shape_str(shape));
    }
    auto s = std::make_shared<detail::Storage<T>>();
    s->shape = shape;
    s->v = std::move(data);
    return Tensor(std::move(s));
  }

  static Tensor scalar(T value) { return from({}, {value}); }

  const Shape& shape() const { return s_->shape; }
  int64_t dim(size_t i) const { return s_->shape.at(i); }
  size_t ndim() const { return s_->shape.size(); }
  int64_t numel() const { return s_->numel(); }

  std::span<const T> values() const { return {s_->v.data(), s_->v.size()}; }
  /// Mutable access for loaders, initializers, and optimizer updates. Only
  /// meaningful on leaves; mutating a recorded intermediate invalidates its tape.
  std::span<T> values_mut() { return {s_->v.data(), s_->v.size()}; }

  T value() const {
    if (numel() != 1) throw ShapeError("value() requires a scalar, got shape " + shape_str(shape()));
    return s_->v[0];
  }

  T at(std::initializer_list<int64_t> idx) const { return s_->v[static_cast<size_t>(flat_index(idx))]; }

  int64_t flat_index(std::initializer_list<int64_t> idx) const {
    if (idx.size() != s_->shape.size()) {
      throw ShapeError("index rank " + std::to_string(idx.size()) + " does not match shape " +
                       shape_str(shape()));
    }
    int64_t flat = 0;
    size_t k = 0;
    for (int64_t i : idx) {
      if (i < 0 || i >= s_->shape[k]) throw ShapeError("index out of range for shape " + shape_str(shape()));
      flat = flat * s_->shape[k] + i;
      ++k;
    }
    return flat;
  }

  bool requires_grad() const { return s_->requires_grad; }
  Tensor& set_requires_grad(bool on = true) {
    s_->requires_grad = on;
    return *this;
  }

  bool has_grad() const { return !s_->g.empty(); }
  std::span<const T> grad() const {
    if (s_->g.empty()) throw ShapeError("grad() called but no gradient has been accumulated");
    return {s_->g.data(), s_->g.size()};
  }
  std::span<T> grad_mut() {
    s_->ensure_grad();
    return {s_->g.data(), s_->g.size()};
  }
  void zero_grad() { s_->g.clear(); }

  /// Deep copy of the values, detached from any tape.
  Tensor clone_detached() const {
    auto s = std::make_shared<detail::Storage<T>>();
    s->shape = s_->shape;
    s->v = s_->v;
    return Tensor(std::move(s));
  }

  bool is_leaf() const { return s_->node == nullptr; }

  /// Reverse pass from a scalar. Traverses the tape once in reverse
  /// topological order, accumulating (+=) into grads, then frees the tape.
  void backward() {
    auto& loss = *s_;
    if (loss.numel() != 1) {
      throw ShapeError("backward() requires a scalar loss, got shape " + shape_str(loss.shape));
    }
    if (!loss.node) {
      throw ShapeError("backward() called on a tensor with no recorded tape");
    }

    // Post-order DFS over storages that have creator nodes.
    std::vector<detail::Storage<T>*> order;
    std::unordered_set<detail::Storage<T>*> visited;
    struct Frame {
      detail::Storage<T>* s;
      size_t next_child;
    };
    std::vector<Frame> stack;
    stack.push_back({&loss, 0});
    visited.insert(&loss);
    while (!stack.empty()) {
      Frame& fr = stack.back();
      auto& node = *fr.s->node;
      if (fr.next_child < node.inputs.size()) {
        detail::Storage<T>* child = node.inputs[fr.next_child++].get();
        if (child->node && !visited.count(child)) {
          visited.insert(child);
          stack.push_back({child, 0});
        }
      } else {
        order.push_back(fr.s);
        stack.pop_back();
      }
    }

    loss.ensure_grad();
    loss.g[0] += T(1);

    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      detail::Storage<T>& s = **it;
      s.ensure_grad();  // zero contribution if nothing reached it
      s.node->backward(s);
    }
    // Tape is per-forward-pass: release nodes so intermediates can die and a
    // second backward on the same graph fails loudly.
    for (detail::Storage<T>* s : order) s->node.reset();
  }

  StoragePtr storage() const { return s_; }

 private:
  StoragePtr s_;
};

using Tensor32 = Tensor<float>;
using Tensor64 = Tensor<double>;

/// A learnable tensor with its canonical name and role (the role drives
/// weight-decay policy and initialization).
enum class ParamKind { ConvWeight, LinearWeight, Gamma, Beta, Bias, SigmaRaw };

template <typename T>
struct NamedParam {
  std::string name;
  Tensor<T> tensor;
  ParamKind kind = ParamKind::ConvWeight;
};

namespace detail {

template <typename T>
inline void record(const Tensor<T>& out, std::vector<Tensor<T>> inputs,
                   std::function<void(Storage<T>&)> backward) {
  if (!autograd::enabled) return;
  bool any_active = false;
  for (const auto& in : inputs) {
    if (in.storage()->active()) {
      any_active = true;
      break;
    }
  }
  if (!any_active) return;
  auto node = std::make_shared<Node<T>>();
  node->inputs.reserve(inputs.size());
  for (auto& in : inputs) node->inputs.push_back(in.storage());
  node->backward = std::move(backward);
  out.storage()->node = std::move(node);
}

template <typename T>
inline void accumulate(Storage<T>& s, const std::vector<T>& delta) {
  s.ensure_grad();
  for (size_t i = 0; i < delta.size(); ++i) s.g[i] += delta[i];
}

// ---------------------------------------------------------------------------
// GEMM kernels. The one hot loop of the engine; loop orders are chosen so the
// innermost loop runs over contiguous memory and auto-vectorizes.
// ---------------------------------------------------------------------------

// C[m,n] += A[m,k] * B[k,n]
template <typename T>
void gemm_nn(const T* A, const T* B, T* C, int64_t m, int64_t k, int64_t n) {
  for (int64_t i = 0; i < m; ++i) {
    T* c = C + i * n;
    const T* a = A + i * k;
    for (int64_t p = 0; p < k; ++p) {
      const T av = a[p];
      const T* b = B + p * n;
      for (int64_t j = 0; j < n; ++j) c[j] += av * b[j];
    }
  }
}

// C[m,n] += A[m,k] * B[n,k]^T   (rows of A dotted with rows of B)
template <typename T>
void gemm_nt(const T* A, const T* B, T* C, int64_t m, int64_t k, int64_t n) {
  for (int64_t i = 0; i < m; ++i) {
    const T* a = A + i * k;
    T* c = C + i * n;
    for (int64_t j = 0; j < n; ++j) {
      const T* b = B + j * k;
      T acc = T(0);
      for (int64_t p = 0; p < k; ++p) acc += a[p] * b[p];
      c[j] += acc;
    }
  }
}

// C[m,n] += A[k,m]^T * B[k,n]
template <typename T>
void gemm_tn(const T* A, const T* B, T* C, int64_t m, int64_t k, int64_t n) {
  for (int64_t p = 0; p < k; ++p) {
    const T* a = A + p * m;
    const T* b = B + p * n;
    for (int64_t i = 0; i < m; ++i) {
      const T av = a[i];
      T* c = C + i * n;
      for (int64_t j = 0; j < n; ++j) c[j] += av * b[j];
    }
  }
}

// Broadcast classification for elementwise ops: shapes must be equal, or the
// smaller shape must be a suffix of the larger (bias add, leading batch dims).
// Anything richer is rejected.
enum class Bcast { Equal, SmallIsB, SmallIsA };

inline bool is_suffix(const Shape& small, const Shape& big) {
  if (small.size() > big.size()) return false;
  const size_t off = big.size() - small.size();
  for (size_t i = 0; i < small.size(); ++i) {
    if (small[i] != big[off + i]) return false;
  }
  return true;
}

inline Bcast classify_broadcast(const char* op, const Shape& a, const Shape& b) {
  if (a == b) return Bcast::Equal;
  if (is_suffix(b, a)) return Bcast::SmallIsB;
  if (is_suffix(a, b)) return Bcast::SmallIsA;
  throw ShapeError(std::string(op) + ": shapes " + shape_str(a) + " and " + shape_str(b) +
                   " are neither equal nor trailing-aligned");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise arithmetic with trailing-dim broadcast
// ---------------------------------------------------------------------------

namespace detail {

// combine(av, bv) -> out; dba/dbb produce the two partial derivatives.
template <typename T, typename FwdFn, typename BwdFn>
Tensor<T> binary_ewise(const char* name, const Tensor<T>& a, const Tensor<T>& b, FwdFn fwd, BwdFn bwd) {
  const Bcast kind = classify_broadcast(name, a.shape(), b.shape());
  const Tensor<T>& big = (kind == Bcast::SmallIsA) ? b : a;
  const Tensor<T>& small = (kind == Bcast::SmallIsA) ? a : b;
  const bool a_is_big = (kind != Bcast::SmallIsA);

  const int64_t n = big.numel();
  const int64_t m = small.numel();
  auto out = Tensor<T>::zeros(big.shape());
  {
    const T* bp = big.values().data();
    const T* sp = small.values().data();
    T* op = out.values_mut().data();
    for (int64_t i = 0; i < n; ++i) {
      const T bv = bp[i];
      const T sv = sp[i % m];
      op[i] = a_is_big ? fwd(bv, sv) : fwd(sv, bv);
    }
  }

  auto big_s = big.storage();
  auto small_s = small.storage();
  detail::record<T>(out, {a, b}, [big_s, small_s, a_is_big, n, m, bwd](Storage<T>& o) {
    const bool want_big = big_s->active();
    const bool want_small = small_s->active();
    if (want_big) big_s->ensure_grad();
    if (want_small) small_s->ensure_grad();
    for (int64_t i = 0; i < n; ++i) {
      const T g = o.g[static_cast<size_t>(i)];
      const T bv = big_s->v[static_cast<size_t>(i)];
      const T sv = small_s->v[static_cast<size_t>(i % m)];
      const T av = a_is_big ? bv : sv;
      const T bv2 = a_is_big ? sv : bv;
      T da, db;
      bwd(av, bv2, g, da, db);
      const T dbig = a_is_big ? da : db;
      const T dsmall = a_is_big ? db : da;
      if (want_big) big_s->g[static_cast<size_t>(i)] += dbig;
      if (want_small) small_s->g[static_cast<size_t>(i % m)] += dsmall;
    }
  });
  return out;
}

}  // namespace detail

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  return detail::binary_ewise<T>(
      "add", a, b, [](T x, T y) { return x + y; },
      [](T, T, T g, T& da, T& db) {
        da = g;
        db = g;
      });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  return detail::binary_ewise<T>(
      "sub", a, b, [](T x, T y) { return x - y; },
      [](T, T, T g, T& da, T& db) {
        da = g;
        db = -g;
      });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  return detail::binary_ewise<T>(
      "mul", a, b, [](T x, T y) { return x * y; },
      [](T x, T y, T g, T& da, T& db) {
        da = g * y;
        db = g * x;
      });
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& a, T c) {
  auto out = Tensor<T>::zeros(a.shape());
  const T* ap = a.values().data();
  T* op = out.values_mut().data();
  const int64_t n = a.numel();
  for (int64_t i = 0; i < n; ++i) op[i] = ap[i] + c;
  auto as = a.storage();
  detail::record<T>(out, {a}, [as, n](detail::Storage<T>& o) {
    as->ensure_grad();
    for (int64_t i = 0; i < n; ++i) as->g[static_cast<size_t>(i)] += o.g[static_cast<size_t>(i)];
  });
  return out;
}

template <typename T>
Tensor<T> mul_scalar(const Tensor<T>& a, T c) {
  auto out = Tensor<T>::zeros(a.shape());
  const T* ap = a.values().data();
  T* op = out.values_mut().data();
  const int64_t n = a.numel();
  for (int64_t i = 0; i < n; ++i) op[i] = ap[i] * c;
  auto as = a.storage();
  detail::record<T>(out, {a}, [as, n, c](detail::Storage<T>& o) {
    as->ensure_grad();
    for (int64_t i = 0; i < n; ++i) as->g[static_cast<size_t>(i)] += c * o.g[static_cast<size_t>(i)];
  });
  return out;
}

template <typename T>
Tensor<T> neg(const Tensor<T>& a) {
  return mul_scalar(a, T(-1));
}

template <typename T>
Tensor<T> operator+(const Tensor<T>& a, const Tensor<T>& b) {
  return add(a, b);
}
template <typename T>
Tensor<T> operator-(const Tensor<T>& a, const Tensor<T>& b) {
  return sub(a, b);
}
template <typename T>
Tensor<T> operator*(const Tensor<T>& a, const Tensor<T>& b) {
  return mul(a, b);
}
template <typename T>
Tensor<T> operator*(const Tensor<T>& a, T c) {
  return mul_scalar(a, c);
}
template <typename T>
Tensor<T> operator*(T c, const Tensor<T>& a) {
  return mul_scalar(a, c);
}

// ---------------------------------------------------------------------------
// Matrix product and layout ops
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.ndim() != 2 || b.ndim() != 2) {
    throw ShapeError("matmul: expected 2-d operands, got " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()));
  }
  const int64_t m = a.dim(0), k = a.dim(1), k2 = b.dim(0), n = b.dim(1);
  if (k != k2) {
    throw ShapeError("matmul: inner dimensions differ, " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
  auto out = Tensor<T>::zeros({m, n});
  detail::gemm_nn(a.values().data(), b.values().data(), out.values_mut().data(), m, k, n);

  auto as = a.storage();
  auto bs = b.storage();
  detail::record<T>(out, {a, b}, [as, bs, m, k, n](detail::Storage<T>& o) {
    if (as->active()) {
      as->ensure_grad();
      // dA = G * B^T
      detail::gemm_nt(o.g.data(), bs->v.data(), as->g.data(), m, n, k);
    }
    if (bs->active()) {
      bs->ensure_grad();
      // dB = A^T * G
      detail::gemm_tn(as->v.data(), o.g.data(), bs->g.data(), k, m, n);
    }
  });
  return out;
}

template <typename T>
Tensor<T> transpose2d(const Tensor<T>& a) {
  if (a.ndim() != 2) throw ShapeError("transpose2d: expected 2-d tensor, got " + shape_str(a.shape()));
  const int64_t r = a.dim(0), c = a.dim(1);
  auto out = Tensor<T>::zeros({c, r});
  const T* ap = a.values().data();
  T* op = out.values_mut().data();
  for (int64_t i = 0; i < r; ++i)
    for (int64_t j = 0; j < c; ++j) op[j * r + i] = ap[i * c + j];
  auto as = a.storage();
  detail::record<T>(out, {a}, [as, r, c](detail::Storage<T>& o) {
    as->ensure_grad();
    for (int64_t i = 0; i < r; ++i)
      for (int64_t j = 0; j < c; ++j) as->g[static_cast<size_t>(i * c + j)] += o.g[static_cast<size_t>(j * r + i)];
  });
  return out;
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, const Shape& shape) {
  if (numel_of(shape) != a.numel()) {
    throw ShapeError("reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(shape));
  }
  auto out = Tensor<T>::from(shape, std::vector<T>(a.values().begin(), a.values().end()));
  auto as = a.storage();
  const int64_t n = a.numel();
  detail::record<T>(out, {a}, [as, n](detail::Storage<T>& o) {
    as->ensure_grad();
    for (int64_t i = 0; i < n; ++i) as->g[static_cast<size_t>(i)] += o.g[static_cast<size_t>(i)];
  });
  return out;
}

template <typename T>
Tensor<T> permute(const Tensor<T>& a, const std::vector<size_t>& axes) {
  const size_t r = a.ndim();
  if (axes.size() != r) throw ShapeError("permute: axes rank mismatch for shape " + shape_str(a.shape()));
  std::vector<bool> seen(r, false);
  Shape out_shape(r);
  for (size_t i = 0; i < r; ++i) {
    if (axes[i] >= r || seen[axes[i]]) throw ShapeError("permute: invalid axes");
    seen[axes[i]] = true;
    out_shape[i] = a.shape()[axes[i]];
  }
  std::vector<int64_t> in_strides(r, 1), out_strides(r, 1);
  for (size_t i = r; i-- > 1;) in_strides[i - 1] = in_strides[i] * a.shape()[i];
  for (size_t i = r; i-- > 1;) out_strides[i - 1] = out_strides[i] * out_shape[i];

  const int64_t n = a.numel();
  // For each output flat index, the matching input flat index.
  std::vector<int64_t> src(static_cast<size_t>(n));
  std::vector<int64_t> idx(r, 0);
  for (int64_t o = 0; o < n; ++o) {
    int64_t in_flat = 0;
    for (size_t i = 0; i < r; ++i) in_flat += idx[i] * in_strides[axes[i]];
    src[static_cast<size_t>(o)] = in_flat;
    for (size_t i = r; i-- > 0;) {
      if (++idx[i] < out_shape[i]) break;
      idx[i] = 0;
    }
  }

  auto out = Tensor<T>::zeros(out_shape);
  const T* ap = a.values().data();
  T* op = out.values_mut().data();
  for (int64_t o = 0; o < n; ++o) op[o] = ap[src[static_cast<size_t>(o)]];

  auto as = a.storage();
  auto src_shared = std::make_shared<std::vector<int64_t>>(std::move(src));
  detail::record<T>(out, {a}, [as, src_shared, n](detail::Storage<T>& o) {
    as->ensure_grad();
    const auto& s = *src_shared;
    for (int64_t i = 0; i < n; ++i) as->g[static_cast<size_t>(s[static_cast<size_t>(i)])] += o.g[static_cast<size_t>(i)];
  });
  return out;
}

// ---------------------------------------------------------------------------
// Reductions and indexing
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> sum(const Tensor<T>& a) {
  T acc = T(0);
  for (T x : a.values()) acc += x;
  auto out = Tensor<T>::scalar(acc);
  auto as = a.storage();
  const int64_t n = a.numel();
  detail::record<T>(out, {a}, [as, n](detail::Storage<T>& o) {
    as->ensure_grad();
    const T g = o.g[0];
    for (int64_t i = 0; i < n; ++i) as->g[static_cast<size_t>(i)] += g;
  });
  return out;
}

template <typename T>
Tensor<T> mean(const Tensor<T>& a) {
  return mul_scalar(sum(a), T(1) / static_cast<T>(a.numel()));
}

/// Scalar view of one element; backward scatters into that position.
template <typename T>
Tensor<T> select(const Tensor<T>& a, std::initializer_list<int64_t> idx) {
  const int64_t flat = a.flat_index(idx);
  auto out = Tensor<T>::scalar(a.values()[static_cast<size_t>(flat)]);
  auto as = a.storage();
  detail::record<T>(out, {a}, [as, flat](detail::Storage<T>& o) {
    as->ensure_grad();
    as->g[static_cast<size_t>(flat)] += o.g[0];
  });
  return out;
}

// ---------------------------------------------------------------------------
// Construction helpers
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> rand_uniform(const Shape& shape, Rng& rng, double lo = 0.0, double hi = 1.0) {
  auto t = Tensor<T>::zeros(shape);
  for (T& x : t.values_mut()) x = static_cast<T>(rng.uniform(lo, hi));
  return t;
}

template <typename T>
Tensor<T> rand_normal(const Shape& shape, Rng& rng, double stddev = 1.0) {
  auto t = Tensor<T>::zeros(shape);
  for (T& x : t.values_mut()) x = static_cast<T>(rng.normal() * stddev);
  return t;
}

template <typename T>
bool all_finite(const Tensor<T>& t) {
  for (T x : t.values()) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

}  // namespace fdnet
