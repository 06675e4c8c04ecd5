#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fdnet/filters.hpp"
#include "fdnet/rng.hpp"
#include "fdnet/tensor.hpp"

namespace fdnet {

enum class Split { Train, Test };

template <typename T>
struct LabeledImageSet {
  Tensor<T> images;  // [N,C,H,W]; loaders produce values in [0,1], filtered
                     // robustness sets may exceed that range
  std::vector<int> labels;
  std::vector<std::string> class_names;
  Split split = Split::Train;

  int64_t size() const { return images.ndim() == 4 ? images.dim(0) : 0; }
  int64_t channels() const { return images.dim(1); }
  int num_classes() const { return static_cast<int>(class_names.size()); }

  void validate() const {
    if (images.ndim() != 4) throw DataError("LabeledImageSet: images must be [N,C,H,W]");
    if (static_cast<int64_t>(labels.size()) != images.dim(0)) {
      throw DataError("LabeledImageSet: " + std::to_string(labels.size()) + " labels for " +
                      std::to_string(images.dim(0)) + " images");
    }
    for (int l : labels) {
      if (l < 0 || l >= num_classes()) {
        throw DataError("LabeledImageSet: label " + std::to_string(l) + " outside [0," +
                        std::to_string(num_classes()) + ")");
      }
    }
  }
};

struct AugmentSpec {
  double flip_prob = 0.0;
  std::vector<double> mean;  // per channel; empty = no normalization
  std::vector<double> std;

  void validate(int64_t channels) const {
    if (flip_prob < 0.0 || flip_prob > 1.0) {
      throw ConfigError("AugmentSpec.flip_prob must be in [0,1], got " + std::to_string(flip_prob));
    }
    if (mean.size() != std.size()) throw ConfigError("AugmentSpec: mean/std size mismatch");
    if (!mean.empty() && static_cast<int64_t>(mean.size()) != channels) {
      throw ConfigError("AugmentSpec: normalization has " + std::to_string(mean.size()) +
                        " channels, images have " + std::to_string(channels));
    }
    for (double s : std) {
      if (!(s > 0.0)) throw ConfigError("AugmentSpec.std entries must be positive");
    }
  }
};

// ---------------------------------------------------------------------------
// Byte-level readers/writers (implemented in data_io.cpp)
// ---------------------------------------------------------------------------

namespace io {

struct RawImages {
  int64_t n = 0, c = 0, h = 0, w = 0;
  std::vector<uint8_t> pixels;  // n*c*h*w, CHW per image
  std::vector<int> labels;
};

/// CIFAR-10 binary batches: records of 3073 bytes, 1 label byte then
/// 3x1024 row-major channel planes (R, G, B).
RawImages read_cifar10_files(const std::vector<std::string>& files);
void write_cifar10_file(const std::string& path, const RawImages& data);

/// MNIST IDX pair: image magic 0x00000803, label magic 0x00000801, big-endian
/// dimension fields.
RawImages read_idx_pair(const std::string& image_file, const std::string& label_file);
void write_idx_pair(const std::string& image_file, const std::string& label_file, const RawImages& data);

std::vector<std::string> cifar10_class_names();

}  // namespace io

// ---------------------------------------------------------------------------
// Loaders
// ---------------------------------------------------------------------------

template <typename T>
LabeledImageSet<T> from_raw(const io::RawImages& raw, std::vector<std::string> class_names, Split split) {
  LabeledImageSet<T> set;
  set.images = Tensor<T>::zeros({raw.n, raw.c, raw.h, raw.w});
  auto v = set.images.values_mut();
  for (size_t i = 0; i < raw.pixels.size(); ++i) {
    v[i] = static_cast<T>(raw.pixels[i]) / T(255);
  }
  set.labels = raw.labels;
  set.class_names = std::move(class_names);
  set.split = split;
  set.validate();
  return set;
}

template <typename T>
std::pair<LabeledImageSet<T>, LabeledImageSet<T>> load_cifar10(const std::string& dir) {
  std::vector<std::string> train_files;
  for (int i = 1; i <= 5; ++i) train_files.push_back(dir + "/data_batch_" + std::to_string(i) + ".bin");
  auto train_raw = io::read_cifar10_files(train_files);
  auto test_raw = io::read_cifar10_files({dir + "/test_batch.bin"});
  auto names = io::cifar10_class_names();
  return {from_raw<T>(train_raw, names, Split::Train), from_raw<T>(test_raw, names, Split::Test)};
}

template <typename T>
std::pair<LabeledImageSet<T>, LabeledImageSet<T>> load_mnist_idx(const std::string& dir) {
  auto train_raw = io::read_idx_pair(dir + "/train-images-idx3-ubyte", dir + "/train-labels-idx1-ubyte");
  auto test_raw = io::read_idx_pair(dir + "/t10k-images-idx3-ubyte", dir + "/t10k-labels-idx1-ubyte");
  std::vector<std::string> names;
  for (int i = 0; i < 10; ++i) names.push_back(std::to_string(i));
  return {from_raw<T>(train_raw, names, Split::Train), from_raw<T>(test_raw, names, Split::Test)};
}

// ---------------------------------------------------------------------------
// Synthetic frequency dataset
// ---------------------------------------------------------------------------

namespace detail {

// Smooth random field: white noise blurred with a wide Gaussian, then
// contrast-stretched back around 0.5.
template <typename T>
void fill_smooth(std::span<T> plane, int64_t h, int64_t w, Rng& rng) {
  NoGradGuard ng;
  auto noise = rand_uniform<T>({1, 1, h, w}, rng);
  auto kernel = Tensor<T>::from({17}, gaussian_kernel_1d<T>(17, T(4)));
  auto smooth = separable_filter(noise, kernel);
  auto vals = smooth.values();
  T mean = T(0);
  for (T v : vals) mean += v;
  mean /= static_cast<T>(vals.size());
  const T gain = T(3);
  for (size_t i = 0; i < vals.size(); ++i) {
    plane[i] = T(0.5) + gain * (vals[i] - mean);
  }
}

template <typename T>
void fill_checker(std::span<T> plane, int64_t h, int64_t w, Rng& rng) {
  const int64_t period = 1 + static_cast<int64_t>(rng.below(2));  // 1 or 2 pixels
  const int64_t phase = static_cast<int64_t>(rng.below(2));
  const T amp = static_cast<T>(rng.uniform(0.2, 0.4));
  for (int64_t y = 0; y < h; ++y) {
    for (int64_t x = 0; x < w; ++x) {
      const int64_t cell = ((y / period) + (x / period) + phase) % 2;
      plane[static_cast<size_t>(y * w + x)] = T(0.5) + (cell ? amp : -amp);
    }
  }
}

template <typename T>
void fill_stripes(std::span<T> plane, int64_t h, int64_t w, Rng& rng) {
  const double wavelength = rng.uniform(4.0, 8.0);
  const double theta = rng.uniform(0.0, 3.14159265358979323846);
  const double phase = rng.uniform(0.0, 6.28318530717958647692);
  const double kx = std::cos(theta) * 2.0 * 3.14159265358979323846 / wavelength;
  const double ky = std::sin(theta) * 2.0 * 3.14159265358979323846 / wavelength;
  const T amp = static_cast<T>(rng.uniform(0.25, 0.35));
  for (int64_t y = 0; y < h; ++y) {
    for (int64_t x = 0; x < w; ++x) {
      plane[static_cast<size_t>(y * w + x)] =
          T(0.5) + amp * static_cast<T>(std::sin(kx * static_cast<double>(x) + ky * static_cast<double>(y) + phase));
    }
  }
}

}  // namespace detail

/// Four 3x32x32 classes separated by spatial frequency content:
///   0 smooth gradients, 1 fine checker texture, 2 both mixed, 3 mid-frequency
///   stripes. Additive noise on top, clamped to [0,1], 80/20 train/test split.
template <typename T>
std::pair<LabeledImageSet<T>, LabeledImageSet<T>> make_synthetic_frequency_dataset(int64_t n_per_class,
                                                                                   uint64_t seed) {
  if (n_per_class < 50) {
    throw DataError("make_synthetic_frequency_dataset: n_per_class must be >= 50, got " +
                    std::to_string(n_per_class));
  }
  constexpr int64_t C = 3, H = 32, W = 32;
  const int64_t total = 4 * n_per_class;
  Rng rng(seed);

  auto images = Tensor<T>::zeros({total, C, H, W});
  std::vector<int> labels(static_cast<size_t>(total));
  auto v = images.values_mut();
  std::vector<T> pattern(static_cast<size_t>(H * W));
  std::vector<T> extra(static_cast<size_t>(H * W));

  for (int64_t idx = 0; idx < total; ++idx) {
    const int cls = static_cast<int>(idx / n_per_class);
    labels[static_cast<size_t>(idx)] = cls;
    switch (cls) {
      case 0:
        detail::fill_smooth<T>(pattern, H, W, rng);
        break;
      case 1:
        detail::fill_checker<T>(pattern, H, W, rng);
        break;
      case 2: {
        detail::fill_smooth<T>(pattern, H, W, rng);
        detail::fill_checker<T>(extra, H, W, rng);
        for (size_t i = 0; i < pattern.size(); ++i) {
          pattern[i] = T(0.5) * pattern[i] + T(0.5) * extra[i];
        }
        break;
      }
      default:
        detail::fill_stripes<T>(pattern, H, W, rng);
        break;
    }
    for (int64_t c = 0; c < C; ++c) {
      const T channel_scale = static_cast<T>(rng.uniform(0.9, 1.1));
      T* dst = v.data() + (idx * C + c) * H * W;
      for (int64_t i = 0; i < H * W; ++i) {
        T val = T(0.5) + channel_scale * (pattern[static_cast<size_t>(i)] - T(0.5));
        val += static_cast<T>(rng.uniform(-0.02, 0.02));
        dst[i] = std::min(T(1), std::max(T(0), val));
      }
    }
  }

  std::vector<std::string> names{"low_freq", "high_freq", "mixed", "stripes"};
  const int64_t train_per_class = (n_per_class * 8) / 10;

  auto carve = [&](bool train_part) {
    std::vector<int64_t> pick;
    for (int64_t cls = 0; cls < 4; ++cls) {
      const int64_t begin = cls * n_per_class;
      const int64_t mid = begin + train_per_class;
      const int64_t lo = train_part ? begin : mid;
      const int64_t hi = train_part ? mid : begin + n_per_class;
      for (int64_t i = lo; i < hi; ++i) pick.push_back(i);
    }
    LabeledImageSet<T> set;
    set.images = Tensor<T>::zeros({static_cast<int64_t>(pick.size()), C, H, W});
    auto dst = set.images.values_mut();
    const int64_t img = C * H * W;
    for (size_t i = 0; i < pick.size(); ++i) {
      const T* src = v.data() + pick[i] * img;
      std::copy(src, src + img, dst.data() + static_cast<int64_t>(i) * img);
      set.labels.push_back(labels[static_cast<size_t>(pick[i])]);
    }
    set.class_names = names;
    set.split = train_part ? Split::Train : Split::Test;
    return set;
  };

  return {carve(true), carve(false)};
}

// ---------------------------------------------------------------------------
// Normalization and batching
// ---------------------------------------------------------------------------

template <typename T>
std::pair<std::vector<double>, std::vector<double>> channel_stats(const LabeledImageSet<T>& set) {
  const int64_t N = set.images.dim(0), C = set.images.dim(1);
  const int64_t HW = set.images.dim(2) * set.images.dim(3);
  std::vector<double> mean(static_cast<size_t>(C), 0.0), sq(static_cast<size_t>(C), 0.0);
  const T* p = set.images.values().data();
  for (int64_t n = 0; n < N; ++n) {
    for (int64_t c = 0; c < C; ++c) {
      const T* plane = p + (n * C + c) * HW;
      for (int64_t i = 0; i < HW; ++i) {
        mean[static_cast<size_t>(c)] += static_cast<double>(plane[i]);
        sq[static_cast<size_t>(c)] += static_cast<double>(plane[i]) * static_cast<double>(plane[i]);
      }
    }
  }
  const double m = static_cast<double>(N * HW);
  std::vector<double> stddev(static_cast<size_t>(C));
  for (int64_t c = 0; c < C; ++c) {
    mean[static_cast<size_t>(c)] /= m;
    const double var = sq[static_cast<size_t>(c)] / m - mean[static_cast<size_t>(c)] * mean[static_cast<size_t>(c)];
    stddev[static_cast<size_t>(c)] = std::sqrt(std::max(var, 1e-12));
  }
  return {mean, stddev};
}

template <typename T>
Tensor<T> normalize_images(const Tensor<T>& images, const AugmentSpec& spec) {
  if (spec.mean.empty()) return images.clone_detached();
  const int64_t N = images.dim(0), C = images.dim(1), HW = images.dim(2) * images.dim(3);
  auto out = Tensor<T>::zeros(images.shape());
  const T* src = images.values().data();
  T* dst = out.values_mut().data();
  for (int64_t n = 0; n < N; ++n) {
    for (int64_t c = 0; c < C; ++c) {
      const T mu = static_cast<T>(spec.mean[static_cast<size_t>(c)]);
      const T inv = T(1) / static_cast<T>(spec.std[static_cast<size_t>(c)]);
      const int64_t base = (n * C + c) * HW;
      for (int64_t i = 0; i < HW; ++i) dst[base + i] = (src[base + i] - mu) * inv;
    }
  }
  return out;
}

template <typename T>
Tensor<T> denormalize_images(const Tensor<T>& images, const AugmentSpec& spec) {
  if (spec.mean.empty()) return images.clone_detached();
  const int64_t N = images.dim(0), C = images.dim(1), HW = images.dim(2) * images.dim(3);
  auto out = Tensor<T>::zeros(images.shape());
  const T* src = images.values().data();
  T* dst = out.values_mut().data();
  for (int64_t n = 0; n < N; ++n) {
    for (int64_t c = 0; c < C; ++c) {
      const T mu = static_cast<T>(spec.mean[static_cast<size_t>(c)]);
      const T sd = static_cast<T>(spec.std[static_cast<size_t>(c)]);
      const int64_t base = (n * C + c) * HW;
      for (int64_t i = 0; i < HW; ++i) dst[base + i] = src[base + i] * sd + mu;
    }
  }
  return out;
}

/// Mirror along W in place.
template <typename T>
void hflip_image(T* chw, int64_t c, int64_t h, int64_t w) {
  for (int64_t ch = 0; ch < c; ++ch) {
    for (int64_t y = 0; y < h; ++y) {
      T* row = chw + (ch * h + y) * w;
      for (int64_t x = 0; x < w / 2; ++x) std::swap(row[x], row[w - 1 - x]);
    }
  }
}

/// Deterministic epoch iterator. Training epochs draw a fresh permutation and
/// per-image flip decisions from the seeded stream; test iteration is the
/// identity order with no flips. The last partial batch is kept.
template <typename T>
class BatchStream {
 public:
  BatchStream(const LabeledImageSet<T>& set, AugmentSpec spec, int64_t batch_size, uint64_t seed, bool train)
      : set_(&set), spec_(std::move(spec)), batch_(batch_size), rng_(seed), train_(train) {
    if (batch_ < 1) throw ConfigError("BatchStream: batch_size must be >= 1");
    spec_.validate(set.images.dim(1));
    order_.resize(static_cast<size_t>(set.size()));
    for (int64_t i = 0; i < set.size(); ++i) order_[static_cast<size_t>(i)] = i;
  }

  int64_t batches_per_epoch() const { return (set_->size() + batch_ - 1) / batch_; }

  void begin_epoch() {
    if (train_) rng_.shuffle(order_.begin(), order_.end());
    cursor_ = 0;
  }

  bool next(Tensor<T>& images, std::vector<int>& labels) {
    const int64_t n = set_->size();
    if (cursor_ >= n) return false;
    const int64_t take = std::min(batch_, n - cursor_);
    const int64_t C = set_->images.dim(1), H = set_->images.dim(2), W = set_->images.dim(3);
    const int64_t img = C * H * W;
    images = Tensor<T>::zeros({take, C, H, W});
    labels.assign(static_cast<size_t>(take), 0);
    auto dst = images.values_mut();
    const T* src = set_->images.values().data();
    for (int64_t i = 0; i < take; ++i) {
      const int64_t pick = order_[static_cast<size_t>(cursor_ + i)];
      std::copy(src + pick * img, src + (pick + 1) * img, dst.data() + i * img);
      labels[static_cast<size_t>(i)] = set_->labels[static_cast<size_t>(pick)];
      if (train_ && spec_.flip_prob > 0.0 && rng_.bernoulli(spec_.flip_prob)) {
        hflip_image(dst.data() + i * img, C, H, W);
      }
    }
    if (!spec_.mean.empty()) images = normalize_images(images, spec_);
    cursor_ += take;
    return true;
  }

 private:
  const LabeledImageSet<T>* set_;
  AugmentSpec spec_;
  int64_t batch_;
  Rng rng_;
  bool train_;
  std::vector<int64_t> order_;
  int64_t cursor_ = 0;
};

/// First `count` samples as a new set (the fixed overfit subset).
template <typename T>
LabeledImageSet<T> take_prefix(const LabeledImageSet<T>& set, int64_t count) {
  if (count < 1 || count > set.size()) {
    throw DataError("take_prefix: count " + std::to_string(count) + " out of range for set of " +
                    std::to_string(set.size()));
  }
  LabeledImageSet<T> out;
  const int64_t C = set.images.dim(1), H = set.images.dim(2), W = set.images.dim(3);
  out.images = Tensor<T>::zeros({count, C, H, W});
  const int64_t img = C * H * W;
  std::copy(set.images.values().data(), set.images.values().data() + count * img,
            out.images.values_mut().data());
  out.labels.assign(set.labels.begin(), set.labels.begin() + count);
  out.class_names = set.class_names;
  out.split = set.split;
  return out;
}

}  // namespace fdnet
