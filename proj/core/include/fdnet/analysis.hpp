#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "fdnet/data.hpp"
#include "fdnet/model.hpp"
#include "fdnet/report.hpp"

namespace fdnet {

// ---------------------------------------------------------------------------
// GradCAM
// ---------------------------------------------------------------------------

struct SaliencyMap {
  int64_t height = 0, width = 0;
  std::vector<double> values;  // non-negative, max-normalized to 1 unless all zero
  std::string source_layer;
  int class_index = 0;
  bool all_zero = false;
};

namespace detail {

/// ReLU(sum_k w_k A_k) with w_k the spatial mean of the tapped gradient.
/// A and G are [K, h*w] flattened single-sample activations/gradients.
inline std::vector<double> weighted_cam(const std::vector<double>& activation,
                                        const std::vector<double>& gradient, int64_t channels,
                                        int64_t spatial) {
  std::vector<double> map(static_cast<size_t>(spatial), 0.0);
  for (int64_t k = 0; k < channels; ++k) {
    double w = 0.0;
    for (int64_t i = 0; i < spatial; ++i) w += gradient[static_cast<size_t>(k * spatial + i)];
    w /= static_cast<double>(spatial);
    for (int64_t i = 0; i < spatial; ++i) {
      map[static_cast<size_t>(i)] += w * activation[static_cast<size_t>(k * spatial + i)];
    }
  }
  for (double& v : map) v = std::max(v, 0.0);
  return map;
}

/// Bilinear resize (align-corners); identity when the sizes match.
inline std::vector<double> upsample_bilinear(const std::vector<double>& src, int64_t sh, int64_t sw,
                                             int64_t dh, int64_t dw) {
  std::vector<double> dst(static_cast<size_t>(dh * dw), 0.0);
  const double ry = dh > 1 ? static_cast<double>(sh - 1) / static_cast<double>(dh - 1) : 0.0;
  const double rx = dw > 1 ? static_cast<double>(sw - 1) / static_cast<double>(dw - 1) : 0.0;
  for (int64_t y = 0; y < dh; ++y) {
    const double fy = ry * static_cast<double>(y);
    const int64_t y0 = static_cast<int64_t>(fy);
    const int64_t y1 = std::min(y0 + 1, sh - 1);
    const double ty = fy - static_cast<double>(y0);
    for (int64_t x = 0; x < dw; ++x) {
      const double fx = rx * static_cast<double>(x);
      const int64_t x0 = static_cast<int64_t>(fx);
      const int64_t x1 = std::min(x0 + 1, sw - 1);
      const double tx = fx - static_cast<double>(x0);
      const double a = src[static_cast<size_t>(y0 * sw + x0)];
      const double b = src[static_cast<size_t>(y0 * sw + x1)];
      const double c = src[static_cast<size_t>(y1 * sw + x0)];
      const double d = src[static_cast<size_t>(y1 * sw + x1)];
      dst[static_cast<size_t>(y * dw + x)] =
          (a * (1.0 - tx) + b * tx) * (1.0 - ty) + (c * (1.0 - tx) + d * tx) * ty;
    }
  }
  return dst;
}

}  // namespace detail

/// Assembles the saliency map from a tapped activation and its gradient
/// ([1,K,h,w] each), upsampled to the input size and max-normalized.
template <typename T>
SaliencyMap make_saliency_map(const Tensor<T>& activation, std::span<const T> gradient, int64_t out_h,
                              int64_t out_w, const std::string& source_layer, int class_index) {
  const int64_t K = activation.dim(1), h = activation.dim(2), w = activation.dim(3);
  std::vector<double> act(activation.values().begin(), activation.values().end());
  std::vector<double> grad(gradient.begin(), gradient.end());
  auto map = detail::weighted_cam(act, grad, K, h * w);
  map = detail::upsample_bilinear(map, h, w, out_h, out_w);

  SaliencyMap sm;
  sm.height = out_h;
  sm.width = out_w;
  sm.source_layer = source_layer;
  sm.class_index = class_index;
  double mx = 0.0;
  for (double v : map) mx = std::max(mx, v);
  if (mx > 0.0) {
    for (double& v : map) v /= mx;
  } else {
    sm.all_zero = true;  // flagged, not an error
  }
  sm.values = std::move(map);
  return sm;
}

/// Forward with a tap, backward from the chosen class logit of sample 0,
/// channel weights from spatially averaged gradients.
template <typename T>
SaliencyMap gradcam(Model<T>& model, const Tensor<T>& image, int class_index, const std::string& tap) {
  Tensor<T> batch = image;
  if (image.ndim() == 3) {
    batch = reshape(image, {1, image.dim(0), image.dim(1), image.dim(2)});
  }
  if (batch.ndim() != 4 || batch.dim(0) != 1) {
    throw ShapeError("gradcam: expected one [C,H,W] or [1,C,H,W] image, got " + shape_str(image.shape()));
  }
  auto result = model.forward_with_taps(batch, Mode::Eval, {tap});
  const auto& act = result.activation(tap);
  if (act.ndim() != 4) throw ShapeError("gradcam: tap '" + tap + "' is not a spatial activation");
  if (class_index < 0 || class_index >= result.logits.dim(1)) {
    throw ShapeError("gradcam: class index " + std::to_string(class_index) + " out of range");
  }
  auto target = select(result.logits, {0, static_cast<int64_t>(class_index)});
  target.backward();
  return make_saliency_map(act, act.grad(), batch.dim(2), batch.dim(3), tap, class_index);
}

/// Grayscale map plus a red-overlay variant on the (first channel of the)
/// source image, as portable pixmaps.
template <typename T>
void write_saliency_images(const SaliencyMap& map, const Tensor<T>& image, const std::string& gray_path,
                           const std::string& overlay_path) {
  write_pgm(gray_path, map.height, map.width, map.values);
  const int64_t C = image.ndim() == 4 ? image.dim(1) : image.dim(0);
  const int64_t H = map.height, W = map.width;
  const T* p = image.values().data();
  std::vector<double> rgb(static_cast<size_t>(H * W * 3), 0.0);
  for (int64_t i = 0; i < H * W; ++i) {
    double gray = 0.0;
    for (int64_t c = 0; c < C; ++c) gray += static_cast<double>(p[c * H * W + i]);
    gray /= static_cast<double>(C);
    const double heat = map.values[static_cast<size_t>(i)];
    rgb[static_cast<size_t>(3 * i + 0)] = 0.5 * gray + 0.5 * heat;
    rgb[static_cast<size_t>(3 * i + 1)] = 0.5 * gray;
    rgb[static_cast<size_t>(3 * i + 2)] = 0.5 * gray + 0.5 * (1.0 - heat);
  }
  write_ppm(overlay_path, H, W, rgb);
}

// ---------------------------------------------------------------------------
// Retrieval
// ---------------------------------------------------------------------------

template <typename T>
struct RetrievalIndex {
  std::vector<std::vector<T>> features;  // unit rows
  std::vector<int> labels;
  std::vector<int64_t> ids;  // stable tie-break order

  int64_t size() const { return static_cast<int64_t>(features.size()); }
  int64_t dim() const { return features.empty() ? 0 : static_cast<int64_t>(features[0].size()); }
};

/// Pre-classifier pooled activations, L2-normalized per row. Zero vectors are
/// left as zeros.
template <typename T>
RetrievalIndex<T> extract_features(Model<T>& model, const LabeledImageSet<T>& set, const AugmentSpec& spec,
                                   int64_t batch_size = 128) {
  NoGradGuard no_grad;
  RetrievalIndex<T> index;
  const int64_t C = set.images.dim(1), H = set.images.dim(2), W = set.images.dim(3);
  const int64_t img = C * H * W;
  for (int64_t at = 0; at < set.size(); at += batch_size) {
    const int64_t take = std::min(batch_size, set.size() - at);
    auto batch = Tensor<T>::zeros({take, C, H, W});
    std::copy(set.images.values().data() + at * img, set.images.values().data() + (at + take) * img,
              batch.values_mut().data());
    if (!spec.mean.empty()) batch = normalize_images(batch, spec);
    auto out = model.forward_full(batch, Mode::Eval);
    const int64_t D = out.features.dim(1);
    const T* fp = out.features.values().data();
    for (int64_t i = 0; i < take; ++i) {
      std::vector<T> row(fp + i * D, fp + (i + 1) * D);
      T norm = T(0);
      for (T v : row) norm += v * v;
      norm = std::sqrt(norm);
      if (norm > T(0)) {
        for (T& v : row) v /= norm;
      }
      index.features.push_back(std::move(row));
      index.labels.push_back(set.labels[static_cast<size_t>(at + i)]);
      index.ids.push_back(at + i);
    }
  }
  return index;
}

namespace detail {

template <typename T>
double pair_similarity(const std::vector<T>& a, const std::vector<T>& b, RetrievalMetric metric) {
  double acc = 0.0;
  if (metric == RetrievalMetric::Cosine) {
    for (size_t i = 0; i < a.size(); ++i) acc += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    return acc;
  }
  for (size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    acc += d * d;
  }
  return -std::sqrt(acc);  // larger = more similar
}

}  // namespace detail

struct RankedHit {
  int64_t gallery_id = 0;
  double similarity = 0.0;
  bool relevant = false;
};

/// Gallery ranking for one query (query excluded), descending similarity with
/// ties broken by ascending id.
template <typename T>
std::vector<RankedHit> rank_gallery(const RetrievalIndex<T>& index, int64_t query,
                                    RetrievalMetric metric = RetrievalMetric::Cosine) {
  std::vector<RankedHit> hits;
  hits.reserve(static_cast<size_t>(index.size() - 1));
  for (int64_t j = 0; j < index.size(); ++j) {
    if (j == query) continue;
    RankedHit h;
    h.gallery_id = index.ids[static_cast<size_t>(j)];
    h.similarity = detail::pair_similarity(index.features[static_cast<size_t>(query)],
                                           index.features[static_cast<size_t>(j)], metric);
    h.relevant = index.labels[static_cast<size_t>(j)] == index.labels[static_cast<size_t>(query)];
    hits.push_back(h);
  }
  std::sort(hits.begin(), hits.end(), [](const RankedHit& a, const RankedHit& b) {
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    return a.gallery_id < b.gallery_id;
  });
  return hits;
}

/// AP of one query: mean over relevant ranks r_1<...<r_R of i / r_i.
template <typename T>
double average_precision(const RetrievalIndex<T>& index, int64_t query,
                         RetrievalMetric metric = RetrievalMetric::Cosine) {
  const auto hits = rank_gallery(index, query, metric);
  int64_t relevant_seen = 0;
  double ap = 0.0;
  for (size_t r = 0; r < hits.size(); ++r) {
    if (hits[r].relevant) {
      ++relevant_seen;
      ap += static_cast<double>(relevant_seen) / static_cast<double>(r + 1);
    }
  }
  if (relevant_seen == 0) {
    throw DataError("average_precision: query " + std::to_string(query) +
                    " has no same-class item in the gallery");
  }
  return ap / static_cast<double>(relevant_seen);
}

/// Full-ranking mAP over every item used as a query against the rest.
template <typename T>
double mean_average_precision(const RetrievalIndex<T>& index, RetrievalMetric metric = RetrievalMetric::Cosine) {
  if (index.size() < 2) throw DataError("mean_average_precision: index needs at least 2 items");
  double acc = 0.0;
  for (int64_t q = 0; q < index.size(); ++q) acc += average_precision(index, q, metric);
  return acc / static_cast<double>(index.size());
}

/// Text table of the top-k ranks per query: query id, rank, gallery id,
/// similarity, relevant flag.
template <typename T>
std::string retrieval_table_csv(const RetrievalIndex<T>& index, int64_t top_k,
                                RetrievalMetric metric = RetrievalMetric::Cosine) {
  std::string out = "query_id,rank,gallery_id,similarity,relevant\n";
  for (int64_t q = 0; q < index.size(); ++q) {
    const auto hits = rank_gallery(index, q, metric);
    const int64_t take = std::min<int64_t>(top_k, static_cast<int64_t>(hits.size()));
    for (int64_t r = 0; r < take; ++r) {
      out += std::to_string(index.ids[static_cast<size_t>(q)]);
      out += ',';
      out += std::to_string(r + 1);
      out += ',';
      out += std::to_string(hits[static_cast<size_t>(r)].gallery_id);
      out += ',';
      out += format_double(hits[static_cast<size_t>(r)].similarity, 9);
      out += ',';
      out += hits[static_cast<size_t>(r)].relevant ? '1' : '0';
      out += '\n';
    }
  }
  return out;
}

}  // namespace fdnet
