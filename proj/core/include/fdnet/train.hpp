#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <limits>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "fdnet/checkpoint.hpp"
#include "fdnet/data.hpp"
#include "fdnet/model.hpp"
#include "fdnet/report.hpp"

namespace fdnet {

struct TrainConfig {
  int64_t epochs = 20;
  int64_t batch_size = 64;
  double lr0 = 0.1;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  std::vector<int64_t> lr_milestones{12, 17};
  double lr_gamma = 0.1;
  uint64_t seed = 0;
  bool decay_all = true;  // false: conv/linear weights only (gammas/betas/biases skipped)
  int64_t checkpoint_every = 0;  // epochs; 0 = final checkpoint only

  void validate() const {
    if (epochs < 1) throw ConfigError("TrainConfig.epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("TrainConfig.batch_size must be >= 1");
    if (!(lr0 > 0.0)) throw ConfigError("TrainConfig.lr0 must be positive");
    if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("TrainConfig.momentum must be in [0,1)");
    if (weight_decay < 0.0) throw ConfigError("TrainConfig.weight_decay must be >= 0");
    if (!(lr_gamma > 0.0)) throw ConfigError("TrainConfig.lr_gamma must be positive");
    for (size_t i = 0; i < lr_milestones.size(); ++i) {
      if (lr_milestones[i] < 0 || lr_milestones[i] >= epochs) {
        throw ConfigError("TrainConfig.lr_milestones: milestone " + std::to_string(lr_milestones[i]) +
                          " outside [0, epochs)");
      }
      if (i > 0 && lr_milestones[i] <= lr_milestones[i - 1]) {
        throw ConfigError("TrainConfig.lr_milestones must be strictly increasing");
      }
    }
  }
};

struct RunLogRecord {
  int64_t epoch = 0;
  double train_loss = 0.0, train_acc = 0.0;
  double test_loss = 0.0, test_acc = 0.0;
  double lr = 0.0;
  double wall_time = 0.0;  // seconds for the epoch; excluded from determinism checks
};

struct RunLog {
  static constexpr const char* kHeader = "epoch,train_loss,train_acc,test_loss,test_acc,lr,wall_time";

  std::vector<RunLogRecord> records;

  std::string to_csv(bool include_wall_time = true) const {
    std::string out = include_wall_time ? std::string(kHeader)
                                        : std::string("epoch,train_loss,train_acc,test_loss,test_acc,lr");
    out += '\n';
    for (const auto& r : records) {
      out += std::to_string(r.epoch);
      out += ',';
      out += format_double_exact(r.train_loss);
      out += ',';
      out += format_double_exact(r.train_acc);
      out += ',';
      out += format_double_exact(r.test_loss);
      out += ',';
      out += format_double_exact(r.test_acc);
      out += ',';
      out += format_double_exact(r.lr);
      if (include_wall_time) {
        out += ',';
        out += format_double(r.wall_time, 6);
      }
      out += '\n';
    }
    return out;
  }
};

/// Piecewise-constant multi-step schedule: lr0 * gamma^(#milestones <= epoch).
inline double lr_at(int64_t epoch, const TrainConfig& cfg) {
  if (epoch < 0 || epoch >= cfg.epochs) {
    throw ConfigError("lr_at: epoch " + std::to_string(epoch) + " outside [0, " + std::to_string(cfg.epochs) + ")");
  }
  int drops = 0;
  for (int64_t m : cfg.lr_milestones) {
    if (m <= epoch) ++drops;
  }
  return cfg.lr0 * std::pow(cfg.lr_gamma, drops);
}

// ---------------------------------------------------------------------------
// SGD with classic momentum
// ---------------------------------------------------------------------------

template <typename T>
struct SgdStateT {
  std::vector<std::vector<T>> velocity;  // one buffer per parameter, zeros at start

  void init(const std::vector<NamedParam<T>>& params) {
    velocity.clear();
    for (const auto& p : params) velocity.emplace_back(static_cast<size_t>(p.tensor.numel()), T(0));
  }
};

inline bool decays(ParamKind kind, bool decay_all) {
  if (kind == ParamKind::SigmaRaw) return false;  // decay would pull sigma toward the softplus knee
  if (decay_all) return true;
  return kind == ParamKind::ConvWeight || kind == ParamKind::LinearWeight;
}

/// g <- grad + wd*param; v <- momentum*v + g; param <- param - lr*v.
/// Parameters without an accumulated grad this step are skipped.
template <typename T>
void sgd_step(std::vector<NamedParam<T>>& params, SgdStateT<T>& state, double lr, double momentum,
              double weight_decay, bool decay_all = true) {
  if (state.velocity.size() != params.size()) {
    throw ShapeError("sgd_step: optimizer state has " + std::to_string(state.velocity.size()) +
                     " buffers for " + std::to_string(params.size()) + " parameters");
  }
  const T lrT = static_cast<T>(lr);
  const T momT = static_cast<T>(momentum);
  for (size_t pi = 0; pi < params.size(); ++pi) {
    auto& p = params[pi];
    if (!p.tensor.has_grad()) continue;
    const T wdT = decays(p.kind, decay_all) ? static_cast<T>(weight_decay) : T(0);
    auto vals = p.tensor.values_mut();
    auto grads = p.tensor.grad();
    auto& vel = state.velocity[pi];
    if (vel.size() != vals.size()) throw ShapeError("sgd_step: velocity shape mismatch for " + p.name);
    for (size_t i = 0; i < vals.size(); ++i) {
      const T g = grads[i] + wdT * vals[i];
      if (!std::isfinite(g)) {
        throw NumericError("sgd_step: non-finite gradient in parameter '" + p.name + "' at index " +
                           std::to_string(i));
      }
      vel[i] = momT * vel[i] + g;
      vals[i] -= lrT * vel[i];
    }
  }
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

template <typename T>
struct EvalResult {
  double accuracy = 0.0;
  double mean_loss = 0.0;
  std::vector<double> per_class_accuracy;
  std::vector<T> true_class_score;  // softmax probability of the true class, per sample
};

namespace detail {

inline int eval_thread_count() {
  const char* env = std::getenv("FDNET_THREADS");
  if (!env) return 1;
  const int n = std::atoi(env);
  return n > 0 ? n : 1;
}

template <typename T>
struct EvalShard {
  int64_t correct = 0;
  double loss_sum = 0.0;
  std::vector<int64_t> class_correct, class_total;
  std::vector<T> scores;
};

template <typename T>
EvalShard<T> evaluate_range(Model<T>& model, const LabeledImageSet<T>& set, const AugmentSpec& spec,
                            int64_t batch_size, int64_t begin, int64_t end, int num_classes) {
  NoGradGuard no_grad;
  EvalShard<T> shard;
  shard.class_correct.assign(static_cast<size_t>(num_classes), 0);
  shard.class_total.assign(static_cast<size_t>(num_classes), 0);
  const int64_t C = set.images.dim(1), H = set.images.dim(2), W = set.images.dim(3);
  const int64_t img = C * H * W;
  for (int64_t at = begin; at < end; at += batch_size) {
    const int64_t take = std::min(batch_size, end - at);
    auto batch = Tensor<T>::zeros({take, C, H, W});
    std::copy(set.images.values().data() + at * img, set.images.values().data() + (at + take) * img,
              batch.values_mut().data());
    if (!spec.mean.empty()) batch = normalize_images(batch, spec);
    auto logits = model.forward(batch, Mode::Eval);
    const T* lp = logits.values().data();
    const int64_t K = logits.dim(1);
    for (int64_t i = 0; i < take; ++i) {
      const int label = set.labels[static_cast<size_t>(at + i)];
      const T* row = lp + i * K;
      int64_t best = 0;
      T mx = row[0];
      for (int64_t k = 1; k < K; ++k) {
        if (row[k] > mx) {
          mx = row[k];
          best = k;
        }
      }
      // True-class softmax score with log-sum-exp stabilization.
      T denom = T(0);
      for (int64_t k = 0; k < K; ++k) denom += std::exp(row[k] - mx);
      const T score = std::exp(row[label] - mx) / denom;
      shard.scores.push_back(score);
      shard.loss_sum += -static_cast<double>(std::log(std::max(score, std::numeric_limits<T>::min())));
      shard.class_total[static_cast<size_t>(label)] += 1;
      if (best == label) {
        shard.correct += 1;
        shard.class_correct[static_cast<size_t>(label)] += 1;
      }
    }
  }
  return shard;
}

}  // namespace detail

/// Top-1 accuracy plus per-class accuracy and per-sample true-class softmax
/// scores. Never mutates parameters or running stats. The test set may be
/// sharded across FDNET_THREADS threads; shards are merged in index order so
/// the result is identical for any fixed thread count.
template <typename T>
EvalResult<T> evaluate(Model<T>& model, const LabeledImageSet<T>& set, const AugmentSpec& spec,
                       int64_t batch_size = 128, int threads = 0) {
  if (set.size() == 0) throw DataError("evaluate: empty dataset");
  const int num_classes = set.num_classes();
  if (threads <= 0) threads = detail::eval_thread_count();
  threads = static_cast<int>(std::min<int64_t>(threads, set.size()));

  std::vector<detail::EvalShard<T>> shards(static_cast<size_t>(threads));
  if (threads == 1) {
    shards[0] = detail::evaluate_range(model, set, spec, batch_size, 0, set.size(), num_classes);
  } else {
    std::vector<std::thread> pool;
    const int64_t per = (set.size() + threads - 1) / threads;
    for (int t = 0; t < threads; ++t) {
      const int64_t begin = t * per;
      const int64_t end = std::min<int64_t>(begin + per, set.size());
      pool.emplace_back([&, t, begin, end]() {
        shards[static_cast<size_t>(t)] =
            detail::evaluate_range(model, set, spec, batch_size, begin, end, num_classes);
      });
    }
    for (auto& th : pool) th.join();
  }

  EvalResult<T> result;
  result.per_class_accuracy.assign(static_cast<size_t>(num_classes), 0.0);
  int64_t correct = 0;
  double loss_sum = 0.0;
  std::vector<int64_t> cc(static_cast<size_t>(num_classes), 0), ct(static_cast<size_t>(num_classes), 0);
  for (auto& s : shards) {
    correct += s.correct;
    loss_sum += s.loss_sum;
    for (int k = 0; k < num_classes; ++k) {
      cc[static_cast<size_t>(k)] += s.class_correct[static_cast<size_t>(k)];
      ct[static_cast<size_t>(k)] += s.class_total[static_cast<size_t>(k)];
    }
    result.true_class_score.insert(result.true_class_score.end(), s.scores.begin(), s.scores.end());
  }
  result.accuracy = static_cast<double>(correct) / static_cast<double>(set.size());
  result.mean_loss = loss_sum / static_cast<double>(set.size());
  for (int k = 0; k < num_classes; ++k) {
    result.per_class_accuracy[static_cast<size_t>(k)] =
        ct[static_cast<size_t>(k)] ? static_cast<double>(cc[static_cast<size_t>(k)]) /
                                         static_cast<double>(ct[static_cast<size_t>(k)])
                                   : 0.0;
  }
  return result;
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

struct TrainHooks {
  /// Called after every optimizer step with the batch loss; return false to
  /// stop training early (used by step-budget experiments).
  std::function<bool(int64_t step, double batch_loss)> on_step;
  /// Called after each completed epoch record.
  std::function<void(const RunLogRecord&)> on_epoch;
};

struct TrainPaths {
  std::string runlog_csv;       // flushed every epoch when non-empty
  std::string checkpoint_dir;   // "final.ckpt" plus optional per-N epochs
};

/// Full loop: per epoch a train pass (BN train mode) over shuffled batches,
/// then an evaluation pass on the test split. Deterministic for a fixed seed
/// in single-threaded mode. A non-finite loss aborts with the last completed
/// epoch's checkpoint still on disk.
template <typename T>
RunLog train(Model<T>& model, const LabeledImageSet<T>& train_set, const LabeledImageSet<T>& test_set,
             const AugmentSpec& spec, const TrainConfig& cfg, const TrainPaths& paths = {},
             const TrainHooks& hooks = {}, SgdStateT<T>* state_io = nullptr) {
  cfg.validate();
  auto params = model.named_parameters();
  SgdStateT<T> local_state;
  SgdStateT<T>& state = state_io ? *state_io : local_state;
  if (state.velocity.size() != params.size()) state.init(params);

  BatchStream<T> stream(train_set, spec, cfg.batch_size, cfg.seed, /*train=*/true);
  RunLog log;
  int64_t step = 0;
  bool stop = false;

  const std::string final_ckpt =
      paths.checkpoint_dir.empty() ? std::string() : paths.checkpoint_dir + "/final.ckpt";

  for (int64_t epoch = 0; epoch < cfg.epochs && !stop; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const double lr = lr_at(epoch, cfg);
    stream.begin_epoch();

    double loss_sum = 0.0;
    int64_t seen = 0, correct = 0;
    Tensor<T> batch;
    std::vector<int> labels;
    while (stream.next(batch, labels)) {
      for (auto& p : params) p.tensor.zero_grad();
      auto logits = model.forward(batch, Mode::Train);
      auto loss = cross_entropy(logits, labels);
      const double batch_loss = static_cast<double>(loss.value());
      if (!std::isfinite(batch_loss)) {
        throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch) + " step " +
                           std::to_string(step) + "; last good checkpoint retained");
      }
      loss.backward();
      sgd_step(params, state, lr, cfg.momentum, cfg.weight_decay, cfg.decay_all);

      const int64_t bsz = batch.dim(0);
      loss_sum += batch_loss * static_cast<double>(bsz);
      const T* lp = logits.values().data();
      const int64_t K = logits.dim(1);
      for (int64_t i = 0; i < bsz; ++i) {
        const T* row = lp + i * K;
        int64_t best = 0;
        for (int64_t k = 1; k < K; ++k) {
          if (row[k] > row[best]) best = k;
        }
        if (best == labels[static_cast<size_t>(i)]) ++correct;
      }
      seen += bsz;
      ++step;
      if (hooks.on_step && !hooks.on_step(step, batch_loss)) {
        stop = true;
        break;
      }
    }

    // Always single-threaded here: the RunLog must be bit-identical for a
    // fixed seed regardless of FDNET_THREADS.
    auto eval = evaluate(model, test_set, spec, cfg.batch_size, /*threads=*/1);
    RunLogRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(seen);
    rec.train_acc = static_cast<double>(correct) / static_cast<double>(seen);
    rec.test_loss = eval.mean_loss;
    rec.test_acc = eval.accuracy;
    rec.lr = lr;
    rec.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    log.records.push_back(rec);
    if (!paths.runlog_csv.empty()) write_text_file(paths.runlog_csv, log.to_csv());
    if (hooks.on_epoch) hooks.on_epoch(rec);

    if (!final_ckpt.empty()) {
      if (cfg.checkpoint_every > 0 && (epoch + 1) % cfg.checkpoint_every == 0 && epoch + 1 < cfg.epochs) {
        save_checkpoint(model, paths.checkpoint_dir + "/epoch" + std::to_string(epoch) + ".ckpt",
                        &state.velocity);
      }
      save_checkpoint(model, final_ckpt, &state.velocity);
    }
  }
  return log;
}

// ---------------------------------------------------------------------------
// Filtered-test-set robustness protocol
// ---------------------------------------------------------------------------

template <typename T>
struct FilteredTestSet {
  std::string name;  // e.g. "low3"
  PassMode mode = PassMode::LowPass;
  int64_t kernel_size = 3;
  LabeledImageSet<T> set;
};

/// One low-pass and one high-pass copy of the test set per kernel size,
/// filtered in un-normalized [0,1] space. High-pass outputs may be negative;
/// they are fed to normalization as-is. Labels are untouched.
template <typename T>
std::vector<FilteredTestSet<T>> make_filtered_test_sets(const LabeledImageSet<T>& set,
                                                        const std::vector<int64_t>& kernel_sizes = {3, 5, 7},
                                                        double sigma = 1.0) {
  NoGradGuard no_grad;
  std::vector<FilteredTestSet<T>> out;
  for (int64_t k : kernel_sizes) {
    auto kernel = Tensor<T>::from({k}, gaussian_kernel_1d<T>(k, static_cast<T>(sigma)));
    for (const PassMode mode : {PassMode::LowPass, PassMode::HighPass}) {
      FilteredTestSet<T> f;
      f.mode = mode;
      f.kernel_size = k;
      f.name = (mode == PassMode::LowPass ? "low" : "high") + std::to_string(k);
      f.set.images = mode == PassMode::LowPass ? low_pass(set.images, kernel) : high_pass(set.images, kernel);
      f.set.labels = set.labels;
      f.set.class_names = set.class_names;
      f.set.split = set.split;
      out.push_back(std::move(f));
    }
  }
  return out;
}

}  // namespace fdnet
