#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "fdnet/analysis.hpp"
#include "fdnet/checkpoint.hpp"
#include "fdnet/config.hpp"
#include "fdnet/gradcheck.hpp"
#include "fdnet/train.hpp"

namespace fdnet {

struct RunOptions {
  std::string config_path;
  std::vector<std::string> overrides;  // --set key=value
  std::vector<std::string> tasks;      // --task, overrides cfg.tasks when non-empty
  std::string out_dir;                 // empty: runs/<utc-stamp>
  std::optional<uint64_t> seed;        // --seed
  bool deterministic = true;
};

struct SweepOptions {
  // (low kernel, high kernel); 0 means that skip connection is absent (Nil).
  std::vector<std::pair<int64_t, int64_t>> cells;
  std::vector<std::string> sigmas{"1"};  // numbers or "trainable"
  int64_t repeat = 1;
};

namespace runner_detail {

inline std::string utc_stamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::strftime(buf, sizeof(buf), "%Y%m%d-%H%M%S", &tm);
  return buf;
}

inline std::filesystem::path prepare_out_dir(const std::string& requested) {
  std::filesystem::path out =
      requested.empty() ? std::filesystem::path("runs") / utc_stamp() : std::filesystem::path(requested);
  std::filesystem::create_directories(out);
  std::filesystem::create_directories(out / "checkpoints");
  std::filesystem::create_directories(out / "reports");
  std::filesystem::create_directories(out / "saliency");
  return out;
}

/// Shared experiment state for one precision.
template <typename T>
class Session {
 public:
  Session(ExperimentConfig cfg, std::filesystem::path out, bool deterministic)
      : cfg_(std::move(cfg)), out_(std::move(out)), deterministic_(deterministic) {}

  void load_data() {
    switch (cfg_.dataset) {
      case DatasetKind::Cifar10: {
        auto [tr, te] = load_cifar10<T>(cfg_.data_dir);
        train_ = std::move(tr);
        test_ = std::move(te);
        break;
      }
      case DatasetKind::Mnist: {
        auto [tr, te] = load_mnist_idx<T>(cfg_.data_dir);
        train_ = std::move(tr);
        test_ = std::move(te);
        break;
      }
      case DatasetKind::Synthetic: {
        auto [tr, te] = make_synthetic_frequency_dataset<T>(cfg_.synthetic_n_per_class, cfg_.train.seed);
        train_ = std::move(tr);
        test_ = std::move(te);
        break;
      }
    }
    if (cfg_.limit_train > 0) train_ = take_prefix(train_, cfg_.limit_train);

    augment_.flip_prob = cfg_.flip_prob;
    if (cfg_.normalize == NormalizeMode::Auto) {
      auto [mean, stddev] = channel_stats(train_);
      augment_.mean = mean;
      augment_.std = stddev;
      cfg_.normalize = NormalizeMode::Custom;  // echoed into the manifest
      cfg_.normalize_mean = mean;
      cfg_.normalize_std = stddev;
    } else if (cfg_.normalize == NormalizeMode::Custom) {
      augment_.mean = cfg_.normalize_mean;
      augment_.std = cfg_.normalize_std;
    }
  }

  void write_manifest() {
    write_text_file((out_ / "manifest.txt").string(), cfg_.manifest_text());
  }

  void ensure_model() {
    if (model_) return;
    if (!cfg_.model_checkpoint.empty()) {
      model_ = load_checkpoint<T>(cfg_.model_checkpoint);
    } else {
      model_ = build_model<T>(cfg_.model_config(train_.num_classes(), train_.channels()), cfg_.train.seed);
    }
  }

  void task_train() {
    ensure_model();
    TrainPaths paths;
    paths.runlog_csv = (out_ / "runlog.csv").string();
    paths.checkpoint_dir = (out_ / "checkpoints").string();
    last_log_ = train(*model_, train_, test_, augment_, cfg_.train, paths);
  }

  void task_eval() {
    ensure_model();
    auto result = evaluate(*model_, test_, augment_, cfg_.train.batch_size, eval_threads());
    std::string csv = "metric,value\n";
    csv += "accuracy," + format_double_exact(result.accuracy) + "\n";
    csv += "mean_loss," + format_double_exact(result.mean_loss) + "\n";
    for (size_t k = 0; k < result.per_class_accuracy.size(); ++k) {
      csv += "class_" + std::to_string(k) + "_accuracy," + format_double_exact(result.per_class_accuracy[k]) + "\n";
    }
    write_text_file((out_ / "reports" / "eval.csv").string(), csv);
    std::string scores = "sample,true_class_score\n";
    for (size_t i = 0; i < result.true_class_score.size(); ++i) {
      scores += std::to_string(i) + "," + format_double(static_cast<double>(result.true_class_score[i]), 9) + "\n";
    }
    write_text_file((out_ / "reports" / "eval_scores.csv").string(), scores);
    last_accuracy_ = result.accuracy;
    std::cout << "eval: accuracy " << format_double(result.accuracy, 6) << " over " << test_.size()
              << " samples\n";
  }

  void task_robustness() {
    ensure_model();
    auto sets = make_filtered_test_sets(test_, cfg_.robustness_kernels, cfg_.robustness_sigma);
    std::string csv = "filter,kernel,accuracy,samples\n";
    const auto baseline = evaluate(*model_, test_, augment_, cfg_.train.batch_size, eval_threads());
    csv += "none,0," + format_double_exact(baseline.accuracy) + "," + std::to_string(test_.size()) + "\n";
    for (auto& f : sets) {
      auto result = evaluate(*model_, f.set, augment_, cfg_.train.batch_size, eval_threads());
      csv += std::string(f.mode == PassMode::LowPass ? "lowpass" : "highpass") + "," +
             std::to_string(f.kernel_size) + "," + format_double_exact(result.accuracy) + "," +
             std::to_string(f.set.size()) + "\n";
      std::cout << "robustness " << f.name << ": accuracy " << format_double(result.accuracy, 6) << "\n";
    }
    write_text_file((out_ / "reports" / "robustness.csv").string(), csv);
  }

  void task_gradcam() {
    ensure_model();
    const int64_t count = std::min<int64_t>(cfg_.gradcam_count, test_.size());
    const int64_t C = test_.images.dim(1), H = test_.images.dim(2), W = test_.images.dim(3);
    const int64_t img = C * H * W;
    std::string csv = "sample,label,tap,all_zero,gray,overlay\n";
    for (int64_t i = 0; i < count; ++i) {
      auto raw = Tensor<T>::zeros({1, C, H, W});
      std::copy(test_.images.values().data() + i * img, test_.images.values().data() + (i + 1) * img,
                raw.values_mut().data());
      auto input = augment_.mean.empty() ? raw.clone_detached() : normalize_images(raw, augment_);
      const int label = test_.labels[static_cast<size_t>(i)];
      auto sm = gradcam(*model_, input, label, cfg_.gradcam_tap);
      const std::string stem = "sample" + std::to_string(i) + "_class" + std::to_string(label);
      const auto gray = out_ / "saliency" / (stem + ".pgm");
      const auto overlay = out_ / "saliency" / (stem + "_overlay.ppm");
      write_saliency_images(sm, raw, gray.string(), overlay.string());
      csv += std::to_string(i) + "," + std::to_string(label) + "," + cfg_.gradcam_tap + "," +
             (sm.all_zero ? "1" : "0") + "," + gray.filename().string() + "," + overlay.filename().string() +
             "\n";
    }
    write_text_file((out_ / "reports" / "gradcam.csv").string(), csv);
    std::cout << "gradcam: wrote " << count << " maps to " << (out_ / "saliency").string() << "\n";
  }

  void task_retrieve() {
    ensure_model();
    auto index = extract_features(*model_, test_, augment_, cfg_.train.batch_size);
    const double map = mean_average_precision(index, cfg_.retrieval_metric);
    std::string csv = "metric,value\n";
    csv += "mAP," + format_double_exact(map) + "\n";
    csv += "queries," + std::to_string(index.size()) + "\n";
    write_text_file((out_ / "reports" / "retrieval.csv").string(), csv);
    write_text_file((out_ / "reports" / "retrieval_ranks.csv").string(),
                    retrieval_table_csv(index, 10, cfg_.retrieval_metric));
    last_map_ = map;
    std::cout << "retrieve: mAP " << format_double(map, 6) << " over " << index.size() << " queries\n";
  }

  void task_dump_kernel() {
    std::string csv = "pass,kernel,sigma,weights\n";
    auto dump = [&](const char* name, int64_t k, double sigma) {
      auto w = gaussian_kernel_1d<double>(k, sigma);
      std::string line = std::string(name) + " kernel size=" + std::to_string(k) +
                         " sigma=" + format_double(sigma, 6) + ":";
      std::string wcol;
      for (double v : w) {
        line += " " + format_double(v, 9);
        if (!wcol.empty()) wcol += ' ';
        wcol += format_double_exact(v);
      }
      std::cout << line << "\n";
      csv += std::string(name) + "," + std::to_string(k) + "," + format_double_exact(sigma) + "," + wcol + "\n";
    };
    if (cfg_.variant == Variant::FDResNet) {
      if (cfg_.filter_path != FilterPath::HighOnly) dump("low", cfg_.low_kernel, cfg_.low_sigma);
      if (cfg_.filter_path != FilterPath::LowOnly) dump("high", cfg_.high_kernel, cfg_.high_sigma);
    } else {
      dump("low", cfg_.low_kernel, cfg_.low_sigma);
    }
    write_text_file((out_ / "reports" / "kernel.csv").string(), csv);
  }

  /// Finite-difference audit: every primitive layer, then every parameter of
  /// a one-FD-block model. Always runs at 64-bit. Returns the failure count.
  int task_gradcheck() {
    int failures = 0;
    std::string csv = "check,max_rel_error,status\n";
    auto report_line = [&](const std::string& name, double err) {
      const bool ok = err < 1e-4;
      if (!ok) ++failures;
      std::printf("gradcheck %-24s max rel err %.3e %s\n", name.c_str(), err, ok ? "ok" : "FAIL");
      csv += name + "," + format_double_exact(err) + "," + (ok ? "ok" : "fail") + "\n";
    };

    Rng rng(1);
    {
      auto conv = Conv2d<double>::make(2, 3, 3, 1, 1);
      he_normal_fill(conv.weight, conv.fan_in(), rng);
      auto x = rand_uniform<double>({2, 2, 6, 6}, rng, -1, 1).set_requires_grad(true);
      auto f = [&]() {
        auto y = conv2d(x, conv);
        return mean(mul(y, y));
      };
      report_line("conv2d", finite_diff_check<double>(f, std::vector<Tensor64>{x, conv.weight}, 1e-4).max_rel_error);
    }
    {
      auto bn = BatchNorm2d<double>::make(3);
      auto x = rand_uniform<double>({2, 3, 4, 4}, rng, -1, 1).set_requires_grad(true);
      // Loss must be genuinely x-dependent: sums of y and y^2 are invariant
      // under batch normalization, so a plain quadratic would only measure
      // finite-difference noise. The cubic term breaks the invariance.
      auto f = [&]() {
        auto y = batchnorm2d(x, bn, Mode::Train);
        return mean(mul(mul(y, y), add_scalar(y, 0.3)));
      };
      report_line("batchnorm2d",
                  finite_diff_check<double>(f, std::vector<Tensor64>{x, bn.gamma, bn.beta}, 1e-4).max_rel_error);
    }
    {
      auto lin = Linear<double>::make(5, 3);
      he_normal_fill(lin.weight, 5, rng);
      auto x = rand_uniform<double>({4, 5}, rng, -1, 1).set_requires_grad(true);
      std::vector<int> labels{0, 1, 2, 0};
      auto f = [&]() { return cross_entropy(linear(x, lin), labels); };
      report_line("linear+cross_entropy",
                  finite_diff_check<double>(f, std::vector<Tensor64>{x, lin.weight, lin.bias}, 1e-5).max_rel_error);
    }
    {
      auto x = rand_uniform<double>({1, 2, 6, 6}, rng, -1, 1).set_requires_grad(true);
      auto sig = TrainableSigma<double>::init(1.0);
      auto f = [&]() {
        auto k = gaussian_kernel_1d(3, softplus(sig.raw));
        auto y = high_pass(x, k);
        return mean(mul(y, y));
      };
      report_line("gaussian_filter",
                  finite_diff_check<double>(f, std::vector<Tensor64>{x, sig.raw}, 1e-5).max_rel_error);
    }
    {
      // Every parameter of a one-FD-block model with trainable sigmas.
      BlockConfig bc;
      bc.in_ch = 3;
      bc.mid_ch = 2;
      bc.out_ch = 8;
      bc.skip = SkipVariant::FrequencyDual;
      bc.low = GaussianSpec{3, 1.0, true, PassMode::LowPass};
      bc.high = GaussianSpec{3, 1.0, true, PassMode::HighPass};
      auto block = Block<double>::build(bc);
      he_normal_fill(block.conv1.weight, block.conv1.fan_in(), rng);
      he_normal_fill(block.conv2.weight, block.conv2.fan_in(), rng);
      he_normal_fill(block.conv3.weight, block.conv3.fan_in(), rng);
      he_normal_fill(block.low_skip->proj.conv.weight, block.low_skip->proj.conv.fan_in(), rng);
      he_normal_fill(block.high_skip->proj.conv.weight, block.high_skip->proj.conv.fan_in(), rng);
      auto fc = Linear<double>::make(8, 4);
      he_normal_fill(fc.weight, 8, rng);
      auto x = rand_uniform<double>({2, 3, 6, 6}, rng);
      std::vector<int> labels{1, 3};
      std::vector<NamedParam<double>> params{
          {"conv1.weight", block.conv1.weight, ParamKind::ConvWeight},
          {"bn1.gamma", block.bn1.gamma, ParamKind::Gamma},
          {"bn1.beta", block.bn1.beta, ParamKind::Beta},
          {"conv2.weight", block.conv2.weight, ParamKind::ConvWeight},
          {"bn2.gamma", block.bn2.gamma, ParamKind::Gamma},
          {"bn2.beta", block.bn2.beta, ParamKind::Beta},
          {"conv3.weight", block.conv3.weight, ParamKind::ConvWeight},
          {"bn3.gamma", block.bn3.gamma, ParamKind::Gamma},
          {"bn3.beta", block.bn3.beta, ParamKind::Beta},
          {"skip.low.sigma_raw", block.low_skip->sigma->raw, ParamKind::SigmaRaw},
          {"skip.low.conv.weight", block.low_skip->proj.conv.weight, ParamKind::ConvWeight},
          {"skip.low.bn.gamma", block.low_skip->proj.bn.gamma, ParamKind::Gamma},
          {"skip.low.bn.beta", block.low_skip->proj.bn.beta, ParamKind::Beta},
          {"skip.high.sigma_raw", block.high_skip->sigma->raw, ParamKind::SigmaRaw},
          {"skip.high.conv.weight", block.high_skip->proj.conv.weight, ParamKind::ConvWeight},
          {"skip.high.bn.gamma", block.high_skip->proj.bn.gamma, ParamKind::Gamma},
          {"skip.high.bn.beta", block.high_skip->proj.bn.beta, ParamKind::Beta},
          {"fc.weight", fc.weight, ParamKind::LinearWeight},
          {"fc.bias", fc.bias, ParamKind::Bias},
      };
      auto f = [&]() {
        auto y = block.forward(x, Mode::Train);
        return cross_entropy(linear(global_avg_pool(y), fc), labels);
      };
      report_line("fd_block_all_params", finite_diff_check<double>(f, params, 1e-4).max_rel_error);
    }
    write_text_file((out_ / "reports" / "gradcheck.csv").string(), csv);
    return failures;
  }

  int run_tasks(const std::vector<std::string>& tasks) {
    load_data();
    write_manifest();
    int gradcheck_failures = 0;
    for (const auto& task : tasks) {
      if (task == "train") {
        task_train();
      } else if (task == "eval") {
        task_eval();
      } else if (task == "robustness") {
        task_robustness();
      } else if (task == "gradcam") {
        task_gradcam();
      } else if (task == "retrieve") {
        task_retrieve();
      } else if (task == "dump-kernel") {
        task_dump_kernel();
      } else if (task == "gradcheck") {
        gradcheck_failures += task_gradcheck();
      } else {
        throw ConfigError("config key 'tasks': unknown task '" + task + "'");
      }
    }
    if (gradcheck_failures > 0) {
      throw NumericError(std::to_string(gradcheck_failures) + " gradient checks exceeded 1e-4");
    }
    return exit_code::ok;
  }

  double last_accuracy() const { return last_accuracy_; }
  Model<T>* model() { return model_ ? &*model_ : nullptr; }
  const LabeledImageSet<T>& test_set() const { return test_; }
  const AugmentSpec& augment() const { return augment_; }

 private:
  int eval_threads() const { return deterministic_ ? 1 : 0; }  // 0 = FDNET_THREADS

  ExperimentConfig cfg_;
  std::filesystem::path out_;
  bool deterministic_;
  LabeledImageSet<T> train_, test_;
  AugmentSpec augment_;
  std::optional<Model<T>> model_;
  RunLog last_log_;
  double last_accuracy_ = 0.0;
  double last_map_ = 0.0;
};

inline ExperimentConfig assemble_config(const RunOptions& opts) {
  ExperimentConfig cfg =
      opts.config_path.empty() ? ExperimentConfig{} : load_experiment_config(opts.config_path);
  for (const auto& kv : opts.overrides) apply_override(cfg, kv);
  if (opts.seed) cfg.train.seed = *opts.seed;
  if (!opts.tasks.empty()) cfg.tasks = opts.tasks;
  cfg.validate();
  return cfg;
}

}  // namespace runner_detail

/// Executes the configured task list; returns a process exit code.
inline int run_experiment(const RunOptions& opts) {
  try {
    ExperimentConfig cfg = runner_detail::assemble_config(opts);
    auto out = runner_detail::prepare_out_dir(opts.out_dir);
    if (cfg.precision == PrecisionMode::F64) {
      runner_detail::Session<double> session(cfg, out, opts.deterministic);
      return session.run_tasks(cfg.tasks);
    }
    runner_detail::Session<float> session(cfg, out, opts.deterministic);
    return session.run_tasks(cfg.tasks);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return exit_code::config_error;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return exit_code::data_error;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return exit_code::numeric_error;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code::failure;
  }
}

namespace runner_detail {

struct CellResult {
  std::string label;
  std::string sigma;
  int64_t low_kernel = 0, high_kernel = 0;
  std::vector<double> accuracies;
  std::string status = "ok";

  double mean() const {
    double m = 0;
    for (double a : accuracies) m += a;
    return accuracies.empty() ? 0.0 : m / static_cast<double>(accuracies.size());
  }
  // Population standard deviation: repeat=1 yields 0 by construction.
  double stddev() const {
    if (accuracies.empty()) return 0.0;
    const double m = mean();
    double v = 0;
    for (double a : accuracies) v += (a - m) * (a - m);
    return std::sqrt(v / static_cast<double>(accuracies.size()));
  }
};

template <typename T>
double train_and_eval_once(const ExperimentConfig& cfg, bool deterministic,
                           const std::filesystem::path& out) {
  Session<T> session(cfg, out, deterministic);
  session.load_data();
  session.task_train();
  session.task_eval();
  return session.last_accuracy();
}

}  // namespace runner_detail

/// Grid runner: each (low,high) kernel cell times each sigma variant, trained
/// with `repeat` seeds; emits per-cell mean and standard deviation.
inline int run_sweep(const RunOptions& opts, const SweepOptions& sweep) {
  try {
    if (sweep.cells.empty()) throw ConfigError("sweep: no grid cells given (use --kernels or --cells)");
    if (sweep.repeat < 1) throw ConfigError("sweep: repeat must be >= 1");
    for (auto [lo, hi] : sweep.cells) {
      for (int64_t k : {lo, hi}) {
        if (k != 0 && k != 1 && k != 3 && k != 5 && k != 7) {
          throw ConfigError("sweep: kernel sizes must come from {1,3,5,7} (0 = Nil), got " + std::to_string(k));
        }
      }
      if (lo == 0 && hi == 0) throw ConfigError("sweep: a cell needs at least one skip connection");
    }

    ExperimentConfig base = runner_detail::assemble_config(opts);
    auto out = runner_detail::prepare_out_dir(opts.out_dir);
    write_text_file((out / "manifest.txt").string(), base.manifest_text());

    std::vector<runner_detail::CellResult> results;
    std::string runs_csv = "cell,sigma,seed,accuracy,status\n";
    for (auto [lo, hi] : sweep.cells) {
      for (const auto& sigma : sweep.sigmas) {
        runner_detail::CellResult cell;
        cell.low_kernel = lo;
        cell.high_kernel = hi;
        cell.sigma = sigma;
        cell.label = (lo ? "L" + std::to_string(lo) : "Nil") + "-" + (hi ? "H" + std::to_string(hi) : "Nil");
        for (int64_t rep = 0; rep < sweep.repeat; ++rep) {
          ExperimentConfig cfg = base;
          cfg.variant = Variant::FDResNet;
          cfg.filter_path = lo && hi ? FilterPath::Dual : (lo ? FilterPath::LowOnly : FilterPath::HighOnly);
          if (lo) cfg.low_kernel = lo;
          if (hi) cfg.high_kernel = hi;
          if (sigma == "trainable") {
            cfg.sigma_trainable = true;
            cfg.low_sigma = cfg.high_sigma = 1.0;
          } else {
            cfg.sigma_trainable = false;
            cfg.low_sigma = cfg.high_sigma = cfgtext::parse_double(sigma, "sweep sigma");
          }
          cfg.tasks = {"train", "eval"};
          const uint64_t seed = cfg.train.seed + static_cast<uint64_t>(rep);
          cfg.train.seed = seed;
          const auto cell_dir = out / "cells" / (cell.label + "-sigma" + sigma + "-seed" + std::to_string(seed));
          std::filesystem::create_directories(cell_dir / "checkpoints");
          std::filesystem::create_directories(cell_dir / "reports");
          std::filesystem::create_directories(cell_dir / "saliency");
          try {
            const double acc = cfg.precision == PrecisionMode::F64
                                   ? runner_detail::train_and_eval_once<double>(cfg, opts.deterministic, cell_dir)
                                   : runner_detail::train_and_eval_once<float>(cfg, opts.deterministic, cell_dir);
            cell.accuracies.push_back(acc);
            runs_csv += cell.label + "," + sigma + "," + std::to_string(seed) + "," +
                        format_double_exact(acc) + ",ok\n";
          } catch (const std::exception& e) {
            cell.status = std::string("failed: ") + e.what();
            runs_csv += cell.label + "," + sigma + "," + std::to_string(seed) + ",,failed\n";
            std::cerr << "sweep cell " << cell.label << " sigma " << sigma << " failed: " << e.what() << "\n";
            break;  // abort this cell only
          }
        }
        results.push_back(std::move(cell));
      }
    }

    std::string summary = "cell,sigma,low_kernel,high_kernel,repeats,mean_accuracy,std_accuracy,status\n";
    for (const auto& cell : results) {
      summary += cell.label + "," + cell.sigma + "," + std::to_string(cell.low_kernel) + "," +
                 std::to_string(cell.high_kernel) + "," + std::to_string(cell.accuracies.size()) + "," +
                 format_double_exact(cell.mean()) + "," + format_double_exact(cell.stddev()) + "," +
                 (cell.status == "ok" ? "ok" : "failed") + "\n";
      std::cout << "sweep " << cell.label << " sigma=" << cell.sigma << ": accuracy "
                << format_double(cell.mean(), 6) << " +/- " << format_double(cell.stddev(), 6) << " ("
                << cell.accuracies.size() << " runs, " << (cell.status == "ok" ? "ok" : "failed") << ")\n";
    }
    write_text_file((out / "reports" / "sweep_summary.csv").string(), summary);
    write_text_file((out / "reports" / "sweep_runs.csv").string(), runs_csv);
    return exit_code::ok;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return exit_code::config_error;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return exit_code::data_error;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return exit_code::numeric_error;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code::failure;
  }
}

}  // namespace fdnet
