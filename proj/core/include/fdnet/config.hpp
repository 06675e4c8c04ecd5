#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fdnet/data.hpp"
#include "fdnet/model.hpp"
#include "fdnet/train.hpp"

namespace fdnet {

enum class DatasetKind { Cifar10, Mnist, Synthetic };
enum class NormalizeMode { Auto, None, Custom };
enum class FilterPath { Dual, LowOnly, HighOnly };
enum class PrecisionMode { F32, F64 };

/// Everything one experiment needs, assembled from a key=value config file
/// plus dotted-path overrides. Unknown or ill-typed keys are rejected before
/// any compute.
struct ExperimentConfig {
  // model.*
  Variant variant = Variant::FDResNet;
  std::string preset = "tiny";  // tiny | 50 | 101 | custom
  std::vector<int64_t> stage_blocks{1, 1, 1, 1};
  std::vector<int64_t> stage_channels{16, 32, 64, 128};
  int64_t bottleneck_ratio = 4;
  int64_t num_classes = 0;  // 0 = from dataset
  int64_t in_channels = 0;  // 0 = from dataset
  StemConfig stem;
  std::string model_checkpoint;  // load instead of training when set

  // filter.*
  FilterPath filter_path = FilterPath::Dual;
  int64_t low_kernel = 3;
  double low_sigma = 1.0;
  int64_t high_kernel = 3;
  double high_sigma = 1.0;
  bool sigma_trainable = false;

  // train.*
  TrainConfig train;
  PrecisionMode precision = PrecisionMode::F32;
  int64_t limit_train = 0;  // 0 = full split

  // data.*
  DatasetKind dataset = DatasetKind::Synthetic;
  std::string data_dir;
  int64_t synthetic_n_per_class = 500;
  double flip_prob = 0.5;
  NormalizeMode normalize = NormalizeMode::Auto;
  std::vector<double> normalize_mean, normalize_std;

  // tasks
  std::vector<std::string> tasks{"train", "eval"};

  // task knobs
  std::vector<int64_t> robustness_kernels{3, 5, 7};
  double robustness_sigma = 1.0;
  std::string gradcam_tap = "stem.conv";
  int64_t gradcam_count = 8;
  RetrievalMetric retrieval_metric = RetrievalMetric::Cosine;

  /// ModelConfig for a dataset with the given class/channel counts
  /// (explicit config values win over the dataset-derived ones).
  ModelConfig model_config(int64_t dataset_classes, int64_t dataset_channels) const;

  /// Echo of every effective key, itself a loadable config.
  std::string manifest_text() const;

  void validate() const;
};

/// Parses config text; `source` names the file in error messages.
ExperimentConfig parse_experiment_config(const std::string& text, const std::string& source);
ExperimentConfig load_experiment_config(const std::string& path);

/// Applies one "key=value" override.
void apply_override(ExperimentConfig& cfg, const std::string& key_value);

namespace cfgtext {

/// key = value lines; '#' comments; blank lines skipped. Returns pairs in
/// file order. Malformed lines raise ConfigError naming `source`.
std::vector<std::pair<std::string, std::string>> parse_kv_lines(const std::string& text,
                                                                const std::string& source);

std::vector<int64_t> parse_int_list(const std::string& v, const std::string& key);
std::vector<double> parse_double_list(const std::string& v, const std::string& key);
int64_t parse_int(const std::string& v, const std::string& key);
double parse_double(const std::string& v, const std::string& key);
bool parse_bool(const std::string& v, const std::string& key);

}  // namespace cfgtext

}  // namespace fdnet
