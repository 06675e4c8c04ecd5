#include "fdnet/config.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <functional>
#include <map>
#include <sstream>

#include "fdnet/report.hpp"

namespace fdnet {

namespace cfgtext {

namespace {

std::string trim(const std::string& s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

}  // namespace

std::vector<std::pair<std::string, std::string>> parse_kv_lines(const std::string& text,
                                                                const std::string& source) {
  std::vector<std::pair<std::string, std::string>> out;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(source + ":" + std::to_string(lineno) + ": expected 'key = value', got '" + line + "'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw ConfigError(source + ":" + std::to_string(lineno) + ": empty key");
    }
    out.emplace_back(key, value);
  }
  return out;
}

int64_t parse_int(const std::string& v, const std::string& key) {
  try {
    size_t pos = 0;
    const int64_t x = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected integer, got '" + v + "'");
  }
}

double parse_double(const std::string& v, const std::string& key) {
  try {
    size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected number, got '" + v + "'");
  }
}

bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("config key '" + key + "': expected boolean, got '" + v + "'");
}

std::vector<int64_t> parse_int_list(const std::string& v, const std::string& key) {
  std::vector<int64_t> out;
  if (trim(v).empty()) return out;
  for (const auto& part : split(v, ',')) out.push_back(parse_int(part, key));
  return out;
}

std::vector<double> parse_double_list(const std::string& v, const std::string& key) {
  std::vector<double> out;
  if (trim(v).empty()) return out;
  for (const auto& part : split(v, ',')) out.push_back(parse_double(part, key));
  return out;
}

}  // namespace cfgtext

// ---------------------------------------------------------------------------
// ModelConfig canonical text
// ---------------------------------------------------------------------------

namespace {

std::string join_int_list(const std::vector<int64_t>& xs) {
  std::string out;
  for (size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(xs[i]);
  }
  return out;
}

std::string join_double_list(const std::vector<double>& xs) {
  std::string out;
  for (size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ',';
    out += format_double_exact(xs[i]);
  }
  return out;
}

}  // namespace

std::string ModelConfig::canonical_text() const {
  std::string out;
  out += "model.variant = " + std::string(variant == Variant::ResNet ? "resnet" : "fdresnet") + "\n";
  out += "model.stage_blocks = " + join_int_list(stage_block_counts) + "\n";
  out += "model.stage_channels = " + join_int_list(stage_channels) + "\n";
  out += "model.bottleneck_ratio = " + std::to_string(bottleneck_ratio) + "\n";
  out += "model.num_classes = " + std::to_string(num_classes) + "\n";
  out += "model.in_channels = " + std::to_string(in_channels) + "\n";
  out += "model.stem.kernel = " + std::to_string(stem.kernel) + "\n";
  out += "model.stem.stride = " + std::to_string(stem.stride) + "\n";
  out += "model.stem.max_pool = " + std::string(stem.max_pool ? "true" : "false") + "\n";
  if (low) {
    out += "filter.low.kernel = " + std::to_string(low->kernel_size) + "\n";
    out += "filter.low.sigma = " + format_double_exact(low->sigma) + "\n";
  }
  if (high) {
    out += "filter.high.kernel = " + std::to_string(high->kernel_size) + "\n";
    out += "filter.high.sigma = " + format_double_exact(high->sigma) + "\n";
  }
  const bool trainable = (low && low->sigma_trainable) || (high && high->sigma_trainable);
  out += "filter.trainable = " + std::string(trainable ? "true" : "false") + "\n";
  return out;
}

ModelConfig ModelConfig::from_text(const std::string& text) {
  using namespace cfgtext;
  ModelConfig cfg;
  std::optional<int64_t> low_kernel, high_kernel;
  double low_sigma = 1.0, high_sigma = 1.0;
  bool trainable = false;
  for (const auto& [key, value] : parse_kv_lines(text, "checkpoint-config")) {
    if (key == "model.variant") {
      if (value == "resnet") {
        cfg.variant = Variant::ResNet;
      } else if (value == "fdresnet") {
        cfg.variant = Variant::FDResNet;
      } else {
        throw ConfigError("config key 'model.variant': expected resnet|fdresnet, got '" + value + "'");
      }
    } else if (key == "model.stage_blocks") {
      cfg.stage_block_counts = parse_int_list(value, key);
    } else if (key == "model.stage_channels") {
      cfg.stage_channels = parse_int_list(value, key);
    } else if (key == "model.bottleneck_ratio") {
      cfg.bottleneck_ratio = parse_int(value, key);
    } else if (key == "model.num_classes") {
      cfg.num_classes = parse_int(value, key);
    } else if (key == "model.in_channels") {
      cfg.in_channels = parse_int(value, key);
    } else if (key == "model.stem.kernel") {
      cfg.stem.kernel = parse_int(value, key);
    } else if (key == "model.stem.stride") {
      cfg.stem.stride = parse_int(value, key);
    } else if (key == "model.stem.max_pool") {
      cfg.stem.max_pool = parse_bool(value, key);
    } else if (key == "filter.low.kernel") {
      low_kernel = parse_int(value, key);
    } else if (key == "filter.low.sigma") {
      low_sigma = parse_double(value, key);
    } else if (key == "filter.high.kernel") {
      high_kernel = parse_int(value, key);
    } else if (key == "filter.high.sigma") {
      high_sigma = parse_double(value, key);
    } else if (key == "filter.trainable") {
      trainable = parse_bool(value, key);
    } else {
      throw ConfigError("unknown model config key '" + key + "' in checkpoint header");
    }
  }
  if (low_kernel) cfg.low = GaussianSpec{*low_kernel, low_sigma, trainable, PassMode::LowPass};
  if (high_kernel) cfg.high = GaussianSpec{*high_kernel, high_sigma, trainable, PassMode::HighPass};
  cfg.validate();
  return cfg;
}

// ---------------------------------------------------------------------------
// ExperimentConfig
// ---------------------------------------------------------------------------

namespace {

using Setter = std::function<void(ExperimentConfig&, const std::string& key, const std::string& value)>;

const std::map<std::string, Setter>& key_registry() {
  using namespace cfgtext;
  static const std::map<std::string, Setter> registry = {
      {"model.variant",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         if (v == "resnet") {
           c.variant = Variant::ResNet;
         } else if (v == "fdresnet") {
           c.variant = Variant::FDResNet;
         } else {
           throw ConfigError("config key '" + k + "': expected resnet|fdresnet, got '" + v + "'");
         }
       }},
      {"model.preset",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         if (v != "tiny" && v != "50" && v != "101" && v != "custom") {
           throw ConfigError("config key '" + k + "': expected tiny|50|101|custom, got '" + v + "'");
         }
         c.preset = v;
         if (v == "tiny") {
           c.stage_blocks = {1, 1, 1, 1};
           c.stage_channels = {16, 32, 64, 128};
         } else if (v == "50") {
           c.stage_blocks = {3, 4, 6, 3};
           c.stage_channels = {256, 512, 1024, 2048};
         } else if (v == "101") {
           c.stage_blocks = {3, 4, 23, 3};
           c.stage_channels = {256, 512, 1024, 2048};
         }
       }},
      {"model.stage_blocks",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.stage_blocks = parse_int_list(v, k);
         c.preset = "custom";
       }},
      {"model.stage_channels",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.stage_channels = parse_int_list(v, k);
         c.preset = "custom";
       }},
      {"model.bottleneck_ratio",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.bottleneck_ratio = parse_int(v, k); }},
      {"model.num_classes",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.num_classes = parse_int(v, k); }},
      {"model.in_channels",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.in_channels = parse_int(v, k); }},
      {"model.stem.kernel",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.stem.kernel = parse_int(v, k); }},
      {"model.stem.stride",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.stem.stride = parse_int(v, k); }},
      {"model.stem.max_pool",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.stem.max_pool = parse_bool(v, k); }},
      {"model.checkpoint",
       [](ExperimentConfig& c, const std::string&, const std::string& v) { c.model_checkpoint = v; }},
      {"filter.path",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         if (v == "dual") {
           c.filter_path = FilterPath::Dual;
         } else if (v == "low_only") {
           c.filter_path = FilterPath::LowOnly;
         } else if (v == "high_only") {
           c.filter_path = FilterPath::HighOnly;
         } else {
           throw ConfigError("config key '" + k + "': expected dual|low_only|high_only, got '" + v + "'");
         }
       }},
      {"filter.low.kernel",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.low_kernel = parse_int(v, k); }},
      {"filter.low.sigma",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.low_sigma = parse_double(v, k); }},
      {"filter.high.kernel",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.high_kernel = parse_int(v, k); }},
      {"filter.high.sigma",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.high_sigma = parse_double(v, k); }},
      {"filter.trainable",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.sigma_trainable = parse_bool(v, k); }},
      {"train.epochs",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.train.epochs = parse_int(v, k); }},
      {"train.batch_size",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.train.batch_size = parse_int(v, k); }},
      {"train.lr0",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.train.lr0 = parse_double(v, k); }},
      {"train.momentum",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.train.momentum = parse_double(v, k); }},
      {"train.weight_decay",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.train.weight_decay = parse_double(v, k);
       }},
      {"train.lr_milestones",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.train.lr_milestones = parse_int_list(v, k);
       }},
      {"train.lr_gamma",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.train.lr_gamma = parse_double(v, k); }},
      {"train.seed",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.train.seed = static_cast<uint64_t>(parse_int(v, k));
       }},
      {"train.precision",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         if (v == "f32") {
           c.precision = PrecisionMode::F32;
         } else if (v == "f64") {
           c.precision = PrecisionMode::F64;
         } else {
           throw ConfigError("config key '" + k + "': expected f32|f64, got '" + v + "'");
         }
       }},
      {"train.weight_decay_mode",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         if (v == "all") {
           c.train.decay_all = true;
         } else if (v == "weights_only") {
           c.train.decay_all = false;
         } else {
           throw ConfigError("config key '" + k + "': expected all|weights_only, got '" + v + "'");
         }
       }},
      {"train.checkpoint_every",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.train.checkpoint_every = parse_int(v, k);
       }},
      {"train.limit_train",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.limit_train = parse_int(v, k); }},
      {"data.dataset",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         if (v == "cifar10") {
           c.dataset = DatasetKind::Cifar10;
         } else if (v == "mnist") {
           c.dataset = DatasetKind::Mnist;
         } else if (v == "synthetic") {
           c.dataset = DatasetKind::Synthetic;
         } else {
           throw ConfigError("config key '" + k + "': expected cifar10|mnist|synthetic, got '" + v + "'");
         }
       }},
      {"data.dir", [](ExperimentConfig& c, const std::string&, const std::string& v) { c.data_dir = v; }},
      {"data.synthetic.n_per_class",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.synthetic_n_per_class = parse_int(v, k);
       }},
      {"data.augment.flip_prob",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.flip_prob = parse_double(v, k); }},
      {"data.normalize",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         if (v == "auto") {
           c.normalize = NormalizeMode::Auto;
         } else if (v == "none") {
           c.normalize = NormalizeMode::None;
         } else if (v == "custom") {
           c.normalize = NormalizeMode::Custom;
         } else {
           throw ConfigError("config key '" + k + "': expected auto|none|custom, got '" + v + "'");
         }
       }},
      {"data.normalize.mean",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.normalize_mean = parse_double_list(v, k);
       }},
      {"data.normalize.std",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.normalize_std = parse_double_list(v, k);
       }},
      {"tasks",
       [](ExperimentConfig& c, const std::string&, const std::string& v) {
         c.tasks.clear();
         std::string cur;
         auto flush = [&] {
           while (!cur.empty() && std::isspace(static_cast<unsigned char>(cur.front()))) cur.erase(cur.begin());
           while (!cur.empty() && std::isspace(static_cast<unsigned char>(cur.back()))) cur.pop_back();
           if (!cur.empty()) c.tasks.push_back(cur);
           cur.clear();
         };
         for (char ch : v) {
           if (ch == ',') {
             flush();
           } else {
             cur += ch;
           }
         }
         flush();
       }},
      {"robustness.kernels",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.robustness_kernels = parse_int_list(v, k);
       }},
      {"robustness.sigma",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.robustness_sigma = parse_double(v, k);
       }},
      {"gradcam.tap", [](ExperimentConfig& c, const std::string&, const std::string& v) { c.gradcam_tap = v; }},
      {"gradcam.count",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.gradcam_count = parse_int(v, k); }},
      {"retrieval.metric",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         if (v == "cosine") {
           c.retrieval_metric = RetrievalMetric::Cosine;
         } else if (v == "euclidean") {
           c.retrieval_metric = RetrievalMetric::Euclidean;
         } else {
           throw ConfigError("config key '" + k + "': expected cosine|euclidean, got '" + v + "'");
         }
       }},
  };
  return registry;
}

}  // namespace

void apply_override(ExperimentConfig& cfg, const std::string& key_value) {
  const size_t eq = key_value.find('=');
  if (eq == std::string::npos) {
    throw ConfigError("override '" + key_value + "' is not of the form key=value");
  }
  std::string key = key_value.substr(0, eq);
  std::string value = key_value.substr(eq + 1);
  // trim
  auto trim = [](std::string& s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.erase(s.begin());
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.pop_back();
  };
  trim(key);
  trim(value);
  const auto& registry = key_registry();
  const auto it = registry.find(key);
  if (it == registry.end()) throw ConfigError("unknown config key '" + key + "'");
  it->second(cfg, key, value);
}

ExperimentConfig parse_experiment_config(const std::string& text, const std::string& source) {
  ExperimentConfig cfg;
  const auto& registry = key_registry();
  for (const auto& [key, value] : cfgtext::parse_kv_lines(text, source)) {
    const auto it = registry.find(key);
    if (it == registry.end()) {
      throw ConfigError(source + ": unknown config key '" + key + "'");
    }
    it->second(cfg, key, value);
  }
  return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("config file does not exist: " + path);
  return parse_experiment_config(read_text_file(path), path);
}

ModelConfig ExperimentConfig::model_config(int64_t dataset_classes, int64_t dataset_channels) const {
  ModelConfig mc;
  mc.variant = variant;
  mc.stage_block_counts = stage_blocks;
  mc.stage_channels = stage_channels;
  mc.bottleneck_ratio = bottleneck_ratio;
  mc.num_classes = num_classes > 0 ? num_classes : dataset_classes;
  mc.in_channels = in_channels > 0 ? in_channels : dataset_channels;
  mc.stem = stem;
  if (variant == Variant::FDResNet) {
    if (filter_path != FilterPath::HighOnly) {
      mc.low = GaussianSpec{low_kernel, low_sigma, sigma_trainable, PassMode::LowPass};
    }
    if (filter_path != FilterPath::LowOnly) {
      mc.high = GaussianSpec{high_kernel, high_sigma, sigma_trainable, PassMode::HighPass};
    }
  }
  mc.validate();
  return mc;
}

void ExperimentConfig::validate() const {
  train.validate();
  if (dataset != DatasetKind::Synthetic) {
    if (data_dir.empty()) throw ConfigError("config key 'data.dir' is required for dataset files");
    if (!std::filesystem::exists(data_dir)) {
      throw ConfigError("config key 'data.dir': path does not exist: " + data_dir);
    }
  }
  if (!model_checkpoint.empty() && !std::filesystem::exists(model_checkpoint)) {
    throw ConfigError("config key 'model.checkpoint': path does not exist: " + model_checkpoint);
  }
  if (synthetic_n_per_class < 50) {
    throw ConfigError("config key 'data.synthetic.n_per_class' must be >= 50");
  }
  if (flip_prob < 0.0 || flip_prob > 1.0) {
    throw ConfigError("config key 'data.augment.flip_prob' must be in [0,1]");
  }
  if (normalize == NormalizeMode::Custom) {
    if (normalize_mean.empty() || normalize_mean.size() != normalize_std.size()) {
      throw ConfigError("config keys 'data.normalize.mean'/'data.normalize.std' must be equal-length lists");
    }
    for (double s : normalize_std) {
      if (!(s > 0.0)) throw ConfigError("config key 'data.normalize.std': entries must be positive");
    }
  }
  if (limit_train < 0) throw ConfigError("config key 'train.limit_train' must be >= 0");
  if (gradcam_count < 1) throw ConfigError("config key 'gradcam.count' must be >= 1");
  for (int64_t k : robustness_kernels) {
    if (k < 1 || k % 2 == 0) throw ConfigError("config key 'robustness.kernels': entries must be odd positive");
  }
  if (!(robustness_sigma > 0.0)) throw ConfigError("config key 'robustness.sigma' must be positive");
  static const std::vector<std::string> known_tasks = {"train",    "eval",        "robustness", "gradcam",
                                                       "retrieve", "dump-kernel", "gradcheck"};
  for (const auto& t : tasks) {
    if (std::find(known_tasks.begin(), known_tasks.end(), t) == known_tasks.end()) {
      throw ConfigError("config key 'tasks': unknown task '" + t + "'");
    }
  }
}

std::string ExperimentConfig::manifest_text() const {
  std::string out;
  out += "model.variant = " + std::string(variant == Variant::ResNet ? "resnet" : "fdresnet") + "\n";
  out += "model.stage_blocks = " + join_int_list(stage_blocks) + "\n";
  out += "model.stage_channels = " + join_int_list(stage_channels) + "\n";
  out += "model.bottleneck_ratio = " + std::to_string(bottleneck_ratio) + "\n";
  out += "model.num_classes = " + std::to_string(num_classes) + "\n";
  out += "model.in_channels = " + std::to_string(in_channels) + "\n";
  out += "model.stem.kernel = " + std::to_string(stem.kernel) + "\n";
  out += "model.stem.stride = " + std::to_string(stem.stride) + "\n";
  out += "model.stem.max_pool = " + std::string(stem.max_pool ? "true" : "false") + "\n";
  if (!model_checkpoint.empty()) out += "model.checkpoint = " + model_checkpoint + "\n";
  out += "filter.path = " +
         std::string(filter_path == FilterPath::Dual ? "dual"
                     : filter_path == FilterPath::LowOnly ? "low_only" : "high_only") + "\n";
  out += "filter.low.kernel = " + std::to_string(low_kernel) + "\n";
  out += "filter.low.sigma = " + format_double_exact(low_sigma) + "\n";
  out += "filter.high.kernel = " + std::to_string(high_kernel) + "\n";
  out += "filter.high.sigma = " + format_double_exact(high_sigma) + "\n";
  out += "filter.trainable = " + std::string(sigma_trainable ? "true" : "false") + "\n";
  out += "train.epochs = " + std::to_string(train.epochs) + "\n";
  out += "train.batch_size = " + std::to_string(train.batch_size) + "\n";
  out += "train.lr0 = " + format_double_exact(train.lr0) + "\n";
  out += "train.momentum = " + format_double_exact(train.momentum) + "\n";
  out += "train.weight_decay = " + format_double_exact(train.weight_decay) + "\n";
  out += "train.lr_milestones = " + join_int_list(train.lr_milestones) + "\n";
  out += "train.lr_gamma = " + format_double_exact(train.lr_gamma) + "\n";
  out += "train.seed = " + std::to_string(train.seed) + "\n";
  out += "train.precision = " + std::string(precision == PrecisionMode::F32 ? "f32" : "f64") + "\n";
  out += "train.weight_decay_mode = " + std::string(train.decay_all ? "all" : "weights_only") + "\n";
  out += "train.checkpoint_every = " + std::to_string(train.checkpoint_every) + "\n";
  out += "train.limit_train = " + std::to_string(limit_train) + "\n";
  out += "data.dataset = " +
         std::string(dataset == DatasetKind::Cifar10 ? "cifar10"
                     : dataset == DatasetKind::Mnist ? "mnist" : "synthetic") + "\n";
  if (!data_dir.empty()) out += "data.dir = " + data_dir + "\n";
  out += "data.synthetic.n_per_class = " + std::to_string(synthetic_n_per_class) + "\n";
  out += "data.augment.flip_prob = " + format_double_exact(flip_prob) + "\n";
  out += "data.normalize = " +
         std::string(normalize == NormalizeMode::Auto ? "auto"
                     : normalize == NormalizeMode::None ? "none" : "custom") + "\n";
  if (!normalize_mean.empty()) {
    out += "data.normalize.mean = " + join_double_list(normalize_mean) + "\n";
    out += "data.normalize.std = " + join_double_list(normalize_std) + "\n";
  }
  std::string task_list;
  for (size_t i = 0; i < tasks.size(); ++i) {
    if (i) task_list += ',';
    task_list += tasks[i];
  }
  out += "tasks = " + task_list + "\n";
  out += "robustness.kernels = " + join_int_list(robustness_kernels) + "\n";
  out += "robustness.sigma = " + format_double_exact(robustness_sigma) + "\n";
  out += "gradcam.tap = " + gradcam_tap + "\n";
  out += "gradcam.count = " + std::to_string(gradcam_count) + "\n";
  out += "retrieval.metric = " +
         std::string(retrieval_metric == RetrievalMetric::Cosine ? "cosine" : "euclidean") + "\n";
  return out;
}

}  // namespace fdnet
