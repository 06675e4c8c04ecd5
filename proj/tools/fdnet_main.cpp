#include <CLI11.hpp>
#include <iostream>
#include <string>
#include <vector>

#include "fdnet/runner.hpp"

namespace {

// Cell notation from the experiment grid: "L3H5", "L3Nil", "NilH3".
std::pair<int64_t, int64_t> parse_cell(const std::string& cell) {
  size_t pos = 0;
  auto take = [&](char tag) -> int64_t {
    if (cell.compare(pos, 3, "Nil") == 0) {
      pos += 3;
      return 0;
    }
    if (pos + 1 < cell.size() && cell[pos] == tag &&
        std::isdigit(static_cast<unsigned char>(cell[pos + 1]))) {
      const int64_t v = cell[pos + 1] - '0';
      pos += 2;
      return v;
    }
    throw fdnet::ConfigError("cannot parse sweep cell '" + cell + "' (expected e.g. L3H5, L3Nil, NilH3)");
  };
  const int64_t lo = take('L');
  const int64_t hi = take('H');
  if (pos != cell.size()) {
    throw fdnet::ConfigError("cannot parse sweep cell '" + cell + "' (trailing characters)");
  }
  return {lo, hi};
}

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else if (!std::isspace(static_cast<unsigned char>(c))) {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fdnet: frequency-disentangled residual networks at desk scale"};
  app.require_subcommand(1);

  fdnet::RunOptions opts;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", opts.config_path, "Experiment config file (key = value lines)");
    cmd->add_option("--set", opts.overrides, "Override a config key, e.g. --set filter.low.kernel=5")
        ->take_all();
    cmd->add_option("--out", opts.out_dir, "Output directory (default runs/<timestamp>)");
    cmd->add_option("--seed", [&](const CLI::results_t& res) {
      opts.seed = static_cast<uint64_t>(std::stoull(res[0]));
      return true;
    }, "Override train.seed");
    cmd->add_option("--deterministic", opts.deterministic,
                    "Force single-threaded deterministic execution (default true)");
  };

  auto* run_cmd = app.add_subcommand("run", "Execute the configured tasks");
  add_common(run_cmd);
  run_cmd->add_option("--task", opts.tasks,
                      "Task to run (train, eval, robustness, gradcam, retrieve, dump-kernel, gradcheck); "
                      "repeatable, overrides the config's task list")
      ->take_all();

  auto* sweep_cmd = app.add_subcommand("sweep", "Run a kernel/sigma grid and summarize mean +/- std");
  add_common(sweep_cmd);
  std::string kernels_arg, cells_arg, sigmas_arg = "1";
  fdnet::SweepOptions sweep;
  sweep_cmd->add_option("--kernels", kernels_arg, "Symmetric cells (Lk,Hk), e.g. --kernels 3,5,7");
  sweep_cmd->add_option("--cells", cells_arg, "Explicit cells, e.g. --cells L3H5,L5H3,L3Nil,NilH3");
  sweep_cmd->add_option("--sigmas", sigmas_arg, "Sigma list from {0.5,1,1.5,trainable} (default 1)");
  sweep_cmd->add_option("--repeat", sweep.repeat, "Seeds per cell (default 1)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run_cmd->parsed()) {
      return fdnet::run_experiment(opts);
    }
    for (const auto& k : split_commas(kernels_arg)) {
      const int64_t kk = fdnet::cfgtext::parse_int(k, "--kernels");
      sweep.cells.emplace_back(kk, kk);
    }
    for (const auto& c : split_commas(cells_arg)) sweep.cells.push_back(parse_cell(c));
    sweep.sigmas = split_commas(sigmas_arg);
    if (sweep.sigmas.empty()) sweep.sigmas = {"1"};
    return fdnet::run_sweep(opts, sweep);
  } catch (const fdnet::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return fdnet::exit_code::config_error;
  }
}
