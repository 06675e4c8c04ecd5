#pragma once

#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "fdnet/rng.hpp"
#include "fdnet/tensor.hpp"

namespace testutil {

inline bool near(double a, double b, double tol) { return std::fabs(a - b) <= tol; }

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

template <typename T>
double max_abs_diff_t(const fdnet::Tensor<T>& a, const fdnet::Tensor<T>& b) {
  double m = 0.0;
  auto av = a.values();
  auto bv = b.values();
  for (size_t i = 0; i < av.size(); ++i) {
    m = std::max(m, std::fabs(static_cast<double>(av[i]) - static_cast<double>(bv[i])));
  }
  return m;
}

template <typename T>
bool bitwise_equal(const fdnet::Tensor<T>& a, const fdnet::Tensor<T>& b) {
  if (a.shape() != b.shape()) return false;
  auto av = a.values();
  auto bv = b.values();
  for (size_t i = 0; i < av.size(); ++i) {
    if (av[i] != bv[i]) return false;
  }
  return true;
}

/// Scratch directory unique to the test binary invocation.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("fdnet_test_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testutil
