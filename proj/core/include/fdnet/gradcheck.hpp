#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "fdnet/tensor.hpp"

namespace fdnet {

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_param;
  int64_t worst_index = -1;
  double analytic = 0.0;
  double numeric = 0.0;
};

/// Central-difference gradient oracle. `f` must be a deterministic scalar
/// function of the current parameter values, rebuilding its graph on every
/// call. Relative error per coordinate uses max(|analytic|,|numeric|,1e-8)
/// as denominator; the worst coordinate over all parameters is returned.
template <typename T>
GradCheckReport finite_diff_check(const std::function<Tensor<T>()>& f,
                                  std::vector<NamedParam<T>> params, T eps) {
  if (!(eps > T(0))) throw ShapeError("finite_diff_check: eps must be positive");

  for (auto& p : params) {
    p.tensor.set_requires_grad(true);
    p.tensor.zero_grad();
  }
  Tensor<T> loss = f();
  loss.backward();

  std::vector<std::vector<T>> analytic;
  analytic.reserve(params.size());
  for (auto& p : params) {
    if (p.tensor.has_grad()) {
      auto g = p.tensor.grad();
      analytic.emplace_back(g.begin(), g.end());
    } else {
      analytic.emplace_back(static_cast<size_t>(p.tensor.numel()), T(0));
    }
  }

  GradCheckReport report;
  NoGradGuard no_grad;  // perturbed evaluations need values only
  for (size_t pi = 0; pi < params.size(); ++pi) {
    auto vals = params[pi].tensor.values_mut();
    for (size_t i = 0; i < vals.size(); ++i) {
      const T saved = vals[i];
      vals[i] = saved + eps;
      const double f_plus = static_cast<double>(f().value());
      vals[i] = saved - eps;
      const double f_minus = static_cast<double>(f().value());
      vals[i] = saved;
      if (!std::isfinite(f_plus) || !std::isfinite(f_minus)) {
        throw NumericError("finite_diff_check: non-finite evaluation at parameter '" +
                           params[pi].name + "' coordinate " + std::to_string(i));
      }
      const double numeric = (f_plus - f_minus) / (2.0 * static_cast<double>(eps));
      const double a = static_cast<double>(analytic[pi][i]);
      const double denom = std::max({std::fabs(a), std::fabs(numeric), 1e-8});
      const double rel = std::fabs(a - numeric) / denom;
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst_param = params[pi].name;
        report.worst_index = static_cast<int64_t>(i);
        report.analytic = a;
        report.numeric = numeric;
      }
    }
  }
  return report;
}

/// Convenience overload for anonymous parameter lists.
template <typename T>
GradCheckReport finite_diff_check(const std::function<Tensor<T>()>& f,
                                  std::vector<Tensor<T>> params, T eps) {
  std::vector<NamedParam<T>> named;
  named.reserve(params.size());
  for (size_t i = 0; i < params.size(); ++i) {
    named.push_back({"p" + std::to_string(i), params[i], ParamKind::ConvWeight});
  }
  return finite_diff_check(f, std::move(named), eps);
}

}  // namespace fdnet
