#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "tvc/numcore/tape.hpp"

namespace tvc::testing {

struct GradCheck {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  // Location of the worst coordinate.
  std::string worst_param;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

/// Central finite differences against tape gradients for every element of
/// every parameter. Relative error uses max(|a|, |n|, floor) as denominator.
/// Coordinates whose two-point estimate disagrees by more than `refine_above`
/// are re-estimated with the fourth-order five-point stencil at step `h4`,
/// which removes most of the round-off in small gradients.
inline GradCheck check_gradients(std::span<num::Parameter* const> params,
                                 const std::function<num::Var(num::Tape&)>& loss_fn,
                                 double h = 1e-5, double floor = 1e-3,
                                 double refine_above = std::numeric_limits<double>::infinity(),
                                 double h4 = 1e-3) {
  for (auto* p : params) p->grad.clear();
  {
    num::Tape tape;
    tape.backward(loss_fn(tape));
  }
  std::vector<std::vector<double>> analytic;
  for (auto* p : params) {
    if (!p->has_grad()) p->zero_grad();
    analytic.push_back(p->grad);
  }
  auto eval = [&] {
    num::Tape tape;
    return loss_fn(tape).item();
  };
  GradCheck out;
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& data = params[k]->value.data;
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double saved = data[i];
      data[i] = saved + h;
      const double up = eval();
      data[i] = saved - h;
      const double down = eval();
      data[i] = saved;
      double numeric = (up - down) / (2.0 * h);
      const double a = analytic[k][i];
      double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
      if (rel > refine_above) {
        auto at = [&](double offset) {
          data[i] = saved + offset;
          const double v = eval();
          data[i] = saved;
          return v;
        };
        numeric = (at(-2 * h4) - 8 * at(-h4) + 8 * at(h4) - at(2 * h4)) / (12 * h4);
        rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
      }
      if (rel > out.max_rel_error) {
        out.max_rel_error = rel;
        out.worst_param = params[k]->name;
        out.worst_index = i;
        out.worst_analytic = a;
        out.worst_numeric = numeric;
      }
      ++out.checked;
    }
  }
  return out;
}

}  // namespace tvc::testing
