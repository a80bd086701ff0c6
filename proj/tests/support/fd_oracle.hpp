#pragma once

// Central finite differences, kept independent of the autodiff engine: the
// objective is an arbitrary function of plain matrices.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "cyclegzsl/matrix.hpp"

namespace fd {

using cyclegzsl::Matrix;
using Objective = std::function<double(const std::vector<Matrix> &)>;

inline std::vector<Matrix> central_differences(const Objective &f, std::vector<Matrix> point,
                                               double h = 1e-5) {
  std::vector<Matrix> grads;
  for (std::size_t t = 0; t < point.size(); ++t) {
    Matrix g(point[t].rows(), point[t].cols());
    for (std::size_t i = 0; i < point[t].size(); ++i) {
      const double saved = point[t].data()[i];
      point[t].data()[i] = saved + h;
      const double up = f(point);
      point[t].data()[i] = saved - h;
      const double down = f(point);
      point[t].data()[i] = saved;
      g.data()[i] = (up - down) / (2.0 * h);
    }
    grads.push_back(std::move(g));
  }
  return grads;
}

/// max_i |a_i - n_i| / max(|a_i|, |n_i|, floor). The floor keeps entries that
/// are zero up to rounding from dominating.
inline double max_relative_error(const std::vector<Matrix> &analytic,
                                 const std::vector<Matrix> &numeric, double floor = 1e-6) {
  double worst = 0.0;
  for (std::size_t t = 0; t < analytic.size(); ++t) {
    for (std::size_t i = 0; i < analytic[t].size(); ++i) {
      const double a = analytic[t].data()[i];
      const double n = numeric[t].data()[i];
      const double denom = std::max({std::abs(a), std::abs(n), floor});
      worst = std::max(worst, std::abs(a - n) / denom);
    }
  }
  return worst;
}

} // namespace fd
