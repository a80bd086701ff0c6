#pragma once

#include <cstdint>
#include <string_view>

#include "cyclegzsl/matrix.hpp"

namespace cyclegzsl {

/// Optimizer constants. The defaults are the usual WGAN-GP settings.
struct AdamHyper {
  double beta1 = 0.5;
  double beta2 = 0.9;
  double epsilon = 1e-8;
};

/// Moment estimates for one parameter matrix.
struct AdamState {
  Matrix first_moment;
  Matrix second_moment;
  std::uint64_t step = 0;
  AdamHyper hyper;

  static AdamState for_shape(const Matrix &param, AdamHyper hyper = {});
};

/// One bias-corrected Adam update of `param` in place. Throws NumericError
/// naming `param_name` if `grad` holds a NaN or Inf.
void adam_step(Matrix &param, const Matrix &grad, AdamState &state, double lr,
               std::string_view param_name = "param");

} // namespace cyclegzsl
