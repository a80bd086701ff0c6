#include "cyclegzsl/adam.hpp"

#include <cmath>
#include <string>

#include "cyclegzsl/errors.hpp"

namespace cyclegzsl {

AdamState AdamState::for_shape(const Matrix &param, AdamHyper hyper) {
  AdamState s;
  s.first_moment = Matrix::zeros(param.rows(), param.cols());
  s.second_moment = Matrix::zeros(param.rows(), param.cols());
  s.hyper = hyper;
  return s;
}

void adam_step(Matrix &param, const Matrix &grad, AdamState &state, double lr,
               std::string_view param_name) {
  require_same_shape(param, grad, "adam_step");
  if (state.first_moment.empty() && state.step == 0) state = AdamState::for_shape(param, state.hyper);
  require_same_shape(param, state.first_moment, "adam_step");
  if (!grad.all_finite())
    throw NumericError("adam_step: non-finite gradient for parameter '" + std::string(param_name) + "'");

  const auto [b1, b2, eps] = state.hyper;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(b1, t);
  const double correction2 = 1.0 - std::pow(b2, t);

  auto p = param.data();
  auto g = grad.data();
  auto m = state.first_moment.data();
  auto v = state.second_moment.data();
  for (std::size_t i = 0; i < p.size(); ++i) {
    m[i] = b1 * m[i] + (1.0 - b1) * g[i];
    v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
    const double m_hat = m[i] / correction1;
    const double v_hat = v[i] / correction2;
    p[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
  }
}

} // namespace cyclegzsl
