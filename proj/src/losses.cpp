#include "cyclegzsl/losses.hpp"

#include <algorithm>
#include <cmath>

#include "cyclegzsl/errors.hpp"

namespace cyclegzsl {

namespace {

ad::Var critic_score(const BoundMlp &critic, const ad::Var &visual, const Matrix &semantic) {
  return critic(ad::concat_cols(visual, ad::leaf(semantic)));
}

void require_finite(const Matrix &m, const char *what) {
  if (!m.all_finite()) throw NumericError(std::string(what) + ": non-finite value");
}

} // namespace

void LossWeights::validate() const {
  if (!(gp_lambda >= 0.0) || !(beta >= 0.0) || !(cycle_lambda >= 0.0) || !(cls_lambda >= 0.0))
    throw ConfigError("loss weights must be >= 0");
}

Matrix softmax_rows(const Matrix &logits) {
  require_finite(logits, "softmax_prob logits");
  Matrix out(logits.rows(), logits.cols());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    const auto row = logits.row(r);
    const double m = *std::max_element(row.begin(), row.end());
    double s = 0.0;
    for (double v : row) s += std::exp(v - m);
    const double lse = m + std::log(s);
    for (std::size_t c = 0; c < row.size(); ++c) out(r, c) = std::exp(row[c] - lse);
  }
  return out;
}

Matrix softmax_prob(const MlpParams &classifier, const Matrix &visual) {
  return softmax_rows(forward(classifier, visual));
}

ad::Var cls_loss(const BoundMlp &classifier, const ad::Var &visual,
                 std::span<const std::size_t> labels) {
  if (labels.size() != visual.rows())
    throw DimensionError("cls_loss: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(visual.rows()) + " samples");
  const ad::Var logits = classifier(visual);
  require_finite(logits.value(), "cls_loss logits");
  Matrix one_hot(logits.rows(), logits.cols());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= logits.cols())
      throw ValidationError("cls_loss: label " + std::to_string(labels[i]) + " out of range [0, " +
                            std::to_string(logits.cols()) + ")");
    one_hot(i, labels[i]) = 1.0;
  }
  const ad::Var true_logit = ad::row_sum(ad::mul(logits, ad::leaf(std::move(one_hot))));
  return ad::mean_all(ad::sub(ad::log_sum_exp(logits), true_logit));
}

Matrix GpBatch::interpolates() const {
  Matrix out(real.rows(), real.cols());
  for (std::size_t r = 0; r < real.rows(); ++r)
    for (std::size_t c = 0; c < real.cols(); ++c)
      out(r, c) = alpha[r] * real(r, c) + (1.0 - alpha[r]) * fake(r, c);
  return out;
}

GpBatch make_gp_batch(Matrix real, Matrix fake, Matrix semantic, Rng &rng) {
  require_same_shape(real, fake, "gp_batch");
  if (semantic.rows() != real.rows()) throw DimensionError("gp_batch: semantic batch size differs");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> alpha(real.rows());
  for (double &a : alpha) a = unit(rng);
  return GpBatch{std::move(real), std::move(fake), std::move(semantic), std::move(alpha)};
}

CriticObjective critic_objective(const BoundMlp &critic, const GpBatch &batch, double gp_lambda) {
  if (batch.alpha.size() != batch.real.rows())
    throw DimensionError("critic_objective: alpha count differs from batch size");
  require_same_shape(batch.real, batch.fake, "critic_objective");
  const ad::Var real_score = critic_score(critic, ad::leaf(batch.real), batch.semantic);
  const ad::Var fake_score = critic_score(critic, ad::leaf(batch.fake), batch.semantic);
  require_finite(real_score.value(), "critic output");
  require_finite(fake_score.value(), "critic output");

  const ad::Var interp = ad::leaf(batch.interpolates(), "x_hat");
  const ad::Var interp_score = critic_score(critic, interp, batch.semantic);
  const ad::Var grad = ad::input_gradient(interp_score, interp);
  const ad::Var deviation =
      ad::sub(ad::row_norm(grad), ad::leaf(Matrix::ones(grad.rows(), 1)));
  const ad::Var penalty = ad::mean_all(ad::mul(deviation, deviation));

  const ad::Var real_mean = ad::mean_all(real_score);
  const ad::Var fake_mean = ad::mean_all(fake_score);
  CriticObjective out;
  out.loss = ad::add(ad::sub(fake_mean, real_mean), ad::scale(penalty, gp_lambda));
  out.wasserstein = real_mean.scalar() - fake_mean.scalar();
  out.gradient_penalty = gp_lambda * penalty.scalar();
  require_finite(out.loss.value(), "critic loss");
  return out;
}

ad::Var generator_adversarial_loss(const BoundMlp &critic, const ad::Var &fake,
                                   const Matrix &semantic) {
  const ad::Var score = critic_score(critic, fake, semantic);
  require_finite(score.value(), "critic output");
  return ad::scale(ad::mean_all(score), -1.0);
}

WganLosses wgan_losses(const BoundMlp &generator, const BoundMlp &critic, const Matrix &real,
                       const Matrix &semantic, const Matrix &noise, double gp_lambda, Rng &rng) {
  if (gp_lambda < 0.0) throw ContractError("wgan_losses: lambda must be >= 0");
  if (real.rows() != semantic.rows() || noise.rows() != semantic.rows())
    throw DimensionError("wgan_losses: batch sizes of x, a, z differ");
  WganLosses out;
  out.fake = generator(ad::concat_cols(ad::leaf(semantic), ad::leaf(noise)));
  const GpBatch batch = make_gp_batch(real, out.fake.value(), semantic, rng);
  CriticObjective critic_terms = critic_objective(critic, batch, gp_lambda);
  out.critic_loss = critic_terms.loss;
  out.wasserstein = critic_terms.wasserstein;
  out.gradient_penalty = critic_terms.gradient_penalty;
  out.generator_loss = generator_adversarial_loss(critic, out.fake, semantic);
  return out;
}

ad::Var cycle_term(const BoundMlp &regressor, const BoundMlp &generator, const Matrix &semantic,
                   const Matrix &noise) {
  if (semantic.rows() != noise.rows())
    throw DimensionError("cyc_loss: semantic and noise batch sizes differ");
  const ad::Var fake = generator(ad::concat_cols(ad::leaf(semantic), ad::leaf(noise)));
  const ad::Var reconstructed = regressor(fake);
  if (reconstructed.cols() != semantic.cols())
    throw DimensionError("cyc_loss: regressor output width differs from semantic width");
  return ad::mean_all(ad::row_sq_norm(ad::sub(ad::leaf(semantic), reconstructed)));
}

ad::Var cyc_loss(const BoundMlp &regressor, const BoundMlp &generator, const SemanticBatch &seen,
                 const std::optional<SemanticBatch> &unseen) {
  ad::Var loss = cycle_term(regressor, generator, seen.semantic, seen.noise);
  if (unseen) loss = ad::add(loss, cycle_term(regressor, generator, unseen->semantic, unseen->noise));
  return loss;
}

ad::Var reg_loss(const BoundMlp &regressor, const ad::Var &visual, const Matrix &semantic) {
  if (visual.rows() != semantic.rows())
    throw DimensionError("reg_loss: visual and semantic batch sizes differ");
  const ad::Var predicted = regressor(visual);
  if (predicted.cols() != semantic.cols())
    throw DimensionError("reg_loss: regressor output width differs from semantic width");
  return ad::mean_all(ad::row_sq_norm(ad::sub(ad::leaf(semantic), predicted)));
}

} // namespace cyclegzsl
