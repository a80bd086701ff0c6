#pragma once

// Training objectives, each returned as a scalar graph node so callers can
// differentiate with respect to whichever network they are updating.

#include <optional>
#include <span>
#include <vector>

#include "cyclegzsl/autodiff.hpp"
#include "cyclegzsl/models.hpp"
#include "cyclegzsl/random.hpp"

namespace cyclegzsl {

struct LossWeights {
  double gp_lambda = 10.0;   // gradient penalty
  double beta = 0.01;        // classification term of the baseline objective
  double cycle_lambda = 0.01;
  double cls_lambda = 0.01;  // classification term of the cycle+classification objective

  void validate() const;
};

/// Row-wise softmax of logits, computed through log-sum-exp. Throws
/// NumericError on non-finite logits.
Matrix softmax_rows(const Matrix &logits);
/// Class probabilities of a linear softmax classifier, B×C.
Matrix softmax_prob(const MlpParams &classifier, const Matrix &visual);

/// Mean negative log-likelihood of `labels` (column indices of the
/// classifier's output) under softmax(classifier(visual)).
ad::Var cls_loss(const BoundMlp &classifier, const ad::Var &visual,
                 std::span<const std::size_t> labels);

/// Interpolation batch for the gradient penalty: x̂ = αx + (1-α)x̃ per row.
struct GpBatch {
  Matrix real;
  Matrix fake;
  Matrix semantic;
  std::vector<double> alpha;

  Matrix interpolates() const;
};

GpBatch make_gp_batch(Matrix real, Matrix fake, Matrix semantic, Rng &rng);

struct CriticObjective {
  ad::Var loss;             // E[D(x̃,a)] - E[D(x,a)] + λ·GP, minimized by the critic
  double wasserstein = 0.0; // E[D(x,a)] - E[D(x̃,a)]
  double gradient_penalty = 0.0; // λ·E[(‖∇x̂ D(x̂,a)‖₂ - 1)²]
};

/// Critic loss on a fixed GP batch. The fake features enter as constants.
CriticObjective critic_objective(const BoundMlp &critic, const GpBatch &batch, double gp_lambda);

/// -E[D(x̃, a)], minimized by the generator.
ad::Var generator_adversarial_loss(const BoundMlp &critic, const ad::Var &fake,
                                   const Matrix &semantic);

struct WganLosses {
  ad::Var critic_loss;
  ad::Var generator_loss;
  ad::Var fake;
  double wasserstein = 0.0;
  double gradient_penalty = 0.0;
};

/// Both players' losses on one batch: fake = G([a | z]), then the critic
/// objective and the generator's adversarial loss against it.
WganLosses wgan_losses(const BoundMlp &generator, const BoundMlp &critic, const Matrix &real,
                       const Matrix &semantic, const Matrix &noise, double gp_lambda, Rng &rng);

/// Mean over rows of ‖a - R(G([a | z]))‖². Used for both halves of the cycle loss.
ad::Var cycle_term(const BoundMlp &regressor, const BoundMlp &generator, const Matrix &semantic,
                   const Matrix &noise);

struct SemanticBatch {
  Matrix semantic;
  Matrix noise;
};

/// Cycle-consistency loss: seen term plus, when given, the unseen term.
ad::Var cyc_loss(const BoundMlp &regressor, const BoundMlp &generator, const SemanticBatch &seen,
                 const std::optional<SemanticBatch> &unseen = std::nullopt);

/// Mean over rows of ‖a - R(x)‖².
ad::Var reg_loss(const BoundMlp &regressor, const ad::Var &visual, const Matrix &semantic);

} // namespace cyclegzsl
