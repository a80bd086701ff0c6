#pragma once

// Pretraining of the regressor and the seen-class classifier, adversarial
// training of the feature generator, and the unseen-semantics fine-tune.
//
// An epoch is one pass over the seen-class training samples in shuffled
// mini-batches. Every mini-batch drives one critic update; every n_critic-th
// critic update is followed by one generator update.

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cyclegzsl/config.hpp"
#include "cyclegzsl/data.hpp"
#include "cyclegzsl/losses.hpp"
#include "cyclegzsl/models.hpp"

namespace cyclegzsl {

/// Line-oriented progress and warning output; the default sink is stderr.
struct Log {
  std::function<void(const std::string &)> sink;

  void info(const std::string &msg) const;
  void warn(const std::string &msg) const;
  static Log stderr_log();
  static Log silent();
};

struct EpochMetrics {
  std::size_t epoch = 0;
  std::optional<double> loss_d, loss_g, gp, wasserstein;
  std::optional<double> l_cls, l_cyc, l_reg;
  std::optional<double> fake_seen_top1;
  std::optional<double> wall_seconds;
};

inline constexpr const char *kMetricsHeader =
    "epoch,loss_d,loss_g,gp,wasserstein,l_cls,l_cyc,l_reg,fake_seen_top1,wall_seconds";
std::string metrics_csv(const std::vector<EpochMetrics> &rows);

struct RegressorResult {
  MlpParams params;
  std::vector<EpochMetrics> curve; // l_reg per epoch
};

RegressorOutput regressor_output_for(const GzslDataset &dataset) noexcept;

RegressorResult pretrain_regressor(const GzslDataset &dataset, const TrainConfig &config,
                                   const Log &log = Log::silent());

/// Softmax classifier on features with labels in [0, classes), trained by
/// mini-batch Adam. Shared by seen-class pretraining and the final classifier.
MlpParams fit_softmax(const Matrix &features, const std::vector<std::size_t> &labels,
                      std::size_t classes, const StageRates &rates, std::uint64_t seed,
                      const std::string &stage, const Log &log = Log::silent());

/// Classifier over the seen classes; output column i is seen_classes[i].
/// Throws ValidationError when fewer than two seen classes exist.
MlpParams pretrain_classifier(const GzslDataset &dataset, const TrainConfig &config,
                              const Log &log = Log::silent());

struct CriticStep {
  double loss = 0.0;
  double gradient_penalty = 0.0;
  double wasserstein = 0.0;
};

/// One critic update on a batch. The generator only produces the fake batch
/// and is never written.
CriticStep critic_update(MlpParams &critic, MlpOptimizer &optimizer, const MlpParams &generator,
                         const Matrix &real, const Matrix &semantic, const Matrix &noise,
                         double gp_lambda, double lr, Rng &alpha_rng);

struct GeneratorTerms {
  const MlpParams *regressor = nullptr;  // adds cycle_lambda · l_cyc when set
  const MlpParams *classifier = nullptr; // adds cls_weight · l_cls when set
  double cycle_lambda = 0.0;
  double cls_weight = 0.0;
  std::vector<std::size_t> cls_labels;   // classifier output columns
  std::optional<SemanticBatch> unseen;   // second cycle term
};

struct GeneratorStep {
  double loss = 0.0;
  std::optional<double> l_cyc, l_cls;
};

/// One generator update. Critic, regressor and classifier are read only.
GeneratorStep generator_update(MlpParams &generator, MlpOptimizer &optimizer, const MlpParams &critic,
                               const Matrix &semantic, const Matrix &noise, const GeneratorTerms &terms,
                               double lr);

struct Pretrained {
  std::optional<MlpParams> regressor;
  std::optional<MlpParams> classifier; // seen-class classifier
};

struct TrainArtifacts {
  MlpParams generator;
  MlpParams critic;
  std::optional<MlpParams> regressor;
  std::optional<MlpParams> classifier;
  std::vector<EpochMetrics> metrics;
  std::vector<std::string> warnings;
  std::string dataset_fingerprint;
};

/// Throws ConfigError when the variant's pretrained dependency is missing and
/// TrainingError (with stage and epoch) on a non-finite loss.
TrainArtifacts train_gan(const GzslDataset &dataset, const TrainConfig &config,
                         const Pretrained &pretrained, const Log &log = Log::silent());

/// Continues a cycle-wgan run with the unseen-semantics cycle term for
/// config.finetune_epochs() epochs, with fresh optimizer state.
TrainArtifacts finetune_uwgan(TrainArtifacts from, const GzslDataset &dataset,
                              const TrainConfig &config, const Log &log = Log::silent());

/// Cycle loss on a fixed batch: `per_class` copies of every unseen class
/// semantic vector, each with noise drawn from `seed`.
double unseen_cycle_loss(const MlpParams &regressor, const MlpParams &generator,
                         const GzslDataset &dataset, std::size_t noise_dim, std::size_t per_class,
                         std::uint64_t seed);

/// Per-class top-1 of the seen-class classifier on features synthesized for
/// the seen classes, `per_class` per class from fixed noise.
double fake_seen_top1(const MlpParams &generator, const MlpParams &seen_classifier,
                      const GzslDataset &dataset, std::size_t noise_dim, std::size_t per_class,
                      std::uint64_t seed);

} // namespace cyclegzsl
