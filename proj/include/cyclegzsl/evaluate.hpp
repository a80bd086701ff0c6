#pragma once

// Feature synthesis, the final softmax classifier, and the ZSL/GZSL protocol
// with per-class top-1 accuracy.

#include <optional>
#include <string>
#include <vector>

#include "cyclegzsl/config.hpp"
#include "cyclegzsl/data.hpp"
#include "cyclegzsl/models.hpp"
#include "cyclegzsl/training.hpp"

namespace cyclegzsl {

struct LabeledFeatures {
  Matrix features;
  std::vector<std::size_t> labels; // dataset class ids
};

/// `per_class` samples G(a_c, z) per listed class, class by class, noise drawn
/// from `seed`. Throws ContractError for an empty or out-of-range class list.
LabeledFeatures synthesize_features(const MlpParams &generator, const GzslDataset &dataset,
                                    const std::vector<std::size_t> &classes, std::size_t per_class,
                                    std::size_t noise_dim, std::uint64_t seed);

enum class EvalMode { zsl, gzsl };
const char *eval_mode_name(EvalMode m) noexcept;
EvalMode parse_eval_mode(std::string_view name);

struct FinalClassifier {
  MlpParams params;
  std::vector<std::size_t> label_space; // class id of each output column, ascending
};

/// zsl: labels must all be unseen; gzsl: labels must cover seen and unseen
/// classes. Violations raise ValidationError.
FinalClassifier fit_final_classifier(const LabeledFeatures &train, EvalMode mode,
                                     const GzslDataset &dataset, const StageRates &rates,
                                     std::uint64_t seed, const Log &log = Log::silent());

/// Column of the largest score per row; ties go to the lowest column.
std::vector<std::size_t> argmax_rows(const Matrix &scores);
std::vector<std::size_t> predict(const MlpParams &classifier, const Matrix &features,
                                 const std::vector<std::size_t> &label_space);

/// Mean over `classes` of the within-class accuracy. Every truth must be in
/// `classes` and every class must have at least one truth (ContractError).
double per_class_top1(const std::vector<std::size_t> &predictions,
                      const std::vector<std::size_t> &truths, const std::vector<std::size_t> &classes);

/// 2su / (s + u), and 0 when s + u = 0.
double harmonic_mean(double u, double s);

struct GzslMetrics {
  std::optional<double> u, s, H;
  std::optional<double> t1_zsl;
  std::vector<std::string> warnings;
};

/// u over unseen and s over seen classes of the full test set. Classes
/// without test samples are left out with a warning; s and H stay empty when
/// no seen class has test samples.
GzslMetrics gzsl_metrics(const std::vector<std::size_t> &predictions, const GzslDataset &dataset);

/// Synthesize, fit the final classifier, predict, score. ZSL uses only the
/// unseen-class test samples and fills t1_zsl.
GzslMetrics evaluate_generator(const MlpParams &generator, const GzslDataset &dataset, EvalMode mode,
                               const TrainConfig &config, const Log &log = Log::silent());

/// Fraction rendered as a percentage with one decimal, "50.8".
std::string percent(double fraction);

} // namespace cyclegzsl
