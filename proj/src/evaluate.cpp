#include "cyclegzsl/evaluate.hpp"

#include <algorithm>
#include <cstdio>

#include "cyclegzsl/errors.hpp"

namespace cyclegzsl {

namespace {

std::vector<std::size_t> present_classes(const std::vector<std::size_t> &classes,
                                         const std::vector<std::size_t> &truths,
                                         std::vector<std::string> &warnings) {
  if (classes.empty()) return {};
  std::vector<std::size_t> counts(*std::max_element(classes.begin(), classes.end()) + 1, 0);
  for (std::size_t y : truths)
    if (y < counts.size()) ++counts[y];
  std::vector<std::size_t> kept;
  for (std::size_t c : classes) {
    if (counts[c])
      kept.push_back(c);
    else
      warnings.push_back("class " + std::to_string(c) + " has no test samples; left out of the average");
  }
  return kept;
}

} // namespace

LabeledFeatures synthesize_features(const MlpParams &generator, const GzslDataset &d,
                                    const std::vector<std::size_t> &classes, std::size_t per_class,
                                    std::size_t noise_dim, std::uint64_t seed) {
  if (classes.empty()) throw ContractError("synthesize_features: empty class set");
  if (per_class == 0) throw ContractError("synthesize_features: per-class count must be >= 1");
  LabeledFeatures out;
  for (std::size_t c : classes) {
    if (c >= d.class_count())
      throw ContractError("synthesize_features: class " + std::to_string(c) + " out of range");
    out.labels.insert(out.labels.end(), per_class, c);
  }
  Rng rng(seed);
  const Matrix noise = standard_normal(out.labels.size(), noise_dim, rng);
  out.features = generator_forward(generator, semantic_rows(d, out.labels), noise);
  return out;
}

const char *eval_mode_name(EvalMode m) noexcept { return m == EvalMode::zsl ? "zsl" : "gzsl"; }

EvalMode parse_eval_mode(std::string_view name) {
  if (name == "zsl") return EvalMode::zsl;
  if (name == "gzsl") return EvalMode::gzsl;
  throw UsageError("unknown mode '" + std::string(name) + "'; expected zsl or gzsl");
}

FinalClassifier fit_final_classifier(const LabeledFeatures &train, EvalMode mode,
                                     const GzslDataset &d, const StageRates &rates,
                                     std::uint64_t seed, const Log &log) {
  if (train.features.rows() != train.labels.size())
    throw DimensionError("fit_final_classifier: feature and label counts differ");
  FinalClassifier out;
  bool any_seen = false, any_unseen = false;
  for (std::size_t y : train.labels) {
    if (y >= d.class_count()) throw ValidationError("label " + std::to_string(y) + " out of range");
    if (mode == EvalMode::zsl && !d.is_unseen(y))
      throw ValidationError("zsl mode: training label " + std::to_string(y) + " is a seen class");
    (d.is_unseen(y) ? any_unseen : any_seen) = true;
  }
  if (mode == EvalMode::gzsl && (!any_seen || !any_unseen))
    throw ValidationError("gzsl mode: training labels must include seen and unseen classes");
  out.label_space = train.labels;
  std::sort(out.label_space.begin(), out.label_space.end());
  out.label_space.erase(std::unique(out.label_space.begin(), out.label_space.end()), out.label_space.end());
  if (out.label_space.size() < 2)
    throw ValidationError(std::string(eval_mode_name(mode)) + " mode: need at least 2 classes");

  std::vector<std::size_t> column(d.class_count(), 0);
  for (std::size_t i = 0; i < out.label_space.size(); ++i) column[out.label_space[i]] = i;
  std::vector<std::size_t> targets(train.labels.size());
  for (std::size_t i = 0; i < targets.size(); ++i) targets[i] = column[train.labels[i]];
  out.params = fit_softmax(train.features, targets, out.label_space.size(), rates, seed,
                           std::string("final_classifier_") + eval_mode_name(mode), log);
  return out;
}

std::vector<std::size_t> argmax_rows(const Matrix &scores) {
  std::vector<std::size_t> out(scores.rows(), 0);
  for (std::size_t r = 0; r < scores.rows(); ++r)
    for (std::size_t c = 1; c < scores.cols(); ++c)
      if (scores(r, c) > scores(r, out[r])) out[r] = c;
  return out;
}

std::vector<std::size_t> predict(const MlpParams &classifier, const Matrix &features,
                                 const std::vector<std::size_t> &label_space) {
  if (classifier.output_width() != label_space.size())
    throw ContractError("predict: classifier has " + std::to_string(classifier.output_width()) +
                        " outputs for a label space of " + std::to_string(label_space.size()));
  // Softmax is monotone per row, so the logits' argmax is the prediction.
  std::vector<std::size_t> out = argmax_rows(forward(classifier, features));
  for (std::size_t &y : out) y = label_space[y];
  return out;
}

double per_class_top1(const std::vector<std::size_t> &predictions, const std::vector<std::size_t> &truths,
                      const std::vector<std::size_t> &classes) {
  if (predictions.size() != truths.size())
    throw ContractError("per_class_top1: prediction and truth counts differ");
  if (classes.empty()) throw ContractError("per_class_top1: empty class set");
  const std::size_t span = *std::max_element(classes.begin(), classes.end()) + 1;
  std::vector<std::size_t> correct(span, 0), total(span, 0);
  std::vector<bool> member(span, false);
  for (std::size_t c : classes) member[c] = true;
  for (std::size_t i = 0; i < truths.size(); ++i) {
    const std::size_t y = truths[i];
    if (y >= span || !member[y])
      throw ContractError("per_class_top1: truth " + std::to_string(y) + " not in the class set");
    ++total[y];
    if (predictions[i] == y) ++correct[y];
  }
  double sum = 0.0;
  for (std::size_t c : classes) {
    if (total[c] == 0) throw ContractError("per_class_top1: class " + std::to_string(c) + " has no samples");
    sum += static_cast<double>(correct[c]) / static_cast<double>(total[c]);
  }
  return sum / static_cast<double>(classes.size());
}

double harmonic_mean(double u, double s) { return u + s > 0.0 ? 2.0 * s * u / (s + u) : 0.0; }

GzslMetrics gzsl_metrics(const std::vector<std::size_t> &predictions, const GzslDataset &d) {
  if (predictions.size() != d.test_labels.size())
    throw ContractError("gzsl_metrics: expected one prediction per test sample");
  GzslMetrics m;
  auto subset = [&](const std::vector<std::size_t> &classes) {
    std::vector<std::size_t> pred, truth;
    for (std::size_t i = 0; i < d.test_labels.size(); ++i)
      if (std::binary_search(classes.begin(), classes.end(), d.test_labels[i])) {
        pred.push_back(predictions[i]);
        truth.push_back(d.test_labels[i]);
      }
    return std::pair{pred, truth};
  };
  const auto unseen = present_classes(d.unseen_classes, d.test_labels, m.warnings);
  if (unseen.empty()) throw ContractError("gzsl_metrics: no unseen-class test samples");
  const auto [pu, tu] = subset(unseen);
  m.u = per_class_top1(pu, tu, unseen);

  const auto seen = present_classes(d.seen_classes, d.test_labels, m.warnings);
  if (seen.empty()) {
    m.warnings.push_back("no seen-class test samples; s and H are not reported");
    return m;
  }
  const auto [ps, ts] = subset(seen);
  m.s = per_class_top1(ps, ts, seen);
  m.H = harmonic_mean(*m.u, *m.s);
  return m;
}

GzslMetrics evaluate_generator(const MlpParams &generator, const GzslDataset &d, EvalMode mode,
                               const TrainConfig &cfg, const Log &log) {
  const std::size_t z_dim = cfg.noise_width(d.semantic_dim());
  std::vector<std::size_t> classes = d.unseen_classes;
  if (mode == EvalMode::gzsl) {
    classes.insert(classes.end(), d.seen_classes.begin(), d.seen_classes.end());
    std::sort(classes.begin(), classes.end());
  }
  const LabeledFeatures synth = synthesize_features(generator, d, classes, cfg.per_class, z_dim,
                                                    derive_seed(cfg.seed, "eval.synthesize"));
  const FinalClassifier final_cls = fit_final_classifier(synth, mode, d, cfg.classifier,
                                                         derive_seed(cfg.seed, "eval.classifier"), log);
  GzslMetrics m;
  if (mode == EvalMode::gzsl) {
    m = gzsl_metrics(predict(final_cls.params, d.test_features, final_cls.label_space), d);
  } else {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < d.test_labels.size(); ++i)
      if (d.is_unseen(d.test_labels[i])) rows.push_back(i);
    std::vector<std::size_t> truths;
    for (std::size_t i : rows) truths.push_back(d.test_labels[i]);
    const auto unseen = present_classes(d.unseen_classes, truths, m.warnings);
    m.t1_zsl = per_class_top1(predict(final_cls.params, d.test_features.gather_rows(rows), final_cls.label_space),
                              truths, unseen);
  }
  for (const auto &w : m.warnings) log.warn(w);
  return m;
}

std::string percent(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", fraction * 100.0);
  return buf;
}

} // namespace cyclegzsl
