#include "cyclegzsl/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iostream>
#include <numeric>

#include "cyclegzsl/errors.hpp"
#include "cyclegzsl/evaluate.hpp"
#include "cyclegzsl/losses.hpp"
#include "cyclegzsl/textio.hpp"

namespace cyclegzsl {

namespace {

using Clock = std::chrono::steady_clock;

std::vector<std::vector<std::size_t>> shuffled_batches(std::size_t n, std::size_t batch, Rng &rng) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t start = 0; start < n; start += batch)
    out.emplace_back(perm.begin() + static_cast<std::ptrdiff_t>(start),
                     perm.begin() + static_cast<std::ptrdiff_t>(std::min(n, start + batch)));
  return out;
}

std::vector<std::size_t> seen_index_map(const GzslDataset &d) {
  std::vector<std::size_t> index(d.class_count(), static_cast<std::size_t>(-1));
  for (std::size_t i = 0; i < d.seen_classes.size(); ++i) index[d.seen_classes[i]] = i;
  return index;
}

double finite_or_fail(double v, const std::string &stage, std::size_t epoch, const char *what) {
  if (!std::isfinite(v))
    throw TrainingError(stage + ": non-finite " + what + " at epoch " + std::to_string(epoch));
  return v;
}

struct Mean {
  double total = 0.0;
  std::size_t count = 0;
  void add(double v) {
    total += v;
    ++count;
  }
  std::optional<double> value() const {
    return count ? std::optional<double>(total / static_cast<double>(count)) : std::nullopt;
  }
};

struct GanLoop {
  const GzslDataset &dataset;
  const TrainConfig &config;
  const MlpParams *regressor = nullptr;
  const MlpParams *cls_classifier = nullptr; // used in the generator loss
  const MlpParams *monitor = nullptr;        // seen-class classifier for fake_seen_top1
  double cls_weight = 0.0;
  bool unseen_term = false;
  std::string stage;
  std::string stream; // prefix for the random streams
};

struct GanState {
  MlpParams generator;
  MlpParams critic;
  MlpOptimizer gen_opt;
  MlpOptimizer critic_opt;
};

void run_gan_epochs(const GanLoop &loop, GanState &st, std::size_t first_epoch, std::size_t epochs,
                    std::vector<EpochMetrics> &metrics, const Log &log) {
  const GzslDataset &d = loop.dataset;
  const TrainConfig &cfg = loop.config;
  const std::size_t z_dim = cfg.noise_width(d.semantic_dim());
  const std::uint64_t seed = cfg.seed;
  Rng shuffle_rng(derive_seed(seed, loop.stream + ".shuffle"));
  Rng noise_rng(derive_seed(seed, loop.stream + ".noise"));
  Rng alpha_rng(derive_seed(seed, loop.stream + ".alpha"));
  Rng unseen_rng(derive_seed(seed, loop.stream + ".unseen"));
  const std::uint64_t monitor_seed = derive_seed(seed, "monitor");
  const auto seen_index = seen_index_map(d);
  const Matrix train_semantic = semantic_rows(d, d.train_labels);
  std::size_t critic_steps = 0;

  for (std::size_t e = 0; e < epochs; ++e) {
    const std::size_t epoch = first_epoch + e;
    const auto started = Clock::now();
    Mean loss_d, loss_g, gp, wdist, l_cls, l_cyc;
    try {
      for (const auto &idx : shuffled_batches(d.train_labels.size(), cfg.gan_batch, shuffle_rng)) {
        const Matrix real = d.train_features.gather_rows(idx);
        const Matrix a = train_semantic.gather_rows(idx);
        const std::size_t b = idx.size();

        const CriticStep cs = critic_update(st.critic, st.critic_opt, st.generator, real, a,
                                            standard_normal(b, z_dim, noise_rng), cfg.weights.gp_lambda,
                                            cfg.lr_critic, alpha_rng);
        loss_d.add(cs.loss);
        gp.add(cs.gradient_penalty);
        wdist.add(cs.wasserstein);
        if (++critic_steps % cfg.n_critic != 0) continue;

        GeneratorTerms terms;
        terms.regressor = loop.regressor;
        terms.cycle_lambda = cfg.weights.cycle_lambda;
        terms.classifier = loop.cls_classifier;
        terms.cls_weight = loop.cls_weight;
        if (loop.cls_classifier) {
          terms.cls_labels.resize(b);
          for (std::size_t i = 0; i < b; ++i) terms.cls_labels[i] = seen_index[d.train_labels[idx[i]]];
        }
        const Matrix z = standard_normal(b, z_dim, noise_rng);
        if (loop.unseen_term) {
          const std::size_t ub = cfg.unseen_batch ? cfg.unseen_batch : b;
          std::uniform_int_distribution<std::size_t> pick(0, d.unseen_classes.size() - 1);
          std::vector<std::size_t> classes(ub);
          for (auto &c : classes) c = d.unseen_classes[pick(unseen_rng)];
          terms.unseen = SemanticBatch{semantic_rows(d, classes), standard_normal(ub, z_dim, noise_rng)};
        }
        const GeneratorStep gs =
            generator_update(st.generator, st.gen_opt, st.critic, a, z, terms, cfg.lr_generator);
        loss_g.add(gs.loss);
        if (gs.l_cyc) l_cyc.add(*gs.l_cyc);
        if (gs.l_cls) l_cls.add(*gs.l_cls);
      }
    } catch (const NumericError &err) {
      throw TrainingError(loop.stage + ": diverged at epoch " + std::to_string(epoch) + ": " + err.what());
    }

    EpochMetrics m;
    m.epoch = epoch;
    m.loss_d = loss_d.value();
    m.loss_g = loss_g.value();
    m.gp = gp.value();
    m.wasserstein = wdist.value();
    m.l_cyc = l_cyc.value();
    m.l_cls = l_cls.value();
    if (loop.monitor)
      m.fake_seen_top1 = fake_seen_top1(st.generator, *loop.monitor, d, z_dim, cfg.monitor_per_class, monitor_seed);
    for (const auto *v : {&m.loss_d, &m.loss_g, &m.gp, &m.wasserstein, &m.l_cyc, &m.l_cls})
      if (*v) finite_or_fail(**v, loop.stage, epoch, "loss");
    if (cfg.record_wall_time)
      m.wall_seconds = std::chrono::duration<double>(Clock::now() - started).count();
    metrics.push_back(m);

    std::string line = loop.stage + " epoch " + std::to_string(epoch);
    if (m.loss_d) line += " loss_d=" + format_double(*m.loss_d);
    if (m.wasserstein) line += " w=" + format_double(*m.wasserstein);
    if (m.fake_seen_top1) line += " fake_seen_top1=" + format_double(*m.fake_seen_top1);
    log.info(line);
  }
}

} // namespace

CriticStep critic_update(MlpParams &critic, MlpOptimizer &optimizer, const MlpParams &generator,
                         const Matrix &real, const Matrix &semantic, const Matrix &noise,
                         double gp_lambda, double lr, Rng &alpha_rng) {
  const GpBatch batch = make_gp_batch(real, generator_forward(generator, semantic, noise), semantic, alpha_rng);
  const BoundMlp bound = bind(critic);
  const CriticObjective obj = critic_objective(bound, batch, gp_lambda);
  optimizer.step(critic, ad::backward(obj.loss, bound.tensors), lr);
  return CriticStep{obj.loss.scalar(), obj.gradient_penalty, obj.wasserstein};
}

GeneratorStep generator_update(MlpParams &generator, MlpOptimizer &optimizer, const MlpParams &critic,
                               const Matrix &semantic, const Matrix &noise, const GeneratorTerms &terms,
                               double lr) {
  const BoundMlp gen = bind(generator);
  const ad::Var fake = gen(ad::concat_cols(ad::leaf(semantic), ad::leaf(noise)));
  ad::Var total = generator_adversarial_loss(bind(critic), fake, semantic);
  GeneratorStep out;
  if (terms.regressor) {
    const BoundMlp reg = bind(*terms.regressor);
    ad::Var cyc = reg_loss(reg, fake, semantic);
    if (terms.unseen) cyc = ad::add(cyc, cycle_term(reg, gen, terms.unseen->semantic, terms.unseen->noise));
    out.l_cyc = cyc.scalar();
    total = ad::add(total, ad::scale(cyc, terms.cycle_lambda));
  }
  if (terms.classifier) {
    const ad::Var cls = cls_loss(bind(*terms.classifier), fake, terms.cls_labels);
    out.l_cls = cls.scalar();
    total = ad::add(total, ad::scale(cls, terms.cls_weight));
  }
  optimizer.step(generator, ad::backward(total, gen.tensors), lr);
  out.loss = total.scalar();
  return out;
}

void Log::info(const std::string &msg) const {
  if (sink) sink(msg);
}

void Log::warn(const std::string &msg) const {
  if (sink) sink("warning: " + msg);
}

Log Log::stderr_log() {
  return Log{[](const std::string &msg) { std::cerr << msg << '\n'; }};
}

Log Log::silent() { return Log{}; }

std::string metrics_csv(const std::vector<EpochMetrics> &rows) {
  std::string out = std::string(kMetricsHeader) + "\n";
  auto field = [&](const std::optional<double> &v) {
    out += ',';
    if (v) out += format_double(*v);
  };
  for (const auto &m : rows) {
    out += std::to_string(m.epoch);
    for (const auto *v : {&m.loss_d, &m.loss_g, &m.gp, &m.wasserstein, &m.l_cls, &m.l_cyc, &m.l_reg,
                          &m.fake_seen_top1, &m.wall_seconds})
      field(*v);
    out += '\n';
  }
  return out;
}

RegressorOutput regressor_output_for(const GzslDataset &dataset) noexcept {
  return dataset.semantic_format == SemanticFormat::binary ? RegressorOutput::sigmoid
                                                           : RegressorOutput::identity;
}

RegressorResult pretrain_regressor(const GzslDataset &d, const TrainConfig &cfg, const Log &log) {
  cfg.validate();
  RegressorResult out{init_regressor(d.visual_dim(), d.semantic_dim(), regressor_output_for(d),
                                     derive_seed(cfg.seed, "regressor.init")),
                      {}};
  MlpOptimizer opt(out.params);
  Rng shuffle_rng(derive_seed(cfg.seed, "regressor.shuffle"));
  const Matrix targets = semantic_rows(d, d.train_labels);
  const std::size_t n = d.train_labels.size();
  for (std::size_t epoch = 1; epoch <= cfg.regressor.epochs; ++epoch) {
    double total = 0.0;
    try {
      for (const auto &idx : shuffled_batches(n, cfg.regressor.batch, shuffle_rng)) {
        const BoundMlp reg = bind(out.params);
        const ad::Var loss =
            reg_loss(reg, ad::leaf(d.train_features.gather_rows(idx)), targets.gather_rows(idx));
        finite_or_fail(loss.scalar(), "pretrain_regressor", epoch, "loss");
        opt.step(out.params, ad::backward(loss, reg.tensors), cfg.regressor.lr);
        total += loss.scalar() * static_cast<double>(idx.size());
      }
    } catch (const NumericError &err) {
      throw TrainingError("pretrain_regressor: diverged at epoch " + std::to_string(epoch) + ": " + err.what());
    }
    EpochMetrics m;
    m.epoch = epoch;
    m.l_reg = total / static_cast<double>(n);
    out.curve.push_back(m);
    log.info("regressor epoch " + std::to_string(epoch) + " l_reg=" + format_double(*m.l_reg));
  }
  return out;
}

MlpParams fit_softmax(const Matrix &x, const std::vector<std::size_t> &labels, std::size_t classes,
                      const StageRates &rates, std::uint64_t seed, const std::string &stage,
                      const Log &log) {
  if (x.rows() != labels.size()) throw DimensionError(stage + ": feature and label counts differ");
  if (x.rows() == 0) throw ValidationError(stage + ": no training samples");
  MlpParams params = init_classifier(x.cols(), classes, derive_seed(seed, stage + ".init"));
  MlpOptimizer opt(params);
  Rng shuffle_rng(derive_seed(seed, stage + ".shuffle"));
  for (std::size_t epoch = 1; epoch <= rates.epochs; ++epoch) {
    double total = 0.0;
    try {
      for (const auto &idx : shuffled_batches(labels.size(), rates.batch, shuffle_rng)) {
        std::vector<std::size_t> y(idx.size());
        for (std::size_t i = 0; i < idx.size(); ++i) y[i] = labels[idx[i]];
        const BoundMlp net = bind(params);
        const ad::Var loss = cls_loss(net, ad::leaf(x.gather_rows(idx)), y);
        finite_or_fail(loss.scalar(), stage, epoch, "loss");
        opt.step(params, ad::backward(loss, net.tensors), rates.lr);
        total += loss.scalar() * static_cast<double>(idx.size());
      }
    } catch (const NumericError &err) {
      throw TrainingError(stage + ": diverged at epoch " + std::to_string(epoch) + ": " + err.what());
    }
    if (epoch == rates.epochs)
      log.info(stage + " epoch " + std::to_string(epoch) + " l_cls=" +
               format_double(total / static_cast<double>(labels.size())));
  }
  return params;
}

MlpParams pretrain_classifier(const GzslDataset &d, const TrainConfig &cfg, const Log &log) {
  cfg.validate();
  if (d.seen_classes.size() < 2)
    throw ValidationError("seen classes: classifier pretraining needs at least 2 seen classes, found " +
                          std::to_string(d.seen_classes.size()));
  const auto index = seen_index_map(d);
  std::vector<std::size_t> labels(d.train_labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = index[d.train_labels[i]];
  return fit_softmax(d.train_features, labels, d.seen_classes.size(), cfg.classifier, cfg.seed,
                     "pretrain_classifier", log);
}

TrainArtifacts train_gan(const GzslDataset &d, const TrainConfig &cfg, const Pretrained &pre,
                         const Log &log) {
  cfg.validate();
  const Variant v = cfg.variant;
  if (v == Variant::cycle_uwgan && !cfg.from_scratch_unseen)
    throw ConfigError("cycle-uwgan fine-tunes a finished cycle-wgan run; start from one, or set "
                      "from_scratch_unseen to train with unseen semantics from the start");
  if (uses_cycle(v) && !pre.regressor)
    throw ConfigError(std::string("variant ") + variant_name(v) + " requires a pretrained regressor");
  if (uses_cls(v) && !pre.classifier)
    throw ConfigError(std::string("variant ") + variant_name(v) + " requires a pretrained classifier");
  if (pre.classifier && pre.classifier->output_width() != d.seen_classes.size())
    throw ConfigError("pretrained classifier does not match the seen classes of this dataset");

  TrainArtifacts out;
  auto ignored = [&](const char *key, double value) {
    if (cfg.explicit_keys.count(key) && value > 0.0) {
      out.warnings.push_back(std::string("variant ") + variant_name(v) + " ignores " + key);
      log.warn(out.warnings.back());
    }
  };
  if (!uses_cycle(v)) ignored("cycle_lambda", cfg.weights.cycle_lambda);
  if (v != Variant::baseline) ignored("beta", cfg.weights.beta);
  if (v != Variant::cycle_clswgan) ignored("cls_lambda", cfg.weights.cls_lambda);

  const std::size_t z_dim = cfg.noise_width(d.semantic_dim());
  GanState st{init_generator(d.semantic_dim(), z_dim, d.visual_dim(), derive_seed(cfg.seed, "generator.init"), cfg.hidden),
              init_discriminator(d.visual_dim(), d.semantic_dim(), derive_seed(cfg.seed, "critic.init"), cfg.hidden),
              {}, {}};
  st.gen_opt = MlpOptimizer(st.generator);
  st.critic_opt = MlpOptimizer(st.critic);

  GanLoop loop{d, cfg, nullptr, nullptr, nullptr, 0.0, false, "train_gan", "gan"};
  loop.regressor = uses_cycle(v) ? &*pre.regressor : nullptr;
  loop.cls_classifier = uses_cls(v) ? &*pre.classifier : nullptr;
  loop.monitor = pre.classifier ? &*pre.classifier : nullptr;
  loop.cls_weight = v == Variant::baseline ? cfg.weights.beta : cfg.weights.cls_lambda;
  loop.unseen_term = v == Variant::cycle_uwgan;
  run_gan_epochs(loop, st, 1, cfg.gan_epochs, out.metrics, log);

  out.generator = std::move(st.generator);
  out.critic = std::move(st.critic);
  out.regressor = pre.regressor;
  out.classifier = pre.classifier;
  out.dataset_fingerprint = dataset_fingerprint(d);
  return out;
}

TrainArtifacts finetune_uwgan(TrainArtifacts from, const GzslDataset &d, const TrainConfig &cfg,
                              const Log &log) {
  cfg.validate();
  if (from.dataset_fingerprint != dataset_fingerprint(d))
    throw ConfigError("finetune_uwgan: the cycle-wgan run was trained on a different dataset");
  if (!from.regressor) throw ConfigError("finetune_uwgan: the cycle-wgan run has no regressor");
  const std::size_t epochs = cfg.finetune_epochs();
  if (epochs == 0) return from;

  GanState st{std::move(from.generator), std::move(from.critic), {}, {}};
  st.gen_opt = MlpOptimizer(st.generator);
  st.critic_opt = MlpOptimizer(st.critic);
  GanLoop loop{d, cfg, &*from.regressor, nullptr, nullptr, 0.0, true, "finetune_uwgan", "finetune"};
  loop.monitor = from.classifier ? &*from.classifier : nullptr;
  const std::size_t first = from.metrics.empty() ? 1 : from.metrics.back().epoch + 1;
  run_gan_epochs(loop, st, first, epochs, from.metrics, log);
  from.generator = std::move(st.generator);
  from.critic = std::move(st.critic);
  return from;
}

double unseen_cycle_loss(const MlpParams &regressor, const MlpParams &generator, const GzslDataset &d,
                         std::size_t noise_dim, std::size_t per_class, std::uint64_t seed) {
  std::vector<std::size_t> classes;
  for (std::size_t c : d.unseen_classes) classes.insert(classes.end(), per_class, c);
  if (classes.empty()) throw ContractError("unseen_cycle_loss: no unseen classes");
  Rng rng(seed);
  const Matrix a = semantic_rows(d, classes);
  const Matrix back = forward(regressor, generator_forward(generator, a, standard_normal(a.rows(), noise_dim, rng)));
  double total = 0.0;
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t c = 0; c < a.cols(); ++c) total += (a(r, c) - back(r, c)) * (a(r, c) - back(r, c));
  return total / static_cast<double>(a.rows());
}

double fake_seen_top1(const MlpParams &generator, const MlpParams &seen_classifier,
                      const GzslDataset &d, std::size_t noise_dim, std::size_t per_class,
                      std::uint64_t seed) {
  const LabeledFeatures fake = synthesize_features(generator, d, d.seen_classes, per_class, noise_dim, seed);
  return per_class_top1(predict(seen_classifier, fake.features, d.seen_classes), fake.labels, d.seen_classes);
}

} // namespace cyclegzsl
