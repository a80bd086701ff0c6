#include "cyclegzsl/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <ctime>
#include <iomanip>
#include <map>
#include <sstream>

#include "json.hpp"

#include "cyclegzsl/checkpoint.hpp"
#include "cyclegzsl/errors.hpp"
#include "cyclegzsl/textio.hpp"

#ifndef CYCLEGZSL_VERSION
#define CYCLEGZSL_VERSION "unknown"
#endif

namespace cyclegzsl {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr const char *kManifestFile = "run_manifest.json";
constexpr const char *kRunFormat = "cyclegzsl-run 1";

std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

ordered_json read_json(const fs::path &path) {
  try {
    return ordered_json::parse(read_text_file(path));
  } catch (const nlohmann::json::parse_error &e) {
    throw ValidationError(path.string() + ": not valid JSON: " + e.what());
  }
}

void write_json(const fs::path &path, const ordered_json &j) { write_text_file(path, j.dump(2) + "\n"); }

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t end = line.find(',', start);
    out.emplace_back(line.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start));
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
  return out;
}

std::vector<std::string> csv_lines(const std::string &text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) lines.push_back(line);
  return lines;
}

std::optional<double> optional_number(const std::string &field, const std::string &what) {
  if (field.empty()) return std::nullopt;
  char *stop = nullptr;
  const double v = std::strtod(field.c_str(), &stop);
  if (stop != field.c_str() + field.size()) throw ValidationError(what + ": cannot parse '" + field + "'");
  return v;
}

std::string optional_field(const std::optional<double> &v) { return v ? format_double(*v) : ""; }

ordered_json load_run_manifest(const fs::path &run_dir) {
  const ordered_json m = read_json(run_dir / kManifestFile);
  if (!m.is_object() || m.value("format", "") != kRunFormat)
    throw ValidationError(run_dir.string() + ": not a run directory manifest");
  return m;
}

TrainConfig config_from_manifest(const ordered_json &m) {
  TrainConfig cfg;
  apply_config_json(cfg, m.at("config").dump());
  cfg.explicit_keys.clear();
  return cfg;
}

void require_complete(const ordered_json &m, const fs::path &run_dir) {
  if (m.value("status", "") != "complete")
    throw ValidationError(run_dir.string() + ": training run did not complete");
}

void check_generator(const MlpParams &g, const GzslDataset &d, const TrainConfig &cfg) {
  if (g.input_width() != d.semantic_dim() + cfg.noise_width(d.semantic_dim()) ||
      g.output_width() != d.visual_dim())
    throw ConfigError("generator checkpoint does not match the dataset widths and noise_dim");
}

} // namespace

std::string code_version() { return CYCLEGZSL_VERSION; }

std::size_t thread_count_from_env() {
  const char *v = std::getenv("GZSL_THREADS");
  if (!v || !*v) return 1;
  std::size_t n = 0;
  const std::string_view s(v);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), n);
  if (ec != std::errc() || ptr != s.data() + s.size() || n == 0)
    throw ConfigError("GZSL_THREADS must be a positive integer, got '" + std::string(s) + "'");
  return n;
}

TrainConfig resolve_config(const ConfigSources &src) {
  TrainConfig cfg;
  std::string file_text;
  std::optional<std::string> profile = src.profile;
  if (src.config_file) {
    file_text = read_text_file(*src.config_file);
    const ordered_json j = [&] {
      try {
        return ordered_json::parse(file_text);
      } catch (const nlohmann::json::parse_error &e) {
        throw ConfigError(src.config_file->string() + ": not valid JSON: " + e.what());
      }
    }();
    if (!profile && j.is_object() && j.contains("profile")) {
      if (!j["profile"].is_string()) throw ConfigError("config: 'profile' must be a string");
      profile = j["profile"].get<std::string>();
    }
  }
  if (profile) apply_profile(cfg, *profile);
  if (src.config_file) apply_config_json(cfg, file_text);
  for (const auto &[key, value] : src.overrides) apply_config_value(cfg, key, value);
  cfg.validate();
  return cfg;
}

void prepare_output_dir(const fs::path &dir, bool force) {
  std::error_code ec;
  if (fs::exists(dir, ec) && !fs::is_empty(dir, ec) && !force)
    throw UsageError(dir.string() + " exists and is not empty; pass --force to overwrite");
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

GzslDataset run_gen_synthetic(const SyntheticSpec &spec, const fs::path &out, bool force, const Log &log) {
  spec.validate();
  prepare_output_dir(out, force);
  const GzslDataset d = make_synthetic(spec);
  save_dataset(d, out);
  log.info("wrote " + out.string() + ": C=" + std::to_string(d.class_count()) + " (" +
           std::to_string(d.seen_classes.size()) + " seen, " + std::to_string(d.unseen_classes.size()) +
           " unseen), K=" + std::to_string(d.visual_dim()) + ", L=" + std::to_string(d.semantic_dim()) +
           ", train " + std::to_string(d.train_labels.size()) + ", test " +
           std::to_string(d.test_labels.size()) + ", fingerprint " + dataset_fingerprint(d));
  return d;
}

TrainOutcome run_train(const TrainRequest &req, const Log &log) {
  const TrainConfig &cfg = req.config;
  cfg.validate();
  if (req.init_from && cfg.variant != Variant::cycle_uwgan)
    throw ConfigError("--init-from applies only to the cycle-uwgan variant");
  if (cfg.variant == Variant::cycle_uwgan && !req.init_from && !cfg.from_scratch_unseen)
    throw ConfigError("cycle-uwgan fine-tunes a finished cycle-wgan run: pass --init-from <run dir> "
                      "or --from-scratch-unseen");
  const std::size_t threads = thread_count_from_env();
  const GzslDataset dataset = load_dataset(req.dataset_dir);
  const std::string fingerprint = dataset_fingerprint(dataset);

  ordered_json init_manifest;
  if (req.init_from) {
    init_manifest = load_run_manifest(*req.init_from);
    require_complete(init_manifest, *req.init_from);
    if (init_manifest["config"].value("variant", "") != std::string("cycle-wgan"))
      throw ConfigError(req.init_from->string() + " is not a cycle-wgan run");
    if (init_manifest["dataset"].value("fingerprint", "") != fingerprint)
      throw ConfigError("dataset mismatch: " + req.init_from->string() + " was trained on a different dataset");
  }

  prepare_output_dir(req.out_dir, req.force);
  const std::string chash = config_hash(cfg);
  ordered_json manifest;
  manifest["format"] = kRunFormat;
  manifest["code_version"] = code_version();
  manifest["status"] = "running";
  manifest["started_at"] = utc_now();
  manifest["seed"] = cfg.seed;
  manifest["threads"] = threads;
  manifest["config_hash"] = chash;
  manifest["config"] = ordered_json::parse(config_to_json(cfg));
  manifest["dataset"] = {{"path", fs::absolute(req.dataset_dir).lexically_normal().string()},
                         {"name", dataset.name},
                         {"fingerprint", fingerprint}};
  if (req.init_from) manifest["init_from"] = fs::absolute(*req.init_from).lexically_normal().string();
  write_json(req.out_dir / kManifestFile, manifest);

  TrainOutcome outcome;
  std::vector<std::string> outputs;
  const std::size_t z_dim = cfg.noise_width(dataset.semantic_dim());
  const std::uint64_t cycle_eval_seed = derive_seed(cfg.seed, "unseen_cycle_eval");

  if (req.init_from) {
    TrainArtifacts from;
    from.generator = load_checkpoint(*req.init_from / "generator.ckpt").params;
    from.critic = load_checkpoint(*req.init_from / "critic.ckpt").params;
    from.regressor = load_checkpoint(*req.init_from / "regressor.ckpt").params;
    from.classifier = load_checkpoint(*req.init_from / "classifier.ckpt").params;
    from.metrics = parse_metrics_csv(read_text_file(*req.init_from / "metrics.csv"));
    from.dataset_fingerprint = init_manifest["dataset"].value("fingerprint", "");
    check_generator(from.generator, dataset, cfg);
    outcome.unseen_cycle_before =
        unseen_cycle_loss(*from.regressor, from.generator, dataset, z_dim, cfg.monitor_per_class, cycle_eval_seed);
    outcome.artifacts = finetune_uwgan(std::move(from), dataset, cfg, log);
    outcome.unseen_cycle_after = unseen_cycle_loss(*outcome.artifacts.regressor, outcome.artifacts.generator,
                                                   dataset, z_dim, cfg.monitor_per_class, cycle_eval_seed);
    log.info("unseen cycle loss " + format_double(*outcome.unseen_cycle_before) + " -> " +
             format_double(*outcome.unseen_cycle_after));
  } else {
    Pretrained pre;
    if (uses_cycle(cfg.variant)) {
      RegressorResult reg = pretrain_regressor(dataset, cfg, log);
      write_text_file(req.out_dir / "regressor_metrics.csv", metrics_csv(reg.curve));
      outputs.emplace_back("regressor_metrics.csv");
      pre.regressor = std::move(reg.params);
    }
    pre.classifier = pretrain_classifier(dataset, cfg, log);
    outcome.artifacts = train_gan(dataset, cfg, pre, log);
  }

  const TrainArtifacts &a = outcome.artifacts;
  save_checkpoint(req.out_dir / "generator.ckpt", a.generator, chash);
  save_checkpoint(req.out_dir / "critic.ckpt", a.critic, chash);
  outputs.insert(outputs.end(), {"generator.ckpt", "critic.ckpt"});
  if (a.regressor) {
    save_checkpoint(req.out_dir / "regressor.ckpt", *a.regressor, chash);
    outputs.emplace_back("regressor.ckpt");
  }
  if (a.classifier) {
    save_checkpoint(req.out_dir / "classifier.ckpt", *a.classifier, chash);
    outputs.emplace_back("classifier.ckpt");
  }
  write_text_file(req.out_dir / "metrics.csv", metrics_csv(a.metrics));
  outputs.emplace_back("metrics.csv");
  std::sort(outputs.begin(), outputs.end());

  manifest["status"] = "complete";
  manifest["finished_at"] = utc_now();
  manifest["outputs"] = outputs;
  manifest["warnings"] = a.warnings;
  if (outcome.unseen_cycle_before)
    manifest["finetune"] = {{"epochs", cfg.finetune_epochs()},
                            {"unseen_cycle_before", *outcome.unseen_cycle_before},
                            {"unseen_cycle_after", *outcome.unseen_cycle_after}};
  write_json(req.out_dir / kManifestFile, manifest);
  return outcome;
}

GzslMetrics run_eval(const EvalRequest &req, const Log &log) {
  const ordered_json m = load_run_manifest(req.run_dir);
  require_complete(m, req.run_dir);
  TrainConfig cfg = config_from_manifest(m);
  if (req.per_class) {
    if (*req.per_class == 0) throw UsageError("--per-class-count must be >= 1");
    cfg.per_class = *req.per_class;
  }
  const GzslDataset dataset = load_dataset(m["dataset"].value("path", ""));
  if (dataset_fingerprint(dataset) != m["dataset"].value("fingerprint", ""))
    throw ValidationError("dataset at " + m["dataset"].value("path", "") + " changed since training");
  const MlpParams generator = load_checkpoint(req.run_dir / "generator.ckpt").params;
  check_generator(generator, dataset, cfg);

  const GzslMetrics metrics = evaluate_generator(generator, dataset, req.mode, cfg, log);
  const std::string mode = eval_mode_name(req.mode);
  const std::string row = dataset.name + "," + variant_name(cfg.variant) + "," + std::to_string(cfg.seed) +
                          "," + optional_field(metrics.u) + "," + optional_field(metrics.s) + "," +
                          optional_field(metrics.H) + "," + optional_field(metrics.t1_zsl) + "\n";
  write_text_file(req.run_dir / ("eval_" + mode + ".csv"), std::string(kEvalHeader) + "\n" + row);

  ReportRow r{dataset.name, dataset_fingerprint(dataset), variant_name(cfg.variant), std::to_string(cfg.seed),
              mode, metrics.u, metrics.s, metrics.H, metrics.t1_zsl};
  write_text_file(req.run_dir / ("eval_" + mode + ".txt"), build_report({r}).text);
  return metrics;
}

std::vector<ReportRow> collect_eval_rows(const std::vector<fs::path> &run_dirs) {
  std::vector<ReportRow> rows;
  for (const auto &dir : run_dirs) {
    const ordered_json m = load_run_manifest(dir);
    for (const char *mode : {"gzsl", "zsl"}) {
      const fs::path csv = dir / (std::string("eval_") + mode + ".csv");
      if (!fs::exists(csv)) continue;
      const auto lines = csv_lines(read_text_file(csv));
      if (lines.empty() || lines[0] != kEvalHeader) throw ValidationError(csv.string() + ": unexpected header");
      for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto f = split_csv_line(lines[i]);
        if (f.size() != 7) throw ValidationError(csv.string() + ": expected 7 fields");
        rows.push_back(ReportRow{f[0], m["dataset"].value("fingerprint", ""), f[1], f[2], mode,
                                 optional_number(f[3], csv.string()), optional_number(f[4], csv.string()),
                                 optional_number(f[5], csv.string()), optional_number(f[6], csv.string())});
      }
    }
  }
  return rows;
}

Report build_report(const std::vector<ReportRow> &rows) {
  if (rows.empty()) throw UsageError("report: no evaluated runs");
  std::vector<std::pair<std::string, std::string>> groups; // (fingerprint, mode), first-seen order
  for (const auto &r : rows)
    if (std::find(groups.begin(), groups.end(), std::pair{r.fingerprint, r.mode}) == groups.end())
      groups.emplace_back(r.fingerprint, r.mode);

  Report out;
  out.csv = "dataset,fingerprint,mode,variant,seed,u,s,H,T1_Z\n";
  auto cell = [](const std::optional<double> &v) {
    std::ostringstream s;
    s << std::setw(7) << (v ? percent(*v) : "-");
    return s.str();
  };
  for (const auto &[fingerprint, mode] : groups) {
    std::vector<ReportRow> group;
    for (const auto &r : rows)
      if (r.fingerprint == fingerprint && r.mode == mode) group.push_back(r);
    std::stable_sort(group.begin(), group.end(), [](const ReportRow &a, const ReportRow &b) {
      if (a.variant != b.variant) return a.variant < b.variant;
      return a.seed.size() != b.seed.size() ? a.seed.size() < b.seed.size() : a.seed < b.seed;
    });

    std::vector<ReportRow> table;
    for (std::size_t i = 0; i < group.size();) {
      std::size_t j = i;
      while (j < group.size() && group[j].variant == group[i].variant) table.push_back(group[j++]);
      if (j - i >= 2) {
        ReportRow mean = group[i];
        mean.seed = "mean";
        auto avg = [&](std::optional<double> ReportRow::*field) -> std::optional<double> {
          double sum = 0.0;
          for (std::size_t k = i; k < j; ++k) {
            if (!(group[k].*field)) return std::nullopt;
            sum += *(group[k].*field);
          }
          return sum / static_cast<double>(j - i);
        };
        mean.u = avg(&ReportRow::u);
        mean.s = avg(&ReportRow::s);
        mean.H = avg(&ReportRow::H);
        mean.t1_zsl = avg(&ReportRow::t1_zsl);
        table.push_back(mean);
      }
      i = j;
    }

    std::ostringstream text;
    text << "dataset " << group.front().dataset << " (fingerprint " << fingerprint << "), " << mode << "\n";
    text << std::left << std::setw(16) << "variant" << std::right << std::setw(6) << "seed" << std::setw(7) << "u"
         << std::setw(7) << "s" << std::setw(7) << "H" << std::setw(7) << "T1_Z" << "\n";
    for (const auto &r : table) {
      text << std::left << std::setw(16) << r.variant << std::right << std::setw(6) << r.seed << cell(r.u)
           << cell(r.s) << cell(r.H) << cell(r.t1_zsl) << "\n";
      out.csv += r.dataset + "," + fingerprint + "," + mode + "," + r.variant + "," + r.seed + "," +
                 optional_field(r.u) + "," + optional_field(r.s) + "," + optional_field(r.H) + "," +
                 optional_field(r.t1_zsl) + "\n";
    }
    if (!out.text.empty()) out.text += "\n";
    out.text += text.str();
  }
  return out;
}

std::string inspect_path(const fs::path &path) {
  std::ostringstream out;
  if (fs::is_regular_file(path)) {
    const Checkpoint ck = load_checkpoint(path);
    std::size_t count = 0;
    for (const Matrix *t : ck.params.tensors()) count += t->size();
    out << "checkpoint " << path.string() << "\n"
        << "  network      " << ck.params.network << "\n"
        << "  config_hash  " << (ck.config_hash.empty() ? "-" : ck.config_hash) << "\n"
        << "  parameters   " << count << "\n"
        << "  params_hash  " << hex64(params_hash(ck.params)) << "\n";
    for (std::size_t i = 0; i < ck.params.layers.size(); ++i) {
      const auto &l = ck.params.layers[i];
      out << "  layer " << i << "      " << l.weight.rows() << "x" << l.weight.cols() << " "
          << activation_name(l.activation) << "\n";
    }
    return out.str();
  }
  if (fs::exists(path / kManifestFile)) {
    const ordered_json m = load_run_manifest(path);
    out << "run " << path.string() << "\n"
        << "  status       " << m.value("status", "?") << "\n"
        << "  variant      " << m["config"].value("variant", "?") << "\n"
        << "  seed         " << m.value("seed", 0ULL) << "\n"
        << "  dataset      " << m["dataset"].value("name", "?") << " (" << m["dataset"].value("fingerprint", "?")
        << ")\n"
        << "  config_hash  " << m.value("config_hash", "?") << "\n";
    if (m.contains("outputs"))
      for (const auto &o : m["outputs"]) out << "  output       " << o.get<std::string>() << "\n";
    for (const char *mode : {"gzsl", "zsl"})
      if (fs::exists(path / (std::string("eval_") + mode + ".txt")))
        out << read_text_file(path / (std::string("eval_") + mode + ".txt"));
    return out.str();
  }
  if (fs::exists(path / "manifest.json")) {
    const GzslDataset d = load_dataset(path);
    out << "dataset " << path.string() << "\n"
        << "  name         " << d.name << "\n"
        << "  K, L, C      " << d.visual_dim() << ", " << d.semantic_dim() << ", " << d.class_count() << "\n"
        << "  seen         " << d.seen_classes.size() << "\n"
        << "  unseen       " << d.unseen_classes.size() << "\n"
        << "  train rows   " << d.train_labels.size() << "\n"
        << "  test rows    " << d.test_labels.size() << "\n"
        << "  semantics    " << semantic_format_name(d.semantic_format) << "\n"
        << "  fingerprint  " << dataset_fingerprint(d) << "\n";
    return out.str();
  }
  throw UsageError(path.string() + " is not a checkpoint, dataset directory or run directory");
}

std::vector<EpochMetrics> parse_metrics_csv(const std::string &text) {
  const auto lines = csv_lines(text);
  if (lines.empty() || lines[0] != kMetricsHeader) throw ValidationError("metrics.csv: unexpected header");
  std::vector<EpochMetrics> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto f = split_csv_line(lines[i]);
    if (f.size() != 10) throw ValidationError("metrics.csv line " + std::to_string(i + 1) + ": expected 10 fields");
    EpochMetrics m;
    const auto epoch = optional_number(f[0], "metrics.csv epoch");
    if (!epoch) throw ValidationError("metrics.csv line " + std::to_string(i + 1) + ": missing epoch");
    m.epoch = static_cast<std::size_t>(*epoch);
    std::optional<double> *fields[] = {&m.loss_d, &m.loss_g, &m.gp, &m.wasserstein, &m.l_cls,
                                       &m.l_cyc, &m.l_reg, &m.fake_seen_top1, &m.wall_seconds};
    for (std::size_t k = 0; k < 9; ++k) *fields[k] = optional_number(f[k + 1], "metrics.csv");
    rows.push_back(m);
  }
  return rows;
}

} // namespace cyclegzsl
