#pragma once

// Run directories and the end-to-end commands behind the CLI.
//
// A training run directory holds:
//
//   run_manifest.json       config snapshot, dataset fingerprint, inventory
//   generator.ckpt, critic.ckpt, classifier.ckpt, regressor.ckpt (cycle variants)
//   metrics.csv             one row per GAN epoch
//   regressor_metrics.csv   one row per regressor epoch, when pretrained here
//   eval_<mode>.csv/.txt    written by run_eval

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cyclegzsl/config.hpp"
#include "cyclegzsl/data.hpp"
#include "cyclegzsl/evaluate.hpp"
#include "cyclegzsl/training.hpp"

namespace cyclegzsl {

namespace fs = std::filesystem;

std::string code_version();
/// GZSL_THREADS, default 1. Throws ConfigError when set but not a positive integer.
std::size_t thread_count_from_env();

/// Refuses (UsageError) to reuse a non-empty directory unless `force`.
void prepare_output_dir(const fs::path &dir, bool force);

struct ConfigSources {
  std::optional<std::string> profile; // wins over a "profile" key in the file
  std::optional<fs::path> config_file;
  std::vector<std::pair<std::string, std::string>> overrides; // key, JSON value
};

/// built-in defaults < profile < config file < overrides.
TrainConfig resolve_config(const ConfigSources &sources);

GzslDataset run_gen_synthetic(const SyntheticSpec &spec, const fs::path &out, bool force,
                              const Log &log = Log::silent());

struct TrainRequest {
  fs::path dataset_dir;
  fs::path out_dir;
  TrainConfig config;
  std::optional<fs::path> init_from; // finished cycle-wgan run, for cycle-uwgan
  bool force = false;
};

struct TrainOutcome {
  TrainArtifacts artifacts;
  /// Cycle loss on a fixed unseen-semantics batch before and after the
  /// cycle-uwgan fine-tune.
  std::optional<double> unseen_cycle_before, unseen_cycle_after;
};

TrainOutcome run_train(const TrainRequest &request, const Log &log = Log::silent());

struct EvalRequest {
  fs::path run_dir;
  EvalMode mode = EvalMode::gzsl;
  std::optional<std::size_t> per_class;
};

GzslMetrics run_eval(const EvalRequest &request, const Log &log = Log::silent());

inline constexpr const char *kEvalHeader = "dataset,variant,seed,u,s,H,T1_Z";

struct ReportRow {
  std::string dataset;
  std::string fingerprint;
  std::string variant;
  std::string seed; // "mean" on aggregate rows
  std::string mode;
  std::optional<double> u, s, H, t1_zsl;
};

/// Evaluation rows of every run, for all modes that were evaluated.
std::vector<ReportRow> collect_eval_rows(const std::vector<fs::path> &run_dirs);

struct Report {
  std::string text;
  std::string csv;
};

/// Groups rows by dataset fingerprint and mode; adds a per-variant mean over
/// seeds. Throws UsageError when `rows` is empty.
Report build_report(const std::vector<ReportRow> &rows);

/// Human-readable summary of a checkpoint file, dataset directory or run directory.
std::string inspect_path(const fs::path &path);

std::vector<EpochMetrics> parse_metrics_csv(const std::string &text);

} // namespace cyclegzsl
