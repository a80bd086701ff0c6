// Command-line front end: gen-synthetic, train, eval, report, inspect.

#include <iostream>

#include "CLI11.hpp"

#include "cyclegzsl/errors.hpp"
#include "cyclegzsl/pipeline.hpp"
#include "cyclegzsl/textio.hpp"

using namespace cyclegzsl;

namespace {

int exit_code_for(const Error &e) {
  if (dynamic_cast<const UsageError *>(&e)) return 2;
  if (dynamic_cast<const ConfigError *>(&e)) return 3;
  if (dynamic_cast<const ValidationError *>(&e)) return 4;
  if (dynamic_cast<const IoError *>(&e)) return 5;
  if (dynamic_cast<const TrainingError *>(&e)) return 6;
  return 1;
}

std::pair<std::string, std::string> split_assignment(const std::string &s) {
  const auto eq = s.find('=');
  if (eq == std::string::npos || eq == 0) throw UsageError("--set expects key=value, got '" + s + "'");
  return {s.substr(0, eq), s.substr(eq + 1)};
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Cycle-consistent feature generation for generalized zero-shot learning"};
  app.require_subcommand(1);
  app.set_version_flag("--version", code_version());
  const Log log = Log::stderr_log();

  // gen-synthetic
  SyntheticSpec spec;
  fs::path syn_out;
  bool syn_force = false, syn_binary = false;
  auto *gen = app.add_subcommand("gen-synthetic", "Write a synthetic GZSL dataset directory");
  gen->add_option("--out", syn_out, "Output dataset directory")->required();
  gen->add_option("--classes", spec.classes, "Number of classes C")->capture_default_str();
  gen->add_option("--unseen", spec.unseen, "Number of unseen classes")->capture_default_str();
  gen->add_option("--k", spec.visual_dim, "Visual feature width K")->capture_default_str();
  gen->add_option("--l", spec.semantic_dim, "Semantic feature width L")->capture_default_str();
  gen->add_option("--train-per-class", spec.train_per_class, "Training samples per seen class")->capture_default_str();
  gen->add_option("--test-per-class", spec.test_per_class, "Test samples per class")->capture_default_str();
  gen->add_option("--noise", spec.noise, "Per-sample Gaussian noise scale")->capture_default_str();
  gen->add_flag("--binary", syn_binary, "Threshold semantic vectors to {0,1}");
  gen->add_option("--seed", spec.seed, "Random seed")->capture_default_str();
  gen->add_flag("--force", syn_force, "Overwrite a non-empty output directory");

  // train
  TrainRequest treq;
  ConfigSources sources;
  std::string profile, variant, init_from;
  fs::path config_file;
  std::optional<std::uint64_t> seed;
  bool from_scratch = false;
  std::vector<std::string> sets;
  auto *train = app.add_subcommand("train", "Pretrain, train the feature generator and write a run directory");
  train->add_option("--dataset", treq.dataset_dir, "Dataset directory")->required();
  train->add_option("--out", treq.out_dir, "Run directory to create")->required();
  train->add_option("--variant", variant, "baseline | cycle-wgan | cycle-uwgan | cycle-clswgan");
  train->add_option("--profile", profile, "Hyperparameter profile: cub, flo, sun, awa, imagenet, desk");
  train->add_option("--config", config_file, "JSON config file")->check(CLI::ExistingFile);
  train->add_option("--seed", seed, "Random seed");
  train->add_option("--init-from", init_from, "Finished cycle-wgan run to fine-tune (cycle-uwgan)");
  train->add_flag("--from-scratch-unseen", from_scratch, "cycle-uwgan: use unseen semantics from the first epoch");
  train->add_option("--set", sets, "Override a config key, key=value (repeatable)");
  train->add_flag("--force", treq.force, "Overwrite a non-empty run directory");

  // eval
  EvalRequest ereq;
  std::string mode = "gzsl";
  std::optional<std::size_t> per_class;
  auto *eval = app.add_subcommand("eval", "Synthesize features, fit the final classifier and score the test set");
  eval->add_option("run", ereq.run_dir, "Run directory")->required();
  eval->add_option("--mode", mode, "zsl or gzsl")->capture_default_str();
  eval->add_option("--per-class-count", per_class, "Synthesized features per class (default from the run config, 300)");

  // report
  std::vector<fs::path> runs;
  fs::path report_csv;
  auto *report = app.add_subcommand("report", "Compare evaluated runs, with per-variant means over seeds");
  report->add_option("runs", runs, "Run directories")->required();
  report->add_option("--csv", report_csv, "Also write the table as CSV");

  // inspect
  fs::path inspect_target;
  auto *inspect = app.add_subcommand("inspect", "Summarize a checkpoint, dataset directory or run directory");
  inspect->add_option("path", inspect_target, "Path to inspect")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    return app.exit(e);
  }

  try {
    if (*gen) {
      spec.semantic_format = syn_binary ? SemanticFormat::binary : SemanticFormat::continuous;
      const GzslDataset d = run_gen_synthetic(spec, syn_out, syn_force, log);
      std::cout << manifest_json(d);
    } else if (*train) {
      if (!profile.empty()) sources.profile = profile;
      if (!config_file.empty()) sources.config_file = config_file;
      for (const auto &s : sets) sources.overrides.push_back(split_assignment(s));
      if (!variant.empty()) {
        parse_variant(variant);
        sources.overrides.emplace_back("variant", "\"" + variant + "\"");
      }
      if (seed) sources.overrides.emplace_back("seed", std::to_string(*seed));
      if (from_scratch) sources.overrides.emplace_back("from_scratch_unseen", "true");
      treq.config = resolve_config(sources);
      if (!init_from.empty()) treq.init_from = fs::path(init_from);
      run_train(treq, log);
      std::cout << inspect_path(treq.out_dir);
    } else if (*eval) {
      ereq.mode = parse_eval_mode(mode);
      ereq.per_class = per_class;
      run_eval(ereq, log);
      std::cout << read_text_file(ereq.run_dir / ("eval_" + mode + ".txt"));
    } else if (*report) {
      const Report r = build_report(collect_eval_rows(runs));
      if (!report_csv.empty()) write_text_file(report_csv, r.csv);
      std::cout << r.text;
    } else if (*inspect) {
      std::cout << inspect_path(inspect_target);
    }
  } catch (const Error &e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e);
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
