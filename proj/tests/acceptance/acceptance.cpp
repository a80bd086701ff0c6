// Prints one PASS/FAIL line per acceptance criterion. Exit status is nonzero
// if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>

#include "cyclegzsl/checkpoint.hpp"
#include "cyclegzsl/errors.hpp"
#include "cyclegzsl/losses.hpp"
#include "cyclegzsl/pipeline.hpp"
#include "cyclegzsl/textio.hpp"
#include "support/fd_oracle.hpp"
#include "support/fixtures.hpp"
#include "support/plain_nets.hpp"

using namespace cyclegzsl;
using plain::random_matrix;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

int failures = 0;

void report(int n, bool ok, const std::string &detail) {
  std::printf("criterion %d: %s  %s\n", n, ok ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char *f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::vector<Matrix> copy_tensors(const MlpParams &p) {
  std::vector<Matrix> out;
  for (const Matrix *t : p.tensors()) out.push_back(*t);
  return out;
}

MlpParams scaled(MlpParams p, double factor) {
  for (Matrix *t : p.tensors())
    for (double &v : t->data()) v *= factor;
  return p;
}

// ---------------------------------------------------------------- 1

void gradient_suite() {
  const auto t0 = Clock::now();
  std::map<std::string, double> worst;
  int instances = 0;
  auto record = [&](const std::string &name, const std::vector<Matrix> &analytic,
                    const std::vector<Matrix> &numeric) {
    worst[name] = std::max(worst[name], fd::max_relative_error(analytic, numeric));
    ++instances;
  };

  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    std::mt19937_64 rng(seed + 100);
    const std::size_t k = 8, l = 4, n = 6;
    const Matrix real = random_matrix(n, k, rng), a = random_matrix(n, l, rng), z = random_matrix(n, l, rng);

    // Critic side, including the penalty's second-order path.
    const MlpParams d = scaled(init_discriminator(k, l, seed, 12), 40.0);
    const Matrix fake = random_matrix(n, k, rng);
    Rng alpha_rng(seed);
    const GpBatch gp = make_gp_batch(real, fake, a, alpha_rng);
    const auto db = bind(d);
    record("wgan.critic", ad::backward(critic_objective(db, gp, 10.0).loss, db.tensors),
           fd::central_differences(
               [&](const std::vector<Matrix> &p) { return plain::critic_loss(p, real, fake, a, gp.alpha, 10.0); },
               copy_tensors(d)));

    // Generator side.
    const MlpParams g = scaled(init_generator(l, l, k, seed + 7, 10), 40.0);
    const auto gb = bind(g);
    const ad::Var adv =
        generator_adversarial_loss(db, gb(ad::concat_cols(ad::leaf(a), ad::leaf(z))), a);
    record("wgan.generator", ad::backward(adv, gb.tensors),
           fd::central_differences(
               [&](const std::vector<Matrix> &p) {
                 return -plain::mean(plain::critic(copy_tensors(d), plain::generator(p, a, z), a));
               },
               copy_tensors(g)));

    // Classification loss.
    const MlpParams c = scaled(init_classifier(k, 4, seed), 50.0);
    const std::vector<std::size_t> labels{0, 1, 2, 3, 1, 2};
    const auto cb = bind(c);
    record("cls", ad::backward(cls_loss(cb, ad::leaf(real), labels), cb.tensors),
           fd::central_differences(
               [&](const std::vector<Matrix> &p) { return plain::cross_entropy(p[0], p[1], real, labels); },
               copy_tensors(c)));

    // Cycle loss, seen plus unseen batch, w.r.t. the generator.
    const MlpParams r = scaled(init_regressor(k, l, RegressorOutput::identity, seed + 3), 60.0);
    const SemanticBatch seen{a, z}, unseen{random_matrix(3, l, rng), random_matrix(3, l, rng)};
    const auto rt = copy_tensors(r);
    record("cyc", ad::backward(cyc_loss(bind(r), gb, seen, unseen), gb.tensors),
           fd::central_differences(
               [&](const std::vector<Matrix> &p) {
                 double total = 0.0;
                 for (const SemanticBatch *b : {&seen, &unseen})
                   total += plain::mean_sq_row_error(
                       b->semantic, plain::dense(plain::generator(p, b->semantic, b->noise), rt[0], rt[1], 0));
                 return total;
               },
               copy_tensors(g)));

    // Regression loss, both output modes.
    for (RegressorOutput mode : {RegressorOutput::identity, RegressorOutput::sigmoid}) {
      const MlpParams rr = scaled(init_regressor(k, l, mode, seed + 11), 80.0);
      const auto rb = bind(rr);
      const int act = mode == RegressorOutput::sigmoid ? 3 : 0;
      record("reg", ad::backward(reg_loss(rb, ad::leaf(real), a), rb.tensors),
             fd::central_differences(
                 [&](const std::vector<Matrix> &p) {
                   return plain::mean_sq_row_error(a, plain::dense(real, p[0], p[1], act));
                 },
                 copy_tensors(rr)));
    }
  }

  const double elapsed = seconds_since(t0);
  double max_err = 0.0;
  std::string detail;
  for (const auto &[name, e] : worst) {
    max_err = std::max(max_err, e);
    detail += name + "=" + fmt("%.2e", e) + " ";
  }
  report(1, max_err <= 1e-4 && instances >= 20 && elapsed < 120.0,
         std::to_string(instances) + " instances, max rel err " + fmt("%.2e", max_err) + " (" + detail + ") in " +
             fmt("%.2f", elapsed) + " s");
}

// ---------------------------------------------------------------- 2

void gradient_penalty_cases() {
  std::mt19937_64 rng(3);
  const std::size_t k = 6, l = 3, n = 9;
  const Matrix real = random_matrix(n, k, rng), fake = random_matrix(n, k, rng), a = random_matrix(n, l, rng);
  MlpParams linear{"critic", {}};
  Matrix w = random_matrix(k + l, 1, rng);
  double norm = 0.0;
  for (std::size_t i = 0; i < k; ++i) norm += w(i, 0) * w(i, 0);
  for (std::size_t i = 0; i < k; ++i) w(i, 0) /= std::sqrt(norm);
  linear.layers.push_back(DenseLayer{w, Matrix{{0.3}}, Activation::identity});
  Rng alpha_rng(1);
  const GpBatch gp = make_gp_batch(real, fake, a, alpha_rng);
  const double unit = critic_objective(bind(linear), gp, 10.0).gradient_penalty;
  const double zero = critic_objective(bind(zeroed(init_discriminator(k, l, 0, 16))), gp, 10.0).gradient_penalty;
  report(2, std::abs(unit) <= 1e-10 && std::abs(zero - 10.0) <= 1e-10,
         "unit-norm linear critic GP=" + fmt("%.3g", unit) + ", zero critic GP=" + fmt("%.17g", zero));
}

// ---------------------------------------------------------------- 3

double tally_oracle(const std::vector<std::size_t> &pred, const std::vector<std::size_t> &truth,
                    const std::vector<std::size_t> &classes) {
  std::map<std::size_t, std::pair<int, int>> tally;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    tally[truth[i]].second += 1;
    if (pred[i] == truth[i]) tally[truth[i]].first += 1;
  }
  double sum = 0.0;
  for (std::size_t c : classes) sum += static_cast<double>(tally[c].first) / static_cast<double>(tally[c].second);
  return sum / static_cast<double>(classes.size());
}

// A one-feature dataset whose test predictions are fixed by hand: with
// `hits_u` of 1000 unseen and `hits_s` of 1000 seen samples correct, gzsl_metrics
// sees u and s exactly.
GzslMetrics metrics_for(double u, double s) {
  GzslDataset d;
  d.name = "oracle";
  d.semantic = Matrix{{1, 0}, {0, 1}};
  d.seen_classes = {0};
  d.unseen_classes = {1};
  d.train_features = Matrix{{0.0}};
  d.train_labels = {0};
  const int n = 1000, hits_s = static_cast<int>(std::lround(s * n)), hits_u = static_cast<int>(std::lround(u * n));
  d.test_features = Matrix(2 * n, 1);
  std::vector<std::size_t> pred;
  for (int i = 0; i < n; ++i) {
    d.test_labels.push_back(0);
    pred.push_back(i < hits_s ? 0 : 1);
  }
  for (int i = 0; i < n; ++i) {
    d.test_labels.push_back(1);
    pred.push_back(i < hits_u ? 1 : 0);
  }
  d.validate();
  return gzsl_metrics(pred, d);
}

void metric_oracle() {
  struct Row {
    double u, s, h;
  };
  bool ok = true;
  std::string detail;
  for (const Row r : {Row{43.8, 60.6, 50.8}, Row{58.8, 70.0, 63.9}, Row{56.0, 62.8, 59.2}, Row{47.9, 32.4, 38.7}}) {
    const GzslMetrics m = metrics_for(r.u / 100.0, r.s / 100.0);
    const double h = std::stod(percent(*m.H));
    ok = ok && std::abs(h - r.h) <= 0.05 + 1e-9;
    detail += fmt("%.1f", h) + "/" + fmt("%.1f", r.h) + " ";
  }
  std::mt19937_64 rng(2024);
  int exact = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t classes = 2 + rng() % 9, n = classes + rng() % 60;
    std::vector<std::size_t> truth(n), pred(n), set(classes);
    for (std::size_t c = 0; c < classes; ++c) set[c] = c;
    for (std::size_t i = 0; i < n; ++i) {
      truth[i] = i < classes ? i : rng() % classes;
      pred[i] = rng() % 3 ? truth[i] : rng() % classes;
    }
    exact += per_class_top1(pred, truth, set) == tally_oracle(pred, truth, set);
  }
  ok = ok && exact == 1000;
  report(3, ok, "H computed/published: " + detail + "; per-class top-1 exact on " + std::to_string(exact) + "/1000");
}

// ---------------------------------------------------------------- 4

SyntheticSpec benchmark_spec(std::uint64_t seed) {
  SyntheticSpec s; // K=16, L=8, C=15, 5 unseen, 200 train/class
  s.seed = seed;
  return s;
}

TrainConfig desk_config(Variant v, std::uint64_t seed) {
  TrainConfig c;
  apply_profile(c, "desk");
  c.variant = v;
  c.seed = seed;
  c.validate();
  return c;
}

void regressor_trend() {
  const auto t0 = Clock::now();
  double first = 0.0, last = 0.0, worst_ratio = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const GzslDataset d = make_synthetic(benchmark_spec(seed));
    const RegressorResult r = pretrain_regressor(d, desk_config(Variant::cycle_wgan, seed));
    const double f = *r.curve.front().l_reg, l = *r.curve.back().l_reg;
    first += f / 5.0;
    last += l / 5.0;
    worst_ratio = std::max(worst_ratio, l / f);
  }
  const double elapsed = seconds_since(t0);
  report(4, last <= 0.5 * first && elapsed < 60.0,
         "mean l_REG first epoch " + fmt("%.4f", first) + " -> last " + fmt("%.4f", last) + " (ratio " +
             fmt("%.3f", last / first) + ", worst seed " + fmt("%.3f", worst_ratio) + ") in " + fmt("%.1f", elapsed) +
             " s");
}

// ---------------------------------------------------------------- 5, 6, 7

void experiments(const fs::path &work) {
  const auto t0 = Clock::now();
  int u_wins = 0, decreases = 0;
  double h_base = 0.0, h_cycle = 0.0;
  std::string u_detail, cyc_detail;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const fs::path data = work / ("data" + std::to_string(seed));
    run_gen_synthetic(benchmark_spec(seed), data, false);
    std::map<Variant, GzslMetrics> m;
    for (Variant v : {Variant::baseline, Variant::cycle_wgan}) {
      const fs::path run = work / (variant_name(v) + std::to_string(seed));
      run_train(TrainRequest{data, run, desk_config(v, seed), std::nullopt, false});
      m[v] = run_eval(EvalRequest{run, EvalMode::gzsl, std::nullopt});
    }
    const GzslMetrics &b = m[Variant::baseline], &c = m[Variant::cycle_wgan];
    u_wins += *c.u >= *b.u;
    h_base += *b.H / 5.0;
    h_cycle += *c.H / 5.0;
    u_detail += percent(*c.u) + "/" + percent(*b.u) + " ";

    const TrainOutcome uw = run_train(TrainRequest{data, work / ("cycle-uwgan" + std::to_string(seed)),
                                                   desk_config(Variant::cycle_uwgan, seed),
                                                   work / ("cycle-wgan" + std::to_string(seed)), false});
    decreases += *uw.unseen_cycle_after < *uw.unseen_cycle_before;
    cyc_detail += fmt("%.3f", *uw.unseen_cycle_before) + "->" + fmt("%.3f", *uw.unseen_cycle_after) + " ";
  }
  const double elapsed = seconds_since(t0);
  report(5, u_wins >= 3 && h_cycle >= h_base - 0.01 && elapsed < 900.0,
         "u(cycle-wgan)>=u(baseline) in " + std::to_string(u_wins) + "/5 seeds [" + u_detail + "]; mean H " +
             percent(h_cycle) + " vs " + percent(h_base) + "; " + fmt("%.0f", elapsed) + " s including fine-tunes");
  report(6, decreases >= 4, "unseen l_CYC decreased in " + std::to_string(decreases) + "/5 seeds [" + cyc_detail + "]");

  // Same flags and seed again.
  const fs::path again = work / "cycle-wgan0-again";
  run_train(TrainRequest{work / "data0", again, desk_config(Variant::cycle_wgan, 0), std::nullopt, false});
  run_eval(EvalRequest{again, EvalMode::gzsl, std::nullopt});
  const fs::path first = work / "cycle-wgan0";
  bool same = true;
  for (const char *f : {"metrics.csv", "regressor_metrics.csv", "eval_gzsl.csv", "generator.ckpt"})
    same = same && read_text_file(first / f) == read_text_file(again / f);
  same = same && build_report(collect_eval_rows({first})).csv == build_report(collect_eval_rows({again})).csv;
  report(7, same, "repeat of train+eval (cycle-wgan, seed 0): metrics, eval and report CSVs byte-identical");
}

// ---------------------------------------------------------------- 8

std::string slurp_dir(const fs::path &dir) {
  std::map<std::string, std::string> files;
  for (const auto &e : fs::directory_iterator(dir)) files[e.path().filename().string()] = read_text_file(e.path());
  std::string all;
  for (const auto &[name, body] : files) all += name + "\n" + body;
  return all;
}

void format_round_trip(const fs::path &work) {
  bool ok = true;
  std::string detail;

  SyntheticSpec spec = fixtures::tiny_spec(1);
  const GzslDataset d = make_synthetic(spec);
  save_dataset(d, work / "rt_a");
  save_dataset(load_dataset(work / "rt_a"), work / "rt_b");
  const bool data_rt = slurp_dir(work / "rt_a") == slurp_dir(work / "rt_b");

  const MlpParams g = init_generator(4, 4, 6, 2, 8);
  save_checkpoint(work / "a.ckpt", g, "0123456789abcdef");
  const Checkpoint ck = load_checkpoint(work / "a.ckpt");
  save_checkpoint(work / "b.ckpt", ck.params, ck.config_hash);
  const bool ckpt_rt = read_text_file(work / "a.ckpt") == read_text_file(work / "b.ckpt") && ck.params == g;
  ok = data_rt && ckpt_rt;
  detail += std::string("dataset ") + (data_rt ? "identical" : "DIFFERS") + ", checkpoint " +
            (ckpt_rt ? "identical" : "DIFFERS") + "; ";

  struct Fixture {
    std::string rule, file, body, expect;
  };
  const std::vector<std::size_t> &u = d.unseen_classes;
  std::string overlap = read_text_file(work / "rt_a" / "manifest.json");
  {
    const std::string key = "\"seen_classes\": [";
    overlap.insert(overlap.find(key) + key.size(), std::to_string(u[0]) + ", ");
  }
  std::string train_labels = read_text_file(work / "rt_a" / "train_labels.csv");
  train_labels.replace(0, train_labels.find('\n'), std::to_string(u[0]));
  std::string test_labels = read_text_file(work / "rt_a" / "test_labels.csv");
  std::string no_unseen_test;
  {
    std::istringstream in(test_labels);
    for (std::string line; std::getline(in, line);)
      no_unseen_test += (line == std::to_string(u[1]) ? std::to_string(u[0]) : line) + "\n";
  }
  std::string attrs = read_text_file(work / "rt_a" / "attributes.csv");
  attrs.replace(0, attrs.find(','), "nan");
  std::string ragged = read_text_file(work / "rt_a" / "train_features.csv");
  {
    const std::size_t eol = ragged.find('\n'), comma = ragged.rfind(',', eol);
    ragged.erase(comma, eol - comma);
  }
  test_labels.replace(0, test_labels.find('\n'), "99");

  const std::vector<Fixture> fixtures_list{
      {"split overlap", "manifest.json", overlap, "split overlap"},
      {"train label in unseen set", "train_labels.csv", train_labels, "train label " + std::to_string(u[0])},
      {"unseen class without test samples", "test_labels.csv", no_unseen_test,
       "unseen class " + std::to_string(u[1]) + " has no test samples"},
      {"non-finite attribute", "attributes.csv", attrs, "non-finite attribute"},
      {"label out of range", "test_labels.csv", test_labels, "label 99 out of range"},
      {"ragged rows", "train_features.csv", ragged, "expected 6 columns"},
  };
  int rejected = 0;
  for (const Fixture &f : fixtures_list) {
    const fs::path dir = work / ("bad_" + std::to_string(rejected) + "_" + f.file);
    fs::create_directories(dir);
    fs::copy(work / "rt_a", dir, fs::copy_options::recursive | fs::copy_options::overwrite_existing);
    write_text_file(dir / f.file, f.body);
    std::string what;
    try {
      load_dataset(dir);
    } catch (const ValidationError &e) {
      what = e.what();
    }
    if (what.find(f.expect) != std::string::npos) {
      ++rejected;
    } else {
      ok = false;
      detail += "[" + f.rule + ": got '" + what + "'] ";
    }
  }
  std::string bad_ckpt = read_text_file(work / "a.ckpt");
  bool ckpt_rejected = false;
  try {
    parse_checkpoint(bad_ckpt.substr(0, bad_ckpt.size() / 2));
  } catch (const ValidationError &) {
    ckpt_rejected = true;
  }
  ok = ok && ckpt_rejected;
  report(8, ok,
         detail + std::to_string(rejected) + "/" + std::to_string(fixtures_list.size()) +
             " malformed datasets rejected with the named rule, truncated checkpoint " +
             (ckpt_rejected ? "rejected" : "ACCEPTED"));
}

} // namespace

int main() {
  fixtures::TempDir work("acceptance");
  const std::vector<std::pair<int, std::function<void()>>> steps{
      {1, gradient_suite},
      {2, gradient_penalty_cases},
      {3, metric_oracle},
      {4, regressor_trend},
      {8, [&] { format_round_trip(work.path); }},
      {5, [&] { experiments(work.path); }},
  };
  for (const auto &[n, step] : steps) {
    try {
      step();
    } catch (const std::exception &e) {
      report(n, false, std::string("error: ") + e.what());
      if (n == 5) {
        report(6, false, "not run");
        report(7, false, "not run");
      }
    }
  }
  std::printf("%s: %d criteria failed\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
