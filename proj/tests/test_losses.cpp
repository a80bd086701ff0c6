#include "doctest.h"

#include <cmath>

#include "cyclegzsl/errors.hpp"
#include "cyclegzsl/losses.hpp"
#include "support/fd_oracle.hpp"
#include "support/plain_nets.hpp"

using namespace cyclegzsl;
using plain::random_matrix;

namespace {

std::vector<Matrix> copy_tensors(const MlpParams &p) {
  std::vector<Matrix> out;
  for (const Matrix *t : p.tensors()) out.push_back(*t);
  return out;
}

MlpParams with_tensors(MlpParams p, const std::vector<Matrix> &tensors) {
  auto ts = p.tensors();
  for (std::size_t i = 0; i < ts.size(); ++i) *ts[i] = tensors[i];
  return p;
}

MlpParams scaled(MlpParams p, double factor) {
  for (Matrix *t : p.tensors())
    for (double &v : t->data()) v *= factor;
  return p;
}

// Single-layer classifier with the given logits for a 1-row input [1].
MlpParams logit_classifier(const std::vector<double> &logits) {
  MlpParams c{"classifier", {}};
  c.layers.push_back(DenseLayer{Matrix::zeros(1, logits.size()), Matrix::row_vector(logits),
                                Activation::identity});
  return c;
}

} // namespace

TEST_CASE("softmax probabilities") {
  std::mt19937_64 rng(0);
  const Matrix x = random_matrix(3, 5, rng);
  const Matrix uniform = softmax_prob(zeroed(init_classifier(5, 4, 0)), x);
  for (double v : uniform.data()) CHECK(v == 0.25);

  // Oracle: 1/(1+e^0.5) computed directly.
  const double low = 1.0 / (1.0 + std::exp(0.5));
  const Matrix p = softmax_prob(logit_classifier({1000.0, 1000.5}), Matrix{{1.0}});
  CHECK(p.all_finite());
  CHECK(p(0, 0) == doctest::Approx(low).epsilon(1e-12));
  CHECK(p(0, 1) == doctest::Approx(1.0 - low).epsilon(1e-12));
  CHECK(low == doctest::Approx(0.3775).epsilon(1e-4));

  const Matrix sharp = softmax_prob(logit_classifier({0.0, 0.0, 800.0, 0.0}), Matrix{{1.0}});
  CHECK(sharp(0, 2) == doctest::Approx(1.0));
  CHECK(sharp(0, 0) < 1e-300);

  CHECK_THROWS_AS(softmax_rows(Matrix{{std::nan(""), 1.0}}), NumericError);
}

TEST_CASE("softmax rows sum to one and preserve the logit argmax") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const Matrix logits = random_matrix(4, 6, rng, 10.0);
    const Matrix p = softmax_rows(logits);
    for (std::size_t r = 0; r < 4; ++r) {
      double s = 0.0;
      std::size_t best_l = 0, best_p = 0;
      for (std::size_t c = 0; c < 6; ++c) {
        s += p(r, c);
        CHECK(p(r, c) > 0.0);
        if (logits(r, c) > logits(r, best_l)) best_l = c;
        if (p(r, c) > p(r, best_p)) best_p = c;
      }
      CHECK(std::abs(s - 1.0) <= 1e-9);
      CHECK(best_l == best_p);
    }
  }
}

TEST_CASE("classification loss") {
  const MlpParams perfect = logit_classifier({0.0, 1000.0, 0.0});
  const auto bound = bind(perfect);
  const std::size_t truth[] = {1};
  CHECK(cls_loss(bound, ad::leaf(Matrix{{1.0}}), truth).scalar() == 0.0);

  const MlpParams uniform = zeroed(init_classifier(3, 4, 0));
  const std::size_t labels[] = {0, 3, 2};
  std::mt19937_64 rng(1);
  CHECK(cls_loss(bind(uniform), ad::leaf(random_matrix(3, 3, rng)), labels).scalar() ==
        doctest::Approx(std::log(4.0)).epsilon(1e-14));

  const std::size_t out_of_range[] = {0, 4, 1};
  CHECK_THROWS_AS(cls_loss(bind(uniform), ad::leaf(random_matrix(3, 3, rng)), out_of_range),
                  ValidationError);
}

TEST_CASE("classification loss gradient matches finite differences") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    std::mt19937_64 rng(seed);
    const MlpParams c = scaled(init_classifier(6, 4, seed), 50.0);
    const Matrix x = random_matrix(7, 6, rng);
    const std::vector<std::size_t> labels{0, 1, 2, 3, 0, 1, 2};
    const auto b = bind(c);
    const auto analytic = ad::backward(cls_loss(b, ad::leaf(x), labels), b.tensors);
    const auto numeric = fd::central_differences(
        [&](const std::vector<Matrix> &p) { return plain::cross_entropy(p[0], p[1], x, labels); },
        copy_tensors(c));
    CHECK(fd::max_relative_error(analytic, numeric) <= 1e-4);
  }
}

TEST_CASE("gradient penalty analytic cases") {
  std::mt19937_64 rng(3);
  const std::size_t k = 6, l = 3, batch = 9;
  const Matrix real = random_matrix(batch, k, rng), fake = random_matrix(batch, k, rng);
  const Matrix a = random_matrix(batch, l, rng);

  // Linear critic whose x-block has unit norm: ‖∇x̂ D‖ = 1 everywhere.
  MlpParams linear{"critic", {}};
  Matrix w = random_matrix(k + l, 1, rng);
  double norm = 0.0;
  for (std::size_t i = 0; i < k; ++i) norm += w(i, 0) * w(i, 0);
  for (std::size_t i = 0; i < k; ++i) w(i, 0) /= std::sqrt(norm);
  linear.layers.push_back(DenseLayer{w, Matrix{{0.3}}, Activation::identity});
  Rng alpha_rng(1);
  const GpBatch gp = make_gp_batch(real, fake, a, alpha_rng);
  for (double al : gp.alpha) CHECK((al >= 0.0 && al <= 1.0));
  CHECK(std::abs(critic_objective(bind(linear), gp, 10.0).gradient_penalty) <= 1e-10);

  const MlpParams zero = zeroed(init_discriminator(k, l, 0, 16));
  const CriticObjective z = critic_objective(bind(zero), gp, 10.0);
  CHECK(z.wasserstein == 0.0);
  CHECK(std::abs(z.gradient_penalty - 10.0) <= 1e-10);
  CHECK(z.loss.scalar() == doctest::Approx(10.0));
}

TEST_CASE("critic loss gradient (with the second-order penalty path) matches finite differences") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    std::mt19937_64 rng(seed + 20);
    const MlpParams d = scaled(init_discriminator(8, 4, seed, 12), 40.0);
    const Matrix real = random_matrix(6, 8, rng), fake = random_matrix(6, 8, rng);
    const Matrix a = random_matrix(6, 4, rng);
    Rng alpha_rng(seed);
    const GpBatch gp = make_gp_batch(real, fake, a, alpha_rng);
    const auto b = bind(d);
    const CriticObjective obj = critic_objective(b, gp, 10.0);
    CHECK(obj.loss.scalar() ==
          doctest::Approx(plain::critic_loss(copy_tensors(d), real, fake, a, gp.alpha, 10.0)).epsilon(1e-12));
    const auto analytic = ad::backward(obj.loss, b.tensors);
    const auto numeric = fd::central_differences(
        [&](const std::vector<Matrix> &p) { return plain::critic_loss(p, real, fake, a, gp.alpha, 10.0); },
        copy_tensors(d));
    CAPTURE(seed);
    CHECK(fd::max_relative_error(analytic, numeric) <= 1e-4);
  }
}

TEST_CASE("wgan_losses: both players and diagnostics") {
  std::mt19937_64 rng(2);
  const MlpParams g = scaled(init_generator(4, 4, 8, 1, 10), 40.0);
  const MlpParams d = scaled(init_discriminator(8, 4, 2, 10), 40.0);
  const Matrix real = random_matrix(5, 8, rng), a = random_matrix(5, 4, rng), z = random_matrix(5, 4, rng);
  const auto gb = bind(g), db = bind(d);
  Rng r(0);
  const WganLosses losses = wgan_losses(gb, db, real, a, z, 10.0, r);
  const Matrix fake = plain::generator(copy_tensors(g), a, z);
  CHECK(losses.fake.value() == fake);
  const double real_mean = plain::mean(plain::critic(copy_tensors(d), real, a));
  const double fake_mean = plain::mean(plain::critic(copy_tensors(d), fake, a));
  CHECK(losses.wasserstein == doctest::Approx(real_mean - fake_mean).epsilon(1e-12));
  CHECK(losses.generator_loss.scalar() == doctest::Approx(-fake_mean).epsilon(1e-12));
  CHECK(losses.critic_loss.scalar() >= -losses.wasserstein - 1e-12);

  // Generator gradient of -E[D(G(a,z), a)].
  const auto analytic = ad::backward(losses.generator_loss, gb.tensors);
  const auto numeric = fd::central_differences(
      [&](const std::vector<Matrix> &p) {
        return -plain::mean(plain::critic(copy_tensors(d), plain::generator(p, a, z), a));
      },
      copy_tensors(g));
  CHECK(fd::max_relative_error(analytic, numeric) <= 1e-4);
}

TEST_CASE("cycle loss fixtures") {
  const std::size_t l = 3;
  // G passes a through (identity hidden and output) and ignores z; R is the
  // identity. With positive a, R(G(a, z)) = a.
  MlpParams g{"generator", {}};
  Matrix w1 = Matrix::zeros(2 * l, l);
  for (std::size_t i = 0; i < l; ++i) w1(i, i) = 1.0;
  Matrix eye = Matrix::zeros(l, l);
  for (std::size_t i = 0; i < l; ++i) eye(i, i) = 1.0;
  g.layers.push_back(DenseLayer{w1, Matrix::zeros(1, l), Activation::leaky_relu});
  g.layers.push_back(DenseLayer{eye, Matrix::zeros(1, l), Activation::relu});
  MlpParams r{"regressor", {}};
  r.layers.push_back(DenseLayer{eye, Matrix::zeros(1, l), Activation::identity});

  std::mt19937_64 rng(1);
  Matrix a = random_matrix(4, l, rng);
  for (double &v : a.data()) v = std::abs(v) + 0.1;
  const SemanticBatch seen{a, random_matrix(4, l, rng)};
  CHECK(cyc_loss(bind(r), bind(g), seen).scalar() == 0.0);

  // G outputs zero, R is the zero map: loss = ‖a‖² = 5 per row.
  const Matrix a5{{1, 2, 0}, {0, 1, 2}, {2, 0, 1}};
  const SemanticBatch fives{a5, random_matrix(3, l, rng)};
  CHECK(cyc_loss(bind(zeroed(r)), bind(zeroed(g)), fives).scalar() == 5.0);
}

TEST_CASE("cycle loss with identical seen and unseen batches doubles") {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 10; ++trial) {
    const MlpParams g = scaled(init_generator(5, 5, 7, trial, 9), 60.0);
    const MlpParams r = scaled(init_regressor(7, 5, RegressorOutput::identity, trial), 60.0);
    const SemanticBatch batch{random_matrix(6, 5, rng), random_matrix(6, 5, rng)};
    const double single = cyc_loss(bind(r), bind(g), batch).scalar();
    CHECK(single >= 0.0);
    CHECK(cyc_loss(bind(r), bind(g), batch, batch).scalar() == 2.0 * single);
  }
}

TEST_CASE("cycle loss gradient w.r.t. the generator matches finite differences") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    std::mt19937_64 rng(seed + 40);
    const MlpParams g = scaled(init_generator(4, 4, 6, seed, 10), 60.0);
    const MlpParams r = scaled(init_regressor(6, 4, RegressorOutput::identity, seed + 1), 60.0);
    const SemanticBatch seen{random_matrix(5, 4, rng), random_matrix(5, 4, rng)};
    const SemanticBatch unseen{random_matrix(3, 4, rng), random_matrix(3, 4, rng)};
    const auto gb = bind(g);
    const auto analytic = ad::backward(cyc_loss(bind(r), gb, seen, unseen), gb.tensors);
    const auto rt = copy_tensors(r);
    const auto numeric = fd::central_differences(
        [&](const std::vector<Matrix> &p) {
          double total = 0.0;
          for (const SemanticBatch *b : {&seen, &unseen}) {
            const Matrix back = plain::dense(plain::generator(p, b->semantic, b->noise), rt[0], rt[1], 0);
            total += plain::mean_sq_row_error(b->semantic, back);
          }
          return total;
        },
        copy_tensors(g));
    CAPTURE(seed);
    CHECK(fd::max_relative_error(analytic, numeric) <= 1e-4);
  }
}

TEST_CASE("regression loss fixtures and gradient") {
  std::mt19937_64 rng(7);
  const Matrix x = random_matrix(5, 4, rng);
  MlpParams r = init_regressor(4, 8, RegressorOutput::identity, 0);
  const Matrix exact = forward(r, x);
  CHECK(reg_loss(bind(r), ad::leaf(x), exact).scalar() == 0.0);
  CHECK(reg_loss(bind(zeroed(r)), ad::leaf(x), Matrix::ones(5, 8)).scalar() == 8.0);

  for (RegressorOutput mode : {RegressorOutput::identity, RegressorOutput::sigmoid}) {
    const MlpParams rr = scaled(init_regressor(4, 3, mode, 2), 80.0);
    const Matrix a = random_matrix(5, 3, rng);
    const auto b = bind(rr);
    const auto analytic = ad::backward(reg_loss(b, ad::leaf(x), a), b.tensors);
    const int act = mode == RegressorOutput::sigmoid ? 3 : 0;
    const auto numeric = fd::central_differences(
        [&](const std::vector<Matrix> &p) {
          return plain::mean_sq_row_error(a, plain::dense(x, p[0], p[1], act));
        },
        copy_tensors(rr));
    CHECK(fd::max_relative_error(analytic, numeric) <= 1e-4);
  }
}

TEST_CASE("minimizing the regression loss on a linear ground truth") {
  // a = xM exactly. Oracle: the least-squares fit through the normal
  // equations has zero residual, so the loss can be driven to ~0.
  std::mt19937_64 rng(12);
  const std::size_t n = 40, k = 6, l = 3;
  const Matrix x = random_matrix(n, k, rng);
  const Matrix m = random_matrix(k, l, rng, 0.5);
  const Matrix a = matmul(x, m);

  {
    // Solve (XᵀX) W = Xᵀa by Gaussian elimination and confirm zero residual.
    Matrix lhs = matmul(x.transposed(), x), rhs = matmul(x.transposed(), a);
    for (std::size_t c = 0; c < k; ++c) {
      for (std::size_t r = c + 1; r < k; ++r) {
        const double f = lhs(r, c) / lhs(c, c);
        for (std::size_t j = 0; j < k; ++j) lhs(r, j) -= f * lhs(c, j);
        for (std::size_t j = 0; j < l; ++j) rhs(r, j) -= f * rhs(c, j);
      }
    }
    Matrix w(k, l);
    for (std::size_t c = k; c-- > 0;)
      for (std::size_t j = 0; j < l; ++j) {
        double s = rhs(c, j);
        for (std::size_t q = c + 1; q < k; ++q) s -= lhs(c, q) * w(q, j);
        w(c, j) = s / lhs(c, c);
      }
    CHECK(plain::mean_sq_row_error(a, matmul(x, w)) < 1e-20);
  }

  MlpParams r = init_regressor(k, l, RegressorOutput::identity, 0);
  MlpOptimizer opt(r);
  double loss = 0.0;
  for (int step = 0; step < 500; ++step) {
    const auto b = bind(r);
    const ad::Var lv = reg_loss(b, ad::leaf(x), a);
    loss = lv.scalar();
    opt.step(r, ad::backward(lv, b.tensors), step < 300 ? 0.05 : 0.005);
  }
  loss = reg_loss(bind(r), ad::leaf(x), a).scalar();
  CHECK(loss < 1e-3);
}

TEST_CASE("loss weights must be nonnegative") {
  LossWeights w;
  CHECK_NOTHROW(w.validate());
  CHECK(w.gp_lambda == 10.0);
  CHECK(w.beta == 0.01);
  CHECK(w.cycle_lambda == 0.01);
  CHECK(w.cls_lambda == 0.01);
  w.beta = -1.0;
  CHECK_THROWS_AS(w.validate(), ConfigError);
}
