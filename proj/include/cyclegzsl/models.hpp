#pragma once

// The four networks: generator G(a, z) -> x, critic D(x, a) -> score,
// regressor R(x) -> a, and the linear softmax classifier C(x) -> logits.
//
// Conditioned inputs are concatenated in a fixed order, [a | z] for G and
// [x | a] for D, so checkpoints are portable.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "cyclegzsl/adam.hpp"
#include "cyclegzsl/autodiff.hpp"
#include "cyclegzsl/matrix.hpp"
#include "cyclegzsl/random.hpp"

namespace cyclegzsl {

enum class Activation { identity, relu, leaky_relu, sigmoid };

inline constexpr double kLeakySlope = 0.2;
inline constexpr double kInitStddev = 0.01;
inline constexpr double kInitTruncation = 2.0; // in standard deviations
inline constexpr std::size_t kPaperHiddenWidth = 4096;

const char *activation_name(Activation a) noexcept;
Activation parse_activation(std::string_view name);

struct DenseLayer {
  Matrix weight; // in × out
  Matrix bias;   // 1 × out
  Activation activation = Activation::identity;
  friend bool operator==(const DenseLayer &, const DenseLayer &) = default;
};

struct MlpParams {
  std::string network;
  std::vector<DenseLayer> layers;

  std::size_t input_width() const;
  std::size_t output_width() const;
  /// Parameter matrices in checkpoint order: weight then bias, per layer.
  std::vector<const Matrix *> tensors() const;
  std::vector<Matrix *> tensors();
  /// Throws DimensionError if layer widths do not chain.
  void validate() const;

  friend bool operator==(const MlpParams &, const MlpParams &) = default;
};

enum class RegressorOutput { identity, sigmoid };

MlpParams init_generator(std::size_t semantic_dim, std::size_t noise_dim, std::size_t visual_dim,
                         std::uint64_t seed, std::size_t hidden = kPaperHiddenWidth);
MlpParams init_discriminator(std::size_t visual_dim, std::size_t semantic_dim, std::uint64_t seed,
                             std::size_t hidden = kPaperHiddenWidth);
MlpParams init_regressor(std::size_t visual_dim, std::size_t semantic_dim, RegressorOutput output,
                         std::uint64_t seed);
MlpParams init_classifier(std::size_t visual_dim, std::size_t classes, std::uint64_t seed);

/// Same architecture with every weight and bias set to zero.
MlpParams zeroed(MlpParams params);

/// A network whose tensors are graph leaves (checkpoint order), so a forward
/// pass can be differentiated with respect to them. Refers to `params`, which
/// must outlive it.
struct BoundMlp {
  const MlpParams *params = nullptr;
  std::vector<ad::Var> tensors;

  ad::Var operator()(const ad::Var &input) const;
};

BoundMlp bind(const MlpParams &params);
/// Plain forward pass for inference.
Matrix forward(const MlpParams &params, const Matrix &input);

Matrix generator_forward(const MlpParams &generator, const Matrix &semantic, const Matrix &noise);
Matrix critic_forward(const MlpParams &critic, const Matrix &visual, const Matrix &semantic);

/// Adam states for every tensor of one network.
class MlpOptimizer {
public:
  MlpOptimizer() = default;
  MlpOptimizer(const MlpParams &params, AdamHyper hyper = {});

  /// `grads` in checkpoint order, as returned by ad::backward on bind().tensors.
  void step(MlpParams &params, const std::vector<Matrix> &grads, double lr);

private:
  std::vector<AdamState> states_;
};

/// FNV-1a over the raw bytes of every tensor; used to prove a network was
/// left untouched.
std::uint64_t params_hash(const MlpParams &params);

} // namespace cyclegzsl
