#include "cyclegzsl/models.hpp"

#include <cstring>

#include "cyclegzsl/errors.hpp"

namespace cyclegzsl {

namespace {

DenseLayer init_layer(std::size_t in, std::size_t out, Activation act, Rng &rng) {
  return DenseLayer{truncated_normal(in, out, kInitStddev, kInitTruncation, rng),
                    Matrix::zeros(1, out), act};
}

void require_positive(std::size_t v, const char *what) {
  if (v == 0) throw ContractError(std::string(what) + " must be >= 1");
}

ad::Var apply_activation(const ad::Var &x, Activation act) {
  switch (act) {
  case Activation::identity: return x;
  case Activation::relu: return ad::relu(x);
  case Activation::leaky_relu: return ad::leaky_relu(x, kLeakySlope);
  case Activation::sigmoid: return ad::sigmoid(x);
  }
  return x;
}

} // namespace

const char *activation_name(Activation a) noexcept {
  switch (a) {
  case Activation::identity: return "identity";
  case Activation::relu: return "relu";
  case Activation::leaky_relu: return "leaky_relu";
  case Activation::sigmoid: return "sigmoid";
  }
  return "identity";
}

Activation parse_activation(std::string_view name) {
  if (name == "identity") return Activation::identity;
  if (name == "relu") return Activation::relu;
  if (name == "leaky_relu") return Activation::leaky_relu;
  if (name == "sigmoid") return Activation::sigmoid;
  throw ValidationError("unknown activation '" + std::string(name) + "'");
}

std::size_t MlpParams::input_width() const {
  return layers.empty() ? 0 : layers.front().weight.rows();
}

std::size_t MlpParams::output_width() const {
  return layers.empty() ? 0 : layers.back().weight.cols();
}

std::vector<const Matrix *> MlpParams::tensors() const {
  std::vector<const Matrix *> out;
  for (const auto &l : layers) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
  }
  return out;
}

std::vector<Matrix *> MlpParams::tensors() {
  std::vector<Matrix *> out;
  for (auto &l : layers) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
  }
  return out;
}

void MlpParams::validate() const {
  if (layers.empty()) throw DimensionError(network + ": no layers");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto &l = layers[i];
    if (l.bias.rows() != 1 || l.bias.cols() != l.weight.cols())
      throw DimensionError(network + ": layer " + std::to_string(i) + " bias does not match weight");
    if (i > 0 && layers[i - 1].weight.cols() != l.weight.rows())
      throw DimensionError(network + ": layer " + std::to_string(i) + " input width " +
                           std::to_string(l.weight.rows()) + " does not chain from " +
                           std::to_string(layers[i - 1].weight.cols()));
  }
}

MlpParams init_generator(std::size_t semantic_dim, std::size_t noise_dim, std::size_t visual_dim,
                         std::uint64_t seed, std::size_t hidden) {
  require_positive(semantic_dim, "generator semantic width");
  require_positive(noise_dim, "generator noise width");
  require_positive(visual_dim, "generator visual width");
  require_positive(hidden, "generator hidden width");
  Rng rng(seed);
  MlpParams p{"generator", {}};
  p.layers.push_back(init_layer(semantic_dim + noise_dim, hidden, Activation::leaky_relu, rng));
  p.layers.push_back(init_layer(hidden, visual_dim, Activation::relu, rng));
  return p;
}

MlpParams init_discriminator(std::size_t visual_dim, std::size_t semantic_dim, std::uint64_t seed,
                             std::size_t hidden) {
  require_positive(visual_dim, "critic visual width");
  require_positive(semantic_dim, "critic semantic width");
  require_positive(hidden, "critic hidden width");
  Rng rng(seed);
  MlpParams p{"critic", {}};
  p.layers.push_back(init_layer(visual_dim + semantic_dim, hidden, Activation::leaky_relu, rng));
  p.layers.push_back(init_layer(hidden, 1, Activation::identity, rng));
  return p;
}

MlpParams init_regressor(std::size_t visual_dim, std::size_t semantic_dim, RegressorOutput output,
                         std::uint64_t seed) {
  require_positive(visual_dim, "regressor visual width");
  require_positive(semantic_dim, "regressor semantic width");
  Rng rng(seed);
  MlpParams p{"regressor", {}};
  p.layers.push_back(init_layer(visual_dim, semantic_dim,
                                output == RegressorOutput::sigmoid ? Activation::sigmoid
                                                                   : Activation::identity,
                                rng));
  return p;
}

MlpParams init_classifier(std::size_t visual_dim, std::size_t classes, std::uint64_t seed) {
  require_positive(visual_dim, "classifier visual width");
  if (classes < 2) throw ContractError("classifier needs at least 2 classes");
  Rng rng(seed);
  MlpParams p{"classifier", {}};
  p.layers.push_back(init_layer(visual_dim, classes, Activation::identity, rng));
  return p;
}

MlpParams zeroed(MlpParams params) {
  for (Matrix *t : params.tensors())
    for (double &v : t->data()) v = 0.0;
  return params;
}

BoundMlp bind(const MlpParams &params) {
  BoundMlp b;
  b.params = &params;
  std::size_t i = 0;
  for (const Matrix *t : params.tensors())
    b.tensors.push_back(ad::leaf(*t, params.network + "." + std::to_string(i++)));
  return b;
}

ad::Var BoundMlp::operator()(const ad::Var &input) const {
  if (params == nullptr || tensors.size() != 2 * params->layers.size())
    throw ContractError("BoundMlp: tensors do not match the bound network");
  if (input.cols() != params->input_width())
    throw DimensionError(params->network + ": input width " + std::to_string(input.cols()) +
                         " but network expects " + std::to_string(params->input_width()));
  ad::Var h = input;
  for (std::size_t i = 0; i < params->layers.size(); ++i) {
    h = ad::add_bias(ad::matmul(h, tensors[2 * i]), tensors[2 * i + 1]);
    h = apply_activation(h, params->layers[i].activation);
  }
  return h;
}

Matrix forward(const MlpParams &params, const Matrix &input) {
  return bind(params)(ad::leaf(input)).value();
}

Matrix generator_forward(const MlpParams &generator, const Matrix &semantic, const Matrix &noise) {
  if (semantic.rows() != noise.rows())
    throw DimensionError("generator_forward: semantic batch " + std::to_string(semantic.rows()) +
                         " and noise batch " + std::to_string(noise.rows()) + " differ");
  return forward(generator, hconcat(semantic, noise));
}

Matrix critic_forward(const MlpParams &critic, const Matrix &visual, const Matrix &semantic) {
  if (visual.rows() != semantic.rows())
    throw DimensionError("critic_forward: visual and semantic batch sizes differ");
  return forward(critic, hconcat(visual, semantic));
}

MlpOptimizer::MlpOptimizer(const MlpParams &params, AdamHyper hyper) {
  for (const Matrix *t : params.tensors()) states_.push_back(AdamState::for_shape(*t, hyper));
}

void MlpOptimizer::step(MlpParams &params, const std::vector<Matrix> &grads, double lr) {
  auto tensors = params.tensors();
  if (grads.size() != tensors.size() || states_.size() != tensors.size())
    throw ContractError(params.network + ": gradient count does not match parameter count");
  for (std::size_t i = 0; i < tensors.size(); ++i)
    adam_step(*tensors[i], grads[i], states_[i], lr,
              params.network + ".layer" + std::to_string(i / 2) + (i % 2 ? ".bias" : ".weight"));
}

std::uint64_t params_hash(const MlpParams &params) {
  std::uint64_t h = fnv1a(params.network);
  for (const Matrix *t : params.tensors()) {
    auto d = t->data();
    h = fnv1a(std::string_view(reinterpret_cast<const char *>(d.data()), d.size_bytes()), h);
  }
  return h;
}

} // namespace cyclegzsl
