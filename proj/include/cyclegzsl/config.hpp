#pragma once

// Training configuration, hyperparameter profiles and their JSON form.
//
// Resolution order: built-in defaults < profile < config file < flags.

#include <cstddef>
#include <cstdint>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "cyclegzsl/losses.hpp"

namespace cyclegzsl {

enum class Variant { baseline, cycle_wgan, cycle_uwgan, cycle_clswgan };

const char *variant_name(Variant v) noexcept;
/// Throws UsageError listing the valid names.
Variant parse_variant(std::string_view name);
bool uses_cycle(Variant v) noexcept;
bool uses_cls(Variant v) noexcept;

struct StageRates {
  double lr = 1e-4;
  std::size_t batch = 64;
  std::size_t epochs = 1;
};

struct TrainConfig {
  Variant variant = Variant::baseline;
  LossWeights weights;
  StageRates regressor{1e-4, 64, 100};
  double lr_generator = 1e-4;
  double lr_critic = 1e-3;
  std::size_t gan_batch = 64;
  std::size_t gan_epochs = 926;
  StageRates classifier{1e-4, 4096, 80};
  std::size_t n_critic = 5;
  std::size_t noise_dim = 0; // 0: same as the semantic width
  std::size_t hidden = 4096;
  std::uint64_t seed = 0;
  std::size_t per_class = 300;
  double finetune_fraction = 0.25;
  std::size_t unseen_batch = 0; // 0: same as gan_batch
  bool from_scratch_unseen = false;
  std::size_t monitor_per_class = 50;
  bool record_wall_time = false;
  /// Keys given by a profile, config file or flag rather than left at the
  /// built-in default. Not part of the serialized form.
  std::set<std::string> explicit_keys;

  void validate() const;
  std::size_t noise_width(std::size_t semantic_dim) const noexcept {
    return noise_dim ? noise_dim : semantic_dim;
  }
  std::size_t finetune_epochs() const;
};

/// Profile names: cub, flo, sun, awa, imagenet (published settings) and desk
/// (small synthetic benchmark).
std::vector<std::string> profile_names();
/// Overwrites the profile's fields; throws UsageError for an unknown name.
void apply_profile(TrainConfig &config, std::string_view profile);

std::string config_to_json(const TrainConfig &config);
/// Applies every key present in `json_text` over `config`. Unknown keys and
/// ill-typed values raise ConfigError.
void apply_config_json(TrainConfig &config, std::string_view json_text);
/// Single key/value, value in JSON syntax ("1e-4", "true", "\"baseline\"").
void apply_config_value(TrainConfig &config, const std::string &key, const std::string &json_value);
std::string config_hash(const TrainConfig &config);

} // namespace cyclegzsl
