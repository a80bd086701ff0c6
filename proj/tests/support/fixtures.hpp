#pragma once

#include <filesystem>
#include <string>

#include "cyclegzsl/config.hpp"
#include "cyclegzsl/data.hpp"

namespace fixtures {

namespace fs = std::filesystem;

inline cyclegzsl::SyntheticSpec tiny_spec(std::uint64_t seed = 0) {
  cyclegzsl::SyntheticSpec s;
  s.visual_dim = 6;
  s.semantic_dim = 4;
  s.classes = 5;
  s.unseen = 2;
  s.train_per_class = 24;
  s.test_per_class = 6;
  s.noise = 0.3;
  s.seed = seed;
  return s;
}

/// A few epochs of everything on narrow networks; runs in milliseconds.
inline cyclegzsl::TrainConfig tiny_config(cyclegzsl::Variant v, std::uint64_t seed = 0) {
  cyclegzsl::TrainConfig c;
  c.variant = v;
  c.seed = seed;
  c.hidden = 12;
  c.regressor = {1e-2, 16, 3};
  c.lr_generator = 1e-3;
  c.lr_critic = 1e-3;
  c.gan_batch = 16;
  c.gan_epochs = 3;
  c.classifier = {1e-2, 32, 3};
  c.per_class = 10;
  c.monitor_per_class = 5;
  return c;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string &tag)
      : path(fs::temp_directory_path() / ("cyclegzsl_" + tag)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  TempDir(const TempDir &) = delete;
  TempDir &operator=(const TempDir &) = delete;
};

} // namespace fixtures
