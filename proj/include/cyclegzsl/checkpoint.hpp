#pragma once

// Checkpoint file: a text header followed by raw little-endian float64 data.
//
//   cyclegzsl-checkpoint 1
//   network generator
//   config_hash 00ab...
//   layers 2
//   layer 0 40x4096 leaky_relu
//   layer 1 4096x2048 relu
//   end_header
//   <weights of layer 0><bias of layer 0><weights of layer 1>...
//
// Matrices are stored row-major.

#include <filesystem>
#include <string>

#include "cyclegzsl/models.hpp"

namespace cyclegzsl {

struct Checkpoint {
  MlpParams params;
  std::string config_hash;
};

std::string serialize_checkpoint(const MlpParams &params, const std::string &config_hash);
Checkpoint parse_checkpoint(const std::string &bytes);

void save_checkpoint(const std::filesystem::path &path, const MlpParams &params,
                     const std::string &config_hash);
Checkpoint load_checkpoint(const std::filesystem::path &path);

} // namespace cyclegzsl
