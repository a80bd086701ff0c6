#pragma once

// GZSL datasets: per-class semantic vectors, seen-class training features and
// a test set covering seen and unseen classes.
//
// On disk a dataset is a directory:
//
//   manifest.json        name, K, L, C, seen_classes, unseen_classes, semantic_format
//   attributes.csv       C rows of L values
//   train_features.csv   N_tr rows of K values
//   train_labels.csv     N_tr class ids
//   test_features.csv    N_te rows of K values
//   test_labels.csv      N_te class ids
//
// Class ids are 0-based and contiguous.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cyclegzsl/matrix.hpp"

namespace cyclegzsl {

enum class SemanticFormat { continuous, binary };

const char *semantic_format_name(SemanticFormat f) noexcept;
SemanticFormat parse_semantic_format(std::string_view name);

struct GzslDataset {
  std::string name;
  SemanticFormat semantic_format = SemanticFormat::continuous;
  Matrix semantic; // C × L
  Matrix train_features;
  std::vector<std::size_t> train_labels;
  Matrix test_features;
  std::vector<std::size_t> test_labels;
  std::vector<std::size_t> seen_classes;   // sorted
  std::vector<std::size_t> unseen_classes; // sorted

  std::size_t visual_dim() const noexcept { return train_features.cols(); }
  std::size_t semantic_dim() const noexcept { return semantic.cols(); }
  std::size_t class_count() const noexcept { return semantic.rows(); }

  bool is_seen(std::size_t cls) const;
  bool is_unseen(std::size_t cls) const;

  /// Throws ValidationError whose message starts with the violated rule.
  void validate() const;

  friend bool operator==(const GzslDataset &, const GzslDataset &) = default;
};

/// Row `cls` of the semantic matrix, as a 1×L matrix.
Matrix per_class_semantic(const GzslDataset &dataset, std::size_t cls);
/// One semantic row per label.
Matrix semantic_rows(const GzslDataset &dataset, const std::vector<std::size_t> &labels);

GzslDataset load_dataset(const std::filesystem::path &dir);
void save_dataset(const GzslDataset &dataset, const std::filesystem::path &dir);

/// Serialized manifest text, exactly as save_dataset writes it.
std::string manifest_json(const GzslDataset &dataset);
/// FNV-1a over every serialized file, so two datasets share a fingerprint
/// only when their directories would be byte-identical.
std::string dataset_fingerprint(const GzslDataset &dataset);

/// Keeps only `keep` (renumbered 0.. in ascending order). Classes listed in
/// `make_unseen` become unseen: their training samples move to the test set.
GzslDataset restrict_classes(const GzslDataset &dataset, std::vector<std::size_t> keep,
                             const std::vector<std::size_t> &make_unseen = {});

struct SyntheticSpec {
  std::size_t visual_dim = 16;   // K
  std::size_t semantic_dim = 8;  // L
  std::size_t classes = 15;      // C
  std::size_t unseen = 5;
  std::size_t train_per_class = 200;
  std::size_t test_per_class = 50;
  double noise = 0.5;
  SemanticFormat semantic_format = SemanticFormat::continuous;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Class semantics a ~ N(0, I) (thresholded at 0 for binary), samples
/// x = relu(aW + b) + noise·ε with one ground-truth (W, b) shared by all
/// classes. Unseen classes are a seeded random subset and appear only in test.
GzslDataset make_synthetic(const SyntheticSpec &spec);

} // namespace cyclegzsl
