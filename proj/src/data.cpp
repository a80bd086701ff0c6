#include "cyclegzsl/data.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "json.hpp"

#include "cyclegzsl/errors.hpp"
#include "cyclegzsl/random.hpp"
#include "cyclegzsl/textio.hpp"

namespace cyclegzsl {

namespace {

using ordered_json = nlohmann::ordered_json;

[[noreturn]] void invalid(const std::string &msg) { throw ValidationError(msg); }

bool contains(const std::vector<std::size_t> &sorted, std::size_t v) {
  return std::binary_search(sorted.begin(), sorted.end(), v);
}

void check_finite(const Matrix &m, const char *rule) {
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c)
      if (!std::isfinite(m(r, c)))
        invalid(std::string(rule) + " at row " + std::to_string(r) + ", column " + std::to_string(c));
}

std::vector<std::size_t> class_list(const ordered_json &j, const char *key) {
  if (!j.contains(key) || !j[key].is_array()) invalid(std::string("manifest: missing list '") + key + "'");
  std::vector<std::size_t> out;
  for (const auto &v : j[key]) {
    if (!v.is_number_unsigned()) invalid(std::string("manifest: '") + key + "' must hold class ids >= 0");
    out.push_back(v.get<std::size_t>());
  }
  return out;
}

std::size_t count_field(const ordered_json &j, const char *key) {
  if (!j.contains(key) || !j[key].is_number_unsigned())
    invalid(std::string("manifest: '") + key + "' must be a nonnegative integer");
  return j[key].get<std::size_t>();
}

} // namespace

const char *semantic_format_name(SemanticFormat f) noexcept {
  return f == SemanticFormat::binary ? "binary" : "continuous";
}

SemanticFormat parse_semantic_format(std::string_view name) {
  if (name == "continuous") return SemanticFormat::continuous;
  if (name == "binary") return SemanticFormat::binary;
  invalid("semantic_format must be \"continuous\" or \"binary\", got \"" + std::string(name) + "\"");
}

bool GzslDataset::is_seen(std::size_t cls) const { return contains(seen_classes, cls); }
bool GzslDataset::is_unseen(std::size_t cls) const { return contains(unseen_classes, cls); }

void GzslDataset::validate() const {
  const std::size_t c = class_count();
  if (c < 2) invalid("class count: need at least 2 classes");
  if (semantic_dim() == 0) invalid("semantic width: L must be >= 1");
  if (!std::is_sorted(seen_classes.begin(), seen_classes.end()) ||
      !std::is_sorted(unseen_classes.begin(), unseen_classes.end()))
    invalid("class lists must be sorted");
  if (std::adjacent_find(seen_classes.begin(), seen_classes.end()) != seen_classes.end() ||
      std::adjacent_find(unseen_classes.begin(), unseen_classes.end()) != unseen_classes.end())
    invalid("duplicate class id in split lists");
  for (std::size_t cls : seen_classes)
    if (is_unseen(cls)) invalid("split overlap: class " + std::to_string(cls) + " is both seen and unseen");
  for (std::size_t cls = 0; cls < c; ++cls)
    if (!is_seen(cls) && !is_unseen(cls))
      invalid("split coverage: class " + std::to_string(cls) + " is neither seen nor unseen");
  if (seen_classes.size() + unseen_classes.size() != c)
    invalid("split coverage: class ids must lie in [0, " + std::to_string(c) + ")");
  if (seen_classes.empty()) invalid("split coverage: no seen classes");

  check_finite(semantic, "non-finite attribute");
  if (semantic_format == SemanticFormat::binary)
    for (double v : semantic.data())
      if (v != 0.0 && v != 1.0) invalid("binary attribute out of {0,1}: " + format_double(v));

  if (train_features.rows() != train_labels.size())
    invalid("train size mismatch: " + std::to_string(train_features.rows()) + " feature rows, " +
            std::to_string(train_labels.size()) + " labels");
  if (test_features.rows() != test_labels.size())
    invalid("test size mismatch: " + std::to_string(test_features.rows()) + " feature rows, " +
            std::to_string(test_labels.size()) + " labels");
  if (train_features.rows() == 0) invalid("empty training set");
  if (test_features.rows() > 0 && test_features.cols() != train_features.cols())
    invalid("feature width mismatch between train and test");
  check_finite(train_features, "non-finite train feature");
  check_finite(test_features, "non-finite test feature");

  for (std::size_t y : train_labels) {
    if (y >= c) invalid("label " + std::to_string(y) + " out of range [0, " + std::to_string(c) + ")");
    if (!is_seen(y)) invalid("train label " + std::to_string(y) + " not in seen set");
  }
  std::vector<std::size_t> test_counts(c, 0);
  for (std::size_t y : test_labels) {
    if (y >= c) invalid("label " + std::to_string(y) + " out of range [0, " + std::to_string(c) + ")");
    ++test_counts[y];
  }
  for (std::size_t cls : unseen_classes)
    if (test_counts[cls] == 0) invalid("unseen class " + std::to_string(cls) + " has no test samples");
}

Matrix per_class_semantic(const GzslDataset &dataset, std::size_t cls) {
  if (cls >= dataset.class_count())
    throw ContractError("per_class_semantic: class " + std::to_string(cls) + " >= C = " +
                        std::to_string(dataset.class_count()));
  const std::size_t idx[] = {cls};
  return dataset.semantic.gather_rows(idx);
}

Matrix semantic_rows(const GzslDataset &dataset, const std::vector<std::size_t> &labels) {
  for (std::size_t y : labels)
    if (y >= dataset.class_count()) throw ContractError("semantic_rows: class " + std::to_string(y) + " out of range");
  return dataset.semantic.gather_rows(labels);
}

std::string manifest_json(const GzslDataset &d) {
  ordered_json j;
  j["name"] = d.name;
  j["K"] = d.visual_dim();
  j["L"] = d.semantic_dim();
  j["C"] = d.class_count();
  j["seen_classes"] = d.seen_classes;
  j["unseen_classes"] = d.unseen_classes;
  j["semantic_format"] = semantic_format_name(d.semantic_format);
  return j.dump(2) + "\n";
}

void save_dataset(const GzslDataset &d, const std::filesystem::path &dir) {
  d.validate();
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  write_text_file(dir / "manifest.json", manifest_json(d));
  write_text_file(dir / "attributes.csv", matrix_to_csv(d.semantic));
  write_text_file(dir / "train_features.csv", matrix_to_csv(d.train_features));
  write_text_file(dir / "train_labels.csv", labels_to_csv(d.train_labels));
  write_text_file(dir / "test_features.csv", matrix_to_csv(d.test_features));
  write_text_file(dir / "test_labels.csv", labels_to_csv(d.test_labels));
}

GzslDataset load_dataset(const std::filesystem::path &dir) {
  ordered_json j;
  try {
    j = ordered_json::parse(read_text_file(dir / "manifest.json"));
  } catch (const nlohmann::json::parse_error &e) {
    invalid(std::string("manifest: not valid JSON: ") + e.what());
  }
  if (!j.is_object()) invalid("manifest: expected a JSON object");

  GzslDataset d;
  d.name = j.value("name", std::string{});
  const std::size_t k = count_field(j, "K"), l = count_field(j, "L"), c = count_field(j, "C");
  d.seen_classes = class_list(j, "seen_classes");
  d.unseen_classes = class_list(j, "unseen_classes");
  std::sort(d.seen_classes.begin(), d.seen_classes.end());
  std::sort(d.unseen_classes.begin(), d.unseen_classes.end());
  if (!j.contains("semantic_format") || !j["semantic_format"].is_string())
    invalid("manifest: missing 'semantic_format'");
  d.semantic_format = parse_semantic_format(j["semantic_format"].get<std::string>());

  d.semantic = matrix_from_csv(read_text_file(dir / "attributes.csv"), l, "attributes.csv");
  if (d.semantic.rows() != c)
    invalid("attributes.csv: expected " + std::to_string(c) + " rows, found " +
            std::to_string(d.semantic.rows()));
  d.train_features = matrix_from_csv(read_text_file(dir / "train_features.csv"), k, "train_features.csv");
  d.train_labels = labels_from_csv(read_text_file(dir / "train_labels.csv"), "train_labels.csv");
  d.test_features = matrix_from_csv(read_text_file(dir / "test_features.csv"), k, "test_features.csv");
  d.test_labels = labels_from_csv(read_text_file(dir / "test_labels.csv"), "test_labels.csv");
  d.validate();
  return d;
}

std::string dataset_fingerprint(const GzslDataset &d) {
  std::uint64_t h = fnv1a(manifest_json(d));
  h = fnv1a(matrix_to_csv(d.semantic), h);
  h = fnv1a(matrix_to_csv(d.train_features), h);
  h = fnv1a(labels_to_csv(d.train_labels), h);
  h = fnv1a(matrix_to_csv(d.test_features), h);
  h = fnv1a(labels_to_csv(d.test_labels), h);
  return hex64(h);
}

GzslDataset restrict_classes(const GzslDataset &d, std::vector<std::size_t> keep,
                             const std::vector<std::size_t> &make_unseen) {
  std::sort(keep.begin(), keep.end());
  keep.erase(std::unique(keep.begin(), keep.end()), keep.end());
  const std::size_t none = static_cast<std::size_t>(-1);
  std::vector<std::size_t> remap(d.class_count(), none);
  for (std::size_t i = 0; i < keep.size(); ++i) {
    if (keep[i] >= d.class_count())
      throw ContractError("restrict_classes: class " + std::to_string(keep[i]) + " out of range");
    remap[keep[i]] = i;
  }
  std::vector<bool> to_unseen(d.class_count(), false);
  for (std::size_t cls : make_unseen) {
    if (cls >= d.class_count() || remap[cls] == none)
      throw ContractError("restrict_classes: class " + std::to_string(cls) + " is not kept");
    to_unseen[cls] = true;
  }

  GzslDataset out;
  out.name = d.name;
  out.semantic_format = d.semantic_format;
  out.semantic = d.semantic.gather_rows(keep);
  for (std::size_t cls : keep) {
    if (d.is_unseen(cls) || to_unseen[cls])
      out.unseen_classes.push_back(remap[cls]);
    else
      out.seen_classes.push_back(remap[cls]);
  }

  std::vector<std::size_t> train_rows, test_rows_from_train, test_rows;
  for (std::size_t i = 0; i < d.train_labels.size(); ++i) {
    const std::size_t y = d.train_labels[i];
    if (remap[y] == none) continue;
    (to_unseen[y] ? test_rows_from_train : train_rows).push_back(i);
  }
  for (std::size_t i = 0; i < d.test_labels.size(); ++i)
    if (remap[d.test_labels[i]] != none) test_rows.push_back(i);

  out.train_features = d.train_features.gather_rows(train_rows);
  for (std::size_t i : train_rows) out.train_labels.push_back(remap[d.train_labels[i]]);
  out.test_features = vconcat(d.test_features.gather_rows(test_rows),
                              d.train_features.gather_rows(test_rows_from_train));
  for (std::size_t i : test_rows) out.test_labels.push_back(remap[d.test_labels[i]]);
  for (std::size_t i : test_rows_from_train) out.test_labels.push_back(remap[d.train_labels[i]]);
  out.validate();
  return out;
}

void SyntheticSpec::validate() const {
  if (visual_dim == 0 || semantic_dim == 0) invalid("synthetic spec: K and L must be >= 1");
  if (classes < 2) invalid("synthetic spec: need at least 2 classes");
  if (unseen >= classes) invalid("synthetic spec: unseen classes must be a proper subset (unseen < classes)");
  if (unseen == 0) invalid("synthetic spec: need at least 1 unseen class");
  if (train_per_class == 0 || test_per_class == 0) invalid("synthetic spec: samples per class must be >= 1");
  if (!(noise >= 0.0) || !std::isfinite(noise)) invalid("synthetic spec: noise must be finite and >= 0");
}

GzslDataset make_synthetic(const SyntheticSpec &spec) {
  spec.validate();
  const std::size_t k = spec.visual_dim, l = spec.semantic_dim, c = spec.classes;

  Rng semantic_rng(derive_seed(spec.seed, "synthetic.semantic"));
  Rng truth_rng(derive_seed(spec.seed, "synthetic.truth"));
  Rng split_rng(derive_seed(spec.seed, "synthetic.split"));
  Rng sample_rng(derive_seed(spec.seed, "synthetic.samples"));

  GzslDataset d;
  d.name = "synthetic-" + std::to_string(spec.seed);
  d.semantic_format = spec.semantic_format;
  d.semantic = standard_normal(c, l, semantic_rng);
  if (spec.semantic_format == SemanticFormat::binary)
    for (double &v : d.semantic.data()) v = v > 0.0 ? 1.0 : 0.0;

  Matrix w = standard_normal(l, k, truth_rng);
  for (double &v : w.data()) v /= std::sqrt(static_cast<double>(l));
  const Matrix b = standard_normal(1, k, truth_rng);
  Matrix means = matmul(d.semantic, w);
  for (std::size_t r = 0; r < c; ++r)
    for (std::size_t j = 0; j < k; ++j) means(r, j) = std::max(0.0, means(r, j) + 0.5 * b(0, j));

  std::vector<std::size_t> order(c);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), split_rng);
  d.unseen_classes.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(spec.unseen));
  d.seen_classes.assign(order.begin() + static_cast<std::ptrdiff_t>(spec.unseen), order.end());
  std::sort(d.unseen_classes.begin(), d.unseen_classes.end());
  std::sort(d.seen_classes.begin(), d.seen_classes.end());

  std::normal_distribution<double> eps(0.0, 1.0);
  auto draw = [&](std::size_t cls, std::size_t count, Matrix &x, std::vector<std::size_t> &y) {
    Matrix block(count, k);
    for (std::size_t i = 0; i < count; ++i)
      for (std::size_t j = 0; j < k; ++j) block(i, j) = means(cls, j) + spec.noise * eps(sample_rng);
    x = x.empty() ? block : vconcat(x, block);
    y.insert(y.end(), count, cls);
  };
  d.train_features = Matrix(0, k);
  d.test_features = Matrix(0, k);
  for (std::size_t cls = 0; cls < c; ++cls) {
    if (d.is_seen(cls)) draw(cls, spec.train_per_class, d.train_features, d.train_labels);
    draw(cls, spec.test_per_class, d.test_features, d.test_labels);
  }
  d.validate();
  return d;
}

} // namespace cyclegzsl
