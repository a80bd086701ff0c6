#include "cyclegzsl/config.hpp"

#include <cmath>
#include <functional>
#include <map>

#include "json.hpp"

#include "cyclegzsl/errors.hpp"
#include "cyclegzsl/random.hpp"

namespace cyclegzsl {

namespace {

using ordered_json = nlohmann::ordered_json;

struct ProfileRow {
  const char *name;
  StageRates regressor;
  double lr_generator, lr_critic;
  std::size_t gan_batch, gan_epochs;
  StageRates classifier;
};

// Published hyperparameters, one row per dataset.
constexpr ProfileRow kProfiles[] = {
    {"cub", {1e-4, 64, 100}, 1e-4, 1e-3, 64, 926, {1e-4, 4096, 80}},
    {"flo", {1e-4, 64, 100}, 1e-4, 1e-3, 64, 926, {1e-4, 2048, 100}},
    {"sun", {1e-4, 64, 100}, 1e-2, 1e-2, 64, 926, {1e-4, 4096, 298}},
    {"awa", {1e-3, 64, 50}, 1e-4, 1e-3, 64, 350, {1e-4, 2048, 37}},
    {"imagenet", {1e-4, 2048, 5}, 1e-4, 1e-3, 256, 300, {1e-3, 2048, 300}},
};

void set_profile_key(TrainConfig &c, const char *key) { c.explicit_keys.insert(key); }

double positive_double(const ordered_json &v, const std::string &key) {
  if (!v.is_number()) throw ConfigError("config: '" + key + "' must be a number");
  const double d = v.get<double>();
  if (!(d > 0.0) || !std::isfinite(d)) throw ConfigError("config: '" + key + "' must be > 0");
  return d;
}

double nonneg_double(const ordered_json &v, const std::string &key) {
  if (!v.is_number()) throw ConfigError("config: '" + key + "' must be a number");
  const double d = v.get<double>();
  if (!(d >= 0.0) || !std::isfinite(d)) throw ConfigError("config: '" + key + "' must be >= 0");
  return d;
}

std::size_t count(const ordered_json &v, const std::string &key) {
  if (!v.is_number_unsigned()) throw ConfigError("config: '" + key + "' must be a nonnegative integer");
  return v.get<std::size_t>();
}

bool boolean(const ordered_json &v, const std::string &key) {
  if (!v.is_boolean()) throw ConfigError("config: '" + key + "' must be true or false");
  return v.get<bool>();
}

using Setter = std::function<void(TrainConfig &, const ordered_json &, const std::string &)>;

const std::map<std::string, Setter> &setters() {
  static const std::map<std::string, Setter> table = {
      {"variant",
       [](TrainConfig &c, const ordered_json &v, const std::string &k) {
         if (!v.is_string()) throw ConfigError("config: '" + k + "' must be a string");
         c.variant = parse_variant(v.get<std::string>());
       }},
      {"seed", [](TrainConfig &c, const ordered_json &v, const std::string &k) { c.seed = count(v, k); }},
      {"gp_lambda", [](TrainConfig &c, const ordered_json &v, const std::string &k) { c.weights.gp_lambda = nonneg_double(v, k); }},
      {"beta", [](TrainConfig &c, const ordered_json &v, const std::string &k) { c.weights.beta = nonneg_double(v, k); }},
      {"cycle_lambda", [](TrainConfig &c, const ordered_json &v, const std::string &k) { c.weights.cycle_lambda = nonneg_double(v, k); }},
      {"cls_lambda", [](TrainConfig &c, const ordered_json &v, const std::string &k) { c.weights.cls_lambda = nonneg_double(v, k); }},
      {"lr_regressor", [](TrainConfig &c, const ordered_json &v, const std::string &k) { c.regressor.lr = positive_double(v, k); }},
      {"batch_regressor", [](TrainConfig &c, const ordered_json &v, const std::string &k) { c.regressor.batch = count(v, k); }},
      {"epochs_regressor", [](TrainConfig &c, const ordered_json &v, const std::string &k) { c.regressor.epochs = count(v, k); }},
      {"lr_generator", [](TrainConfig &c, const ordered_json &v, const std::string &k) { c.lr_generator = positive_double(v, k); }},
      {"lr_critic", [](TrainConfig &c, const ordered_json &v, const std::string &k) { c.lr_critic = positive_double(v, k); }},
      {"batch_gan", [](TrainConfig &c, const ordered_json &v, const std::string &k) { c.gan_batch = count(v, k); }},
      {"epochs_gan", [](TrainConfig &c, const ordered_json &v, const std::string &k) { c.gan_epochs = count(v, k); }},
      {"lr_classifier", [](TrainConfig &c, const ordered_json &v, const std::string &k) { c.classifier.lr = positive_double(v, k); }},
      {"batch_classifier", [](TrainConfig &c, const ordered_json &v, const std::string &k) { c.classifier.batch = count(v, k); }},
      {"epochs_classifier", [](TrainConfig &c, const ordered_json &v, const std::string &k) { c.classifier.epochs = count(v, k); }},
      {"n_critic", [](TrainConfig &c, const ordered_json &v, const std::string &k) { c.n_critic = count(v, k); }},
      {"noise_dim", [](TrainConfig &c, const ordered_json &v, const std::string &k) { c.noise_dim = count(v, k); }},
      {"hidden", [](TrainConfig &c, const ordered_json &v, const std::string &k) { c.hidden = count(v, k); }},
      {"per_class", [](TrainConfig &c, const ordered_json &v, const std::string &k) { c.per_class = count(v, k); }},
      {"finetune_fraction", [](TrainConfig &c, const ordered_json &v, const std::string &k) { c.finetune_fraction = nonneg_double(v, k); }},
      {"unseen_batch", [](TrainConfig &c, const ordered_json &v, const std::string &k) { c.unseen_batch = count(v, k); }},
      {"from_scratch_unseen", [](TrainConfig &c, const ordered_json &v, const std::string &k) { c.from_scratch_unseen = boolean(v, k); }},
      {"monitor_per_class", [](TrainConfig &c, const ordered_json &v, const std::string &k) { c.monitor_per_class = count(v, k); }},
      {"record_wall_time", [](TrainConfig &c, const ordered_json &v, const std::string &k) { c.record_wall_time = boolean(v, k); }},
  };
  return table;
}

void apply_key(TrainConfig &c, const std::string &key, const ordered_json &value) {
  const auto &table = setters();
  const auto it = table.find(key);
  if (it == table.end()) throw ConfigError("config: unknown key '" + key + "'");
  it->second(c, value, key);
  c.explicit_keys.insert(key);
}

} // namespace

const char *variant_name(Variant v) noexcept {
  switch (v) {
  case Variant::baseline: return "baseline";
  case Variant::cycle_wgan: return "cycle-wgan";
  case Variant::cycle_uwgan: return "cycle-uwgan";
  case Variant::cycle_clswgan: return "cycle-clswgan";
  }
  return "?";
}

Variant parse_variant(std::string_view name) {
  for (Variant v : {Variant::baseline, Variant::cycle_wgan, Variant::cycle_uwgan, Variant::cycle_clswgan})
    if (name == variant_name(v)) return v;
  throw UsageError("unknown variant '" + std::string(name) +
                   "'; expected one of: baseline, cycle-wgan, cycle-uwgan, cycle-clswgan");
}

bool uses_cycle(Variant v) noexcept { return v != Variant::baseline; }
bool uses_cls(Variant v) noexcept { return v == Variant::baseline || v == Variant::cycle_clswgan; }

void TrainConfig::validate() const {
  weights.validate();
  auto rate = [](double lr, const char *what) {
    if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError(std::string(what) + " must be > 0");
  };
  rate(regressor.lr, "lr_regressor");
  rate(lr_generator, "lr_generator");
  rate(lr_critic, "lr_critic");
  rate(classifier.lr, "lr_classifier");
  auto at_least_one = [](std::size_t n, const char *what) {
    if (n < 1) throw ConfigError(std::string(what) + " must be >= 1");
  };
  at_least_one(regressor.batch, "batch_regressor");
  at_least_one(gan_batch, "batch_gan");
  at_least_one(classifier.batch, "batch_classifier");
  at_least_one(n_critic, "n_critic");
  at_least_one(hidden, "hidden");
  at_least_one(per_class, "per_class");
  at_least_one(monitor_per_class, "monitor_per_class");
  if (!(finetune_fraction >= 0.0) || !std::isfinite(finetune_fraction))
    throw ConfigError("finetune_fraction must be >= 0");
}

std::size_t TrainConfig::finetune_epochs() const {
  return static_cast<std::size_t>(std::ceil(finetune_fraction * static_cast<double>(gan_epochs)));
}

std::vector<std::string> profile_names() {
  std::vector<std::string> names;
  for (const auto &p : kProfiles) names.emplace_back(p.name);
  names.emplace_back("desk");
  return names;
}

void apply_profile(TrainConfig &c, std::string_view profile) {
  if (profile == "desk") {
    // Small synthetic benchmark (K=16, L=8, C=15): narrow networks and short
    // schedules that finish in seconds on one core.
    c.regressor = {1e-3, 64, 50};
    c.lr_generator = 1e-3;
    c.lr_critic = 1e-3;
    c.gan_batch = 64;
    c.gan_epochs = 200;
    c.classifier = {1e-3, 256, 50};
    c.hidden = 64;
  } else {
    const ProfileRow *row = nullptr;
    for (const auto &p : kProfiles)
      if (profile == p.name) row = &p;
    if (!row) {
      std::string names;
      for (const auto &n : profile_names()) names += (names.empty() ? "" : ", ") + n;
      throw UsageError("unknown profile '" + std::string(profile) + "'; expected one of: " + names);
    }
    c.regressor = row->regressor;
    c.lr_generator = row->lr_generator;
    c.lr_critic = row->lr_critic;
    c.gan_batch = row->gan_batch;
    c.gan_epochs = row->gan_epochs;
    c.classifier = row->classifier;
  }
  for (const char *key : {"lr_regressor", "batch_regressor", "epochs_regressor", "lr_generator",
                          "lr_critic", "batch_gan", "epochs_gan", "lr_classifier", "batch_classifier",
                          "epochs_classifier"})
    set_profile_key(c, key);
  if (profile == "desk") set_profile_key(c, "hidden");
}

std::string config_to_json(const TrainConfig &c) {
  ordered_json j;
  j["variant"] = variant_name(c.variant);
  j["seed"] = c.seed;
  j["gp_lambda"] = c.weights.gp_lambda;
  j["beta"] = c.weights.beta;
  j["cycle_lambda"] = c.weights.cycle_lambda;
  j["cls_lambda"] = c.weights.cls_lambda;
  j["lr_regressor"] = c.regressor.lr;
  j["batch_regressor"] = c.regressor.batch;
  j["epochs_regressor"] = c.regressor.epochs;
  j["lr_generator"] = c.lr_generator;
  j["lr_critic"] = c.lr_critic;
  j["batch_gan"] = c.gan_batch;
  j["epochs_gan"] = c.gan_epochs;
  j["lr_classifier"] = c.classifier.lr;
  j["batch_classifier"] = c.classifier.batch;
  j["epochs_classifier"] = c.classifier.epochs;
  j["n_critic"] = c.n_critic;
  j["noise_dim"] = c.noise_dim;
  j["hidden"] = c.hidden;
  j["per_class"] = c.per_class;
  j["finetune_fraction"] = c.finetune_fraction;
  j["unseen_batch"] = c.unseen_batch;
  j["from_scratch_unseen"] = c.from_scratch_unseen;
  j["monitor_per_class"] = c.monitor_per_class;
  j["record_wall_time"] = c.record_wall_time;
  return j.dump(2) + "\n";
}

void apply_config_json(TrainConfig &c, std::string_view text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error &e) {
    throw ConfigError(std::string("config: not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config: expected a JSON object");
  for (const auto &[key, value] : j.items()) {
    if (key == "profile") continue; // handled by the caller before the file is applied
    apply_key(c, key, value);
  }
}

void apply_config_value(TrainConfig &c, const std::string &key, const std::string &json_value) {
  ordered_json v;
  try {
    v = ordered_json::parse(json_value);
  } catch (const nlohmann::json::parse_error &) {
    v = json_value; // bare strings such as variant names
  }
  apply_key(c, key, v);
}

std::string config_hash(const TrainConfig &c) { return hex64(fnv1a(config_to_json(c))); }

} // namespace cyclegzsl
