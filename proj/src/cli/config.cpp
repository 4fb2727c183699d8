#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "mrnet/cli.hpp"
#include "mrnet/errors.hpp"

namespace mrnet::cli {

using nlohmann::json;

namespace {

const std::set<std::string> kKnownKeys = {
    "input",         "base_res",   "scheme",      "fit",          "export_levels",
    "variant",       "wiring",     "width",       "hidden_layers", "omega_g",
    "base_band",     "bands",      "precision",   "learning_rate", "batch_size",
    "max_epochs_per_stage",        "convergence_threshold",        "patience",
    "loss_floor",    "seed",       "parallel_stages",              "loss",
    "output_dir"};

template <class T>
T get(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("config key '") + key + "' has the wrong type");
  }
}

void check(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

}  // namespace

std::vector<double> RunConfig::bands_for(int num_stages) const {
  if (!bands.empty()) {
    if (static_cast<int>(bands.size()) != num_stages) {
      throw ConfigError("config lists " + std::to_string(bands.size()) + " bands but the pyramid has " +
                        std::to_string(num_stages) + " levels");
    }
    return bands;
  }
  std::vector<double> out;
  double b = base_band;
  for (int k = 0; k < num_stages; ++k, b *= 2.0) out.push_back(b);
  return out;
}

RunConfig parse_run_config(const json& j) {
  check(j.is_object(), "config must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (!kKnownKeys.count(key)) throw ConfigError("unknown config key '" + key + "'");
  }
  RunConfig c;
  check(j.contains("input"), "config is missing 'input'");
  c.input = get<std::string>(j, "input", "");
  c.output_dir = get<std::string>(j, "output_dir", c.output_dir.string());
  c.base_res = get<int>(j, "base_res", c.base_res);
  check(is_power_of_two(c.base_res), "base_res must be a power of two");

  const auto scheme = get<std::string>(j, "scheme", "pyramid");
  check(scheme == "pyramid" || scheme == "tower", "scheme must be 'pyramid' or 'tower'");
  c.scheme = scheme == "pyramid" ? PyramidKind::pyramid : PyramidKind::tower;
  const auto fit = get<std::string>(j, "fit", "pad");
  check(fit == "pad" || fit == "crop", "fit must be 'pad' or 'crop'");
  c.fit = parse_fit_policy(fit);
  c.export_levels = get<bool>(j, "export_levels", c.export_levels);

  const auto variant = get<std::string>(j, "variant", "M");
  check(variant == "S" || variant == "L" || variant == "M", "variant must be S, L or M");
  c.variant = parse_variant(variant);
  const auto wiring = get<std::string>(j, "wiring", "concat");
  check(wiring == "concat" || wiring == "add", "wiring must be 'concat' or 'add'");
  c.wiring = parse_wiring(wiring);
  c.width = get<int>(j, "width", c.width);
  check(c.width >= 1 && c.width <= 65535, "width must be in [1, 65535]");
  c.hidden_layers = get<int>(j, "hidden_layers", c.hidden_layers);
  check(c.hidden_layers >= (c.variant == Variant::S ? 0 : 1) && c.hidden_layers <= 255,
        "hidden_layers must be in [1, 255] for L and M");
  c.omega_g = get<double>(j, "omega_g", c.omega_g);
  check(c.omega_g > 0.0, "omega_g must be positive");
  c.base_band = get<double>(j, "base_band", c.base_band);
  check(c.base_band > 0.0, "base_band must be positive");
  c.bands = get<std::vector<double>>(j, "bands", {});
  for (std::size_t k = 0; k < c.bands.size(); ++k) {
    check(c.bands[k] > 0.0 && (k == 0 || c.bands[k] > c.bands[k - 1]), "bands must be positive and strictly increasing");
  }
  const int precision = get<int>(j, "precision", 64);
  check(precision == 32 || precision == 64, "precision must be 32 or 64");
  c.precision = precision == 32 ? Precision::f32 : Precision::f64;

  TrainConfig& t = c.train;
  t.learning_rate = get<double>(j, "learning_rate", t.learning_rate);
  t.batch_size = get<int>(j, "batch_size", t.batch_size);
  t.max_epochs_per_stage = get<int>(j, "max_epochs_per_stage", t.max_epochs_per_stage);
  t.convergence_threshold = get<double>(j, "convergence_threshold", t.convergence_threshold);
  t.patience = get<int>(j, "patience", t.patience);
  t.loss_floor = get<double>(j, "loss_floor", t.loss_floor);
  t.seed = get<std::uint64_t>(j, "seed", t.seed);
  t.parallel_stages = get<bool>(j, "parallel_stages", t.parallel_stages);
  check(get<std::string>(j, "loss", "mse") == "mse", "loss must be 'mse'");
  try {
    t.validate();
  } catch (const ContractViolation& e) {
    throw ConfigError(e.what());
  }
  return c;
}

json RunConfig::to_json() const {
  return {{"input", input.string()},
          {"output_dir", output_dir.string()},
          {"base_res", base_res},
          {"scheme", scheme == PyramidKind::pyramid ? "pyramid" : "tower"},
          {"fit", fit == FitPolicy::pad ? "pad" : "crop"},
          {"export_levels", export_levels},
          {"variant", to_string(variant)},
          {"wiring", to_string(wiring)},
          {"width", width},
          {"hidden_layers", hidden_layers},
          {"omega_g", omega_g},
          {"base_band", base_band},
          {"bands", bands},
          {"precision", precision == Precision::f32 ? 32 : 64},
          {"learning_rate", train.learning_rate},
          {"batch_size", train.batch_size},
          {"max_epochs_per_stage", train.max_epochs_per_stage},
          {"convergence_threshold", train.convergence_threshold},
          {"patience", train.patience},
          {"loss_floor", train.loss_floor},
          {"seed", train.seed},
          {"parallel_stages", train.parallel_stages},
          {"loss", "mse"}};
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config not found: '" + path.string() + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config is not valid JSON: " + std::string(e.what()));
  }
  RunConfig c = parse_run_config(j);
  // Relative paths in a config file resolve against the file's directory.
  const auto base = path.parent_path();
  if (c.input.is_relative() && !base.empty()) c.input = base / c.input;
  if (c.output_dir.is_relative() && !base.empty() && j.contains("output_dir")) c.output_dir = base / c.output_dir;
  return c;
}

namespace {

Homography homography_from_json(const json& j) {
  if (j.is_object()) {
    if (!j.contains("homography") || j.size() != 1) throw ConfigError("homography JSON object needs exactly the key 'homography'");
    return homography_from_json(j.at("homography"));
  }
  std::vector<double> values;
  try {
    if (j.is_array() && j.size() == 3 && j[0].is_array()) {
      for (const auto& row : j) {
        if (!row.is_array() || row.size() != 3) throw ConfigError("homography rows must hold 3 numbers");
        for (const auto& v : row) values.push_back(v.get<double>());
      }
    } else {
      values = j.get<std::vector<double>>();
    }
  } catch (const json::exception&) {
    throw ConfigError("homography must be numbers");
  }
  if (values.size() != 9) throw ConfigError("homography needs exactly 9 values");
  try {
    return Homography::from_row_major(values);
  } catch (const ContractViolation& e) {
    throw ConfigError(e.what());
  }
}

}  // namespace

Homography parse_homography(const std::string& text) {
  std::vector<double> values;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      values.push_back(std::stod(item, &used));
      while (used < item.size() && std::isspace(static_cast<unsigned char>(item[used]))) ++used;
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("homography entry '" + item + "' is not a number");
    }
  }
  if (values.size() != 9) throw ConfigError("homography needs exactly 9 comma-separated values");
  try {
    return Homography::from_row_major(values);
  } catch (const ContractViolation& e) {
    throw ConfigError(e.what());
  }
}

Homography load_homography(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("homography file not found: '" + path.string() + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("homography file is not valid JSON: " + std::string(e.what()));
  }
  return homography_from_json(j);
}

}  // namespace mrnet::cli
