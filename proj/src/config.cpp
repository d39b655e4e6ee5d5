#include "trex/config.hpp"

#include <fstream>
#include <set>

#include "trex/error.hpp"

namespace trex {

std::filesystem::path ExperimentConfig::dataset_path() const {
  return dataset.empty() ? std::filesystem::path(out_dir) / "dataset.ndjson" : std::filesystem::path(dataset);
}

void validate(const ExperimentConfig& c) {
  validate(c.generator);
  validate(c.vit);
  validate(c.dino);
  validate(c.tire);
  if (c.dino_train.epochs == 0 || c.dino_train.batch_size == 0) {
    throw Error(Errc::ConfigError, "dino_train: epochs and batch_size must be positive");
  }
  const auto& d = c.detector;
  if (d.half_window == 0 || d.stride == 0 || d.smooth_width == 0 || d.min_segment == 0) {
    throw Error(Errc::ConfigError, "detector: half_window, stride, smooth_width and min_segment must be positive");
  }
  if (c.tire.window_size != d.half_window) {
    throw Error(Errc::ConfigError, "tire.window_size (" + std::to_string(c.tire.window_size) +
                                       ") must equal detector.half_window (" + std::to_string(d.half_window) + ")");
  }
  if (c.n_thresholds < 2) throw Error(Errc::ConfigError, "n_thresholds must be at least 2");
  if (c.out_dir.empty()) throw Error(Errc::ConfigError, "out_dir must not be empty");
  if (c.threads < 0) throw Error(Errc::ConfigError, "threads must be non-negative");
}

nlohmann::json to_json(const DetectorConfig& c) {
  return {{"half_window", c.half_window}, {"stride", c.stride}, {"smooth_width", c.smooth_width},
          {"min_segment", c.min_segment}};
}

DetectorConfig detector_config_from_json(const nlohmann::json& j) {
  DetectorConfig c;
  c.half_window = j.value("half_window", c.half_window);
  c.stride = j.value("stride", c.stride);
  c.smooth_width = j.value("smooth_width", c.smooth_width);
  c.min_segment = j.value("min_segment", c.min_segment);
  return c;
}

nlohmann::json to_json(const ExperimentConfig& c) {
  return {{"generator", to_json(c.generator)},
          {"vit", to_json(c.vit)},
          {"dino", to_json(c.dino)},
          {"dino_train", to_json(c.dino_train)},
          {"tire", to_json(c.tire)},
          {"detector", to_json(c.detector)},
          {"n_thresholds", c.n_thresholds},
          {"split_seed", c.split_seed},
          {"out_dir", c.out_dir},
          {"dataset", c.dataset},
          {"threads", c.threads}};
}

ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(Errc::ConfigError, "config must be a JSON object");
  static const std::set<std::string> known = {"generator", "vit", "dino", "dino_train", "tire", "detector",
                                              "n_thresholds", "split_seed", "out_dir", "dataset", "threads"};
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) throw Error(Errc::ConfigError, "unknown config key '" + key + "'");
  }
  try {
    ExperimentConfig c;
    if (j.contains("generator")) c.generator = generator_config_from_json(j.at("generator"));
    if (j.contains("vit")) c.vit = vit_config_from_json(j.at("vit"));
    if (j.contains("dino")) c.dino = dino_config_from_json(j.at("dino"));
    if (j.contains("dino_train")) c.dino_train = dino_train_config_from_json(j.at("dino_train"));
    if (j.contains("tire")) c.tire = tire_config_from_json(j.at("tire"));
    if (j.contains("detector")) c.detector = detector_config_from_json(j.at("detector"));
    c.n_thresholds = j.value("n_thresholds", c.n_thresholds);
    c.split_seed = j.value("split_seed", c.split_seed);
    c.out_dir = j.value("out_dir", c.out_dir);
    c.dataset = j.value("dataset", c.dataset);
    c.threads = j.value("threads", c.threads);
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ConfigError, std::string("config: ") + e.what());
  }
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot read config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ConfigError, path.string() + ": " + e.what());
  }
  return experiment_config_from_json(j);
}

void set_all_seeds(ExperimentConfig& c, std::uint64_t seed) {
  c.generator.master_seed = seed;
  c.split_seed = seed;
  c.dino_train.seed = seed;
  c.tire.seed = seed;
}

}  // namespace trex
