#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "trex/detect.hpp"
#include "trex/dino.hpp"
#include "trex/synthgen.hpp"
#include "trex/tire.hpp"
#include "trex/vit.hpp"

namespace trex {

/// Everything a run needs; round-trips through JSON losslessly.
struct ExperimentConfig {
  GeneratorConfig generator;
  VitConfig vit;
  DinoConfig dino;
  DinoTrainConfig dino_train;
  TireConfig tire;
  DetectorConfig detector;
  std::size_t n_thresholds = 512;
  std::uint64_t split_seed = 1;
  std::string out_dir = "run";
  /// Empty: <out_dir>/dataset.ndjson.
  std::string dataset;
  int threads = 0;  ///< 0: OpenMP default

  std::filesystem::path dataset_path() const;
};

void validate(const ExperimentConfig& config);
nlohmann::json to_json(const DetectorConfig& config);
DetectorConfig detector_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ExperimentConfig& config);
/// Missing keys keep their defaults; unknown top-level keys are rejected.
ExperimentConfig experiment_config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Sets every seed (generator, split, DINO, TIRE) to `seed`.
void set_all_seeds(ExperimentConfig& config, std::uint64_t seed);

}  // namespace trex
