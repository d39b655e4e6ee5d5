#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "trex/config.hpp"
#include "trex/dataset_io.hpp"
#include "trex/detect.hpp"
#include "trex/synthgen.hpp"

namespace trex {

/// Binseg best-split gain of each listed sample (parallel over samples).
std::vector<double> score_binseg(const std::vector<Sample>& samples, const std::vector<std::size_t>& ids,
                                 const DetectorConfig& detector);

/// Max of the smoothed dissimilarity profile of each listed sample.
std::vector<double> score_embedding(const std::vector<Sample>& samples, const std::vector<std::size_t>& ids,
                                    const Embedder& embed, const DetectorConfig& detector);

/// Reuses <dataset>.split.json when it matches the dataset and seed,
/// otherwise writes a fresh one.
SplitManifest load_or_make_split(const std::filesystem::path& dataset, std::uint64_t seed);

/// Dataset NDJSON plus manifest; prints label counts and tier breakdown.
void cmd_gen(const ExperimentConfig& config, std::ostream& log);

/// Trains on the split's train half; returns the checkpoint path
/// (<out>/<method>.ckpt, with a .json manifest and a .log.json next to it).
std::filesystem::path cmd_train(const std::string& method, const ExperimentConfig& config, std::ostream& log);

/// Scores the split's test half into <out>/scores_<method>.csv. Learned
/// methods need a checkpoint (MissingCheckpoint otherwise).
std::filesystem::path cmd_score(const std::string& method, const ExperimentConfig& config,
                                const std::filesystem::path& checkpoint, std::ostream& log);

/// report.txt, summary.json and curves/<method>.csv under <out>.
void cmd_eval(const std::vector<std::filesystem::path>& score_files, const ExperimentConfig& config, std::ostream& log);

/// gen, train (trexdino, tire), score (binseg, tire, trexdino), eval.
void cmd_pipeline(const ExperimentConfig& config, std::ostream& log);

}  // namespace trex
