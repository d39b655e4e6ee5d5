#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "trex/synthgen.hpp"

namespace trex {

/// NDJSON, one sample per line, sample_id = line number (from 0).
void write_dataset(const std::vector<Sample>& samples, const std::filesystem::path& path);
std::vector<Sample> read_dataset(const std::filesystem::path& path);

/// 64-bit FNV-1a of a file's bytes, as 16 hex digits.
std::string file_hash(const std::filesystem::path& path);
/// FNV-1a over the decimal ids joined by ','.
std::string ids_hash(const std::vector<std::size_t>& ids);

/// Seeded 50/50 sample split. Train gets floor(n/2) ids; both lists sorted.
struct SplitManifest {
  std::uint64_t seed = 0;
  std::size_t n_samples = 0;
  std::string dataset_hash;
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
  std::string train_hash;
  std::string test_hash;
};

SplitManifest make_split(std::size_t n_samples, std::uint64_t seed, std::string dataset_hash);
nlohmann::json to_json(const SplitManifest& split);
SplitManifest split_from_json(const nlohmann::json& j);
/// Throws ConfigError when the lists overlap, miss ids or fail their hashes.
void validate(const SplitManifest& split);

std::filesystem::path split_path_for(const std::filesystem::path& dataset);
std::filesystem::path manifest_path_for(const std::filesystem::path& dataset);

struct ScoreRow {
  std::size_t sample_id = 0;
  std::string method;
  double score = 0.0;
  bool label = false;
};

/// CSV `sample_id,method,score,label`, rows sorted by sample_id, scores
/// printed with 17 significant digits.
void write_scores(std::vector<ScoreRow> rows, const std::filesystem::path& path);
std::vector<ScoreRow> read_scores(const std::filesystem::path& path);

nlohmann::json read_json_file(const std::filesystem::path& path);
void write_json_file(const nlohmann::json& j, const std::filesystem::path& path);
void write_text_file(const std::string& text, const std::filesystem::path& path);

}  // namespace trex
