#include "trex/dataset_io.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <numeric>
#include <set>
#include <sstream>

#include "trex/error.hpp"
#include "trex/rng.hpp"

namespace trex {

namespace fs = std::filesystem;

namespace {

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  return out;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot read " + path.string());
  return in;
}

std::string hex64(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace

void write_dataset(const std::vector<Sample>& samples, const fs::path& path) {
  auto out = open_out(path);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    nlohmann::json j = to_json(samples[i]);
    j["sample_id"] = i;
    out << j.dump() << '\n';
  }
  if (!out) throw Error(Errc::IoError, "failed writing " + path.string());
}

std::vector<Sample> read_dataset(const fs::path& path) {
  auto in = open_in(path);
  std::vector<Sample> samples;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      if (j.contains("sample_id") && j.at("sample_id").get<std::size_t>() != samples.size()) {
        throw Error(Errc::IoError, "sample_id " + j.at("sample_id").dump() + " out of order");
      }
      samples.push_back(sample_from_json(j));
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::IoError, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return samples;
}

std::string file_hash(const fs::path& path) {
  auto in = open_in(path);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  return hex64(h);
}

std::string ids_hash(const std::vector<std::size_t>& ids) {
  std::string joined;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) joined += ',';
    joined += std::to_string(ids[i]);
  }
  return hex64(hash_string(joined));
}

SplitManifest make_split(std::size_t n_samples, std::uint64_t seed, std::string dataset_hash) {
  std::vector<std::size_t> ids(n_samples);
  std::iota(ids.begin(), ids.end(), std::size_t{0});
  Rng rng(derive_seed(seed, hash_string("split")));
  std::shuffle(ids.begin(), ids.end(), rng);
  SplitManifest s;
  s.seed = seed;
  s.n_samples = n_samples;
  s.dataset_hash = std::move(dataset_hash);
  const auto half = static_cast<std::ptrdiff_t>(n_samples / 2);
  s.train.assign(ids.begin(), ids.begin() + half);
  s.test.assign(ids.begin() + half, ids.end());
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.test.begin(), s.test.end());
  s.train_hash = ids_hash(s.train);
  s.test_hash = ids_hash(s.test);
  return s;
}

nlohmann::json to_json(const SplitManifest& s) {
  return {{"seed", s.seed},           {"n_samples", s.n_samples}, {"dataset_hash", s.dataset_hash},
          {"train_hash", s.train_hash}, {"test_hash", s.test_hash}, {"train", s.train},
          {"test", s.test}};
}

SplitManifest split_from_json(const nlohmann::json& j) {
  SplitManifest s;
  s.seed = j.at("seed").get<std::uint64_t>();
  s.n_samples = j.at("n_samples").get<std::size_t>();
  s.dataset_hash = j.at("dataset_hash").get<std::string>();
  s.train = j.at("train").get<std::vector<std::size_t>>();
  s.test = j.at("test").get<std::vector<std::size_t>>();
  s.train_hash = j.at("train_hash").get<std::string>();
  s.test_hash = j.at("test_hash").get<std::string>();
  return s;
}

void validate(const SplitManifest& s) {
  std::vector<bool> seen(s.n_samples, false);
  for (const auto* list : {&s.train, &s.test}) {
    for (const std::size_t id : *list) {
      if (id >= s.n_samples || seen[id]) throw Error(Errc::ConfigError, "split lists overlap or hold invalid ids");
      seen[id] = true;
    }
  }
  if (std::find(seen.begin(), seen.end(), false) != seen.end()) {
    throw Error(Errc::ConfigError, "split does not cover every sample");
  }
  if (ids_hash(s.train) != s.train_hash || ids_hash(s.test) != s.test_hash) {
    throw Error(Errc::ConfigError, "split manifest hashes do not match its id lists");
  }
}

fs::path split_path_for(const fs::path& dataset) { return fs::path(dataset.string() + ".split.json"); }
fs::path manifest_path_for(const fs::path& dataset) { return fs::path(dataset.string() + ".manifest.json"); }

void write_scores(std::vector<ScoreRow> rows, const fs::path& path) {
  std::sort(rows.begin(), rows.end(), [](const ScoreRow& a, const ScoreRow& b) {
    return a.sample_id != b.sample_id ? a.sample_id < b.sample_id : a.method < b.method;
  });
  auto out = open_out(path);
  out << "sample_id,method,score,label\n";
  char buf[64];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.17g", r.score);
    out << r.sample_id << ',' << r.method << ',' << buf << ',' << (r.label ? 1 : 0) << '\n';
  }
  if (!out) throw Error(Errc::IoError, "failed writing " + path.string());
}

std::vector<ScoreRow> read_scores(const fs::path& path) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line) || line != "sample_id,method,score,label") {
    throw Error(Errc::IoError, path.string() + ": missing header 'sample_id,method,score,label'");
  }
  std::vector<ScoreRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    if (fields.size() != 4) throw Error(Errc::IoError, path.string() + ":" + std::to_string(lineno) + ": expected 4 fields");
    try {
      ScoreRow r;
      r.sample_id = std::stoull(fields[0]);
      r.method = fields[1];
      r.score = std::stod(fields[2]);
      if (fields[3] != "0" && fields[3] != "1") throw std::invalid_argument("label");
      r.label = fields[3] == "1";
      rows.push_back(std::move(r));
    } catch (const std::logic_error&) {
      throw Error(Errc::IoError, path.string() + ":" + std::to_string(lineno) + ": malformed row");
    }
  }
  return rows;
}

nlohmann::json read_json_file(const fs::path& path) {
  auto in = open_in(path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::IoError, path.string() + ": " + e.what());
  }
}

void write_json_file(const nlohmann::json& j, const fs::path& path) { write_text_file(j.dump(2) + "\n", path); }

void write_text_file(const std::string& text, const fs::path& path) {
  auto out = open_out(path);
  out << text;
  if (!out) throw Error(Errc::IoError, "failed writing " + path.string());
}

}  // namespace trex
