#include "trex/commands.hpp"

#include <chrono>
#include <cstdio>
#include <exception>
#include <map>
#include <ostream>
#include <set>

#include "trex/binseg.hpp"
#include "trex/dino.hpp"
#include "trex/error.hpp"
#include "trex/eval.hpp"
#include "trex/tire.hpp"

namespace trex {

namespace fs = std::filesystem;

namespace {

const std::set<std::string> kLearned = {"trexdino", "tire"};
const std::set<std::string> kMethods = {"binseg", "tire", "trexdino"};

void require_method(const std::string& method, const std::set<std::string>& allowed) {
  if (!allowed.count(method)) {
    std::string list;
    for (const auto& m : allowed) list += (list.empty() ? "" : ", ") + m;
    throw Error(Errc::ConfigError, "unknown method '" + method + "' (expected one of: " + list + ")");
  }
}

template <typename Fn>
std::vector<double> parallel_scores(const std::vector<std::size_t>& ids, Fn&& score) {
  std::vector<double> out(ids.size());
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 4)
  for (std::size_t i = 0; i < ids.size(); ++i) {
    try {
      out[i] = score(ids[i]);
    } catch (...) {
#pragma omp critical(trex_score_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

std::vector<Sample> load_dataset_checked(const fs::path& path) {
  if (!fs::exists(path)) throw Error(Errc::IoError, "dataset not found: " + path.string());
  return read_dataset(path);
}

std::string seconds_since(std::chrono::steady_clock::time_point t0) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1fs",
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  return buf;
}

}  // namespace

std::vector<double> score_binseg(const std::vector<Sample>& samples, const std::vector<std::size_t>& ids,
                                 const DetectorConfig& detector) {
  return parallel_scores(ids, [&](std::size_t id) {
    return best_split_gain(samples.at(id).series.values, detector.min_segment).gain;
  });
}

std::vector<double> score_embedding(const std::vector<Sample>& samples, const std::vector<std::size_t>& ids,
                                    const Embedder& embed, const DetectorConfig& detector) {
  return parallel_scores(ids, [&](std::size_t id) {
    return embedding_score(samples.at(id).series.values, embed, detector);
  });
}

SplitManifest load_or_make_split(const fs::path& dataset, std::uint64_t seed) {
  const std::string hash = file_hash(dataset);
  const fs::path path = split_path_for(dataset);
  if (fs::exists(path)) {
    auto split = split_from_json(read_json_file(path));
    if (split.seed == seed && split.dataset_hash == hash) {
      validate(split);
      return split;
    }
  }
  const auto n = read_dataset(dataset).size();
  auto split = make_split(n, seed, hash);
  write_json_file(to_json(split), path);
  return split;
}

void cmd_gen(const ExperimentConfig& config, std::ostream& log) {
  validate(config.generator);
  const auto t0 = std::chrono::steady_clock::now();
  const auto samples = gen_dataset(config.generator);
  const fs::path path = config.dataset_path();
  write_dataset(samples, path);

  std::size_t pos = 0;
  std::map<std::string, std::size_t> tiers;
  for (const auto& s : samples) {
    pos += s.label ? 1 : 0;
    ++tiers[std::string(to_string(s.tier))];
  }
  const double frac = samples.empty() ? 0.0 : static_cast<double>(pos) / static_cast<double>(samples.size());
  nlohmann::json manifest = {{"generator", to_json(config.generator)},
                             {"n_samples", samples.size()},
                             {"n_positive", pos},
                             {"n_negative", samples.size() - pos},
                             {"positive_fraction", frac},
                             {"tiers", tiers},
                             {"dataset_hash", file_hash(path)}};
  write_json_file(manifest, manifest_path_for(path));

  char buf[160];
  std::snprintf(buf, sizeof buf, "samples %zu  positive %zu  negative %zu  positive fraction %.3f\n", samples.size(),
                pos, samples.size() - pos, frac);
  log << "wrote " << path.string() << " (" << seconds_since(t0) << ")\n" << buf;
  log << "tiers:";
  for (const auto& [tier, count] : tiers) log << ' ' << tier << '=' << count;
  log << '\n';
}

fs::path cmd_train(const std::string& method, const ExperimentConfig& config, std::ostream& log) {
  require_method(method, kLearned);
  validate(config);
  const fs::path dataset = config.dataset_path();
  const auto samples = load_dataset_checked(dataset);
  const auto split = load_or_make_split(dataset, config.split_seed);
  std::vector<std::vector<double>> train;
  train.reserve(split.train.size());
  for (const std::size_t id : split.train) train.push_back(samples.at(id).series.values);

  const fs::path ckpt = fs::path(config.out_dir) / (method + ".ckpt");
  nlohmann::json manifest = {{"method", method},
                             {"dataset_hash", split.dataset_hash},
                             {"split_seed", split.seed},
                             {"train_hash", split.train_hash}};
  const auto t0 = std::chrono::steady_clock::now();
  log << "training " << method << " on " << train.size() << " samples\n";
  if (method == "trexdino") {
    DinoTrainLog train_log;
    const auto state = train_dino(train, config.vit, config.dino, config.dino_train, &train_log,
                                  [&](const DinoEpochLog& e) {
                                    char buf[128];
                                    std::snprintf(buf, sizeof buf, "  epoch %zu  loss %.4f  teacher entropy %.4f\n",
                                                  e.epoch, e.mean_loss, e.mean_teacher_entropy);
                                    log << buf << std::flush;
                                  });
    save_model_state(state, ckpt);
    manifest["vit"] = to_json(config.vit);
    manifest["dino"] = to_json(config.dino);
    manifest["dino_train"] = to_json(config.dino_train);
    write_json_file(to_json(train_log), fs::path(ckpt.string() + ".log.json"));
  } else {
    TireTrainLog train_log;
    const auto model = train_tire(train, config.tire, &train_log);
    for (const auto& e : train_log.epochs) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "  epoch %zu  loss %.5f  reconstruction %.5f  similarity %.5f\n", e.epoch,
                    e.mean_loss, e.mean_reconstruction, e.mean_similarity);
      log << buf;
    }
    save_tire_model(model, ckpt);
    manifest["tire"] = to_json(config.tire);
    write_json_file(to_json(train_log), fs::path(ckpt.string() + ".log.json"));
  }
  write_json_file(manifest, fs::path(ckpt.string() + ".json"));
  log << "wrote " << ckpt.string() << " (" << seconds_since(t0) << ")\n";
  return ckpt;
}

fs::path cmd_score(const std::string& method, const ExperimentConfig& config, const fs::path& checkpoint,
                   std::ostream& log) {
  require_method(method, kMethods);
  validate(config);
  const fs::path dataset = config.dataset_path();
  const auto samples = load_dataset_checked(dataset);
  const auto split = load_or_make_split(dataset, config.split_seed);
  const auto t0 = std::chrono::steady_clock::now();

  std::vector<double> scores;
  if (method == "binseg") {
    scores = score_binseg(samples, split.test, config.detector);
  } else {
    if (checkpoint.empty() || !fs::exists(checkpoint)) {
      throw Error(Errc::MissingCheckpoint, method + " scoring needs a checkpoint" +
                                               (checkpoint.empty() ? std::string() : ": " + checkpoint.string() +
                                                                                         " not found"));
    }
    const fs::path manifest_path = checkpoint.string() + ".json";
    if (!fs::exists(manifest_path)) throw Error(Errc::MissingCheckpoint, "missing manifest " + manifest_path.string());
    const auto manifest = read_json_file(manifest_path);
    if (manifest.value("method", std::string()) != method) {
      throw Error(Errc::ConfigError, checkpoint.string() + " is not a " + method + " checkpoint");
    }
    if (manifest.value("train_hash", std::string()) != split.train_hash) {
      throw Error(Errc::ConfigError, "checkpoint was trained on a different split than " +
                                         split_path_for(dataset).string());
    }
    if (method == "trexdino") {
      const auto vit = vit_config_from_json(manifest.at("vit"));
      const auto state = load_model_state(vit, checkpoint);
      scores = score_embedding(
          samples, split.test, [&](std::span<const double> w) { return embed_window(state, w); }, config.detector);
    } else {
      const auto tire = tire_config_from_json(manifest.at("tire"));
      const auto model = load_tire_model(tire, checkpoint);
      scores = score_embedding(
          samples, split.test, [&](std::span<const double> w) { return tire_embed(model, w); }, config.detector);
    }
  }

  std::vector<ScoreRow> rows;
  rows.reserve(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    rows.push_back({split.test[i], method, scores[i], samples[split.test[i]].label});
  }
  const fs::path out = fs::path(config.out_dir) / ("scores_" + method + ".csv");
  write_scores(std::move(rows), out);
  log << "scored " << scores.size() << " test samples with " << method << " -> " << out.string() << " ("
      << seconds_since(t0) << ")\n";
  return out;
}

void cmd_eval(const std::vector<fs::path>& score_files, const ExperimentConfig& config, std::ostream& log) {
  if (score_files.empty()) throw Error(Errc::ConfigError, "eval needs at least one score file");
  std::map<std::string, std::map<std::size_t, ScoreRow>> by_method;
  std::vector<std::string> order;
  for (const auto& f : score_files) {
    for (auto& r : read_scores(f)) {
      if (!by_method.count(r.method)) order.push_back(r.method);
      auto& rows = by_method[r.method];
      if (!rows.emplace(r.sample_id, r).second) {
        throw Error(Errc::SampleSetMismatch, "sample " + std::to_string(r.sample_id) + " appears twice for " + r.method);
      }
    }
  }
  const auto& reference = by_method.at(order.front());
  for (const auto& m : order) {
    const auto& rows = by_method.at(m);
    bool same = rows.size() == reference.size();
    for (auto a = rows.begin(), b = reference.begin(); same && a != rows.end(); ++a, ++b) {
      same = a->first == b->first && a->second.label == b->second.label;
    }
    if (!same) {
      throw Error(Errc::SampleSetMismatch, "score files for " + order.front() + " and " + m +
                                               " cover different samples or labels");
    }
  }

  std::vector<MethodResult> results;
  const fs::path out = config.out_dir;
  for (const auto& m : order) {
    std::vector<double> scores;
    std::vector<bool> labels;
    for (const auto& [id, row] : by_method.at(m)) {
      scores.push_back(row.score);
      labels.push_back(row.label);
    }
    results.push_back({m, sweep(scores, labels, config.n_thresholds)});
    write_curve_csv(results.back().sweep, out / "curves" / (m + ".csv"));
  }
  const std::string report = render_report(results);
  write_text_file(report, out / "report.txt");
  write_json_file(summary_json(results), out / "summary.json");
  log << report;
}

void cmd_pipeline(const ExperimentConfig& config, std::ostream& log) {
  validate(config);
  cmd_gen(config, log);
  const auto dino_ckpt = cmd_train("trexdino", config, log);
  const auto tire_ckpt = cmd_train("tire", config, log);
  std::vector<fs::path> files;
  files.push_back(cmd_score("binseg", config, {}, log));
  files.push_back(cmd_score("tire", config, tire_ckpt, log));
  files.push_back(cmd_score("trexdino", config, dino_ckpt, log));
  cmd_eval(files, config, log);
}

}  // namespace trex
