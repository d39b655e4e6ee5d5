// Command-line front end: gen, train, score, eval, pipeline.

#include <omp.h>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "trex/commands.hpp"
#include "trex/config.hpp"
#include "trex/error.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitNumeric = 4;

int exit_code(trex::Errc code) {
  using trex::Errc;
  switch (code) {
    case Errc::IoError:
    case Errc::MissingCheckpoint:
      return kExitIo;
    case Errc::ConfigError:
    case Errc::InvalidParamSet:
    case Errc::SeedCollision:
    case Errc::SampleSetMismatch:
    case Errc::OutOfRange:
    case Errc::CropTooShort:
    case Errc::WidthTooLarge:
    case Errc::SeriesTooShort:
    case Errc::SegmentTooShort:
    case Errc::NoPositives:
    case Errc::NoNegatives:
      return kExitConfig;
    default:
      return kExitNumeric;
  }
}

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> dataset;
  std::optional<std::size_t> n_samples;
  std::optional<double> positive_fraction;
  std::optional<int> threads;
  std::string method;
  std::string checkpoint;
  std::vector<std::string> score_files;
};

trex::ExperimentConfig resolve(const Options& o) {
  trex::ExperimentConfig c = o.config.empty() ? trex::ExperimentConfig{} : trex::load_config(o.config);
  if (o.seed) trex::set_all_seeds(c, *o.seed);
  if (o.out) c.out_dir = *o.out;
  if (o.dataset) c.dataset = *o.dataset;
  if (o.n_samples) c.generator.n_samples = *o.n_samples;
  if (o.positive_fraction) c.generator.positive_fraction = *o.positive_fraction;
  if (o.threads) c.threads = *o.threads;
  trex::validate(c);
  if (c.threads > 0) omp_set_num_threads(c.threads);
  return c;
}

void add_common(CLI::App* cmd, Options& o) {
  cmd->add_option("--config", o.config, "JSON experiment config; flags override its values");
  cmd->add_option("--seed", o.seed, "Set every seed (generator, split, models)");
  cmd->add_option("--out", o.out, "Output directory");
  cmd->add_option("--dataset", o.dataset, "Dataset NDJSON path (default <out>/dataset.ndjson)");
  cmd->add_option("--threads", o.threads, "OpenMP threads (0: runtime default)")->check(CLI::NonNegativeNumber);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Change-point detection toolkit for telemetry timeseries"};
  app.require_subcommand(1);
  Options o;

  auto* gen = app.add_subcommand("gen", "Generate a labeled synthetic dataset");
  add_common(gen, o);
  gen->add_option("--n-samples", o.n_samples, "Number of samples");
  gen->add_option("--positive-fraction", o.positive_fraction, "Share of samples with a change point");

  auto* train = app.add_subcommand("train", "Train a learned detector on the train half");
  add_common(train, o);
  train->add_option("--method", o.method, "trexdino or tire")->required();

  auto* score = app.add_subcommand("score", "Score the test half with one detector");
  add_common(score, o);
  score->add_option("--method", o.method, "binseg, tire or trexdino")->required();
  score->add_option("--checkpoint", o.checkpoint, "Checkpoint for learned methods");

  auto* eval = app.add_subcommand("eval", "Threshold sweep, report and curves from score files");
  add_common(eval, o);
  eval->add_option("scores", o.score_files, "Score CSV files")->required();

  auto* pipeline = app.add_subcommand("pipeline", "gen, train, score and eval in one run");
  add_common(pipeline, o);
  pipeline->add_option("--n-samples", o.n_samples, "Number of samples");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    const auto config = resolve(o);
    if (gen->parsed()) {
      trex::cmd_gen(config, std::cout);
    } else if (train->parsed()) {
      trex::cmd_train(o.method, config, std::cout);
    } else if (score->parsed()) {
      trex::cmd_score(o.method, config, o.checkpoint, std::cout);
    } else if (eval->parsed()) {
      std::vector<std::filesystem::path> files(o.score_files.begin(), o.score_files.end());
      trex::cmd_eval(files, config, std::cout);
    } else if (pipeline->parsed()) {
      trex::cmd_pipeline(config, std::cout);
    }
  } catch (const trex::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  }
  return 0;
}
