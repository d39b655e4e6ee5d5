#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "trex/diffnum/tensor.hpp"

namespace trex {

enum class TireDomain { Time, Frequency };

std::string to_string(TireDomain d);
TireDomain tire_domain_from_string(const std::string& s);

struct TireConfig {
  std::size_t window_size = 168;  ///< N
  std::size_t n_parallel = 3;     ///< autoencoders per domain
  std::size_t ti_features = 2;
  std::size_t inst_features = 1;
  std::size_t hidden_dim = 32;
  double lambda = 1.0;  ///< weight of the time-invariance term
  std::vector<TireDomain> domains{TireDomain::Time, TireDomain::Frequency};
  // training
  std::size_t epochs = 20;
  std::size_t batch_size = 64;
  double lr = 1e-3;
  /// Consecutive window pairs drawn from each training sample per epoch.
  std::size_t pairs_per_sample = 8;
  std::uint64_t seed = 0;

  std::size_t code_dim() const noexcept { return ti_features + inst_features; }
  /// Input length of one domain's autoencoders.
  std::size_t input_dim(TireDomain d) const noexcept {
    return d == TireDomain::Time ? window_size : window_size / 2 + 1;
  }
  std::size_t embedding_dim() const noexcept { return domains.size() * n_parallel * ti_features; }
};

void validate(const TireConfig& config);
nlohmann::json to_json(const TireConfig& config);
TireConfig tire_config_from_json(const nlohmann::json& j);

/// |X_k| for k = 0..floor(N/2) of the unnormalized DFT X_k = sum_n x_n e^{-2 pi i k n / N}.
std::vector<double> dft_magnitude(std::span<const double> window);

/// One single-hidden-layer tanh autoencoder. The first `ti_features` code
/// units are the time-invariant part.
struct TireAutoencoder {
  diffnum::Tensor<float> enc_w1, enc_b1, enc_w2, enc_b2;
  diffnum::Tensor<float> dec_w1, dec_b1, dec_w2, dec_b2;
};

struct TireModel {
  TireConfig config;
  /// domains.size() * n_parallel autoencoders, domain-major.
  std::vector<TireAutoencoder> autoencoders;
};

struct TireEpochLog {
  std::size_t epoch = 0;
  double mean_loss = 0.0;
  double mean_reconstruction = 0.0;
  double mean_similarity = 0.0;
};

struct TireTrainLog {
  std::vector<TireEpochLog> epochs;  ///< averaged over the autoencoders
};

nlohmann::json to_json(const TireTrainLog& log);

/// Domain input for a window: the window itself, or its DFT magnitudes
/// scaled by 1/sqrt(N).
std::vector<float> tire_input(std::span<const double> window, TireDomain domain);

/// Trains every autoencoder on stride-1 consecutive window pairs drawn from
/// the (preprocessed) samples. Loss per pair: reconstruction MSE of both
/// windows + lambda * ||s_t^TI - s_{t-1}^TI||^2. Deterministic for a seed.
TireModel train_tire(std::span<const std::vector<double>> samples, const TireConfig& config,
                     TireTrainLog* log = nullptr);

/// Encoder code (ti + inst features) of one autoencoder for a domain input.
std::vector<float> tire_encode(const TireAutoencoder& ae, std::span<const float> input);

/// Concatenated time-invariant features over domains and autoencoders.
std::vector<double> tire_embed(const TireModel& model, std::span<const double> window);

void save_tire_model(const TireModel& model, const std::filesystem::path& path);
TireModel load_tire_model(const TireConfig& config, const std::filesystem::path& path);

}  // namespace trex
