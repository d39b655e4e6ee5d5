#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "trex/diffnum/graph.hpp"

namespace trex {

struct VitConfig {
  std::size_t patch_size = 8;
  std::size_t embed_dim = 64;
  std::size_t depth = 4;
  std::size_t n_heads = 4;
  double mlp_ratio = 4.0;
  std::size_t in_channels = 1;
  /// Length whose token grid the positional embeddings are learned on;
  /// other lengths get linearly interpolated embeddings.
  std::size_t canonical_length = 672;
  std::size_t head_hidden = 128;
  std::size_t head_bottleneck = 64;
  std::size_t out_dim = 256;  ///< K
  double ln_eps = 1e-6;
  /// Std of the class token and positional embeddings. Dense weights use
  /// 1/sqrt(fan_in); all draws are truncated at two standard deviations.
  double init_std = 0.02;
};

void validate(const VitConfig& config);
nlohmann::json to_json(const VitConfig& config);
VitConfig vit_config_from_json(const nlohmann::json& j);

/// Row i of the (n_out x n_in) matrix that linearly resamples a length-n_in
/// grid to n_out points (half-pixel centres, clamped at the ends).
std::vector<double> interpolation_matrix(std::size_t n_out, std::size_t n_in);

/// Patch-embedding transformer encoder with a projection head; the output
/// of `encode` is the representation g(x) of length K.
template <typename T>
class VisionTransformer1d {
 public:
  using Var = diffnum::Var<T>;
  using Graph = diffnum::Graph<T>;

  VisionTransformer1d(const VitConfig& config, std::uint64_t seed);

  const VitConfig& config() const noexcept { return config_; }

  /// Tokens produced for an input of `length` time steps.
  std::size_t patch_count(std::size_t length) const;

  /// Class token + patch tokens + (interpolated) positional embeddings:
  /// shape (patch_count + 1, embed_dim). `series` is (length x channels)
  /// row-major. Throws SeriesTooShort below one patch.
  Var patch_embed(Graph& g, std::span<const T> series) const;
  /// Final-norm class-token feature, (1, embed_dim).
  Var backbone(Graph& g, std::span<const T> series) const;
  /// Projection-head output, (1, K).
  Var encode(Graph& g, std::span<const T> series) const;

  std::vector<diffnum::Parameter<T>>& parameters() noexcept { return params_; }
  const std::vector<diffnum::Parameter<T>>& parameters() const noexcept { return params_; }
  std::vector<diffnum::Parameter<T>*> parameter_ptrs();

  std::size_t parameter_count() const;

 private:
  struct Block {
    std::size_t ln1_g, ln1_b, qkv_w, qkv_b, proj_w, proj_b, ln2_g, ln2_b, fc1_w, fc1_b, fc2_w, fc2_b;
  };

  std::size_t add(const std::string& name, diffnum::Shape shape, double std, double fill, std::uint64_t& stream);
  Var p(Graph& g, std::size_t index) const { return g.param(params_[index]); }
  Var linear(Graph& g, Var x, std::size_t w, std::size_t b) const;

  VitConfig config_;
  std::uint64_t seed_;
  std::vector<diffnum::Parameter<T>> params_;
  std::size_t patch_w_, patch_b_, cls_, pos_cls_, pos_patch_, norm_g_, norm_b_;
  std::size_t head_w1_, head_b1_, head_w2_, head_b2_, head_w3_, head_b3_, head_last_;
  std::vector<Block> blocks_;
};

}  // namespace trex
