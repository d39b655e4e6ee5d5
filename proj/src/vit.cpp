#include "trex/vit.hpp"

#include <cmath>
#include <random>

#include "trex/error.hpp"
#include "trex/rng.hpp"

namespace trex {

using diffnum::Parameter;
using diffnum::Shape;
using diffnum::Tensor;

void validate(const VitConfig& c) {
  const auto fail = [](const std::string& why) { throw Error(Errc::ConfigError, "vit: " + why); };
  if (c.patch_size == 0) fail("patch_size must be positive");
  if (c.embed_dim == 0 || c.n_heads == 0 || c.embed_dim % c.n_heads != 0) fail("embed_dim must be divisible by n_heads");
  if (c.depth == 0) fail("depth must be positive");
  if (c.out_dim < 2) fail("out_dim (K) must be at least 2");
  if (c.in_channels == 0) fail("in_channels must be positive");
  if (c.canonical_length < c.patch_size) fail("canonical_length shorter than one patch");
  if (!(c.mlp_ratio > 0.0)) fail("mlp_ratio must be positive");
  if (c.head_hidden == 0 || c.head_bottleneck == 0) fail("head sizes must be positive");
  if (!(c.ln_eps > 0.0)) fail("ln_eps must be positive");
}

nlohmann::json to_json(const VitConfig& c) {
  return {{"patch_size", c.patch_size},   {"embed_dim", c.embed_dim},
          {"depth", c.depth},             {"n_heads", c.n_heads},
          {"mlp_ratio", c.mlp_ratio},     {"in_channels", c.in_channels},
          {"canonical_length", c.canonical_length}, {"head_hidden", c.head_hidden},
          {"head_bottleneck", c.head_bottleneck},   {"out_dim", c.out_dim},
          {"ln_eps", c.ln_eps},           {"init_std", c.init_std}};
}

VitConfig vit_config_from_json(const nlohmann::json& j) {
  VitConfig c;
  c.patch_size = j.value("patch_size", c.patch_size);
  c.embed_dim = j.value("embed_dim", c.embed_dim);
  c.depth = j.value("depth", c.depth);
  c.n_heads = j.value("n_heads", c.n_heads);
  c.mlp_ratio = j.value("mlp_ratio", c.mlp_ratio);
  c.in_channels = j.value("in_channels", c.in_channels);
  c.canonical_length = j.value("canonical_length", c.canonical_length);
  c.head_hidden = j.value("head_hidden", c.head_hidden);
  c.head_bottleneck = j.value("head_bottleneck", c.head_bottleneck);
  c.out_dim = j.value("out_dim", c.out_dim);
  c.ln_eps = j.value("ln_eps", c.ln_eps);
  c.init_std = j.value("init_std", c.init_std);
  return c;
}

std::vector<double> interpolation_matrix(std::size_t n_out, std::size_t n_in) {
  std::vector<double> a(n_out * n_in, 0.0);
  for (std::size_t i = 0; i < n_out; ++i) {
    double src = (static_cast<double>(i) + 0.5) * static_cast<double>(n_in) / static_cast<double>(n_out) - 0.5;
    src = std::clamp(src, 0.0, static_cast<double>(n_in - 1));
    const auto lo = static_cast<std::size_t>(std::floor(src));
    const std::size_t hi = std::min(lo + 1, n_in - 1);
    const double frac = src - static_cast<double>(lo);
    a[i * n_in + lo] += 1.0 - frac;
    a[i * n_in + hi] += frac;
  }
  return a;
}

template <typename T>
std::size_t VisionTransformer1d<T>::add(const std::string& name, Shape shape, double std, double fill,
                                        std::uint64_t& stream) {
  Tensor<T> value(std::move(shape), static_cast<T>(fill));
  if (std > 0.0) {
    Rng rng(derive_seed(seed_, stream));
    std::normal_distribution<double> normal(0.0, std);
    for (auto& v : value.values()) {
      double x = normal(rng);
      while (std::abs(x) > 2.0 * std) x = normal(rng);  // truncated at two standard deviations
      v = static_cast<T>(x);
    }
  }
  ++stream;
  params_.push_back(Parameter<T>{name, std::move(value)});
  return params_.size() - 1;
}

template <typename T>
VisionTransformer1d<T>::VisionTransformer1d(const VitConfig& config, std::uint64_t seed) : config_(config), seed_(seed) {
  validate(config_);
  const std::size_t d = config_.embed_dim;
  const std::size_t hidden = static_cast<std::size_t>(std::llround(config_.mlp_ratio * static_cast<double>(d)));
  const double s = config_.init_std;
  const auto lecun = [](std::size_t fan_in) { return 1.0 / std::sqrt(static_cast<double>(fan_in)); };
  std::uint64_t stream = 0;

  const double patch_std = 1.0 / std::sqrt(static_cast<double>(config_.in_channels * config_.patch_size));
  patch_w_ = add("patch.w", {d, config_.in_channels, config_.patch_size}, patch_std, 0.0, stream);
  patch_b_ = add("patch.b", {1, d}, 0.0, 0.0, stream);
  cls_ = add("cls", {1, d}, s, 0.0, stream);
  pos_cls_ = add("pos.cls", {1, d}, s, 0.0, stream);
  pos_patch_ = add("pos.patch", {config_.canonical_length / config_.patch_size, d}, s, 0.0, stream);
  for (std::size_t b = 0; b < config_.depth; ++b) {
    const std::string pre = "blocks." + std::to_string(b) + ".";
    Block blk{};
    blk.ln1_g = add(pre + "ln1.g", {1, d}, 0.0, 1.0, stream);
    blk.ln1_b = add(pre + "ln1.b", {1, d}, 0.0, 0.0, stream);
    blk.qkv_w = add(pre + "attn.qkv.w", {d, 3 * d}, lecun(d), 0.0, stream);
    blk.qkv_b = add(pre + "attn.qkv.b", {1, 3 * d}, 0.0, 0.0, stream);
    blk.proj_w = add(pre + "attn.proj.w", {d, d}, lecun(d), 0.0, stream);
    blk.proj_b = add(pre + "attn.proj.b", {1, d}, 0.0, 0.0, stream);
    blk.ln2_g = add(pre + "ln2.g", {1, d}, 0.0, 1.0, stream);
    blk.ln2_b = add(pre + "ln2.b", {1, d}, 0.0, 0.0, stream);
    blk.fc1_w = add(pre + "mlp.fc1.w", {d, hidden}, lecun(d), 0.0, stream);
    blk.fc1_b = add(pre + "mlp.fc1.b", {1, hidden}, 0.0, 0.0, stream);
    blk.fc2_w = add(pre + "mlp.fc2.w", {hidden, d}, lecun(hidden), 0.0, stream);
    blk.fc2_b = add(pre + "mlp.fc2.b", {1, d}, 0.0, 0.0, stream);
    blocks_.push_back(blk);
  }
  norm_g_ = add("norm.g", {1, d}, 0.0, 1.0, stream);
  norm_b_ = add("norm.b", {1, d}, 0.0, 0.0, stream);
  head_w1_ = add("head.fc1.w", {d, config_.head_hidden}, lecun(d), 0.0, stream);
  head_b1_ = add("head.fc1.b", {1, config_.head_hidden}, 0.0, 0.0, stream);
  head_w2_ = add("head.fc2.w", {config_.head_hidden, config_.head_hidden}, lecun(config_.head_hidden), 0.0, stream);
  head_b2_ = add("head.fc2.b", {1, config_.head_hidden}, 0.0, 0.0, stream);
  head_w3_ = add("head.fc3.w", {config_.head_hidden, config_.head_bottleneck}, lecun(config_.head_hidden), 0.0, stream);
  head_b3_ = add("head.fc3.b", {1, config_.head_bottleneck}, 0.0, 0.0, stream);
  head_last_ = add("head.last.w", {config_.head_bottleneck, config_.out_dim}, lecun(config_.head_bottleneck), 0.0, stream);
}

template <typename T>
std::size_t VisionTransformer1d<T>::patch_count(std::size_t length) const {
  return length / config_.patch_size;
}

template <typename T>
std::vector<Parameter<T>*> VisionTransformer1d<T>::parameter_ptrs() {
  std::vector<Parameter<T>*> out;
  out.reserve(params_.size());
  for (auto& p : params_) out.push_back(&p);
  return out;
}

template <typename T>
std::size_t VisionTransformer1d<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

template <typename T>
typename VisionTransformer1d<T>::Var VisionTransformer1d<T>::linear(Graph& g, Var x, std::size_t w, std::size_t b) const {
  return diffnum::add_row(diffnum::matmul(x, p(g, w)), p(g, b));
}

template <typename T>
typename VisionTransformer1d<T>::Var VisionTransformer1d<T>::patch_embed(Graph& g, std::span<const T> series) const {
  const std::size_t channels = config_.in_channels;
  if (series.size() % channels != 0) throw Error(Errc::ShapeMismatch, "series length is not a multiple of in_channels");
  const std::size_t length = series.size() / channels;
  const std::size_t n = patch_count(length);
  if (n == 0) {
    throw Error(Errc::SeriesTooShort, "series of length " + std::to_string(length) + " is shorter than one patch (" +
                                          std::to_string(config_.patch_size) + ")");
  }
  const std::size_t used = n * config_.patch_size;
  Tensor<T> x(Shape{used, channels}, std::vector<T>(series.begin(), series.begin() + static_cast<std::ptrdiff_t>(used * channels)));
  Var tokens = diffnum::add_row(diffnum::conv1d(g.constant(std::move(x)), p(g, patch_w_), config_.patch_size), p(g, patch_b_));
  Var seq = diffnum::concat<T>({p(g, cls_), tokens}, 0);

  const std::size_t canonical = config_.canonical_length / config_.patch_size;
  Var pos = p(g, pos_patch_);
  if (n != canonical) {
    const auto a = interpolation_matrix(n, canonical);
    pos = diffnum::matmul(g.constant(Tensor<T>(Shape{n, canonical}, std::vector<T>(a.begin(), a.end()))), pos);
  }
  return diffnum::add(seq, diffnum::concat<T>({p(g, pos_cls_), pos}, 0));
}

template <typename T>
typename VisionTransformer1d<T>::Var VisionTransformer1d<T>::backbone(Graph& g, std::span<const T> series) const {
  const std::size_t d = config_.embed_dim;
  const std::size_t heads = config_.n_heads;
  const std::size_t dh = d / heads;
  const T eps = static_cast<T>(config_.ln_eps);
  const T att_scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));

  Var x = patch_embed(g, series);
  for (const Block& blk : blocks_) {
    Var h = diffnum::layer_norm(x, p(g, blk.ln1_g), p(g, blk.ln1_b), eps);
    Var qkv = linear(g, h, blk.qkv_w, blk.qkv_b);
    std::vector<Var> outs;
    outs.reserve(heads);
    for (std::size_t hd = 0; hd < heads; ++hd) {
      Var q = diffnum::slice(qkv, 1, hd * dh, (hd + 1) * dh);
      Var k = diffnum::slice(qkv, 1, d + hd * dh, d + (hd + 1) * dh);
      Var v = diffnum::slice(qkv, 1, 2 * d + hd * dh, 2 * d + (hd + 1) * dh);
      Var att = diffnum::softmax(diffnum::scale(diffnum::matmul_nt(q, k), att_scale), 1);
      outs.push_back(diffnum::matmul(att, v));
    }
    Var merged = heads == 1 ? outs.front() : diffnum::concat(outs, 1);
    x = diffnum::add(x, linear(g, merged, blk.proj_w, blk.proj_b));
    Var m = diffnum::layer_norm(x, p(g, blk.ln2_g), p(g, blk.ln2_b), eps);
    m = linear(g, diffnum::gelu(linear(g, m, blk.fc1_w, blk.fc1_b)), blk.fc2_w, blk.fc2_b);
    x = diffnum::add(x, m);
  }
  x = diffnum::layer_norm(x, p(g, norm_g_), p(g, norm_b_), eps);
  return diffnum::slice(x, 0, 0, 1);
}

template <typename T>
typename VisionTransformer1d<T>::Var VisionTransformer1d<T>::encode(Graph& g, std::span<const T> series) const {
  Var h = backbone(g, series);
  h = diffnum::gelu(linear(g, h, head_w1_, head_b1_));
  h = diffnum::gelu(linear(g, h, head_w2_, head_b2_));
  h = linear(g, h, head_w3_, head_b3_);
  h = diffnum::l2_normalize(h, static_cast<T>(1e-12));
  return diffnum::matmul(h, p(g, head_last_));
}

template class VisionTransformer1d<float>;
template class VisionTransformer1d<double>;

}  // namespace trex
