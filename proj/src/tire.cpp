#include "trex/tire.hpp"

#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include "trex/diffnum/checkpoint.hpp"
#include "trex/diffnum/graph.hpp"
#include "trex/diffnum/optim.hpp"
#include "trex/error.hpp"
#include "trex/rng.hpp"

namespace trex {

using diffnum::Graph;
using diffnum::Parameter;
using diffnum::Shape;
using diffnum::Tensor;
using diffnum::Var;

std::string to_string(TireDomain d) { return d == TireDomain::Time ? "time" : "frequency"; }

TireDomain tire_domain_from_string(const std::string& s) {
  if (s == "time") return TireDomain::Time;
  if (s == "frequency") return TireDomain::Frequency;
  throw Error(Errc::ConfigError, "unknown tire domain '" + s + "' (expected time or frequency)");
}

void validate(const TireConfig& c) {
  const auto fail = [](const std::string& why) { throw Error(Errc::ConfigError, "tire: " + why); };
  if (c.window_size < 4) fail("window_size must be at least 4");
  if (c.ti_features < 1 || c.inst_features < 1) fail("feature counts must be at least 1");
  if (c.n_parallel < 1) fail("n_parallel must be at least 1");
  if (c.hidden_dim < 1) fail("hidden_dim must be at least 1");
  if (c.domains.empty()) fail("at least one domain is required");
  if (!(c.lambda >= 0.0)) fail("lambda must be non-negative");
  if (c.batch_size == 0) fail("batch_size must be positive");
  if (c.pairs_per_sample == 0) fail("pairs_per_sample must be positive");
  if (!(c.lr > 0.0)) fail("lr must be positive");
}

nlohmann::json to_json(const TireConfig& c) {
  nlohmann::json domains = nlohmann::json::array();
  for (const auto d : c.domains) domains.push_back(to_string(d));
  return {{"window_size", c.window_size}, {"n_parallel", c.n_parallel},   {"ti_features", c.ti_features},
          {"inst_features", c.inst_features}, {"hidden_dim", c.hidden_dim}, {"lambda", c.lambda},
          {"domains", domains},           {"epochs", c.epochs},           {"batch_size", c.batch_size},
          {"lr", c.lr},                   {"pairs_per_sample", c.pairs_per_sample}, {"seed", c.seed}};
}

TireConfig tire_config_from_json(const nlohmann::json& j) {
  TireConfig c;
  c.window_size = j.value("window_size", c.window_size);
  c.n_parallel = j.value("n_parallel", c.n_parallel);
  c.ti_features = j.value("ti_features", c.ti_features);
  c.inst_features = j.value("inst_features", c.inst_features);
  c.hidden_dim = j.value("hidden_dim", c.hidden_dim);
  c.lambda = j.value("lambda", c.lambda);
  if (j.contains("domains")) {
    c.domains.clear();
    for (const auto& d : j.at("domains")) c.domains.push_back(tire_domain_from_string(d.get<std::string>()));
  }
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.lr = j.value("lr", c.lr);
  c.pairs_per_sample = j.value("pairs_per_sample", c.pairs_per_sample);
  c.seed = j.value("seed", c.seed);
  return c;
}

std::vector<double> dft_magnitude(std::span<const double> window) {
  const std::size_t n = window.size();
  std::vector<double> out(n / 2 + 1, 0.0);
  // Twiddles by table lookup on (k*j mod n) keeps the O(N^2) sum exact-ish and cheap.
  std::vector<std::complex<double>> twiddle(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double angle = -2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(n);
    twiddle[j] = {std::cos(angle), std::sin(angle)};
  }
  for (std::size_t k = 0; k < out.size(); ++k) {
    std::complex<double> acc{0.0, 0.0};
    for (std::size_t j = 0; j < n; ++j) acc += window[j] * twiddle[(k * j) % n];
    out[k] = std::abs(acc);
  }
  return out;
}

std::vector<float> tire_input(std::span<const double> window, TireDomain domain) {
  if (domain == TireDomain::Time) return std::vector<float>(window.begin(), window.end());
  const auto mag = dft_magnitude(window);
  const double s = 1.0 / std::sqrt(static_cast<double>(window.size()));
  std::vector<float> out(mag.size());
  for (std::size_t i = 0; i < mag.size(); ++i) out[i] = static_cast<float>(mag[i] * s);
  return out;
}

namespace {

enum ParamIndex { kEncW1, kEncB1, kEncW2, kEncB2, kDecW1, kDecB1, kDecW2, kDecB2, kParamCount };
constexpr const char* kParamNames[kParamCount] = {"enc_w1", "enc_b1", "enc_w2", "enc_b2",
                                                  "dec_w1", "dec_b1", "dec_w2", "dec_b2"};

std::vector<Parameter<float>> init_params(std::size_t in, std::size_t hidden, std::size_t code, std::uint64_t seed) {
  Rng rng(seed);
  const auto dense = [&](const char* name, std::size_t fan_in, std::size_t fan_out) {
    Parameter<float> p{name, Tensor<float>(Shape{fan_in, fan_out})};
    std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(fan_in)));
    for (auto& v : p.value.values()) v = static_cast<float>(normal(rng));
    return p;
  };
  const auto bias = [](const char* name, std::size_t n) { return Parameter<float>{name, Tensor<float>(Shape{1, n})}; };
  std::vector<Parameter<float>> p;
  p.push_back(dense(kParamNames[kEncW1], in, hidden));
  p.push_back(bias(kParamNames[kEncB1], hidden));
  p.push_back(dense(kParamNames[kEncW2], hidden, code));
  p.push_back(bias(kParamNames[kEncB2], code));
  p.push_back(dense(kParamNames[kDecW1], code, hidden));
  p.push_back(bias(kParamNames[kDecB1], hidden));
  p.push_back(dense(kParamNames[kDecW2], hidden, in));
  p.push_back(bias(kParamNames[kDecB2], in));
  return p;
}

TireAutoencoder to_autoencoder(std::vector<Parameter<float>>& p) {
  return {std::move(p[kEncW1].value), std::move(p[kEncB1].value), std::move(p[kEncW2].value),
          std::move(p[kEncB2].value), std::move(p[kDecW1].value), std::move(p[kDecB1].value),
          std::move(p[kDecW2].value), std::move(p[kDecB2].value)};
}

std::vector<const Tensor<float>*> tensors_of(const TireAutoencoder& ae) {
  return {&ae.enc_w1, &ae.enc_b1, &ae.enc_w2, &ae.enc_b2, &ae.dec_w1, &ae.dec_b1, &ae.dec_w2, &ae.dec_b2};
}

std::vector<Tensor<float>*> tensors_of(TireAutoencoder& ae) {
  return {&ae.enc_w1, &ae.enc_b1, &ae.enc_w2, &ae.enc_b2, &ae.dec_w1, &ae.dec_b1, &ae.dec_w2, &ae.dec_b2};
}

struct Losses {
  Var<float> total;
  double reconstruction = 0.0;
  double similarity = 0.0;
};

Losses pair_loss(Graph<float>& g, const std::vector<Parameter<float>>& p, const Tensor<float>& a,
                 const Tensor<float>& b, std::size_t ti, float lambda) {
  using namespace diffnum;
  const auto encode = [&](Var<float> x) {
    auto h = tanh(add_row(matmul(x, g.param(p[kEncW1])), g.param(p[kEncB1])));
    return tanh(add_row(matmul(h, g.param(p[kEncW2])), g.param(p[kEncB2])));
  };
  const auto decode = [&](Var<float> z) {
    auto h = tanh(add_row(matmul(z, g.param(p[kDecW1])), g.param(p[kDecB1])));
    return add_row(matmul(h, g.param(p[kDecW2])), g.param(p[kDecB2]));
  };
  auto xa = g.constant(a);
  auto xb = g.constant(b);
  auto za = encode(xa);
  auto zb = encode(xb);
  auto ra = decode(za) - xa;
  auto rb = decode(zb) - xb;
  auto recon = mean(ra * ra) + mean(rb * rb);
  auto diff = slice(za, 1, 0, ti) - slice(zb, 1, 0, ti);
  auto sim = scale(sum(diff * diff), 1.0f / static_cast<float>(a.rows()));
  Losses out;
  out.reconstruction = recon.value().item();
  out.similarity = sim.value().item();
  out.total = lambda > 0.0f ? recon + scale(sim, lambda) : recon;
  return out;
}

}  // namespace

nlohmann::json to_json(const TireTrainLog& log) {
  nlohmann::json epochs = nlohmann::json::array();
  for (const auto& e : log.epochs) {
    epochs.push_back({{"epoch", e.epoch}, {"mean_loss", e.mean_loss}, {"mean_reconstruction", e.mean_reconstruction},
                      {"mean_similarity", e.mean_similarity}});
  }
  return {{"epochs", epochs}};
}

TireModel train_tire(std::span<const std::vector<double>> samples, const TireConfig& config, TireTrainLog* log) {
  validate(config);
  const std::size_t n_win = config.window_size;
  std::vector<std::size_t> usable;
  for (std::size_t i = 0; i < samples.size(); ++i)
    if (samples[i].size() >= n_win + 1) usable.push_back(i);
  if (usable.empty()) throw Error(Errc::SeriesTooShort, "tire training needs samples longer than window_size");

  const std::size_t n_ae = config.domains.size() * config.n_parallel;
  TireModel model{config, std::vector<TireAutoencoder>(n_ae)};
  std::vector<std::vector<TireEpochLog>> per_ae(n_ae, std::vector<TireEpochLog>(config.epochs));

  // Each autoencoder trains sequentially on its own seeded stream; they are
  // independent so the loop over them is parallel.
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 1)
  for (std::size_t a = 0; a < n_ae; ++a) {
    try {
      const TireDomain domain = config.domains[a / config.n_parallel];
      const std::size_t dim = config.input_dim(domain);
      auto params = init_params(dim, config.hidden_dim, config.code_dim(), derive_seed(config.seed, 1, a));
      std::vector<Parameter<float>*> ptrs;
      for (auto& p : params) ptrs.push_back(&p);
      diffnum::Adam<float> adam(ptrs);
      diffnum::GradBuffer<float> grads(ptrs);
      // Pair draws depend on the domain index only, so parallel AEs of a
      // domain see the same windows and differ by initialization.
      Rng rng(derive_seed(config.seed, 2, a / config.n_parallel));

      for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        std::vector<std::pair<std::size_t, std::size_t>> pairs;
        pairs.reserve(usable.size() * config.pairs_per_sample);
        for (const std::size_t s : usable) {
          std::uniform_int_distribution<std::size_t> start(0, samples[s].size() - n_win - 1);
          for (std::size_t k = 0; k < config.pairs_per_sample; ++k) pairs.emplace_back(s, start(rng));
        }
        std::shuffle(pairs.begin(), pairs.end(), rng);

        auto& elog = per_ae[a][epoch];
        elog.epoch = epoch;
        std::size_t batches = 0;
        for (std::size_t b0 = 0; b0 < pairs.size(); b0 += config.batch_size) {
          const std::size_t b1 = std::min(pairs.size(), b0 + config.batch_size);
          Tensor<float> xa(Shape{b1 - b0, dim});
          Tensor<float> xb(Shape{b1 - b0, dim});
          for (std::size_t r = b0; r < b1; ++r) {
            const auto& s = samples[pairs[r].first];
            const std::span<const double> w0(s.data() + pairs[r].second, n_win);
            const std::span<const double> w1(s.data() + pairs[r].second + 1, n_win);
            const auto in0 = tire_input(w0, domain);
            const auto in1 = tire_input(w1, domain);
            std::copy(in0.begin(), in0.end(), xa.data() + (r - b0) * dim);
            std::copy(in1.begin(), in1.end(), xb.data() + (r - b0) * dim);
          }
          Graph<float> g;
          Losses l;
          try {
            l = pair_loss(g, params, xa, xb, config.ti_features, static_cast<float>(config.lambda));
          } catch (const Error& e) {
            if (e.code() != Errc::NonFiniteValue) throw;
            throw Error(Errc::NonFiniteLoss, "tire autoencoder " + std::to_string(a) + " epoch " +
                                                 std::to_string(epoch) + ": " + e.what());
          }
          const double total = l.total.value().item();
          if (!std::isfinite(total)) {
            throw Error(Errc::NonFiniteLoss, "tire autoencoder " + std::to_string(a) + " epoch " + std::to_string(epoch));
          }
          g.backward(l.total);
          grads.zero();
          grads.accumulate(g, ptrs, 1.0f);
          adam.step(ptrs, grads, config.lr);
          elog.mean_loss += total;
          elog.mean_reconstruction += l.reconstruction;
          elog.mean_similarity += l.similarity;
          ++batches;
        }
        if (batches > 0) {
          elog.mean_loss /= static_cast<double>(batches);
          elog.mean_reconstruction /= static_cast<double>(batches);
          elog.mean_similarity /= static_cast<double>(batches);
        }
      }
      model.autoencoders[a] = to_autoencoder(params);
    } catch (...) {
#pragma omp critical(trex_tire_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);

  if (log) {
    log->epochs.clear();
    for (std::size_t e = 0; e < config.epochs; ++e) {
      TireEpochLog m;
      m.epoch = e;
      for (std::size_t a = 0; a < n_ae; ++a) {
        m.mean_loss += per_ae[a][e].mean_loss / static_cast<double>(n_ae);
        m.mean_reconstruction += per_ae[a][e].mean_reconstruction / static_cast<double>(n_ae);
        m.mean_similarity += per_ae[a][e].mean_similarity / static_cast<double>(n_ae);
      }
      log->epochs.push_back(m);
    }
  }
  return model;
}

std::vector<float> tire_encode(const TireAutoencoder& ae, std::span<const float> input) {
  const auto dense_tanh = [](std::span<const float> x, const Tensor<float>& w, const Tensor<float>& b) {
    const std::size_t in = w.rows(), out = w.cols();
    if (x.size() != in) throw Error(Errc::ShapeMismatch, "tire input length does not match the autoencoder");
    std::vector<float> y(b.values().begin(), b.values().end());
    for (std::size_t i = 0; i < in; ++i) {
      const float xi = x[i];
      const float* row = w.data() + i * out;
      for (std::size_t o = 0; o < out; ++o) y[o] += xi * row[o];
    }
    for (float& v : y) v = std::tanh(v);
    return y;
  };
  const auto h = dense_tanh(input, ae.enc_w1, ae.enc_b1);
  return dense_tanh(h, ae.enc_w2, ae.enc_b2);
}

std::vector<double> tire_embed(const TireModel& model, std::span<const double> window) {
  const auto& c = model.config;
  if (window.size() != c.window_size) {
    throw Error(Errc::ShapeMismatch, "tire window has length " + std::to_string(window.size()) + ", model expects " +
                                         std::to_string(c.window_size));
  }
  std::vector<double> out;
  out.reserve(c.embedding_dim());
  for (std::size_t d = 0; d < c.domains.size(); ++d) {
    const auto input = tire_input(window, c.domains[d]);
    for (std::size_t k = 0; k < c.n_parallel; ++k) {
      const auto code = tire_encode(model.autoencoders[d * c.n_parallel + k], input);
      out.insert(out.end(), code.begin(), code.begin() + static_cast<std::ptrdiff_t>(c.ti_features));
    }
  }
  return out;
}

void save_tire_model(const TireModel& model, const std::filesystem::path& path) {
  diffnum::Checkpoint ckpt;
  const auto& c = model.config;
  for (std::size_t a = 0; a < model.autoencoders.size(); ++a) {
    const std::string prefix =
        to_string(c.domains[a / c.n_parallel]) + "/ae" + std::to_string(a % c.n_parallel) + "/";
    const auto ts = tensors_of(model.autoencoders[a]);
    for (std::size_t i = 0; i < kParamCount; ++i) ckpt.add(prefix + kParamNames[i], *ts[i]);
  }
  ckpt.save(path);
}

TireModel load_tire_model(const TireConfig& config, const std::filesystem::path& path) {
  validate(config);
  const auto ckpt = diffnum::Checkpoint::load(path);
  TireModel model{config, std::vector<TireAutoencoder>(config.domains.size() * config.n_parallel)};
  for (std::size_t a = 0; a < model.autoencoders.size(); ++a) {
    const TireDomain domain = config.domains[a / config.n_parallel];
    const std::string prefix = to_string(domain) + "/ae" + std::to_string(a % config.n_parallel) + "/";
    const std::size_t in = config.input_dim(domain), h = config.hidden_dim, z = config.code_dim();
    const Shape expected[kParamCount] = {{in, h}, {1, h}, {h, z}, {1, z}, {z, h}, {1, h}, {h, in}, {1, in}};
    auto ts = tensors_of(model.autoencoders[a]);
    for (std::size_t i = 0; i < kParamCount; ++i) {
      *ts[i] = ckpt.get<float>(prefix + kParamNames[i]);
      if (ts[i]->shape() != expected[i]) {
        throw Error(Errc::IoError, "checkpoint tensor " + prefix + kParamNames[i] + " has shape " +
                                       diffnum::shape_string(ts[i]->shape()) + ", config expects " +
                                       diffnum::shape_string(expected[i]));
      }
    }
  }
  return model;
}

}  // namespace trex
