#include "trex/dino.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "trex/diffnum/checkpoint.hpp"
#include "trex/diffnum/optim.hpp"
#include "trex/error.hpp"
#include "trex/rng.hpp"

namespace trex {

using diffnum::Graph;
using diffnum::Shape;
using diffnum::Tensor;

void validate(const DinoConfig& c) {
  const auto fail = [](const std::string& why) { throw Error(Errc::ConfigError, "dino: " + why); };
  if (!(c.student_temp > 0.0) || !(c.teacher_temp > 0.0)) fail("temperatures must be positive");
  if (!(c.teacher_momentum >= 0.0 && c.teacher_momentum <= 1.0)) fail("teacher_momentum must be in [0, 1]");
  if (!(c.center_momentum >= 0.0 && c.center_momentum <= 1.0)) fail("center_momentum must be in [0, 1]");
}

nlohmann::json to_json(const DinoConfig& c) {
  const auto& a = c.augment;
  return {{"student_temp", c.student_temp},
          {"teacher_temp", c.teacher_temp},
          {"teacher_momentum", c.teacher_momentum},
          {"center_momentum", c.center_momentum},
          {"centering", c.centering},
          {"augment",
           {{"global_scale", {a.global_scale.lo, a.global_scale.hi}},
            {"local_scale", {a.local_scale.lo, a.local_scale.hi}},
            {"n_local", a.n_local},
            {"blur_probability", a.blur_probability},
            {"blur_sigma", {a.blur_sigma_min, a.blur_sigma_max}},
            {"noise_std", a.noise_std}}}};
}

DinoConfig dino_config_from_json(const nlohmann::json& j) {
  DinoConfig c;
  c.student_temp = j.value("student_temp", c.student_temp);
  c.teacher_temp = j.value("teacher_temp", c.teacher_temp);
  c.teacher_momentum = j.value("teacher_momentum", c.teacher_momentum);
  c.center_momentum = j.value("center_momentum", c.center_momentum);
  c.centering = j.value("centering", c.centering);
  if (j.contains("augment")) {
    const auto& a = j.at("augment");
    auto& out = c.augment;
    if (a.contains("global_scale")) out.global_scale = {a["global_scale"][0].get<double>(), a["global_scale"][1].get<double>()};
    if (a.contains("local_scale")) out.local_scale = {a["local_scale"][0].get<double>(), a["local_scale"][1].get<double>()};
    out.n_local = a.value("n_local", out.n_local);
    out.blur_probability = a.value("blur_probability", out.blur_probability);
    if (a.contains("blur_sigma")) {
      out.blur_sigma_min = a["blur_sigma"][0].get<double>();
      out.blur_sigma_max = a["blur_sigma"][1].get<double>();
    }
    out.noise_std = a.value("noise_std", out.noise_std);
  }
  return c;
}

nlohmann::json to_json(const DinoTrainConfig& c) {
  return {{"epochs", c.epochs},       {"batch_size", c.batch_size},       {"lr", c.lr},
          {"warmup_fraction", c.warmup_fraction}, {"min_lr", c.min_lr},   {"clip_grad", c.clip_grad},
          {"weight_decay", c.weight_decay},       {"max_steps", c.max_steps}, {"seed", c.seed}};
}

DinoTrainConfig dino_train_config_from_json(const nlohmann::json& j) {
  DinoTrainConfig c;
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.lr = j.value("lr", c.lr);
  c.warmup_fraction = j.value("warmup_fraction", c.warmup_fraction);
  c.min_lr = j.value("min_lr", c.min_lr);
  c.clip_grad = j.value("clip_grad", c.clip_grad);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.max_steps = j.value("max_steps", c.max_steps);
  c.seed = j.value("seed", c.seed);
  return c;
}

std::vector<double> sharpen(std::span<const double> g, double tau) {
  std::vector<double> p(g.size());
  if (g.empty()) return p;
  const double mx = *std::max_element(g.begin(), g.end());
  double z = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    p[i] = std::exp((g[i] - mx) / tau);
    z += p[i];
  }
  for (double& v : p) v /= z;
  return p;
}

double entropy(std::span<const double> p) {
  double h = 0.0;
  for (const double v : p)
    if (v > 0.0) h -= v * std::log(v);
  return h;
}

namespace {

template <typename T>
std::vector<T> to_precision(const std::vector<double>& v) {
  return std::vector<T>(v.begin(), v.end());
}

}  // namespace

template <typename T>
DinoLossTerms<T> dino_loss(Graph<T>& graph, const ViewSet& views, const ModelState<T>& state, const DinoConfig& config) {
  if (views.global_views.size() != 2) throw Error(Errc::ConfigError, "dino_loss needs exactly two global views");
  const std::size_t k = state.center.size();

  DinoLossTerms<T> out;
  std::vector<Tensor<T>> teacher_probs;
  for (const auto& view : views.global_views) {
    Graph<T> tg(false);
    const auto input = to_precision<T>(view);
    const auto raw = state.teacher.encode(tg, input).value();
    out.teacher_outputs.emplace_back(raw.values().begin(), raw.values().end());
    std::vector<double> centered(k);
    for (std::size_t i = 0; i < k; ++i) centered[i] = static_cast<double>(raw[i]) - static_cast<double>(state.center[i]);
    const auto probs = sharpen(centered, config.teacher_temp);
    out.teacher_entropy += entropy(probs) / 2.0;
    teacher_probs.emplace_back(Shape{1, k}, to_precision<T>(probs));
  }

  const T inv_student_temp = static_cast<T>(1.0 / config.student_temp);
  std::vector<diffnum::Var<T>> log_probs;
  for (std::size_t v = 0; v < views.size(); ++v) {
    const auto input = to_precision<T>(views.view(v));
    auto logits = state.student.encode(graph, input);
    log_probs.push_back(diffnum::log_softmax(diffnum::scale(logits, inv_student_temp), 1));
  }

  std::vector<diffnum::Var<T>> terms;
  for (std::size_t g = 0; g < 2; ++g) {
    auto target = graph.constant(teacher_probs[g]);
    for (std::size_t v = 0; v < views.size(); ++v) {
      if (v == g) continue;
      terms.push_back(diffnum::cross_entropy(target, log_probs[v]));
    }
  }
  out.n_terms = terms.size();
  auto total = terms.front();
  for (std::size_t i = 1; i < terms.size(); ++i) total = diffnum::add(total, terms[i]);
  out.loss = total;
  return out;
}

template <typename T>
void ema_update(ModelState<T>& state, double lambda) {
  auto& teacher = state.teacher.parameters();
  const auto& student = state.student.parameters();
  const T l = static_cast<T>(lambda);
  const T r = static_cast<T>(1.0 - lambda);
  for (std::size_t i = 0; i < teacher.size(); ++i) {
    T* t = teacher[i].value.data();
    const T* s = student[i].value.data();
    for (std::size_t k = 0; k < teacher[i].value.size(); ++k) t[k] = l * t[k] + r * s[k];
  }
}

template <typename T>
void center_update(std::vector<T>& center, const std::vector<std::vector<T>>& outputs, double m) {
  if (outputs.empty()) return;
  std::vector<double> mean(center.size(), 0.0);
  for (const auto& o : outputs) {
    if (o.size() != center.size()) throw Error(Errc::ShapeMismatch, "teacher output length differs from the center");
    for (std::size_t i = 0; i < o.size(); ++i) mean[i] += static_cast<double>(o[i]);
  }
  const double inv_b = 1.0 / static_cast<double>(outputs.size());
  for (std::size_t i = 0; i < center.size(); ++i) {
    center[i] = static_cast<T>(m * static_cast<double>(center[i]) + (1.0 - m) * mean[i] * inv_b);
  }
}

nlohmann::json to_json(const DinoTrainLog& log) {
  nlohmann::json epochs = nlohmann::json::array();
  for (const auto& e : log.epochs) {
    epochs.push_back({{"epoch", e.epoch}, {"mean_loss", e.mean_loss}, {"mean_teacher_entropy", e.mean_teacher_entropy},
                      {"steps", e.steps}});
  }
  return {{"epochs", epochs}, {"step_loss", log.step_loss}, {"step_teacher_entropy", log.step_teacher_entropy}};
}

ModelState<float> train_dino(std::span<const std::vector<double>> samples, const VitConfig& vit, const DinoConfig& dino,
                             const DinoTrainConfig& train, DinoTrainLog* log, const DinoProgress& progress) {
  validate(vit);
  validate(dino);
  if (samples.empty()) throw Error(Errc::ConfigError, "dino training needs at least one sample");
  if (train.batch_size == 0 || train.epochs == 0) throw Error(Errc::ConfigError, "epochs and batch_size must be positive");

  DinoConfig cfg = dino;
  cfg.augment.min_crop_length = 2 * vit.patch_size;

  ModelState<float> state(vit, derive_seed(train.seed, 1));
  Rng rng(derive_seed(train.seed, 2));
  auto params = state.student.parameter_ptrs();
  diffnum::Adam<float> adam(params, diffnum::AdamConfig{0.9, 0.999, 1e-8, train.weight_decay});
  diffnum::GradBuffer<float> grads(params);

  const std::size_t n = samples.size();
  const std::size_t steps_per_epoch = (n + train.batch_size - 1) / train.batch_size;
  long total_steps = static_cast<long>(steps_per_epoch * train.epochs);
  if (train.max_steps > 0) total_steps = std::min(total_steps, static_cast<long>(train.max_steps));
  const long warmup = std::max(1L, std::lround(train.warmup_fraction * static_cast<double>(total_steps)));

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  DinoTrainLog local_log;
  DinoTrainLog& out_log = log ? *log : local_log;

  for (std::size_t epoch = 0; epoch < train.epochs && state.step < total_steps; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    DinoEpochLog epoch_log;
    epoch_log.epoch = epoch;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < n && state.step < total_steps; start += train.batch_size) {
      const std::size_t end = std::min(n, start + train.batch_size);
      const float inv_batch = 1.0f / static_cast<float>(end - start);
      grads.zero();
      std::vector<std::vector<float>> teacher_outputs;
      double batch_loss = 0.0;
      double batch_entropy = 0.0;
      for (std::size_t b = start; b < end; ++b) {
        const ViewSet views = make_views(samples[order[b]], cfg.augment, rng);
        Graph<float> graph;
        DinoLossTerms<float> terms;
        try {
          terms = dino_loss(graph, views, state, cfg);
        } catch (const Error& e) {
          if (e.code() != Errc::NonFiniteValue) throw;
          throw Error(Errc::NonFiniteLoss, "step " + std::to_string(state.step) + ": " + e.what());
        }
        const double loss = terms.loss.value().item();
        if (!std::isfinite(loss)) throw Error(Errc::NonFiniteLoss, "step " + std::to_string(state.step));
        graph.backward(terms.loss);
        grads.accumulate(graph, params, inv_batch);
        batch_loss += loss;
        batch_entropy += terms.teacher_entropy;
        for (auto& o : terms.teacher_outputs) teacher_outputs.push_back(std::move(o));
      }
      grads.clip(train.clip_grad);
      const double lr = diffnum::warmup_cosine_lr(state.step, total_steps, warmup, train.lr, train.min_lr);
      adam.step(params, grads, lr);
      ema_update(state, dino.teacher_momentum);
      if (dino.centering) center_update(state.center, teacher_outputs, dino.center_momentum);
      ++state.step;

      const double count = static_cast<double>(end - start);
      out_log.step_loss.push_back(batch_loss / count);
      out_log.step_teacher_entropy.push_back(batch_entropy / count);
      epoch_log.mean_loss += batch_loss;
      epoch_log.mean_teacher_entropy += batch_entropy;
      epoch_log.steps += 1;
      seen += end - start;
    }
    if (seen > 0) {
      epoch_log.mean_loss /= static_cast<double>(seen);
      epoch_log.mean_teacher_entropy /= static_cast<double>(seen);
    }
    out_log.epochs.push_back(epoch_log);
    if (progress) progress(epoch_log);
  }
  return state;
}

template <typename T>
std::vector<double> embed_window(const ModelState<T>& state, std::span<const double> window) {
  Graph<T> g(false);
  const std::vector<T> input(window.begin(), window.end());
  const auto out = state.teacher.encode(g, input).value();
  return std::vector<double>(out.values().begin(), out.values().end());
}

void save_model_state(const ModelState<float>& state, const std::filesystem::path& path) {
  diffnum::Checkpoint ckpt;
  for (const auto& p : state.student.parameters()) ckpt.add("student/" + p.name, p.value);
  for (const auto& p : state.teacher.parameters()) ckpt.add("teacher/" + p.name, p.value);
  ckpt.add("center", Tensor<float>(Shape{1, state.center.size()}, state.center));
  ckpt.add("step", Tensor<double>::scalar(static_cast<double>(state.step)));
  ckpt.save(path);
}

ModelState<float> load_model_state(const VitConfig& config, const std::filesystem::path& path) {
  const auto ckpt = diffnum::Checkpoint::load(path);
  ModelState<float> state(config, 0);
  const auto restore = [&](VisionTransformer1d<float>& net, const std::string& prefix) {
    for (auto& p : net.parameters()) {
      auto t = ckpt.get<float>(prefix + p.name);
      if (t.shape() != p.value.shape()) {
        throw Error(Errc::IoError, "checkpoint tensor " + prefix + p.name + " has shape " + diffnum::shape_string(t.shape()) +
                                       ", model expects " + diffnum::shape_string(p.value.shape()));
      }
      p.value = std::move(t);
    }
  };
  restore(state.student, "student/");
  restore(state.teacher, "teacher/");
  const auto center = ckpt.get<float>("center");
  if (center.size() != config.out_dim) throw Error(Errc::IoError, "checkpoint center length does not match out_dim");
  state.center.assign(center.values().begin(), center.values().end());
  state.step = static_cast<long>(ckpt.get<double>("step").item());
  return state;
}

template DinoLossTerms<float> dino_loss<float>(Graph<float>&, const ViewSet&, const ModelState<float>&, const DinoConfig&);
template DinoLossTerms<double> dino_loss<double>(Graph<double>&, const ViewSet&, const ModelState<double>&, const DinoConfig&);
template void ema_update<float>(ModelState<float>&, double);
template void ema_update<double>(ModelState<double>&, double);
template void center_update<float>(std::vector<float>&, const std::vector<std::vector<float>>&, double);
template void center_update<double>(std::vector<double>&, const std::vector<std::vector<double>>&, double);
template std::vector<double> embed_window<float>(const ModelState<float>&, std::span<const double>);
template std::vector<double> embed_window<double>(const ModelState<double>&, std::span<const double>);

}  // namespace trex
