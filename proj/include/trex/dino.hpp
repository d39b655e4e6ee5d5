#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include <json.hpp>

#include "trex/augment.hpp"
#include "trex/vit.hpp"

namespace trex {

struct DinoConfig {
  double student_temp = 0.1;
  double teacher_temp = 0.04;
  double teacher_momentum = 0.996;  ///< lambda in the teacher EMA
  double center_momentum = 0.9;     ///< m in the center update
  bool centering = true;            ///< false freezes the center at zero
  AugmentConfig augment;
};

struct DinoTrainConfig {
  std::size_t epochs = 10;
  std::size_t batch_size = 32;
  double lr = 5e-4;
  double warmup_fraction = 0.1;
  double min_lr = 1e-6;
  double clip_grad = 3.0;
  double weight_decay = 0.0;
  /// Stop after this many optimizer steps (0: run all epochs).
  std::size_t max_steps = 0;
  std::uint64_t seed = 0;
};

void validate(const DinoConfig& config);
nlohmann::json to_json(const DinoConfig& config);
DinoConfig dino_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const DinoTrainConfig& config);
DinoTrainConfig dino_train_config_from_json(const nlohmann::json& j);

/// Student and teacher networks, the teacher-output center and step count.
template <typename T>
struct ModelState {
  VisionTransformer1d<T> student;
  VisionTransformer1d<T> teacher;
  std::vector<T> center;
  long step = 0;

  /// Fresh state with the teacher initialised to the student.
  ModelState(const VitConfig& config, std::uint64_t seed)
      : student(config, seed), teacher(student), center(config.out_dim, T{0}) {}
};

/// Temperature softmax of a representation: exp(g_i / tau) / sum_k exp(g_k / tau).
std::vector<double> sharpen(std::span<const double> g, double tau);

double entropy(std::span<const double> p);

template <typename T>
struct DinoLossTerms {
  diffnum::Var<T> loss;
  /// Raw (uncentered) teacher outputs for the two global views.
  std::vector<std::vector<T>> teacher_outputs;
  /// Mean entropy of the centered, sharpened teacher distributions.
  double teacher_entropy = 0.0;
  std::size_t n_terms = 0;
};

/// Sum over the two global views x and every other view x' of
/// H(P_t(x), P_s(x')). The teacher branch is evaluated outside `graph`, so no
/// gradient reaches teacher parameters.
template <typename T>
DinoLossTerms<T> dino_loss(diffnum::Graph<T>& graph, const ViewSet& views, const ModelState<T>& state,
                           const DinoConfig& config);

/// theta_t <- lambda * theta_t + (1 - lambda) * theta_s.
template <typename T>
void ema_update(ModelState<T>& state, double lambda);

/// c <- m c + (1 - m) mean(outputs).
template <typename T>
void center_update(std::vector<T>& center, const std::vector<std::vector<T>>& outputs, double m);

struct DinoEpochLog {
  std::size_t epoch = 0;
  double mean_loss = 0.0;
  double mean_teacher_entropy = 0.0;
  long steps = 0;
};

struct DinoTrainLog {
  std::vector<DinoEpochLog> epochs;
  std::vector<double> step_loss;
  std::vector<double> step_teacher_entropy;
};

nlohmann::json to_json(const DinoTrainLog& log);

using DinoProgress = std::function<void(const DinoEpochLog&)>;

/// Self-distillation training over preprocessed samples. Deterministic for
/// a given seed. Throws NonFiniteLoss (with the step index) on divergence.
ModelState<float> train_dino(std::span<const std::vector<double>> samples, const VitConfig& vit,
                             const DinoConfig& dino, const DinoTrainConfig& train, DinoTrainLog* log = nullptr,
                             const DinoProgress& progress = {});

/// Teacher representation of a window (the g used by the detector).
template <typename T>
std::vector<double> embed_window(const ModelState<T>& state, std::span<const double> window);

void save_model_state(const ModelState<float>& state, const std::filesystem::path& path);
ModelState<float> load_model_state(const VitConfig& config, const std::filesystem::path& path);

}  // namespace trex
