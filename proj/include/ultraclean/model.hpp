#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <variant>
#include <vector>

#include "ultraclean/dataset.hpp"
#include "ultraclean/image.hpp"

namespace ultraclean {

// conv(C->8, 3x3, same) -> ReLU -> maxpool2 -> conv(8->16, 3x3, same) -> ReLU
// -> maxpool2 -> dense(16*H/4*W/4 -> num_classes). H and W must be divisible by 4.
struct Architecture {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;
  std::size_t num_classes = 0;

  static constexpr std::size_t kConv1 = 8;
  static constexpr std::size_t kConv2 = 16;
  static constexpr std::size_t kKernel = 3;

  std::size_t feature_size() const noexcept { return kConv2 * (height / 4) * (width / 4); }
  void validate() const;
  friend bool operator==(const Architecture&, const Architecture&) = default;
};

inline constexpr std::size_t kTensorCount = 6;

struct ModelParams {
  Architecture arch;
  std::vector<float> conv1_w;  // [8][C][3][3]
  std::vector<float> conv1_b;  // [8]
  std::vector<float> conv2_w;  // [16][8][3][3]
  std::vector<float> conv2_b;  // [16]
  std::vector<float> dense_w;  // [K][F]
  std::vector<float> dense_b;  // [K]
  bool trained = false;
  std::uint64_t seed = 0;

  std::array<std::span<float>, kTensorCount> tensors();
  std::array<std::span<const float>, kTensorCount> tensors() const;
  std::size_t parameter_count() const noexcept;

  // Shape of tensor t as stored in checkpoints.
  std::vector<std::uint32_t> tensor_shape(std::size_t t) const;
};

// Gradient buffers laid out like ModelParams tensors.
struct ParamGradients {
  std::array<std::vector<float>, kTensorCount> tensors;

  explicit ParamGradients(const ModelParams& params);
  void zero();
};

struct TrainConfig {
  double learning_rate = 0.01;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  std::size_t epochs = 20;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;

  void validate() const;
};

// Fan-in scaled uniform init in +-sqrt(6 / fan_in); biases start at zero.
ModelParams init_model(const Architecture& arch, std::uint64_t seed);

std::vector<float> forward_logits(const ModelParams& params, const Image& img);
std::vector<double> forward_softmax(const ModelParams& params, const Image& img);
std::vector<float> features(const ModelParams& params, const Image& img);

// Numerically stable softmax (max subtracted) in double precision.
std::vector<double> softmax(std::span<const float> logits);

// Arg-max class; ties go to the lowest index.
ClassIndex predict(const ModelParams& params, const Image& img);

namespace objective {
// Cross-entropy of the softmax output against `label`.
struct LabelLoss {
  ClassIndex label = 0;
};
// || features(x) - target ||_2^2
struct FeatureDistance {
  std::vector<float> target;
};
// (logit[unit] - target_value)^2
struct UnitActivation {
  ClassIndex unit = 0;
  double target_value = 10.0;
};
}  // namespace objective

using Objective = std::variant<objective::LabelLoss, objective::FeatureDistance,
                               objective::UnitActivation>;

struct ObjectiveValue {
  double value = 0.0;
  Image gradient;  // d(scale * objective) / d(input), same shape as the input
};

double objective_value(const ModelParams& params, const Image& img, const Objective& obj);

// Exact backpropagated input gradient of scale * objective.
ObjectiveValue input_gradient(const ModelParams& params, const Image& img, const Objective& obj,
                              double scale = 1.0);

// Cross-entropy loss and its parameter gradient for one labeled sample; the
// gradient is added into `grads`.
double accumulate_loss_gradient(const ModelParams& params, const Image& img, ClassIndex label,
                                ParamGradients& grads);

struct TrainLog {
  std::vector<double> epoch_loss;  // mean cross-entropy per epoch
  double final_accuracy = 0.0;     // evaluate() on the training set after the last epoch
};

// Mini-batch SGD with momentum and weight decay on cross-entropy. Deterministic
// for a fixed (params, ds, cfg) and SIMD level.
ModelParams train(const ModelParams& params, const LabeledDataset& ds, const TrainConfig& cfg,
                  TrainLog* log = nullptr);

double evaluate(const ModelParams& params, const LabeledDataset& ds, std::size_t threads = 1);

void save_params(const ModelParams& params, const std::filesystem::path& path);
ModelParams load_params(const std::filesystem::path& path);
// Loads and checks the architecture against `expected`.
ModelParams load_params(const std::filesystem::path& path, const Architecture& expected);

Architecture architecture_for(const LabeledDataset& ds);

}  // namespace ultraclean
