#include <algorithm>
#include <cmath>
#include <numeric>

#include "network.hpp"
#include "ultraclean/error.hpp"
#include "ultraclean/parallel.hpp"
#include "ultraclean/rng.hpp"

namespace ultraclean {

void Architecture::validate() const {
  if (height < 4 || width < 4 || height % 4 != 0 || width % 4 != 0) {
    throw ShapeError("model input height and width must be positive multiples of 4, got " +
                     std::to_string(height) + "x" + std::to_string(width));
  }
  if (channels != 1 && channels != 3) throw ShapeError("model input must have 1 or 3 channels");
  if (num_classes < 2) throw ShapeError("model needs at least 2 classes");
}

Architecture architecture_for(const LabeledDataset& ds) {
  if (ds.empty()) throw UsageError("cannot derive a model shape from an empty dataset");
  const Image& img = ds.images.front();
  return {img.height(), img.width(), img.channels(), ds.num_classes};
}

std::array<std::span<float>, kTensorCount> ModelParams::tensors() {
  return {conv1_w, conv1_b, conv2_w, conv2_b, dense_w, dense_b};
}

std::array<std::span<const float>, kTensorCount> ModelParams::tensors() const {
  return {conv1_w, conv1_b, conv2_w, conv2_b, dense_w, dense_b};
}

std::size_t ModelParams::parameter_count() const noexcept {
  return conv1_w.size() + conv1_b.size() + conv2_w.size() + conv2_b.size() + dense_w.size() +
         dense_b.size();
}

std::vector<std::uint32_t> ModelParams::tensor_shape(std::size_t t) const {
  const auto c = static_cast<std::uint32_t>(arch.channels);
  const auto k = static_cast<std::uint32_t>(Architecture::kKernel);
  const auto c1 = static_cast<std::uint32_t>(Architecture::kConv1);
  const auto c2 = static_cast<std::uint32_t>(Architecture::kConv2);
  const auto n = static_cast<std::uint32_t>(arch.num_classes);
  const auto f = static_cast<std::uint32_t>(arch.feature_size());
  switch (t) {
    case 0: return {c1, c, k, k};
    case 1: return {c1};
    case 2: return {c2, c1, k, k};
    case 3: return {c2};
    case 4: return {n, f};
    case 5: return {n};
    default: throw UsageError("tensor index out of range");
  }
}

ParamGradients::ParamGradients(const ModelParams& params) {
  const auto views = params.tensors();
  for (std::size_t t = 0; t < kTensorCount; ++t) tensors[t].assign(views[t].size(), 0.0f);
}

void ParamGradients::zero() {
  for (auto& t : tensors) std::fill(t.begin(), t.end(), 0.0f);
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw UsageError("learning rate must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw UsageError("momentum must be in [0, 1)");
  if (!(weight_decay >= 0.0)) throw UsageError("weight decay must be >= 0");
  if (batch_size < 1) throw UsageError("batch size must be >= 1");
}

ModelParams init_model(const Architecture& arch, std::uint64_t seed) {
  arch.validate();
  ModelParams p;
  p.arch = arch;
  p.seed = seed;
  constexpr std::size_t kk = Architecture::kKernel * Architecture::kKernel;
  p.conv1_w.resize(Architecture::kConv1 * arch.channels * kk);
  p.conv1_b.assign(Architecture::kConv1, 0.0f);
  p.conv2_w.resize(Architecture::kConv2 * Architecture::kConv1 * kk);
  p.conv2_b.assign(Architecture::kConv2, 0.0f);
  p.dense_w.resize(arch.num_classes * arch.feature_size());
  p.dense_b.assign(arch.num_classes, 0.0f);

  Rng rng(seed);
  auto fill = [&rng](std::vector<float>& w, std::size_t fan_in) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    for (float& v : w) v = static_cast<float>(rng.uniform(-bound, bound));
  };
  fill(p.conv1_w, arch.channels * kk);
  fill(p.conv2_w, Architecture::kConv1 * kk);
  fill(p.dense_w, arch.feature_size());
  return p;
}

std::vector<double> softmax(std::span<const float> logits) {
  std::vector<double> out(logits.size());
  if (logits.empty()) return out;
  const double peak = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(static_cast<double>(logits[i]) - peak);
    total += out[i];
  }
  for (double& v : out) v /= total;
  return out;
}

std::vector<float> forward_logits(const ModelParams& params, const Image& img) {
  detail::Network net(params.arch);
  net.forward(params, img);
  return net.logits();
}

std::vector<double> forward_softmax(const ModelParams& params, const Image& img) {
  return softmax(forward_logits(params, img));
}

std::vector<float> features(const ModelParams& params, const Image& img) {
  detail::Network net(params.arch);
  net.forward(params, img);
  return net.features();
}

namespace {

ClassIndex argmax(std::span<const float> logits) {
  return static_cast<ClassIndex>(std::max_element(logits.begin(), logits.end()) - logits.begin());
}

struct Upstream {
  double value = 0.0;
  std::vector<float> grad;
  bool from_features = false;
};

Upstream objective_upstream(const detail::Network& net, const Objective& obj, double scale) {
  Upstream up;
  const auto& logits = net.logits();
  if (const auto* ce = std::get_if<objective::LabelLoss>(&obj)) {
    if (ce->label >= logits.size()) throw UsageError("label out of range for the model");
    const std::vector<double> p = softmax(logits);
    up.value = -std::log(std::max(p[ce->label], 1e-300));
    up.grad.resize(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
      up.grad[i] = static_cast<float>(scale * (p[i] - (i == ce->label ? 1.0 : 0.0)));
    }
  } else if (const auto* fd = std::get_if<objective::FeatureDistance>(&obj)) {
    const auto& f = net.features();
    if (fd->target.size() != f.size()) throw ShapeError("feature target length mismatch");
    up.from_features = true;
    up.grad.resize(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) {
      const double d = static_cast<double>(f[i]) - fd->target[i];
      up.value += d * d;
      up.grad[i] = static_cast<float>(scale * 2.0 * d);
    }
  } else {
    const auto& ua = std::get<objective::UnitActivation>(obj);
    if (ua.unit >= logits.size()) throw UsageError("unit out of range for the model");
    const double d = static_cast<double>(logits[ua.unit]) - ua.target_value;
    up.value = d * d;
    up.grad.assign(logits.size(), 0.0f);
    up.grad[ua.unit] = static_cast<float>(scale * 2.0 * d);
  }
  up.value *= scale;
  return up;
}

}  // namespace

ClassIndex predict(const ModelParams& params, const Image& img) {
  return argmax(forward_logits(params, img));
}

double objective_value(const ModelParams& params, const Image& img, const Objective& obj) {
  detail::Network net(params.arch);
  net.forward(params, img);
  return objective_upstream(net, obj, 1.0).value;
}

ObjectiveValue input_gradient(const ModelParams& params, const Image& img, const Objective& obj,
                              double scale) {
  detail::Network net(params.arch);
  net.forward(params, img);
  const Upstream up = objective_upstream(net, obj, scale);
  ObjectiveValue out;
  out.value = up.value;
  net.backward(params, up.grad, up.from_features, nullptr, &out.gradient);
  return out;
}

double accumulate_loss_gradient(const ModelParams& params, const Image& img, ClassIndex label,
                                ParamGradients& grads) {
  detail::Network net(params.arch);
  net.forward(params, img);
  const Upstream up = objective_upstream(net, objective::LabelLoss{label}, 1.0);
  net.backward(params, up.grad, false, &grads, nullptr);
  return up.value;
}

ModelParams train(const ModelParams& params, const LabeledDataset& ds, const TrainConfig& cfg,
                  TrainLog* log) {
  cfg.validate();
  if (ds.empty()) throw UsageError("cannot train on an empty dataset");
  ds.validate();
  if (architecture_for(ds) != params.arch) {
    throw ShapeError("dataset shape does not match the model architecture");
  }
  ModelParams model = params;
  if (log) *log = {};
  if (cfg.epochs == 0) return model;

  ParamGradients grads(model);
  ParamGradients velocity(model);
  detail::Network net(model.arch);
  std::vector<std::size_t> order(ds.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(cfg.seed);

  const auto lr = static_cast<float>(cfg.learning_rate);
  const auto mu = static_cast<float>(cfg.momentum);
  const auto wd = static_cast<float>(cfg.weight_decay);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      grads.zero();
      for (std::size_t b = start; b < end; ++b) {
        const std::size_t idx = order[b];
        net.forward(model, ds.images[idx]);
        const Upstream up = objective_upstream(net, objective::LabelLoss{ds.labels[idx]}, 1.0);
        net.backward(model, up.grad, false, &grads, nullptr);
        epoch_loss += up.value;
      }
      const float inv_batch = 1.0f / static_cast<float>(end - start);
      auto weights = model.tensors();
      for (std::size_t t = 0; t < kTensorCount; ++t) {
        std::vector<float>& g = grads.tensors[t];
        std::vector<float>& v = velocity.tensors[t];
        for (std::size_t j = 0; j < g.size(); ++j) {
          const float step = g[j] * inv_batch + wd * weights[t][j];
          v[j] = mu * v[j] + step;
          weights[t][j] -= lr * v[j];
        }
      }
    }
    if (log) log->epoch_loss.push_back(epoch_loss / static_cast<double>(ds.size()));
  }
  model.trained = true;
  if (log) log->final_accuracy = evaluate(model, ds);
  return model;
}

double evaluate(const ModelParams& params, const LabeledDataset& ds, std::size_t threads) {
  if (!params.trained) throw UsageError("evaluate requires a trained model");
  if (ds.empty()) throw UsageError("cannot evaluate on an empty dataset");
  std::vector<std::uint8_t> correct(ds.size(), 0);
  parallel_for(ds.size(), threads, [&](std::size_t i) {
    correct[i] = predict(params, ds.images[i]) == ds.labels[i] ? 1 : 0;
  });
  const auto hits = std::accumulate(correct.begin(), correct.end(), std::size_t{0});
  return static_cast<double>(hits) / static_cast<double>(ds.size());
}

}  // namespace ultraclean
