#include <algorithm>
#include <cmath>

#include "ultraclean/attacks.hpp"
#include "ultraclean/error.hpp"

namespace ultraclean {

void AttackBudget::validate() const {
  if (!(epsilon >= 0.0)) throw UsageError("attack epsilon must be >= 0");
  if (steps < 1) throw UsageError("attack needs at least one step");
  if (!(step_size >= 0.0)) throw UsageError("attack step size must be >= 0");
}

AttackBudget AttackBudget::pgd(Norm norm, double epsilon, std::size_t steps) {
  return {epsilon, norm, steps, 2.5 * epsilon / static_cast<double>(steps)};
}

std::vector<AttackBudget> lcbd_presets() {
  std::vector<AttackBudget> out;
  for (double eps : {300.0, 600.0, 1200.0}) out.push_back(AttackBudget::pgd(Norm::L2, eps));
  for (double eps : {8.0, 16.0, 32.0}) out.push_back(AttackBudget::pgd(Norm::Linf, eps));
  return out;
}

namespace {

void require_trained(const ModelParams& model, const char* attack) {
  if (!model.trained) throw UsageError(std::string(attack) + " requires a trained model");
}

double l2_norm(std::span<const float> v) {
  double sum = 0.0;
  for (float x : v) sum += static_cast<double>(x) * x;
  return std::sqrt(sum);
}

// Projects delta onto the budget ball, then clips base + delta into [0, 1].
void project(std::vector<float>& delta, std::span<const float> base, Norm norm, double radius) {
  if (norm == Norm::Linf) {
    const auto r = static_cast<float>(radius);
    for (float& d : delta) d = std::clamp(d, -r, r);
  } else {
    const double n = l2_norm(delta);
    if (n > radius) {
      const double k = radius / n;
      for (float& d : delta) d = static_cast<float>(d * k);
    }
  }
  for (std::size_t i = 0; i < delta.size(); ++i) {
    delta[i] = std::clamp(base[i] + delta[i], 0.0f, 1.0f) - base[i];
  }
}

Image offset(const Image& base, const std::vector<float>& delta) {
  Image out = base;
  auto px = out.data();
  for (std::size_t i = 0; i < px.size(); ++i) px[i] += delta[i];
  return out;
}

}  // namespace

Image adversarial_perturb(const Image& img, ClassIndex label, const ModelParams& model,
                          const AttackBudget& budget, const StepObserver& observer) {
  require_trained(model, "the label-consistent attack");
  budget.validate();
  const double radius = budget.epsilon / 255.0;
  const double step = budget.step_size / 255.0;
  const auto base = img.data();
  std::vector<float> delta(img.size(), 0.0f);
  if (radius == 0.0) return img;

  for (std::size_t s = 0; s < budget.steps; ++s) {
    const ObjectiveValue ov =
        input_gradient(model, offset(img, delta), objective::LabelLoss{label});
    const auto g = ov.gradient.data();
    if (budget.norm == Norm::Linf) {
      for (std::size_t i = 0; i < delta.size(); ++i) {
        delta[i] += static_cast<float>(step * ((g[i] > 0.0f) - (g[i] < 0.0f)));
      }
    } else {
      const double n = l2_norm(g);
      if (n > 0.0) {
        for (std::size_t i = 0; i < delta.size(); ++i) delta[i] += static_cast<float>(step * g[i] / n);
      }
    }
    project(delta, base, budget.norm, radius);
    if (observer) observer(s, offset(img, delta));
  }
  return offset(img, delta);
}

Image lcbd_ae_poison(const Image& img, ClassIndex label, const ModelParams& model,
                     const AttackBudget& budget, const TriggerSpec& trigger) {
  return apply_patch(adversarial_perturb(img, label, model, budget), trigger);
}

ClassIndex select_trojan_unit(std::span<const float> dense_w, std::size_t classes) {
  if (classes == 0 || dense_w.size() % classes != 0) {
    throw ShapeError("dense weight matrix does not divide into the class count");
  }
  const std::size_t inputs = dense_w.size() / classes;
  ClassIndex best = 0;
  double best_sum = -1.0;
  for (std::size_t y = 0; y < classes; ++y) {
    double sum = 0.0;
    for (std::size_t i = 0; i < inputs; ++i) sum += std::abs(dense_w[y * inputs + i]);
    if (sum > best_sum) {
      best_sum = sum;
      best = static_cast<ClassIndex>(y);
    }
  }
  return best;
}

Image apply_trojan(const Image& img, const TrojanTrigger& trigger) {
  if (img.height() != trigger.pattern.height() || img.width() != trigger.pattern.width() ||
      img.channels() != trigger.pattern.channels()) {
    throw ShapeError("trojan trigger shape does not match the image");
  }
  Image out = img;
  const auto a = static_cast<float>(trigger.transparency);
  for (std::size_t y = 0; y < img.height(); ++y) {
    for (std::size_t x = 0; x < img.width(); ++x) {
      const float m = a * trigger.mask.at(y, x, 0);
      if (m == 0.0f) continue;
      for (std::size_t c = 0; c < img.channels(); ++c) {
        out.at(y, x, c) = std::clamp(img.at(y, x, c) * (1.0f - m) + trigger.pattern.at(y, x, c) * m,
                                     0.0f, 1.0f);
      }
    }
  }
  return out;
}

TrojanTrigger optimize_trojan_trigger(const Image& canvas, const ModelParams& model,
                                      const TriggerSpec& spec, double transparency,
                                      std::size_t steps, double learning_rate) {
  require_trained(model, "the trojan attack");
  if (!(transparency >= 0.0 && transparency <= 1.0)) {
    throw UsageError("trojan transparency must be in [0, 1]");
  }
  TrojanTrigger trig;
  trig.unit = select_trojan_unit(model.dense_w, model.arch.num_classes);
  trig.transparency = transparency;
  std::tie(trig.pattern, trig.mask) = spec.placed(canvas.height(), canvas.width(), canvas.channels());

  const objective::UnitActivation goal{trig.unit, kTrojanTargetValue};
  for (std::size_t s = 0; s < steps; ++s) {
    const Image composite = apply_trojan(canvas, trig);
    trig.activations.push_back(forward_logits(model, composite)[trig.unit]);
    const ObjectiveValue ov = input_gradient(model, composite, goal);
    // d cost / d pattern = d cost / d input * transparency * mask
    for (std::size_t y = 0; y < canvas.height(); ++y) {
      for (std::size_t x = 0; x < canvas.width(); ++x) {
        const double m = transparency * trig.mask.at(y, x, 0);
        if (m == 0.0) continue;
        for (std::size_t c = 0; c < canvas.channels(); ++c) {
          float& p = trig.pattern.at(y, x, c);
          p = std::clamp(static_cast<float>(p - learning_rate * m * ov.gradient.at(y, x, c)), 0.0f,
                         1.0f);
        }
      }
    }
  }
  trig.activations.push_back(forward_logits(model, apply_trojan(canvas, trig))[trig.unit]);
  return trig;
}

Image trojan_poison(const Image& img, const ModelParams& model, const TriggerSpec& spec,
                    double transparency, std::size_t steps, double learning_rate) {
  const TrojanTrigger trig =
      optimize_trojan_trigger(img, model, spec, transparency, steps, learning_rate);
  return apply_trojan(img, trig);
}

Image htbd_poison(const Image& target_img, const Image& source_img, const ModelParams& model,
                  const TriggerSpec& trigger, const AttackBudget& budget,
                  const StepObserver& observer) {
  require_trained(model, "the hidden-trigger attack");
  // Zero steps is allowed here: the poison is then the unmodified target image.
  if (!(budget.epsilon >= 0.0) || !(budget.step_size >= 0.0)) {
    throw UsageError("HTBD epsilon and step size must be >= 0");
  }
  if (!target_img.same_shape(source_img)) throw ShapeError("HTBD target and source shapes differ");
  const objective::FeatureDistance goal{features(model, apply_patch(source_img, trigger))};

  // Strictly inside the open ball ||x - x_t||_inf < eps/255.
  const double radius = budget.epsilon > 0.0 ? budget.epsilon / 255.0 - 1e-6 : 0.0;
  const auto r = static_cast<float>(radius);
  const auto step = static_cast<float>(budget.step_size / 255.0);
  const auto base = target_img.data();
  Image x = target_img;
  for (std::size_t s = 0; s < budget.steps; ++s) {
    const ObjectiveValue ov = input_gradient(model, x, goal);
    const auto g = ov.gradient.data();
    auto px = x.data();
    for (std::size_t i = 0; i < px.size(); ++i) {
      const float moved = px[i] - step * static_cast<float>((g[i] > 0.0f) - (g[i] < 0.0f));
      px[i] = std::clamp(std::clamp(moved, base[i] - r, base[i] + r), 0.0f, 1.0f);
    }
    if (observer) observer(s, x);
  }
  return x;
}

}  // namespace ultraclean
