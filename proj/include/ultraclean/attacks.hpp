#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ultraclean/dataset.hpp"
#include "ultraclean/image.hpp"
#include "ultraclean/model.hpp"

namespace ultraclean {

// ---------------------------------------------------------------------------
// Triggers
// ---------------------------------------------------------------------------

struct Placement {
  enum class Corner { TopLeft, TopRight, BottomLeft, BottomRight };
  Corner corner = Corner::BottomRight;
  std::size_t margin = 1;  // pixels between the trigger and the image edge
};

// Pattern plus per-pixel mask weights (single channel, same height/width as
// the pattern), stamped at a corner of the target image.
struct TriggerSpec {
  Image pattern;
  Image mask;
  Placement placement;

  // Full-size pattern and mask for a target of the given shape. Throws
  // UsageError if the trigger does not fit.
  std::pair<Image, Image> placed(std::size_t height, std::size_t width,
                                 std::size_t channels) const;
};

TriggerSpec checkerboard_trigger(std::size_t side = 3, std::size_t channels = 3,
                                 Placement placement = {});
TriggerSpec solid_trigger(std::size_t side, std::size_t channels, float value = 1.0f,
                          Placement placement = {});
// Mask weight 1 over the whole pattern.
TriggerSpec trigger_from_image(Image pattern, Placement placement = {});
Image random_pattern(std::size_t height, std::size_t width, std::size_t channels,
                     std::uint64_t seed);

// clamp(img * (1 - M) + T * M, 0, 1)
Image apply_patch(const Image& img, const TriggerSpec& spec);

// clamp(alpha * trigger + (1 - alpha) * img, 0, 1)
Image blend(const Image& img, const Image& trigger, double alpha);

// Amplitude `delta` in 0-255 units, `frequency` cycles across the image width.
struct SigSpec {
  double delta = 20.0;
  double frequency = 6.0;

  void validate() const;
};

// Offsets T(i, j) = delta/255 * sin(2 pi j f / m) for rows i < l, columns j < m,
// returned row-major (l * m).
std::vector<float> sig_trigger(std::size_t rows, std::size_t cols, const SigSpec& spec);
// img + T on every channel, clamped.
Image apply_sig(const Image& img, const SigSpec& spec);

// ---------------------------------------------------------------------------
// Optimization-based poisons
// ---------------------------------------------------------------------------

enum class Norm { L2, Linf };

// epsilon and step_size are in 0-255 pixel units. For L2 the bound applies to
// the flattened image (epsilon/255 in [0,1] space).
struct AttackBudget {
  double epsilon = 16.0;
  Norm norm = Norm::Linf;
  std::size_t steps = 40;
  double step_size = 1.0;

  void validate() const;
  // step_size = 2.5 * epsilon / steps
  static AttackBudget pgd(Norm norm, double epsilon, std::size_t steps = 40);
};

// Budget presets for the label-consistent attack.
std::vector<AttackBudget> lcbd_presets();

// Called after every optimization step with the step index and current image.
using StepObserver = std::function<void(std::size_t, const Image&)>;

// PGD ascent on the cross-entropy of `label`, projected onto the budget ball
// around `img` and onto [0, 1].
Image adversarial_perturb(const Image& img, ClassIndex label, const ModelParams& model,
                          const AttackBudget& budget, const StepObserver& observer = {});

// Hard-to-classify perturbation followed by the patch trigger; label unchanged.
Image lcbd_ae_poison(const Image& img, ClassIndex label, const ModelParams& model,
                     const AttackBudget& budget, const TriggerSpec& trigger);

// arg max_y sum_i |W[y][i]| over a row-major [classes][inputs] weight matrix.
ClassIndex select_trojan_unit(std::span<const float> dense_w, std::size_t classes);

struct TrojanTrigger {
  ClassIndex unit = 0;
  Image pattern;                     // full-size optimized pattern
  Image mask;                        // full-size mask
  double transparency = 0.5;
  std::vector<double> activations;   // target logit before each step, then final
};

inline constexpr double kTrojanTargetValue = 10.0;

// Gradient descent on (logit[unit] - 10)^2 w.r.t. the trigger pixels, with
// the trigger composited onto `canvas` at the given transparency.
TrojanTrigger optimize_trojan_trigger(const Image& canvas, const ModelParams& model,
                                      const TriggerSpec& spec, double transparency,
                                      std::size_t steps, double learning_rate);

// img * (1 - a M) + pattern * a M
Image apply_trojan(const Image& img, const TrojanTrigger& trigger);

// Optimizes the trigger on `img` itself and returns the composite.
Image trojan_poison(const Image& img, const ModelParams& model, const TriggerSpec& spec,
                    double transparency = 0.5, std::size_t steps = 100,
                    double learning_rate = 0.1);

// Feature collision: starting from `target_img`, minimize
// ||features(x) - features(patched source)||^2 with ||x - target_img||_inf < eps/255.
Image htbd_poison(const Image& target_img, const Image& source_img, const ModelParams& model,
                  const TriggerSpec& trigger, const AttackBudget& budget,
                  const StepObserver& observer = {});

// ---------------------------------------------------------------------------
// Dataset poisoning
// ---------------------------------------------------------------------------

enum class AttackKind { BadNets, Blended, Trojan, Sig, Lcbd, Htbd };

std::string_view to_string(AttackKind kind) noexcept;
AttackKind parse_attack(std::string_view name);
bool is_dirty_label(AttackKind kind) noexcept;
bool needs_model(AttackKind kind) noexcept;

struct AttackParams {
  TriggerSpec patch = checkerboard_trigger();
  Image blend_pattern;               // empty: random pattern from blend_seed
  std::uint64_t blend_seed = 7;
  double alpha = 0.2;
  SigSpec sig_train{20.0, 6.0};
  SigSpec sig_test{80.0, 6.0};
  AttackBudget lcbd = AttackBudget::pgd(Norm::L2, 1200.0);
  double transparency = 0.5;
  std::size_t trojan_steps = 100;
  double trojan_learning_rate = 0.1;
  AttackBudget htbd{16.0, Norm::Linf, 200, 1.0};
  std::optional<ClassIndex> source_class;  // HTBD; default (target + 1) mod K
};

// Dirty-label attacks poison floor(fraction * n) samples drawn from
// non-target classes. Clean-label attacks poison floor(fraction * |target|)
// target-class samples (HTBD appends its poisons). `count` overrides fraction.
struct PoisonPlan {
  AttackKind attack = AttackKind::BadNets;
  ClassIndex target_class = 0;
  double fraction = 0.05;
  std::optional<std::size_t> count;
  std::uint64_t seed = 0;
  AttackParams params;

  bool dirty_label() const noexcept { return is_dirty_label(attack); }
};

struct PoisonedDataset {
  LabeledDataset dataset;
  PoisonMask mask;
  std::optional<TrojanTrigger> trojan;  // set for Trojan
};

PoisonedDataset build_poisoned_dataset(const LabeledDataset& ds, const PoisonPlan& plan,
                                       const ModelParams* model = nullptr);

// Test-time trigger for measuring attack success.
struct TestTrigger {
  ClassIndex target_class = 0;
  std::function<Image(const Image&)> apply;
  std::optional<ClassIndex> source_class;  // restrict evaluation to one class
};

TestTrigger make_test_trigger(const PoisonPlan& plan, const LabeledDataset& like,
                              const std::optional<TrojanTrigger>& trojan = std::nullopt);

}  // namespace ultraclean
