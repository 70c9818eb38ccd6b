#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ultraclean/attacks.hpp"
#include "ultraclean/cleanse.hpp"
#include "ultraclean/model.hpp"

namespace ultraclean::cli {

// Flat key=value run configuration. Keys use underscores; command-line flags
// spell the same keys with hyphens. Every value is range-checked on assignment.
class RunConfig {
 public:
  // Input data from a UCDS file or CIFAR-10 batch; synthetic when neither is set.
  std::filesystem::path dataset;
  std::filesystem::path cifar;
  std::filesystem::path test_dataset;
  std::size_t synthetic_classes = 10;
  std::size_t synthetic_per_class = 500;
  std::size_t synthetic_test_per_class = 100;
  std::size_t synthetic_size = 32;
  double synthetic_clutter = 0.15;
  double synthetic_scale_min = 0.30;
  double synthetic_contrast_min = 0.7;
  double synthetic_noise = 0.0;

  // Attack plan; attack "none" leaves the data clean.
  std::string attack = "none";
  ClassIndex target = 0;
  double fraction = 0.05;
  std::optional<std::size_t> count;
  std::string trigger = "checkerboard";  // checkerboard | solid | path to a PPM
  std::size_t trigger_size = 3;
  std::size_t trigger_margin = 1;
  Placement::Corner trigger_corner = Placement::Corner::BottomRight;
  double alpha = 0.2;
  std::uint64_t blend_seed = 7;
  double sig_delta = 20.0;
  double sig_test_delta = 80.0;
  double sig_freq = 6.0;
  std::string norm = "l2";
  double epsilon = 1200.0;
  std::size_t pgd_steps = 40;
  std::optional<double> step_size;  // default 2.5 * epsilon / steps
  double transparency = 0.5;
  std::size_t trojan_steps = 100;
  double trojan_lr = 0.1;
  double htbd_epsilon = 16.0;
  std::size_t htbd_steps = 200;
  double htbd_step = 1.0;
  std::optional<ClassIndex> source_class;
  std::filesystem::path model;          // checkpoint for attacks / eval
  std::filesystem::path trigger_file;   // optimized trojan trigger (UCDS) for eval

  // Training.
  double lr = 0.01;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  std::size_t epochs = 20;
  std::size_t batch_size = 32;

  // Cleansing.
  double beta = 0.3;
  std::string scope = "whole";
  std::optional<ClassIndex> scope_class;  // default: the attack target
  std::string score_mode = "both";
  int nlm_patch_radius = 3;
  int nlm_search_radius = 10;
  double nlm_sigma = 10.0;
  double nlm_h = 10.0;
  int median_radius = 1;
  std::vector<double> betas{0.0, 0.1, 0.2, 0.3};

  // Misc.
  std::filesystem::path out = "out";
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  std::string simd = "auto";
  std::optional<std::size_t> index;
  std::filesystem::path output;
  std::string method = "median";  // denoise: nlm | median

  // Assigns one key. Throws UsageError for unknown keys or invalid values.
  void set(const std::string& key, const std::string& value);
  void load_file(const std::filesystem::path& path);
  static const std::vector<std::string>& keys();

  // Derived per-phase seeds.
  std::uint64_t data_seed() const noexcept { return seed; }
  std::uint64_t test_seed() const noexcept { return seed + 1; }
  std::uint64_t poison_seed() const noexcept { return seed + 2; }
  std::uint64_t model_seed() const noexcept { return seed + 3; }
  std::uint64_t train_seed() const noexcept { return seed + 4; }
  std::uint64_t surrogate_seed() const noexcept { return seed + 5; }

  SyntheticSpec synthetic_spec() const;
  TrainConfig train_config() const;
  CleanseConfig cleanse_config() const;
  TriggerSpec trigger_spec(std::size_t channels) const;
  PoisonPlan poison_plan(std::size_t channels) const;
  bool has_attack() const noexcept { return attack != "none"; }
};

}  // namespace ultraclean::cli
