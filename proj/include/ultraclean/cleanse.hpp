#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ultraclean/attacks.hpp"
#include "ultraclean/dataset.hpp"
#include "ultraclean/denoise.hpp"
#include "ultraclean/model.hpp"

namespace ultraclean {

enum class ScoreMode { Both, MedianOnly, MeanOnly };
enum class Scope { WholeDataset, SingleClass };

std::string_view to_string(ScoreMode mode) noexcept;
std::string_view to_string(Scope scope) noexcept;
ScoreMode parse_score_mode(std::string_view name);  // both | median-only | mean-only
Scope parse_scope(std::string_view name);           // whole | class

struct CleanseConfig {
  double beta = 0.3;
  Scope scope = Scope::WholeDataset;
  ClassIndex scope_class = 0;  // used when scope == SingleClass
  NlmParams nlm;
  MedianParams median;
  ScoreMode mode = ScoreMode::Both;
  std::size_t threads = 1;

  void validate() const;
};

// v is the softmax of the sample; v1 and v2 are those of its NLM and median variants.
struct SusceptibilityRecord {
  std::size_t index = 0;
  double score = 0.0;
  std::vector<double> v;
  std::vector<double> v1;
  std::vector<double> v2;
};

double l1_distance(const std::vector<double>& a, const std::vector<double>& b);

// ||v - v1||_1 + ||v - v2||_1, dropping the median (v2) term in mean-only
// mode and the mean (v1) term in median-only mode.
double susceptibility(const std::vector<double>& v, const std::vector<double>& v1,
                      const std::vector<double>& v2, ScoreMode mode = ScoreMode::Both);

// In-scope sample indices, ascending.
std::vector<std::size_t> scope_indices(const LabeledDataset& ds, const CleanseConfig& cfg);

// One record per in-scope sample, in dataset order. Independent of cfg.threads.
std::vector<SusceptibilityRecord> score_dataset(const LabeledDataset& ds,
                                                const ModelParams& model,
                                                const CleanseConfig& cfg);

std::size_t removal_count(double beta, std::size_t scope_size);

// Sample indices of the `count` highest scores, popped from a max-heap; equal
// scores pop the lower sample index first. Returned in pop order.
std::vector<std::size_t> top_susceptible(const std::vector<SusceptibilityRecord>& records,
                                         std::size_t count);

struct Removal {
  LabeledDataset sanitized;
  std::optional<PoisonMask> mask;      // realigned to `sanitized`
  std::vector<std::size_t> removed;    // original indices, ascending
  std::size_t scope_size = 0;
};

Removal remove_top(const LabeledDataset& ds, const PoisonMask* mask,
                   const std::vector<SusceptibilityRecord>& records, const CleanseConfig& cfg);

// |removed ∩ flagged| / |flagged|
double compute_bdr(const std::vector<std::size_t>& removed, const PoisonMask& mask);

// Fraction of triggered, eligible test images predicted as the target class.
// Test images of the target class are excluded.
double compute_asr(const ModelParams& model, const LabeledDataset& clean_test,
                   const TestTrigger& trigger, std::size_t threads = 1);

// AUC of `scores` as a detector of flagged samples (ties count one half).
double detection_auc(const std::vector<double>& scores, const std::vector<std::uint8_t>& flags);

struct CleanseReport {
  std::optional<double> bdr;  // absent when nothing was poisoned
  std::optional<double> asr_pre;
  std::optional<double> asr_post;
  double acc_pre = 0.0;
  double acc_post = 0.0;
  std::size_t removed_count = 0;
  std::size_t scope_size = 0;
  std::size_t poisoned_count = 0;
  std::string attack;
  int target_class = -1;
  CleanseConfig config;
  TrainConfig train;
  std::uint64_t model_seed = 0;

  std::string to_key_value() const;
};

struct UltraCleanResult {
  CleanseReport report;
  std::vector<SusceptibilityRecord> records;
  ModelParams pre_model;
  ModelParams post_model;
  Removal removal;
};

// Pre-clean training, scoring, top-beta removal, retraining from a fresh
// initialization with the same seeds, then metrics on `test_set`.
UltraCleanResult run_ultraclean(const LabeledDataset& ds, const PoisonMask* mask,
                                const LabeledDataset& test_set, const TestTrigger* trigger,
                                const TrainConfig& train_cfg, const CleanseConfig& cleanse_cfg,
                                std::uint64_t model_seed);

struct SweepRow {
  double beta = 0.0;
  std::size_t removed_count = 0;
  std::optional<double> bdr;
  std::optional<double> asr_post;
  double acc_post = 0.0;
};

// Scores once with the pre-clean model, then removes and retrains per beta.
std::vector<SweepRow> sweep_beta(const LabeledDataset& ds, const PoisonMask* mask,
                                 const LabeledDataset& test_set, const TestTrigger* trigger,
                                 const TrainConfig& train_cfg, const CleanseConfig& cleanse_cfg,
                                 std::uint64_t model_seed, const std::vector<double>& betas,
                                 const ModelParams* pre_model = nullptr);

// CSV with header `index,score,label,flagged`; scores printed with 9
// significant digits.
void write_score_csv(const std::vector<SusceptibilityRecord>& records, const LabeledDataset& ds,
                     const PoisonMask* mask, const std::filesystem::path& path);

struct ScoreRow {
  std::size_t index = 0;
  double score = 0.0;
  ClassIndex label = 0;
  bool flagged = false;
};
std::vector<ScoreRow> read_score_csv(const std::filesystem::path& path);

// Spectral-signature comparison score: squared projection of each centered
// feature vector onto the top right singular vector of its class's centered
// feature matrix. Rows are samples.
std::vector<double> spectral_scores(const std::vector<std::vector<float>>& feats,
                                    const std::vector<ClassIndex>& labels);
std::vector<double> spectral_baseline_score(const LabeledDataset& ds, const ModelParams& model,
                                            std::size_t threads = 1);

}  // namespace ultraclean
