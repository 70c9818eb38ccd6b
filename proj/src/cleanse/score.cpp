#include <algorithm>
#include <cmath>
#include <queue>
#include <string>

#include "ultraclean/cleanse.hpp"
#include "ultraclean/error.hpp"
#include "ultraclean/parallel.hpp"

namespace ultraclean {

std::string_view to_string(ScoreMode mode) noexcept {
  switch (mode) {
    case ScoreMode::Both: return "both";
    case ScoreMode::MedianOnly: return "median-only";
    case ScoreMode::MeanOnly: return "mean-only";
  }
  return "both";
}

std::string_view to_string(Scope scope) noexcept {
  return scope == Scope::SingleClass ? "class" : "whole";
}

ScoreMode parse_score_mode(std::string_view name) {
  if (name == "both") return ScoreMode::Both;
  if (name == "median-only") return ScoreMode::MedianOnly;
  if (name == "mean-only") return ScoreMode::MeanOnly;
  throw UsageError("unknown score mode '" + std::string(name) + "' (both|median-only|mean-only)");
}

Scope parse_scope(std::string_view name) {
  if (name == "whole") return Scope::WholeDataset;
  if (name == "class") return Scope::SingleClass;
  throw UsageError("unknown scope '" + std::string(name) + "' (whole|class)");
}

void CleanseConfig::validate() const {
  if (!(beta >= 0.0 && beta <= 1.0)) throw UsageError("beta must be in [0, 1]");
  nlm.validate();
  median.validate();
}

double l1_distance(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw ShapeError("probability vectors differ in length");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += std::abs(a[i] - b[i]);
  return sum;
}

double susceptibility(const std::vector<double>& v, const std::vector<double>& v1,
                      const std::vector<double>& v2, ScoreMode mode) {
  switch (mode) {
    case ScoreMode::MeanOnly: return l1_distance(v, v1);
    case ScoreMode::MedianOnly: return l1_distance(v, v2);
    case ScoreMode::Both: break;
  }
  return l1_distance(v, v1) + l1_distance(v, v2);
}

std::vector<std::size_t> scope_indices(const LabeledDataset& ds, const CleanseConfig& cfg) {
  if (cfg.scope == Scope::SingleClass) {
    if (cfg.scope_class >= ds.num_classes) throw UsageError("scope class out of range");
    return ds.indices_of_class(cfg.scope_class);
  }
  std::vector<std::size_t> all(ds.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return all;
}

std::vector<SusceptibilityRecord> score_dataset(const LabeledDataset& ds,
                                                const ModelParams& model,
                                                const CleanseConfig& cfg) {
  cfg.validate();
  if (!model.trained) throw UsageError("susceptibility scoring requires a trained model");
  const std::vector<std::size_t> scope = scope_indices(ds, cfg);
  std::vector<SusceptibilityRecord> records(scope.size());
  parallel_for(scope.size(), cfg.threads, [&](std::size_t k) {
    const Image& x = ds.images[scope[k]];
    SusceptibilityRecord& r = records[k];
    r.index = scope[k];
    r.v = forward_softmax(model, x);
    // The ablation modes still record both variants so tables stay comparable.
    r.v1 = forward_softmax(model, nlm_denoise(x, cfg.nlm));
    r.v2 = forward_softmax(model, median_denoise(x, cfg.median));
    r.score = susceptibility(r.v, r.v1, r.v2, cfg.mode);
  });
  return records;
}

std::size_t removal_count(double beta, std::size_t scope_size) {
  const auto k = static_cast<std::size_t>(std::floor(beta * static_cast<double>(scope_size)));
  return std::min(k, scope_size);
}

std::vector<std::size_t> top_susceptible(const std::vector<SusceptibilityRecord>& records,
                                         std::size_t count) {
  // Max-heap on (score, -index).
  auto lower_priority = [](const SusceptibilityRecord* a, const SusceptibilityRecord* b) {
    if (a->score != b->score) return a->score < b->score;
    return a->index > b->index;
  };
  std::priority_queue<const SusceptibilityRecord*, std::vector<const SusceptibilityRecord*>,
                      decltype(lower_priority)>
      heap(lower_priority);
  for (const auto& r : records) heap.push(&r);
  std::vector<std::size_t> out;
  count = std::min(count, records.size());
  out.reserve(count);
  while (out.size() < count) {
    out.push_back(heap.top()->index);
    heap.pop();
  }
  return out;
}

Removal remove_top(const LabeledDataset& ds, const PoisonMask* mask,
                   const std::vector<SusceptibilityRecord>& records, const CleanseConfig& cfg) {
  cfg.validate();
  if (mask && mask->flags.size() != ds.size()) throw ShapeError("mask length mismatch");
  Removal out;
  out.scope_size = records.size();
  out.removed = top_susceptible(records, removal_count(cfg.beta, records.size()));
  std::sort(out.removed.begin(), out.removed.end());

  std::vector<std::uint8_t> drop(ds.size(), 0);
  for (std::size_t i : out.removed) drop.at(i) = 1;
  std::vector<std::size_t> keep;
  keep.reserve(ds.size() - out.removed.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (!drop[i]) keep.push_back(i);
  }
  out.sanitized = ds.subset(keep);
  if (mask) out.mask = mask->subset(keep);
  return out;
}

}  // namespace ultraclean
