#include <algorithm>
#include <numeric>

#include "ultraclean/cleanse.hpp"
#include "ultraclean/error.hpp"
#include "ultraclean/parallel.hpp"

namespace ultraclean {

double compute_bdr(const std::vector<std::size_t>& removed, const PoisonMask& mask) {
  const std::size_t flagged = mask.flagged_count();
  if (flagged == 0) throw UndefinedMetricError("BDR is undefined without poisoned samples");
  std::vector<std::size_t> unique = removed;
  std::sort(unique.begin(), unique.end());
  unique.erase(std::unique(unique.begin(), unique.end()), unique.end());
  std::size_t hits = 0;
  for (std::size_t i : unique) {
    if (i < mask.flags.size() && mask.flagged(i)) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(flagged);
}

double compute_asr(const ModelParams& model, const LabeledDataset& clean_test,
                   const TestTrigger& trigger, std::size_t threads) {
  if (!model.trained) throw UsageError("ASR requires a trained model");
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < clean_test.size(); ++i) {
    const ClassIndex label = clean_test.labels[i];
    if (label == trigger.target_class) continue;
    if (trigger.source_class && label != *trigger.source_class) continue;
    eligible.push_back(i);
  }
  if (eligible.empty()) throw UndefinedMetricError("ASR is undefined: no eligible test images");
  std::vector<std::uint8_t> hit(eligible.size(), 0);
  parallel_for(eligible.size(), threads, [&](std::size_t k) {
    const Image triggered = trigger.apply(clean_test.images[eligible[k]]);
    hit[k] = predict(model, triggered) == trigger.target_class ? 1 : 0;
  });
  const auto hits = std::accumulate(hit.begin(), hit.end(), std::size_t{0});
  return static_cast<double>(hits) / static_cast<double>(eligible.size());
}

double detection_auc(const std::vector<double>& scores, const std::vector<std::uint8_t>& flags) {
  if (scores.size() != flags.size()) throw ShapeError("scores and flags differ in length");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Mann-Whitney U with average ranks for ties.
  double positive_rank_sum = 0.0;
  std::size_t positives = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (flags[order[k]]) {
        positive_rank_sum += avg_rank;
        ++positives;
      }
    }
    i = j;
  }
  const std::size_t negatives = scores.size() - positives;
  if (positives == 0 || negatives == 0) {
    throw UndefinedMetricError("AUC needs both poisoned and benign samples");
  }
  const double p = static_cast<double>(positives);
  const double u = positive_rank_sum - p * (p + 1.0) / 2.0;
  return u / (p * static_cast<double>(negatives));
}

}  // namespace ultraclean
