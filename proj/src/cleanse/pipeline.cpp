#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "ultraclean/cleanse.hpp"
#include "ultraclean/error.hpp"

namespace ultraclean {

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : "na"; }

struct Metrics {
  double accuracy = 0.0;
  std::optional<double> asr;
};

Metrics measure(const ModelParams& model, const LabeledDataset& test_set,
                const TestTrigger* trigger, std::size_t threads) {
  Metrics m;
  m.accuracy = evaluate(model, test_set, threads);
  if (trigger) m.asr = compute_asr(model, test_set, *trigger, threads);
  return m;
}

ModelParams fit(const LabeledDataset& ds, const TrainConfig& cfg, std::uint64_t model_seed) {
  return train(init_model(architecture_for(ds), model_seed), ds, cfg);
}

}  // namespace

std::string CleanseReport::to_key_value() const {
  std::ostringstream out;
  out << "attack=" << attack << '\n'
      << "target_class=" << target_class << '\n'
      << "beta=" << fmt(config.beta) << '\n'
      << "scope=" << to_string(config.scope) << '\n'
      << "scope_class=" << config.scope_class << '\n'
      << "score_mode=" << to_string(config.mode) << '\n'
      << "nlm_patch_radius=" << config.nlm.patch_radius << '\n'
      << "nlm_search_radius=" << config.nlm.search_radius << '\n'
      << "nlm_sigma=" << fmt(config.nlm.sigma) << '\n'
      << "nlm_h=" << fmt(config.nlm.h) << '\n'
      << "median_radius=" << config.median.kernel_radius << '\n'
      << "learning_rate=" << fmt(train.learning_rate) << '\n'
      << "momentum=" << fmt(train.momentum) << '\n'
      << "weight_decay=" << fmt(train.weight_decay) << '\n'
      << "epochs=" << train.epochs << '\n'
      << "batch_size=" << train.batch_size << '\n'
      << "train_seed=" << train.seed << '\n'
      << "model_seed=" << model_seed << '\n'
      << "scope_size=" << scope_size << '\n'
      << "poisoned_count=" << poisoned_count << '\n'
      << "removed_count=" << removed_count << '\n'
      << "bdr=" << fmt(bdr) << '\n'
      << "acc_pre=" << fmt(acc_pre) << '\n'
      << "acc_post=" << fmt(acc_post) << '\n'
      << "asr_pre=" << fmt(asr_pre) << '\n'
      << "asr_post=" << fmt(asr_post) << '\n';
  return out.str();
}

UltraCleanResult run_ultraclean(const LabeledDataset& ds, const PoisonMask* mask,
                                const LabeledDataset& test_set, const TestTrigger* trigger,
                                const TrainConfig& train_cfg, const CleanseConfig& cleanse_cfg,
                                std::uint64_t model_seed) {
  cleanse_cfg.validate();
  train_cfg.validate();
  UltraCleanResult res;
  res.pre_model = fit(ds, train_cfg, model_seed);
  res.records = score_dataset(ds, res.pre_model, cleanse_cfg);
  res.removal = remove_top(ds, mask, res.records, cleanse_cfg);
  res.post_model = fit(res.removal.sanitized, train_cfg, model_seed);

  const Metrics pre = measure(res.pre_model, test_set, trigger, cleanse_cfg.threads);
  const Metrics post = measure(res.post_model, test_set, trigger, cleanse_cfg.threads);

  CleanseReport& r = res.report;
  r.config = cleanse_cfg;
  r.train = train_cfg;
  r.model_seed = model_seed;
  r.scope_size = res.removal.scope_size;
  r.removed_count = res.removal.removed.size();
  r.acc_pre = pre.accuracy;
  r.acc_post = post.accuracy;
  r.asr_pre = pre.asr;
  r.asr_post = post.asr;
  if (mask) {
    r.attack = mask->attack_name;
    r.target_class = mask->target_class;
    r.poisoned_count = mask->flagged_count();
    if (r.poisoned_count > 0) r.bdr = compute_bdr(res.removal.removed, *mask);
  } else {
    r.attack = "none";
  }
  return res;
}

std::vector<SweepRow> sweep_beta(const LabeledDataset& ds, const PoisonMask* mask,
                                 const LabeledDataset& test_set, const TestTrigger* trigger,
                                 const TrainConfig& train_cfg, const CleanseConfig& cleanse_cfg,
                                 std::uint64_t model_seed, const std::vector<double>& betas,
                                 const ModelParams* pre_model) {
  const ModelParams pre = pre_model ? *pre_model : fit(ds, train_cfg, model_seed);
  const auto records = score_dataset(ds, pre, cleanse_cfg);
  std::vector<SweepRow> rows;
  for (double beta : betas) {
    CleanseConfig cfg = cleanse_cfg;
    cfg.beta = beta;
    const Removal removal = remove_top(ds, mask, records, cfg);
    const ModelParams post = fit(removal.sanitized, train_cfg, model_seed);
    const Metrics m = measure(post, test_set, trigger, cfg.threads);
    SweepRow row;
    row.beta = beta;
    row.removed_count = removal.removed.size();
    if (mask && mask->flagged_count() > 0) row.bdr = compute_bdr(removal.removed, *mask);
    row.asr_post = m.asr;
    row.acc_post = m.accuracy;
    rows.push_back(row);
  }
  return rows;
}

void write_score_csv(const std::vector<SusceptibilityRecord>& records, const LabeledDataset& ds,
                     const PoisonMask* mask, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << "index,score,label,flagged\n";
  for (const auto& r : records) {
    const bool flagged = mask && mask->flagged(r.index);
    out << r.index << ',' << fmt(r.score) << ',' << ds.labels.at(r.index) << ','
        << (flagged ? 1 : 0) << '\n';
  }
  if (!out) throw Error("write failed for " + path.string());
}

std::vector<ScoreRow> read_score_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "index,score,label,flagged") {
    throw FormatError(FormatError::Kind::BadMagic, "score table header mismatch in " + path.string());
  }
  std::vector<ScoreRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string a, b, c, d;
    if (!std::getline(fields, a, ',') || !std::getline(fields, b, ',') ||
        !std::getline(fields, c, ',') || !std::getline(fields, d)) {
      throw FormatError(FormatError::Kind::Corrupt, "malformed score row at line " + std::to_string(lineno));
    }
    try {
      rows.push_back({std::stoul(a), std::stod(b), static_cast<ClassIndex>(std::stoul(c)), d == "1"});
    } catch (const std::exception&) {
      throw FormatError(FormatError::Kind::Corrupt, "malformed score row at line " + std::to_string(lineno));
    }
  }
  return rows;
}

}  // namespace ultraclean
