// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits nonzero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "cli_invoke.hpp"
#include "reference_net.hpp"
#include "support.hpp"
#include "ultraclean/attacks.hpp"
#include "ultraclean/cleanse.hpp"
#include "ultraclean/dataset.hpp"
#include "ultraclean/denoise.hpp"
#include "ultraclean/error.hpp"
#include "ultraclean/model.hpp"

namespace fs = std::filesystem;
using namespace ultraclean;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string slurp(const fs::path& p) {
  const auto b = testing::read_bytes(p);
  return {b.begin(), b.end()};
}

std::map<std::string, std::string> report_of(const fs::path& dir) {
  return testing::key_values(slurp(dir / "report.txt"));
}

double num(const std::map<std::string, std::string>& kv, const std::string& key) {
  const auto it = kv.find(key);
  if (it == kv.end() || it->second == "na") throw Error("report lacks a value for " + key);
  return std::stod(it->second);
}

void must_succeed(const std::vector<std::string>& args) {
  const testing::Outcome o = testing::invoke(args);
  if (o.code != 0) {
    std::string joined;
    for (const auto& a : args) joined += a + " ";
    throw Error("command failed (" + std::to_string(o.code) + "): " + joined + "\n" + o.err);
  }
}

// Shared working area. Later criteria reuse the criterion 3 outputs.
struct Workspace {
  testing::TempDir root{"acceptance"};
  fs::path dir(const std::string& name) const { return root.path() / name; }
};

const std::vector<std::string> kBadnetsArgs{"--attack", "badnets", "--fraction", "0.05",
                                            "--beta", "0.3", "--seed", "0"};

// -------------------------------------------------------------------------

Verdict c1_denoiser_oracles() {
  const auto start = std::chrono::steady_clock::now();
  Rng rng(1001);
  double worst = 0.0;
  bool median_exact = true;
  for (int i = 0; i < 50; ++i) {
    const Image img = testing::random_image(rng, 16, 16, 3);
    worst = std::max(worst, testing::max_abs_diff(nlm_denoise(img), testing::nlm_oracle(img)));
    median_exact = median_exact && bitwise_equal(median_denoise(img), testing::median_oracle(img));
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {worst <= 1e-6 && median_exact && secs < 30.0,
          "nlm max diff " + fmt("%.3g", worst) + ", median bitwise " +
              (median_exact ? "yes" : "no") + ", " + fmt("%.1f", secs) + " s"};
}

Verdict c2_gradients() {
  const auto start = std::chrono::steady_clock::now();
  double worst = 0.0;
  int checked = 0;
  for (std::uint64_t m = 0; m < 5; ++m) {
    const Architecture arch{16, 16, 3, 10};
    ModelParams p = init_model(arch, 2000 + m);
    Rng rng(3000 + m);
    for (auto* b : {&p.conv1_b, &p.conv2_b, &p.dense_b}) {
      for (float& v : *b) v = static_cast<float>(rng.uniform(-0.1, 0.1));
    }
    Image img = testing::random_image(rng, 16, 16, 3);
    const auto label = static_cast<ClassIndex>(rng.below(10));
    const Image input_grad = input_gradient(p, img, objective::LabelLoss{label}).gradient;
    ParamGradients grads(p);
    grads.zero();
    accumulate_loss_gradient(p, img, label, grads);

    struct Eval {
      double loss;
      std::vector<std::int64_t> pattern;
    };
    auto eval = [&] {
      const auto r = testing::reference_forward(p, img);
      return Eval{testing::reference_cross_entropy(r.logits, label), r.pattern};
    };
    // Central difference with step 1e-3; coordinates whose step crosses a
    // ReLU or pooling switch are not differentiable there and are redrawn.
    auto difference = [&](float& slot) -> std::optional<double> {
      const float original = slot;
      const auto base = eval();
      slot = original + 1e-3f;
      const double hi = slot;
      const auto plus = eval();
      slot = original - 1e-3f;
      const double lo = slot;
      const auto minus = eval();
      slot = original;
      if (plus.pattern != base.pattern || minus.pattern != base.pattern) return std::nullopt;
      return (plus.loss - minus.loss) / (hi - lo);
    };
    for (int n = 0; n < 25;) {
      const std::size_t i = rng.below(img.size());
      const auto numeric = difference(img.data()[i]);
      if (!numeric) continue;
      worst = std::max(worst, testing::relative_error(input_grad.data()[i], *numeric));
      ++n;
      ++checked;
    }
    for (int n = 0; n < 25;) {
      const std::size_t t = rng.below(kTensorCount);
      const std::size_t j = rng.below(p.tensors()[t].size());
      const auto numeric = difference(p.tensors()[t][j]);
      if (!numeric) continue;
      worst = std::max(worst, testing::relative_error(grads.tensors[t][j], *numeric));
      ++n;
      ++checked;
    }
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {worst < 1e-3 && secs < 60.0,
          std::to_string(checked) + " coordinates, max rel err " + fmt("%.3g", worst) + ", " +
              fmt("%.1f", secs) + " s"};
}

Verdict c3_badnets(const Workspace& ws) {
  const auto start = std::chrono::steady_clock::now();
  std::vector<std::string> args{"run", "--out", ws.dir("c3").string()};
  args.insert(args.end(), kBadnetsArgs.begin(), kBadnetsArgs.end());
  must_succeed(args);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const auto r = report_of(ws.dir("c3"));
  const double asr_pre = num(r, "asr_pre"), asr_post = num(r, "asr_post"), bdr = num(r, "bdr");
  const double drop = 100.0 * (num(r, "acc_pre") - num(r, "acc_post"));
  return {asr_pre >= 0.8 && bdr >= 0.7 && asr_post <= 0.15 && drop <= 5.0 && secs < 600.0,
          "asr " + fmt("%.3f", asr_pre) + " -> " + fmt("%.3f", asr_post) + ", bdr " +
              fmt("%.3f", bdr) + ", acc " + r.at("acc_pre") + " -> " + r.at("acc_post") + ", " +
              fmt("%.0f", secs) + " s"};
}

Verdict c4_sig(const Workspace& ws) {
  const auto start = std::chrono::steady_clock::now();
  must_succeed({"run", "--out", ws.dir("c4").string(), "--attack", "sig", "--fraction", "0.3",
                "--scope", "class", "--beta", "0.3", "--synthetic-size", "24",
                "--synthetic-clutter", "0.65", "--synthetic-scale-min", "0.24",
                "--synthetic-contrast-min", "0.55"});
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const auto r = report_of(ws.dir("c4"));
  const double asr_pre = num(r, "asr_pre"), asr_post = num(r, "asr_post"), bdr = num(r, "bdr");
  return {asr_post <= 0.5 * asr_pre && bdr >= 0.35 && secs < 600.0,
          "asr " + fmt("%.3f", asr_pre) + " -> " + fmt("%.3f", asr_post) + ", bdr " +
              fmt("%.3f", bdr) + ", " + fmt("%.0f", secs) + " s"};
}

Verdict c5_separation(const Workspace& ws) {
  const auto rows = read_score_csv(ws.dir("c3") / "scores.csv");
  std::vector<double> scores, poisoned, benign;
  std::vector<std::uint8_t> flags;
  for (const auto& row : rows) {
    scores.push_back(row.score);
    flags.push_back(row.flagged ? 1 : 0);
    (row.flagged ? poisoned : benign).push_back(row.score);
  }
  auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  };
  const double auc = detection_auc(scores, flags);
  const double mp = median(poisoned), mb = median(benign);
  return {auc >= 0.85 && mp > mb, "auc " + fmt("%.3f", auc) + ", median s poisoned " +
                                      fmt("%.4f", mp) + " vs benign " + fmt("%.4f", mb)};
}

Verdict c6_clean_safety(const Workspace& ws) {
  must_succeed({"run", "--out", ws.dir("c6").string(), "--beta", "0.3", "--seed", "0"});
  const auto r = report_of(ws.dir("c6"));
  const double change = 100.0 * std::abs(num(r, "acc_post") - num(r, "acc_pre"));

  // Attack success of the sanitized clean model under every trigger family,
  // aimed at the run's target class. Other targets are reported only: a
  // large test-time perturbation can nudge a few clean predictions toward
  // some class even for a model that never saw a trigger.
  const LabeledDataset test = load_dataset(ws.dir("c6") / "test.ucds").dataset;
  const ModelParams model = load_params(ws.dir("c6") / "model_post.ucmp");
  const auto target = static_cast<ClassIndex>(num(r, "target_class") < 0 ? 0 : num(r, "target_class"));
  auto asr_of = [&](AttackKind kind, ClassIndex t) {
    PoisonPlan plan;
    plan.attack = kind;
    plan.target_class = t;
    return compute_asr(model, test, make_test_trigger(plan, test));
  };
  double worst = 0.0, worst_any = 0.0;
  std::string worst_any_name;
  for (AttackKind kind : {AttackKind::BadNets, AttackKind::Blended, AttackKind::Sig}) {
    worst = std::max(worst, asr_of(kind, target));
    for (ClassIndex t = 0; t < test.num_classes; ++t) {
      const double asr = asr_of(kind, t);
      if (asr > worst_any) {
        worst_any = asr;
        worst_any_name = std::string(to_string(kind)) + "/" + std::to_string(t);
      }
    }
  }
  return {change <= 1.5 && worst <= 0.02,
          "acc " + r.at("acc_pre") + " -> " + r.at("acc_post") + " (" + fmt("%.2f", change) +
              " pts), max asr at target " + std::to_string(target) + " " + fmt("%.3f", worst) +
              " (any target: " + fmt("%.3f", worst_any) + ", " + worst_any_name + ")"};
}

Verdict c7_denoised_training(const Workspace& ws) {
  const fs::path dir = ws.dir("c7");
  fs::create_directories(dir);
  std::vector<std::string> poison{"poison", "--output", (dir / "poisoned.ucds").string()};
  poison.insert(poison.end(), kBadnetsArgs.begin(), kBadnetsArgs.end());
  must_succeed(poison);
  must_succeed({"denoise", "--method", "median", "--dataset", (dir / "poisoned.ucds").string(),
                "--output", (dir / "denoised.ucds").string()});
  must_succeed({"train", "--dataset", (dir / "denoised.ucds").string(), "--seed", "0", "--output",
                (dir / "model.ucmp").string()});
  const testing::Outcome e =
      testing::invoke({"eval", "--model", (dir / "model.ucmp").string(), "--dataset",
                       (ws.dir("c3") / "test.ucds").string(), "--attack", "badnets"});
  if (e.code != 0) throw Error("eval failed: " + e.err);
  const auto kv = testing::key_values(e.out);
  const double asr = num(kv, "asr");
  return {asr >= 0.5, "asr after median-denoised training " + fmt("%.3f", asr) + ", acc " +
                          kv.at("accuracy")};
}

Verdict c8_ablation(const Workspace& ws) {
  const fs::path dir = ws.dir("c8");
  fs::create_directories(dir);
  std::vector<std::string> sweep{"sweep-beta", "--output", (dir / "sweep.csv").string()};
  sweep.insert(sweep.end(), kBadnetsArgs.begin(), kBadnetsArgs.end());
  must_succeed(sweep);
  std::istringstream csv(slurp(dir / "sweep.csv"));
  std::string line;
  std::getline(csv, line);
  std::vector<double> betas, bdrs;
  while (std::getline(csv, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    betas.push_back(std::stod(cells.at(0)));
    bdrs.push_back(std::stod(cells.at(2)));
  }
  const bool grid = betas == std::vector<double>{0.0, 0.1, 0.2, 0.3};
  const bool monotone = std::is_sorted(bdrs.begin(), bdrs.end());

  std::string detail = "bdr by beta";
  for (double b : bdrs) detail += " " + fmt("%.3f", b);
  bool modes_ok = true;
  for (const std::string mode : {"median-only", "mean-only"}) {
    std::vector<std::string> run{"run", "--score-mode", mode, "--out", (dir / mode).string()};
    run.insert(run.end(), kBadnetsArgs.begin(), kBadnetsArgs.end());
    must_succeed(run);
    const auto r = report_of(dir / mode);
    const double bdr = num(r, "bdr");
    modes_ok = modes_ok && r.at("score_mode") == mode && bdr >= 0.0 && bdr <= 1.0;
    detail += ", " + mode + " bdr " + fmt("%.3f", bdr);
  }
  return {grid && monotone && modes_ok, detail};
}

Verdict c9_determinism(const Workspace& ws) {
  std::vector<std::string> args{"run", "--out", ws.dir("c9").string()};
  args.insert(args.end(), kBadnetsArgs.begin(), kBadnetsArgs.end());
  must_succeed(args);
  std::string differing;
  for (const char* name : {"scores.csv", "report.txt", "model_pre.ucmp", "model_post.ucmp",
                           "sanitized.ucds"}) {
    if (testing::read_bytes(ws.dir("c3") / name) != testing::read_bytes(ws.dir("c9") / name)) {
      differing += std::string(" ") + name;
    }
  }
  return {differing.empty(),
          differing.empty() ? "all artifacts byte-identical" : "differ:" + differing};
}

Verdict c10_removal() {
  Rng rng(5005);
  int mismatches = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.below(500);
    const double beta = rng.uniform01();
    std::vector<SusceptibilityRecord> recs(n);
    // Mix of quantized and continuous scores so ties are common.
    const bool coarse = trial % 2 == 0;
    for (std::size_t i = 0; i < n; ++i) {
      recs[i].index = i;
      recs[i].score = coarse ? static_cast<double>(rng.below(8)) * 0.5 : rng.uniform(0.0, 4.0);
    }
    LabeledDataset ds;
    ds.num_classes = 2;
    ds.images.assign(n, Image(1, 1, 1));
    ds.labels.assign(n, 0);
    CleanseConfig cfg;
    cfg.beta = beta;
    const Removal got = remove_top(ds, nullptr, recs, cfg);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return recs[a].score > recs[b].score; });
    const auto k = static_cast<std::size_t>(std::floor(beta * static_cast<double>(n)));
    order.resize(k);
    std::sort(order.begin(), order.end());
    if (got.removed != order || got.sanitized.size() != n - k) ++mismatches;
  }
  return {mismatches == 0, "1000 random (beta, n) pairs, " + std::to_string(mismatches) + " mismatches"};
}

}  // namespace

int main() {
  Workspace ws;
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
      {"denoiser oracle equivalence", c1_denoiser_oracles},
      {"gradient correctness", c2_gradients},
      {"BadNets defense", [&] { return c3_badnets(ws); }},
      {"SIG clean-label defense", [&] { return c4_sig(ws); }},
      {"susceptibility separation", [&] { return c5_separation(ws); }},
      {"clean-dataset safety", [&] { return c6_clean_safety(ws); }},
      {"denoised-training control", [&] { return c7_denoised_training(ws); }},
      {"ablation consistency", [&] { return c8_ablation(ws); }},
      {"determinism", [&] { return c9_determinism(ws); }},
      {"removal exactness", c10_removal},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    if (!v.pass) ++failures;
    std::printf("%s criterion %zu (%s): %s\n", v.pass ? "PASS" : "FAIL", i + 1,
                criteria[i].first.c_str(), v.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
