#include "ultraclean/cli/commands.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>

#include "ultraclean/cleanse.hpp"
#include "ultraclean/cli/config.hpp"
#include "ultraclean/error.hpp"
#include "ultraclean/parallel.hpp"
#include "ultraclean/simd.hpp"

namespace ultraclean::cli {

namespace {

namespace fs = std::filesystem;

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw Error("cannot write " + path.string());
}

fs::path ensure_out(const RunConfig& cfg) {
  fs::create_directories(cfg.out);
  return cfg.out;
}

fs::path output_or(const RunConfig& cfg, const std::string& fallback) {
  if (!cfg.output.empty()) {
    if (cfg.output.has_parent_path()) fs::create_directories(cfg.output.parent_path());
    return cfg.output;
  }
  return ensure_out(cfg) / fallback;
}

bool synthetic_source(const RunConfig& cfg) { return cfg.dataset.empty() && cfg.cifar.empty(); }

DatasetFile load_train(const RunConfig& cfg) {
  if (!cfg.dataset.empty()) return load_dataset(cfg.dataset);
  if (!cfg.cifar.empty()) return {import_cifar10(cfg.cifar), std::nullopt};
  return {generate_synthetic(cfg.data_seed(), cfg.synthetic_per_class, cfg.synthetic_classes,
                             cfg.synthetic_spec()),
          std::nullopt};
}

LabeledDataset load_test(const RunConfig& cfg) {
  if (!cfg.test_dataset.empty()) return load_dataset(cfg.test_dataset).dataset;
  if (!synthetic_source(cfg)) throw UsageError("--test-dataset is required with a file dataset");
  return generate_synthetic(cfg.test_seed(), cfg.synthetic_test_per_class, cfg.synthetic_classes,
                            cfg.synthetic_spec());
}

ModelParams load_model_for(const RunConfig& cfg, const LabeledDataset& ds) {
  if (cfg.model.empty()) throw UsageError("--model is required");
  return load_params(cfg.model, architecture_for(ds));
}

// The optimized Trojan trigger is stored as a two-image UCDS file: the
// pattern, then the mask replicated over the channels. Labels hold the unit.
void save_trojan(const TrojanTrigger& t, std::size_t num_classes, const fs::path& path) {
  LabeledDataset ds;
  ds.num_classes = num_classes;
  Image mask(t.pattern.height(), t.pattern.width(), t.pattern.channels());
  for (std::size_t y = 0; y < mask.height(); ++y) {
    for (std::size_t x = 0; x < mask.width(); ++x) {
      for (std::size_t c = 0; c < mask.channels(); ++c) mask.at(y, x, c) = t.mask.at(y, x, 0);
    }
  }
  ds.images = {t.pattern, std::move(mask)};
  ds.labels = {t.unit, t.unit};
  save_dataset(ds, nullptr, path);
}

TrojanTrigger load_trojan(const fs::path& path, double transparency) {
  const LabeledDataset ds = load_dataset(path).dataset;
  if (ds.size() != 2 || ds.labels[0] != ds.labels[1]) {
    throw FormatError(FormatError::Kind::Corrupt, path.string() + ": not a trojan trigger file");
  }
  TrojanTrigger t;
  t.unit = ds.labels[0];
  t.pattern = ds.images[0];
  t.mask = Image(ds.images[1].height(), ds.images[1].width(), 1);
  for (std::size_t y = 0; y < t.mask.height(); ++y) {
    for (std::size_t x = 0; x < t.mask.width(); ++x) t.mask.at(y, x, 0) = ds.images[1].at(y, x, 0);
  }
  t.transparency = transparency;
  return t;
}

// Data, mask and test trigger for the pipeline commands. A dataset file that
// already carries a mask is used as is; otherwise a configured attack is
// applied here, training a surrogate model when one is needed and not given.
struct Prepared {
  LabeledDataset train;
  std::optional<PoisonMask> mask;
  LabeledDataset test;
  std::optional<PoisonPlan> plan;
  std::optional<TrojanTrigger> trojan;
  std::optional<TestTrigger> trigger;
};

Prepared prepare(RunConfig cfg) {
  Prepared p;
  DatasetFile file = load_train(cfg);
  p.train = std::move(file.dataset);
  p.test = load_test(cfg);
  if (file.mask && !cfg.has_attack()) {
    cfg.attack = file.mask->attack_name;
    cfg.target = file.mask->target_class;
  }
  if (!cfg.has_attack()) return p;

  p.plan = cfg.poison_plan(p.train.images.front().channels());
  if (file.mask) {
    p.mask = std::move(file.mask);
    if (p.plan->attack == AttackKind::Trojan) {
      if (cfg.trigger_file.empty()) throw UsageError("--trigger-file is required for trojan data");
      p.trojan = load_trojan(cfg.trigger_file, cfg.transparency);
    }
  } else {
    std::optional<ModelParams> model;
    if (needs_model(p.plan->attack)) {
      if (!cfg.model.empty()) {
        model = load_model_for(cfg, p.train);
      } else {
        TrainConfig tc = cfg.train_config();
        tc.seed = cfg.surrogate_seed();
        model = train(init_model(architecture_for(p.train), cfg.surrogate_seed()), p.train, tc);
      }
    }
    PoisonedDataset poisoned = build_poisoned_dataset(p.train, *p.plan, model ? &*model : nullptr);
    p.train = std::move(poisoned.dataset);
    p.mask = std::move(poisoned.mask);
    p.trojan = std::move(poisoned.trojan);
  }
  p.trigger = make_test_trigger(*p.plan, p.test, p.trojan);
  return p;
}

int cmd_poison(const RunConfig& cfg) {
  if (!cfg.has_attack()) throw UsageError("--attack is required");
  const LabeledDataset ds = load_train(cfg).dataset;
  const PoisonPlan plan = cfg.poison_plan(ds.images.front().channels());
  std::optional<ModelParams> model;
  if (needs_model(plan.attack)) {
    if (cfg.model.empty()) {
      throw UsageError("--attack " + cfg.attack + " requires --model <checkpoint>");
    }
    model = load_model_for(cfg, ds);
  }
  const PoisonedDataset out = build_poisoned_dataset(ds, plan, model ? &*model : nullptr);
  const fs::path path = output_or(cfg, "poisoned.ucds");
  save_dataset(out.dataset, &out.mask, path);
  if (out.trojan) {
    save_trojan(*out.trojan, out.dataset.num_classes, path.parent_path() / "trojan_trigger.ucds");
  }
  std::cout << "poisoned_count=" << out.mask.flagged_count() << '\n'
            << "target_class=" << out.mask.target_class << '\n'
            << "output=" << path.string() << '\n';
  return kSuccess;
}

int cmd_train(const RunConfig& cfg) {
  const LabeledDataset ds = load_train(cfg).dataset;
  TrainLog log;
  const ModelParams model =
      train(init_model(architecture_for(ds), cfg.model_seed()), ds, cfg.train_config(), &log);
  const fs::path path = output_or(cfg, "model.ucmp");
  save_params(model, path);
  for (std::size_t e = 0; e < log.epoch_loss.size(); ++e) {
    std::cout << "epoch=" << e + 1 << " loss=" << fmt(log.epoch_loss[e]) << '\n';
  }
  std::cout << "final_accuracy=" << fmt(log.final_accuracy) << '\n'
            << "output=" << path.string() << '\n';
  return kSuccess;
}

int cmd_run(const RunConfig& cfg) {
  const Prepared p = prepare(cfg);
  const UltraCleanResult res =
      run_ultraclean(p.train, p.mask ? &*p.mask : nullptr, p.test, p.trigger ? &*p.trigger : nullptr,
                     cfg.train_config(), cfg.cleanse_config(), cfg.model_seed());
  const fs::path dir = ensure_out(cfg);
  write_text(dir / "report.txt", res.report.to_key_value());
  save_dataset(res.removal.sanitized, res.removal.mask ? &*res.removal.mask : nullptr,
               dir / "sanitized.ucds");
  save_params(res.pre_model, dir / "model_pre.ucmp");
  save_params(res.post_model, dir / "model_post.ucmp");
  write_score_csv(res.records, p.train, p.mask ? &*p.mask : nullptr, dir / "scores.csv");
  if (cfg.test_dataset.empty()) save_dataset(p.test, nullptr, dir / "test.ucds");
  if (p.trojan) save_trojan(*p.trojan, p.train.num_classes, dir / "trojan_trigger.ucds");
  std::cout << res.report.to_key_value();
  return kSuccess;
}

int cmd_eval(const RunConfig& cfg) {
  if (cfg.dataset.empty()) throw UsageError("--dataset is required");
  const LabeledDataset ds = load_dataset(cfg.dataset).dataset;
  const ModelParams model = load_model_for(cfg, ds);
  std::cout << "accuracy=" << fmt(evaluate(model, ds, cfg.threads)) << '\n';
  if (cfg.has_attack()) {
    const PoisonPlan plan = cfg.poison_plan(ds.images.front().channels());
    std::optional<TrojanTrigger> trojan;
    if (plan.attack == AttackKind::Trojan) {
      if (cfg.trigger_file.empty()) throw UsageError("--trigger-file is required for trojan");
      trojan = load_trojan(cfg.trigger_file, cfg.transparency);
    }
    const TestTrigger trig = make_test_trigger(plan, ds, trojan);
    std::cout << "asr=" << fmt(compute_asr(model, ds, trig, cfg.threads)) << '\n';
  }
  return kSuccess;
}

Image denoise_one(const Image& img, const RunConfig& cfg) {
  const CleanseConfig cc = cfg.cleanse_config();
  return cfg.method == "nlm" ? nlm_denoise(img, cc.nlm) : median_denoise(img, cc.median);
}

int cmd_denoise(const RunConfig& cfg) {
  if (cfg.dataset.empty()) throw UsageError("--dataset is required");
  DatasetFile file = load_dataset(cfg.dataset);
  if (cfg.index) {
    if (*cfg.index >= file.dataset.size()) throw UsageError("--index out of range");
    const fs::path path = output_or(cfg, "denoised_" + std::to_string(*cfg.index) + ".ppm");
    export_ppm(denoise_one(file.dataset.images[*cfg.index], cfg), path);
    std::cout << "output=" << path.string() << '\n';
    return kSuccess;
  }
  LabeledDataset& ds = file.dataset;
  parallel_for(ds.size(), cfg.threads,
               [&](std::size_t i) { ds.images[i] = denoise_one(ds.images[i], cfg); });
  const fs::path path = output_or(cfg, "denoised.ucds");
  save_dataset(ds, file.mask ? &*file.mask : nullptr, path);
  std::cout << "output=" << path.string() << '\n';
  return kSuccess;
}

int cmd_freqview(const RunConfig& cfg) {
  if (cfg.dataset.empty()) throw UsageError("--dataset is required");
  if (!cfg.index) throw UsageError("--index is required");
  const LabeledDataset ds = load_dataset(cfg.dataset).dataset;
  if (*cfg.index >= ds.size()) throw UsageError("--index out of range");
  const fs::path path = output_or(cfg, "freq_" + std::to_string(*cfg.index) + ".ppm");
  export_ppm(dft_log_magnitude(ds.images[*cfg.index]), path);
  std::cout << "output=" << path.string() << '\n';
  return kSuccess;
}

int cmd_sweep(const RunConfig& cfg) {
  const Prepared p = prepare(cfg);
  const std::vector<SweepRow> rows =
      sweep_beta(p.train, p.mask ? &*p.mask : nullptr, p.test, p.trigger ? &*p.trigger : nullptr,
                 cfg.train_config(), cfg.cleanse_config(), cfg.model_seed(), cfg.betas);
  std::string csv = "beta,removed_count,bdr,asr_post,acc_post\n";
  auto opt = [](const std::optional<double>& v) { return v ? fmt(*v) : std::string("na"); };
  for (const SweepRow& r : rows) {
    csv += fmt(r.beta) + ',' + std::to_string(r.removed_count) + ',' + opt(r.bdr) + ',' +
           opt(r.asr_post) + ',' + fmt(r.acc_post) + '\n';
  }
  const fs::path path = output_or(cfg, "sweep.csv");
  write_text(path, csv);
  std::cout << csv;
  return kSuccess;
}

std::string flag_name(std::string key) {
  std::replace(key.begin(), key.end(), '_', '-');
  return "--" + key;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"UltraClean backdoor poisoning, denoising-based cleansing and evaluation"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  app.add_option("--config", config_path, "key=value configuration file");
  std::map<std::string, std::string> values;
  std::map<std::string, CLI::Option*> options;
  for (const std::string& key : RunConfig::keys()) {
    options[key] = app.add_option(flag_name(key), values[key]);
  }

  using Handler = int (*)(const RunConfig&);
  const std::vector<std::tuple<const char*, const char*, Handler>> commands = {
      {"poison", "write a poisoned dataset and its mask", cmd_poison},
      {"train", "train a model and write its checkpoint", cmd_train},
      {"run", "poison, score, remove, retrain and report", cmd_run},
      {"eval", "print accuracy and optionally attack success", cmd_eval},
      {"denoise", "denoise one image (PPM) or a whole dataset (UCDS)", cmd_denoise},
      {"freqview", "write the log-magnitude spectrum of one image", cmd_freqview},
      {"sweep-beta", "CSV of removal, BDR, ASR and accuracy per beta", cmd_sweep},
  };
  for (const auto& [name, help, _] : commands) app.add_subcommand(name, help);

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kSuccess : kUsageError;
  }

  try {
    RunConfig cfg;
    if (!config_path.empty()) cfg.load_file(config_path);
    for (const auto& [key, opt] : options) {
      if (opt->count() > 0) cfg.set(key, values[key]);
    }
    simd::set_level(simd::parse_level(cfg.simd));
    for (const auto& [name, help, handler] : commands) {
      if (app.got_subcommand(name)) return handler(cfg);
    }
    return kUsageError;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsageError;
  } catch (const FormatError& e) {
    std::cerr << "format error: " << e.what() << '\n';
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeFailure;
  }
}

}  // namespace ultraclean::cli
