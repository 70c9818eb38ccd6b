#include "ultraclean/cli/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "ultraclean/error.hpp"
#include "ultraclean/simd.hpp"

namespace ultraclean::cli {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void bad(const std::string& key, const std::string& value, const std::string& why) {
  throw UsageError("invalid value '" + value + "' for " + key + ": " + why);
}

double to_double(const std::string& key, const std::string& v, double lo, double hi) {
  double out = 0.0;
  const auto* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc{} || ptr != end || !std::isfinite(out)) bad(key, v, "expected a number");
  if (out < lo || out > hi) {
    std::ostringstream os;
    os << "must be in [" << lo << ", " << hi << "]";
    bad(key, v, os.str());
  }
  return out;
}

std::uint64_t to_uint(const std::string& key, const std::string& v, std::uint64_t lo,
                      std::uint64_t hi) {
  std::uint64_t out = 0;
  const auto* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc{} || ptr != end) bad(key, v, "expected a non-negative integer");
  if (out < lo || out > hi) {
    bad(key, v, "must be in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
  }
  return out;
}

std::string one_of(const std::string& key, const std::string& v,
                   std::initializer_list<const char*> allowed) {
  for (const char* a : allowed) {
    if (v == a) return v;
  }
  std::string list;
  for (const char* a : allowed) list += (list.empty() ? "" : "|") + std::string(a);
  bad(key, v, "expected " + list);
}

constexpr std::uint64_t kMaxU = 1ull << 40;
constexpr std::uint64_t kMaxClass = 65535;

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    auto path = [](std::filesystem::path RunConfig::*m) {
      return [m](RunConfig& c, const std::string&, const std::string& v) { c.*m = v; };
    };
    auto size = [](std::size_t RunConfig::*m, std::uint64_t lo, std::uint64_t hi) {
      return [m, lo, hi](RunConfig& c, const std::string& k, const std::string& v) {
        c.*m = static_cast<std::size_t>(to_uint(k, v, lo, hi));
      };
    };
    auto real = [](double RunConfig::*m, double lo, double hi) {
      return [m, lo, hi](RunConfig& c, const std::string& k, const std::string& v) {
        c.*m = to_double(k, v, lo, hi);
      };
    };
    auto integer = [](int RunConfig::*m, int lo, int hi) {
      return [m, lo, hi](RunConfig& c, const std::string& k, const std::string& v) {
        c.*m = static_cast<int>(to_uint(k, v, static_cast<std::uint64_t>(lo),
                                        static_cast<std::uint64_t>(hi)));
      };
    };

    t["dataset"] = path(&RunConfig::dataset);
    t["cifar"] = path(&RunConfig::cifar);
    t["test_dataset"] = path(&RunConfig::test_dataset);
    t["synthetic_classes"] = size(&RunConfig::synthetic_classes, 2, 256);
    t["synthetic_per_class"] = size(&RunConfig::synthetic_per_class, 1, 1000000);
    t["synthetic_test_per_class"] = size(&RunConfig::synthetic_test_per_class, 1, 1000000);
    t["synthetic_size"] = size(&RunConfig::synthetic_size, 16, 512);
    t["synthetic_clutter"] = real(&RunConfig::synthetic_clutter, 0.0, 1.0);
    t["synthetic_scale_min"] = real(&RunConfig::synthetic_scale_min, 0.01, 0.38);
    t["synthetic_contrast_min"] = real(&RunConfig::synthetic_contrast_min, 0.0, 0.9);
    t["synthetic_noise"] = real(&RunConfig::synthetic_noise, 0.0, 1.0);

    t["attack"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.attack = one_of(k, v, {"none", "badnets", "blended", "trojan", "sig", "lcbd", "htbd"});
    };
    t["target"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.target = static_cast<ClassIndex>(to_uint(k, v, 0, kMaxClass));
    };
    t["fraction"] = real(&RunConfig::fraction, 0.0, 1.0);
    t["count"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.count = static_cast<std::size_t>(to_uint(k, v, 0, kMaxU));
    };
    t["trigger"] = [](RunConfig& c, const std::string&, const std::string& v) { c.trigger = v; };
    t["trigger_size"] = size(&RunConfig::trigger_size, 1, 512);
    t["trigger_margin"] = size(&RunConfig::trigger_margin, 0, 512);
    t["trigger_corner"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      using C = Placement::Corner;
      const std::string s = one_of(k, v, {"top-left", "top-right", "bottom-left", "bottom-right"});
      c.trigger_corner = s == "top-left" ? C::TopLeft
                         : s == "top-right" ? C::TopRight
                         : s == "bottom-left" ? C::BottomLeft
                                              : C::BottomRight;
    };
    t["alpha"] = real(&RunConfig::alpha, 0.0, 1.0);
    t["blend_seed"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.blend_seed = to_uint(k, v, 0, ~0ull);
    };
    t["sig_delta"] = real(&RunConfig::sig_delta, 0.0, 255.0);
    t["sig_test_delta"] = real(&RunConfig::sig_test_delta, 0.0, 255.0);
    t["sig_freq"] = real(&RunConfig::sig_freq, 0.0, 1e6);
    t["norm"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.norm = one_of(k, v, {"l2", "linf"});
    };
    t["epsilon"] = real(&RunConfig::epsilon, 0.0, 1e9);
    t["pgd_steps"] = size(&RunConfig::pgd_steps, 1, 1000000);
    t["step_size"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.step_size = to_double(k, v, 0.0, 1e9);
    };
    t["transparency"] = real(&RunConfig::transparency, 0.0, 1.0);
    t["trojan_steps"] = size(&RunConfig::trojan_steps, 0, 1000000);
    t["trojan_lr"] = real(&RunConfig::trojan_lr, 0.0, 1e6);
    t["htbd_epsilon"] = real(&RunConfig::htbd_epsilon, 0.0, 255.0);
    t["htbd_steps"] = size(&RunConfig::htbd_steps, 0, 1000000);
    t["htbd_step"] = real(&RunConfig::htbd_step, 0.0, 255.0);
    t["source_class"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.source_class = static_cast<ClassIndex>(to_uint(k, v, 0, kMaxClass));
    };
    t["model"] = path(&RunConfig::model);
    t["trigger_file"] = path(&RunConfig::trigger_file);

    t["lr"] = real(&RunConfig::lr, 0.0, 100.0);
    t["momentum"] = real(&RunConfig::momentum, 0.0, 0.999999);
    t["weight_decay"] = real(&RunConfig::weight_decay, 0.0, 1.0);
    t["epochs"] = size(&RunConfig::epochs, 0, 100000);
    t["batch_size"] = size(&RunConfig::batch_size, 1, 1000000);

    t["beta"] = real(&RunConfig::beta, 0.0, 1.0);
    t["scope"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.scope = one_of(k, v, {"whole", "class"});
    };
    t["scope_class"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.scope_class = static_cast<ClassIndex>(to_uint(k, v, 0, kMaxClass));
    };
    t["score_mode"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.score_mode = one_of(k, v, {"both", "median-only", "mean-only"});
    };
    t["nlm_patch_radius"] = integer(&RunConfig::nlm_patch_radius, 0, 64);
    t["nlm_search_radius"] = integer(&RunConfig::nlm_search_radius, 0, 256);
    t["nlm_sigma"] = real(&RunConfig::nlm_sigma, 0.0, 255.0);
    t["nlm_h"] = real(&RunConfig::nlm_h, 1e-6, 1e6);
    t["median_radius"] = integer(&RunConfig::median_radius, 1, 64);
    t["betas"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      std::vector<double> out;
      std::stringstream ss(v);
      std::string item;
      while (std::getline(ss, item, ',')) out.push_back(to_double(k, trim(item), 0.0, 1.0));
      if (out.empty()) bad(k, v, "expected a comma-separated list");
      c.betas = std::move(out);
    };

    t["out"] = path(&RunConfig::out);
    t["seed"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.seed = to_uint(k, v, 0, ~0ull);
    };
    t["threads"] = size(&RunConfig::threads, 1, 1024);
    t["simd"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.simd = one_of(k, v, {"auto", "scalar", "avx2"});
    };
    t["index"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.index = static_cast<std::size_t>(to_uint(k, v, 0, kMaxU));
    };
    t["output"] = path(&RunConfig::output);
    t["method"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.method = one_of(k, v, {"nlm", "median"});
    };
    return t;
  }();
  return table;
}

}  // namespace

void RunConfig::set(const std::string& raw_key, const std::string& raw_value) {
  std::string key = trim(raw_key);
  std::replace(key.begin(), key.end(), '-', '_');
  const auto it = setters().find(key);
  if (it == setters().end()) throw UsageError("unknown configuration key '" + raw_key + "'");
  it->second(*this, key, trim(raw_value));
}

void RunConfig::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file " + path.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line.substr(0, line.find('#')));
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw UsageError(path.string() + ":" + std::to_string(lineno) + ": expected key=value");
    }
    try {
      set(t.substr(0, eq), t.substr(eq + 1));
    } catch (const UsageError& e) {
      throw UsageError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> k = [] {
    std::vector<std::string> out;
    for (const auto& [name, _] : setters()) out.push_back(name);
    return out;
  }();
  return k;
}

SyntheticSpec RunConfig::synthetic_spec() const {
  SyntheticSpec spec{synthetic_size, synthetic_clutter, synthetic_scale_min,
                     synthetic_contrast_min, synthetic_noise};
  spec.validate();
  return spec;
}

TrainConfig RunConfig::train_config() const {
  TrainConfig t;
  t.learning_rate = lr;
  t.momentum = momentum;
  t.weight_decay = weight_decay;
  t.epochs = epochs;
  t.batch_size = batch_size;
  t.seed = train_seed();
  t.validate();
  return t;
}

CleanseConfig RunConfig::cleanse_config() const {
  CleanseConfig c;
  c.beta = beta;
  c.scope = parse_scope(scope);
  c.scope_class = scope_class.value_or(target);
  c.nlm.patch_radius = nlm_patch_radius;
  c.nlm.search_radius = nlm_search_radius;
  c.nlm.sigma = nlm_sigma;
  c.nlm.h = nlm_h;
  c.median.kernel_radius = median_radius;
  c.mode = parse_score_mode(score_mode);
  c.threads = threads;
  c.validate();
  return c;
}

TriggerSpec RunConfig::trigger_spec(std::size_t channels) const {
  const Placement place{trigger_corner, trigger_margin};
  if (trigger == "checkerboard") return checkerboard_trigger(trigger_size, channels, place);
  if (trigger == "solid") return solid_trigger(trigger_size, channels, 1.0f, place);
  Image img = read_ppm(trigger);
  if (channels == 1) {
    Image gray(img.height(), img.width(), 1);
    for (std::size_t y = 0; y < img.height(); ++y) {
      for (std::size_t x = 0; x < img.width(); ++x) {
        gray.at(y, x, 0) = (img.at(y, x, 0) + img.at(y, x, 1) + img.at(y, x, 2)) / 3.0f;
      }
    }
    img = std::move(gray);
  }
  return trigger_from_image(std::move(img), place);
}

PoisonPlan RunConfig::poison_plan(std::size_t channels) const {
  if (!has_attack()) throw UsageError("no attack configured");
  PoisonPlan plan;
  plan.attack = parse_attack(attack);
  plan.target_class = target;
  plan.fraction = fraction;
  plan.count = count;
  plan.seed = poison_seed();
  AttackParams& p = plan.params;
  p.patch = trigger_spec(channels);
  p.blend_seed = blend_seed;
  p.alpha = alpha;
  p.sig_train = SigSpec{sig_delta, sig_freq};
  p.sig_test = SigSpec{sig_test_delta, sig_freq};
  const Norm n = norm == "l2" ? Norm::L2 : Norm::Linf;
  p.lcbd = AttackBudget::pgd(n, epsilon, pgd_steps);
  if (step_size) p.lcbd.step_size = *step_size;
  p.transparency = transparency;
  p.trojan_steps = trojan_steps;
  p.trojan_learning_rate = trojan_lr;
  p.htbd = AttackBudget{htbd_epsilon, Norm::Linf, htbd_steps, htbd_step};
  p.source_class = source_class;
  return plan;
}

}  // namespace ultraclean::cli
