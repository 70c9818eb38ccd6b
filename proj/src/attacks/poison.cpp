#include <algorithm>
#include <cmath>
#include <string>

#include "ultraclean/attacks.hpp"
#include "ultraclean/error.hpp"
#include "ultraclean/rng.hpp"

namespace ultraclean {

std::string_view to_string(AttackKind kind) noexcept {
  switch (kind) {
    case AttackKind::BadNets: return "badnets";
    case AttackKind::Blended: return "blended";
    case AttackKind::Trojan: return "trojan";
    case AttackKind::Sig: return "sig";
    case AttackKind::Lcbd: return "lcbd";
    case AttackKind::Htbd: return "htbd";
  }
  return "unknown";
}

AttackKind parse_attack(std::string_view name) {
  for (AttackKind k : {AttackKind::BadNets, AttackKind::Blended, AttackKind::Trojan,
                       AttackKind::Sig, AttackKind::Lcbd, AttackKind::Htbd}) {
    if (name == to_string(k)) return k;
  }
  throw UsageError("unknown attack '" + std::string(name) +
                   "' (badnets|blended|trojan|sig|lcbd|htbd)");
}

bool is_dirty_label(AttackKind kind) noexcept {
  return kind == AttackKind::BadNets || kind == AttackKind::Blended || kind == AttackKind::Trojan;
}

bool needs_model(AttackKind kind) noexcept {
  return kind == AttackKind::Trojan || kind == AttackKind::Lcbd || kind == AttackKind::Htbd;
}

namespace {

Image blend_pattern_for(const AttackParams& params, const Image& like) {
  if (!params.blend_pattern.empty()) return params.blend_pattern;
  return random_pattern(like.height(), like.width(), like.channels(), params.blend_seed);
}

ClassIndex htbd_source(const PoisonPlan& plan, std::size_t num_classes) {
  const ClassIndex source = plan.params.source_class.value_or(
      static_cast<ClassIndex>((plan.target_class + 1) % num_classes));
  if (source >= num_classes || source == plan.target_class) {
    throw UsageError("HTBD source class must be a valid class other than the target");
  }
  return source;
}

std::size_t poison_count(const PoisonPlan& plan, std::size_t base) {
  if (plan.count) return *plan.count;
  if (!(plan.fraction > 0.0 && plan.fraction <= 1.0)) {
    throw UsageError("poison fraction must be in (0, 1]");
  }
  return static_cast<std::size_t>(std::floor(plan.fraction * static_cast<double>(base)));
}

// Uniform selection without replacement, returned in ascending index order.
std::vector<std::size_t> choose(std::vector<std::size_t> pool, std::size_t count,
                                std::uint64_t seed) {
  if (count > pool.size()) {
    throw UsageError("requested " + std::to_string(count) + " poisons but only " +
                     std::to_string(pool.size()) + " eligible samples exist");
  }
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(pool));
  pool.resize(count);
  std::sort(pool.begin(), pool.end());
  return pool;
}

}  // namespace

PoisonedDataset build_poisoned_dataset(const LabeledDataset& ds, const PoisonPlan& plan,
                                       const ModelParams* model) {
  ds.validate();
  if (ds.empty()) throw UsageError("cannot poison an empty dataset");
  if (plan.target_class >= ds.num_classes) throw UsageError("target class out of range");
  if (needs_model(plan.attack) && (model == nullptr || !model->trained)) {
    throw UsageError(std::string(to_string(plan.attack)) + " poisoning requires a trained model");
  }

  PoisonedDataset out;
  out.dataset = ds;
  out.mask.flags.assign(ds.size(), 0);
  out.mask.target_class = plan.target_class;
  out.mask.attack_name = std::string(to_string(plan.attack));
  const AttackParams& p = plan.params;
  const Image& like = ds.images.front();

  ClassIndex target = plan.target_class;
  if (plan.attack == AttackKind::Trojan) {
    const Image canvas(like.height(), like.width(), like.channels(), 0.5f);
    out.trojan = optimize_trojan_trigger(canvas, *model, p.patch, p.transparency, p.trojan_steps,
                                         p.trojan_learning_rate);
    target = out.trojan->unit;
    out.mask.target_class = target;
  }

  if (plan.dirty_label()) {
    std::vector<std::size_t> pool;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      if (ds.labels[i] != target) pool.push_back(i);
    }
    const auto victims = choose(std::move(pool), poison_count(plan, ds.size()), plan.seed);
    const Image blend_trigger =
        plan.attack == AttackKind::Blended ? blend_pattern_for(p, like) : Image{};
    for (std::size_t i : victims) {
      Image& img = out.dataset.images[i];
      switch (plan.attack) {
        case AttackKind::BadNets: img = apply_patch(img, p.patch); break;
        case AttackKind::Blended: img = blend(img, blend_trigger, p.alpha); break;
        case AttackKind::Trojan: img = apply_trojan(img, *out.trojan); break;
        default: break;
      }
      out.dataset.labels[i] = target;
      out.mask.flags[i] = 1;
    }
    return out;
  }

  std::vector<std::size_t> target_pool = ds.indices_of_class(target);
  const auto victims = choose(target_pool, poison_count(plan, target_pool.size()), plan.seed);

  if (plan.attack == AttackKind::Htbd) {
    const ClassIndex source = htbd_source(plan, ds.num_classes);
    const auto sources = ds.indices_of_class(source);
    if (sources.empty()) throw UsageError("HTBD source class has no samples");
    Rng rng(plan.seed ^ 0x5bd1e995ULL);
    for (std::size_t i : victims) {
      const std::size_t src = sources[static_cast<std::size_t>(rng.below(sources.size()))];
      out.dataset.images.push_back(
          htbd_poison(ds.images[i], ds.images[src], *model, p.patch, p.htbd));
      out.dataset.labels.push_back(target);
      out.mask.flags.push_back(1);
    }
    return out;
  }

  for (std::size_t i : victims) {
    Image& img = out.dataset.images[i];
    if (plan.attack == AttackKind::Sig) {
      img = apply_sig(img, p.sig_train);
    } else {
      img = lcbd_ae_poison(img, ds.labels[i], *model, p.lcbd, p.patch);
    }
    out.mask.flags[i] = 1;
  }
  return out;
}

TestTrigger make_test_trigger(const PoisonPlan& plan, const LabeledDataset& like,
                              const std::optional<TrojanTrigger>& trojan) {
  if (like.empty()) throw UsageError("test trigger needs a reference dataset");
  const AttackParams p = plan.params;
  TestTrigger t;
  t.target_class = plan.target_class;
  switch (plan.attack) {
    case AttackKind::BadNets:
    case AttackKind::Lcbd:
      t.apply = [patch = p.patch](const Image& img) { return apply_patch(img, patch); };
      break;
    case AttackKind::Htbd:
      t.apply = [patch = p.patch](const Image& img) { return apply_patch(img, patch); };
      t.source_class = htbd_source(plan, like.num_classes);
      break;
    case AttackKind::Blended:
      t.apply = [pattern = blend_pattern_for(p, like.images.front()), alpha = p.alpha](
                    const Image& img) { return blend(img, pattern, alpha); };
      break;
    case AttackKind::Sig:
      t.apply = [spec = p.sig_test](const Image& img) { return apply_sig(img, spec); };
      break;
    case AttackKind::Trojan:
      if (!trojan) throw UsageError("trojan test trigger needs the optimized trigger");
      t.target_class = trojan->unit;
      t.apply = [trig = *trojan](const Image& img) { return apply_trojan(img, trig); };
      break;
  }
  return t;
}

}  // namespace ultraclean
