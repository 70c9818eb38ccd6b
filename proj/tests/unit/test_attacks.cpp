#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "support.hpp"
#include "ultraclean/attacks.hpp"
#include "ultraclean/error.hpp"

using namespace ultraclean;

namespace {

const LabeledDataset& small_data() {
  static const LabeledDataset ds = generate_synthetic(41, 60, 4, 16);
  return ds;
}

const ModelParams& small_model() {
  static const ModelParams model = [] {
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.seed = 1;
    return train(init_model(architecture_for(small_data()), 2), small_data(), cfg);
  }();
  return model;
}

double linf(const Image& a, const Image& b) { return testing::max_abs_diff(a, b); }

double feature_distance(const ModelParams& m, const Image& a, const Image& b) {
  const auto fa = features(m, a), fb = features(m, b);
  double d = 0.0;
  for (std::size_t i = 0; i < fa.size(); ++i) d += std::pow(static_cast<double>(fa[i]) - fb[i], 2);
  return d;
}

}  // namespace

TEST_CASE("patch trigger placement and masking") {
  const Image img(8, 8, 3, 0.25f);
  const TriggerSpec white = solid_trigger(3, 3, 1.0f, {Placement::Corner::BottomRight, 0});
  const Image out = apply_patch(img, white);
  for (std::size_t y = 0; y < 8; ++y) {
    for (std::size_t x = 0; x < 8; ++x) {
      for (std::size_t c = 0; c < 3; ++c) {
        const bool inside = y >= 5 && x >= 5;
        CHECK(out.at(y, x, c) == (inside ? 1.0f : 0.25f));
      }
    }
  }

  TriggerSpec off = white;
  off.mask = Image(3, 3, 1, 0.0f);
  CHECK(bitwise_equal(apply_patch(img, off), img));

  Rng rng(1);
  TriggerSpec full = trigger_from_image(testing::random_image(rng, 8, 8, 3), {Placement::Corner::TopLeft, 0});
  CHECK(bitwise_equal(apply_patch(img, full), full.pattern));

  const auto [pattern, mask] = checkerboard_trigger(3, 3).placed(8, 8, 3);
  CHECK(pattern.same_shape(img));
  CHECK(mask.height() == 8);
  CHECK(mask.in_range());
  // Default margin leaves one pixel between the trigger and the corner.
  CHECK(mask.at(7, 7, 0) == 0.0f);
  CHECK(mask.at(6, 6, 0) == 1.0f);
  CHECK(mask.at(4, 4, 0) == 1.0f);
  CHECK(mask.at(3, 3, 0) == 0.0f);

  CHECK_THROWS_AS(apply_patch(Image(2, 2, 3), white), UsageError);
}

TEST_CASE("blend endpoints and arithmetic") {
  Rng rng(2);
  const Image img = testing::random_image(rng, 4, 4, 3);
  const Image trig = testing::random_image(rng, 4, 4, 3);
  CHECK(bitwise_equal(blend(img, trig, 0.0), img));
  CHECK(bitwise_equal(blend(img, trig, 1.0), trig));
  CHECK(blend(Image(1, 1, 1, 0.5f), Image(1, 1, 1, 1.0f), 0.2).at(0, 0, 0) == doctest::Approx(0.6));
  CHECK_THROWS(blend(img, Image(4, 4, 1), 0.5));
}

TEST_CASE("SIG field") {
  const SigSpec spec{20.0, 6.0};
  const auto t = sig_trigger(5, 24, spec);
  REQUIRE(t.size() == 5 * 24);
  double peak = 0.0;
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(t[i * 24] == 0.0f);
    for (std::size_t j = 0; j < 24; ++j) {
      CHECK(t[i * 24 + j] == t[j]);
      CHECK(std::abs(t[i * 24 + j]) <= 20.0 / 255.0 + 1e-7);
      peak = std::max(peak, static_cast<double>(std::abs(t[i * 24 + j])));
      CHECK(t[j] == doctest::Approx(20.0 / 255.0 *
                                    std::sin(2.0 * std::numbers::pi * static_cast<double>(j) * 6.0 / 24.0))
                        .epsilon(1e-5)
                        .scale(1e-6));
    }
  }
  CHECK(std::abs(peak - 20.0 / 255.0) <= 1e-6);

  const Image img(4, 24, 3, 0.5f);
  const Image out = apply_sig(img, SigSpec{80.0, 6.0});
  CHECK(out.in_range());
  CHECK(out.at(2, 1, 1) == doctest::Approx(0.5 + 80.0 / 255.0).epsilon(1e-6));
  CHECK(out.at(2, 0, 0) == 0.5f);
  const Image dark = apply_sig(Image(2, 24, 1, 0.0f), spec);
  CHECK(dark.in_range());
  CHECK(dark.at(0, 3, 0) == 0.0f);
  CHECK_THROWS_AS(apply_sig(img, SigSpec{-1.0, 6.0}), UsageError);
}

TEST_CASE("LCBD budget presets and degenerate budget") {
  const auto presets = lcbd_presets();
  std::vector<std::pair<Norm, double>> got;
  for (const auto& b : presets) got.emplace_back(b.norm, b.epsilon);
  const std::vector<std::pair<Norm, double>> want{{Norm::L2, 300},  {Norm::L2, 600},
                                                  {Norm::L2, 1200}, {Norm::Linf, 8},
                                                  {Norm::Linf, 16}, {Norm::Linf, 32}};
  CHECK(got == want);
  CHECK(AttackBudget::pgd(Norm::L2, 1200, 40).step_size == doctest::Approx(75.0));

  const Image& x = small_data().images[0];
  AttackBudget zero = AttackBudget::pgd(Norm::Linf, 0.0);
  const TriggerSpec trig = checkerboard_trigger(3, 3);
  CHECK(bitwise_equal(lcbd_ae_poison(x, small_data().labels[0], small_model(), zero, trig),
                      apply_patch(x, trig)));
  CHECK(bitwise_equal(adversarial_perturb(x, small_data().labels[0], small_model(), zero), x));

  const ModelParams untrained = init_model(architecture_for(small_data()), 3);
  CHECK_THROWS_AS(adversarial_perturb(x, 0, untrained, AttackBudget::pgd(Norm::Linf, 8)), UsageError);
}

TEST_CASE("PGD respects the projection at every step and ascends the loss") {
  const ModelParams& model = small_model();
  const LabeledDataset& ds = small_data();
  const AttackBudget linf_budget = AttackBudget::pgd(Norm::Linf, 8.0, 10);
  const AttackBudget l2_budget = AttackBudget::pgd(Norm::L2, 300.0, 10);
  std::size_t ascended = 0;
  for (std::size_t i = 0; i < 100; ++i) {
    const Image& x = ds.images[i];
    const ClassIndex y = ds.labels[i];
    bool ok = true;
    const Image adv = adversarial_perturb(x, y, model, linf_budget, [&](std::size_t, const Image& cur) {
      ok = ok && linf(cur, x) <= 8.0 / 255.0 + 1e-7 && cur.in_range();
    });
    REQUIRE(ok);
    const objective::LabelLoss loss{y};
    if (objective_value(model, adv, loss) >= objective_value(model, x, loss)) ++ascended;

    if (i < 20) {
      const Image adv2 = adversarial_perturb(x, y, model, l2_budget);
      double n2 = 0.0;
      for (std::size_t k = 0; k < x.size(); ++k) n2 += std::pow(static_cast<double>(adv2.data()[k]) - x.data()[k], 2);
      CHECK(std::sqrt(n2) <= 300.0 / 255.0 + 1e-5);
    }
  }
  CHECK(ascended >= 90);
}

TEST_CASE("Trojan unit selection, zero steps, and activation growth") {
  const std::vector<float> w{0.5f, -1.0f, 2.0f, 0.5f};
  CHECK(select_trojan_unit(w, 2) == 1);
  CHECK(select_trojan_unit(std::vector<float>{1, 1, 1, 1}, 2) == 0);

  const ModelParams& model = small_model();
  const Image& x = small_data().images[1];
  const TriggerSpec spec = checkerboard_trigger(4, 3);
  const Image zero = trojan_poison(x, model, spec, 0.5, 0);
  const auto [pattern, mask] = spec.placed(16, 16, 3);
  for (std::size_t y = 0; y < 16; ++y) {
    for (std::size_t xx = 0; xx < 16; ++xx) {
      const float a = 0.5f * mask.at(y, xx, 0);
      for (std::size_t c = 0; c < 3; ++c) {
        CHECK(zero.at(y, xx, c) ==
              doctest::Approx(x.at(y, xx, c) * (1.0f - a) + pattern.at(y, xx, c) * a).epsilon(1e-6));
      }
    }
  }

  // A small learning rate keeps the run smooth.
  const TrojanTrigger t = optimize_trojan_trigger(x, model, spec, 0.5, 50, 0.01);
  CHECK(t.unit == select_trojan_unit(model.dense_w, 4));
  REQUIRE(t.activations.size() == 51);
  std::size_t up = 0;
  for (std::size_t s = 1; s < t.activations.size(); ++s) {
    if (t.activations[s] >= t.activations[s - 1]) ++up;
  }
  CHECK(up >= 45);
  const TrojanTrigger fast = optimize_trojan_trigger(x, model, spec, 0.5, 100, 0.1);
  CHECK(fast.activations.back() > fast.activations.front());
  CHECK(t.pattern.in_range());
  CHECK(t.transparency == 0.5);
  // Pixels outside the trigger region are never touched.
  const Image composite = apply_trojan(x, t);
  CHECK(composite.at(0, 0, 0) == x.at(0, 0, 0));

  const ModelParams untrained = init_model(architecture_for(small_data()), 3);
  CHECK_THROWS_AS(trojan_poison(x, untrained, spec), UsageError);
}

TEST_CASE("HTBD stays in the ball and reduces feature distance") {
  const ModelParams& model = small_model();
  const LabeledDataset& ds = small_data();
  const TriggerSpec trig = checkerboard_trigger(3, 3);
  AttackBudget budget{16.0, Norm::Linf, 0, 1.0};
  const auto targets = ds.indices_of_class(0);
  const auto sources = ds.indices_of_class(1);
  CHECK(bitwise_equal(htbd_poison(ds.images[targets[0]], ds.images[sources[0]], model, trig, budget),
                      ds.images[targets[0]]));

  budget.steps = 60;
  Rng rng(5);
  std::size_t closer = 0;
  for (int pair = 0; pair < 100; ++pair) {
    const Image& xt = ds.images[targets[rng.below(targets.size())]];
    const Image& xs = ds.images[sources[rng.below(sources.size())]];
    bool inside = true;
    const Image xp = htbd_poison(xt, xs, model, trig, budget, [&](std::size_t, const Image& cur) {
      inside = inside && linf(cur, xt) < 16.0 / 255.0 && cur.in_range();
    });
    REQUIRE(inside);
    const Image patched = apply_patch(xs, trig);
    if (feature_distance(model, xp, patched) <= feature_distance(model, xt, patched)) ++closer;
  }
  CHECK(closer >= 95);

  const ModelParams untrained = init_model(architecture_for(ds), 3);
  CHECK_THROWS_AS(htbd_poison(ds.images[0], ds.images[1], untrained, trig, budget), UsageError);
}

TEST_CASE("poison counts follow the floor rule") {
  LabeledDataset ds;
  ds.num_classes = 2;
  for (int i = 0; i < 148; ++i) {
    ds.images.emplace_back(16, 16, 3, 0.5f);
    ds.labels.push_back(0);
  }
  for (int i = 0; i < 52; ++i) {
    ds.images.emplace_back(16, 16, 3, 0.5f);
    ds.labels.push_back(1);
  }
  PoisonPlan plan;
  plan.attack = AttackKind::Sig;
  plan.fraction = 0.3;
  plan.target_class = 0;
  CHECK(build_poisoned_dataset(ds, plan).mask.flagged_count() == 44);
  plan.attack = AttackKind::BadNets;
  plan.fraction = 0.25;
  CHECK(build_poisoned_dataset(ds, plan).mask.flagged_count() == 50);
  plan.count = 7;
  CHECK(build_poisoned_dataset(ds, plan).mask.flagged_count() == 7);
  plan.count = 53;
  CHECK_THROWS_AS(build_poisoned_dataset(ds, plan), UsageError);
}

TEST_CASE("poisoned datasets: label rules, mask soundness, determinism") {
  const LabeledDataset& ds = small_data();
  const ModelParams& model = small_model();
  for (AttackKind kind : {AttackKind::BadNets, AttackKind::Blended, AttackKind::Sig,
                          AttackKind::Trojan, AttackKind::Lcbd, AttackKind::Htbd}) {
    CAPTURE(to_string(kind));
    PoisonPlan plan;
    plan.attack = kind;
    plan.target_class = 2;
    plan.fraction = 0.1;
    plan.seed = 17;
    plan.params.trojan_steps = 10;
    plan.params.lcbd.steps = 5;
    plan.params.htbd.steps = 10;
    const ModelParams* m = needs_model(kind) ? &model : nullptr;
    const PoisonedDataset a = build_poisoned_dataset(ds, plan, m);
    const PoisonedDataset b = build_poisoned_dataset(ds, plan, m);
    REQUIRE(a.dataset.size() == b.dataset.size());
    for (std::size_t i = 0; i < a.dataset.size(); ++i) {
      REQUIRE(bitwise_equal(a.dataset.images[i], b.dataset.images[i]));
      REQUIRE(a.dataset.labels[i] == b.dataset.labels[i]);
    }
    CHECK(a.mask.flags == b.mask.flags);
    // Trojan retargets to the unit its trigger was optimized for.
    const ClassIndex target = kind == AttackKind::Trojan ? a.trojan->unit : ClassIndex{2};
    CHECK(a.mask.target_class == target);
    CHECK(a.mask.attack_name == to_string(kind));
    CHECK(a.dataset.num_classes == ds.num_classes);
    CHECK(a.mask.flagged_count() > 0);
    CHECK_NOTHROW(a.dataset.validate());

    for (std::size_t i = 0; i < a.dataset.size(); ++i) {
      REQUIRE(a.dataset.images[i].in_range());
      if (i >= ds.size()) {
        // Appended feature-collision poisons.
        CHECK(kind == AttackKind::Htbd);
        CHECK(a.mask.flagged(i));
        CHECK(a.dataset.labels[i] == 2);
        continue;
      }
      const bool changed = !bitwise_equal(a.dataset.images[i], ds.images[i]) ||
                           a.dataset.labels[i] != ds.labels[i];
      CHECK(changed == a.mask.flagged(i));
      if (!a.mask.flagged(i)) continue;
      if (is_dirty_label(kind)) {
        CHECK(a.dataset.labels[i] == target);
        CHECK(ds.labels[i] != target);
      } else {
        CHECK(a.dataset.labels[i] == ds.labels[i]);
      }
    }
    CHECK(a.trojan.has_value() == (kind == AttackKind::Trojan));
    if (needs_model(kind)) CHECK_THROWS_AS(build_poisoned_dataset(ds, plan), UsageError);
  }
}

TEST_CASE("attack names and test triggers") {
  CHECK(parse_attack("badnets") == AttackKind::BadNets);
  CHECK(parse_attack("lcbd") == AttackKind::Lcbd);
  CHECK_THROWS_AS(parse_attack("wanet"), UsageError);
  CHECK(is_dirty_label(AttackKind::Blended));
  CHECK_FALSE(is_dirty_label(AttackKind::Sig));

  PoisonPlan plan;
  plan.attack = AttackKind::Sig;
  plan.target_class = 1;
  const TestTrigger t = make_test_trigger(plan, small_data());
  CHECK(t.target_class == 1);
  const Image& x = small_data().images[0];
  CHECK(bitwise_equal(t.apply(x), apply_sig(x, plan.params.sig_test)));

  plan.attack = AttackKind::Htbd;
  CHECK(make_test_trigger(plan, small_data()).source_class == ClassIndex{2});
}
