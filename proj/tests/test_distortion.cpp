#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "camcal/distortion.hpp"
#include "camcal/error.hpp"
#include "camcal/metrics.hpp"
#include "camcal/rng.hpp"
#include "camcal/scene.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace camcal;
using namespace testutil;

TEST_CASE("step and severity names round trip") {
  for (StepKind k : {StepKind::AdditiveGaussianNoise, StepKind::ChannelGain, StepKind::ValueShift,
                     StepKind::Saturation, StepKind::Brightness, StepKind::ExposureGamma,
                     StepKind::DynamicRangeCompress}) {
    CHECK(step_kind_from_string(to_string(k)) == k);
  }
  CHECK(to_string(StepKind::DynamicRangeCompress) == "range-compress");
  CHECK_THROWS_AS(step_kind_from_string("blur"), Error);

  for (Severity s : {Severity::Mild, Severity::Standard, Severity::Harsh}) {
    CHECK(severity_from_string(to_string(s)) == s);
  }
  CHECK(to_string(Severity::Standard) == "standard");
  CHECK_THROWS_AS(severity_from_string("brutal"), Error);
}

TEST_CASE("step constructors validate their parameters") {
  CHECK_THROWS_WITH_AS(gaussian_noise(-0.01), "gaussian-noise: sigma must be >= 0", Error);
  CHECK_THROWS_WITH_AS(channel_gain(0, 0.0), "channel-gain: factor must be > 0", Error);
  CHECK_THROWS_WITH_AS(saturation(-1.0), "saturation: factor must be > 0", Error);
  CHECK_THROWS_WITH_AS(exposure_gamma(0.0), "exposure-gamma: gamma must be > 0", Error);
  CHECK_THROWS_WITH_AS(range_compress(0.5, 0.5), "range-compress: need 0 <= low < high <= 1",
                       Error);
  CHECK_THROWS_WITH_AS(range_compress(-0.1, 0.9), "range-compress: need 0 <= low < high <= 1",
                       Error);
  CHECK_THROWS_WITH_AS(channel_gain(3, 1.1), "step channel index out of range", Error);
  CHECK_THROWS_WITH_AS(value_shift(-1, 0.0), "step channel index out of range", Error);
  CHECK_NOTHROW(gaussian_noise(0.0));
  CHECK_NOTHROW(range_compress(0.0, 1.0));
}

TEST_CASE("the empty recipe is a bitwise identity") {
  Rng rng(21);
  Image img = random_image(rng, 16, 12, 3);
  DistortionRecipe empty;
  empty.seed = 999;
  CHECK(bits_equal(apply_recipe(img, empty), img));
}

TEST_CASE("channel gain and value shift touch only their channel") {
  Rng rng(22);
  Image img = random_image(rng, 10, 8, 3);

  DistortionRecipe gain;
  gain.steps = {channel_gain(1, 2.0)};
  Image g = apply_recipe(img, gain);
  for (std::size_t p = 0; p < img.pixel_count(); ++p) {
    CHECK(g.samples[p * 3 + 0] == img.samples[p * 3 + 0]);
    CHECK(g.samples[p * 3 + 1] == clamp01(img.samples[p * 3 + 1] * 2.0));
    CHECK(g.samples[p * 3 + 2] == img.samples[p * 3 + 2]);
  }
  Image qtr(4, 4, 3, 0.25);
  DistortionRecipe dbl;
  dbl.steps = {channel_gain(2, 2.0)};
  CHECK(apply_recipe(qtr, dbl).at(1, 1, 2) == 0.5);

  DistortionRecipe shift;
  shift.steps = {value_shift(0, -0.1)};
  Image s = apply_recipe(img, shift);
  for (std::size_t p = 0; p < img.pixel_count(); ++p) {
    CHECK(s.samples[p * 3 + 0] == clamp01(img.samples[p * 3 + 0] - 0.1));
    CHECK(s.samples[p * 3 + 1] == img.samples[p * 3 + 1]);
    CHECK(s.samples[p * 3 + 2] == img.samples[p * 3 + 2]);
  }
}

TEST_CASE("saturation pivots around luma and skips grayscale") {
  Image px(1, 1, 3);
  px.samples = {0.8, 0.4, 0.2};
  const double g = 0.299 * 0.8 + 0.587 * 0.4 + 0.114 * 0.2;
  DistortionRecipe desat;
  desat.steps = {saturation(0.5)};
  Image out = apply_recipe(px, desat);
  CHECK(out.samples[0] == doctest::Approx(g + 0.5 * (0.8 - g)).epsilon(1e-15));
  CHECK(out.samples[1] == doctest::Approx(g + 0.5 * (0.4 - g)).epsilon(1e-15));
  CHECK(out.samples[2] == doctest::Approx(g + 0.5 * (0.2 - g)).epsilon(1e-15));

  // a gray pixel is its own luma, so any factor leaves it alone
  Image gray_px(1, 1, 3, 0.37);
  DistortionRecipe boost;
  boost.steps = {saturation(1.9)};
  Image kept = apply_recipe(gray_px, boost);
  for (double v : kept.samples) CHECK(v == doctest::Approx(0.37).epsilon(1e-15));

  Rng rng(23);
  Image mono = random_image(rng, 8, 8, 1);
  CHECK(bits_equal(apply_recipe(mono, boost), mono));  // grayscale no-op
}

TEST_CASE("brightness, gamma and range compression act as specified") {
  Image img(2, 1, 1);
  img.samples = {0.95, 0.2};
  DistortionRecipe bright;
  bright.steps = {brightness(0.1)};
  Image b = apply_recipe(img, bright);
  CHECK(b.samples[0] == 1.0);  // clamped
  CHECK(b.samples[1] == doctest::Approx(0.3).epsilon(1e-15));

  Image quarter(1, 1, 1, 0.25);
  DistortionRecipe root;
  root.steps = {exposure_gamma(0.5)};
  CHECK(apply_recipe(quarter, root).samples[0] == 0.5);  // 0.25^0.5

  Image ends(2, 1, 1);
  ends.samples = {0.0, 1.0};
  DistortionRecipe comp;
  comp.steps = {range_compress(0.1, 0.8)};
  Image c = apply_recipe(ends, comp);
  CHECK(c.samples[0] == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(c.samples[1] == doctest::Approx(0.8).epsilon(1e-15));
}

TEST_CASE("recipes replay bit-identically, including noise") {
  Image scene = make_scene(0, 64, 48);
  DistortionRecipe recipe;
  recipe.seed = 77;
  recipe.steps = {gaussian_noise(0.05), channel_gain(0, 1.2), exposure_gamma(1.3)};
  Image a = apply_recipe(scene, recipe);
  Image b = apply_recipe(scene, recipe);
  CHECK(bits_equal(a, b));
  CHECK_FALSE(bits_equal(a, scene));

  // a different seed moves the noise
  DistortionRecipe other = recipe;
  other.seed = 78;
  CHECK_FALSE(bits_equal(apply_recipe(scene, other), a));
}

TEST_CASE("random recipes are seed-deterministic and rarely collide") {
  const RecipeRanges ranges = recipe_ranges(Severity::Standard);
  DistortionRecipe a = random_recipe(42, ranges);
  DistortionRecipe b = random_recipe(42, ranges);
  CHECK(recipe_to_json(a) == recipe_to_json(b));

  std::set<std::string> seen;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    seen.insert(recipe_to_json(random_recipe(seed, ranges)));
  }
  CHECK(seen.size() == 100);

  // step counts land in one of the two populations, and both actually occur
  int cluster = 0, outliers = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    DistortionRecipe r = random_recipe(seed, ranges);
    const auto n = r.steps.size();
    const bool in_cluster = n >= static_cast<std::size_t>(ranges.min_steps) &&
                            n <= static_cast<std::size_t>(ranges.max_steps);
    const bool in_tail = n >= static_cast<std::size_t>(ranges.outlier_min_steps) &&
                         n <= static_cast<std::size_t>(ranges.outlier_max_steps);
    CHECK((in_cluster || in_tail));
    cluster += in_cluster ? 1 : 0;
    outliers += in_tail ? 1 : 0;
    for (const DistortionStep& s : r.steps) CHECK_NOTHROW(s.validate());
  }
  CHECK(cluster > outliers);
  CHECK(outliers > 0);
}

TEST_CASE("severity presets order the damage") {
  Image scene = make_scene(1, 96, 96);
  double mild_sum = 0.0, harsh_sum = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    mild_sum += psnr(scene, apply_recipe(scene, random_recipe(seed, Severity::Mild))).db;
    harsh_sum += psnr(scene, apply_recipe(scene, random_recipe(seed, Severity::Harsh))).db;
  }
  CHECK(mild_sum / 20.0 > harsh_sum / 20.0 + 3.0);
}

TEST_CASE("synthesize_stack produces a valid, replayable stack") {
  Image truth = make_scene(2, 512, 512);
  SyntheticStack syn = synthesize_stack(truth, 9, 314, Severity::Standard);
  CHECK(syn.stack.count() == 9);
  CHECK(syn.recipes.size() == 9);
  CHECK(bits_equal(syn.truth, truth));
  CHECK_NOTHROW(validate_stack(syn.stack));
  for (const Image& img : syn.stack.images) {
    CHECK(img.same_shape(truth));
    for (double s : img.samples) {
      CHECK(s >= 0.0);
      CHECK(s <= 1.0);
    }
  }
  // replaying each stored recipe reproduces its camera bit for bit
  for (int i = 0; i < 9; ++i) {
    CHECK(bits_equal(apply_recipe(truth, syn.recipes[i]), syn.stack.images[i]));
  }
  // and the whole synthesis is a function of (truth, n, master seed)
  SyntheticStack again = synthesize_stack(truth, 9, 314, Severity::Standard);
  for (int i = 0; i < 9; ++i) CHECK(bits_equal(again.stack.images[i], syn.stack.images[i]));

  SyntheticStack moved = synthesize_stack(truth, 9, 315, Severity::Standard);
  CHECK_FALSE(bits_equal(moved.stack.images[0], syn.stack.images[0]));

  CHECK_THROWS_WITH_AS(synthesize_stack(truth, 1, 0, Severity::Mild),
                       "a synthetic stack needs n >= 2 cameras", Error);
}

TEST_CASE("a zero-step ranges override yields pristine cameras") {
  Image truth = make_scene(0, 32, 24);
  RecipeRanges identity;
  identity.min_steps = 0;
  identity.max_steps = 0;
  identity.outlier_fraction = 0.0;
  SyntheticStack syn = synthesize_stack(truth, 3, 9, identity);
  for (const Image& img : syn.stack.images) CHECK(bits_equal(img, truth));
  for (const DistortionRecipe& r : syn.recipes) CHECK(r.steps.empty());
}

TEST_CASE("recipe JSON round trips every step kind") {
  DistortionRecipe recipe;
  recipe.seed = 123456789;
  recipe.steps = {gaussian_noise(0.02), channel_gain(1, 1.25),  value_shift(2, -0.05),
                  saturation(0.8),      brightness(0.07),       exposure_gamma(1.1),
                  range_compress(0.05, 0.93)};
  DistortionRecipe back = recipe_from_json(recipe_to_json(recipe));
  CHECK(back.seed == recipe.seed);
  REQUIRE(back.steps.size() == recipe.steps.size());
  for (std::size_t i = 0; i < recipe.steps.size(); ++i) {
    CHECK(back.steps[i].kind == recipe.steps[i].kind);
    CHECK(back.steps[i].channel == recipe.steps[i].channel);
    CHECK(back.steps[i].amount == recipe.steps[i].amount);
    CHECK(back.steps[i].low == recipe.steps[i].low);
    CHECK(back.steps[i].high == recipe.steps[i].high);
  }
  // the application is driven entirely by the serialized fields
  Image scene = make_scene(1, 40, 30);
  CHECK(bits_equal(apply_recipe(scene, back), apply_recipe(scene, recipe)));

  CHECK_THROWS_AS(recipe_from_json("{not json"), Error);
  CHECK_THROWS_AS(recipe_from_json(R"({"seed": 1})"), Error);
}

TEST_CASE("recipe files save and load as a unit") {
  TempDir dir("recipes");
  std::vector<DistortionRecipe> recipes;
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    recipes.push_back(random_recipe(seed, Severity::Harsh));
  }
  save_recipes(recipes, dir.file("r.json"));
  std::vector<DistortionRecipe> back = load_recipes(dir.file("r.json"));
  REQUIRE(back.size() == recipes.size());
  for (std::size_t i = 0; i < recipes.size(); ++i) {
    CHECK(recipe_to_json(back[i]) == recipe_to_json(recipes[i]));
  }
  CHECK_THROWS_AS(load_recipes(dir.file("missing.json")), Error);
}
