#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "camcal/image.hpp"

namespace camcal {

enum class StepKind {
  AdditiveGaussianNoise,  // amount = sigma
  ChannelGain,            // channel, amount = factor
  ValueShift,             // channel, amount = offset
  Saturation,             // amount = factor (no-op on grayscale)
  Brightness,             // amount = offset
  ExposureGamma,          // amount = gamma
  DynamicRangeCompress,   // low, high
};

std::string to_string(StepKind k);
StepKind step_kind_from_string(const std::string& s);

struct DistortionStep {
  StepKind kind = StepKind::Brightness;
  int channel = 0;
  double amount = 0.0;
  double low = 0.0;
  double high = 1.0;

  // Throws when parameters violate the step's constraints (sigma >= 0,
  // factor > 0, gamma > 0, 0 <= low < high <= 1).
  void validate() const;
};

DistortionStep gaussian_noise(double sigma);
DistortionStep channel_gain(int channel, double factor);
DistortionStep value_shift(int channel, double offset);
DistortionStep saturation(double factor);
DistortionStep brightness(double offset);
DistortionStep exposure_gamma(double gamma);
DistortionStep range_compress(double low, double high);

// Seeded, replayable corruption plan. Applying the same recipe to the same
// image is bit-identical; the empty recipe is an exact identity.
struct DistortionRecipe {
  std::uint64_t seed = 0;
  std::vector<DistortionStep> steps;
};

enum class Severity { Mild, Standard, Harsh };

std::string to_string(Severity s);
Severity severity_from_string(const std::string& s);

// Parameter ranges a random recipe draws from. The presets returned by
// recipe_ranges() are tuned so that a standard stack lands near a 23-24 dB
// uncalibrated PSNR against its source.
// The camera population is a two-part mixture: most cameras draw a few
// moderate steps and form a dense cluster, while an outlier minority stacks
// many steps. That heavy-tailed shape mirrors an array in which a few units
// deviate strongly, and it is what separates robust location estimators from
// the mean.
struct RecipeRanges {
  int min_steps = 3;
  int max_steps = 4;
  // Share of cameras drawn from the outlier population and the step counts
  // those cameras stack. The fraction is kept well below one half so that an
  // outlier majority (which would capture the median) stays rare even in
  // small arrays.
  double outlier_fraction = 0.12;
  int outlier_min_steps = 16;
  int outlier_max_steps = 24;
  // Fraction of each parameter range adjacent to the identity value that
  // random draws skip, so every sampled step visibly changes the image.
  double identity_deadzone = 0.25;
  // Cluster recipes are redrawn until the composed curve's RMS deviation
  // from identity (measured on a probe image) lands inside the band below;
  // outlier recipes only honor the floor. Individual steps can cancel (a
  // gain up followed by a brightness down), so without the floor a camera
  // can come out nearly pristine, and without the ceiling the cluster bleeds
  // into outlier territory that the tail already models explicitly.
  double min_curve_rms = 0.06;
  double max_curve_rms = 0.10;  // <= 0 disables the ceiling
  double gain_lo = 0.78, gain_hi = 1.22;
  double shift_lo = -0.08, shift_hi = 0.08;
  // Noise is kept small relative to the curve distortions: sensor noise is a
  // minor effect next to the per-camera tone differences being modelled.
  double noise_sigma_hi = 0.015;
  // The asymmetric gamma tail skews the curve population, so a minority of
  // cameras sit far from the cluster on one side.
  double gamma_lo = 0.72, gamma_hi = 1.7;
  double sat_lo = 0.65, sat_hi = 1.35;
  double bright_lo = -0.08, bright_hi = 0.08;
  double compress_low_hi = 0.12;   // low drawn from [0, compress_low_hi]
  double compress_high_lo = 0.88;  // high drawn from [compress_high_lo, 1]
};

RecipeRanges recipe_ranges(Severity severity);

// The curve band is measured against `probe` when given (synthetic stacks
// pass a subsample of their truth image, making the band scene-relative);
// otherwise against a fixed color lattice.
DistortionRecipe random_recipe(std::uint64_t seed, const RecipeRanges& ranges,
                               const Image* probe = nullptr);
DistortionRecipe random_recipe(std::uint64_t seed, Severity severity);

// Steps run in order; every step leaves a valid [0,1] image behind. Noise is
// drawn from per-row streams derived from (recipe.seed, step index, row), so
// the result does not depend on threading.
Image apply_recipe(const Image& img, const DistortionRecipe& recipe);

struct SyntheticStack {
  ImageStack stack;
  Image truth;
  std::vector<DistortionRecipe> recipes;
};

// n recipes with seeds derive_seed(master_seed, image index).
SyntheticStack synthesize_stack(const Image& truth, int n, std::uint64_t master_seed,
                                const RecipeRanges& ranges);
SyntheticStack synthesize_stack(const Image& truth, int n, std::uint64_t master_seed,
                                Severity severity);

std::string recipe_to_json(const DistortionRecipe& recipe);
DistortionRecipe recipe_from_json(const std::string& json);
void save_recipes(const std::vector<DistortionRecipe>& recipes, const std::string& path);
std::vector<DistortionRecipe> load_recipes(const std::string& path);

}  // namespace camcal
