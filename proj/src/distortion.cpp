#include "camcal/distortion.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

#include "camcal/rng.hpp"
#include "json.hpp"

namespace camcal {

std::string to_string(StepKind k) {
  switch (k) {
    case StepKind::AdditiveGaussianNoise: return "gaussian-noise";
    case StepKind::ChannelGain: return "channel-gain";
    case StepKind::ValueShift: return "value-shift";
    case StepKind::Saturation: return "saturation";
    case StepKind::Brightness: return "brightness";
    case StepKind::ExposureGamma: return "exposure-gamma";
    case StepKind::DynamicRangeCompress: return "range-compress";
  }
  return "?";
}

StepKind step_kind_from_string(const std::string& s) {
  if (s == "gaussian-noise") return StepKind::AdditiveGaussianNoise;
  if (s == "channel-gain") return StepKind::ChannelGain;
  if (s == "value-shift") return StepKind::ValueShift;
  if (s == "saturation") return StepKind::Saturation;
  if (s == "brightness") return StepKind::Brightness;
  if (s == "exposure-gamma") return StepKind::ExposureGamma;
  if (s == "range-compress") return StepKind::DynamicRangeCompress;
  throw Error("unknown distortion step kind '" + s + "'");
}

void DistortionStep::validate() const {
  switch (kind) {
    case StepKind::AdditiveGaussianNoise:
      if (!(amount >= 0.0)) throw Error("gaussian-noise: sigma must be >= 0");
      break;
    case StepKind::ChannelGain:
    case StepKind::Saturation:
      if (!(amount > 0.0)) throw Error(to_string(kind) + ": factor must be > 0");
      break;
    case StepKind::ExposureGamma:
      if (!(amount > 0.0)) throw Error("exposure-gamma: gamma must be > 0");
      break;
    case StepKind::DynamicRangeCompress:
      if (!(0.0 <= low && low < high && high <= 1.0)) {
        throw Error("range-compress: need 0 <= low < high <= 1");
      }
      break;
    case StepKind::ValueShift:
    case StepKind::Brightness:
      if (!std::isfinite(amount)) throw Error(to_string(kind) + ": offset must be finite");
      break;
  }
  if (channel < 0 || channel > 2) throw Error("step channel index out of range");
}

DistortionStep gaussian_noise(double sigma) {
  DistortionStep s{StepKind::AdditiveGaussianNoise, 0, sigma, 0, 1};
  s.validate();
  return s;
}
DistortionStep channel_gain(int channel, double factor) {
  DistortionStep s{StepKind::ChannelGain, channel, factor, 0, 1};
  s.validate();
  return s;
}
DistortionStep value_shift(int channel, double offset) {
  DistortionStep s{StepKind::ValueShift, channel, offset, 0, 1};
  s.validate();
  return s;
}
DistortionStep saturation(double factor) {
  DistortionStep s{StepKind::Saturation, 0, factor, 0, 1};
  s.validate();
  return s;
}
DistortionStep brightness(double offset) {
  DistortionStep s{StepKind::Brightness, 0, offset, 0, 1};
  s.validate();
  return s;
}
DistortionStep exposure_gamma(double gamma) {
  DistortionStep s{StepKind::ExposureGamma, 0, gamma, 0, 1};
  s.validate();
  return s;
}
DistortionStep range_compress(double low, double high) {
  DistortionStep s{StepKind::DynamicRangeCompress, 0, 0, low, high};
  s.validate();
  return s;
}

std::string to_string(Severity s) {
  switch (s) {
    case Severity::Mild: return "mild";
    case Severity::Standard: return "standard";
    case Severity::Harsh: return "harsh";
  }
  return "?";
}

Severity severity_from_string(const std::string& s) {
  if (s == "mild") return Severity::Mild;
  if (s == "standard") return Severity::Standard;
  if (s == "harsh") return Severity::Harsh;
  throw Error("unknown severity '" + s + "' (mild, standard, harsh)");
}

RecipeRanges recipe_ranges(Severity severity) {
  RecipeRanges r;  // defaults are the standard preset
  switch (severity) {
    case Severity::Standard:
      break;
    case Severity::Mild:
      r.outlier_fraction = 0.0;
      r.min_curve_rms = 0.01;
      r.max_curve_rms = 0.05;
      r.gain_lo = 0.9;
      r.gain_hi = 1.1;
      r.shift_lo = -0.03;
      r.shift_hi = 0.03;
      r.noise_sigma_hi = 0.01;
      r.gamma_lo = 0.9;
      r.gamma_hi = 1.12;
      r.sat_lo = 0.85;
      r.sat_hi = 1.15;
      r.bright_lo = -0.03;
      r.bright_hi = 0.03;
      r.compress_low_hi = 0.05;
      r.compress_high_lo = 0.95;
      break;
    case Severity::Harsh:
      r.outlier_fraction = 0.45;
      r.min_curve_rms = 0.10;
      r.max_curve_rms = 0.0;
      r.gain_lo = 0.4;
      r.gain_hi = 1.6;
      r.shift_lo = -0.25;
      r.shift_hi = 0.25;
      r.noise_sigma_hi = 0.08;
      r.gamma_lo = 0.4;
      r.gamma_hi = 2.0;
      r.sat_lo = 0.3;
      r.sat_hi = 1.7;
      r.bright_lo = -0.25;
      r.bright_hi = 0.25;
      r.compress_low_hi = 0.3;
      r.compress_high_lo = 0.7;
      break;
  }
  return r;
}

namespace {

// Uniform draw over [lo, hi] minus the dead fraction of each side adjacent to
// `center` (the parameter's identity value), so the draw cannot approximate a
// no-op. One-sided ranges (center == lo or center == hi) work unchanged.
double offset_uniform(Rng& rng, double lo, double hi, double center, double dead) {
  const double left = (center - lo) * (1.0 - dead);
  const double right = (hi - center) * (1.0 - dead);
  const double t = rng.uniform() * (left + right);
  return t < left ? lo + t : hi - (left + right - t);
}

std::vector<DistortionStep> draw_steps(Rng& rng, const RecipeRanges& ranges, int count) {
  const double dead = ranges.identity_deadzone;
  std::vector<DistortionStep> steps;
  steps.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    switch (rng.below(7)) {
      case 0:
        steps.push_back(gaussian_noise(
            offset_uniform(rng, 0.0, ranges.noise_sigma_hi, 0.0, dead)));
        break;
      case 1:
        steps.push_back(
            channel_gain(static_cast<int>(rng.below(3)),
                         offset_uniform(rng, ranges.gain_lo, ranges.gain_hi, 1.0, dead)));
        break;
      case 2:
        steps.push_back(
            value_shift(static_cast<int>(rng.below(3)),
                        offset_uniform(rng, ranges.shift_lo, ranges.shift_hi, 0.0, dead)));
        break;
      case 3:
        steps.push_back(
            saturation(offset_uniform(rng, ranges.sat_lo, ranges.sat_hi, 1.0, dead)));
        break;
      case 4:
        steps.push_back(brightness(
            offset_uniform(rng, ranges.bright_lo, ranges.bright_hi, 0.0, dead)));
        break;
      case 5:
        steps.push_back(exposure_gamma(
            offset_uniform(rng, ranges.gamma_lo, ranges.gamma_hi, 1.0, dead)));
        break;
      case 6:
        steps.push_back(range_compress(
            offset_uniform(rng, 0.0, ranges.compress_low_hi, 0.0, dead),
            offset_uniform(rng, ranges.compress_high_lo, 1.0, 1.0, dead)));
        break;
    }
  }
  return steps;
}

// Color lattice covering both channel extremes and the gray diagonal, so
// every step kind moves at least part of it.
const Image& curve_probe() {
  static const Image probe = [] {
    Image img(16, 16, 3);
    for (int y = 0; y < 16; ++y) {
      for (int x = 0; x < 16; ++x) {
        img.at(x, y, 0) = x / 15.0;
        img.at(x, y, 1) = y / 15.0;
        img.at(x, y, 2) = (x + y) / 30.0;
      }
    }
    return img;
  }();
  return probe;
}

double probe_rms(const DistortionRecipe& recipe, const Image& probe) {
  const Image rendered = apply_recipe(probe, recipe);
  double acc = 0.0;
  for (std::size_t s = 0; s < probe.samples.size(); ++s) {
    const double d = rendered.samples[s] - probe.samples[s];
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(probe.samples.size()));
}

}  // namespace

DistortionRecipe random_recipe(std::uint64_t seed, const RecipeRanges& ranges,
                               const Image* probe) {
  Rng rng(seed);
  DistortionRecipe recipe;
  recipe.seed = seed;
  const bool outlier = rng.uniform() < ranges.outlier_fraction;
  const int lo = outlier ? ranges.outlier_min_steps : ranges.min_steps;
  const int hi = outlier ? ranges.outlier_max_steps : ranges.max_steps;
  const int span = hi - lo;
  const int count = lo + (span > 0 ? static_cast<int>(rng.below(span + 1)) : 0);
  const double band_lo = ranges.min_curve_rms;
  // Only cluster cameras honor the ceiling; the tail is unbounded above.
  const double band_hi = (!outlier && ranges.max_curve_rms > 0.0)
                             ? ranges.max_curve_rms
                             : std::numeric_limits<double>::infinity();
  if (count == 0 || band_lo <= 0.0) {
    recipe.steps = draw_steps(rng, ranges, count);
    return recipe;
  }
  // Redraw recipes whose composite lands outside the band; if no attempt
  // lands inside, keep the one that came closest.
  constexpr int kMaxRedraws = 64;
  const Image& target = probe ? *probe : curve_probe();
  double best_miss = std::numeric_limits<double>::infinity();
  std::vector<DistortionStep> best;
  for (int attempt = 0; attempt < kMaxRedraws; ++attempt) {
    recipe.steps = draw_steps(rng, ranges, count);
    const double rms = probe_rms(recipe, target);
    if (rms >= band_lo && rms <= band_hi) return recipe;
    const double miss = rms < band_lo ? band_lo - rms : rms - band_hi;
    if (miss < best_miss) {
      best_miss = miss;
      best = recipe.steps;
    }
  }
  recipe.steps = std::move(best);
  return recipe;
}

DistortionRecipe random_recipe(std::uint64_t seed, Severity severity) {
  return random_recipe(seed, recipe_ranges(severity));
}

namespace {

// Rec. 601 luma, used as the gray axis for the saturation step
double luma(const double* px) { return 0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2]; }

void apply_step(Image& img, const DistortionStep& step, std::uint64_t step_seed) {
  const std::int64_t pixels = static_cast<std::int64_t>(img.pixel_count());
  const int channels = img.channels;
  const int ch = step.channel % channels;

  switch (step.kind) {
    case StepKind::AdditiveGaussianNoise: {
      const double sigma = step.amount;
      const int height = img.height;
      const std::size_t row_samples = static_cast<std::size_t>(img.width) * channels;
#pragma omp parallel for if (img.sample_count() >= kParallelCutoff)
      for (int y = 0; y < height; ++y) {
        Rng rng(derive_seed(step_seed, static_cast<std::uint64_t>(y)));
        double* row = img.samples.data() + y * row_samples;
        for (std::size_t i = 0; i < row_samples; ++i) {
          row[i] = clamp01(row[i] + sigma * rng.normal());
        }
      }
      return;
    }
    case StepKind::ChannelGain: {
#pragma omp parallel for if (img.sample_count() >= kParallelCutoff)
      for (std::int64_t p = 0; p < pixels; ++p) {
        double& s = img.samples[p * channels + ch];
        s = clamp01(s * step.amount);
      }
      return;
    }
    case StepKind::ValueShift: {
#pragma omp parallel for if (img.sample_count() >= kParallelCutoff)
      for (std::int64_t p = 0; p < pixels; ++p) {
        double& s = img.samples[p * channels + ch];
        s = clamp01(s + step.amount);
      }
      return;
    }
    case StepKind::Saturation: {
      if (channels == 1) {
        std::clog << "camcal: saturation step is a no-op on grayscale input\n";
        return;
      }
#pragma omp parallel for if (img.sample_count() >= kParallelCutoff)
      for (std::int64_t p = 0; p < pixels; ++p) {
        double* px = img.samples.data() + p * channels;
        const double g = luma(px);
        for (int c = 0; c < channels; ++c) px[c] = clamp01(g + step.amount * (px[c] - g));
      }
      return;
    }
    case StepKind::Brightness: {
      for (double& s : img.samples) s = clamp01(s + step.amount);
      return;
    }
    case StepKind::ExposureGamma: {
      const double gamma = step.amount;
#pragma omp parallel for if (img.sample_count() >= kParallelCutoff)
      for (std::int64_t i = 0; i < static_cast<std::int64_t>(img.sample_count()); ++i) {
        img.samples[i] = clamp01(std::pow(img.samples[i], gamma));
      }
      return;
    }
    case StepKind::DynamicRangeCompress: {
      const double lo = step.low, span = step.high - step.low;
      for (double& s : img.samples) s = clamp01(lo + s * span);
      return;
    }
  }
}

}  // namespace

Image apply_recipe(const Image& img, const DistortionRecipe& recipe) {
  for (const DistortionStep& step : recipe.steps) step.validate();
  Image out = img;
  for (std::size_t i = 0; i < recipe.steps.size(); ++i) {
    apply_step(out, recipe.steps[i], derive_seed(recipe.seed, i));
  }
  return out;
}

namespace {

// Strided subsample (not an average): keeps the value distribution of the
// original so RMS measured on it tracks RMS on the full image.
Image thumbnail(const Image& img, int max_side) {
  const int stride = std::max(1, std::max(img.width, img.height) / max_side);
  if (stride == 1) return img;
  Image out((img.width + stride - 1) / stride, (img.height + stride - 1) / stride,
            img.channels);
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      for (int c = 0; c < out.channels; ++c) {
        out.at(x, y, c) = img.at(x * stride, y * stride, c);
      }
    }
  }
  return out;
}

}  // namespace

SyntheticStack synthesize_stack(const Image& truth, int n, std::uint64_t master_seed,
                                const RecipeRanges& ranges) {
  if (n < 2) throw Error("a synthetic stack needs n >= 2 cameras");
  SyntheticStack out;
  out.truth = truth;
  out.stack.images.reserve(n);
  const Image probe = thumbnail(truth, 32);
  for (int i = 0; i < n; ++i) {
    DistortionRecipe recipe = random_recipe(
        derive_seed(master_seed, static_cast<std::uint64_t>(i)), ranges, &probe);
    out.stack.images.push_back(apply_recipe(truth, recipe));
    out.recipes.push_back(std::move(recipe));
  }
  validate_stack(out.stack);
  return out;
}

SyntheticStack synthesize_stack(const Image& truth, int n, std::uint64_t master_seed,
                                Severity severity) {
  return synthesize_stack(truth, n, master_seed, recipe_ranges(severity));
}

namespace {

nlohmann::json step_to_json_obj(const DistortionStep& s) {
  nlohmann::json j;
  j["kind"] = to_string(s.kind);
  switch (s.kind) {
    case StepKind::AdditiveGaussianNoise: j["sigma"] = s.amount; break;
    case StepKind::ChannelGain:
      j["channel"] = s.channel;
      j["factor"] = s.amount;
      break;
    case StepKind::ValueShift:
      j["channel"] = s.channel;
      j["offset"] = s.amount;
      break;
    case StepKind::Saturation: j["factor"] = s.amount; break;
    case StepKind::Brightness: j["offset"] = s.amount; break;
    case StepKind::ExposureGamma: j["gamma"] = s.amount; break;
    case StepKind::DynamicRangeCompress:
      j["low"] = s.low;
      j["high"] = s.high;
      break;
  }
  return j;
}

DistortionStep step_from_json_obj(const nlohmann::json& j) {
  DistortionStep s;
  s.kind = step_kind_from_string(j.at("kind").get<std::string>());
  switch (s.kind) {
    case StepKind::AdditiveGaussianNoise: s.amount = j.at("sigma").get<double>(); break;
    case StepKind::ChannelGain:
      s.channel = j.at("channel").get<int>();
      s.amount = j.at("factor").get<double>();
      break;
    case StepKind::ValueShift:
      s.channel = j.at("channel").get<int>();
      s.amount = j.at("offset").get<double>();
      break;
    case StepKind::Saturation: s.amount = j.at("factor").get<double>(); break;
    case StepKind::Brightness: s.amount = j.at("offset").get<double>(); break;
    case StepKind::ExposureGamma: s.amount = j.at("gamma").get<double>(); break;
    case StepKind::DynamicRangeCompress:
      s.low = j.at("low").get<double>();
      s.high = j.at("high").get<double>();
      break;
  }
  s.validate();
  return s;
}

nlohmann::json recipe_to_json_obj(const DistortionRecipe& r) {
  nlohmann::json j;
  j["seed"] = r.seed;
  j["steps"] = nlohmann::json::array();
  for (const DistortionStep& s : r.steps) j["steps"].push_back(step_to_json_obj(s));
  return j;
}

DistortionRecipe recipe_from_json_obj(const nlohmann::json& j) {
  DistortionRecipe r;
  r.seed = j.at("seed").get<std::uint64_t>();
  for (const nlohmann::json& s : j.at("steps")) r.steps.push_back(step_from_json_obj(s));
  return r;
}

}  // namespace

std::string recipe_to_json(const DistortionRecipe& recipe) {
  return recipe_to_json_obj(recipe).dump(2);
}

DistortionRecipe recipe_from_json(const std::string& json) {
  try {
    return recipe_from_json_obj(nlohmann::json::parse(json));
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("bad recipe JSON: ") + e.what());
  }
}

void save_recipes(const std::vector<DistortionRecipe>& recipes, const std::string& path) {
  nlohmann::json j = nlohmann::json::array();
  for (const DistortionRecipe& r : recipes) j.push_back(recipe_to_json_obj(r));
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << j.dump(2) << "\n";
}

std::vector<DistortionRecipe> load_recipes(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "' for reading");
  try {
    nlohmann::json j = nlohmann::json::parse(in);
    std::vector<DistortionRecipe> out;
    for (const nlohmann::json& r : j) out.push_back(recipe_from_json_obj(r));
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("bad recipes file: ") + e.what());
  }
}

}  // namespace camcal
