#pragma once

#include <optional>
#include <string>

#include "camcal/image.hpp"

namespace camcal {

enum class ConsensusMethod { Mean, WeightedMean, Median, WeightedMedian };

std::string to_string(ConsensusMethod m);
ConsensusMethod consensus_method_from_string(const std::string& s);

// How the per-pixel weights are derived.
//   PerImageDeviation: w_n = 1 / (1 + scale * |x_n - mu|), one weight per image.
//   SharedSigma:       w_n = 1 / (1 + scale * sigma), identical across images;
//                      kept for comparison, it makes the weighted mean collapse
//                      to the plain mean.
enum class WeightMode { PerImageDeviation, SharedSigma };

struct WeightOptions {
  WeightMode mode = WeightMode::PerImageDeviation;
  // Samples live in [0,1]; scale 255.0 reproduces weighting in the 8-bit
  // value domain, which is considerably sharper.
  double scale = 1.0;
};

inline double deviation_weight(double deviation, double scale = 1.0) {
  return 1.0 / (1.0 + scale * deviation);
}

// Per image, per pixel, per channel weights in (0,1].
struct WeightMap {
  int width = 0;
  int height = 0;
  int channels = 0;
  int count = 0;  // N images
  std::vector<double> values;  // [n][sample]

  double at(int n, std::size_t sample) const {
    return values[static_cast<std::size_t>(n) * plane() + sample];
  }
  double& at(int n, std::size_t sample) {
    return values[static_cast<std::size_t>(n) * plane() + sample];
  }
  std::size_t plane() const { return static_cast<std::size_t>(width) * height * channels; }
  bool matches(const ImageStack& stack) const;
};

struct ConsensusImage {
  Image image;
  // Empty when the reference was not built by an estimator (e.g. a stack
  // member picked as the reference).
  std::optional<ConsensusMethod> method;
  std::optional<WeightMap> weights;
};

// Per-pixel estimators over a validated stack. Results are clamped to the
// per-pixel [min, max] envelope: the exact statistic lies inside it, the
// floating-point sum may land an ulp outside.
Image pixel_mean(const ImageStack& stack);

// Population standard deviation per pixel per channel.
Image pixel_std(const ImageStack& stack);

WeightMap deviation_weights(const ImageStack& stack, const WeightOptions& opts = {});

Image pixel_weighted_mean(const ImageStack& stack, const WeightMap& weights);

// Odd N: middle of the sorted values; even N: midpoint of the two middle ones.
Image pixel_median(const ImageStack& stack);

// Minimizer of sum_n w_n |x_n - v| over the candidate set {x_0..x_{N-1}},
// computed exactly by sorted cumulative weights. Ties go to the smaller value.
Image pixel_weighted_median(const ImageStack& stack, const WeightMap& weights);

ConsensusImage build_consensus(const ImageStack& stack, ConsensusMethod method,
                               const WeightOptions& opts = {});

}  // namespace camcal
