#pragma once

#include <utility>
#include <vector>

#include "camcal/image.hpp"

namespace camcal {

inline constexpr double kPsnrCapDb = 99.0;
inline constexpr int kPerceptualWindow = 11;

// Mean over all samples of the squared difference.
double mse(const Image& a, const Image& b);

struct PsnrResult {
  double db = 0.0;
  bool identical = false;  // mse was exactly zero; db holds the cap
};

// 10*log10(1 / mse) in the normalized [0,1] domain, capped at 99.0 dB.
PsnrResult psnr(const Image& a, const Image& b);

// Perceptual color difference: images go to a lightness /
// chroma / hue opponent space, squared per-pixel differences are averaged
// over sliding 11x11 windows, and each window contributes a product of three
// comparison terms c/(c + mean). Returns 100 * (1 - mean product): 0 means
// identical, larger is worse. Grayscale input uses the lightness term only.
double perceptual_diff(const Image& a, const Image& b);

// Cross-camera histogram disagreement: per channel per bin, the population
// standard deviation of counts across cameras, summed over bins and channels
// and normalized by the per-image pixel count. Zero iff all histograms agree.
double histogram_spread(const ImageStack& stack);

struct CameraScore {
  PsnrResult psnr;
  double perceptual = 0.0;
};

struct MetricReport {
  std::vector<CameraScore> per_camera;
  double mean_psnr_db = 0.0;
  double mean_perceptual = 0.0;
  double hist_spread = 0.0;
};

MetricReport score_stack(const ImageStack& stack, const Image& truth);

// Before/after reports against the same truth image.
std::pair<MetricReport, MetricReport> report(const ImageStack& stack_before,
                                             const ImageStack& stack_after,
                                             const Image& truth);

}  // namespace camcal
