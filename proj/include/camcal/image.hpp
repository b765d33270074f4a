#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "camcal/error.hpp"

namespace camcal {

inline constexpr int kHistogramBins = 256;

// Per-pixel loops below this many samples are not worth an OpenMP team.
inline constexpr std::size_t kParallelCutoff = std::size_t(1) << 14;

inline double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

// 256-level bin of a normalized sample: floor(s * 255), so 8-bit data bins
// by its original byte value and 1.0 lands in bin 255.
inline int intensity_bin(double s) {
  return std::clamp(static_cast<int>(s * 255.0), 0, 255);
}

// Raster image with interleaved samples, real-valued in [0,1]. Quantization
// happens only at file I/O; source_bit_depth is kept for round-tripping.
struct Image {
  int width = 0;
  int height = 0;
  int channels = 0;  // 1 = grayscale, 3 = RGB
  int source_bit_depth = 8;
  std::vector<double> samples;  // width * height * channels

  Image() = default;
  Image(int w, int h, int c, double fill = 0.0, int bit_depth = 8)
      : width(w),
        height(h),
        channels(c),
        source_bit_depth(bit_depth),
        samples(static_cast<std::size_t>(w) * h * c, fill) {}

  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
  std::size_t sample_count() const { return samples.size(); }

  double& at(int x, int y, int c) {
    return samples[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  double at(int x, int y, int c) const {
    return samples[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }

  bool same_shape(const Image& o) const {
    return width == o.width && height == o.height && channels == o.channels;
  }

  void clamp() {
    for (double& s : samples) s = clamp01(s);
  }
};

// N pre-registered same-shaped views of one scene; the unit every consensus
// and calibration operation works on.
struct ImageStack {
  std::vector<Image> images;
  std::string scene_id;

  int count() const { return static_cast<int>(images.size()); }
  const Image& front() const { return images.front(); }
};

struct Histogram {
  int channels = 0;
  std::uint64_t total = 0;  // pixels per channel
  std::vector<std::uint64_t> bins;  // channels * 256

  std::uint64_t at(int channel, int bin) const {
    return bins[static_cast<std::size_t>(channel) * kHistogramBins + bin];
  }
  std::uint64_t& at(int channel, int bin) {
    return bins[static_cast<std::size_t>(channel) * kHistogramBins + bin];
  }
};

Histogram histogram(const Image& img);

// Throws Error naming the offending image when the stack invariants
// (N >= 2, identical shapes) do not hold.
void validate_stack(const ImageStack& stack);

}  // namespace camcal
