#include "camcal/image.hpp"

#include <cstdint>
#include <vector>

namespace camcal {

Histogram histogram(const Image& img) {
  Histogram h;
  h.channels = img.channels;
  h.total = img.pixel_count();
  h.bins.assign(static_cast<std::size_t>(img.channels) * kHistogramBins, 0);

  const std::int64_t pixels = static_cast<std::int64_t>(img.pixel_count());
  const int channels = img.channels;

#pragma omp parallel if (img.sample_count() >= kParallelCutoff)
  {
    std::vector<std::uint64_t> local(h.bins.size(), 0);
#pragma omp for nowait
    for (std::int64_t p = 0; p < pixels; ++p) {
      for (int c = 0; c < channels; ++c) {
        const double s = img.samples[static_cast<std::size_t>(p) * channels + c];
        ++local[static_cast<std::size_t>(c) * kHistogramBins + intensity_bin(s)];
      }
    }
#pragma omp critical
    {
      for (std::size_t i = 0; i < local.size(); ++i) h.bins[i] += local[i];
    }
  }
  return h;
}

void validate_stack(const ImageStack& stack) {
  const int n = stack.count();
  if (n < 2) {
    throw Error("stack '" + stack.scene_id + "' has " + std::to_string(n) +
                " image(s); a stack needs at least 2");
  }
  const Image& first = stack.images.front();
  for (int i = 0; i < n; ++i) {
    const Image& img = stack.images[i];
    if (img.width != first.width || img.height != first.height) {
      throw Error("image " + std::to_string(i) + ": size " + std::to_string(img.width) + "x" +
                  std::to_string(img.height) + " does not match image 0 (" +
                  std::to_string(first.width) + "x" + std::to_string(first.height) + ")");
    }
    if (img.channels != first.channels) {
      throw Error("image " + std::to_string(i) + ": " + std::to_string(img.channels) +
                  " channel(s) does not match image 0 (" + std::to_string(first.channels) + ")");
    }
    if (img.sample_count() != img.pixel_count() * static_cast<std::size_t>(img.channels)) {
      throw Error("image " + std::to_string(i) + ": sample buffer size mismatch");
    }
  }
}

}  // namespace camcal
