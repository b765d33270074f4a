#pragma once

#include <optional>
#include <string>
#include <vector>

#include "camcal/image.hpp"

namespace camcal {

enum class AlphaPolicy { Reject, Strip };

// Reads PNG (8/16-bit, gray or RGB) or binary PPM/PGM. Samples come back
// normalized to [0,1] by division by (2^depth - 1). Palette and sub-8-bit
// gray PNGs are expanded; alpha is rejected unless policy says strip.
Image load_image(const std::string& path, AlphaPolicy alpha = AlphaPolicy::Reject);

// Quantizes with round-half-up to the requested depth. Format follows the
// extension: .png, .ppm (RGB), .pgm (grayscale).
void save_image(const Image& img, const std::string& path, int bit_depth = 8);

// A stack directory holds cam*.{png,ppm,pgm} (lexicographic order) and an
// optional truth.{png,ppm,pgm}.
struct LoadedStack {
  ImageStack stack;
  std::optional<Image> truth;
  std::vector<std::string> camera_paths;
};

LoadedStack load_stack_dir(const std::string& dir, AlphaPolicy alpha = AlphaPolicy::Reject);

}  // namespace camcal
