#pragma once

#include "camcal/image.hpp"

namespace camcal {

// Deterministic procedural test scene: layered sinusoidal gradients, a few
// flat-albedo shapes, and low-amplitude texture. Same arguments, same pixels,
// independent of thread count. Variants differ in layout and palette.
Image make_scene(int variant, int width, int height, int channels = 3);

}  // namespace camcal
