#include "camcal/scene.hpp"

#include <cmath>
#include <cstdint>
#include <vector>

#include "camcal/error.hpp"
#include "camcal/rng.hpp"

namespace camcal {

namespace {

constexpr std::uint64_t kSceneSalt = 0x5ce9e5a17ull;

double hash_unit(std::uint64_t seed, std::uint64_t idx) {
  return (mix64(seed ^ (idx * 0x9e3779b97f4a7c15ull)) >> 11) * 0x1.0p-53;
}

struct Disk {
  double cx, cy, r;
  double albedo[3];
};

struct Wave {
  double fx, fy, phase, amp;
};

}  // namespace

Image make_scene(int variant, int width, int height, int channels) {
  if (width <= 0 || height <= 0) throw Error("make_scene: empty size");
  if (channels != 1 && channels != 3) throw Error("make_scene: channels must be 1 or 3");

  Rng rng(derive_seed(kSceneSalt, static_cast<std::uint64_t>(variant)));

  Wave waves[3][2];
  for (auto& per_channel : waves) {
    for (Wave& w : per_channel) {
      w.fx = rng.uniform(0.5, 3.0);
      w.fy = rng.uniform(0.5, 3.0);
      w.phase = rng.uniform(0.0, 6.283185307179586);
      w.amp = rng.uniform(0.10, 0.22);
    }
  }
  const int n_disks = 4 + static_cast<int>(rng.below(3));
  std::vector<Disk> disks(n_disks);
  for (Disk& d : disks) {
    d.cx = rng.uniform(0.1, 0.9);
    d.cy = rng.uniform(0.1, 0.9);
    d.r = rng.uniform(0.06, 0.22);
    for (double& a : d.albedo) a = rng.uniform(0.08, 0.92);
  }
  const std::uint64_t texture_seed = rng.next_u64();

  Image img(width, height, channels);

#pragma omp parallel for if (img.sample_count() >= kParallelCutoff)
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double u = (x + 0.5) / width;
      const double v = (y + 0.5) / height;
      const std::uint64_t idx = static_cast<std::uint64_t>(y) * width + x;
      for (int c = 0; c < channels; ++c) {
        double s = 0.5;
        for (const Wave& w : waves[c]) {
          s += w.amp * std::sin(6.283185307179586 * (w.fx * u + w.fy * v) + w.phase);
        }
        for (const Disk& d : disks) {
          const double dx = u - d.cx, dy = v - d.cy;
          if (dx * dx + dy * dy < d.r * d.r) s = 0.15 * s + 0.85 * d.albedo[c];
        }
        s += 0.04 * (hash_unit(texture_seed, idx * 3 + c) - 0.5);
        img.samples[idx * channels + c] = clamp01(s);
      }
    }
  }
  return img;
}

}  // namespace camcal
