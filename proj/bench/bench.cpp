// Times the OpenMP kernels against their serial reference twins and reports
// the largest output difference, so "fast" and "right" are checked together.
//
//   camcal-bench [width height cameras]
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <string>

#include "camcal/consensus.hpp"
#include "camcal/distortion.hpp"
#include "camcal/metrics.hpp"
#include "camcal/scene.hpp"
#include "camcal/serial_ref.hpp"

using namespace camcal;

namespace {

double now_ms() {
  using namespace std::chrono;
  return duration<double, std::milli>(steady_clock::now().time_since_epoch()).count();
}

template <typename F>
double time_best_of(int runs, F&& f) {
  double best = 1e300;
  for (int i = 0; i < runs; ++i) {
    const double t0 = now_ms();
    f();
    best = std::min(best, now_ms() - t0);
  }
  return best;
}

double max_abs_diff(const Image& a, const Image& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    m = std::max(m, std::abs(a.samples[i] - b.samples[i]));
  }
  return m;
}

void row(const char* name, double serial_ms, double parallel_ms, double max_diff) {
  std::printf("%-18s %10.2f %10.2f %9.2fx   %.3e\n", name, serial_ms, parallel_ms,
              serial_ms / parallel_ms, max_diff);
}

}  // namespace

int main(int argc, char** argv) {
  int width = 512, height = 512, cameras = 9;
  if (argc == 4) {
    width = std::atoi(argv[1]);
    height = std::atoi(argv[2]);
    cameras = std::atoi(argv[3]);
  } else if (argc != 1) {
    std::fprintf(stderr, "usage: camcal-bench [width height cameras]\n");
    return 1;
  }

  const Image truth = make_scene(0, width, height);
  const SyntheticStack synth = synthesize_stack(truth, cameras, 42, Severity::Standard);
  const ImageStack& stack = synth.stack;
  const WeightMap weights = deviation_weights(stack);
  const Image& a = stack.images[0];
  const Image& b = stack.images[1];
  const int runs = 3;

  std::printf("stack: %dx%d, %d cameras, %d channels\n\n", width, height, cameras,
              truth.channels);
  std::printf("%-18s %10s %10s %10s   %s\n", "kernel", "serial ms", "omp ms", "speedup",
              "max |diff|");

  {
    Image s, p;
    const double ts = time_best_of(runs, [&] { s = serial::pixel_mean(stack); });
    const double tp = time_best_of(runs, [&] { p = pixel_mean(stack); });
    row("pixel_mean", ts, tp, max_abs_diff(s, p));
  }
  {
    Image s, p;
    const double ts = time_best_of(runs, [&] { s = serial::pixel_std(stack); });
    const double tp = time_best_of(runs, [&] { p = pixel_std(stack); });
    row("pixel_std", ts, tp, max_abs_diff(s, p));
  }
  {
    Image s, p;
    const double ts =
        time_best_of(runs, [&] { s = serial::pixel_weighted_mean(stack, weights); });
    const double tp = time_best_of(runs, [&] { p = pixel_weighted_mean(stack, weights); });
    row("weighted_mean", ts, tp, max_abs_diff(s, p));
  }
  {
    Image s, p;
    const double ts = time_best_of(runs, [&] { s = serial::pixel_median(stack); });
    const double tp = time_best_of(runs, [&] { p = pixel_median(stack); });
    row("pixel_median", ts, tp, max_abs_diff(s, p));
  }
  {
    Image s, p;
    const double ts =
        time_best_of(runs, [&] { s = serial::pixel_weighted_median(stack, weights); });
    const double tp =
        time_best_of(runs, [&] { p = pixel_weighted_median(stack, weights); });
    row("weighted_median", ts, tp, max_abs_diff(s, p));
  }
  {
    double s = 0, p = 0;
    const double ts = time_best_of(runs, [&] { s = serial::mse(a, b); });
    const double tp = time_best_of(runs, [&] { p = mse(a, b); });
    row("mse", ts, tp, std::abs(s - p));
  }
  {
    Histogram s, p;
    const double ts = time_best_of(runs, [&] { s = serial::histogram(a); });
    const double tp = time_best_of(runs, [&] { p = histogram(a); });
    std::uint64_t diff = 0;
    for (std::size_t i = 0; i < s.bins.size(); ++i) {
      diff = std::max(diff, s.bins[i] > p.bins[i] ? s.bins[i] - p.bins[i]
                                                  : p.bins[i] - s.bins[i]);
    }
    row("histogram", ts, tp, static_cast<double>(diff));
  }
  {
    double s = 0, p = 0;
    const double ts = time_best_of(runs, [&] { s = serial::perceptual_diff(a, b); });
    const double tp = time_best_of(runs, [&] { p = perceptual_diff(a, b); });
    row("perceptual_diff", ts, tp, std::abs(s - p));
  }
  return 0;
}
