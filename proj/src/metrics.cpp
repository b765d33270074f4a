#include "camcal/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "camcal/color.hpp"
#include "camcal/error.hpp"

namespace camcal {

double mse(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw Error("mse: shape mismatch");
  const int height = a.height;
  const std::size_t row_samples = static_cast<std::size_t>(a.width) * a.channels;
  std::vector<long double> row_sq(height, 0.0L);
#pragma omp parallel for if (a.sample_count() >= kParallelCutoff)
  for (int y = 0; y < height; ++y) {
    const double* pa = a.samples.data() + y * row_samples;
    const double* pb = b.samples.data() + y * row_samples;
    long double sq = 0.0L;
    for (std::size_t i = 0; i < row_samples; ++i) {
      const long double d = pa[i] - pb[i];
      sq += d * d;
    }
    row_sq[y] = sq;
  }
  long double total = 0.0L;
  for (int y = 0; y < height; ++y) total += row_sq[y];
  return static_cast<double>(total / a.sample_count());
}

PsnrResult psnr(const Image& a, const Image& b) {
  const double e = mse(a, b);
  if (e == 0.0) return {kPsnrCapDb, true};
  return {std::min(kPsnrCapDb, 10.0 * std::log10(1.0 / e)), false};
}

namespace {

// Summed-area table with a zero top row / left column: sums of any rectangle
// come out of four lookups.
struct Sat {
  int width = 0, height = 0;
  std::vector<double> t;  // (height+1) x (width+1)

  void build(const std::vector<double>& plane, int w, int h) {
    width = w;
    height = h;
    t.assign(static_cast<std::size_t>(w + 1) * (h + 1), 0.0);
    for (int y = 0; y < h; ++y) {
      double run = 0.0;
      const double* src = plane.data() + static_cast<std::size_t>(y) * w;
      const double* up = t.data() + static_cast<std::size_t>(y) * (w + 1);
      double* row = t.data() + static_cast<std::size_t>(y + 1) * (w + 1);
      for (int x = 0; x < w; ++x) {
        run += src[x];
        row[x + 1] = up[x + 1] + run;
      }
    }
  }

  double rect(int x0, int y0, int x1, int y1) const {  // half-open
    const std::size_t stride = width + 1;
    return t[y1 * stride + x1] - t[y0 * stride + x1] - t[y1 * stride + x0] +
           t[y0 * stride + x0];
  }
};

}  // namespace

double perceptual_diff(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw Error("perceptual_diff: shape mismatch");
  const int w = a.width, h = a.height;
  const std::int64_t pixels = static_cast<std::int64_t>(a.pixel_count());
  const bool color = a.channels == 3;

  // Per-pixel squared-difference maps in the opponent space.
  std::vector<double> d_light(pixels), d_chroma(color ? pixels : 0),
      d_hue(color ? pixels : 0);
#pragma omp parallel for if (a.sample_count() >= kParallelCutoff)
  for (std::int64_t p = 0; p < pixels; ++p) {
    if (color) {
      const double* pa = a.samples.data() + p * 3;
      const double* pb = b.samples.data() + p * 3;
      const Lab la = srgb_to_lab(pa[0], pa[1], pa[2]);
      const Lab lb = srgb_to_lab(pb[0], pb[1], pb[2]);
      const double dl = la.l - lb.l;
      const double ca = std::sqrt(la.a * la.a + la.b * la.b);
      const double cb = std::sqrt(lb.a * lb.a + lb.b * lb.b);
      const double dc = ca - cb;
      const double da = la.a - lb.a, db = la.b - lb.b;
      d_light[p] = dl * dl;
      d_chroma[p] = dc * dc;
      d_hue[p] = std::max(0.0, da * da + db * db - dc * dc);
    } else {
      const double dl = gray_to_lab(a.samples[p]).l - gray_to_lab(b.samples[p]).l;
      d_light[p] = dl * dl;
    }
  }

  Sat sat_l, sat_c, sat_h;
  sat_l.build(d_light, w, h);
  if (color) {
    sat_c.build(d_chroma, w, h);
    sat_h.build(d_hue, w, h);
  }

  // Sliding windows, shrunk to the whole image when it is smaller than 11.
  const int win_w = std::min(kPerceptualWindow, w);
  const int win_h = std::min(kPerceptualWindow, h);
  const double inv_area = 1.0 / (static_cast<double>(win_w) * win_h);
  const int pos_y = h - win_h + 1, pos_x = w - win_w + 1;
  constexpr double kC = 400.0;

  std::vector<long double> row_sum(pos_y, 0.0L);
#pragma omp parallel for if (a.sample_count() >= kParallelCutoff)
  for (int y = 0; y < pos_y; ++y) {
    long double s = 0.0L;
    for (int x = 0; x < pos_x; ++x) {
      double prod = kC / (kC + sat_l.rect(x, y, x + win_w, y + win_h) * inv_area);
      if (color) {
        prod *= kC / (kC + sat_c.rect(x, y, x + win_w, y + win_h) * inv_area);
        prod *= kC / (kC + sat_h.rect(x, y, x + win_w, y + win_h) * inv_area);
      }
      s += prod;
    }
    row_sum[y] = s;
  }
  long double total = 0.0L;
  for (int y = 0; y < pos_y; ++y) total += row_sum[y];
  const double mean_prod =
      static_cast<double>(total / (static_cast<long double>(pos_y) * pos_x));
  return 100.0 * (1.0 - mean_prod);
}

double histogram_spread(const ImageStack& stack) {
  validate_stack(stack);
  const std::size_t n = stack.images.size();
  std::vector<Histogram> hists;
  hists.reserve(n);
  for (const Image& img : stack.images) hists.push_back(histogram(img));

  const int channels = stack.images[0].channels;
  long double total = 0.0L;
  for (int c = 0; c < channels; ++c) {
    for (int k = 0; k < kHistogramBins; ++k) {
      long double sum = 0.0L, sum_sq = 0.0L;
      for (std::size_t i = 0; i < n; ++i) {
        const long double v = static_cast<long double>(hists[i].at(c, k));
        sum += v;
        sum_sq += v * v;
      }
      const long double mean = sum / n;
      const long double var = std::max(0.0L, sum_sq / n - mean * mean);
      total += std::sqrt(var);
    }
  }
  return static_cast<double>(total / stack.images[0].pixel_count());
}

MetricReport score_stack(const ImageStack& stack, const Image& truth) {
  validate_stack(stack);
  if (!stack.images[0].same_shape(truth)) throw Error("score_stack: truth shape mismatch");
  MetricReport rep;
  rep.per_camera.reserve(stack.images.size());
  double psnr_sum = 0.0, perc_sum = 0.0;
  for (const Image& img : stack.images) {
    CameraScore s;
    s.psnr = psnr(img, truth);
    s.perceptual = perceptual_diff(img, truth);
    psnr_sum += s.psnr.db;
    perc_sum += s.perceptual;
    rep.per_camera.push_back(s);
  }
  rep.mean_psnr_db = psnr_sum / stack.images.size();
  rep.mean_perceptual = perc_sum / stack.images.size();
  rep.hist_spread = histogram_spread(stack);
  return rep;
}

std::pair<MetricReport, MetricReport> report(const ImageStack& stack_before,
                                             const ImageStack& stack_after,
                                             const Image& truth) {
  return {score_stack(stack_before, truth), score_stack(stack_after, truth)};
}

}  // namespace camcal
