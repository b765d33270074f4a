#include "camcal/serial_ref.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "camcal/color.hpp"
#include "camcal/error.hpp"

namespace camcal::serial {

namespace {

Image blank_like(const ImageStack& stack) {
  validate_stack(stack);
  Image out = stack.images[0];
  std::fill(out.samples.begin(), out.samples.end(), 0.0);
  return out;
}

}  // namespace

Image pixel_mean(const ImageStack& stack) {
  Image out = blank_like(stack);
  const std::size_t n = stack.images.size();
  for (std::size_t i = 0; i < out.samples.size(); ++i) {
    double sum = 0.0;
    for (std::size_t k = 0; k < n; ++k) sum += stack.images[k].samples[i];
    out.samples[i] = sum / n;
  }
  return out;
}

Image pixel_std(const ImageStack& stack) {
  Image out = blank_like(stack);
  const std::size_t n = stack.images.size();
  for (std::size_t i = 0; i < out.samples.size(); ++i) {
    double sum = 0.0;
    for (std::size_t k = 0; k < n; ++k) sum += stack.images[k].samples[i];
    const double mean = sum / n;
    double sq = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const double d = stack.images[k].samples[i] - mean;
      sq += d * d;
    }
    out.samples[i] = std::sqrt(sq / n);
  }
  return out;
}

Image pixel_weighted_mean(const ImageStack& stack, const WeightMap& weights) {
  Image out = blank_like(stack);
  if (!weights.matches(stack)) throw Error("serial: weight map does not match stack");
  const std::size_t n = stack.images.size();
  for (std::size_t i = 0; i < out.samples.size(); ++i) {
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const double w = weights.at(static_cast<int>(k), i);
      num += w * stack.images[k].samples[i];
      den += w;
    }
    out.samples[i] = num / den;
  }
  return out;
}

Image pixel_median(const ImageStack& stack) {
  Image out = blank_like(stack);
  const std::size_t n = stack.images.size();
  std::vector<double> buf(n);
  for (std::size_t i = 0; i < out.samples.size(); ++i) {
    for (std::size_t k = 0; k < n; ++k) buf[k] = stack.images[k].samples[i];
    std::sort(buf.begin(), buf.end());
    out.samples[i] =
        (n % 2 == 1) ? buf[n / 2] : 0.5 * (buf[n / 2 - 1] + buf[n / 2]);
  }
  return out;
}

Image pixel_weighted_median(const ImageStack& stack, const WeightMap& weights) {
  Image out = blank_like(stack);
  if (!weights.matches(stack)) throw Error("serial: weight map does not match stack");
  const std::size_t n = stack.images.size();
  std::vector<std::pair<double, double>> vw(n);  // (value, weight) sorted by value
  for (std::size_t i = 0; i < out.samples.size(); ++i) {
    for (std::size_t k = 0; k < n; ++k) {
      vw[k] = {stack.images[k].samples[i], weights.at(static_cast<int>(k), i)};
    }
    std::sort(vw.begin(), vw.end());
    double best_v = vw[0].first;
    double best_obj = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      best_obj += vw[k].second * std::abs(vw[k].first - best_v);
    }
    for (std::size_t c = 1; c < n; ++c) {
      double obj = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        obj += vw[k].second * std::abs(vw[k].first - vw[c].first);
      }
      if (obj < best_obj) {
        best_obj = obj;
        best_v = vw[c].first;
      }
    }
    out.samples[i] = best_v;
  }
  return out;
}

double mse(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw Error("serial mse: shape mismatch");
  double sq = 0.0;
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    const double d = a.samples[i] - b.samples[i];
    sq += d * d;
  }
  return sq / a.sample_count();
}

Histogram histogram(const Image& img) {
  Histogram h;
  h.channels = img.channels;
  h.total = img.pixel_count();
  h.bins.assign(static_cast<std::size_t>(img.channels) * kHistogramBins, 0);
  for (std::size_t p = 0; p < img.pixel_count(); ++p) {
    for (int c = 0; c < img.channels; ++c) {
      ++h.bins[static_cast<std::size_t>(c) * kHistogramBins +
               intensity_bin(img.samples[p * img.channels + c])];
    }
  }
  return h;
}

double perceptual_diff(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw Error("serial perceptual_diff: shape mismatch");
  const int w = a.width, h = a.height;
  const bool color = a.channels == 3;
  const std::size_t pixels = a.pixel_count();

  std::vector<double> d_light(pixels), d_chroma(color ? pixels : 0),
      d_hue(color ? pixels : 0);
  for (std::size_t p = 0; p < pixels; ++p) {
    if (color) {
      const Lab la = srgb_to_lab(a.samples[p * 3], a.samples[p * 3 + 1],
                                 a.samples[p * 3 + 2]);
      const Lab lb = srgb_to_lab(b.samples[p * 3], b.samples[p * 3 + 1],
                                 b.samples[p * 3 + 2]);
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

  const int win_w = std::min(11, w);
  const int win_h = std::min(11, h);
  const double inv_area = 1.0 / (static_cast<double>(win_w) * win_h);
  constexpr double kC = 400.0;
  double total = 0.0;
  int windows = 0;
  for (int y = 0; y + win_h <= h; ++y) {
    for (int x = 0; x + win_w <= w; ++x) {
      double ml = 0.0, mc = 0.0, mh = 0.0;
      for (int dy = 0; dy < win_h; ++dy) {
        for (int dx = 0; dx < win_w; ++dx) {
          const std::size_t p = static_cast<std::size_t>(y + dy) * w + (x + dx);
          ml += d_light[p];
          if (color) {
            mc += d_chroma[p];
            mh += d_hue[p];
          }
        }
      }
      double prod = kC / (kC + ml * inv_area);
      if (color) {
        prod *= kC / (kC + mc * inv_area);
        prod *= kC / (kC + mh * inv_area);
      }
      total += prod;
      ++windows;
    }
  }
  return 100.0 * (1.0 - total / windows);
}

}  // namespace camcal::serial
