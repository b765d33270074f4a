#include "camcal/consensus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

namespace camcal {

std::string to_string(ConsensusMethod m) {
  switch (m) {
    case ConsensusMethod::Mean: return "mean";
    case ConsensusMethod::WeightedMean: return "weighted-mean";
    case ConsensusMethod::Median: return "median";
    case ConsensusMethod::WeightedMedian: return "weighted-median";
  }
  return "?";
}

ConsensusMethod consensus_method_from_string(const std::string& s) {
  if (s == "mean") return ConsensusMethod::Mean;
  if (s == "weighted-mean") return ConsensusMethod::WeightedMean;
  if (s == "median") return ConsensusMethod::Median;
  if (s == "weighted-median") return ConsensusMethod::WeightedMedian;
  throw Error("unknown consensus method '" + s + "'");
}

bool WeightMap::matches(const ImageStack& stack) const {
  if (stack.count() != count || stack.images.empty()) return false;
  const Image& first = stack.front();
  return first.width == width && first.height == height && first.channels == channels &&
         values.size() == plane() * count;
}

namespace {

Image like_stack(const ImageStack& stack) {
  const Image& f = stack.front();
  return Image(f.width, f.height, f.channels, 0.0, f.source_bit_depth);
}

}  // namespace

// Per-pixel accumulation happens in sorted value order so that shuffling the
// stack cannot move the result by even an ulp (exact permutation invariance).
Image pixel_mean(const ImageStack& stack) {
  validate_stack(stack);
  Image out = like_stack(stack);
  const std::int64_t count = static_cast<std::int64_t>(out.sample_count());
  const int n = stack.count();

#pragma omp parallel if (out.sample_count() >= kParallelCutoff)
  {
    std::vector<double> buf(n);
#pragma omp for
    for (std::int64_t s = 0; s < count; ++s) {
      for (int k = 0; k < n; ++k) buf[k] = stack.images[k].samples[s];
      std::sort(buf.begin(), buf.end());
      double sum = 0.0;
      for (int k = 0; k < n; ++k) sum += buf[k];
      out.samples[s] = std::clamp(sum / n, buf.front(), buf.back());
    }
  }
  return out;
}

Image pixel_std(const ImageStack& stack) {
  validate_stack(stack);
  Image out = like_stack(stack);
  const std::int64_t count = static_cast<std::int64_t>(out.sample_count());
  const int n = stack.count();

#pragma omp parallel if (out.sample_count() >= kParallelCutoff)
  {
    std::vector<double> buf(n);
#pragma omp for
    for (std::int64_t s = 0; s < count; ++s) {
      for (int k = 0; k < n; ++k) buf[k] = stack.images[k].samples[s];
      std::sort(buf.begin(), buf.end());
      double sum = 0.0;
      for (int k = 0; k < n; ++k) sum += buf[k];
      const double mu = sum / n;
      double sq = 0.0;
      for (int k = 0; k < n; ++k) {
        const double d = buf[k] - mu;
        sq += d * d;
      }
      out.samples[s] = clamp01(std::sqrt(sq / n));
    }
  }
  return out;
}

WeightMap deviation_weights(const ImageStack& stack, const WeightOptions& opts) {
  validate_stack(stack);
  const Image& f = stack.front();
  WeightMap map;
  map.width = f.width;
  map.height = f.height;
  map.channels = f.channels;
  map.count = stack.count();
  map.values.resize(map.plane() * map.count);

  const std::int64_t count = static_cast<std::int64_t>(map.plane());
  const int n = map.count;

  if (opts.mode == WeightMode::SharedSigma) {
    const Image sigma = pixel_std(stack);
#pragma omp parallel for if (map.plane() >= kParallelCutoff)
    for (std::int64_t s = 0; s < count; ++s) {
      const double w = deviation_weight(sigma.samples[s], opts.scale);
      for (int k = 0; k < n; ++k) map.at(k, s) = w;
    }
    return map;
  }

  const Image mu = pixel_mean(stack);
#pragma omp parallel for if (map.plane() >= kParallelCutoff)
  for (std::int64_t s = 0; s < count; ++s) {
    const double m = mu.samples[s];
    for (int k = 0; k < n; ++k) {
      map.at(k, s) = deviation_weight(std::abs(stack.images[k].samples[s] - m), opts.scale);
    }
  }
  return map;
}

Image pixel_weighted_mean(const ImageStack& stack, const WeightMap& weights) {
  validate_stack(stack);
  if (!weights.matches(stack)) throw Error("weight map shape does not match the stack");
  Image out = like_stack(stack);
  const std::int64_t count = static_cast<std::int64_t>(out.sample_count());
  const int n = stack.count();

#pragma omp parallel if (out.sample_count() >= kParallelCutoff)
  {
    std::vector<std::pair<double, double>> buf(n);  // (value, weight)
#pragma omp for
    for (std::int64_t s = 0; s < count; ++s) {
      for (int k = 0; k < n; ++k) buf[k] = {stack.images[k].samples[s], weights.at(k, s)};
      std::sort(buf.begin(), buf.end());
      double num = 0.0, den = 0.0;
      for (int k = 0; k < n; ++k) {
        num += buf[k].second * buf[k].first;
        den += buf[k].second;
      }
      out.samples[s] = std::clamp(num / den, buf.front().first, buf.back().first);
    }
  }
  return out;
}

Image pixel_median(const ImageStack& stack) {
  validate_stack(stack);
  Image out = like_stack(stack);
  const std::int64_t count = static_cast<std::int64_t>(out.sample_count());
  const int n = stack.count();

#pragma omp parallel if (out.sample_count() >= kParallelCutoff)
  {
    std::vector<double> buf(n);
#pragma omp for
    for (std::int64_t s = 0; s < count; ++s) {
      for (int k = 0; k < n; ++k) buf[k] = stack.images[k].samples[s];
      std::sort(buf.begin(), buf.end());
      out.samples[s] = (n % 2 == 1) ? buf[n / 2] : 0.5 * (buf[n / 2 - 1] + buf[n / 2]);
    }
  }
  return out;
}

Image pixel_weighted_median(const ImageStack& stack, const WeightMap& weights) {
  validate_stack(stack);
  if (!weights.matches(stack)) throw Error("weight map shape does not match the stack");
  Image out = like_stack(stack);
  const std::int64_t count = static_cast<std::int64_t>(out.sample_count());
  const int n = stack.count();

#pragma omp parallel if (out.sample_count() >= kParallelCutoff)
  {
    std::vector<std::pair<double, double>> buf(n);  // (value, weight)
#pragma omp for
    for (std::int64_t s = 0; s < count; ++s) {
      for (int k = 0; k < n; ++k) buf[k] = {stack.images[k].samples[s], weights.at(k, s)};
      std::sort(buf.begin(), buf.end());
      double total = 0.0;
      for (int k = 0; k < n; ++k) total += buf[k].second;
      const double half = 0.5 * total;
      double cum = 0.0;
      double value = buf.back().first;
      for (int k = 0; k < n; ++k) {
        cum += buf[k].second;
        if (cum >= half) {
          value = buf[k].first;
          break;
        }
      }
      out.samples[s] = value;
    }
  }
  return out;
}

ConsensusImage build_consensus(const ImageStack& stack, ConsensusMethod method,
                               const WeightOptions& opts) {
  validate_stack(stack);
  ConsensusImage out;
  out.method = method;
  switch (method) {
    case ConsensusMethod::Mean:
      out.image = pixel_mean(stack);
      break;
    case ConsensusMethod::Median:
      out.image = pixel_median(stack);
      break;
    case ConsensusMethod::WeightedMean: {
      WeightMap w = deviation_weights(stack, opts);
      out.image = pixel_weighted_mean(stack, w);
      out.weights = std::move(w);
      break;
    }
    case ConsensusMethod::WeightedMedian: {
      WeightMap w = deviation_weights(stack, opts);
      out.image = pixel_weighted_median(stack, w);
      out.weights = std::move(w);
      break;
    }
  }
  return out;
}

}  // namespace camcal
