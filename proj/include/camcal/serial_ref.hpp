#pragma once

#include "camcal/consensus.hpp"
#include "camcal/image.hpp"

// Naive single-threaded kernels. Tests use them as brute-force oracles for
// the parallel implementations and the bench target times both sides. They
// stay deliberately straight-line: no clamping tricks, no shared buffers.
namespace camcal::serial {

Image pixel_mean(const ImageStack& stack);
Image pixel_std(const ImageStack& stack);
Image pixel_weighted_mean(const ImageStack& stack, const WeightMap& weights);
Image pixel_median(const ImageStack& stack);

// Exhaustive objective scan: evaluates sum_n w_n |x_n - v| at every candidate
// v = x_k and keeps the first strict minimum in ascending value order.
Image pixel_weighted_median(const ImageStack& stack, const WeightMap& weights);

double mse(const Image& a, const Image& b);
Histogram histogram(const Image& img);

// Direct sliding-window evaluation, no summed-area tables.
double perceptual_diff(const Image& a, const Image& b);

}  // namespace camcal::serial
