#pragma once

#include <string>
#include <vector>

#include "camcal/consensus.hpp"
#include "camcal/image.hpp"

namespace camcal {

enum class CalibratorKind { Linear, Polynomial, AffineColor, Ccmf, HistogramMatch };

std::string to_string(CalibratorKind k);
CalibratorKind calibrator_kind_from_string(const std::string& s);

// One fitted source -> reference color mapping. Which members are populated
// depends on `kind`:
//   Linear          coeffs[c] = {offset, gain}            (ascending powers)
//   Polynomial      coeffs[c] = degree+1 ascending coefficients
//   AffineColor     affine    = row-major C x (C+1), last column = translation
//   Ccmf            lookup[c] = monotone 256-entry table, coeffs[c] = smoothing
//                   polynomial fitted to it (application evaluates the polynomial)
//   HistogramMatch  lookup[c] = monotone 256-entry table, applied by bin index
struct CalibrationModel {
  CalibratorKind kind = CalibratorKind::Linear;
  int channels = 0;
  int degree = 1;
  std::vector<std::vector<double>> coeffs;
  std::vector<double> affine;
  std::vector<std::vector<double>> lookup;
  // Root-mean-square residual of the fitted mapping over the samples it was
  // fitted on (model output vs reference, both clamped to [0,1]).
  double fit_residual = 0.0;
  // Human-readable fallback notes: "channel 2: zero variance, identity gain",
  // "channel 0: rank deficient, effective degree 1", "ridge-regularized", ...
  std::vector<std::string> flags;

  double gain(int channel) const { return coeffs[channel][1]; }
  double offset(int channel) const { return coeffs[channel][0]; }
};

struct CalibratorOptions {
  int polynomial_degree = 2;  // 1..5
  int ccmf_degree = 3;        // 1..5, smoothing polynomial
  // Fit every stride-th pixel; 1 = all pixels. Application is always dense.
  int stride = 1;
};

// Per-channel least-squares straight line r ~ gain * s + offset, closed form.
// Zero-variance channels fall back to gain = 1, offset = mean(r) - mean(s).
CalibrationModel fit_linear(const Image& source, const Image& reference, int stride = 1);

// Per-channel least-squares polynomial in the scalar intensity, solved by
// column-pivoted QR. Rank-deficient designs reduce the effective degree.
CalibrationModel fit_polynomial(const Image& source, const Image& reference, int degree,
                                int stride = 1);

// Cross-channel affine map: reference_pixel ~ A * [source_pixel; 1], fitted
// over all pixels. Rank-deficient normal equations get a 1e-8 ridge.
CalibrationModel fit_affine_color(const Image& source, const Image& reference,
                                  int stride = 1);

// Cross-correlation model function. Per channel: joint 256x256 histogram of
// (source bin, reference bin) -> per source bin the count-weighted centroid of
// reference bin values -> isotonic regression -> smoothing polynomial.
// Empty source bins are filled by linear interpolation between non-empty
// neighbours (flat extension at the ends) and flagged.
CalibrationModel fit_ccmf(const Image& source, const Image& reference, int poly_degree,
                          int stride = 1);

// Classic CDF matching: lookup[k] = midpoint value of the first reference bin
// whose CDF reaches the source CDF at bin k.
CalibrationModel fit_histogram_match(const Image& source, const Image& reference,
                                     int stride = 1);

// Per-pixel model evaluation, clamped to [0,1]. Throws on channel mismatch.
Image apply_model(const Image& img, const CalibrationModel& model);

double evaluate_model_scalar(const CalibrationModel& model, int channel, double s);

struct CalibratedStack {
  ImageStack images;
  std::vector<CalibrationModel> models;
  ConsensusImage reference;
};

// Fits one model per camera against the shared reference and applies it.
// Per-camera failures are rethrown with the camera index attached.
CalibratedStack calibrate_stack(const ImageStack& stack, const ConsensusImage& reference,
                                CalibratorKind kind, const CalibratorOptions& opts = {});

// Same, against an arbitrary reference image (e.g. a stack member); the
// result records it with no estimator tag.
CalibratedStack calibrate_stack(const ImageStack& stack, const Image& reference,
                                CalibratorKind kind, const CalibratorOptions& opts = {});

std::string model_to_json(const CalibrationModel& model);
CalibrationModel model_from_json(const std::string& json);
void save_models(const std::vector<CalibrationModel>& models, const std::string& path);
std::vector<CalibrationModel> load_models(const std::string& path);

}  // namespace camcal
