#include "camcal/calibrate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>

#include <Eigen/Dense>

#include "camcal/error.hpp"
#include "json.hpp"

namespace camcal {

std::string to_string(CalibratorKind k) {
  switch (k) {
    case CalibratorKind::Linear: return "linear";
    case CalibratorKind::Polynomial: return "polynomial";
    case CalibratorKind::AffineColor: return "affine";
    case CalibratorKind::Ccmf: return "ccmf";
    case CalibratorKind::HistogramMatch: return "histmatch";
  }
  return "?";
}

CalibratorKind calibrator_kind_from_string(const std::string& s) {
  if (s == "linear") return CalibratorKind::Linear;
  if (s == "polynomial") return CalibratorKind::Polynomial;
  if (s == "affine") return CalibratorKind::AffineColor;
  if (s == "ccmf") return CalibratorKind::Ccmf;
  if (s == "histmatch") return CalibratorKind::HistogramMatch;
  throw Error("unknown calibrator '" + s +
              "' (linear, polynomial, affine, ccmf, histmatch)");
}

namespace {

void check_fit_inputs(const Image& source, const Image& reference, int stride) {
  if (!source.same_shape(reference)) throw Error("fit: source/reference shape mismatch");
  if (source.samples.empty()) throw Error("fit: empty image");
  if (stride < 1) throw Error("fit: stride must be >= 1");
}

// Accumulates f(s, r) per channel over every stride-th pixel. Row partials are
// reduced in row order so the result does not depend on the thread count.
template <typename Init, typename PerPixel>
void strided_rows(const Image& source, int stride, Init init, PerPixel per_pixel) {
  const int height = source.height;
  const int width = source.width;
#pragma omp parallel for if (source.sample_count() >= kParallelCutoff)
  for (int y = 0; y < height; ++y) {
    auto acc = init(y);
    const std::int64_t row_base = static_cast<std::int64_t>(y) * width;
    // first pixel in this row whose global index is a multiple of stride
    std::int64_t x0 = (stride - row_base % stride) % stride;
    for (std::int64_t x = x0; x < width; x += stride) {
      per_pixel(acc, (row_base + x) * source.channels);
    }
  }
}

double horner(const std::vector<double>& coeffs, double x) {
  double v = 0.0;
  for (std::size_t i = coeffs.size(); i-- > 0;) v = v * x + coeffs[i];
  return v;
}

// Pivot ratio below which a design column counts as dependent. Eigen's
// default (epsilon * size) lets the fp noise of exactly-duplicated rows pass
// as full rank; anything conditioned past 1e10 is unusable for a double
// least-squares fit anyway.
constexpr double kRankThreshold = 1e-10;

// Least-squares ascending-coefficient polynomial through (xs, ys), solved by
// column-pivoted QR. On rank deficiency the degree is reduced until the
// design has full rank; returns the effective degree. `out` is zero-padded
// to degree+1 entries.
int poly_qr_fit(const std::vector<double>& xs, const std::vector<double>& ys, int degree,
                std::vector<double>& out) {
  const std::int64_t n = static_cast<std::int64_t>(xs.size());
  out.assign(degree + 1, 0.0);
  for (int d = degree; d >= 1; --d) {
    Eigen::MatrixXd v(n, d + 1);
    for (std::int64_t i = 0; i < n; ++i) {
      double p = 1.0;
      for (int j = 0; j <= d; ++j) {
        v(i, j) = p;
        p *= xs[i];
      }
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(v);
    qr.setThreshold(kRankThreshold);
    if (qr.rank() < d + 1) continue;
    Eigen::VectorXd c = qr.solve(Eigen::Map<const Eigen::VectorXd>(ys.data(), n));
    for (int j = 0; j <= d; ++j) out[j] = c(j);
    return d;
  }
  out[0] = n > 0 ? std::accumulate(ys.begin(), ys.end(), 0.0) / n : 0.0;
  return 0;
}

// RMS of (clamped model output - reference) over the fitted samples.
double fit_residual_rms(const CalibrationModel& model, const Image& source,
                        const Image& reference, int stride) {
  Image mapped = apply_model(source, model);
  std::vector<long double> row_sq(source.height, 0.0L);
  std::vector<std::int64_t> row_n(source.height, 0);
  const int channels = source.channels;
  strided_rows(source, stride, [&](int y) { return y; },
               [&](int y, std::int64_t base) {
                 long double sq = 0.0L;
                 for (int c = 0; c < channels; ++c) {
                   const double d = mapped.samples[base + c] - reference.samples[base + c];
                   sq += static_cast<long double>(d) * d;
                 }
                 row_sq[y] += sq;
                 row_n[y] += channels;
               });
  long double sq = 0.0L;
  std::int64_t n = 0;
  for (int y = 0; y < source.height; ++y) {
    sq += row_sq[y];
    n += row_n[y];
  }
  return n > 0 ? static_cast<double>(std::sqrt(sq / n)) : 0.0;
}

}  // namespace

CalibrationModel fit_linear(const Image& source, const Image& reference, int stride) {
  check_fit_inputs(source, reference, stride);
  const int channels = source.channels;
  const int height = source.height;

  struct Sums {
    long double s = 0, r = 0, ss = 0, sr = 0;
    std::int64_t n = 0;
  };
  std::vector<Sums> rows(static_cast<std::size_t>(height) * channels);
  strided_rows(source, stride, [&](int y) { return y; },
               [&](int y, std::int64_t base) {
                 for (int c = 0; c < channels; ++c) {
                   Sums& a = rows[static_cast<std::size_t>(y) * channels + c];
                   const long double s = source.samples[base + c];
                   const long double r = reference.samples[base + c];
                   a.s += s;
                   a.r += r;
                   a.ss += s * s;
                   a.sr += s * r;
                   a.n += 1;
                 }
               });

  CalibrationModel model;
  model.kind = CalibratorKind::Linear;
  model.channels = channels;
  model.degree = 1;
  model.coeffs.resize(channels);
  for (int c = 0; c < channels; ++c) {
    Sums t;
    for (int y = 0; y < height; ++y) {
      const Sums& a = rows[static_cast<std::size_t>(y) * channels + c];
      t.s += a.s;
      t.r += a.r;
      t.ss += a.ss;
      t.sr += a.sr;
      t.n += a.n;
    }
    const long double mean_s = t.s / t.n;
    const long double mean_r = t.r / t.n;
    const long double sxx = t.ss - t.n * mean_s * mean_s;
    const long double sxy = t.sr - t.n * mean_s * mean_r;
    double gain, offset;
    if (sxx <= 1e-12L * t.n) {
      gain = 1.0;
      offset = static_cast<double>(mean_r - mean_s);
      model.flags.push_back("channel " + std::to_string(c) +
                            ": zero variance, identity gain");
    } else {
      gain = static_cast<double>(sxy / sxx);
      offset = static_cast<double>(mean_r - sxy / sxx * mean_s);
    }
    model.coeffs[c] = {offset, gain};
  }
  model.fit_residual = fit_residual_rms(model, source, reference, stride);
  return model;
}

CalibrationModel fit_polynomial(const Image& source, const Image& reference, int degree,
                                int stride) {
  check_fit_inputs(source, reference, stride);
  if (degree < 1 || degree > 5) throw Error("polynomial degree must be in [1,5]");
  const int channels = source.channels;

  CalibrationModel model;
  model.kind = CalibratorKind::Polynomial;
  model.channels = channels;
  model.degree = degree;
  model.coeffs.resize(channels);
  std::vector<double> xs, ys;
  for (int c = 0; c < channels; ++c) {
    xs.clear();
    ys.clear();
    for (std::int64_t p = 0; p < static_cast<std::int64_t>(source.pixel_count());
         p += stride) {
      xs.push_back(source.samples[p * channels + c]);
      ys.push_back(reference.samples[p * channels + c]);
    }
    const int effective = poly_qr_fit(xs, ys, degree, model.coeffs[c]);
    if (effective < degree) {
      model.flags.push_back("channel " + std::to_string(c) +
                            ": rank deficient, effective degree " +
                            std::to_string(effective));
    }
  }
  model.fit_residual = fit_residual_rms(model, source, reference, stride);
  return model;
}

CalibrationModel fit_affine_color(const Image& source, const Image& reference, int stride) {
  check_fit_inputs(source, reference, stride);
  const int channels = source.channels;
  const int dim = channels + 1;  // source pixel with appended 1
  const int height = source.height;

  // Normal equations G x_c = b_c per output channel, G = sum aug aug^T.
  const int gsz = dim * dim, bsz = dim * channels;
  std::vector<long double> row_g(static_cast<std::size_t>(height) * gsz, 0.0L);
  std::vector<long double> row_b(static_cast<std::size_t>(height) * bsz, 0.0L);
  strided_rows(source, stride, [&](int y) { return y; },
               [&](int y, std::int64_t base) {
                 long double aug[5];
                 for (int c = 0; c < channels; ++c) aug[c] = source.samples[base + c];
                 aug[channels] = 1.0L;
                 long double* g = row_g.data() + static_cast<std::size_t>(y) * gsz;
                 long double* b = row_b.data() + static_cast<std::size_t>(y) * bsz;
                 for (int i = 0; i < dim; ++i) {
                   for (int j = 0; j < dim; ++j) g[i * dim + j] += aug[i] * aug[j];
                   for (int c = 0; c < channels; ++c) {
                     b[i * channels + c] += aug[i] * reference.samples[base + c];
                   }
                 }
               });
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(dim, dim);
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(dim, channels);
  for (int y = 0; y < height; ++y) {
    const long double* rg = row_g.data() + static_cast<std::size_t>(y) * gsz;
    const long double* rb = row_b.data() + static_cast<std::size_t>(y) * bsz;
    for (int i = 0; i < dim; ++i) {
      for (int j = 0; j < dim; ++j) g(i, j) += static_cast<double>(rg[i * dim + j]);
      for (int c = 0; c < channels; ++c) {
        b(i, c) += static_cast<double>(rb[i * channels + c]);
      }
    }
  }

  CalibrationModel model;
  model.kind = CalibratorKind::AffineColor;
  model.channels = channels;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(g);
  qr.setThreshold(kRankThreshold);
  if (qr.rank() < dim) {
    g.diagonal().array() += 1e-8;
    model.flags.push_back("rank deficient, ridge-regularized");
  }
  Eigen::MatrixXd x = g.ldlt().solve(b);  // dim x channels
  model.affine.resize(static_cast<std::size_t>(channels) * dim);
  for (int c = 0; c < channels; ++c) {
    for (int d = 0; d < dim; ++d) model.affine[c * dim + d] = x(d, c);
  }
  model.fit_residual = fit_residual_rms(model, source, reference, stride);
  return model;
}

namespace {

// Weighted pool-adjacent-violators; returns the non-decreasing fit.
std::vector<double> isotonic_fit(const std::vector<double>& y,
                                 const std::vector<double>& w) {
  struct Block {
    double sum_wy, sum_w;
    int len;
  };
  std::vector<Block> blocks;
  blocks.reserve(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    blocks.push_back({y[i] * w[i], w[i], 1});
    while (blocks.size() >= 2) {
      const Block& b = blocks[blocks.size() - 1];
      const Block& a = blocks[blocks.size() - 2];
      if (a.sum_wy * b.sum_w <= b.sum_wy * a.sum_w) break;  // a.mean <= b.mean
      blocks[blocks.size() - 2] = {a.sum_wy + b.sum_wy, a.sum_w + b.sum_w, a.len + b.len};
      blocks.pop_back();
    }
  }
  std::vector<double> out;
  out.reserve(y.size());
  for (const Block& blk : blocks) {
    const double v = blk.sum_wy / blk.sum_w;
    for (int i = 0; i < blk.len; ++i) out.push_back(v);
  }
  return out;
}

}  // namespace

CalibrationModel fit_ccmf(const Image& source, const Image& reference, int poly_degree,
                          int stride) {
  check_fit_inputs(source, reference, stride);
  if (poly_degree < 1 || poly_degree > 5) throw Error("ccmf degree must be in [1,5]");
  const int channels = source.channels;
  const int height = source.height;

  CalibrationModel model;
  model.kind = CalibratorKind::Ccmf;
  model.channels = channels;
  model.degree = poly_degree;
  model.coeffs.resize(channels);
  model.lookup.resize(channels);

  // Per source bin: pixel count and integer sum of reference bin indices.
  // Integer accumulation keeps the centroids independent of iteration order.
  std::vector<std::uint64_t> cnt(static_cast<std::size_t>(channels) * kHistogramBins);
  std::vector<std::uint64_t> sum(static_cast<std::size_t>(channels) * kHistogramBins);
  struct NoAcc {};
  strided_rows(source, stride, [](int) { return NoAcc{}; },
               [&](NoAcc&, std::int64_t base) {
                 for (int c = 0; c < channels; ++c) {
                   const int sb = intensity_bin(source.samples[base + c]);
                   const int rb = intensity_bin(reference.samples[base + c]);
                   const std::size_t k = static_cast<std::size_t>(c) * kHistogramBins + sb;
#pragma omp atomic
                   cnt[k] += 1;
#pragma omp atomic
                   sum[k] += static_cast<std::uint64_t>(rb);
                 }
               });
  (void)height;

  std::vector<double> xs(kHistogramBins), table(kHistogramBins), weights(kHistogramBins);
  for (int k = 0; k < kHistogramBins; ++k) xs[k] = k / 255.0;
  for (int c = 0; c < channels; ++c) {
    const std::uint64_t* ccnt = cnt.data() + static_cast<std::size_t>(c) * kHistogramBins;
    const std::uint64_t* csum = sum.data() + static_cast<std::size_t>(c) * kHistogramBins;
    int empty = 0;
    int prev = -1;  // last non-empty bin
    for (int k = 0; k < kHistogramBins; ++k) {
      if (ccnt[k] > 0) {
        table[k] = static_cast<double>(csum[k]) / ccnt[k] / 255.0;
        if (prev < 0) {
          for (int m = 0; m < k; ++m) table[m] = table[k];  // flat head
        } else if (prev < k - 1) {
          for (int m = prev + 1; m < k; ++m) {  // linear gap fill
            const double t = static_cast<double>(m - prev) / (k - prev);
            table[m] = table[prev] + t * (table[k] - table[prev]);
          }
        }
        prev = k;
      } else {
        ++empty;
      }
    }
    if (prev < 0) throw Error("ccmf: channel " + std::to_string(c) + " has no samples");
    for (int m = prev + 1; m < kHistogramBins; ++m) table[m] = table[prev];  // flat tail
    if (empty > 0) {
      model.flags.push_back("channel " + std::to_string(c) + ": " + std::to_string(empty) +
                            " empty bins interpolated");
    }
    for (int k = 0; k < kHistogramBins; ++k) {
      weights[k] = ccnt[k] > 0 ? static_cast<double>(ccnt[k]) : 1e-9;
    }
    model.lookup[c] = isotonic_fit(table, weights);
    const int effective = poly_qr_fit(xs, model.lookup[c], poly_degree, model.coeffs[c]);
    if (effective < poly_degree) {
      model.flags.push_back("channel " + std::to_string(c) +
                            ": rank deficient, effective degree " +
                            std::to_string(effective));
    }
  }
  model.fit_residual = fit_residual_rms(model, source, reference, stride);
  return model;
}

CalibrationModel fit_histogram_match(const Image& source, const Image& reference,
                                     int stride) {
  check_fit_inputs(source, reference, stride);
  const int channels = source.channels;

  std::vector<std::uint64_t> src_cnt(static_cast<std::size_t>(channels) * kHistogramBins);
  std::vector<std::uint64_t> ref_cnt(static_cast<std::size_t>(channels) * kHistogramBins);
  struct NoAcc {};
  strided_rows(source, stride, [](int) { return NoAcc{}; },
               [&](NoAcc&, std::int64_t base) {
                 for (int c = 0; c < channels; ++c) {
                   const std::size_t off = static_cast<std::size_t>(c) * kHistogramBins;
#pragma omp atomic
                   src_cnt[off + intensity_bin(source.samples[base + c])] += 1;
#pragma omp atomic
                   ref_cnt[off + intensity_bin(reference.samples[base + c])] += 1;
                 }
               });

  CalibrationModel model;
  model.kind = CalibratorKind::HistogramMatch;
  model.channels = channels;
  model.lookup.resize(channels);
  for (int c = 0; c < channels; ++c) {
    const std::size_t off = static_cast<std::size_t>(c) * kHistogramBins;
    std::uint64_t src_cum = 0;
    std::uint64_t ref_cum = 0;
    int j = 0;
    auto& lut = model.lookup[c];
    lut.resize(kHistogramBins);
    ref_cum = ref_cnt[off];
    for (int k = 0; k < kHistogramBins; ++k) {
      src_cum += src_cnt[off + k];
      while (ref_cum < src_cum && j < kHistogramBins - 1) {
        ++j;
        ref_cum += ref_cnt[off + j];
      }
      // bin midpoint, so the value bins back into j exactly
      lut[k] = (j + 0.5) / 255.0;
    }
  }
  model.fit_residual = fit_residual_rms(model, source, reference, stride);
  return model;
}

double evaluate_model_scalar(const CalibrationModel& model, int channel, double s) {
  switch (model.kind) {
    case CalibratorKind::Linear:
    case CalibratorKind::Polynomial:
    case CalibratorKind::Ccmf:
      return clamp01(horner(model.coeffs[channel], s));
    case CalibratorKind::HistogramMatch:
      return clamp01(model.lookup[channel][intensity_bin(s)]);
    case CalibratorKind::AffineColor:
      throw Error("affine models have no per-channel scalar form");
  }
  return s;
}

Image apply_model(const Image& img, const CalibrationModel& model) {
  if (img.channels != model.channels) {
    throw Error("apply_model: image has " + std::to_string(img.channels) +
                " channels, model expects " + std::to_string(model.channels));
  }
  Image out = img;
  const int channels = img.channels;
  const std::int64_t pixels = static_cast<std::int64_t>(img.pixel_count());
  switch (model.kind) {
    case CalibratorKind::Linear:
    case CalibratorKind::Polynomial:
    case CalibratorKind::Ccmf: {
#pragma omp parallel for if (img.sample_count() >= kParallelCutoff)
      for (std::int64_t p = 0; p < pixels; ++p) {
        for (int c = 0; c < channels; ++c) {
          double& v = out.samples[p * channels + c];
          v = clamp01(horner(model.coeffs[c], v));
        }
      }
      break;
    }
    case CalibratorKind::HistogramMatch: {
#pragma omp parallel for if (img.sample_count() >= kParallelCutoff)
      for (std::int64_t p = 0; p < pixels; ++p) {
        for (int c = 0; c < channels; ++c) {
          double& v = out.samples[p * channels + c];
          v = clamp01(model.lookup[c][intensity_bin(v)]);
        }
      }
      break;
    }
    case CalibratorKind::AffineColor: {
      const int dim = channels + 1;
#pragma omp parallel for if (img.sample_count() >= kParallelCutoff)
      for (std::int64_t p = 0; p < pixels; ++p) {
        double px[4];
        const double* in = img.samples.data() + p * channels;
        for (int c = 0; c < channels; ++c) {
          const double* row = model.affine.data() + static_cast<std::size_t>(c) * dim;
          double v = row[channels];
          for (int d = 0; d < channels; ++d) v += row[d] * in[d];
          px[c] = clamp01(v);
        }
        for (int c = 0; c < channels; ++c) out.samples[p * channels + c] = px[c];
      }
      break;
    }
  }
  return out;
}

namespace {

CalibrationModel fit_with(const Image& source, const Image& reference, CalibratorKind kind,
                          const CalibratorOptions& opts) {
  switch (kind) {
    case CalibratorKind::Linear: return fit_linear(source, reference, opts.stride);
    case CalibratorKind::Polynomial:
      return fit_polynomial(source, reference, opts.polynomial_degree, opts.stride);
    case CalibratorKind::AffineColor:
      return fit_affine_color(source, reference, opts.stride);
    case CalibratorKind::Ccmf:
      return fit_ccmf(source, reference, opts.ccmf_degree, opts.stride);
    case CalibratorKind::HistogramMatch:
      return fit_histogram_match(source, reference, opts.stride);
  }
  throw Error("unknown calibrator kind");
}

}  // namespace

CalibratedStack calibrate_stack(const ImageStack& stack, const ConsensusImage& reference,
                                CalibratorKind kind, const CalibratorOptions& opts) {
  validate_stack(stack);
  if (!reference.image.same_shape(stack.images[0])) {
    throw Error("calibrate_stack: reference shape does not match the stack");
  }
  CalibratedStack out;
  out.reference = reference;
  out.images.scene_id = stack.scene_id;
  out.images.images.reserve(stack.images.size());
  out.models.reserve(stack.images.size());
  for (std::size_t i = 0; i < stack.images.size(); ++i) {
    try {
      CalibrationModel model = fit_with(stack.images[i], reference.image, kind, opts);
      out.images.images.push_back(apply_model(stack.images[i], model));
      out.models.push_back(std::move(model));
    } catch (const Error& e) {
      throw Error("camera " + std::to_string(i) + ": " + e.what());
    }
  }
  return out;
}

CalibratedStack calibrate_stack(const ImageStack& stack, const Image& reference,
                                CalibratorKind kind, const CalibratorOptions& opts) {
  ConsensusImage ref;
  ref.image = reference;
  return calibrate_stack(stack, ref, kind, opts);
}

namespace {

nlohmann::json model_to_json_obj(const CalibrationModel& m) {
  nlohmann::json j;
  j["kind"] = to_string(m.kind);
  j["channels"] = m.channels;
  j["degree"] = m.degree;
  if (!m.coeffs.empty()) j["coeffs"] = m.coeffs;
  if (!m.affine.empty()) j["affine"] = m.affine;
  if (!m.lookup.empty()) j["lookup"] = m.lookup;
  j["fit_residual"] = m.fit_residual;
  j["flags"] = m.flags;
  return j;
}

CalibrationModel model_from_json_obj(const nlohmann::json& j) {
  CalibrationModel m;
  m.kind = calibrator_kind_from_string(j.at("kind").get<std::string>());
  m.channels = j.at("channels").get<int>();
  m.degree = j.at("degree").get<int>();
  if (j.contains("coeffs")) m.coeffs = j["coeffs"].get<std::vector<std::vector<double>>>();
  if (j.contains("affine")) m.affine = j["affine"].get<std::vector<double>>();
  if (j.contains("lookup")) m.lookup = j["lookup"].get<std::vector<std::vector<double>>>();
  m.fit_residual = j.value("fit_residual", 0.0);
  if (j.contains("flags")) m.flags = j["flags"].get<std::vector<std::string>>();
  return m;
}

}  // namespace

std::string model_to_json(const CalibrationModel& model) {
  return model_to_json_obj(model).dump(2);
}

CalibrationModel model_from_json(const std::string& json) {
  try {
    return model_from_json_obj(nlohmann::json::parse(json));
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("bad model JSON: ") + e.what());
  }
}

void save_models(const std::vector<CalibrationModel>& models, const std::string& path) {
  nlohmann::json j = nlohmann::json::array();
  for (const CalibrationModel& m : models) j.push_back(model_to_json_obj(m));
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << j.dump(2) << "\n";
}

std::vector<CalibrationModel> load_models(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "' for reading");
  try {
    nlohmann::json j = nlohmann::json::parse(in);
    std::vector<CalibrationModel> out;
    for (const nlohmann::json& m : j) out.push_back(model_from_json_obj(m));
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("bad models file: ") + e.what());
  }
}

}  // namespace camcal
