#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "camcal/calibrate.hpp"
#include "camcal/consensus.hpp"
#include "camcal/distortion.hpp"
#include "camcal/image.hpp"
#include "camcal/metrics.hpp"

namespace camcal {

// The four consensus estimators plus "pick a stack member at random", which
// is the baseline every consensus method is compared against.
enum class ReferenceKind { Mean, WeightedMean, Median, WeightedMedian, Random };

std::string to_string(ReferenceKind k);
ReferenceKind reference_kind_from_string(const std::string& s);

// TruthBased scores calibrated outputs against the clean original (available
// for synthetic stacks). LeaveOneOut holds one camera out of calibration and
// scores against it, for captures that have no ground truth.
enum class EvaluationMode { TruthBased, LeaveOneOut };

std::string to_string(EvaluationMode m);
EvaluationMode evaluation_mode_from_string(const std::string& s);

struct SynthesisSettings {
  int cameras = 9;
  Severity severity = Severity::Standard;
  std::uint64_t master_seed = 1;
  int repetitions = 1;
  // Replaces every recipe with an empty one: cameras see the truth unchanged.
  bool identity = false;
};

struct ExperimentConfig {
  // Scene source, first non-empty wins: stack_dir (pre-captured, one stack,
  // no synthesis) > truth_paths (loaded truth images) > procedural scenes.
  std::string stack_dir;
  std::vector<std::string> truth_paths;
  int scene_count = 3;
  int scene_width = 128;
  int scene_height = 128;

  SynthesisSettings synthesis;
  std::vector<ReferenceKind> references = {ReferenceKind::Median};
  std::vector<CalibratorKind> calibrators = {CalibratorKind::Linear};
  CalibratorOptions calibrator_options;
  WeightOptions weight_options;
  EvaluationMode evaluation = EvaluationMode::TruthBased;

  std::string output_dir = "out";
  bool emit_images = false;
  bool emit_histograms = false;
  int bit_depth = 8;
};

// Throws Error with the first violated constraint.
void validate_config(const ExperimentConfig& config);

std::string config_to_json(const ExperimentConfig& config);
ExperimentConfig config_from_json(const std::string& json);
ExperimentConfig load_config(const std::string& path);

struct ResultRow {
  std::string scene;
  int repetition = 0;
  CalibratorKind calibrator = CalibratorKind::Linear;
  ReferenceKind reference = ReferenceKind::Median;
  bool failed = false;
  std::string error;

  double psnr_before = 0.0;
  double psnr_after = 0.0;
  double perceptual_before = 0.0;
  double perceptual_after = 0.0;
  double hist_spread_before = 0.0;
  double hist_spread_after = 0.0;
  double delta_psnr = 0.0;        // always after - before
  double delta_perceptual = 0.0;  // always after - before
};

struct ResultTable {
  std::vector<ResultRow> rows;

  bool any_failed() const {
    for (const ResultRow& r : rows) {
      if (r.failed) return true;
    }
    return false;
  }
};

// Full grid: scene x repetition x calibrator x reference. Per-cell calibrator
// failures become failed rows, not aborts. Deterministic for a fixed config;
// image/histogram artifacts are written only when the config flags ask for
// them. Rows come out sorted by (scene, repetition, calibrator, reference).
ResultTable run_experiment(const ExperimentConfig& config);

// header + one row per cell, fixed 3-decimal columns
void emit_csv(const ResultTable& table, const std::string& path);
ResultTable parse_csv(const std::string& path);

// per-(scene, calibrator, reference) means over non-failed rows, plus pooled
// rows with scene = "pooled"
void emit_summary_csv(const ResultTable& table, const std::string& path);

// 256 rows of bin counts; one column per camera per channel, then one per
// reference channel
void emit_histograms(const ImageStack& stack, const ConsensusImage& reference,
                     const std::string& path);

}  // namespace camcal
