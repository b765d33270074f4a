#include "camcal/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <utility>

#include "camcal/image_io.hpp"
#include "camcal/rng.hpp"
#include "camcal/scene.hpp"
#include "json.hpp"

namespace camcal {

std::string to_string(ReferenceKind k) {
  switch (k) {
    case ReferenceKind::Mean: return "mean";
    case ReferenceKind::WeightedMean: return "weighted-mean";
    case ReferenceKind::Median: return "median";
    case ReferenceKind::WeightedMedian: return "weighted-median";
    case ReferenceKind::Random: return "random";
  }
  return "?";
}

ReferenceKind reference_kind_from_string(const std::string& s) {
  if (s == "random") return ReferenceKind::Random;
  switch (consensus_method_from_string(s)) {
    case ConsensusMethod::Mean: return ReferenceKind::Mean;
    case ConsensusMethod::WeightedMean: return ReferenceKind::WeightedMean;
    case ConsensusMethod::Median: return ReferenceKind::Median;
    case ConsensusMethod::WeightedMedian: return ReferenceKind::WeightedMedian;
  }
  throw Error("unknown reference kind '" + s + "'");
}

std::string to_string(EvaluationMode m) {
  return m == EvaluationMode::TruthBased ? "truth" : "leave-one-out";
}

EvaluationMode evaluation_mode_from_string(const std::string& s) {
  if (s == "truth") return EvaluationMode::TruthBased;
  if (s == "leave-one-out") return EvaluationMode::LeaveOneOut;
  throw Error("unknown evaluation mode '" + s + "' (truth, leave-one-out)");
}

void validate_config(const ExperimentConfig& config) {
  if (config.references.empty()) throw Error("config: select at least one reference kind");
  if (config.calibrators.empty()) throw Error("config: select at least one calibrator");
  if (config.synthesis.repetitions < 1) throw Error("config: repetitions must be >= 1");
  if (config.bit_depth != 8 && config.bit_depth != 16) {
    throw Error("config: bit depth must be 8 or 16");
  }
  if (config.calibrator_options.polynomial_degree < 1 ||
      config.calibrator_options.polynomial_degree > 5) {
    throw Error("config: polynomial degree must be in [1,5]");
  }
  if (config.calibrator_options.ccmf_degree < 1 || config.calibrator_options.ccmf_degree > 5) {
    throw Error("config: ccmf degree must be in [1,5]");
  }
  if (config.calibrator_options.stride < 1) throw Error("config: stride must be >= 1");
  if (config.weight_options.scale <= 0.0) throw Error("config: weight scale must be > 0");
  const bool synthesizing = config.stack_dir.empty();
  if (synthesizing) {
    const int min_cams = config.evaluation == EvaluationMode::LeaveOneOut ? 3 : 2;
    if (config.synthesis.cameras < min_cams) {
      throw Error("config: need at least " + std::to_string(min_cams) + " cameras");
    }
    if (config.truth_paths.empty()) {
      if (config.scene_count < 1) throw Error("config: need at least one scene");
      if (config.scene_width < 1 || config.scene_height < 1) {
        throw Error("config: scene size must be positive");
      }
    }
  }
}

namespace {

std::string weight_mode_name(WeightMode m) {
  return m == WeightMode::PerImageDeviation ? "per-image-deviation" : "shared-sigma";
}

WeightMode weight_mode_from_name(const std::string& s) {
  if (s == "per-image-deviation") return WeightMode::PerImageDeviation;
  if (s == "shared-sigma") return WeightMode::SharedSigma;
  throw Error("unknown weight mode '" + s + "'");
}

}  // namespace

std::string config_to_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["stack_dir"] = c.stack_dir;
  j["truth_paths"] = c.truth_paths;
  j["scene_count"] = c.scene_count;
  j["scene_width"] = c.scene_width;
  j["scene_height"] = c.scene_height;
  j["cameras"] = c.synthesis.cameras;
  j["severity"] = to_string(c.synthesis.severity);
  j["master_seed"] = c.synthesis.master_seed;
  j["repetitions"] = c.synthesis.repetitions;
  j["identity"] = c.synthesis.identity;
  j["references"] = nlohmann::json::array();
  for (ReferenceKind k : c.references) j["references"].push_back(to_string(k));
  j["calibrators"] = nlohmann::json::array();
  for (CalibratorKind k : c.calibrators) j["calibrators"].push_back(to_string(k));
  j["polynomial_degree"] = c.calibrator_options.polynomial_degree;
  j["ccmf_degree"] = c.calibrator_options.ccmf_degree;
  j["stride"] = c.calibrator_options.stride;
  j["weight_mode"] = weight_mode_name(c.weight_options.mode);
  j["weight_scale"] = c.weight_options.scale;
  j["evaluation"] = to_string(c.evaluation);
  j["output_dir"] = c.output_dir;
  j["emit_images"] = c.emit_images;
  j["emit_histograms"] = c.emit_histograms;
  j["bit_depth"] = c.bit_depth;
  return j.dump(2);
}

ExperimentConfig config_from_json(const std::string& json) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json);
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("bad config JSON: ") + e.what());
  }
  static const char* known[] = {
      "stack_dir",   "truth_paths", "scene_count", "scene_width",     "scene_height",
      "cameras",     "severity",    "master_seed", "repetitions",     "identity",
      "references",  "calibrators", "polynomial_degree", "ccmf_degree", "stride",
      "weight_mode", "weight_scale", "evaluation", "output_dir",      "emit_images",
      "emit_histograms", "bit_depth"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find_if(std::begin(known), std::end(known), [&](const char* k) {
          return it.key() == k;
        }) == std::end(known)) {
      throw Error("config: unknown key '" + it.key() + "'");
    }
  }
  ExperimentConfig c;
  try {
    if (j.contains("stack_dir")) c.stack_dir = j["stack_dir"].get<std::string>();
    if (j.contains("truth_paths")) {
      c.truth_paths = j["truth_paths"].get<std::vector<std::string>>();
    }
    if (j.contains("scene_count")) c.scene_count = j["scene_count"].get<int>();
    if (j.contains("scene_width")) c.scene_width = j["scene_width"].get<int>();
    if (j.contains("scene_height")) c.scene_height = j["scene_height"].get<int>();
    if (j.contains("cameras")) c.synthesis.cameras = j["cameras"].get<int>();
    if (j.contains("severity")) {
      c.synthesis.severity = severity_from_string(j["severity"].get<std::string>());
    }
    if (j.contains("master_seed")) {
      c.synthesis.master_seed = j["master_seed"].get<std::uint64_t>();
    }
    if (j.contains("repetitions")) c.synthesis.repetitions = j["repetitions"].get<int>();
    if (j.contains("identity")) c.synthesis.identity = j["identity"].get<bool>();
    if (j.contains("references")) {
      c.references.clear();
      for (const auto& s : j["references"]) {
        c.references.push_back(reference_kind_from_string(s.get<std::string>()));
      }
    }
    if (j.contains("calibrators")) {
      c.calibrators.clear();
      for (const auto& s : j["calibrators"]) {
        c.calibrators.push_back(calibrator_kind_from_string(s.get<std::string>()));
      }
    }
    if (j.contains("polynomial_degree")) {
      c.calibrator_options.polynomial_degree = j["polynomial_degree"].get<int>();
    }
    if (j.contains("ccmf_degree")) {
      c.calibrator_options.ccmf_degree = j["ccmf_degree"].get<int>();
    }
    if (j.contains("stride")) c.calibrator_options.stride = j["stride"].get<int>();
    if (j.contains("weight_mode")) {
      c.weight_options.mode = weight_mode_from_name(j["weight_mode"].get<std::string>());
    }
    if (j.contains("weight_scale")) c.weight_options.scale = j["weight_scale"].get<double>();
    if (j.contains("evaluation")) {
      c.evaluation = evaluation_mode_from_string(j["evaluation"].get<std::string>());
    }
    if (j.contains("output_dir")) c.output_dir = j["output_dir"].get<std::string>();
    if (j.contains("emit_images")) c.emit_images = j["emit_images"].get<bool>();
    if (j.contains("emit_histograms")) c.emit_histograms = j["emit_histograms"].get<bool>();
    if (j.contains("bit_depth")) c.bit_depth = j["bit_depth"].get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("bad config value: ") + e.what());
  }
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return config_from_json(buf.str());
}

namespace {

// Seed tags: one derivation stream per random decision, so adding a decision
// never shifts the others.
constexpr std::uint64_t kTagSynthesis = 0;
constexpr std::uint64_t kTagRandomRef = 1;
constexpr std::uint64_t kTagHoldout = 2;

struct SceneInput {
  std::string id;
  Image truth;  // unused in stack_dir mode
};

ImageStack drop_index(const ImageStack& stack, std::size_t index) {
  ImageStack out;
  out.scene_id = stack.scene_id;
  out.images.reserve(stack.images.size() - 1);
  for (std::size_t i = 0; i < stack.images.size(); ++i) {
    if (i != index) out.images.push_back(stack.images[i]);
  }
  return out;
}

ConsensusImage build_reference(const ImageStack& work, ReferenceKind kind,
                               const WeightOptions& wopts, std::uint64_t cell_seed) {
  switch (kind) {
    case ReferenceKind::Mean: return build_consensus(work, ConsensusMethod::Mean, wopts);
    case ReferenceKind::WeightedMean:
      return build_consensus(work, ConsensusMethod::WeightedMean, wopts);
    case ReferenceKind::Median:
      return build_consensus(work, ConsensusMethod::Median, wopts);
    case ReferenceKind::WeightedMedian:
      return build_consensus(work, ConsensusMethod::WeightedMedian, wopts);
    case ReferenceKind::Random: {
      Rng rng(derive_seed(cell_seed, kTagRandomRef));
      ConsensusImage ref;
      ref.image = work.images[rng.below(work.images.size())];
      return ref;
    }
  }
  throw Error("unknown reference kind");
}

std::string sanitize_csv_field(std::string s) {
  for (char& ch : s) {
    if (ch == ',' || ch == '\n' || ch == '\r') ch = ';';
  }
  return s;
}

std::string fmt3(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

void write_artifacts(const ExperimentConfig& config, const std::string& scene_id,
                     const Image* truth, const ImageStack& work,
                     const ConsensusImage& first_ref, const ImageStack& calibrated) {
  namespace fs = std::filesystem;
  const fs::path dir = fs::path(config.output_dir) / scene_id;
  fs::create_directories(dir);
  char name[64];
  if (config.emit_images) {
    if (truth != nullptr) save_image(*truth, (dir / "truth.png").string(), config.bit_depth);
    save_image(first_ref.image, (dir / "reference.png").string(), config.bit_depth);
    for (std::size_t i = 0; i < work.images.size(); ++i) {
      std::snprintf(name, sizeof name, "cam%02zu.png", i);
      save_image(work.images[i], (dir / name).string(), config.bit_depth);
      std::snprintf(name, sizeof name, "cal%02zu.png", i);
      save_image(calibrated.images[i], (dir / name).string(), config.bit_depth);
    }
  }
  if (config.emit_histograms) {
    emit_histograms(work, first_ref, (dir / "hist_before.csv").string());
    emit_histograms(calibrated, first_ref, (dir / "hist_after.csv").string());
  }
}

}  // namespace

ResultTable run_experiment(const ExperimentConfig& config) {
  validate_config(config);

  const bool from_stack_dir = !config.stack_dir.empty();
  std::vector<SceneInput> scenes;
  LoadedStack loaded;
  if (from_stack_dir) {
    loaded = load_stack_dir(config.stack_dir);
    if (config.evaluation == EvaluationMode::TruthBased && !loaded.truth.has_value()) {
      throw Error("stack directory '" + config.stack_dir +
                  "' has no truth image; use evaluation: leave-one-out");
    }
    if (config.evaluation == EvaluationMode::LeaveOneOut && loaded.stack.count() < 3) {
      throw Error("leave-one-out needs at least 3 cameras in the stack");
    }
    scenes.push_back({loaded.stack.scene_id.empty() ? "stack" : loaded.stack.scene_id,
                      Image{}});
  } else if (!config.truth_paths.empty()) {
    for (const std::string& p : config.truth_paths) {
      scenes.push_back({std::filesystem::path(p).stem().string(), load_image(p)});
    }
  } else {
    for (int v = 0; v < config.scene_count; ++v) {
      scenes.push_back({"scene" + std::to_string(v),
                        make_scene(v, config.scene_width, config.scene_height)});
    }
  }

  const int reps = config.synthesis.repetitions;
  const std::size_t per_cell = config.calibrators.size() * config.references.size();
  const std::size_t cells = scenes.size() * static_cast<std::size_t>(reps);

  ResultTable table;
  table.rows.resize(cells * per_cell);

  RecipeRanges ranges = recipe_ranges(config.synthesis.severity);
  if (config.synthesis.identity) {
    ranges.min_steps = 0;
    ranges.max_steps = 0;
    ranges.outlier_fraction = 0.0;
    ranges.min_curve_rms = 0.0;
  }

  const std::int64_t cell_count = static_cast<std::int64_t>(cells);
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t cell = 0; cell < cell_count; ++cell) {
    const std::size_t scene_idx = static_cast<std::size_t>(cell) / reps;
    const int rep = static_cast<int>(cell % reps);
    const SceneInput& scene = scenes[scene_idx];
    const std::uint64_t cell_seed =
        derive_seed(config.synthesis.master_seed, scene_idx, static_cast<std::uint64_t>(rep));

    ImageStack stack;
    const Image* truth = nullptr;
    if (from_stack_dir) {
      stack = loaded.stack;
      if (loaded.truth.has_value()) truth = &*loaded.truth;
    } else {
      SyntheticStack synth = synthesize_stack(scene.truth, config.synthesis.cameras,
                                              derive_seed(cell_seed, kTagSynthesis), ranges);
      stack = std::move(synth.stack);
      truth = &scene.truth;
    }

    ImageStack work;
    Image eval_img;
    if (config.evaluation == EvaluationMode::LeaveOneOut) {
      Rng rng(derive_seed(cell_seed, kTagHoldout));
      const std::size_t hold = rng.below(stack.images.size());
      eval_img = stack.images[hold];
      work = drop_index(stack, hold);
    } else {
      eval_img = *truth;
      work = std::move(stack);
    }

    const MetricReport before = score_stack(work, eval_img);

    std::vector<ConsensusImage> refs;
    refs.reserve(config.references.size());
    for (ReferenceKind kind : config.references) {
      refs.push_back(build_reference(work, kind, config.weight_options, cell_seed));
    }

    std::size_t slot = static_cast<std::size_t>(cell) * per_cell;
    for (std::size_t ci = 0; ci < config.calibrators.size(); ++ci) {
      for (std::size_t ri = 0; ri < config.references.size(); ++ri, ++slot) {
        ResultRow& row = table.rows[slot];
        row.scene = scene.id;
        row.repetition = rep;
        row.calibrator = config.calibrators[ci];
        row.reference = config.references[ri];
        row.psnr_before = before.mean_psnr_db;
        row.perceptual_before = before.mean_perceptual;
        row.hist_spread_before = before.hist_spread;
        try {
          CalibratedStack cal = calibrate_stack(work, refs[ri], config.calibrators[ci],
                                                config.calibrator_options);
          const MetricReport after = score_stack(cal.images, eval_img);
          row.psnr_after = after.mean_psnr_db;
          row.perceptual_after = after.mean_perceptual;
          row.hist_spread_after = after.hist_spread;
          row.delta_psnr = row.psnr_after - row.psnr_before;
          row.delta_perceptual = row.perceptual_after - row.perceptual_before;
          if (rep == 0 && ci == 0 && ri == 0 &&
              (config.emit_images || config.emit_histograms)) {
            write_artifacts(config, scene.id, truth, work, refs[0], cal.images);
          }
        } catch (const Error& e) {
          row.failed = true;
          row.error = e.what();
        }
      }
    }
  }
  return table;
}

namespace {

constexpr const char* kCsvHeader =
    "scene,repetition,calibrator,reference,status,psnr_before,psnr_after,"
    "perceptual_before,perceptual_after,hist_spread_before,hist_spread_after,"
    "delta_psnr,delta_perceptual";

}  // namespace

void emit_csv(const ResultTable& table, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << kCsvHeader << "\n";
  for (const ResultRow& r : table.rows) {
    out << sanitize_csv_field(r.scene) << ',' << r.repetition << ','
        << to_string(r.calibrator) << ',' << to_string(r.reference) << ',';
    if (r.failed) {
      out << "failed: " << sanitize_csv_field(r.error) << ",,,,,,,,";
    } else {
      out << "ok," << fmt3(r.psnr_before) << ',' << fmt3(r.psnr_after) << ','
          << fmt3(r.perceptual_before) << ',' << fmt3(r.perceptual_after) << ','
          << fmt3(r.hist_spread_before) << ',' << fmt3(r.hist_spread_after) << ','
          << fmt3(r.delta_psnr) << ',' << fmt3(r.delta_perceptual);
    }
    out << "\n";
  }
  if (!out) throw Error("write failed for '" + path + "'");
}

ResultTable parse_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "' for reading");
  std::string line;
  if (!std::getline(in, line)) throw Error("empty results file '" + path + "'");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kCsvHeader) throw Error("unexpected results header in '" + path + "'");

  ResultTable table;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
      if (i == line.size() || line[i] == ',') {
        fields.push_back(line.substr(start, i - start));
        start = i + 1;
      }
    }
    if (fields.size() != 13) {
      throw Error("malformed results row: '" + line + "'");
    }
    ResultRow r;
    r.scene = fields[0];
    r.repetition = std::stoi(fields[1]);
    r.calibrator = calibrator_kind_from_string(fields[2]);
    r.reference = reference_kind_from_string(fields[3]);
    if (fields[4] == "ok") {
      r.psnr_before = std::stod(fields[5]);
      r.psnr_after = std::stod(fields[6]);
      r.perceptual_before = std::stod(fields[7]);
      r.perceptual_after = std::stod(fields[8]);
      r.hist_spread_before = std::stod(fields[9]);
      r.hist_spread_after = std::stod(fields[10]);
      r.delta_psnr = std::stod(fields[11]);
      r.delta_perceptual = std::stod(fields[12]);
    } else {
      r.failed = true;
      constexpr const char* kPrefix = "failed: ";
      r.error = fields[4].rfind(kPrefix, 0) == 0 ? fields[4].substr(8) : fields[4];
    }
    table.rows.push_back(std::move(r));
  }
  return table;
}

void emit_summary_csv(const ResultTable& table, const std::string& path) {
  struct Acc {
    std::size_t n = 0;
    double pb = 0, pa = 0, eb = 0, ea = 0, sb = 0, sa = 0;

    void add(const ResultRow& r) {
      ++n;
      pb += r.psnr_before;
      pa += r.psnr_after;
      eb += r.perceptual_before;
      ea += r.perceptual_after;
      sb += r.hist_spread_before;
      sa += r.hist_spread_after;
    }
  };
  // keys in first-appearance order, "pooled" scenes appended last
  std::vector<std::string> scene_order;
  std::vector<std::pair<CalibratorKind, ReferenceKind>> combo_order;
  std::map<std::string, std::map<std::pair<int, int>, Acc>> groups;
  for (const ResultRow& r : table.rows) {
    if (r.failed) continue;
    if (std::find(scene_order.begin(), scene_order.end(), r.scene) == scene_order.end()) {
      scene_order.push_back(r.scene);
    }
    const std::pair<CalibratorKind, ReferenceKind> combo{r.calibrator, r.reference};
    if (std::find(combo_order.begin(), combo_order.end(), combo) == combo_order.end()) {
      combo_order.push_back(combo);
    }
    const std::pair<int, int> key{static_cast<int>(r.calibrator),
                                  static_cast<int>(r.reference)};
    groups[r.scene][key].add(r);
    groups["pooled"][key].add(r);
  }

  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << "scene,calibrator,reference,cells,mean_psnr_before,mean_psnr_after,"
         "mean_delta_psnr,mean_perceptual_before,mean_perceptual_after,"
         "mean_delta_perceptual,mean_spread_before,mean_spread_after\n";
  scene_order.push_back("pooled");
  for (const std::string& scene : scene_order) {
    auto git = groups.find(scene);
    if (git == groups.end()) continue;
    for (const auto& combo : combo_order) {
      const std::pair<int, int> key{static_cast<int>(combo.first),
                                    static_cast<int>(combo.second)};
      auto it = git->second.find(key);
      if (it == git->second.end()) continue;
      const Acc& a = it->second;
      const double n = static_cast<double>(a.n);
      out << sanitize_csv_field(scene) << ',' << to_string(combo.first) << ','
          << to_string(combo.second) << ',' << a.n << ',' << fmt3(a.pb / n) << ','
          << fmt3(a.pa / n) << ',' << fmt3((a.pa - a.pb) / n) << ',' << fmt3(a.eb / n)
          << ',' << fmt3(a.ea / n) << ',' << fmt3((a.ea - a.eb) / n) << ','
          << fmt3(a.sb / n) << ',' << fmt3(a.sa / n) << "\n";
    }
  }
  if (!out) throw Error("write failed for '" + path + "'");
}

void emit_histograms(const ImageStack& stack, const ConsensusImage& reference,
                     const std::string& path) {
  validate_stack(stack);
  if (!reference.image.same_shape(stack.images[0])) {
    throw Error("emit_histograms: reference shape does not match the stack");
  }
  std::vector<Histogram> hists;
  hists.reserve(stack.images.size());
  for (const Image& img : stack.images) hists.push_back(histogram(img));
  const Histogram ref_hist = histogram(reference.image);
  const int channels = stack.images[0].channels;

  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  for (std::size_t i = 0; i < hists.size(); ++i) {
    for (int c = 0; c < channels; ++c) {
      if (i > 0 || c > 0) out << ',';
      out << "cam" << i << "_ch" << c;
    }
  }
  for (int c = 0; c < channels; ++c) out << ",ref_ch" << c;
  out << "\n";
  for (int k = 0; k < kHistogramBins; ++k) {
    for (std::size_t i = 0; i < hists.size(); ++i) {
      for (int c = 0; c < channels; ++c) {
        if (i > 0 || c > 0) out << ',';
        out << hists[i].at(c, k);
      }
    }
    for (int c = 0; c < channels; ++c) out << ',' << ref_hist.at(c, k);
    out << "\n";
  }
  if (!out) throw Error("write failed for '" + path + "'");
}

}  // namespace camcal
