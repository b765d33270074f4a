// Experiment runner: synthesize camera stacks, calibrate them against
// consensus references, and score the result. `camcal run --config grid.json`
// executes the full grid and writes results.csv / summary.csv.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "camcal/calibrate.hpp"
#include "camcal/consensus.hpp"
#include "camcal/distortion.hpp"
#include "camcal/error.hpp"
#include "camcal/experiment.hpp"
#include "camcal/image_io.hpp"
#include "camcal/metrics.hpp"
#include "camcal/rng.hpp"
#include "camcal/scene.hpp"

namespace fs = std::filesystem;
using namespace camcal;

namespace {

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == ',') {
      if (i > start) out.push_back(s.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

void parse_size(const std::string& s, int& w, int& h) {
  const std::size_t x = s.find('x');
  if (x == std::string::npos) throw Error("size must look like 128x128");
  w = std::stoi(s.substr(0, x));
  h = std::stoi(s.substr(x + 1));
  if (w < 1 || h < 1) throw Error("size must be positive");
}

struct CommonFlags {
  std::string config_path;
  std::string out_dir = "out";
  std::string severity = "standard";
  std::string consensus;
  std::string calibrator;
  std::uint64_t seed = 1;
  int repetitions = -1;
  bool emit_images = false;
  int bit_depth = 8;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config_path, "experiment config (JSON)");
  cmd->add_option("--seed", f.seed, "master seed");
  cmd->add_option("--out", f.out_dir, "output directory");
  cmd->add_option("--severity", f.severity, "mild | standard | harsh");
  cmd->add_option("--consensus", f.consensus,
                  "comma list: mean, weighted-mean, median, weighted-median, random");
  cmd->add_option("--calibrator", f.calibrator,
                  "comma list: linear, polynomial, affine, ccmf, histmatch");
  cmd->add_option("--repetitions", f.repetitions, "repetitions per scene");
  cmd->add_flag("--emit-images", f.emit_images, "write stack / output images");
  cmd->add_option("--bit-depth", f.bit_depth, "8 or 16")->check(CLI::IsMember({8, 16}));
}

int cmd_synthesize(const CommonFlags& f, const std::string& truth_path, int cameras,
                   int variant, const std::string& size) {
  Image truth;
  if (!truth_path.empty()) {
    truth = load_image(truth_path);
  } else {
    int w = 128, h = 128;
    if (!size.empty()) parse_size(size, w, h);
    truth = make_scene(variant, w, h);
  }
  SyntheticStack synth =
      synthesize_stack(truth, cameras, f.seed, severity_from_string(f.severity));
  fs::create_directories(f.out_dir);
  save_image(truth, (fs::path(f.out_dir) / "truth.png").string(), f.bit_depth);
  char name[32];
  for (std::size_t i = 0; i < synth.stack.images.size(); ++i) {
    std::snprintf(name, sizeof name, "cam%02zu.png", i);
    save_image(synth.stack.images[i], (fs::path(f.out_dir) / name).string(), f.bit_depth);
  }
  save_recipes(synth.recipes, (fs::path(f.out_dir) / "recipes.json").string());
  std::cout << "wrote " << synth.stack.images.size() << " cameras to " << f.out_dir
            << "\n";
  return 0;
}

int cmd_calibrate(const CommonFlags& f, const std::string& stack_dir, double weight_scale,
                  int degree) {
  LoadedStack loaded = load_stack_dir(stack_dir);
  const std::string method = f.consensus.empty() ? "median" : f.consensus;
  const std::string cal = f.calibrator.empty() ? "linear" : f.calibrator;

  WeightOptions wopts;
  wopts.scale = weight_scale;
  ConsensusImage ref;
  if (method == "random") {
    Rng rng(f.seed);
    ref.image = loaded.stack.images[rng.below(loaded.stack.images.size())];
  } else {
    ref = build_consensus(loaded.stack, consensus_method_from_string(method), wopts);
  }

  CalibratorOptions copts;
  copts.polynomial_degree = degree;
  copts.ccmf_degree = degree;
  CalibratedStack out =
      calibrate_stack(loaded.stack, ref, calibrator_kind_from_string(cal), copts);

  fs::create_directories(f.out_dir);
  save_image(ref.image, (fs::path(f.out_dir) / "reference.png").string(), f.bit_depth);
  char name[32];
  for (std::size_t i = 0; i < out.images.images.size(); ++i) {
    std::snprintf(name, sizeof name, "cal%02zu.png", i);
    save_image(out.images.images[i], (fs::path(f.out_dir) / name).string(), f.bit_depth);
    std::cout << "camera " << i << ": fit residual " << out.models[i].fit_residual;
    for (const std::string& flag : out.models[i].flags) std::cout << " [" << flag << "]";
    std::cout << "\n";
  }
  save_models(out.models, (fs::path(f.out_dir) / "models.json").string());
  std::cout << "wrote calibrated stack to " << f.out_dir << "\n";
  return 0;
}

int cmd_evaluate(const CommonFlags& f, const std::string& stack_dir,
                 const std::string& truth_path) {
  LoadedStack loaded = load_stack_dir(stack_dir);
  Image truth;
  if (!truth_path.empty()) {
    truth = load_image(truth_path);
  } else if (loaded.truth.has_value()) {
    truth = *loaded.truth;
  } else {
    throw Error("no truth image: pass --truth or add truth.png to the stack directory");
  }
  const MetricReport rep = score_stack(loaded.stack, truth);

  fs::create_directories(f.out_dir);
  const std::string path = (fs::path(f.out_dir) / "metrics.csv").string();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << "camera,psnr_db,perceptual\n";
  char buf[128];
  for (std::size_t i = 0; i < rep.per_camera.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%.3f,%.3f\n", i, rep.per_camera[i].psnr.db,
                  rep.per_camera[i].perceptual);
    out << buf;
  }
  std::snprintf(buf, sizeof buf, "mean,%.3f,%.3f\n", rep.mean_psnr_db,
                rep.mean_perceptual);
  out << buf;
  std::snprintf(buf, sizeof buf, "mean psnr %.3f dB, mean perceptual %.3f, spread %.4f\n",
                rep.mean_psnr_db, rep.mean_perceptual, rep.hist_spread);
  std::cout << buf << "wrote " << path << "\n";
  return 0;
}

int cmd_run(const CommonFlags& f, const CLI::App* cmd, const std::string& stack_dir,
            const std::string& evaluation) {
  ExperimentConfig config;
  if (!f.config_path.empty()) config = load_config(f.config_path);

  // explicit flags override the config file
  if (cmd->count("--seed")) config.synthesis.master_seed = f.seed;
  if (cmd->count("--severity")) {
    config.synthesis.severity = severity_from_string(f.severity);
  }
  if (cmd->count("--repetitions")) config.synthesis.repetitions = f.repetitions;
  if (cmd->count("--out")) config.output_dir = f.out_dir;
  if (cmd->count("--emit-images")) config.emit_images = true;
  if (cmd->count("--bit-depth")) config.bit_depth = f.bit_depth;
  if (!f.consensus.empty()) {
    config.references.clear();
    for (const std::string& s : split_list(f.consensus)) {
      config.references.push_back(reference_kind_from_string(s));
    }
  }
  if (!f.calibrator.empty()) {
    config.calibrators.clear();
    for (const std::string& s : split_list(f.calibrator)) {
      config.calibrators.push_back(calibrator_kind_from_string(s));
    }
  }
  if (!stack_dir.empty()) config.stack_dir = stack_dir;
  if (!evaluation.empty()) config.evaluation = evaluation_mode_from_string(evaluation);

  validate_config(config);
  fs::create_directories(config.output_dir);
  {
    const std::string path = (fs::path(config.output_dir) / "config.json").string();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open '" + path + "' for writing");
    out << config_to_json(config) << "\n";
  }

  const ResultTable table = run_experiment(config);
  emit_csv(table, (fs::path(config.output_dir) / "results.csv").string());
  emit_summary_csv(table, (fs::path(config.output_dir) / "summary.csv").string());

  std::size_t failed = 0;
  for (const ResultRow& r : table.rows) failed += r.failed ? 1 : 0;
  std::cout << table.rows.size() << " cells, " << failed << " failed; results in "
            << config.output_dir << "\n";
  return failed == 0 ? 0 : 2;
}

int cmd_histograms(const CommonFlags& f, const std::string& stack_dir,
                   double weight_scale) {
  LoadedStack loaded = load_stack_dir(stack_dir);
  const std::string method = f.consensus.empty() ? "median" : f.consensus;
  WeightOptions wopts;
  wopts.scale = weight_scale;
  ConsensusImage ref;
  if (method == "random") {
    Rng rng(f.seed);
    ref.image = loaded.stack.images[rng.below(loaded.stack.images.size())];
  } else {
    ref = build_consensus(loaded.stack, consensus_method_from_string(method), wopts);
  }
  fs::create_directories(f.out_dir);
  const std::string path = (fs::path(f.out_dir) / "histograms.csv").string();
  emit_histograms(loaded.stack, ref, path);
  std::cout << "wrote " << path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multi-camera color calibration via consensus images"};
  app.require_subcommand(1);

  CommonFlags f;
  std::string truth_path, stack_dir, size, evaluation;
  int cameras = 9, variant = 0, degree = 2;
  double weight_scale = 1.0;

  CLI::App* synth = app.add_subcommand(
      "synthesize", "distort one truth image into a synthetic camera stack");
  add_common(synth, f);
  synth->add_option("truth", truth_path, "truth image (omit for a procedural scene)");
  synth->add_option("--cameras", cameras, "stack size");
  synth->add_option("--scene", variant, "procedural scene variant");
  synth->add_option("--size", size, "procedural scene size, e.g. 128x128");

  CLI::App* cal = app.add_subcommand(
      "calibrate", "calibrate a stack directory against a consensus reference");
  add_common(cal, f);
  cal->add_option("stack", stack_dir, "directory with cam*.png")->required();
  cal->add_option("--weight-scale", weight_scale, "deviation weight scale");
  cal->add_option("--degree", degree, "polynomial / ccmf smoothing degree");

  CLI::App* eval = app.add_subcommand("evaluate", "score a stack against a truth image");
  add_common(eval, f);
  eval->add_option("stack", stack_dir, "directory with cam*.png")->required();
  eval->add_option("--truth", truth_path, "truth image path");

  CLI::App* run = app.add_subcommand("run", "run the full experiment grid");
  add_common(run, f);
  run->add_option("--stack", stack_dir, "pre-captured stack directory (skips synthesis)");
  run->add_option("--evaluation", evaluation, "truth | leave-one-out");

  CLI::App* hist = app.add_subcommand("histograms", "emit per-camera histogram CSV");
  add_common(hist, f);
  hist->add_option("stack", stack_dir, "directory with cam*.png")->required();
  hist->add_option("--weight-scale", weight_scale, "deviation weight scale");

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) return cmd_synthesize(f, truth_path, cameras, variant, size);
    if (cal->parsed()) return cmd_calibrate(f, stack_dir, weight_scale, degree);
    if (eval->parsed()) return cmd_evaluate(f, stack_dir, truth_path);
    if (run->parsed()) return cmd_run(f, run, stack_dir, evaluation);
    if (hist->parsed()) return cmd_histograms(f, stack_dir, weight_scale);
  } catch (const Error& e) {
    std::cerr << "camcal: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "camcal: unexpected error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
