#include "symsfm/cli.h"

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <future>
#include <optional>
#include <sstream>

#include <glog/logging.h>

#include "CLI11.hpp"
#include "json.hpp"
#include "symsfm/dataset_io.h"
#include "symsfm/errors.h"
#include "symsfm/single_image.h"
#include "symsfm/sym_rsfm.h"
#include "symsfm/synthetic.h"

namespace symsfm {
namespace {

namespace fs = std::filesystem;
using OrderedJson = nlohmann::ordered_json;

struct GlobalOptions {
  std::optional<uint64_t> seed;
  bool quiet = false;
  bool json = false;
};

struct SynthOptions {
  int images = 20;
  int pairs = 8;
  double noise = 0.0;
  double occlusion = 0.0;
  std::optional<uint64_t> seed;
  std::string out;
  bool manhattan = false;
};

struct SingleOptions {
  std::string dataset;
  std::string out;
  std::string points;
  bool all_signs = false;
};

struct MultiOptions {
  std::string dataset;
  std::string out;
  std::string trace;
  std::string points;
  SymRsfmOptions solver;
};

struct EvaluateOptions {
  std::string result;
  std::string groundtruth;
};

int ExitCodeFor(const Error& error) {
  return IsNumericalError(error.code()) ? kExitNumericalError
                                        : kExitInputError;
}

// Lower codes win, except that success loses to everything.
int WorseExitCode(int a, int b) {
  if (a == kExitSuccess) return b;
  if (b == kExitSuccess) return a;
  return std::min(a, b);
}

OrderedJson MetricsJson(const Metrics& metrics) {
  return {{"e_R", metrics.rotation_error},
          {"e_S", metrics.shape_error},
          {"mirrored", metrics.mirrored},
          {"images", metrics.image_ids.size()}};
}

void PrintMetrics(const Metrics& metrics, std::ostream& out) {
  out << "e_R " << metrics.rotation_error << "\n"
      << "e_S " << metrics.shape_error << "\n";
}

int RunSynth(const SynthOptions& options, const GlobalOptions& global,
             std::ostream& out) {
  SceneConfig config;
  config.n_images = options.images;
  config.n_pairs = options.pairs;
  config.noise_sigma = options.noise;
  config.occlusion_rate = options.occlusion;
  config.seed = options.seed.value_or(global.seed.value_or(0));
  config.manhattan = options.manhattan;
  const Scene scene = GenerateScene(config);

  const fs::path dir(options.out);
  const fs::path dataset_path = dir / "dataset.json";
  const fs::path groundtruth_path = dir / "groundtruth.json";
  SaveDataset(DatasetFromScene(scene, false), dataset_path);
  SaveDataset(DatasetFromScene(scene, true), groundtruth_path);

  if (global.json) {
    out << OrderedJson{{"dataset", dataset_path.string()},
                       {"groundtruth", groundtruth_path.string()},
                       {"images", scene.images.size()},
                       {"pairs", config.n_pairs},
                       {"seed", config.seed}}
               .dump()
        << "\n";
  } else if (!global.quiet) {
    out << "wrote " << scene.images.size() << " images to "
        << dataset_path.string() << " and " << groundtruth_path.string()
        << "\n";
  }
  return kExitSuccess;
}

int RunSingle(const SingleOptions& options, const GlobalOptions& global,
              std::ostream& out, std::ostream& err) {
  const Dataset dataset = LoadDataset(options.dataset);
  if (!dataset.manhattan) {
    throw Error(ErrorCode::kConfigInvalid,
                options.dataset + " declares no Manhattan axes");
  }

  std::vector<std::pair<std::string, SingleImageResult>> results;
  std::vector<ImageFailure> failures;
  bool numerical_failure = false;
  for (const KeypointImage& image : dataset.images) {
    try {
      results.emplace_back(image.id,
                           ReconstructSingle(image, *dataset.manhattan));
    } catch (const Error& e) {
      failures.push_back({image.id, e.what()});
      numerical_failure |= IsNumericalError(e.code());
      if (!global.quiet) err << "image " << image.id << ": " << e.what() << "\n";
    }
  }

  ReconstructionResult result =
      ResultFromSingle(dataset, results, failures, options.all_signs);
  if (dataset.groundtruth && !results.empty()) {
    result.metrics = Evaluate(result, *dataset.groundtruth);
  }
  SaveResult(result, options.out);
  if (!options.points.empty() && !results.empty()) {
    ExportPoints(result, options.points);
  }

  if (global.json) {
    OrderedJson summary{{"result", options.out},
                        {"reconstructed", results.size()},
                        {"failed", failures.size()},
                        {"dropped", dataset.dropped_images.size()}};
    if (result.metrics) summary["metrics"] = MetricsJson(*result.metrics);
    out << summary.dump() << "\n";
  } else if (!global.quiet) {
    out << "reconstructed " << results.size() << " of "
        << dataset.images.size() << " images ("
        << dataset.dropped_images.size() << " dropped)\n";
    if (result.metrics) PrintMetrics(*result.metrics, out);
  }
  if (!results.empty()) return kExitSuccess;
  return numerical_failure ? kExitNumericalError : kExitInputError;
}

struct MultiOutcome {
  std::string dataset;
  std::string out;
  int exit_code = kExitSuccess;
  std::string error;
  std::optional<ReconstructionResult> result;
};

MultiOutcome RunMultiOne(const fs::path& dataset_path, const fs::path& out_path,
                         const fs::path& trace_path,
                         const fs::path& points_path,
                         const SymRsfmOptions& solver) {
  MultiOutcome outcome;
  outcome.dataset = dataset_path.string();
  outcome.out = out_path.string();
  try {
    const Dataset dataset = LoadDataset(dataset_path, solver.min_visible);
    const MultiImageResult multi = ReconstructMulti(dataset.images, solver);
    ReconstructionResult result = ResultFromMulti(dataset, multi);
    if (dataset.groundtruth) {
      result.metrics = Evaluate(result, *dataset.groundtruth);
    }
    SaveResult(result, out_path);
    if (!trace_path.empty()) WriteTrace(multi.trace, trace_path);
    if (!points_path.empty()) ExportPoints(result, points_path);
    if (!result.converged) outcome.exit_code = kExitNonConvergence;
    outcome.result = std::move(result);
  } catch (const Error& e) {
    outcome.exit_code = ExitCodeFor(e);
    outcome.error = e.what();
  }
  return outcome;
}

void ReportMulti(const MultiOutcome& outcome, const GlobalOptions& global,
                 OrderedJson* json, std::ostream& out, std::ostream& err) {
  if (!outcome.error.empty() && !global.quiet) {
    err << outcome.dataset << ": " << outcome.error << "\n";
  }
  if (global.json) {
    OrderedJson entry{{"dataset", outcome.dataset},
                      {"result", outcome.out},
                      {"exit_code", outcome.exit_code}};
    if (!outcome.error.empty()) entry["error"] = outcome.error;
    if (outcome.result) {
      entry["converged"] = outcome.result->converged;
      entry["iterations"] = outcome.result->iterations;
      entry["images"] = outcome.result->images.size();
      entry["dropped"] = outcome.result->dropped_images.size();
      if (outcome.result->metrics) {
        entry["metrics"] = MetricsJson(*outcome.result->metrics);
      }
    }
    json->push_back(entry);
    return;
  }
  if (global.quiet || !outcome.result) return;
  const ReconstructionResult& result = *outcome.result;
  out << outcome.dataset << ": " << result.images.size() << " images, "
      << result.dropped_images.size() << " dropped, "
      << (result.converged ? "converged" : "not converged") << " after "
      << result.iterations << " iterations\n";
  if (result.metrics) PrintMetrics(*result.metrics, out);
}

int RunMulti(const MultiOptions& options, const GlobalOptions& global,
             std::ostream& out, std::ostream& err) {
  const fs::path input(options.dataset);
  OrderedJson json = OrderedJson::array();

  if (!fs::is_directory(input)) {
    const MultiOutcome outcome =
        RunMultiOne(input, options.out, options.trace, options.points,
                    options.solver);
    ReportMulti(outcome, global, &json, out, err);
    if (global.json) out << json.front().dump() << "\n";
    return outcome.exit_code;
  }

  // One dataset per file; each runs as an independent job.
  std::vector<fs::path> datasets;
  for (const auto& entry : fs::directory_iterator(input)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") {
      datasets.push_back(entry.path());
    }
  }
  std::sort(datasets.begin(), datasets.end());
  if (datasets.empty()) {
    throw Error(ErrorCode::kIoError, "no .json datasets in " + input.string());
  }

  const fs::path out_dir(options.out);
  std::vector<std::future<MultiOutcome>> jobs;
  for (const fs::path& dataset : datasets) {
    const std::string stem = dataset.stem().string();
    const fs::path trace = options.trace.empty()
                               ? fs::path()
                               : fs::path(options.trace) / (stem + ".trace.csv");
    const fs::path points = options.points.empty()
                                ? fs::path()
                                : fs::path(options.points) / (stem + ".ply");
    jobs.push_back(std::async(std::launch::async, RunMultiOne, dataset,
                              out_dir / (stem + ".result.json"), trace, points,
                              options.solver));
  }
  int exit_code = kExitSuccess;
  for (auto& job : jobs) {
    const MultiOutcome outcome = job.get();
    ReportMulti(outcome, global, &json, out, err);
    exit_code = WorseExitCode(exit_code, outcome.exit_code);
  }
  if (global.json) out << json.dump() << "\n";
  return exit_code;
}

int RunEvaluate(const EvaluateOptions& options, const GlobalOptions& global,
                std::ostream& out) {
  const ReconstructionResult result = LoadResult(options.result);
  const Dataset groundtruth = LoadDataset(options.groundtruth, 0);
  if (!groundtruth.groundtruth) {
    throw Error(ErrorCode::kConfigInvalid,
                options.groundtruth + " has no groundtruth block");
  }
  const Metrics metrics = Evaluate(result, *groundtruth.groundtruth);
  if (global.json) {
    out << MetricsJson(metrics).dump() << "\n";
  } else {
    PrintMetrics(metrics, out);
  }
  return kExitSuccess;
}

}  // namespace

int RunCli(const std::vector<std::string>& args, std::ostream& out,
           std::ostream& err) {
  CLI::App app{"Symmetric object reconstruction from 2D keypoints"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions global;
  app.add_option("--seed", global.seed, "Default random seed");
  app.add_flag("--quiet", global.quiet, "Only report errors");
  app.add_flag("--json", global.json, "Machine-readable output");

  SynthOptions synth;
  CLI::App* synth_cmd = app.add_subcommand("synth", "Generate a synthetic scene");
  synth_cmd->add_option("--images", synth.images, "Number of images");
  synth_cmd->add_option("--pairs", synth.pairs, "Number of symmetric pairs");
  synth_cmd->add_option("--noise", synth.noise,
                        "Keypoint noise as a fraction of the shape diameter");
  synth_cmd->add_option("--occlusion", synth.occlusion,
                        "Per-keypoint occlusion probability");
  synth_cmd->add_option("--seed", synth.seed, "Random seed");
  synth_cmd->add_option("--out", synth.out, "Output directory")->required();
  synth_cmd->add_flag("--manhattan", synth.manhattan,
                      "Emit Manhattan axis endpoints");

  SingleOptions single;
  CLI::App* single_cmd = app.add_subcommand(
      "reconstruct-single", "Per-image reconstruction from Manhattan axes");
  single_cmd->add_option("--dataset", single.dataset, "Dataset file")
      ->required();
  single_cmd->add_option("--out", single.out, "Result file")->required();
  single_cmd->add_flag("--all-signs", single.all_signs,
                       "Store every sign variant of each camera");
  single_cmd->add_option("--points", single.points,
                         "Write the first structure as a PLY point file");

  MultiOptions multi;
  CLI::App* multi_cmd = app.add_subcommand(
      "reconstruct-multi", "Joint reconstruction from several images");
  multi_cmd->add_option("--dataset", multi.dataset,
                        "Dataset file, or a directory of dataset files")
      ->required();
  multi_cmd->add_option("--out", multi.out,
                        "Result file (directory for directory input)")
      ->required();
  multi_cmd->add_option("--max-iters", multi.solver.max_iterations,
                        "Iteration limit");
  multi_cmd->add_option("--tol", multi.solver.tolerance,
                        "Relative energy decrease for convergence");
  multi_cmd->add_option("--init-T", multi.solver.init_iterations,
                        "Missing-point initialisation sweeps");
  multi_cmd->add_option("--trace", multi.trace,
                        "Iteration trace CSV (directory for directory input)");
  multi_cmd->add_option("--points", multi.points,
                        "PLY point file (directory for directory input)");

  EvaluateOptions evaluate;
  CLI::App* evaluate_cmd =
      app.add_subcommand("evaluate", "Score a result against groundtruth");
  evaluate_cmd->add_option("--result", evaluate.result, "Result file")
      ->required();
  evaluate_cmd->add_option("--groundtruth", evaluate.groundtruth,
                           "Dataset file with a groundtruth block")
      ->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitSuccess : kExitInputError;
  }

  const int saved_level = FLAGS_minloglevel;
  if (global.quiet) FLAGS_minloglevel = google::GLOG_ERROR;
  int code = kExitSuccess;
  try {
    if (synth_cmd->parsed()) {
      code = RunSynth(synth, global, out);
    } else if (single_cmd->parsed()) {
      code = RunSingle(single, global, out, err);
    } else if (multi_cmd->parsed()) {
      code = RunMulti(multi, global, out, err);
    } else if (evaluate_cmd->parsed()) {
      code = RunEvaluate(evaluate, global, out);
    }
  } catch (const Error& e) {
    err << e.what() << "\n";
    code = ExitCodeFor(e);
  } catch (const fs::filesystem_error& e) {
    err << e.what() << "\n";
    code = kExitInputError;
  }
  FLAGS_minloglevel = saved_level;
  return code;
}

}  // namespace symsfm
