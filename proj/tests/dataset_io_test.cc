#include "symsfm/dataset_io.h"

#include <algorithm>
#include <filesystem>
#include <sstream>

#include <gtest/gtest.h>

#include "json.hpp"
#include "symsfm/cli.h"
#include "symsfm/errors.h"

namespace symsfm {
namespace {

namespace fs = std::filesystem;

fs::path TempDir(const std::string& name) {
  const fs::path dir = fs::path(::testing::TempDir()) / ("symsfm_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

template <typename F>
void ExpectError(ErrorCode code, F&& f, const std::string& fragment = "") {
  try {
    f();
    FAIL() << "expected " << ErrorCodeName(code);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), code) << e.what();
    if (!fragment.empty()) {
      EXPECT_NE(std::string(e.what()).find(fragment), std::string::npos)
          << e.what();
    }
  }
}

// Three pairs; `visible` of the six keypoints carry coordinates.
std::string SmallDataset(int visible) {
  const char* names[] = {"a_l", "a_r", "b_l", "b_r", "c_l", "c_r"};
  std::ostringstream out;
  out << R"({"schema_version": 1,
  "pairs": [["a_l", "a_r"], ["b_l", "b_r"], ["c_l", "c_r"]],
  "images": [{"id": "im0", "keypoints": {)";
  for (int k = 0; k < 6; ++k) {
    if (k > 0) out << ", ";
    out << "\"" << names[k] << "\": ";
    if (k < visible) {
      out << "[" << k << ".5, " << -k << "]";
    } else {
      out << "null";
    }
  }
  out << "}}]}\n";
  return out.str();
}

struct CliRun {
  int code;
  std::string out;
  std::string err;
};

CliRun RunCliArgs(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = RunCli(args, out, err);
  return {code, out.str(), err.str()};
}

TEST(LoadDatasetTest, MinimalValidFile) {
  const Dataset d = ParseDataset(SmallDataset(5));
  ASSERT_EQ(d.images.size(), 1u);
  EXPECT_TRUE(d.dropped_images.empty());
  EXPECT_EQ(d.images[0].NumVisible(), 5);
  EXPECT_FALSE(d.images[0].vis_dag[2]);
  EXPECT_EQ(d.images[0].y_dag.col(0), Eigen::Vector2d(1.5, -1));
}

TEST(LoadDatasetTest, SparseImageDropped) {
  const Dataset d = ParseDataset(SmallDataset(4));
  EXPECT_TRUE(d.images.empty());
  ASSERT_EQ(d.dropped_images.size(), 1u);
  EXPECT_EQ(d.dropped_images[0], "im0");
  EXPECT_EQ(d.warnings.size(), 1u);
}

TEST(LoadDatasetTest, SelfPairedKeypointFillsBothColumns) {
  const std::string text = R"({"schema_version": 1,
    "pairs": [["l", "r"], ["nose", "nose"]],
    "images": [{"id": "x", "keypoints": {"l": [1, 2], "r": [3, 4],
                                          "nose": [5, 6]}}]})";
  const Dataset d = ParseDataset(text, 3);
  ASSERT_EQ(d.images.size(), 1u);
  EXPECT_EQ(d.images[0].y.col(1), Eigen::Vector2d(5, 6));
  EXPECT_EQ(d.images[0].y_dag.col(1), Eigen::Vector2d(5, 6));
  EXPECT_TRUE(d.images[0].vis_dag[1]);
  // Three named keypoints are visible, not four.
  EXPECT_EQ(ParseDataset(text, 4).dropped_images.size(), 1u);
}

TEST(LoadDatasetTest, ManhattanNamesResolveToColumns) {
  const std::string text = R"({"schema_version": 1,
    "pairs": [["a_l", "a_r"], ["b_l", "b_r"], ["c_l", "c_r"]],
    "manhattan": {"axis_x": ["a_l", "a_r"], "axis_y": ["a_l", "b_l"],
                  "axis_z": ["a_l", "c_l"]},
    "images": []})";
  const Dataset d = ParseDataset(text);
  ASSERT_TRUE(d.manhattan.has_value());
  EXPECT_EQ(d.manhattan->axes[0], std::make_pair(0, 3));
  EXPECT_EQ(d.manhattan->axes[1], std::make_pair(0, 1));
  EXPECT_EQ(d.manhattan->axes[2], std::make_pair(0, 2));
}

TEST(LoadDatasetTest, SyntaxErrorReportsLine) {
  const std::string text = "{\n  \"schema_version\": 1,\n  \"pairs\": [,]\n}";
  ExpectError(ErrorCode::kParseError, [&] { ParseDataset(text); }, "line 3");
}

TEST(LoadDatasetTest, SchemaErrorsReportField) {
  ExpectError(ErrorCode::kParseError,
              [] {
                ParseDataset(R"({"schema_version": 1, "pairs": ["a"],
                                 "images": []})");
              },
              "pairs[0]");
  ExpectError(ErrorCode::kParseError,
              [] {
                ParseDataset(R"({"schema_version": 1, "pairs": [["a", "b"]],
                  "images": [{"id": "i", "keypoints": {"zz": [0, 0]}}]})");
              },
              "images[0].keypoints.zz");
  ExpectError(ErrorCode::kParseError,
              [] {
                ParseDataset(R"({"schema_version": 1, "pairs": [["a", "b"]],
                  "images": [{"id": "i", "keypoints": {"a": [0, "x"]}}]})");
              },
              "images[0].keypoints.a[1]");
  ExpectError(ErrorCode::kParseError,
              [] {
                ParseDataset(R"({"schema_version": 1,
                  "pairs": [["a", "b"], ["b", "c"]], "images": []})");
              },
              "pairs[1]");
}

TEST(LoadDatasetTest, SchemaVersionUnsupported) {
  ExpectError(ErrorCode::kSchemaVersionUnsupported, [] {
    ParseDataset(R"({"schema_version": 2, "pairs": [["a", "b"]], "images": []})");
  });
}

TEST(LoadDatasetTest, GroundtruthMirrorViolation) {
  const std::string good = R"({"schema_version": 1, "pairs": [["a", "b"]],
    "images": [], "groundtruth": {"shape": {"a": [1, 2, 3], "b": [-1, 2, 3]},
    "poses": {}}})";
  EXPECT_TRUE(ParseDataset(good).groundtruth.has_value());
  const std::string bad = R"({"schema_version": 1, "pairs": [["a", "b"]],
    "images": [], "groundtruth": {"shape": {"a": [1, 2, 3], "b": [-1, 2, 3.1]},
    "poses": {}}})";
  ExpectError(ErrorCode::kMirrorViolation, [&] { ParseDataset(bad); });
}

TEST(LoadDatasetTest, MissingFileIsIoError) {
  ExpectError(ErrorCode::kIoError,
              [] { LoadDataset("/nonexistent/dataset.json"); });
}

TEST(SaveDatasetTest, CanonicalRoundTripIsByteStable) {
  const std::string loose = R"({"images": [{"keypoints": {"b_r": [3, 4.25],
      "a_l": [0.1, 0.2], "a_r": [1e-3, -2], "b_l": [7, 8],
      "c_l": [1, 1]}, "id": "q"}],
    "groundtruth": {"poses": {"q": [[1, 0, 0], [0, 1, 0]]},
      "shape": {"a_l": [0.5, 1, 2], "a_r": [-0.5, 1, 2], "b_l": [0.25, 0, 0],
                "b_r": [-0.25, 0, 0], "c_l": [1, 1, 1], "c_r": [-1, 1, 1]}},
    "pairs": [["a_l", "a_r"], ["b_l", "b_r"], ["c_l", "c_r"]],
    "manhattan": {"axis_z": ["a_l", "c_l"], "axis_y": ["a_l", "b_l"],
                  "axis_x": ["a_l", "a_r"]},
    "schema_version": 1})";
  const std::string canonical = DatasetToString(ParseDataset(loose));
  EXPECT_EQ(DatasetToString(ParseDataset(canonical)), canonical);
  // Key order is fixed and occluded keypoints are explicit.
  EXPECT_LT(canonical.find("schema_version"), canonical.find("pairs"));
  EXPECT_NE(canonical.find("\"c_r\": null"), std::string::npos);

  const Dataset d = ParseDataset(canonical);
  EXPECT_EQ(d.images[0].y_dag.col(1), Eigen::Vector2d(3, 4.25));
  EXPECT_EQ(d.images[0].y_dag(0, 0), 1e-3);
}

TEST(SaveDatasetTest, SceneFileRoundTrip) {
  SceneConfig config;
  config.seed = 9;
  config.noise_sigma = 0.013;
  config.occlusion_rate = 0.2;
  config.manhattan = true;
  const Scene scene = GenerateScene(config);
  const fs::path path = TempDir("scene") / "gt.json";
  SaveDataset(DatasetFromScene(scene, true), path);
  const std::string bytes = ReadTextFile(path);
  const Dataset loaded = LoadDataset(path);
  EXPECT_EQ(DatasetToString(loaded), bytes);
  ASSERT_EQ(loaded.images.size(), scene.images.size());
  for (size_t n = 0; n < scene.images.size(); ++n) {
    EXPECT_EQ(loaded.images[n].y, scene.images[n].y);
    EXPECT_EQ(loaded.images[n].y_dag, scene.images[n].y_dag);
    EXPECT_EQ(loaded.groundtruth->poses.at(scene.images[n].id),
              scene.poses[n].R);
  }
  EXPECT_EQ(loaded.groundtruth->shape.Left(), scene.shape.Left());
  EXPECT_EQ(loaded.manhattan->axes, scene.manhattan->axes);
}

Dataset MultiDataset(uint64_t seed, bool groundtruth) {
  SceneConfig config;
  config.seed = seed;
  config.noise_sigma = 0.01;
  config.occlusion_rate = 0.2;
  return DatasetFromScene(GenerateScene(config), groundtruth);
}

TEST(ResultTest, MultiResultReloadsBitIdentical) {
  const Dataset dataset = MultiDataset(10, true);
  ReconstructionResult result =
      ResultFromMulti(dataset, ReconstructMulti(dataset.images));
  result.metrics = Evaluate(result, *dataset.groundtruth);
  const std::string text = ResultToString(result);
  const ReconstructionResult loaded = ParseResult(text);
  EXPECT_EQ(ResultToString(loaded), text);
  ASSERT_EQ(loaded.images.size(), result.images.size());
  for (size_t n = 0; n < result.images.size(); ++n) {
    EXPECT_EQ(loaded.images[n].pose.R, result.images[n].pose.R);
    EXPECT_EQ(loaded.images[n].pose.t, result.images[n].pose.t);
    EXPECT_EQ(*loaded.images[n].filled, *result.images[n].filled);
    EXPECT_EQ(loaded.images[n].imputed, result.images[n].imputed);
  }
  EXPECT_EQ(loaded.shape->Left(), result.shape->Left());
  EXPECT_EQ(loaded.energy_trace, result.energy_trace);
  EXPECT_EQ(loaded.metrics->shape_error, result.metrics->shape_error);
}

TEST(ResultTest, FilledObservationsKeepVisibleData) {
  const Dataset dataset = MultiDataset(11, false);
  const ReconstructionResult result =
      ResultFromMulti(dataset, ReconstructMulti(dataset.images));
  for (size_t n = 0; n < result.images.size(); ++n) {
    const KeypointImage& image = dataset.images[n];
    for (int c = 0; c < 2 * image.NumPairs(); ++c) {
      EXPECT_EQ(result.images[n].imputed[c], !image.IsVisible(c));
      if (image.IsVisible(c)) {
        EXPECT_LT((result.images[n].filled->col(c) - image.Point(c)).norm(),
                  1e-12);
      }
    }
  }
}

TEST(ResultTest, SingleResultCarriesSignFamily) {
  SceneConfig config;
  config.seed = 12;
  config.n_images = 3;
  config.manhattan = true;
  const Dataset dataset = DatasetFromScene(GenerateScene(config), true);
  std::vector<std::pair<std::string, SingleImageResult>> results;
  for (const KeypointImage& image : dataset.images) {
    results.emplace_back(image.id, ReconstructSingle(image, *dataset.manhattan));
  }
  const ReconstructionResult result =
      ResultFromSingle(dataset, results, {{"bad", "AxisDegenerate: x"}}, true);
  const ReconstructionResult loaded = ParseResult(ResultToString(result));
  ASSERT_EQ(loaded.images.size(), 3u);
  EXPECT_EQ(loaded.images[0].sign_family.size(), 8u);
  EXPECT_EQ(loaded.images[1].shape->Left(), result.images[1].shape->Left());
  ASSERT_EQ(loaded.failures.size(), 1u);
  EXPECT_EQ(loaded.failures[0].id, "bad");
  const Metrics m = Evaluate(loaded, *dataset.groundtruth);
  EXPECT_LT(m.rotation_error, 1e-6);
  EXPECT_LT(m.shape_error, 1e-6);
}

TEST(ResultTest, MetricsAbsentWithoutGroundtruth) {
  const Dataset dataset = MultiDataset(13, false);
  const ReconstructionResult result =
      ResultFromMulti(dataset, ReconstructMulti(dataset.images));
  EXPECT_EQ(ResultToString(result).find("\"metrics\""), std::string::npos);
  EXPECT_FALSE(ParseResult(ResultToString(result)).metrics.has_value());
}

TEST(ExportPointsTest, PairMembersAdjacent) {
  const Dataset dataset = MultiDataset(14, false);
  const ReconstructionResult result =
      ResultFromMulti(dataset, ReconstructMulti(dataset.images));
  const fs::path path = TempDir("ply") / "shape.ply";
  ExportPoints(result, path);
  std::istringstream in(ReadTextFile(path));
  std::string line;
  std::vector<std::string> header;
  while (std::getline(in, line) && line != "end_header") header.push_back(line);
  EXPECT_EQ(header.front(), "ply");
  EXPECT_NE(std::find(header.begin(), header.end(), "element vertex 16"),
            header.end());
  std::vector<Eigen::Vector3d> vertices;
  double x, y, z;
  while (in >> x >> y >> z) vertices.emplace_back(x, y, z);
  ASSERT_EQ(vertices.size(), 16u);
  for (int p = 0; p < 8; ++p) {
    EXPECT_EQ(vertices[2 * p], result.shape->Left().col(p));
    EXPECT_EQ(vertices[2 * p + 1], result.shape->Right().col(p));
  }
}

TEST(WriteTraceTest, CsvRecords) {
  const fs::path path = TempDir("trace") / "trace.csv";
  WriteTrace({{0, 2.5, 1e-16}, {1, 1.25, 0.0}}, path);
  EXPECT_EQ(ReadTextFile(path),
            "iteration,energy,max_orthogonality_violation\n"
            "0,2.5,9.9999999999999998e-17\n1,1.25,0\n");
}

TEST(CliTest, SynthReconstructEvaluateZeroNoise) {
  const fs::path dir = TempDir("cli_zero");
  ASSERT_EQ(RunCliArgs({"synth", "--images", "12", "--pairs", "8", "--noise", "0",
                 "--occlusion", "0", "--seed", "5", "--out", dir.string(),
                 "--manhattan"})
                .code,
            kExitSuccess);
  const std::string gt = (dir / "groundtruth.json").string();
  for (const std::string method : {"reconstruct-multi", "reconstruct-single"}) {
    const std::string out = (dir / (method + ".json")).string();
    ASSERT_EQ(RunCliArgs({method, "--dataset", (dir / "dataset.json").string(),
                   "--out", out})
                  .code,
              kExitSuccess);
    const CliRun eval =
        RunCliArgs({"--json", "evaluate", "--result", out, "--groundtruth", gt});
    ASSERT_EQ(eval.code, kExitSuccess) << eval.err;
    const auto metrics = nlohmann::json::parse(eval.out);
    EXPECT_LT(metrics["e_R"].get<double>(), 1e-6) << method;
    EXPECT_LT(metrics["e_S"].get<double>(), 1e-6) << method;
  }
}

TEST(CliTest, Deterministic) {
  const fs::path dir = TempDir("cli_det");
  for (const char* sub : {"a", "b"}) {
    const fs::path out = dir / sub;
    ASSERT_EQ(RunCliArgs({"--seed", "77", "synth", "--noise", "0.02", "--occlusion",
                   "0.2", "--out", out.string()})
                  .code,
              kExitSuccess);
    ASSERT_EQ(RunCliArgs({"--quiet", "reconstruct-multi", "--dataset",
                   (out / "dataset.json").string(), "--out",
                   (out / "result.json").string(), "--trace",
                   (out / "trace.csv").string()})
                  .code,
              kExitSuccess);
  }
  for (const char* file :
       {"dataset.json", "groundtruth.json", "result.json", "trace.csv"}) {
    EXPECT_EQ(ReadTextFile(dir / "a" / file), ReadTextFile(dir / "b" / file))
        << file;
  }
}

TEST(CliTest, ExitCodes) {
  const fs::path dir = TempDir("cli_exit");
  EXPECT_EQ(RunCliArgs({"--quiet", "evaluate", "--result", "/nonexistent.json",
                 "--groundtruth", "/nonexistent.json"})
                .code,
            kExitInputError);
  EXPECT_EQ(RunCliArgs({"synth"}).code, kExitInputError);

  ASSERT_EQ(RunCliArgs({"--quiet", "synth", "--images", "1", "--out",
                 (dir / "one").string()})
                .code,
            kExitSuccess);
  // A single image cannot be reconstructed jointly, and has no Manhattan
  // axes for the single-image route.
  EXPECT_EQ(RunCliArgs({"--quiet", "reconstruct-multi", "--dataset",
                 (dir / "one" / "dataset.json").string(), "--out",
                 (dir / "one.json").string()})
                .code,
            kExitNumericalError);
  EXPECT_EQ(RunCliArgs({"--quiet", "reconstruct-single", "--dataset",
                 (dir / "one" / "dataset.json").string(), "--out",
                 (dir / "one.json").string()})
                .code,
            kExitInputError);

  ASSERT_EQ(RunCliArgs({"--quiet", "synth", "--noise", "0.05", "--occlusion", "0.2",
                 "--out", (dir / "noisy").string()})
                .code,
            kExitSuccess);
  const fs::path result = dir / "noisy.json";
  EXPECT_EQ(RunCliArgs({"--quiet", "reconstruct-multi", "--dataset",
                 (dir / "noisy" / "dataset.json").string(), "--out",
                 result.string(), "--max-iters", "1", "--tol", "0"})
                .code,
            kExitNonConvergence);
  EXPECT_FALSE(LoadResult(result).converged);
}

TEST(CliTest, DirectoryFanOut) {
  const fs::path dir = TempDir("cli_dir");
  for (int k = 0; k < 3; ++k) {
    SaveDataset(MultiDataset(20 + k, true),
                dir / "in" / ("subtype" + std::to_string(k) + ".json"));
  }
  const CliRun run =
      RunCliArgs({"--json", "reconstruct-multi", "--dataset", (dir / "in").string(),
           "--out", (dir / "out").string(), "--trace", (dir / "trace").string(),
           "--points", (dir / "ply").string()});
  ASSERT_EQ(run.code, kExitSuccess) << run.err;
  const auto summary = nlohmann::json::parse(run.out);
  ASSERT_EQ(summary.size(), 3u);
  for (int k = 0; k < 3; ++k) {
    const std::string stem = "subtype" + std::to_string(k);
    EXPECT_TRUE(fs::exists(dir / "out" / (stem + ".result.json")));
    EXPECT_TRUE(fs::exists(dir / "trace" / (stem + ".trace.csv")));
    EXPECT_TRUE(fs::exists(dir / "ply" / (stem + ".ply")));
    EXPECT_TRUE(summary[k].contains("metrics"));
  }
}

}  // namespace
}  // namespace symsfm
