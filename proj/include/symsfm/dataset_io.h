#ifndef SYMSFM_DATASET_IO_H_
#define SYMSFM_DATASET_IO_H_

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "symsfm/geometry.h"
#include "symsfm/single_image.h"
#include "symsfm/sym_rsfm.h"
#include "symsfm/synthetic.h"

namespace symsfm {

inline constexpr int kSchemaVersion = 1;

// (left name, right name). A keypoint on the symmetry plane may be paired
// with itself.
using PairNames = std::pair<std::string, std::string>;

struct Groundtruth {
  Structure3D shape;
  // Keyed by image id; images without an entry have no groundtruth pose.
  std::map<std::string, Matrix23d> poses;
};

struct Dataset {
  std::vector<PairNames> pairs;
  std::vector<KeypointImage> images;
  std::optional<ManhattanSpec> manhattan;
  std::optional<Groundtruth> groundtruth;
  // Filled by the loader.
  std::vector<std::string> dropped_images;
  std::vector<std::string> warnings;

  int NumPairs() const { return static_cast<int>(pairs.size()); }
  // Keypoint name of column c of [y, y_dag].
  const std::string& ColumnName(int column) const;
};

// Parses a dataset document. Images with fewer than min_visible visible
// keypoints are dropped and reported in dropped_images and warnings. A
// self-paired keypoint counts once. `source` prefixes error messages.
Dataset ParseDataset(const std::string& text, int min_visible = 5,
                     const std::string& source = "<string>");
Dataset LoadDataset(const std::filesystem::path& path, int min_visible = 5);

// Canonical text form: fixed key order, two-space indent, shortest
// round-trip doubles, explicit nulls for occluded keypoints.
std::string DatasetToString(const Dataset& dataset);
void SaveDataset(const Dataset& dataset, const std::filesystem::path& path);

// Keypoints are named p<k>_left / p<k>_right. The groundtruth block is
// included on request.
Dataset DatasetFromScene(const Scene& scene, bool with_groundtruth);

struct ImageResult {
  std::string id;
  CameraPose pose;
  // Single-image runs: the structure reconstructed from this image.
  std::optional<Structure3D> shape;
  std::vector<Matrix23d> sign_family;
  // Multi-image runs: observations with occluded entries filled (2 x 2P, in
  // image coordinates) and the mask of filled columns.
  std::optional<Eigen::Matrix2Xd> filled;
  std::vector<bool> imputed;
};

struct ImageFailure {
  std::string id;
  std::string error;
};

struct Metrics {
  double rotation_error = 0.0;
  double shape_error = 0.0;
  bool mirrored = false;
  std::vector<std::string> image_ids;
  std::vector<double> per_image_rotation_error;
  std::vector<double> per_image_shape_error;
};

struct ReconstructionResult {
  std::string method;  // "single" or "multi"
  std::vector<PairNames> pairs;
  std::vector<ImageResult> images;
  // Multi-image runs: the shared structure.
  std::optional<Structure3D> shape;
  std::vector<double> energy_trace;
  bool converged = true;
  int iterations = 0;
  std::vector<std::string> dropped_images;
  std::vector<std::string> warnings;
  std::vector<ImageFailure> failures;
  std::optional<Metrics> metrics;
};

ReconstructionResult ResultFromSingle(
    const Dataset& dataset,
    const std::vector<std::pair<std::string, SingleImageResult>>& results,
    const std::vector<ImageFailure>& failures, bool all_signs);
ReconstructionResult ResultFromMulti(const Dataset& dataset,
                                     const MultiImageResult& multi);

// Scores a result against groundtruth poses and shape. Images are matched by
// id; those without a groundtruth pose are skipped. Throws kLengthMismatch if
// nothing can be matched.
Metrics Evaluate(const ReconstructionResult& result,
                 const Groundtruth& groundtruth);

std::string ResultToString(const ReconstructionResult& result);
ReconstructionResult ParseResult(const std::string& text,
                                 const std::string& source = "<string>");
void SaveResult(const ReconstructionResult& result,
                const std::filesystem::path& path);
ReconstructionResult LoadResult(const std::filesystem::path& path);

// ASCII PLY vertex list with pair members adjacent (left then right). Uses the
// shared structure, or the first reconstructed image for single-image runs.
void ExportPoints(const ReconstructionResult& result,
                  const std::filesystem::path& path);

// CSV with header iteration,energy,max_orthogonality_violation.
void WriteTrace(const std::vector<IterationRecord>& trace,
                const std::filesystem::path& path);

std::string ReadTextFile(const std::filesystem::path& path);
void WriteTextFile(const std::filesystem::path& path, const std::string& text);

}  // namespace symsfm

#endif  // SYMSFM_DATASET_IO_H_
