#include "symsfm/geometry.h"

#include <cmath>

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <glog/logging.h>

#include "symsfm/errors.h"

namespace symsfm {

std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kDegenerateShape: return "DegenerateShape";
    case ErrorCode::kRankDeficient: return "RankDeficient";
    case ErrorCode::kAxisDegenerate: return "AxisDegenerate";
    case ErrorCode::kSlopeCoincidence: return "SlopeCoincidence";
    case ErrorCode::kNegativeSquare: return "NegativeSquare";
    case ErrorCode::kYZSingular: return "YZSingular";
    case ErrorCode::kSymmetryAxisUnobservable: return "SymmetryAxisUnobservable";
    case ErrorCode::kTooFewImages: return "TooFewImages";
    case ErrorCode::kDegenerateScale: return "DegenerateScale";
    case ErrorCode::kIllConditioned: return "IllConditioned";
    case ErrorCode::kSingularAmbiguity: return "SingularAmbiguity";
    case ErrorCode::kSingularNormalMatrix: return "SingularNormalMatrix";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kNoVisiblePoints: return "NoVisiblePoints";
    case ErrorCode::kOccludedKeypoints: return "OccludedKeypoints";
    case ErrorCode::kConfigInvalid: return "ConfigInvalid";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kSchemaVersionUnsupported: return "SchemaVersionUnsupported";
    case ErrorCode::kMirrorViolation: return "MirrorViolation";
    case ErrorCode::kIoError: return "IoError";
  }
  return "Unknown";
}

bool IsNumericalError(ErrorCode code) {
  switch (code) {
    case ErrorCode::kDegenerateShape:
    case ErrorCode::kRankDeficient:
    case ErrorCode::kAxisDegenerate:
    case ErrorCode::kSlopeCoincidence:
    case ErrorCode::kNegativeSquare:
    case ErrorCode::kYZSingular:
    case ErrorCode::kSymmetryAxisUnobservable:
    case ErrorCode::kTooFewImages:
    case ErrorCode::kDegenerateScale:
    case ErrorCode::kIllConditioned:
    case ErrorCode::kSingularAmbiguity:
    case ErrorCode::kSingularNormalMatrix:
      return true;
    default:
      return false;
  }
}

Structure3D Structure3D::FromFull(const Eigen::Matrix3Xd& full, double tol) {
  if (full.cols() % 2 != 0) {
    throw Error(ErrorCode::kLengthMismatch,
                "full structure must have an even number of columns");
  }
  const int num_pairs = static_cast<int>(full.cols() / 2);
  Eigen::Matrix3Xd left = full.leftCols(num_pairs);
  const Eigen::Matrix3Xd expected_right = MirrorOperator() * left;
  for (int p = 0; p < num_pairs; ++p) {
    const double deviation =
        (full.col(num_pairs + p) - expected_right.col(p)).norm();
    if (deviation > tol) {
      throw Error(ErrorCode::kMirrorViolation,
                  "pair " + std::to_string(p) + " deviates from its mirror by " +
                      std::to_string(deviation));
    }
  }
  return Structure3D(std::move(left));
}

Eigen::Matrix3Xd Structure3D::Full() const {
  Eigen::Matrix3Xd full(3, 2 * left_.cols());
  full << left_, MirrorOperator() * left_;
  return full;
}

double CameraPose::OrthogonalityViolation() const {
  return (R * R.transpose() - Eigen::Matrix2d::Identity()).norm();
}

int KeypointImage::NumVisible() const {
  int count = 0;
  for (const bool v : vis) count += v;
  for (const bool v : vis_dag) count += v;
  return count;
}

void KeypointImage::Validate() const {
  const auto num_pairs = static_cast<size_t>(y.cols());
  if (static_cast<size_t>(y_dag.cols()) != num_pairs ||
      vis.size() != num_pairs || vis_dag.size() != num_pairs) {
    throw Error(ErrorCode::kLengthMismatch,
                "image '" + id + "' has inconsistent keypoint column counts");
  }
}

bool KeypointImage::IsVisible(int column) const {
  const int num_pairs = NumPairs();
  return column < num_pairs ? vis[column] : vis_dag[column - num_pairs];
}

Eigen::Vector2d KeypointImage::Point(int column) const {
  const int num_pairs = NumPairs();
  return column < num_pairs ? Eigen::Vector2d(y.col(column))
                            : Eigen::Vector2d(y_dag.col(column - num_pairs));
}

Eigen::Matrix2Xd KeypointImage::All() const {
  Eigen::Matrix2Xd all(2, 2 * y.cols());
  all << y, y_dag;
  return all;
}

double ShapeSpread(const Eigen::Matrix3Xd& points) {
  const Eigen::Vector3d mean = points.rowwise().mean();
  const Eigen::Matrix3Xd centered = points.colwise() - mean;
  const double n = static_cast<double>(points.cols());
  const Eigen::Vector3d sigma =
      (centered.array().square().rowwise().sum() / n).sqrt();
  return sigma.sum();
}

Eigen::Matrix3Xd NormalizeShape(const Eigen::Matrix3Xd& points) {
  const double spread = ShapeSpread(points);
  if (!(spread >= 1e-12)) {
    throw Error(ErrorCode::kDegenerateShape,
                "all points coincide, cannot normalise");
  }
  return 3.0 * points / spread;
}

Structure3D NormalizeShape(const Structure3D& shape) {
  // The spread is taken over all 2P points; scaling keeps the mirror relation.
  const double spread = ShapeSpread(shape.Full());
  if (!(spread >= 1e-12)) {
    throw Error(ErrorCode::kDegenerateShape,
                "all points coincide, cannot normalise");
  }
  return Structure3D(3.0 * shape.Left() / spread);
}

Eigen::Matrix3d ProcrustesAlign(const Eigen::Matrix3Xd& a,
                                const Eigen::Matrix3Xd& b,
                                bool* rank_deficient) {
  if (a.cols() != b.cols()) {
    throw Error(ErrorCode::kLengthMismatch,
                "Procrustes inputs have different point counts");
  }
  const Eigen::Matrix3d correlation = b * a.transpose();
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(
      correlation, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Vector3d& sv = svd.singularValues();
  const bool deficient = !(sv(1) > 1e-12 * sv(0));
  if (deficient) {
    LOG(WARNING) << "Procrustes alignment is rank deficient (singular values "
                 << sv.transpose() << ")";
  }
  if (rank_deficient != nullptr) *rank_deficient = deficient;

  Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) {
    d(2, 2) = -1.0;
  }
  return svd.matrixU() * d * svd.matrixV().transpose();
}

double RotationError(const std::vector<CameraPose>& estimated,
                     const std::vector<CameraPose>& groundtruth,
                     const Eigen::Matrix3d& gauge) {
  if (estimated.size() != groundtruth.size() || estimated.empty()) {
    throw Error(ErrorCode::kLengthMismatch,
                "rotation error needs two non-empty pose lists of equal size");
  }
  double total = 0.0;
  for (size_t i = 0; i < estimated.size(); ++i) {
    total += (estimated[i].R * gauge.transpose() - groundtruth[i].R).norm();
  }
  return total / static_cast<double>(estimated.size());
}

namespace {

Eigen::Matrix3Xd CenterAndNormalize(const Eigen::Matrix3Xd& points) {
  const Eigen::Vector3d centroid = points.rowwise().mean();
  return NormalizeShape(Eigen::Matrix3Xd(points.colwise() - centroid));
}

}  // namespace

double ShapeError(const Eigen::Matrix3Xd& estimated,
                  const Eigen::Matrix3Xd& groundtruth,
                  const Eigen::Matrix3d& gauge) {
  if (estimated.cols() != groundtruth.cols() || estimated.cols() == 0) {
    throw Error(ErrorCode::kLengthMismatch,
                "shape error needs two non-empty shapes of equal size");
  }
  // Per-axis spreads depend on the frame, so rotate into the groundtruth
  // frame before normalising.
  const Eigen::Matrix3Xd est = CenterAndNormalize(gauge * estimated);
  const Eigen::Matrix3Xd gt = CenterAndNormalize(groundtruth);
  return (est - gt).colwise().norm().mean();
}

double ShapeError(const Structure3D& estimated, const Structure3D& groundtruth,
                  const Eigen::Matrix3d& gauge) {
  return ShapeError(estimated.Full(), groundtruth.Full(), gauge);
}

Eigen::Matrix3d FitGauge(const Eigen::Matrix3Xd& estimated,
                         const Eigen::Matrix3Xd& groundtruth,
                         bool* rank_deficient) {
  return ProcrustesAlign(CenterAndNormalize(estimated),
                         CenterAndNormalize(groundtruth), rank_deficient);
}

std::pair<KeypointImage, Eigen::Vector2d> Centralize(
    const KeypointImage& image) {
  image.Validate();
  const int num_columns = 2 * image.NumPairs();
  Eigen::Vector2d sum = Eigen::Vector2d::Zero();
  int count = 0;
  for (int c = 0; c < num_columns; ++c) {
    if (image.IsVisible(c)) {
      sum += image.Point(c);
      ++count;
    }
  }
  if (count == 0) {
    throw Error(ErrorCode::kNoVisiblePoints,
                "image '" + image.id + "' has no visible keypoints");
  }
  const Eigen::Vector2d mean = sum / count;

  KeypointImage centered = image;
  for (int p = 0; p < image.NumPairs(); ++p) {
    if (image.vis[p]) centered.y.col(p) -= mean;
    if (image.vis_dag[p]) centered.y_dag.col(p) -= mean;
  }
  return {std::move(centered), mean};
}

Matrix23d OrthonormalizeRows(const Matrix23d& m) {
  Eigen::JacobiSVD<Matrix23d> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  if (!(svd.singularValues()(1) >= 1e-10)) {
    throw Error(ErrorCode::kRankDeficient,
                "cannot orthonormalise a matrix of rank < 2");
  }
  return svd.matrixU() * svd.matrixV().leftCols<2>().transpose();
}

namespace {

struct Scored {
  double shape_error = 0.0;
  double rotation_error = 0.0;
  std::vector<double> per_image_rotation;
  bool aligned = false;
};

Scored ScoreJoint(const std::vector<CameraPose>& poses,
                  const Eigen::Matrix3Xd& full,
                  const std::vector<CameraPose>& gt_poses,
                  const Eigen::Matrix3Xd& gt_full) {
  Scored scored;
  bool rank_deficient = false;
  const Eigen::Matrix3d gauge = FitGauge(full, gt_full, &rank_deficient);
  scored.aligned = !rank_deficient;
  scored.shape_error = ShapeError(full, gt_full, gauge);
  if (!poses.empty()) {
    for (size_t i = 0; i < poses.size(); ++i) {
      scored.per_image_rotation.push_back(
          RotationError({poses[i]}, {gt_poses[i]}, gauge));
    }
    scored.rotation_error = RotationError(poses, gt_poses, gauge);
  }
  return scored;
}

std::vector<CameraPose> MirrorPoses(std::vector<CameraPose> poses) {
  for (auto& pose : poses) pose.R = pose.R * MirrorOperator();
  return poses;
}

}  // namespace

EvalReport EvaluateJoint(const std::vector<CameraPose>& poses,
                         const Structure3D& shape,
                         const std::vector<CameraPose>& gt_poses,
                         const Structure3D& gt_shape) {
  if (poses.size() != gt_poses.size()) {
    throw Error(ErrorCode::kLengthMismatch,
                "estimated and groundtruth pose counts differ");
  }
  const Eigen::Matrix3Xd full = shape.Full();
  const Eigen::Matrix3Xd gt_full = gt_shape.Full();
  const Scored direct = ScoreJoint(poses, full, gt_poses, gt_full);
  const Scored mirrored = ScoreJoint(MirrorPoses(poses),
                                     MirrorOperator() * full, gt_poses,
                                     gt_full);
  const bool use_mirror = mirrored.shape_error < direct.shape_error;
  const Scored& best = use_mirror ? mirrored : direct;

  EvalReport report;
  report.rotation_error = best.rotation_error;
  report.shape_error = best.shape_error;
  report.per_image_rotation_error = best.per_image_rotation;
  report.per_image_shape_error.assign(poses.size(), best.shape_error);
  report.aligned = best.aligned;
  report.mirrored = use_mirror;
  return report;
}

EvalReport EvaluatePerImage(const std::vector<CameraPose>& poses,
                            const std::vector<Structure3D>& shapes,
                            const std::vector<CameraPose>& gt_poses,
                            const Structure3D& gt_shape) {
  if (poses.size() != gt_poses.size() || poses.size() != shapes.size() ||
      poses.empty()) {
    throw Error(ErrorCode::kLengthMismatch,
                "per-image evaluation needs equal, non-empty input lists");
  }
  EvalReport report;
  report.aligned = true;
  for (size_t i = 0; i < poses.size(); ++i) {
    const EvalReport single =
        EvaluateJoint({poses[i]}, shapes[i], {gt_poses[i]}, gt_shape);
    report.per_image_rotation_error.push_back(single.rotation_error);
    report.per_image_shape_error.push_back(single.shape_error);
    report.aligned = report.aligned && single.aligned;
    report.mirrored = report.mirrored || single.mirrored;
  }
  const double n = static_cast<double>(poses.size());
  for (size_t i = 0; i < poses.size(); ++i) {
    report.rotation_error += report.per_image_rotation_error[i] / n;
    report.shape_error += report.per_image_shape_error[i] / n;
  }
  return report;
}

}  // namespace symsfm
