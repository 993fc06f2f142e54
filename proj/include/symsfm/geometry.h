#ifndef SYMSFM_GEOMETRY_H_
#define SYMSFM_GEOMETRY_H_

#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace symsfm {

using Matrix23d = Eigen::Matrix<double, 2, 3>;

// diag(-1, 1, 1): reflection through the object's symmetry plane.
inline Eigen::Matrix3d MirrorOperator() {
  return Eigen::Vector3d(-1.0, 1.0, 1.0).asDiagonal();
}

// A bilaterally symmetric 3D structure of P mirrored point pairs. Only the
// left members S are stored, so the mirror relation S_dag = A * S holds
// exactly for every pair.
class Structure3D {
 public:
  Structure3D() = default;
  explicit Structure3D(Eigen::Matrix3Xd left) : left_(std::move(left)) {}

  // Builds a structure from a full 3 x 2P matrix [S, S_dag]. Throws
  // kMirrorViolation if any pair breaks the mirror relation by more than tol.
  static Structure3D FromFull(const Eigen::Matrix3Xd& full, double tol = 1e-8);

  int NumPairs() const { return static_cast<int>(left_.cols()); }
  const Eigen::Matrix3Xd& Left() const { return left_; }
  Eigen::Matrix3Xd Right() const { return MirrorOperator() * left_; }
  // [S, A S] as a 3 x 2P matrix; column p and P + p form a pair.
  Eigen::Matrix3Xd Full() const;

 private:
  Eigen::Matrix3Xd left_;
};

// Orthographic camera: image point = R * X + t.
struct CameraPose {
  Matrix23d R = Matrix23d::Zero();
  Eigen::Vector2d t = Eigen::Vector2d::Zero();

  // ||R R^T - I||_F.
  double OrthogonalityViolation() const;
};

// One image's keypoints, split into the left (y) and right (y_dag) members of
// each symmetric pair. Occluded entries carry arbitrary coordinates.
struct KeypointImage {
  std::string id;
  Eigen::Matrix2Xd y;
  Eigen::Matrix2Xd y_dag;
  std::vector<bool> vis;
  std::vector<bool> vis_dag;

  int NumPairs() const { return static_cast<int>(y.cols()); }
  int NumVisible() const;
  // Throws kLengthMismatch if the four column counts disagree.
  void Validate() const;

  // Index into the concatenated [y, y_dag] columns.
  bool IsVisible(int column) const;
  Eigen::Vector2d Point(int column) const;
  // [y, y_dag] as a 2 x 2P matrix.
  Eigen::Matrix2Xd All() const;
};

struct EvalReport {
  double rotation_error = 0.0;
  double shape_error = 0.0;
  std::vector<double> per_image_rotation_error;
  std::vector<double> per_image_shape_error;
  bool aligned = false;
  // True when the estimate matched the groundtruth after the depth-reversal
  // (mirror) flip that orthographic projection cannot resolve.
  bool mirrored = false;
};

// Sum of the population standard deviations of the x, y and z coordinates.
double ShapeSpread(const Eigen::Matrix3Xd& points);

// 3 S / (sigma_x + sigma_y + sigma_z). Throws kDegenerateShape when the
// spread falls below 1e-12.
Eigen::Matrix3Xd NormalizeShape(const Eigen::Matrix3Xd& points);
Structure3D NormalizeShape(const Structure3D& shape);

// Rotation Q (det = +1) minimizing ||Q A - B||_F. When A B^T has rank < 2 a
// warning is logged, *rank_deficient is set, and a valid rotation is still
// returned.
Eigen::Matrix3d ProcrustesAlign(const Eigen::Matrix3Xd& a,
                                const Eigen::Matrix3Xd& b,
                                bool* rank_deficient = nullptr);

// Mean over poses of ||R_est Q^T - R_gt||_F.
double RotationError(const std::vector<CameraPose>& estimated,
                     const std::vector<CameraPose>& groundtruth,
                     const Eigen::Matrix3d& gauge);

// Mean per-point distance between normalize(Q * S_est) and normalize(S_gt),
// with both point sets centred on their centroid. The rotation is applied
// before normalising since per-axis spreads depend on the frame.
double ShapeError(const Eigen::Matrix3Xd& estimated,
                  const Eigen::Matrix3Xd& groundtruth,
                  const Eigen::Matrix3d& gauge);
double ShapeError(const Structure3D& estimated, const Structure3D& groundtruth,
                  const Eigen::Matrix3d& gauge);

// Gauge rotation fitted on centred, normalised shapes (estimate -> truth).
Eigen::Matrix3d FitGauge(const Eigen::Matrix3Xd& estimated,
                         const Eigen::Matrix3Xd& groundtruth,
                         bool* rank_deficient = nullptr);

// Subtracts the mean of all visible keypoints (y and y_dag jointly) from the
// visible keypoints. Occluded columns are left untouched.
std::pair<KeypointImage, Eigen::Vector2d> Centralize(const KeypointImage& image);

// Polar factor of a rank-2 matrix: the nearest matrix with orthonormal rows.
Matrix23d OrthonormalizeRows(const Matrix23d& m);

// Errors for a single structure shared by all cameras. One gauge rotation is
// fitted from the structures and applied to every camera. The estimate and its
// mirror image (R A, A S) are both scored, and the better one is reported.
EvalReport EvaluateJoint(const std::vector<CameraPose>& poses,
                         const Structure3D& shape,
                         const std::vector<CameraPose>& gt_poses,
                         const Structure3D& gt_shape);

// Errors when each image carries its own reconstructed structure; gauge and
// mirror choice are resolved per image.
EvalReport EvaluatePerImage(const std::vector<CameraPose>& poses,
                            const std::vector<Structure3D>& shapes,
                            const std::vector<CameraPose>& gt_poses,
                            const Structure3D& gt_shape);

}  // namespace symsfm

#endif  // SYMSFM_GEOMETRY_H_
