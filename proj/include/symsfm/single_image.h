#ifndef SYMSFM_SINGLE_IMAGE_H_
#define SYMSFM_SINGLE_IMAGE_H_

#include <array>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "symsfm/geometry.h"

namespace symsfm {

// Three keypoint index pairs into the concatenated [y, y_dag] columns. The
// 3D endpoints of axis k differ only along object axis k (x is the symmetry
// direction).
struct ManhattanSpec {
  std::array<std::pair<int, int>, 3> axes{};

  // Throws kConfigInvalid for out-of-range or repeated endpoints.
  void Validate(int num_columns) const;
};

struct SingleImageOptions {
  // Axis displacement below axis_epsilon * (bounding-box diagonal) is
  // AxisDegenerate.
  double axis_epsilon = 1e-6;
  // Slopes closer than slope_tolerance * max(1, |mu_i|, |mu_j|) coincide.
  double slope_tolerance = 1e-9;
  // A working frame is acceptable when every projected axis keeps
  // |cos(angle to the image x-axis)| >= min_axis_cosine.
  double min_axis_cosine = 0.2;
  double max_yz_condition = 1e8;
};

struct SlopeTriple {
  // mu_k = r_2k / r_1k in the working frame.
  Eigen::Vector3d mu = Eigen::Vector3d::Zero();
  // Rotation of the image frame applied before taking slopes.
  double frame_rotation_deg = 0.0;
};

// 2D rotation by the given angle in degrees.
Eigen::Matrix2d FrameRotation(double degrees);

SlopeTriple SlopesFromAxes(const KeypointImage& image,
                           const ManhattanSpec& spec,
                           const SingleImageOptions& options = {});

// The eight column-sign variants R * diag(s1, s2, s3) consistent with the
// slopes, expressed in the original image frame. The first entry is the
// canonical pose with non-negative first-row entries in the working frame.
std::vector<Matrix23d> CameraFromSlopes(const SlopeTriple& slopes,
                                        const SingleImageOptions& options = {});

// Closed-form structure from a centred, fully visible image and a known
// camera. x_p comes from least squares over both rows of (Y - Y_dag) / 2,
// (y_p, z_p) from the 2x2 block of R applied to (Y + Y_dag) / 2.
Structure3D StructureFromSymmetry(const KeypointImage& image,
                                  const Matrix23d& rotation,
                                  const SingleImageOptions& options = {});

struct SingleImageResult {
  CameraPose pose;
  Structure3D shape;
  SlopeTriple slopes;
  std::vector<CameraPose> sign_family;
  std::vector<Structure3D> family_shapes;
};

SingleImageResult ReconstructSingle(const KeypointImage& image,
                                    const ManhattanSpec& spec,
                                    const SingleImageOptions& options = {});

}  // namespace symsfm

#endif  // SYMSFM_SINGLE_IMAGE_H_
