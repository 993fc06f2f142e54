#include "symsfm/single_image.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "symsfm/errors.h"

namespace symsfm {
namespace {

constexpr double kClampedSquare = 1e-8;
constexpr std::array<double, 4> kCandidateFrames = {0.0, 45.0, 90.0, 135.0};

void RequireFullyVisible(const KeypointImage& image) {
  for (int c = 0; c < 2 * image.NumPairs(); ++c) {
    if (!image.IsVisible(c)) {
      throw Error(ErrorCode::kOccludedKeypoints,
                  "single-image reconstruction needs every keypoint of image '" +
                      image.id + "' to be visible (column " +
                      std::to_string(c) + " is occluded)");
    }
  }
}

double BoundingBoxDiagonal(const KeypointImage& image) {
  Eigen::Vector2d lo = Eigen::Vector2d::Constant(
      std::numeric_limits<double>::infinity());
  Eigen::Vector2d hi = -lo;
  for (int c = 0; c < 2 * image.NumPairs(); ++c) {
    if (!image.IsVisible(c)) continue;
    lo = lo.cwiseMin(image.Point(c));
    hi = hi.cwiseMax(image.Point(c));
  }
  return (hi - lo).norm();
}

}  // namespace

void ManhattanSpec::Validate(int num_columns) const {
  for (const auto& [a, b] : axes) {
    if (a < 0 || b < 0 || a >= num_columns || b >= num_columns) {
      throw Error(ErrorCode::kConfigInvalid,
                  "Manhattan axis endpoint index out of range");
    }
    if (a == b) {
      throw Error(ErrorCode::kConfigInvalid,
                  "Manhattan axis endpoints must differ");
    }
  }
}

Eigen::Matrix2d FrameRotation(double degrees) {
  const double rad = degrees * std::numbers::pi / 180.0;
  Eigen::Matrix2d g;
  g << std::cos(rad), -std::sin(rad), std::sin(rad), std::cos(rad);
  return g;
}

SlopeTriple SlopesFromAxes(const KeypointImage& image,
                           const ManhattanSpec& spec,
                           const SingleImageOptions& options) {
  image.Validate();
  spec.Validate(2 * image.NumPairs());

  std::array<Eigen::Vector2d, 3> directions;
  const double min_length = options.axis_epsilon * BoundingBoxDiagonal(image);
  for (int k = 0; k < 3; ++k) {
    const auto [a, b] = spec.axes[k];
    if (!image.IsVisible(a) || !image.IsVisible(b)) {
      throw Error(ErrorCode::kOccludedKeypoints,
                  "Manhattan axis " + std::to_string(k) +
                      " has an occluded endpoint");
    }
    directions[k] = image.Point(a) - image.Point(b);
    if (!(directions[k].norm() > min_length)) {
      throw Error(ErrorCode::kAxisDegenerate,
                  "Manhattan axis " + std::to_string(k) +
                      " projects to a near-zero displacement");
    }
  }

  // Pick the first working frame in which no axis is close to vertical. Four
  // frames 45 degrees apart always leave one usable frame for three axes.
  double best_frame = kCandidateFrames.front();
  double best_cosine = -1.0;
  for (const double frame : kCandidateFrames) {
    const Eigen::Matrix2d g = FrameRotation(frame);
    double min_cosine = 1.0;
    for (const auto& d : directions) {
      min_cosine = std::min(min_cosine, std::abs((g * d)(0)) / d.norm());
    }
    if (min_cosine > best_cosine) {
      best_cosine = min_cosine;
      best_frame = frame;
    }
    if (min_cosine >= options.min_axis_cosine) {
      best_frame = frame;
      break;
    }
  }

  SlopeTriple slopes;
  slopes.frame_rotation_deg = best_frame;
  const Eigen::Matrix2d g = FrameRotation(best_frame);
  for (int k = 0; k < 3; ++k) {
    const Eigen::Vector2d d = g * directions[k];
    slopes.mu(k) = d(1) / d(0);
  }

  for (int i = 0; i < 3; ++i) {
    const int j = (i + 1) % 3;
    const double scale =
        std::max({1.0, std::abs(slopes.mu(i)), std::abs(slopes.mu(j))});
    if (std::abs(slopes.mu(i) - slopes.mu(j)) <=
        options.slope_tolerance * scale) {
      throw Error(ErrorCode::kSlopeCoincidence,
                  "projected Manhattan axes " + std::to_string(i) + " and " +
                      std::to_string(j) +
                      " are parallel; the viewing direction lies in the plane "
                      "of two axes");
    }
  }
  return slopes;
}

std::vector<Matrix23d> CameraFromSlopes(const SlopeTriple& slopes,
                                        const SingleImageOptions& options) {
  const Eigen::Vector3d& mu = slopes.mu;
  for (int i = 0; i < 3; ++i) {
    const int j = (i + 1) % 3;
    const double scale = std::max({1.0, std::abs(mu(i)), std::abs(mu(j))});
    if (std::abs(mu(i) - mu(j)) <= options.slope_tolerance * scale) {
      throw Error(ErrorCode::kSlopeCoincidence, "slopes are not distinct");
    }
  }

  Eigen::Matrix3d coefficients;
  coefficients.row(0).setOnes();
  coefficients.row(1) = mu.array().square().transpose();
  coefficients.row(2) = mu.transpose();
  const Eigen::Vector3d rhs(1.0, 1.0, 0.0);
  Eigen::Vector3d squares = coefficients.fullPivLu().solve(rhs);

  for (int k = 0; k < 3; ++k) {
    if (squares(k) < -kClampedSquare || !std::isfinite(squares(k))) {
      throw Error(ErrorCode::kNegativeSquare,
                  "solved r_1" + std::to_string(k + 1) +
                      "^2 = " + std::to_string(squares(k)) +
                      " is negative; slopes are inconsistent");
    }
    squares(k) = std::max(squares(k), 0.0);
  }

  Matrix23d working;
  working.row(0) = squares.cwiseSqrt().transpose();
  working.row(1) = mu.cwiseProduct(squares.cwiseSqrt()).transpose();
  const Matrix23d canonical =
      FrameRotation(slopes.frame_rotation_deg).transpose() * working;

  std::vector<Matrix23d> family;
  family.reserve(8);
  for (int mask = 0; mask < 8; ++mask) {
    const Eigen::Vector3d signs((mask & 1) ? -1.0 : 1.0,
                                (mask & 2) ? -1.0 : 1.0,
                                (mask & 4) ? -1.0 : 1.0);
    family.push_back(canonical * signs.asDiagonal());
  }
  return family;
}

Structure3D StructureFromSymmetry(const KeypointImage& image,
                                  const Matrix23d& rotation,
                                  const SingleImageOptions& options) {
  image.Validate();
  RequireFullyVisible(image);

  const double x_weight = rotation.col(0).squaredNorm();
  if (!(x_weight > 1e-12)) {
    throw Error(ErrorCode::kSymmetryAxisUnobservable,
                "the symmetry axis is parallel to the viewing direction");
  }
  const Eigen::Matrix2d yz_block = rotation.rightCols<2>();
  Eigen::JacobiSVD<Eigen::Matrix2d> svd(yz_block);
  const Eigen::Vector2d& sv = svd.singularValues();
  if (!(sv(1) > 0.0) || sv(0) / sv(1) >= options.max_yz_condition) {
    throw Error(ErrorCode::kYZSingular,
                "the (y, z) block of the camera is numerically singular");
  }

  const Eigen::Matrix2Xd half_diff = 0.5 * (image.y - image.y_dag);
  const Eigen::Matrix2Xd half_sum = 0.5 * (image.y + image.y_dag);
  const Eigen::PartialPivLU<Eigen::Matrix2d> yz_solver(yz_block);

  Eigen::Matrix3Xd left(3, image.NumPairs());
  left.row(0) = rotation.col(0).transpose() * half_diff / x_weight;
  left.bottomRows<2>() = yz_solver.solve(half_sum);
  return Structure3D(std::move(left));
}

SingleImageResult ReconstructSingle(const KeypointImage& image,
                                    const ManhattanSpec& spec,
                                    const SingleImageOptions& options) {
  image.Validate();
  RequireFullyVisible(image);
  auto [centered, translation] = Centralize(image);

  SingleImageResult result;
  result.slopes = SlopesFromAxes(centered, spec, options);
  for (const Matrix23d& rotation : CameraFromSlopes(result.slopes, options)) {
    CameraPose pose;
    pose.R = rotation;
    pose.t = translation;
    result.sign_family.push_back(pose);
    result.family_shapes.push_back(
        StructureFromSymmetry(centered, rotation, options));
  }
  result.pose = result.sign_family.front();
  result.shape = result.family_shapes.front();
  return result;
}

}  // namespace symsfm
