#ifndef SYMSFM_SYNTHETIC_H_
#define SYMSFM_SYNTHETIC_H_

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include <Eigen/Core>

#include "symsfm/geometry.h"
#include "symsfm/single_image.h"

namespace symsfm {

struct SceneConfig {
  int n_images = 20;
  int n_pairs = 8;
  // Standard deviation of the keypoint noise as a fraction of the shape
  // diameter.
  double noise_sigma = 0.0;
  // Per-keypoint occlusion probability.
  double occlusion_rate = 0.0;
  uint64_t seed = 0;
  // Emit Manhattan axis endpoints and reject cameras close to the
  // single-image degeneracy.
  bool manhattan = false;
  // Image translations are drawn uniformly from [-translation_range,
  // translation_range]^2.
  double translation_range = 1.0;
  int min_visible = 5;

  // Throws kConfigInvalid.
  void Validate() const;
};

struct Scene {
  Structure3D shape;
  std::vector<CameraPose> poses;
  std::vector<KeypointImage> images;
  // Noise-free projections [R S, R A S] + t for every keypoint, visible or
  // not.
  std::vector<Eigen::Matrix2Xd> projections;
  std::optional<ManhattanSpec> manhattan;
  double diameter = 0.0;
};

// Uniformly distributed rotation (Arvo's subgroup construction).
Eigen::Matrix3d RandomRotation(std::mt19937_64& rng);

// Largest distance between any two points.
double ShapeDiameter(const Eigen::Matrix3Xd& points);

Scene GenerateScene(const SceneConfig& config);

}  // namespace symsfm

#endif  // SYMSFM_SYNTHETIC_H_
