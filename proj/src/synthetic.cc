#include "symsfm/synthetic.h"

#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/Geometry>

#include "symsfm/errors.h"

namespace symsfm {
namespace {

constexpr double kDegeneracyMargin = 1e-3;
constexpr double kMinAxisSeparation = 0.3;

Eigen::Matrix3Xd DrawShape(const SceneConfig& config, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> x_dist(0.2, 1.0);
  std::uniform_real_distribution<double> yz_dist(-1.0, 1.0);

  Eigen::Matrix3Xd left(3, config.n_pairs);
  for (int p = 0; p < config.n_pairs; ++p) {
    left(0, p) = x_dist(rng);
    left(1, p) = yz_dist(rng);
    left(2, p) = yz_dist(rng);
  }
  if (config.manhattan) {
    // Pair 1 differs from pair 0 only in y, pair 2 only in z.
    left(0, 1) = left(0, 0);
    left(2, 1) = left(2, 0);
    while (std::abs(left(1, 1) - left(1, 0)) < kMinAxisSeparation) {
      left(1, 1) = yz_dist(rng);
    }
    left(0, 2) = left(0, 0);
    left(1, 2) = left(1, 0);
    while (std::abs(left(2, 2) - left(2, 0)) < kMinAxisSeparation) {
      left(2, 2) = yz_dist(rng);
    }
  }
  // The mirrored set has zero mean x already; centre y and z.
  const Eigen::Vector2d yz_mean = left.bottomRows<2>().rowwise().mean();
  left.bottomRows<2>().colwise() -= yz_mean;
  return left;
}

}  // namespace

void SceneConfig::Validate() const {
  auto fail = [](const std::string& message) {
    throw Error(ErrorCode::kConfigInvalid, message);
  };
  if (n_images < 1) fail("n_images must be positive");
  if (n_pairs < 3) fail("n_pairs must be at least 3");
  if (manhattan && n_pairs < 4) fail("Manhattan scenes need at least 4 pairs");
  if (!(noise_sigma >= 0.0)) fail("noise_sigma must be non-negative");
  if (!(occlusion_rate >= 0.0 && occlusion_rate < 1.0)) {
    fail("occlusion_rate must lie in [0, 1)");
  }
  if (!(translation_range >= 0.0)) fail("translation_range must be >= 0");
  if (2 * n_pairs < min_visible) {
    fail("too few keypoints to satisfy the visibility rule");
  }
}

Eigen::Matrix3d RandomRotation(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  const double theta = 2.0 * std::numbers::pi * uniform(rng);
  const double phi = 2.0 * std::numbers::pi * uniform(rng);
  const double z = uniform(rng);

  const Eigen::Matrix3d rz =
      Eigen::AngleAxisd(theta, Eigen::Vector3d::UnitZ()).toRotationMatrix();
  const Eigen::Vector3d v(std::cos(phi) * std::sqrt(z),
                          std::sin(phi) * std::sqrt(z), std::sqrt(1.0 - z));
  const Eigen::Matrix3d householder =
      Eigen::Matrix3d::Identity() - 2.0 * v * v.transpose();
  return -householder * rz;
}

double ShapeDiameter(const Eigen::Matrix3Xd& points) {
  double diameter = 0.0;
  for (int i = 0; i < points.cols(); ++i) {
    for (int j = i + 1; j < points.cols(); ++j) {
      diameter = std::max(diameter, (points.col(i) - points.col(j)).norm());
    }
  }
  return diameter;
}

Scene GenerateScene(const SceneConfig& config) {
  config.Validate();
  std::mt19937_64 rng(config.seed);

  Scene scene;
  scene.shape = Structure3D(DrawShape(config, rng));
  const Eigen::Matrix3Xd full = scene.shape.Full();
  scene.diameter = ShapeDiameter(full);
  const int num_pairs = config.n_pairs;
  if (config.manhattan) {
    ManhattanSpec spec;
    spec.axes = {{{0, num_pairs}, {0, 1}, {0, 2}}};
    scene.manhattan = spec;
  }

  std::uniform_real_distribution<double> translation_dist(
      -config.translation_range, config.translation_range);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::bernoulli_distribution occluded(config.occlusion_rate);
  const double noise_scale = config.noise_sigma * scene.diameter;

  for (int n = 0; n < config.n_images; ++n) {
    Eigen::Matrix3d rotation = RandomRotation(rng);
    while (config.manhattan &&
           rotation.row(2).cwiseAbs().minCoeff() < kDegeneracyMargin) {
      rotation = RandomRotation(rng);
    }
    CameraPose pose;
    pose.R = rotation.topRows<2>();
    pose.t = Eigen::Vector2d(translation_dist(rng), translation_dist(rng));

    Eigen::Matrix2Xd projection = pose.R * full;
    projection.colwise() += pose.t;

    KeypointImage image;
    image.id = "img" + std::to_string(n);
    Eigen::Matrix2Xd observed = projection;
    if (noise_scale > 0.0) {
      for (int c = 0; c < observed.cols(); ++c) {
        observed(0, c) += noise_scale * noise(rng);
        observed(1, c) += noise_scale * noise(rng);
      }
    }

    std::vector<bool> visible(2 * num_pairs, true);
    if (config.occlusion_rate > 0.0) {
      int count = 0;
      do {
        count = 0;
        for (int c = 0; c < 2 * num_pairs; ++c) {
          visible[c] = !occluded(rng);
          count += visible[c];
        }
      } while (count < config.min_visible);
    }

    image.y = observed.leftCols(num_pairs);
    image.y_dag = observed.rightCols(num_pairs);
    image.vis.assign(visible.begin(), visible.begin() + num_pairs);
    image.vis_dag.assign(visible.begin() + num_pairs, visible.end());
    for (int p = 0; p < num_pairs; ++p) {
      if (!image.vis[p]) image.y.col(p).setZero();
      if (!image.vis_dag[p]) image.y_dag.col(p).setZero();
    }

    scene.poses.push_back(pose);
    scene.images.push_back(std::move(image));
    scene.projections.push_back(std::move(projection));
  }
  return scene;
}

}  // namespace symsfm
