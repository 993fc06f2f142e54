#include "symsfm/sym_rsfm.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <glog/logging.h>

#include "symsfm/errors.h"

namespace symsfm {
namespace {

constexpr double kMaxNormalCondition = 1e12;
constexpr double kMinFactorRatio = 1e-10;
constexpr double kClampedSquare = 1e-8;
constexpr double kHeavilyOccluded = 0.9;

void CheckDimensions(const std::vector<Matrix23d>& rotations,
                     const StackedObservations& obs) {
  if (static_cast<int>(rotations.size()) != obs.NumImages() ||
      obs.y.rows() != 2 * obs.NumImages() ||
      obs.y_dag.rows() != 2 * obs.NumImages() ||
      obs.y.cols() != obs.NumPairs() || obs.y_dag.cols() != obs.NumPairs()) {
    throw Error(ErrorCode::kLengthMismatch,
                "camera count and observation dimensions disagree");
  }
}

// Shifts every image so that all 2P entries (visible and imputed) average to
// zero.
void CenterAllEntries(StackedObservations* obs) {
  const int num_pairs = obs->NumPairs();
  for (int n = 0; n < obs->NumImages(); ++n) {
    const Eigen::Vector2d mean =
        (obs->y.middleRows<2>(2 * n).rowwise().sum() +
         obs->y_dag.middleRows<2>(2 * n).rowwise().sum()) /
        (2.0 * num_pairs);
    obs->y.middleRows<2>(2 * n).colwise() -= mean;
    obs->y_dag.middleRows<2>(2 * n).colwise() -= mean;
    obs->translation.col(n) += mean;
  }
}

double ImageEnergy(const Matrix23d& rotation, const Eigen::Matrix3Xd& full,
                   const Eigen::Matrix2Xd& observed) {
  return (observed - rotation * full).squaredNorm();
}

Eigen::Matrix2Xd ImageObservations(const StackedObservations& obs, int n) {
  Eigen::Matrix2Xd observed(2, 2 * obs.NumPairs());
  observed << obs.y.middleRows<2>(2 * n), obs.y_dag.middleRows<2>(2 * n);
  return observed;
}

}  // namespace

bool StackedObservations::AnyOccluded() const {
  return !(vis.all() && vis_dag.all());
}

Eigen::MatrixXd StackedObservations::All() const {
  Eigen::MatrixXd all(y.rows(), 2 * y.cols());
  all << y, y_dag;
  return all;
}

StackedObservations StackedObservations::FromImages(
    const std::vector<KeypointImage>& images) {
  if (images.empty()) {
    throw Error(ErrorCode::kTooFewImages, "no images to stack");
  }
  const int num_images = static_cast<int>(images.size());
  const int num_pairs = images.front().NumPairs();

  StackedObservations obs;
  obs.y.setZero(2 * num_images, num_pairs);
  obs.y_dag.setZero(2 * num_images, num_pairs);
  obs.vis.setConstant(num_images, num_pairs, false);
  obs.vis_dag.setConstant(num_images, num_pairs, false);
  obs.translation.setZero(2, num_images);

  for (int n = 0; n < num_images; ++n) {
    const KeypointImage& image = images[n];
    image.Validate();
    if (image.NumPairs() != num_pairs) {
      throw Error(ErrorCode::kLengthMismatch,
                  "image '" + image.id + "' has a different pair count");
    }
    const auto [centered, mean] = Centralize(image);
    obs.translation.col(n) = mean;
    for (int p = 0; p < num_pairs; ++p) {
      obs.vis(n, p) = image.vis[p];
      obs.vis_dag(n, p) = image.vis_dag[p];
      if (image.vis[p]) obs.y.block<2, 1>(2 * n, p) = centered.y.col(p);
      if (image.vis_dag[p]) {
        obs.y_dag.block<2, 1>(2 * n, p) = centered.y_dag.col(p);
      }
    }
  }
  return obs;
}

double FullEnergy(const std::vector<Matrix23d>& rotations,
                  const Structure3D& shape,
                  const StackedObservations& observations) {
  CheckDimensions(rotations, observations);
  const Eigen::Matrix3Xd& left = shape.Left();
  const Eigen::Matrix3Xd right = shape.Right();
  double energy = 0.0;
  for (int n = 0; n < observations.NumImages(); ++n) {
    energy += (observations.y.middleRows<2>(2 * n) - rotations[n] * left)
                  .squaredNorm();
    energy += (observations.y_dag.middleRows<2>(2 * n) - rotations[n] * right)
                  .squaredNorm();
  }
  return energy;
}

double FullEnergy(const SolveState& state) {
  return FullEnergy(state.rotations, state.shape, state.observations);
}

StackedObservations InitMissing(const StackedObservations& observations,
                                int iterations,
                                std::vector<std::string>* warnings) {
  StackedObservations obs = observations;
  const int num_images = obs.NumImages();
  const int num_pairs = obs.NumPairs();

  for (int p = 0; p < num_pairs; ++p) {
    const double occluded_y =
        1.0 - static_cast<double>(obs.vis.col(p).count()) / num_images;
    const double occluded_dag =
        1.0 - static_cast<double>(obs.vis_dag.col(p).count()) / num_images;
    if (std::max(occluded_y, occluded_dag) > kHeavilyOccluded) {
      const std::string message =
          "InsufficientVisibility: keypoint pair " + std::to_string(p) +
          " is occluded in more than 90% of the images";
      LOG(WARNING) << message;
      if (warnings != nullptr) warnings->push_back(message);
    }
  }
  if (!obs.AnyOccluded()) return obs;

  // Rank-3 completion only holds when the translation is removed over all 2P
  // entries, so the loop centres with the current imputed values included.
  for (int t = 0; t < iterations; ++t) {
    CenterAllEntries(&obs);
    const Eigen::MatrixXd all = obs.All();
    Eigen::BDCSVD<Eigen::MatrixXd> svd(all,
                                       Eigen::ComputeThinU | Eigen::ComputeThinV);
    const int rank = std::min<int>(3, static_cast<int>(svd.singularValues().size()));
    const Eigen::MatrixXd low_rank =
        svd.matrixU().leftCols(rank) *
        svd.singularValues().head(rank).asDiagonal() *
        svd.matrixV().leftCols(rank).transpose();
    for (int n = 0; n < num_images; ++n) {
      for (int p = 0; p < num_pairs; ++p) {
        if (!obs.vis(n, p)) {
          obs.y.block<2, 1>(2 * n, p) = low_rank.block<2, 1>(2 * n, p);
        }
        if (!obs.vis_dag(n, p)) {
          obs.y_dag.block<2, 1>(2 * n, p) =
              low_rank.block<2, 1>(2 * n, num_pairs + p);
        }
      }
    }
  }
  CenterAllEntries(&obs);
  return obs;
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> SurrogateDecompose(
    const StackedObservations& observations) {
  return {0.5 * (observations.y - observations.y_dag),
          0.5 * (observations.y + observations.y_dag)};
}

Factorization FactorRank(const Eigen::MatrixXd& matrix, int rank) {
  if (rank < 1 || rank > std::min(matrix.rows(), matrix.cols())) {
    throw Error(ErrorCode::kConfigInvalid,
                "factorisation rank out of range: " + std::to_string(rank));
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(
      matrix, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& sv = svd.singularValues();
  if (!(sv(0) > 0.0) || !(sv(rank - 1) / sv(0) > kMinFactorRatio)) {
    throw Error(ErrorCode::kRankDeficient,
                "matrix has fewer than " + std::to_string(rank) +
                    " significant singular values");
  }
  const Eigen::VectorXd root = sv.head(rank).cwiseSqrt();
  Factorization f;
  f.motion = svd.matrixU().leftCols(rank) * root.asDiagonal();
  f.shape = root.asDiagonal() * svd.matrixV().leftCols(rank).transpose();
  return f;
}

AmbiguityEstimate ResolveAmbiguities(const Eigen::MatrixXd& motion_x,
                                     const Eigen::MatrixXd& motion_yz) {
  if (motion_x.cols() != 1 || motion_yz.cols() != 2 ||
      motion_x.rows() != motion_yz.rows() || motion_x.rows() % 2 != 0) {
    throw Error(ErrorCode::kLengthMismatch,
                "ambiguity solve expects 2N x 1 and 2N x 2 motion factors");
  }
  const int num_images = static_cast<int>(motion_x.rows() / 2);
  if (num_images < 2) {
    throw Error(ErrorCode::kTooFewImages,
                "resolving the ambiguities needs at least two images");
  }

  // Unknowns: [lambda^2, bb1, bb2, bb3] with B B^T = [bb1 bb2; bb2 bb3].
  Eigen::MatrixXd a(3 * num_images, 4);
  Eigen::VectorXd b(3 * num_images);
  for (int n = 0; n < num_images; ++n) {
    const double a1 = motion_x(2 * n, 0);
    const double a2 = motion_x(2 * n + 1, 0);
    const Eigen::RowVector2d b1 = motion_yz.row(2 * n);
    const Eigen::RowVector2d b2 = motion_yz.row(2 * n + 1);
    a.row(3 * n) << a1 * a1, b1(0) * b1(0), 2.0 * b1(0) * b1(1), b1(1) * b1(1);
    a.row(3 * n + 1) << a2 * a2, b2(0) * b2(0), 2.0 * b2(0) * b2(1),
        b2(1) * b2(1);
    a.row(3 * n + 2) << a1 * a2, b1(0) * b2(0), b1(0) * b2(1) + b1(1) * b2(0),
        b1(1) * b2(1);
    b.segment<3>(3 * n) << 1.0, 1.0, 0.0;
  }

  const Eigen::Matrix4d normal = a.transpose() * a;
  Eigen::JacobiSVD<Eigen::Matrix4d> normal_svd(normal);
  const Eigen::Vector4d& sv = normal_svd.singularValues();
  if (!(sv(3) > 0.0) || sv(0) / sv(3) > kMaxNormalCondition) {
    throw Error(ErrorCode::kIllConditioned,
                "orthogonality constraints do not determine the ambiguities");
  }
  const Eigen::Vector4d x = normal.ldlt().solve(a.transpose() * b);

  double lambda_sq = x(0);
  if (lambda_sq < 0.0 && lambda_sq >= -kClampedSquare) lambda_sq = 0.0;
  if (!(lambda_sq > 0.0)) {
    throw Error(ErrorCode::kDegenerateScale,
                "solved lambda^2 = " + std::to_string(x(0)) +
                    " leaves no extent along the symmetry direction");
  }

  AmbiguityEstimate estimate;
  estimate.lambda = std::sqrt(lambda_sq);
  estimate.bbt << x(1), x(2), x(2), x(3);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(estimate.bbt);
  const Eigen::Vector2d clamped = eig.eigenvalues().cwiseMax(0.0);
  estimate.bbt = eig.eigenvectors() * clamped.asDiagonal() *
                 eig.eigenvectors().transpose();
  estimate.b = eig.eigenvectors() * clamped.cwiseSqrt().asDiagonal() *
               eig.eigenvectors().transpose();
  return estimate;
}

Initialization ComposeInitialization(const Eigen::MatrixXd& motion_x,
                                     const Eigen::MatrixXd& motion_yz,
                                     const Eigen::MatrixXd& shape_x,
                                     const Eigen::MatrixXd& shape_yz,
                                     const AmbiguityEstimate& ambiguity) {
  Eigen::Matrix3d mixing = Eigen::Matrix3d::Zero();
  mixing(0, 0) = ambiguity.lambda;
  mixing.bottomRightCorner<2, 2>() = ambiguity.b;
  const Eigen::Vector2d b_sv = ambiguity.b.jacobiSvd().singularValues();
  const double largest = std::max(std::abs(ambiguity.lambda), b_sv(0));
  const double smallest = std::min(std::abs(ambiguity.lambda), b_sv(1));
  if (!(smallest > 1e-12 * largest)) {
    throw Error(ErrorCode::kSingularAmbiguity,
                "blkdiag(lambda, B) is not invertible");
  }

  Eigen::MatrixXd motion(motion_x.rows(), 3);
  motion << motion_x, motion_yz;
  Eigen::MatrixXd shape(3, shape_x.cols());
  shape << shape_x, shape_yz;

  const Eigen::MatrixXd rotations = motion * mixing;
  Initialization init;
  init.shape = Structure3D(mixing.partialPivLu().solve(shape));
  for (int n = 0; n < rotations.rows() / 2; ++n) {
    init.rotations.push_back(
        OrthonormalizeRows(rotations.middleRows<2>(2 * n)));
  }
  return init;
}

Initialization InitializeFromSurrogate(const StackedObservations& observations) {
  const auto [half_diff, half_sum] = SurrogateDecompose(observations);
  const Factorization x_factors = FactorRank(half_diff, 1);
  const Factorization yz_factors = FactorRank(half_sum, 2);
  const AmbiguityEstimate ambiguity =
      ResolveAmbiguities(x_factors.motion, yz_factors.motion);
  return ComposeInitialization(x_factors.motion, yz_factors.motion,
                               x_factors.shape, yz_factors.shape, ambiguity);
}

Structure3D UpdateStructure(const std::vector<Matrix23d>& rotations,
                            const StackedObservations& observations) {
  CheckDimensions(rotations, observations);
  const Eigen::Matrix3d mirror = MirrorOperator();

  Eigen::Matrix3d coverage = Eigen::Matrix3d::Zero();
  Eigen::Matrix3d normal = Eigen::Matrix3d::Zero();
  Eigen::Matrix3Xd rhs = Eigen::Matrix3Xd::Zero(3, observations.NumPairs());
  for (int n = 0; n < observations.NumImages(); ++n) {
    const Eigen::Matrix3d gram = rotations[n].transpose() * rotations[n];
    coverage += gram;
    normal += gram + mirror * gram * mirror;
    rhs += rotations[n].transpose() * observations.y.middleRows<2>(2 * n) +
           mirror * rotations[n].transpose() *
               observations.y_dag.middleRows<2>(2 * n);
  }

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(coverage);
  if (!(eig.eigenvalues()(0) >
        1e-10 * std::max(1.0, eig.eigenvalues()(2)))) {
    throw Error(ErrorCode::kSingularNormalMatrix,
                "all cameras share one viewing direction");
  }
  // Every pair shares the same 3x3 normal matrix.
  return Structure3D(normal.ldlt().solve(rhs));
}

std::vector<Matrix23d> UpdateCameras(const Structure3D& shape,
                                     const StackedObservations& observations,
                                     const std::vector<Matrix23d>* previous,
                                     int refinement_steps) {
  const Eigen::Matrix3Xd full = shape.Full();
  const Eigen::Matrix3d gram = full * full.transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(gram);
  if (!(eig.eigenvalues()(0) > 1e-20 * eig.eigenvalues()(2)) ||
      !(eig.eigenvalues()(2) > 0.0)) {
    throw Error(ErrorCode::kRankDeficient,
                "structure points do not span three dimensions");
  }
  if (previous != nullptr &&
      static_cast<int>(previous->size()) != observations.NumImages()) {
    throw Error(ErrorCode::kLengthMismatch, "previous camera count differs");
  }
  const double majorizer = eig.eigenvalues()(2);
  const Eigen::Matrix3d slack =
      majorizer * Eigen::Matrix3d::Identity() - gram;
  const Eigen::LDLT<Eigen::Matrix3d> gram_solver(gram);

  std::vector<Matrix23d> rotations(observations.NumImages());
  for (int n = 0; n < observations.NumImages(); ++n) {
    const Eigen::Matrix2Xd observed = ImageObservations(observations, n);
    const Matrix23d correlation = observed * full.transpose();

    Matrix23d best;
    double best_energy = std::numeric_limits<double>::infinity();
    try {
      const Matrix23d unconstrained =
          gram_solver.solve(correlation.transpose()).transpose();
      best = OrthonormalizeRows(unconstrained);
      best_energy = ImageEnergy(best, full, observed);
    } catch (const Error&) {
      if (previous == nullptr) throw;
    }
    if (previous != nullptr) {
      const double previous_energy =
          ImageEnergy((*previous)[n], full, observed);
      if (previous_energy <= best_energy) {
        best = (*previous)[n];
        best_energy = previous_energy;
      }
    }

    for (int step = 0; step < refinement_steps; ++step) {
      Matrix23d candidate;
      try {
        candidate = OrthonormalizeRows(correlation + best * slack);
      } catch (const Error&) {
        break;
      }
      const double energy = ImageEnergy(candidate, full, observed);
      if (!(energy <= best_energy)) break;
      const double decrease = best_energy - energy;
      best = candidate;
      best_energy = energy;
      if (decrease <= 1e-15 * std::max(best_energy, 1e-300)) break;
    }
    rotations[n] = best;
  }
  return rotations;
}

SolveState UpdateMissing(SolveState state) {
  StackedObservations& obs = state.observations;
  CheckDimensions(state.rotations, obs);
  const Eigen::Matrix3Xd& left = state.shape.Left();
  const Eigen::Matrix3Xd right = state.shape.Right();
  for (int n = 0; n < obs.NumImages(); ++n) {
    for (int p = 0; p < obs.NumPairs(); ++p) {
      if (!obs.vis(n, p)) {
        obs.y.block<2, 1>(2 * n, p) = state.rotations[n] * left.col(p);
      }
      if (!obs.vis_dag(n, p)) {
        obs.y_dag.block<2, 1>(2 * n, p) = state.rotations[n] * right.col(p);
      }
    }
  }
  return state;
}

SolveState Recentralize(SolveState state) {
  StackedObservations& obs = state.observations;
  CheckDimensions(state.rotations, obs);
  const Eigen::Matrix3Xd& left = state.shape.Left();
  const Eigen::Matrix3Xd right = state.shape.Right();
  const double num_points = 2.0 * obs.NumPairs();
  for (int n = 0; n < obs.NumImages(); ++n) {
    const Eigen::Vector2d offset =
        ((obs.y.middleRows<2>(2 * n) - state.rotations[n] * left)
             .rowwise()
             .sum() +
         (obs.y_dag.middleRows<2>(2 * n) - state.rotations[n] * right)
             .rowwise()
             .sum()) /
        num_points;
    obs.y.middleRows<2>(2 * n).colwise() -= offset;
    obs.y_dag.middleRows<2>(2 * n).colwise() -= offset;
    obs.translation.col(n) += offset;
  }
  return state;
}

MultiImageResult ReconstructMulti(
    const std::vector<KeypointImage>& images, const SymRsfmOptions& options,
    const std::function<void(const IterationRecord&)>& on_iteration) {
  MultiImageResult result;
  std::vector<KeypointImage> admitted;
  for (const KeypointImage& image : images) {
    image.Validate();
    if (image.NumVisible() < options.min_visible) {
      result.dropped_images.push_back(image.id);
      const std::string message = "image '" + image.id + "' has only " +
                                  std::to_string(image.NumVisible()) +
                                  " visible keypoints and was dropped";
      LOG(WARNING) << message;
      result.warnings.push_back(message);
      continue;
    }
    admitted.push_back(image);
    result.image_ids.push_back(image.id);
  }
  if (admitted.size() < 2) {
    throw Error(ErrorCode::kTooFewImages,
                "multi-image reconstruction needs at least two admitted images "
                "(got " + std::to_string(admitted.size()) +
                    "); use reconstruct-single for a single image with "
                    "Manhattan axes");
  }

  SolveState state;
  state.observations = InitMissing(StackedObservations::FromImages(admitted),
                                   options.init_iterations, &result.warnings);
  const Initialization init = InitializeFromSurrogate(state.observations);
  state.rotations = init.rotations;
  state.shape = init.shape;

  const double data_scale = state.observations.All().squaredNorm();
  auto record = [&](int iteration) {
    IterationRecord rec;
    rec.iteration = iteration;
    rec.energy = state.energy_trace.back();
    for (const Matrix23d& r : state.rotations) {
      rec.max_orthogonality_violation = std::max(
          rec.max_orthogonality_violation,
          (r * r.transpose() - Eigen::Matrix2d::Identity()).norm());
    }
    result.trace.push_back(rec);
    if (on_iteration) on_iteration(rec);
  };

  state.energy_trace.push_back(FullEnergy(state));
  record(0);

  for (int iteration = 1; iteration <= options.max_iterations; ++iteration) {
    state.shape = UpdateStructure(state.rotations, state.observations);
    state.rotations =
        UpdateCameras(state.shape, state.observations, &state.rotations,
                      options.camera_refinement_steps);
    state = Recentralize(UpdateMissing(std::move(state)));

    const double previous = state.energy_trace.back();
    state.energy_trace.push_back(FullEnergy(state));
    result.iterations = iteration;
    record(iteration);

    const double decrease = previous - state.energy_trace.back();
    const double reference = std::max(previous, 1e-12 * data_scale);
    if (decrease <= options.tolerance * reference) {
      result.converged = true;
      break;
    }
  }
  if (!result.converged) {
    const std::string message =
        "NonConvergence: energy still decreasing after " +
        std::to_string(options.max_iterations) + " iterations";
    LOG(WARNING) << message;
    result.warnings.push_back(message);
  }

  result.shape = state.shape;
  result.energy_trace = state.energy_trace;
  result.filled = state.observations;
  for (int n = 0; n < state.observations.NumImages(); ++n) {
    CameraPose pose;
    pose.R = state.rotations[n];
    pose.t = state.observations.translation.col(n);
    result.poses.push_back(pose);
    result.filled.y.middleRows<2>(2 * n).colwise() += pose.t;
    result.filled.y_dag.middleRows<2>(2 * n).colwise() += pose.t;
  }
  result.filled.translation.setZero();
  return result;
}

}  // namespace symsfm
