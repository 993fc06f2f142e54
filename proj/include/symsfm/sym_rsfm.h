#ifndef SYMSFM_SYM_RSFM_H_
#define SYMSFM_SYM_RSFM_H_

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "symsfm/geometry.h"

namespace symsfm {

using BoolMatrix = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

// Keypoints of N images stacked row-wise: rows 2n and 2n + 1 hold image n.
// Occluded entries hold the current imputed estimate.
struct StackedObservations {
  Eigen::MatrixXd y;      // 2N x P
  Eigen::MatrixXd y_dag;  // 2N x P
  BoolMatrix vis;         // N x P
  BoolMatrix vis_dag;     // N x P
  // Per-image offset already removed from the data (original = stored + t).
  Eigen::Matrix2Xd translation;

  int NumImages() const { return static_cast<int>(vis.rows()); }
  int NumPairs() const { return static_cast<int>(vis.cols()); }
  bool AnyOccluded() const;
  // [y, y_dag] as a 2N x 2P matrix.
  Eigen::MatrixXd All() const;
  // Each image shifted so that its visible keypoints have zero mean; occluded
  // entries start at 0 (the visible centroid).
  static StackedObservations FromImages(const std::vector<KeypointImage>& images);
};

struct AmbiguityEstimate {
  double lambda = 1.0;
  Eigen::Matrix2d bbt = Eigen::Matrix2d::Identity();
  Eigen::Matrix2d b = Eigen::Matrix2d::Identity();
};

struct SolveState {
  std::vector<Matrix23d> rotations;
  Structure3D shape;
  StackedObservations observations;
  std::vector<double> energy_trace;
};

// Sum of squared reprojection residuals of every entry, visible or imputed:
// ||Y_n - R_n S||^2 + ||Y_dag_n - R_n A S||^2 over all images.
double FullEnergy(const std::vector<Matrix23d>& rotations,
                  const Structure3D& shape,
                  const StackedObservations& observations);
double FullEnergy(const SolveState& state);

// Rank-3 completion of the occluded entries of [Y, Y_dag], repeated
// `iterations` times. Visible entries are only ever shifted by centring.
// Keypoint columns occluded in more than 90% of the images are reported in
// *warnings.
StackedObservations InitMissing(const StackedObservations& observations,
                                int iterations = 10,
                                std::vector<std::string>* warnings = nullptr);

// L = (Y - Y_dag) / 2 and M = (Y + Y_dag) / 2.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> SurrogateDecompose(
    const StackedObservations& observations);

struct Factorization {
  Eigen::MatrixXd motion;  // rows x rank
  Eigen::MatrixXd shape;   // rank x cols
};

// Truncated SVD with sqrt(Sigma) absorbed into both factors.
Factorization FactorRank(const Eigen::MatrixXd& matrix, int rank);

// Solves the stacked orthogonality constraints for lambda^2 and B B^T.
AmbiguityEstimate ResolveAmbiguities(const Eigen::MatrixXd& motion_x,
                                     const Eigen::MatrixXd& motion_yz);

struct Initialization {
  std::vector<Matrix23d> rotations;
  Structure3D shape;
};

// R = Rhat * blkdiag(lambda, B), S = blkdiag(lambda, B)^-1 * Shat, with every
// camera projected back to orthonormal rows.
Initialization ComposeInitialization(const Eigen::MatrixXd& motion_x,
                                     const Eigen::MatrixXd& motion_yz,
                                     const Eigen::MatrixXd& shape_x,
                                     const Eigen::MatrixXd& shape_yz,
                                     const AmbiguityEstimate& ambiguity);

// Surrogate-energy initialisation: decompose, factor, resolve, compose.
Initialization InitializeFromSurrogate(const StackedObservations& observations);

// Least-squares structure for fixed cameras and imputed observations.
// Throws kSingularNormalMatrix when sum_n R_n^T R_n is rank deficient.
Structure3D UpdateStructure(const std::vector<Matrix23d>& rotations,
                            const StackedObservations& observations);

// Per-image camera update. Starts from the polar factor of the unconstrained
// least-squares camera, keeps `previous` if that is better, then refines with
// monotone majorize-minimize steps on the orthonormal-row manifold.
std::vector<Matrix23d> UpdateCameras(
    const Structure3D& shape, const StackedObservations& observations,
    const std::vector<Matrix23d>* previous = nullptr,
    int refinement_steps = 20);

// Sets each occluded entry to its reprojection.
SolveState UpdateMissing(SolveState state);

// Re-estimates each image's translation as the mean residual over all 2P
// points and subtracts it.
SolveState Recentralize(SolveState state);

struct SymRsfmOptions {
  int max_iterations = 500;
  // Stop once the relative energy decrease falls below this value.
  double tolerance = 1e-9;
  int init_iterations = 10;
  int min_visible = 5;
  int camera_refinement_steps = 20;
};

struct IterationRecord {
  int iteration = 0;
  double energy = 0.0;
  double max_orthogonality_violation = 0.0;
};

struct MultiImageResult {
  std::vector<std::string> image_ids;
  std::vector<std::string> dropped_images;
  // Poses map the shape to original image coordinates: Y = R S + t.
  std::vector<CameraPose> poses;
  Structure3D shape;
  // Observations with occluded entries filled, in original coordinates.
  StackedObservations filled;
  std::vector<double> energy_trace;
  std::vector<IterationRecord> trace;
  bool converged = false;
  int iterations = 0;
  std::vector<std::string> warnings;
};

MultiImageResult ReconstructMulti(
    const std::vector<KeypointImage>& images, const SymRsfmOptions& options = {},
    const std::function<void(const IterationRecord&)>& on_iteration = {});

}  // namespace symsfm

#endif  // SYMSFM_SYM_RSFM_H_
