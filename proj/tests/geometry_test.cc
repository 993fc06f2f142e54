#include "symsfm/geometry.h"

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "symsfm/errors.h"
#include "test_util.h"

namespace symsfm {
namespace {

using testing::AxisAngle;
using testing::QuaternionRotation;
using testing::RandomLeftHalf;

// Two pairs whose 2P points have unit population spread on every axis and
// zero centroid.
Eigen::Matrix3Xd UnitSpreadShape() {
  Eigen::Matrix3Xd left(3, 2);
  left << 1, 1, 1, -1, 1, -1;
  return Structure3D(left).Full();
}

CameraPose Pose(const Matrix23d& r) {
  CameraPose pose;
  pose.R = r;
  return pose;
}

TEST(Structure3DTest, FullHoldsMirrorPairs) {
  std::mt19937_64 rng(1);
  const Structure3D shape(RandomLeftHalf(rng, 5));
  const Eigen::Matrix3Xd full = shape.Full();
  for (int p = 0; p < 5; ++p) {
    EXPECT_EQ(full(0, 5 + p), -full(0, p));
    EXPECT_EQ(full(1, 5 + p), full(1, p));
    EXPECT_EQ(full(2, 5 + p), full(2, p));
  }
}

TEST(Structure3DTest, FromFullRejectsBrokenPair) {
  std::mt19937_64 rng(2);
  Eigen::Matrix3Xd full = Structure3D(RandomLeftHalf(rng, 4)).Full();
  EXPECT_NO_THROW(Structure3D::FromFull(full));
  full(1, 6) += 1e-3;
  try {
    Structure3D::FromFull(full);
    FAIL() << "expected kMirrorViolation";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMirrorViolation);
  }
}

TEST(CameraPoseTest, OrthogonalityViolation) {
  CameraPose pose;
  pose.R << 1, 0, 0, 0, 1, 0;
  EXPECT_EQ(pose.OrthogonalityViolation(), 0.0);
  pose.R(0, 0) = 2.0;
  // R R^T - I = diag(3, 0).
  EXPECT_NEAR(pose.OrthogonalityViolation(), 3.0, 1e-15);
}

TEST(NormalizeShapeTest, UnitSpreadIsUnchanged) {
  const Eigen::Matrix3Xd s = UnitSpreadShape();
  EXPECT_NEAR(ShapeSpread(s), 3.0, 1e-15);
  EXPECT_TRUE(NormalizeShape(s).isApprox(s, 1e-15));
}

TEST(NormalizeShapeTest, ScaleInvariant) {
  std::mt19937_64 rng(3);
  const Eigen::Matrix3Xd s = Structure3D(RandomLeftHalf(rng, 8)).Full();
  EXPECT_LT((NormalizeShape(5.0 * s) - NormalizeShape(s)).norm(), 1e-12);
}

TEST(NormalizeShapeTest, MatchesDirectFormula) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Matrix3Xd s = Structure3D(RandomLeftHalf(rng, 8)).Full();
    double spread = 0.0;
    for (int axis = 0; axis < 3; ++axis) {
      double mean = 0.0, sq = 0.0;
      for (int c = 0; c < s.cols(); ++c) mean += s(axis, c);
      mean /= s.cols();
      for (int c = 0; c < s.cols(); ++c) {
        sq += (s(axis, c) - mean) * (s(axis, c) - mean);
      }
      spread += std::sqrt(sq / s.cols());
    }
    const Eigen::Matrix3Xd expected = 3.0 * s / spread;
    const Eigen::Matrix3Xd normalized = NormalizeShape(s);
    EXPECT_LT((normalized - expected).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_NEAR(ShapeSpread(normalized), 3.0, 1e-10);
  }
}

TEST(NormalizeShapeTest, IdempotentAndMirrorPreserving) {
  std::mt19937_64 rng(5);
  const Structure3D shape(RandomLeftHalf(rng, 6));
  const Structure3D once = NormalizeShape(shape);
  const Structure3D twice = NormalizeShape(once);
  EXPECT_LT((once.Full() - twice.Full()).norm(), 1e-12);
  EXPECT_NO_THROW(Structure3D::FromFull(once.Full(), 0.0));
}

TEST(NormalizeShapeTest, DegenerateShape) {
  const Eigen::Matrix3Xd s = Eigen::Matrix3Xd::Constant(3, 6, 0.5);
  try {
    NormalizeShape(s);
    FAIL() << "expected kDegenerateShape";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDegenerateShape);
  }
}

TEST(ProcrustesTest, IdentityForEqualInputs) {
  std::mt19937_64 rng(6);
  const Eigen::Matrix3Xd a = testing::RandomMatrix(rng, 3, 10);
  EXPECT_LT((ProcrustesAlign(a, a) - Eigen::Matrix3d::Identity()).norm(),
            1e-12);
}

TEST(ProcrustesTest, RecoversKnownRotation) {
  std::mt19937_64 rng(7);
  const Eigen::Matrix3d r0 = AxisAngle(Eigen::Vector3d(1, 2, 3), 0.7);
  const Eigen::Matrix3Xd a = testing::RandomMatrix(rng, 3, 10);
  const Eigen::Matrix3d q = ProcrustesAlign(a, r0 * a);
  EXPECT_LT((q.transpose() * r0 - Eigen::Matrix3d::Identity()).norm(), 1e-10);
}

TEST(ProcrustesTest, PointReflectionStillProperRotation) {
  std::mt19937_64 rng(8);
  const Eigen::Matrix3Xd a = testing::RandomMatrix(rng, 3, 10);
  const Eigen::Matrix3d q = ProcrustesAlign(a, -a);
  EXPECT_NEAR(q.determinant(), 1.0, 1e-12);
  EXPECT_LT((q * q.transpose() - Eigen::Matrix3d::Identity()).norm(), 1e-12);
}

TEST(ProcrustesTest, RankDeficientFlagged) {
  Eigen::Matrix3Xd a(3, 4);
  a << 1, 2, 3, 4, 0, 0, 0, 0, 0, 0, 0, 0;
  bool rank_deficient = false;
  const Eigen::Matrix3d q = ProcrustesAlign(a, a, &rank_deficient);
  EXPECT_TRUE(rank_deficient);
  EXPECT_NEAR(q.determinant(), 1.0, 1e-12);
}

TEST(RotationErrorTest, ZeroForIdentical) {
  std::mt19937_64 rng(9);
  const Matrix23d r = QuaternionRotation(rng).topRows<2>();
  EXPECT_EQ(RotationError({Pose(r)}, {Pose(r)}, Eigen::Matrix3d::Identity()),
            0.0);
}

TEST(RotationErrorTest, HandComputedOffset) {
  Matrix23d gt;
  gt << 1, 0, 0, 0, 1, 0;
  const Matrix23d est = gt.array() + 0.1;
  // sqrt(6 * 0.1^2).
  EXPECT_NEAR(RotationError({Pose(est)}, {Pose(gt)},
                            Eigen::Matrix3d::Identity()),
              0.2449489742783178, 1e-12);
}

TEST(RotationErrorTest, GaugeActsOnTheRight) {
  std::mt19937_64 rng(10);
  const Eigen::Matrix3d q = QuaternionRotation(rng);
  const Matrix23d gt = QuaternionRotation(rng).topRows<2>();
  EXPECT_LT(RotationError({Pose(gt * q)}, {Pose(gt)}, q), 1e-12);
}

TEST(RotationErrorTest, LengthMismatch) {
  try {
    RotationError({Pose(Matrix23d::Zero())}, {}, Eigen::Matrix3d::Identity());
    FAIL() << "expected kLengthMismatch";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kLengthMismatch);
  }
}

TEST(ShapeErrorTest, ZeroForIdenticalAndScaled) {
  std::mt19937_64 rng(11);
  const Structure3D s(RandomLeftHalf(rng, 8));
  const Eigen::Matrix3d id = Eigen::Matrix3d::Identity();
  EXPECT_LT(ShapeError(s, s, id), 1e-14);
  EXPECT_LT(ShapeError(Structure3D(7.0 * s.Left()), s, id), 1e-12);
}

TEST(ShapeErrorTest, HandComputedMirrorSwap) {
  // A S permutes the four points of the unit-spread shape; each point lands
  // at distance 2 from its counterpart.
  const Eigen::Matrix3Xd gt = UnitSpreadShape();
  const Eigen::Matrix3Xd est = MirrorOperator() * gt;
  EXPECT_NEAR(ShapeError(est, gt, Eigen::Matrix3d::Identity()), 2.0, 1e-12);
}

TEST(ShapeErrorTest, HandComputedGauge) {
  const Eigen::Matrix3Xd gt = UnitSpreadShape();
  Eigen::Matrix3d rz;
  rz << 0, -1, 0, 1, 0, 0, 0, 0, 1;
  EXPECT_NEAR(ShapeError(rz.transpose() * gt, gt, rz), 0.0, 1e-12);
  EXPECT_NEAR(ShapeError(rz.transpose() * gt, gt, Eigen::Matrix3d::Identity()),
              // Points (1,1,1),(1,-1,-1),(-1,1,1),(-1,-1,-1) rotated by -90
              // degrees about z move by |(1,1,0) - (1,-1,0)| = 2 each.
              2.0, 1e-12);
}

TEST(ShapeErrorTest, LengthMismatch) {
  try {
    ShapeError(Eigen::Matrix3Xd::Ones(3, 4), Eigen::Matrix3Xd::Ones(3, 6),
               Eigen::Matrix3d::Identity());
    FAIL() << "expected kLengthMismatch";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kLengthMismatch);
  }
}

TEST(ShapeErrorProperty, GaugeUndoesRotation) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 200; ++trial) {
    const Eigen::Matrix3Xd s = Structure3D(RandomLeftHalf(rng, 8)).Full();
    const Eigen::Matrix3d q0 = QuaternionRotation(rng);
    const Eigen::Matrix3Xd rotated = q0 * s;
    const Eigen::Matrix3d gauge = FitGauge(s, rotated);
    EXPECT_LE(ShapeError(s, rotated, gauge), 1e-8) << "trial " << trial;
  }
}

TEST(ShapeErrorProperty, NonNegative) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::Matrix3Xd a = testing::RandomMatrix(rng, 3, 8);
    const Eigen::Matrix3Xd b = testing::RandomMatrix(rng, 3, 8);
    EXPECT_GE(ShapeError(a, b, QuaternionRotation(rng)), 0.0);
  }
}

TEST(CentralizeTest, ConstantImage) {
  KeypointImage image;
  image.y = Eigen::Matrix2Xd::Zero(2, 3);
  image.y.row(0).setConstant(3.0);
  image.y.row(1).setConstant(4.0);
  image.y_dag = image.y;
  image.vis.assign(3, true);
  image.vis_dag.assign(3, true);
  const auto [centered, t] = Centralize(image);
  EXPECT_EQ(t, Eigen::Vector2d(3, 4));
  EXPECT_EQ(centered.y.norm(), 0.0);
  EXPECT_EQ(centered.y_dag.norm(), 0.0);
}

TEST(CentralizeTest, AlreadyCentred) {
  KeypointImage image;
  image.y.resize(2, 2);
  image.y << 1, -1, 2, 0;
  image.y_dag.resize(2, 2);
  image.y_dag << 0.5, -0.5, -1, -1;
  image.vis.assign(2, true);
  image.vis_dag.assign(2, true);
  const auto [centered, t] = Centralize(image);
  EXPECT_EQ(t, Eigen::Vector2d::Zero());
  EXPECT_EQ(centered.y, image.y);
  EXPECT_EQ(centered.y_dag, image.y_dag);
}

TEST(CentralizeTest, MixedVisibilityMatchesOracle) {
  std::mt19937_64 rng(14);
  std::bernoulli_distribution visible(0.7);
  for (int trial = 0; trial < 50; ++trial) {
    KeypointImage image;
    image.y = testing::RandomMatrix(rng, 2, 6);
    image.y_dag = testing::RandomMatrix(rng, 2, 6);
    image.vis.assign(6, true);
    image.vis_dag.assign(6, true);
    for (int p = 0; p < 6; ++p) {
      image.vis[p] = visible(rng);
      image.vis_dag[p] = visible(rng);
    }
    image.vis[0] = true;
    const Eigen::Vector2d expected = testing::BruteVisibleMean(image);
    const auto [centered, t] = Centralize(image);
    EXPECT_LT((t - expected).norm(), 1e-12);
    EXPECT_LT(testing::BruteVisibleMean(centered).norm(), 1e-12);
    for (int p = 0; p < 6; ++p) {
      if (!image.vis[p]) EXPECT_EQ(centered.y.col(p), image.y.col(p));
      if (!image.vis_dag[p]) {
        EXPECT_EQ(centered.y_dag.col(p), image.y_dag.col(p));
      }
    }
  }
}

TEST(CentralizeTest, NoVisiblePoints) {
  KeypointImage image;
  image.y = Eigen::Matrix2Xd::Ones(2, 2);
  image.y_dag = Eigen::Matrix2Xd::Ones(2, 2);
  image.vis.assign(2, false);
  image.vis_dag.assign(2, false);
  try {
    Centralize(image);
    FAIL() << "expected kNoVisiblePoints";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNoVisiblePoints);
  }
}

TEST(OrthonormalizeRowsTest, OrthonormalUnchanged) {
  std::mt19937_64 rng(15);
  const Matrix23d r = QuaternionRotation(rng).topRows<2>();
  EXPECT_LT((OrthonormalizeRows(r) - r).norm(), 1e-12);
}

TEST(OrthonormalizeRowsTest, StripsRowScales) {
  std::mt19937_64 rng(16);
  const Matrix23d r = QuaternionRotation(rng).topRows<2>();
  Matrix23d m;
  m << 2.0 * r.row(0), 3.0 * r.row(1);
  EXPECT_LT((OrthonormalizeRows(m) - r).norm(), 1e-12);
}

TEST(OrthonormalizeRowsTest, NearestAmongRandomSamples) {
  std::mt19937_64 rng(17);
  const Matrix23d m = testing::RandomMatrix(rng, 2, 3);
  const Matrix23d o = OrthonormalizeRows(m);
  EXPECT_LT((o * o.transpose() - Eigen::Matrix2d::Identity()).norm(), 1e-12);
  const double best = (m - o).norm();
  for (int trial = 0; trial < 1000; ++trial) {
    const Matrix23d other = QuaternionRotation(rng).topRows<2>();
    EXPECT_LE(best, (m - other).norm() + 1e-12);
  }
}

TEST(OrthonormalizeRowsTest, RankDeficient) {
  Matrix23d m;
  m << 1, 2, 3, 2, 4, 6;
  try {
    OrthonormalizeRows(m);
    FAIL() << "expected kRankDeficient";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kRankDeficient);
  }
}

TEST(EvaluateTest, JointRecoversGaugeAndScale) {
  std::mt19937_64 rng(18);
  const Structure3D gt(RandomLeftHalf(rng, 8));
  // Rotations about the symmetry axis keep the estimate symmetric.
  const Eigen::Matrix3d q0 = AxisAngle(Eigen::Vector3d::UnitX(), 0.9);
  std::vector<CameraPose> gt_poses, poses;
  for (int n = 0; n < 5; ++n) {
    gt_poses.push_back(Pose(QuaternionRotation(rng).topRows<2>()));
    poses.push_back(Pose(gt_poses.back().R * q0));
  }
  // Estimate lives in the frame q0^T and at a different scale.
  const Structure3D est(2.5 * q0.transpose() * gt.Left());
  const EvalReport report = EvaluateJoint(poses, est, gt_poses, gt);
  EXPECT_LT(report.rotation_error, 1e-10);
  EXPECT_LT(report.shape_error, 1e-10);
  EXPECT_FALSE(report.mirrored);
  EXPECT_EQ(report.per_image_rotation_error.size(), 5u);
}

TEST(EvaluateTest, JointScoresDepthReversal) {
  std::mt19937_64 rng(19);
  const Structure3D gt(RandomLeftHalf(rng, 8));
  const Eigen::Matrix3d a = MirrorOperator();
  std::vector<CameraPose> gt_poses, poses;
  for (int n = 0; n < 4; ++n) {
    gt_poses.push_back(Pose(QuaternionRotation(rng).topRows<2>()));
    poses.push_back(Pose(gt_poses.back().R * a));
  }
  const EvalReport report =
      EvaluateJoint(poses, Structure3D(a * gt.Left()), gt_poses, gt);
  EXPECT_TRUE(report.mirrored);
  EXPECT_LT(report.rotation_error, 1e-10);
  EXPECT_LT(report.shape_error, 1e-10);
}

TEST(EvaluateTest, PerImageAverages) {
  std::mt19937_64 rng(20);
  const Structure3D gt(RandomLeftHalf(rng, 8));
  std::vector<CameraPose> gt_poses, poses;
  std::vector<Structure3D> shapes;
  for (int n = 0; n < 3; ++n) {
    const Eigen::Matrix3d q =
        AxisAngle(Eigen::Vector3d::UnitX(), 0.5 + n);
    gt_poses.push_back(Pose(QuaternionRotation(rng).topRows<2>()));
    poses.push_back(Pose(gt_poses.back().R * q));
    shapes.emplace_back(q.transpose() * gt.Left());
  }
  const EvalReport report = EvaluatePerImage(poses, shapes, gt_poses, gt);
  EXPECT_LT(report.rotation_error, 1e-10);
  EXPECT_LT(report.shape_error, 1e-10);
  EXPECT_EQ(report.per_image_shape_error.size(), 3u);
}

}  // namespace
}  // namespace symsfm
