#include "spatial/error.hpp"
#include "spatial/geometry.hpp"
#include "spatial/renderer.hpp"
#include "support/test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

namespace spatial {
namespace {

using testing::max_abs_diff;
using testing::random_pose;
using testing::random_rotation;

Intrinsics test_intrinsics() {
  Intrinsics k;
  k.fx = k.fy = 200.0;
  k.cx = 128.0;
  k.cy = 96.0;
  k.width = 256;
  k.height = 192;
  return k;
}

TEST(BackProject, PrincipalPointMapsToOpticalAxis) {
  const Intrinsics k = test_intrinsics();
  const Vec3 p = back_project({k.cx, k.cy}, 2.0, k);
  EXPECT_EQ(p, Vec3(0.0, 0.0, 2.0));
}

TEST(BackProject, OneFocalLengthOffAxis) {
  const Intrinsics k = test_intrinsics();
  const Vec3 p = back_project({k.cx + k.fx, k.cy}, 1.0, [&] {
    Intrinsics wide = k;
    wide.width = 1000;
    return wide;
  }());
  EXPECT_DOUBLE_EQ(p.x(), 1.0);
  EXPECT_DOUBLE_EQ(p.y(), 0.0);
  EXPECT_DOUBLE_EQ(p.z(), 1.0);
}

TEST(BackProject, HandComputedExample) {
  // 3 * (100 - 128) / 200 = -0.42, 3 * (50 - 96) / 200 = -0.69.
  const Vec3 p = back_project({100.0, 50.0}, 3.0, test_intrinsics());
  EXPECT_NEAR(p.x(), -0.42, 1e-12);
  EXPECT_NEAR(p.y(), -0.69, 1e-12);
  EXPECT_DOUBLE_EQ(p.z(), 3.0);
}

TEST(BackProject, RejectsBadDepth) {
  const Intrinsics k = test_intrinsics();
  for (double d : {0.0, -1.0, std::nan(""), std::numeric_limits<double>::infinity()}) {
    try {
      back_project({10, 10}, d, k);
      FAIL() << "depth " << d << " accepted";
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::invalid_depth);
    }
  }
}

TEST(BackProject, RejectsPixelOutsideImage) {
  const Intrinsics k = test_intrinsics();
  EXPECT_THROW(back_project({-5.0, 10.0}, 1.0, k), Error);
  EXPECT_THROW(back_project({10.0, 400.0}, 1.0, k), Error);
}

TEST(Intrinsics, ValidatesInvariants) {
  Intrinsics k = test_intrinsics();
  EXPECT_NO_THROW(k.validate());
  k.fx = 0.0;
  EXPECT_THROW(k.validate(), Error);
  k = test_intrinsics();
  k.cx = 256.0;
  EXPECT_THROW(k.validate(), Error);
}

TEST(Intrinsics, MatrixRoundTrip) {
  const Intrinsics k = test_intrinsics();
  EXPECT_EQ(Intrinsics::from_matrix(k.matrix(), k.width, k.height), k);
  Mat3 skewed = k.matrix();
  skewed(0, 1) = 0.5;
  EXPECT_THROW(Intrinsics::from_matrix(skewed, k.width, k.height), Error);
}

TEST(ExtrinsicPose, RejectsNonRotation) {
  Mat3 r = Mat3::Identity();
  r(0, 0) = -1.0;  // reflection, det = -1
  EXPECT_THROW(ExtrinsicPose(r, Vec3::Zero()), Error);
  r = Mat3::Identity() * 1.01;
  EXPECT_THROW(ExtrinsicPose(r, Vec3::Zero()), Error);
}

TEST(ExtrinsicPose, RowMajorRoundTrip) {
  std::mt19937_64 rng(7);
  const ExtrinsicPose pose = random_pose(rng);
  const auto values = pose.to_row_major();
  EXPECT_EQ(values[3], pose.translation().x());
  EXPECT_EQ(values[4], pose.rotation()(1, 0));
  EXPECT_EQ(ExtrinsicPose::from_row_major(values), pose);
}

TEST(CamToWorld, IdentityAndOrigin) {
  const Vec3 p(0.3, -1.2, 4.0);
  EXPECT_EQ(cam_to_world(p, ExtrinsicPose()), p);
  const ExtrinsicPose shifted(Mat3::Identity(), Vec3(1, 2, 3));
  EXPECT_EQ(cam_to_world(Vec3::Zero(), shifted), Vec3(-1, -2, -3));
}

TEST(CamToWorld, InvertsForwardMap) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 200; ++i) {
    const ExtrinsicPose pose = random_pose(rng);
    const Vec3 world = testing::random_vec(rng, 10.0);
    EXPECT_LT((cam_to_world(pose.apply(world), pose) - world).norm(), 1e-9);
  }
}

TEST(CameraCenter, ClosedForms) {
  EXPECT_EQ(camera_center(ExtrinsicPose()), Vec3::Zero());
  EXPECT_EQ(camera_center(ExtrinsicPose(Mat3::Identity(), Vec3(1, 2, 3))), Vec3(-1, -2, -3));
}

TEST(CameraCenter, MapsToCameraOrigin) {
  std::mt19937_64 rng(13);
  for (int i = 0; i < 200; ++i) {
    const ExtrinsicPose pose = random_pose(rng);
    EXPECT_LT(pose.apply(camera_center(pose)).norm(), 1e-9);
  }
}

TEST(EgocentricDisplacement, BasicCases) {
  std::mt19937_64 rng(17);
  const ExtrinsicPose p = random_pose(rng);
  EXPECT_LT(egocentric_displacement(p, p).norm(), 1e-12);
  const ExtrinsicPose a;
  const ExtrinsicPose b = ExtrinsicPose::from_center(Mat3::Identity(), Vec3(0, 0, 1));
  EXPECT_LT((egocentric_displacement(a, b) - Vec3(0, 0, 1)).norm(), 1e-12);
}

TEST(EgocentricDisplacement, PreservesNorm) {
  std::mt19937_64 rng(19);
  for (int i = 0; i < 500; ++i) {
    const ExtrinsicPose a = random_pose(rng), b = random_pose(rng);
    const double expected = (camera_center(b) - camera_center(a)).norm();
    EXPECT_NEAR(egocentric_displacement(a, b).norm(), expected, 1e-9);
  }
}

TEST(YawAngle, CardinalValues) {
  EXPECT_DOUBLE_EQ(*yaw_angle(Vec3(0, 5, 1)), 0.0);
  EXPECT_DOUBLE_EQ(*yaw_angle(Vec3(1, -3, 0)), 90.0);
  EXPECT_DOUBLE_EQ(*yaw_angle(Vec3(1, 0, 1)), 45.0);
  EXPECT_DOUBLE_EQ(*yaw_angle(Vec3(0, 0, -1)), 180.0);
  EXPECT_DOUBLE_EQ(*yaw_angle(Vec3(-1, 0, 0)), -90.0);
}

TEST(YawAngle, NegligibleHorizontalMotion) {
  EXPECT_FALSE(yaw_angle(Vec3(0, 0, 0)).has_value());
  EXPECT_FALSE(yaw_angle(Vec3(1e-7, 2.0, -1e-7)).has_value());
}

TEST(YawAngle, NegativeZeroXStaysInRange) {
  // atan2(-0, -1) = -180, outside (-180, 180].
  EXPECT_DOUBLE_EQ(*yaw_angle(Vec3(-0.0, 0, -1)), 180.0);
}

TEST(DiscretizeMotion, SectorCentres) {
  const MotionLabel expected[] = {MotionLabel::forward,       MotionLabel::forward_right, MotionLabel::right,
                                  MotionLabel::backward_right, MotionLabel::backward,     MotionLabel::backward_left,
                                  MotionLabel::left,          MotionLabel::forward_left};
  for (int k = 0; k < 8; ++k) {
    double centre = 45.0 * k;
    if (centre > 180.0) centre -= 360.0;
    EXPECT_EQ(discretize_motion(centre), expected[k]) << centre;
  }
}

TEST(DiscretizeMotion, BoundariesAreClosedBelow) {
  EXPECT_EQ(discretize_motion(-22.5), MotionLabel::forward);
  EXPECT_EQ(discretize_motion(std::nextafter(-22.5, -180.0)), MotionLabel::forward_left);
  EXPECT_EQ(discretize_motion(22.5), MotionLabel::forward_right);
  EXPECT_EQ(discretize_motion(std::nextafter(22.5, 0.0)), MotionLabel::forward);
  EXPECT_EQ(discretize_motion(157.5), MotionLabel::backward);
  EXPECT_EQ(discretize_motion(180.0), MotionLabel::backward);
  EXPECT_EQ(discretize_motion(std::nextafter(-180.0, 0.0)), MotionLabel::backward);
  EXPECT_EQ(discretize_motion(-157.5), MotionLabel::backward_left);
  EXPECT_EQ(discretize_motion(-67.5), MotionLabel::forward_left);
  EXPECT_EQ(discretize_motion(std::nextafter(-67.5, -180.0)), MotionLabel::left);
  EXPECT_EQ(discretize_motion(67.5), MotionLabel::right);
}

TEST(DiscretizeMotion, EachLabelCoversFortyFiveDegrees) {
  // Sample on a fine grid of (-180, 180]; every label must own 1/8 of it.
  constexpr int kSamples = 360 * 64;
  std::array<int, 9> counts{};
  for (int i = 1; i <= kSamples; ++i) {
    const double theta = -180.0 + 360.0 * i / kSamples;
    ++counts[static_cast<std::size_t>(discretize_motion(theta))];
  }
  for (int k = 0; k < 8; ++k) EXPECT_EQ(counts[static_cast<std::size_t>(k)], kSamples / 8) << k;
  EXPECT_EQ(counts[8], 0);
}

TEST(DescribeCameraMotion, IdenticalPosesAreNegligible) {
  const ExtrinsicPose poses[] = {ExtrinsicPose(), ExtrinsicPose()};
  EXPECT_EQ(describe_camera_motion(poses), "From view 1 to view 2: negligible motion");
}

TEST(DescribeCameraMotion, ForwardStepAndLineCount) {
  const ExtrinsicPose poses[] = {
      ExtrinsicPose(),
      ExtrinsicPose::from_center(Mat3::Identity(), Vec3(0, 0, 0.5)),
      ExtrinsicPose::from_center(Mat3::Identity(), Vec3(0.5, 0, 0.5)),
  };
  EXPECT_EQ(describe_camera_motion(poses),
            "From view 1 to view 2: moved forward (distance 0.500)\n"
            "From view 2 to view 3: moved right (distance 0.500)");
}

TEST(DescribeCameraMotion, MetricUnitsAndVerticalSuffix) {
  const ExtrinsicPose poses[] = {
      ExtrinsicPose(),
      ExtrinsicPose::from_center(Mat3::Identity(), Vec3(0, -1.0, 1.0)),
  };
  EXPECT_EQ(describe_camera_motion(poses, SceneUnits::metric_meters),
            "From view 1 to view 2: moved forward (distance 1.414 meters) while moving up");
}

TEST(DescribeCameraMotion, LabelsFollowTheFirstCamera) {
  // Camera 1 faces +x; moving along world +x is forward for it.
  const ExtrinsicPose a = ExtrinsicPose::from_center(yaw_rotation(90.0), Vec3::Zero());
  const ExtrinsicPose b = ExtrinsicPose::from_center(yaw_rotation(90.0), Vec3(1.0, 0, 0));
  const ExtrinsicPose poses[] = {a, b};
  EXPECT_EQ(describe_camera_motion(poses), "From view 1 to view 2: moved forward (distance 1.000)");
}

TEST(DescribeCameraMotion, NeedsTwoViews) {
  const ExtrinsicPose one[] = {ExtrinsicPose()};
  try {
    describe_camera_motion(one);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::insufficient_views);
  }
}

TEST(RotateYaw, ZeroAndFullTurnAreIdentity) {
  std::mt19937_64 rng(23);
  const ExtrinsicPose pose = random_pose(rng);
  EXPECT_LT(max_abs_diff(rotate_yaw_in_place(pose, 0.0), pose), 1e-12);
  EXPECT_LT(max_abs_diff(rotate_yaw_in_place(pose, 360.0), pose), 1e-9);
}

TEST(RotateYaw, FourQuarterTurnsAreIdentity) {
  std::mt19937_64 rng(29);
  for (int i = 0; i < 100; ++i) {
    const ExtrinsicPose pose = random_pose(rng);
    ExtrinsicPose p = pose;
    for (int k = 0; k < 4; ++k) p = rotate_yaw_in_place(p, 90.0);
    EXPECT_LT(max_abs_diff(p, pose), 1e-9);
  }
}

TEST(RotateYaw, KeepsCentreAndComposesAdditively) {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> angle(-400.0, 400.0);
  for (int i = 0; i < 300; ++i) {
    const ExtrinsicPose pose = random_pose(rng);
    const double a = angle(rng), b = angle(rng);
    const ExtrinsicPose ab = rotate_yaw_in_place(rotate_yaw_in_place(pose, b), a);
    EXPECT_LT(max_abs_diff(ab, rotate_yaw_in_place(pose, a + b)), 1e-9);
    EXPECT_LT((camera_center(ab) - camera_center(pose)).norm(), 1e-9);
    EXPECT_TRUE(is_rotation(ab.rotation(), 1e-9));
  }
}

TEST(RotateYaw, PositiveAngleTurnsTowardCameraRight) {
  // Upright camera facing +z: its right is world +x.
  const ExtrinsicPose turned = rotate_right(ExtrinsicPose(), 90.0);
  EXPECT_LT((view_direction(turned) - Vec3(1, 0, 0)).norm(), 1e-12);
  EXPECT_LT((view_direction(rotate_left(ExtrinsicPose(), 90.0)) - Vec3(-1, 0, 0)).norm(), 1e-12);
}

TEST(PoseOps, DefaultsFollowDocumentedSteps) {
  EXPECT_DOUBLE_EQ(kDefaultRotationDeg, 45.0);
  EXPECT_DOUBLE_EQ(kDefaultMoveStep, 0.3);
  const ExtrinsicPose r = rotate_right(ExtrinsicPose());
  EXPECT_LT((view_direction(r) - Vec3(std::sqrt(0.5), 0, std::sqrt(0.5))).norm(), 1e-12);
  EXPECT_LT(camera_center(r).norm(), 1e-12);
  EXPECT_LT((camera_center(move_forward(ExtrinsicPose())) - Vec3(0, 0, 0.3)).norm(), 1e-12);
}

TEST(PoseOps, InversePairs) {
  std::mt19937_64 rng(37);
  for (int i = 0; i < 200; ++i) {
    const ExtrinsicPose pose = random_pose(rng);
    EXPECT_LT(max_abs_diff(rotate_left(rotate_right(pose)), pose), 1e-9);
    EXPECT_LT(max_abs_diff(move_backward(move_forward(pose, 0.7), 0.7), pose), 1e-9);
    EXPECT_LT(max_abs_diff(turn_around(turn_around(pose)), pose), 1e-9);
    EXPECT_LT(max_abs_diff(move_forward(pose, 0.0), pose), 1e-12);
  }
}

TEST(PoseOps, MoveKeepsRotationAndFollowsViewDirection) {
  std::mt19937_64 rng(41);
  const ExtrinsicPose pose = random_pose(rng);
  const ExtrinsicPose moved = move_forward(pose, 2.0);
  EXPECT_EQ(moved.rotation(), pose.rotation());
  EXPECT_LT((camera_center(moved) - camera_center(pose) - 2.0 * view_direction(pose)).norm(), 1e-9);
  EXPECT_THROW(move_forward(pose, -1.0), Error);
}

TEST(PoseOps, TurnAroundNegatesHorizontalForward) {
  std::mt19937_64 rng(43);
  for (int i = 0; i < 50; ++i) {
    const ExtrinsicPose pose = random_pose(rng);
    const Vec3 f = view_direction(pose), g = view_direction(turn_around(pose));
    EXPECT_NEAR(g.x(), -f.x(), 1e-9);
    EXPECT_NEAR(g.z(), -f.z(), 1e-9);
    EXPECT_NEAR(g.y(), f.y(), 1e-9);
    EXPECT_LT((camera_center(turn_around(pose)) - camera_center(pose)).norm(), 1e-9);
  }
}

TEST(RoundTrip, ProjectRecoversPixelAndDepth) {
  std::mt19937_64 rng(47);
  const Intrinsics k = test_intrinsics();
  std::uniform_real_distribution<double> u(0.0, k.width - 1.0), v(0.0, k.height - 1.0), d(0.05, 50.0);
  for (int i = 0; i < 1000; ++i) {
    const ExtrinsicPose pose = random_pose(rng);
    const double pu = u(rng), pv = v(rng), depth = d(rng);
    const Vec3 world = cam_to_world(back_project({pu, pv}, depth, k), pose);
    const auto p = project_point(world, pose, k);
    ASSERT_TRUE(p.has_value());
    EXPECT_NEAR(p->u, pu, 1e-6 * std::max(1.0, pu));
    EXPECT_NEAR(p->v, pv, 1e-6 * std::max(1.0, pv));
    EXPECT_NEAR(p->z, depth, 1e-6 * depth);
  }
}

}  // namespace
}  // namespace spatial
