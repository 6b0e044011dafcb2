#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "inspect/kinematics.hpp"

#include "support.hpp"

using namespace inspect;
using namespace inspect::testing;

namespace {

KinematicChain single_z(double reach) {
  KinematicChain c;
  c.name = "single";
  c.joints.push_back(Joint{});
  c.tcp = Eigen::Translation3d(reach, 0, 0);
  return c;
}

double position_gap(const Eigen::Isometry3d& a, const Eigen::Matrix4d& b) {
  return (a.translation() - b.block<3, 1>(0, 3)).norm();
}

double rotation_gap(const Eigen::Isometry3d& a, const Eigen::Matrix4d& b) {
  return (a.rotation() - b.block<3, 3>(0, 0)).cwiseAbs().maxCoeff();
}

}  // namespace

TEST(Forward, ZeroStateIsBaseTimesOffsets) {
  const auto c = presets::kr16_like();
  const JointState q(c.dof(), 0.0);
  const auto pose = forward(c, q);
  // Offsets summed along x and z: 260 + 670 + 158 + 100 and 675 + 680 + 35.
  EXPECT_NEAR(pose.position.x(), 1188.0, 1e-9);
  EXPECT_NEAR(pose.position.y(), 0.0, 1e-9);
  EXPECT_NEAR(pose.position.z(), 1390.0, 1e-9);
  // The camera's -Z axis points along the flange x axis.
  EXPECT_NEAR((pose.orientation * Vec3(0, 0, -1) - Vec3::UnitX()).norm(), 0.0, 1e-12);
}

TEST(Forward, QuarterTurnAboutZ) {
  const auto c = single_z(100.0);
  const JointState q{std::numbers::pi / 2};
  const auto p = forward(c, q).position;
  EXPECT_NEAR(p.x(), 0.0, 1e-12);
  EXPECT_NEAR(p.y(), 100.0, 1e-12);
  EXPECT_NEAR(p.z(), 0.0, 1e-12);
}

TEST(Forward, PrismaticJointTranslatesAlongAxis) {
  KinematicChain c;
  Joint j;
  j.type = JointType::Prismatic;
  j.axis = Vec3::UnitY();
  j.lower = -500;
  j.upper = 500;
  c.joints.push_back(j);
  const JointState q{250.0};
  EXPECT_NEAR((forward(c, q).position - Vec3(0, 250, 0)).norm(), 0.0, 1e-12);
}

TEST(Forward, MatchesMatrixProductOracle) {
  Rng rng(90);
  for (int trial = 0; trial < 500; ++trial) {
    const auto c = random_chain(rng, static_cast<std::size_t>(uniform_int(rng, 1, 8)));
    const auto q = random_joints(rng, c);
    const auto t = forward_transform(c, q);
    const auto m = oracle_fk(c, q);
    EXPECT_LT(position_gap(t, m), 1e-9);
    EXPECT_LT(rotation_gap(t, m), 1e-9);
  }
  for (const auto& c : {presets::kr16_like(), presets::ur10_table_like()}) {
    for (int trial = 0; trial < 100; ++trial) {
      const auto q = random_joints(rng, c);
      const auto t = forward_transform(c, q);
      const auto m = oracle_fk(c, q);
      EXPECT_LT(position_gap(t, m), 1e-9);
      EXPECT_LT(rotation_gap(t, m), 1e-9);
    }
  }
}

TEST(Forward, LengthMismatchThrows) {
  const auto c = presets::kr16_like();
  EXPECT_THROW(forward(c, JointState(5, 0.0)), ArgumentError);
  EXPECT_THROW(forward_transform(c, JointState(7, 0.0)), ArgumentError);
}

TEST(Chain, Validation) {
  KinematicChain empty;
  EXPECT_THROW(empty.validate(), ValidationError);
  auto c = single_z(10.0);
  c.joints[0].lower = 1.0;
  c.joints[0].upper = 1.0;
  EXPECT_THROW(c.validate(), ValidationError);
  c = single_z(10.0);
  c.joints[0].axis = Vec3(1, 1, 0);
  EXPECT_THROW(c.validate(), ValidationError);
  EXPECT_NO_THROW(presets::kr16_like().validate());
  EXPECT_NO_THROW(presets::ur10_table_like().validate());
}

TEST(Chain, Presets) {
  EXPECT_EQ(presets::kr16_like().dof(), 6u);
  EXPECT_FALSE(presets::kr16_like().extra_axis);
  EXPECT_EQ(presets::ur10_table_like().dof(), 7u);
  EXPECT_TRUE(presets::ur10_table_like().extra_axis);
  EXPECT_TRUE(presets::by_name("kr16-like").has_value());
  EXPECT_TRUE(presets::by_name("ur10-table-like").has_value());
  EXPECT_FALSE(presets::by_name("scara").has_value());
}

TEST(Jacobian, MatchesAnalyticForSingleJoint) {
  const auto c = single_z(100.0);
  for (double q0 : {0.0, 0.3, 1.2, -2.5}) {
    const JointState q{q0};
    const auto jac = numerical_jacobian(c, q, 1e-5, 100.0);
    EXPECT_NEAR(jac(0, 0), -100.0 * std::sin(q0), 1e-5);
    EXPECT_NEAR(jac(1, 0), 100.0 * std::cos(q0), 1e-5);
    EXPECT_NEAR(jac(2, 0), 0.0, 1e-9);
    EXPECT_NEAR(jac(3, 0), 0.0, 1e-9);
    EXPECT_NEAR(jac(4, 0), 0.0, 1e-9);
    EXPECT_NEAR(jac(5, 0), 100.0, 1e-5);
  }
}

// The normal-equations form (J^T J + lambda^2 I)^-1 J^T e equals the library's
// J^T (J J^T + lambda^2 I)^-1 e.
TEST(DlsStep, MatchesNormalEquationsForm) {
  Rng rng(91);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = uniform_int(rng, 1, 9);
    Matrix6X jac = Matrix6X::Random(6, n) * uniform(rng, 0.1, 1000.0);
    if (trial % 3 == 0) jac.col(0) = jac.col(n - 1);  // rank deficient
    if (trial % 7 == 0) jac.setZero();
    Vector6 e = Vector6::Random() * 100.0;
    const double lambda = uniform(rng, 0.01, 2.0);
    const Eigen::VectorXd dq = dls_step(jac, e, lambda);
    ASSERT_TRUE(dq.allFinite());
    const Eigen::MatrixXd a = jac.transpose() * jac + lambda * lambda * Eigen::MatrixXd::Identity(n, n);
    const Eigen::VectorXd oracle = a.colPivHouseholderQr().solve(jac.transpose() * e);
    EXPECT_LT((dq - oracle).norm(), 1e-6 * (1.0 + oracle.norm()));
  }
}

TEST(Ik, FixedPointConvergesImmediately) {
  Rng rng(92);
  const auto c = presets::kr16_like();
  for (int trial = 0; trial < 20; ++trial) {
    const auto q = random_joints(rng, c);
    const auto r = solve_ik(c, forward(c, q), q);
    EXPECT_TRUE(r.success);
    EXPECT_EQ(r.iterations, 0);
    EXPECT_EQ(r.state, q);
  }
}

TEST(Ik, OutOfReachFailsWithFiniteState) {
  const auto c = presets::kr16_like();
  const JointState seed(c.dof(), 0.0);
  const ViewPose far{Vec3(10000, 0, 0), Quat::Identity()};
  const auto r = solve_ik(c, far, seed);
  EXPECT_FALSE(r.success);
  ASSERT_EQ(r.state.size(), c.dof());
  for (double v : r.state) EXPECT_TRUE(std::isfinite(v));
  EXPECT_TRUE(c.within_limits(r.state));
  EXPECT_GT(r.position_error, 1.0);
  EXPECT_TRUE(std::isfinite(r.position_error));
}

TEST(Ik, ReachableTargetsSucceedWithinLimits) {
  Rng rng(93);
  for (const auto& c : {presets::kr16_like(), presets::ur10_table_like()}) {
    int ok = 0;
    const int trials = 100;
    for (int trial = 0; trial < trials; ++trial) {
      const auto target = forward(c, random_joints(rng, c));
      const auto r = solve_ik(c, target, JointState(c.dof(), 0.0));
      if (!r.success) continue;
      ++ok;
      EXPECT_TRUE(c.within_limits(r.state));
      const auto reached = forward(c, r.state);
      EXPECT_LE((reached.position - target.position).norm(), 1.0 + 1e-9);
      EXPECT_LE(rotation_angle(reached.orientation, target.orientation), 0.01 + 1e-9);
    }
    EXPECT_GE(ok, 95) << c.name;
  }
}

TEST(Ik, ConvergesOnSingleJoint) {
  const auto c = single_z(100.0);
  const ViewPose target{Vec3(0, -100, 0), Quat(Eigen::AngleAxisd(-std::numbers::pi / 2, Vec3::UnitZ()))};
  const auto r = solve_ik(c, target, JointState{0.0}, IkOptions{.restarts = 0});
  ASSERT_TRUE(r.success);
  EXPECT_NEAR(r.state[0], -std::numbers::pi / 2, 0.01);
}

TEST(Ik, BadOptionsAndSeedThrow) {
  const auto c = presets::kr16_like();
  const JointState seed(c.dof(), 0.0);
  const auto target = forward(c, seed);
  EXPECT_THROW(solve_ik(c, target, seed, IkOptions{.damping = 0.0}), ArgumentError);
  EXPECT_THROW(solve_ik(c, target, seed, IkOptions{.damping = -1.0}), ArgumentError);
  EXPECT_THROW(solve_ik(c, target, JointState(3, 0.0)), ArgumentError);
}

TEST(Scrub, PicksNearestSample) {
  std::vector<JointState> traj;
  for (int i = 0; i <= 10; ++i) traj.push_back({static_cast<double>(i)});
  EXPECT_EQ(scrub(traj, 0.0)[0], 0.0);
  EXPECT_EQ(scrub(traj, 1.0)[0], 10.0);
  EXPECT_EQ(scrub(traj, 0.5)[0], 5.0);
  EXPECT_EQ(scrub(traj, 0.26)[0], 3.0);
  const std::vector<JointState> one{{7.0}};
  EXPECT_EQ(scrub(one, 0.7)[0], 7.0);
}

TEST(Scrub, Errors) {
  EXPECT_THROW(scrub(std::vector<JointState>{}, 0.5), ValidationError);
  const std::vector<JointState> traj{{1.0}, {2.0}};
  EXPECT_THROW(scrub(traj, -0.1), ArgumentError);
  EXPECT_THROW(scrub(traj, 1.5), ArgumentError);
  EXPECT_THROW(scrub(traj, std::nan("")), ArgumentError);
}
