#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <numeric>
#include <sstream>

#include "inspect/evaluator.hpp"
#include "inspect/scene.hpp"

#include "support.hpp"

using namespace inspect;
using namespace inspect::testing;

namespace {

RecordedPath straight_line(std::size_t samples, double length, const Quat& q = Quat::Identity()) {
  RecordedPath path;
  for (std::size_t i = 0; i < samples; ++i) {
    const double s = length * static_cast<double>(i) / static_cast<double>(samples - 1);
    path.samples.push_back({ViewPose{Vec3(s, 0, 0), q}, static_cast<double>(i), {}});
  }
  return path;
}

RecordedPath traversal(const Scene& scene, const PlanSolution& sol) {
  RecordedPath path;
  for (std::size_t i = 0; i < sol.order.size(); ++i) {
    path.samples.push_back({scene.graph.poses()[sol.order[i]], static_cast<double>(i), {}});
  }
  return path;
}

class PanelScene : public ::testing::Test {
 protected:
  static void SetUpTestSuite() { scene_ = std::make_unique<Scene>(generate_scene("panel")); }
  static void TearDownTestSuite() { scene_.reset(); }
  static std::unique_ptr<Scene> scene_;
};

std::unique_ptr<Scene> PanelScene::scene_;

}  // namespace

TEST(Resample, TwoPosesAtSpacingAreKept) {
  const auto path = straight_line(2, 100.0);
  const auto out = resample_path(path, 100.0);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out.samples[1].pose.position, path.samples[1].pose.position);
  EXPECT_EQ(resample_path(path, 100.0, 200.0).size(), 2u);
}

TEST(Resample, DenseLineBecomesElevenPoses) {
  const auto out = resample_path(straight_line(1000, 500.0), 50.0);
  EXPECT_EQ(out.size(), 11u);
  EXPECT_EQ(out.samples.front().pose.position.x(), 0.0);
  EXPECT_EQ(out.samples.back().pose.position.x(), 500.0);
}

TEST(Resample, TurningInPlaceCountsWithLever) {
  RecordedPath spin;
  for (int i = 0; i <= 90; ++i) {
    const Quat q(Eigen::AngleAxisd(i * std::numbers::pi / 180.0, Vec3::UnitZ()));
    spin.samples.push_back({ViewPose{Vec3::Zero(), q}, static_cast<double>(i), {}});
  }
  EXPECT_EQ(resample_path(spin, 50.0, 0.0).size(), 2u);
  // 200 mm lever sweeps about 3.5 mm per degree, so every 15th sample is kept.
  EXPECT_EQ(resample_path(spin, 50.0, 200.0).size(), 7u);
}

TEST(Resample, CostNeverGrowsBeyondTwoSpacings) {
  Rng rng(80);
  const CostModel cost{};
  for (int trial = 0; trial < 200; ++trial) {
    RecordedPath path;
    ViewPose p = random_pose(rng, 200.0);
    const auto n = uniform_int(rng, 1, 300);
    for (int i = 0; i < n; ++i) {
      path.samples.push_back({p, static_cast<double>(i), {}});
      p.position += random_unit(rng) * uniform(rng, 0.0, 20.0);
      p.orientation = (p.orientation * Quat(Eigen::AngleAxisd(uniform(rng, -0.05, 0.05), random_unit(rng)))).normalized();
    }
    const double spacing = uniform(rng, 5.0, 120.0);
    const double lever = trial % 2 ? 200.0 : 0.0;
    const auto out = resample_path(path, spacing, lever);
    EXPECT_LE(recorded_path_cost(out, cost), recorded_path_cost(path, cost) + 2.0 * spacing + 1e-9);
    EXPECT_EQ(out.samples.front().pose.position, path.samples.front().pose.position);
    EXPECT_EQ(out.samples.back().pose.position, path.samples.back().pose.position);
  }
}

TEST(Resample, Errors) {
  EXPECT_THROW(resample_path(straight_line(3, 10.0), 0.0), ArgumentError);
  EXPECT_THROW(resample_path(straight_line(3, 10.0), 5.0, -1.0), ArgumentError);
  EXPECT_TRUE(resample_path(RecordedPath{}, 5.0).empty());
}

TEST(RecordedPathTest, Validation) {
  EXPECT_THROW(RecordedPath{}.validate(), ValidationError);
  auto path = straight_line(3, 10.0);
  path.samples[2].time = 0.5;
  EXPECT_THROW(path.validate(), ValidationError);
  path = straight_line(3, 10.0);
  path.samples[1].pose.orientation = Quat(2, 0, 0, 0);
  EXPECT_THROW(path.validate(), ValidationError);
}

TEST(RecordedPathTest, CostFollowsRecordedOrder) {
  RecordedPath path;
  for (double x : {0.0, 200.0, 100.0}) path.samples.push_back({ViewPose{Vec3(x, 0, 0), Quat::Identity()}, 0.0, {}});
  EXPECT_NEAR(recorded_path_cost(path, CostModel{0.0, 0.01}), 0.99 * 300.0, 1e-9);
  EXPECT_NEAR(recorded_path_cost(path, CostModel{2.0, 0.01}), 0.99 * 300.0 + 6.0, 1e-9);
}

TEST(Augment, EmptyPathLeavesGraphUnchanged) {
  Rng rng(81);
  const auto g = random_graph(rng, 10, 300.0);
  const auto out = augment_graph(g, RecordedPath{}, 300.0);
  ASSERT_EQ(out.size(), g.size());
  ASSERT_EQ(out.edges().size(), g.edges().size());
  for (std::size_t i = 0; i < g.size(); ++i)
    for (std::size_t j = 0; j < g.size(); ++j) EXPECT_EQ(out.distance(i, j), g.distance(i, j));
}

TEST(Augment, CountsCrossEdgesWithinLinkDistance) {
  std::vector<ViewPose> poses;
  for (double x : {0.0, 100.0, 200.0, 1000.0, 1100.0}) poses.push_back(ViewPose{Vec3(x, 0, 0), Quat::Identity()});
  const auto g = build_graph(poses, GraphParams{0.01, 1, 1e9});
  RecordedPath user;
  user.samples.push_back({ViewPose{Vec3(100, 50, 0), Quat::Identity()}, 0.0, {}});
  const auto out = augment_graph(g, user, 300.0);
  EXPECT_EQ(out.size(), 6u);
  std::size_t cross = 0;
  for (const auto& e : out.edges()) cross += e.to == 5 ? 1 : 0;
  EXPECT_EQ(cross, 3u);
  EXPECT_EQ(out.edges().size(), g.edges().size() + 3);
}

TEST(Augment, ConsecutiveUserPosesAlwaysLinked) {
  const auto g = build_graph({ViewPose{Vec3(0, 0, 0), Quat::Identity()}, ViewPose{Vec3(10, 0, 0), Quat::Identity()}},
                             GraphParams{});
  RecordedPath user;
  user.samples.push_back({ViewPose{Vec3(5000, 0, 0), Quat::Identity()}, 0.0, {}});
  user.samples.push_back({ViewPose{Vec3(9000, 0, 0), Quat::Identity()}, 1.0, {}});
  const auto out = augment_graph(g, user, 300.0);
  EXPECT_TRUE(out.connected(2, 3));
  EXPECT_FALSE(out.connected(0, 2));
  EXPECT_NEAR(out.distance(2, 3), 0.99 * 4000.0, 1e-9);
}

TEST(Augment, OriginalDistancesNeverIncrease) {
  Rng rng(82);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<ViewPose> poses;
    for (int i = 0; i < 25; ++i) poses.push_back(random_pose(rng, 400.0));
    const auto g = build_graph(poses, GraphParams{0.01, 3, 400.0});
    RecordedPath user;
    for (int i = 0; i < 8; ++i) user.samples.push_back({random_pose(rng, 400.0), static_cast<double>(i), {}});
    const auto out = augment_graph(g, user, 300.0);
    for (std::size_t i = 0; i < g.size(); ++i)
      for (std::size_t j = 0; j < g.size(); ++j) EXPECT_LE(out.distance(i, j), g.distance(i, j) + 1e-9);
  }
}

// Scaling every quality by the same factor leaves both planners' choices
// unchanged, so qr = user_f / gcb_plus_f is scale-free.
TEST(QualityRatio, PlannersAreScaleConsistent) {
  Rng rng(83);
  for (int trial = 0; trial < 100; ++trial) {
    auto inst = random_instance(rng, static_cast<std::size_t>(uniform_int(rng, 3, 12)), 20);
    auto scaled_dense = inst.dense;
    for (auto& row : scaled_dense)
      for (auto& v : row) v *= 0.5;
    const auto scaled = QualityMatrix::from_dense(scaled_dense);
    const PlanningProblem p = inst.problem();
    const PlanningProblem ps{inst.graph, scaled, inst.cost, inst.budget};
    const auto a = gcb_plus(p, gcb(p));
    const auto b = gcb_plus(ps, gcb(ps));
    EXPECT_EQ(a.order, b.order);
    EXPECT_NEAR(b.f, 0.5 * a.f, 1e-9);
  }
}

TEST_F(PanelScene, CameraPointedAwaySeesNothing) {
  const auto& sc = *scene_;
  const Vec3 centre = sc.mesh.bounds().center();
  RecordedPath path;
  for (int i = 0; i < 5; ++i) {
    const Vec3 eye = centre + Vec3(0, -600.0 - 40.0 * i, 0);
    path.samples.push_back({ViewPose{eye, look_along(eye - centre)}, static_cast<double>(i), {}});
  }
  const auto report = evaluate(path, sc.evaluation_scene(), sc.config.evaluation);
  EXPECT_EQ(report.user_f, 0.0);
  EXPECT_EQ(report.quality_ratio, 0.0);
  for (double q : report.point_quality) EXPECT_EQ(q, 0.0);
  EXPECT_FALSE(report.user_exceeds_auto);
}

TEST_F(PanelScene, GcbPlusTraversalRoundTrip) {
  const auto& sc = *scene_;
  const PlanningProblem p{sc.graph, sc.quality, sc.config.cost, sc.config.default_budget};
  const auto sol = gcb_plus(p, gcb(p));
  ASSERT_GT(sol.order.size(), 2u);
  const auto report = evaluate(traversal(sc, sol), sc.evaluation_scene(), sc.config.evaluation);
  EXPECT_NEAR(report.quality_ratio, 1.0, 0.05);
  EXPECT_LE(report.gcb_plus_cost, report.user_cost + 1e-9);
  EXPECT_GE(report.gcb_plus_f, report.gcb_f - 1e-9);
  ASSERT_TRUE(report.opt_metric_user && report.opt_metric_auto);
  EXPECT_NEAR(*report.opt_metric_user, report.user_f * sc.config.evaluation.kappa / report.gcb_f, 1e-12);
  EXPECT_EQ(report.point_quality.size(), sc.points.size());
  EXPECT_NEAR(report.user_f, std::accumulate(report.point_quality.begin(), report.point_quality.end(), 0.0), 1e-9);
}

TEST_F(PanelScene, SinglePoseComparesAgainstBestSingleton) {
  const auto& sc = *scene_;
  RecordedPath one;
  one.samples.push_back({sc.graph.poses()[3], 0.0, {}});
  const auto report = evaluate(one, sc.evaluation_scene(), sc.config.evaluation);
  EXPECT_EQ(report.user_cost, 0.0);
  double best = 0.0;
  for (std::size_t j = 0; j < sc.quality.poses(); ++j) best = std::max(best, sc.quality.column_sum(j));
  best = std::max(best, report.user_f);
  EXPECT_NEAR(report.gcb_f, best, 1e-9);
  EXPECT_LE(report.quality_ratio, 1.0 + 1e-12);
}

TEST(PathExport, ObjPolylines) {
  const auto user = straight_line(3, 100.0).poses();
  const auto automated = straight_line(2, 50.0).poses();
  std::ostringstream out;
  write_paths_obj(out, user, automated);
  const auto text = out.str();
  EXPECT_NE(text.find("o user_path"), std::string::npos);
  EXPECT_NE(text.find("o auto_path"), std::string::npos);
  EXPECT_NE(text.find("l 1 2 3\n"), std::string::npos);
  EXPECT_NE(text.find("l 4 5\n"), std::string::npos);
  EXPECT_NE(text.find(" 1 0 0\n"), std::string::npos);
  EXPECT_NE(text.find(" 0 0 1\n"), std::string::npos);
}
