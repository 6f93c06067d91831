#include "lmd/descriptor.h"

#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <numbers>
#include <random>
#include <set>

#include "test_util.h"

namespace lmd {
namespace {

// Brute-force binning: first point per fine cell, then shell and sector.
AppearanceDescriptor oracle_descriptor(const Point2& center, const PointList& pts,
                                       const DescriptorConfig& c, const Point2& anchor) {
  std::map<std::pair<long, long>, Point2> first;
  for (const auto& p : pts) {
    const std::pair<long, long> key{static_cast<long>(std::floor((p.x() - anchor.x()) / c.fine_resolution)),
                                    static_cast<long>(std::floor((p.y() - anchor.y()) / c.fine_resolution))};
    first.emplace(key, p);
  }
  AppearanceDescriptor d = AppearanceDescriptor::Zero(c.shells * c.sectors);
  for (const auto& [key, p] : first) {
    const double dist = (p - center).norm();
    if (dist >= c.radius) continue;
    int shell = 0;
    while (shell + 1 < c.shells && dist >= c.radius * (shell + 1) / c.shells) ++shell;
    double a = std::atan2(p.y() - center.y(), p.x() - center.x());
    if (a < 0) a += 2 * std::numbers::pi;
    const int sector = std::min(c.sectors - 1, static_cast<int>(a / (2 * std::numbers::pi / c.sectors)));
    d[shell * c.sectors + sector] += 1;
  }
  return d;
}

// Random points no two of which can share a fine cell.
PointList sparse_points(std::uint64_t seed, int n, double extent, double min_gap = 0.03) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-extent, extent);
  PointList pts;
  while (static_cast<int>(pts.size()) < n) {
    const Point2 p(u(rng), u(rng));
    bool ok = true;
    for (const auto& q : pts) ok = ok && (p - q).norm() > min_gap;
    if (ok) pts.push_back(p);
  }
  return pts;
}

TEST(DescriptorConfig, EightRetrievalConfigs) {
  const std::pair<double, int> expect[] = {{1, 1}, {6, 3}, {12, 6}, {1, 6}, {3, 6}, {6, 6}, {3, 1}, {6, 1}};
  for (int id = 1; id <= 8; ++id) {
    const DescriptorConfig c = retrieval_config(id);
    EXPECT_EQ(c.radius, expect[id - 1].first);
    EXPECT_EQ(c.sectors, expect[id - 1].second);
    EXPECT_EQ(c.shells, 10);
    EXPECT_EQ(c.dimension(), 10 * c.sectors);
    EXPECT_EQ(c.bits, 10);
  }
  EXPECT_THROW(retrieval_config(0), Error);
  EXPECT_THROW(retrieval_config(9), Error);
  EXPECT_EQ(change_config().dimension(), 60);
}

TEST(AppearanceDescriptor, EmptyNeighborhood) {
  const DescriptorConfig c = retrieval_config(1);
  const PointList pts = {Point2(5, 5)};
  EXPECT_TRUE(compute_appearance_descriptor(Point2::Zero(), pts, c).isZero());
  EXPECT_TRUE(compute_appearance_descriptor(Point2::Zero(), PointList{}, c).isZero());
}

TEST(AppearanceDescriptor, SinglePointShell) {
  DescriptorConfig c = retrieval_config(1);
  const double a = 10.0 * std::numbers::pi / 180.0;
  const PointList pts = {Point2(0.55 * std::cos(a), 0.55 * std::sin(a))};
  const AppearanceDescriptor d = compute_appearance_descriptor(Point2::Zero(), pts, c);
  EXPECT_EQ(d.sum(), 1.0);
  EXPECT_EQ(d[5], 1.0);
}

TEST(AppearanceDescriptor, ExactRingOnShellBoundary) {
  DescriptorConfig c;
  c.radius = 50.0;
  c.shells = 10;
  c.sectors = 4;
  // Every point is exactly 15 = r_3 from the center.
  PointList ring;
  for (auto [x, y] : {std::pair{9.0, 12.0}, {12.0, 9.0}, {15.0, 0.0}, {0.0, 15.0}}) {
    for (double sx : {1.0, -1.0}) {
      for (double sy : {1.0, -1.0}) ring.emplace_back(sx * x, sy * y);
    }
  }
  const AppearanceDescriptor d = compute_appearance_descriptor(Point2::Zero(), ring, c);
  EXPECT_EQ(d.segment(3 * c.sectors, c.sectors).sum(), d.sum());
  EXPECT_EQ(d.sum(), 12.0);
}

TEST(AppearanceDescriptor, UniformRingMatchesOracle) {
  const DescriptorConfig c = retrieval_config(4);
  PointList ring;
  for (int i = 0; i < 360; ++i) {
    const double a = 2 * std::numbers::pi * i / 360;
    ring.emplace_back(0.3 * std::cos(a), 0.3 * std::sin(a));
  }
  const AppearanceDescriptor d = compute_appearance_descriptor(Point2::Zero(), ring, c);
  EXPECT_EQ(d, oracle_descriptor(Point2::Zero(), ring, c, Point2::Zero()));
  // Nearly all mass sits in shell 3; floating point may push a few points below r_3.
  EXPECT_GE(d.segment(3 * c.sectors, c.sectors).sum(), 0.9 * d.sum());
  EXPECT_EQ(d.segment(4 * c.sectors, 6 * c.sectors).sum(), 0.0);
}

TEST(AppearanceDescriptor, RandomMapsMatchOracle) {
  for (int id : {1, 2, 4, 6}) {
    const DescriptorConfig c = retrieval_config(id);
    PointList pts = sparse_points(id, 300, 4.0, 0.0);
    // Duplicate some points inside the same fine cell.
    for (int i = 0; i < 50; ++i) pts.push_back(pts[i] + Point2(0.001, 0.001));
    for (const Point2& center : {Point2(0, 0), Point2(0.37, -1.2), Point2(-2.1, 0.6)}) {
      EXPECT_EQ(compute_appearance_descriptor(center, pts, c),
                oracle_descriptor(center, pts, c, Point2::Zero()));
    }
  }
}

TEST(AppearanceDescriptor, QuarterTurnVariants) {
  const DescriptorConfig c = retrieval_config(6);
  const PointList pts = sparse_points(3, 200, 5.0);
  const Point2 center(0.4, -0.3);
  for (int t = 1; t < 4; ++t) {
    PointList turned;
    for (const auto& p : pts) turned.push_back(rotate_quarter_turns(p, t));
    EXPECT_EQ(compute_appearance_descriptor(center, pts, c, t),
              compute_appearance_descriptor(rotate_quarter_turns(center, t), turned, c, 0))
        << t;
  }
}

TEST(AppearanceDescriptor, PolestarRotationInvariance) {
  const DescriptorConfig c = retrieval_config(7);
  const PointList pts = sparse_points(5, 400, 3.0);
  const AppearanceDescriptor d0 = compute_appearance_descriptor(Point2::Zero(), pts, c);
  for (double angle : {0.1, 0.7, 2.0, 4.4}) {
    PointList turned;
    for (const auto& p : pts) turned.push_back(rotate(p, angle));
    const AppearanceDescriptor d = compute_appearance_descriptor(Point2::Zero(), turned, c);
    EXPECT_LE((d - d0).cwiseAbs().maxCoeff(), 2.0);
  }
}

TEST(ProjectToWord, Conventions) {
  const DescriptorConfig c = retrieval_config(2);
  const ProjectionMatrix p(c);
  EXPECT_EQ(project_to_word(AppearanceDescriptor::Zero(c.dimension()), p), 0);
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0, 20);
  AppearanceDescriptor d(c.dimension());
  for (int i = 0; i < d.size(); ++i) d[i] = std::floor(u(rng));
  EXPECT_EQ(project_to_word(d, p), project_to_word(2.0 * d, p));
  // Bit k set iff row k of the projection is positive on d.
  const Eigen::VectorXd y = p.entries() * d;
  AppearanceWord expect = 0;
  for (int k = 0; k < c.bits; ++k) {
    if (y[k] > 0) expect |= static_cast<AppearanceWord>(1u << k);
  }
  EXPECT_EQ(project_to_word(d, p), expect);
  EXPECT_THROW(project_to_word(AppearanceDescriptor::Zero(5), p), Error);
}

TEST(ProjectToWord, DeterministicPerSeed) {
  const ProjectionMatrix a(77, 10, 30), b(77, 10, 30), other(78, 10, 30);
  EXPECT_EQ(a.entries(), b.entries());
  EXPECT_NE(a.entries(), other.entries());
}

TEST(ProjectToWord, WordsAreSpread) {
  const DescriptorConfig c = retrieval_config(6);
  const ProjectionMatrix p(c);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0, 50);
  std::set<AppearanceWord> words;
  for (int i = 0; i < 1000; ++i) {
    AppearanceDescriptor d(c.dimension());
    for (int k = 0; k < d.size(); ++k) d[k] = std::floor(u(rng));
    words.insert(project_to_word(d, p));
  }
  EXPECT_GE(words.size(), 100u);
}

TEST(ChangeWord, StrictlyAboveMean) {
  EXPECT_EQ(binarize_change_descriptor(AppearanceDescriptor::Constant(60, 3.0)), 0u);
  AppearanceDescriptor d = AppearanceDescriptor::Zero(60);
  d[0] = 5;
  d[59] = 1;
  EXPECT_EQ(binarize_change_descriptor(d), (ChangeWord{1} | (ChangeWord{1} << 59)));
}

TEST(QuantizePose, Examples) {
  Viewpoint vp;
  vp.position = Point2(2.0, -1.0);
  EXPECT_EQ(quantize_pose(vp.position, vp), Eigen::Vector2i(0, 0));
  EXPECT_EQ(quantize_pose(vp.position + Point2(0.30, -0.10), vp), Eigen::Vector2i(1, -1));
  EXPECT_EQ(quantize_relative(Point2(0.25, 0.25), 0.25), Eigen::Vector2i(1, 1));
  vp.frame.theta = std::numbers::pi / 2;
  // Map +y is the viewpoint's +x.
  EXPECT_EQ(quantize_pose(vp.position + Point2(0.0, 0.6), vp), Eigen::Vector2i(2, 0));
}

TEST(SelectInterestPoints, BucketRule) {
  OccupancyGrid g(0.1, Point2(0, 0), 10, 10);
  g.set_label(3, 3, CellLabel::kOccupied);
  EXPECT_EQ(select_interest_points(g).size(), 1u);
  EXPECT_NEAR((select_interest_points(g)[0] - Point2(0.35, 0.35)).norm(), 0, 1e-12);
  for (int x : {2, 3}) {
    for (int y : {2, 3}) g.set_label(x, y, CellLabel::kOccupied);
  }
  const PointList one = select_interest_points(g);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_NEAR((one[0] - Point2(0.25, 0.25)).norm(), 0, 1e-12);
  OccupancyGrid h(0.1, Point2(0, 0), 20, 2);
  h.set_label(0, 0, CellLabel::kOccupied);
  h.set_label(10, 0, CellLabel::kOccupied);
  EXPECT_EQ(select_interest_points(h).size(), 2u);
}

TEST(BuildLmd, EmptyMap) {
  const LmdSettings s = LmdSettings::for_descriptor(1);
  const LocalMapDescriptor d = build_lmd(LocalMap{}, Viewpoint{}, s, ProjectionMatrix(s.retrieval));
  EXPECT_EQ(d.size(), 0u);
}

TEST(BuildLmd, ThreePointFixtureComposesSubOperations) {
  const PointList pts = {Point2(0.52, 0.13), Point2(1.07, 0.94), Point2(0.31, 1.48)};
  const LocalMap m = testing::single_pose_map(pts, {0.0, 0.0, 0.0});
  for (int id : {1, 6}) {
    const LmdSettings s = LmdSettings::for_descriptor(id);
    const ProjectionMatrix proj(s.retrieval);
    Viewpoint vp;
    vp.position = Point2(0.6, 0.7);
    const LocalMapDescriptor d = build_lmd(m, vp, s, proj);

    const OccupancyGrid g = rasterize_occupancy(m, 0.1);
    const PointList centers = select_interest_points(g);
    ASSERT_EQ(centers.size(), 3u);
    ASSERT_EQ(d.size(), 3u);
    ASSERT_EQ(d.change_words.size(), 3u);
    for (std::size_t k = 0; k < 3; ++k) {
      const AppearanceDescriptor a = oracle_descriptor(centers[k], pts, s.retrieval, g.origin());
      const Eigen::VectorXd y = proj.entries() * a;
      AppearanceWord w = 0;
      for (int b = 0; b < s.retrieval.bits; ++b) {
        if (y[b] > 0) w |= static_cast<AppearanceWord>(1u << b);
      }
      EXPECT_EQ(d.triples[k].appearance, w);
      const Point2 rel = centers[k] - vp.position;
      EXPECT_EQ(d.triples[k].x, static_cast<int>(std::floor(rel.x() / 0.25)));
      EXPECT_EQ(d.triples[k].y, static_cast<int>(std::floor(rel.y() / 0.25)));
      const AppearanceDescriptor cd = oracle_descriptor(centers[k], pts, s.change, g.origin());
      ChangeWord cw = 0;
      for (int b = 0; b < 60; ++b) {
        if (cd[b] > cd.mean()) cw |= ChangeWord{1} << b;
      }
      EXPECT_EQ(d.change_words[k], cw);
    }
  }
}

TEST(BuildLmd, SizesAgree) {
  const LocalMap m = testing::two_room_map();
  const LmdSettings s = LmdSettings::for_descriptor(2);
  const LocalMapDescriptor d = encode_local_map(m, {}, s, ProjectionMatrix(s.retrieval));
  EXPECT_GT(d.size(), 50u);
  EXPECT_EQ(d.triples.size(), d.change_words.size());
  EXPECT_EQ(d.triples.size(), d.positions.size());
  EXPECT_EQ(d.triples.size(), d.appearance_turns.size());
  for (std::size_t k = 0; k < d.size(); ++k) {
    EXPECT_EQ(d.appearance_turns[k][0], d.triples[k].appearance);
    EXPECT_EQ(d.change_turns[k][0], d.change_words[k]);
    EXPECT_LT(d.triples[k].appearance, 1u << 10);
  }
}

TEST(BuildLmd, TranslationInvariant) {
  const LocalMap m = testing::jittered(testing::transformed(testing::two_room_map(), 0.2, {0, 0}), 0.003, 9);
  const Point2 t = rotate(Point2(7.0, -3.0), estimate_dominant_orientation(m.points).theta);
  const LocalMap shifted = testing::transformed(m, 0.0, t);
  for (auto method : {PlannerMethod::kCoG, PlannerMethod::kCoR}) {
    const LmdSettings s = LmdSettings::for_descriptor(6);
    const ProjectionMatrix proj(s.retrieval);
    const LocalMapDescriptor a = encode_local_map(m, {method, 4}, s, proj);
    const LocalMapDescriptor b = encode_local_map(shifted, {method, 4}, s, proj);
    EXPECT_EQ(a.triples, b.triples);
    EXPECT_EQ(a.change_words, b.change_words);
  }
}

}  // namespace
}  // namespace lmd
