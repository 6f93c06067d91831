#include "lmd/change_detect.h"

#include <gtest/gtest.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "lmd_fixtures.h"

namespace lmd {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

TEST(Lof, MatchesOracleOnRandomPoints) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-5, 5);
  PointList pts;
  for (int i = 0; i < 200; ++i) pts.emplace_back(u(rng), u(rng));
  const auto got = lof_scores(pts, 10);
  const auto want = testing::oracle_lof(pts, 10);
  for (std::size_t i = 0; i < pts.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-9 * want[i]);
}

TEST(Lof, UniformGridInterior) {
  PointList pts;
  for (int y = 0; y < 15; ++y) {
    for (int x = 0; x < 15; ++x) pts.emplace_back(0.2 * x, 0.2 * y);
  }
  const auto lof = lof_scores(pts, 10);
  const auto want = testing::oracle_lof(pts, 10);
  const std::size_t center = 7 * 15 + 7;
  EXPECT_NEAR(lof[center], 1.0, 0.05);
  EXPECT_NEAR(lof[center], want[center], 1e-9);
}

TEST(Lof, IsolatedPointIsOutlier) {
  PointList pts;
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0, 0.7);
  for (int i = 0; i < 50; ++i) pts.emplace_back(u(rng), u(rng));
  // Cluster spacing is about 0.1 m.
  pts.emplace_back(0.35 + 2.0, 0.35);
  const auto lof = lof_scores(pts, 10);
  EXPECT_GT(lof.back(), 1.6);
  EXPECT_NEAR(lof.back(), testing::oracle_lof(pts, 10).back(), 1e-9 * lof.back());
}

TEST(Lof, TooFewPoints) {
  PointList pts(5, Point2::Zero());
  EXPECT_THROW(lof_scores(pts, 10), Error);
}

LocalMapDescriptor with_positions(const PointList& pts) {
  LocalMapDescriptor d;
  d.settings = LmdSettings::for_descriptor(1);
  for (const auto& p : pts) {
    const Eigen::Vector2i q = quantize_relative(p, 0.25);
    d.triples.push_back({0, q.x(), q.y()});
    d.change_words.push_back(0);
    d.positions.push_back(p);
    d.appearance_turns.push_back({0, 0, 0, 0});
    d.change_turns.push_back({0, 0, 0, 0});
  }
  return d;
}

TEST(FilterOutliers, UniformAllSurvive) {
  PointList pts;
  for (int y = 0; y < 12; ++y) {
    for (int x = 0; x < 12; ++x) pts.emplace_back(0.2 * x, 0.2 * y);
  }
  EXPECT_EQ(filter_outliers(with_positions(pts), {}).size(), pts.size());
}

TEST(FilterOutliers, SpurRemoved) {
  PointList pts;
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 8; ++x) pts.emplace_back(0.2 * x, 0.2 * y);
  }
  pts.emplace_back(5.0, 5.0);
  const auto keep = filter_outliers(with_positions(pts), {});
  EXPECT_EQ(keep.size(), pts.size() - 1);
  EXPECT_EQ(std::find(keep.begin(), keep.end(), pts.size() - 1), keep.end());
}

TEST(FilterOutliers, TooFewFallsBack) {
  const PointList pts = {Point2(0, 0), Point2(1, 0), Point2(9, 9)};
  EXPECT_EQ(filter_outliers(with_positions(pts), {}).size(), 3u);
}

// Exhaustive NN-d ratio with the window rules spelled out.
double oracle_nnd(ChangeWord w, const Point2& p, const LocalMapDescriptor& db, const Eigen::Vector2i& off,
                  double half) {
  const Point2 shift = off.cast<double>() * db.settings.pose_quantum;
  auto nearest = [&](ChangeWord word, const Point2& at, long exclude) {
    long best = -1;
    int bh = 0;
    double bd = 0;
    for (std::size_t j = 0; j < db.size(); ++j) {
      if (static_cast<long>(j) == exclude) continue;
      const Point2 q = db.positions[j] + shift;
      if (std::abs(q.x() - at.x()) > half || std::abs(q.y() - at.y()) > half) continue;
      const int h = std::popcount(word ^ db.change_words[j]);
      const double d = (q - at).squaredNorm();
      if (best < 0 || h < bh || (h == bh && d < bd)) {
        best = static_cast<long>(j);
        bh = h;
        bd = d;
      }
    }
    return std::pair{best, bh};
  };
  const auto [o, num] = nearest(w, p, -1);
  if (o < 0) return kInf;
  const auto [o2, den] = nearest(db.change_words[o], db.positions[o] + shift, o);
  const int d = o2 < 0 ? 0 : den;
  if (d == 0) return num == 0 ? 0.0 : kInf;
  return static_cast<double>(num) / d;
}

LocalMapDescriptor word_fixture(const std::vector<std::pair<Point2, ChangeWord>>& f) {
  PointList pts;
  for (const auto& [p, w] : f) pts.push_back(p);
  LocalMapDescriptor d = with_positions(pts);
  for (std::size_t k = 0; k < f.size(); ++k) {
    d.change_words[k] = f[k].second;
    d.change_turns[k] = {f[k].second, f[k].second, f[k].second, f[k].second};
  }
  return d;
}

TEST(NnDetector, IdenticalWordGivesZero) {
  const auto db = word_fixture({{{0, 0}, 0xF0}, {{1, 0}, 0x0F}, {{0, 1}, 0xFF}});
  const auto q = word_fixture({{{1, 0}, 0x0F}});
  EXPECT_EQ(nn_d_score(q, 0, db, {0, 0}, {}), 0.0);
}

TEST(NnDetector, ZeroDenominatorGivesInfinity) {
  const ChangeWord w = 0x3FFFFFFF;  // 30 bits
  const auto db = word_fixture({{{0, 0}, 0}, {{0.5, 0}, 0}, {{0, 0.5}, 0}});
  const auto q = word_fixture({{{0.2, 0.2}, w}});
  EXPECT_EQ(nn_d_score(q, 0, db, {0, 0}, {}), kInf);
}

TEST(NnDetector, EmptyWindowGivesInfinity) {
  const auto db = word_fixture({{{10, 10}, 1}, {{11, 10}, 1}});
  const auto q = word_fixture({{{0, 0}, 1}});
  EXPECT_EQ(nn_d_score(q, 0, db, {0, 0}, {}), kInf);
}

TEST(NnDetector, SixFeatureFixture) {
  const auto db = word_fixture({{{0.0, 0.0}, 0b0000'1111},
                                {{1.0, 0.0}, 0b0011'1111},
                                {{2.5, 0.0}, 0b1111'1111},
                                {{-2.0, 1.0}, 0b0000'0001},
                                {{0.0, 2.9}, 0b1111'0000},
                                {{4.0, 4.0}, 0b0000'1110}});
  const auto q = word_fixture({{{0.1, 0.1}, 0b0000'0111},
                               {{1.2, -0.4}, 0b1111'1100},
                               {{-1.0, 2.0}, 0b1010'1010},
                               {{3.5, 3.5}, 0b0000'1111},
                               {{9.0, 9.0}, 0b1}});
  for (const Eigen::Vector2i off : {Eigen::Vector2i(0, 0), Eigen::Vector2i(2, -1)}) {
    for (std::size_t i = 0; i < q.size(); ++i) {
      EXPECT_EQ(nn_d_score(q, i, db, off, {}), oracle_nnd(q.change_words[i], q.positions[i], db, off, 3.0))
          << i;
    }
  }
}

TEST(NnDetector, RandomFixturesMatchOracle) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    auto q = testing::random_lmd(rng, {"q", 0}, 60, 24, 5.0);
    auto db = testing::random_lmd(rng, {"d", 0}, 100, 24, 5.0);
    // Narrow the word space so distances tie often.
    for (auto& w : q.change_words) w &= 0x3F;
    for (auto& w : db.change_words) w &= 0x3F;
    const Eigen::Vector2i off(trial - 5, 3 - trial);
    for (std::size_t i = 0; i < q.size(); ++i) {
      EXPECT_EQ(nn_d_score(q, i, db, off, {}), oracle_nnd(q.change_words[i], q.positions[i], db, off, 3.0));
    }
  }
}

TEST(DetectChanges, StationaryIdentity) {
  std::mt19937_64 rng(4);
  const auto x = testing::random_lmd(rng, {"x", 0}, 120, 24, 4.0);
  EXPECT_TRUE(detect_changes(x, x, Eigen::Vector2i(0, 0), 120.0, {}).empty());
}

TEST(DetectChanges, ZeroThresholdFlagsEveryPositiveScore) {
  std::mt19937_64 rng(5);
  const auto q = testing::random_lmd(rng, {"q", 0}, 80, 24, 4.0);
  const auto db = testing::random_lmd(rng, {"d", 0}, 80, 24, 4.0);
  DetectorConfig cfg;
  cfg.nnd_threshold = 0.0;
  const auto survivors = filter_outliers(q, cfg);
  std::size_t positive = 0;
  for (auto i : survivors) positive += nn_d_score(q, i, db, {0, 0}, cfg) > 0.0 ? 1 : 0;
  const ChangeMask m = detect_changes(q, db, Eigen::Vector2i(0, 0), 3.0, cfg);
  EXPECT_EQ(m.points.size(), positive);
  EXPECT_GT(positive, survivors.size() * 9 / 10);
  EXPECT_EQ(m.rank_score, 3.0);
}

TEST(DetectChanges, MonotoneInThreshold) {
  std::mt19937_64 rng(6);
  const auto q = testing::random_lmd(rng, {"q", 0}, 80, 24, 4.0);
  auto db = q;
  for (std::size_t k = 0; k < db.size(); k += 3) db.change_words[k] ^= 0x5A5;
  std::vector<std::size_t> prev;
  for (double t : {0.0, 0.5, 1.0, 1.5, 2.0, 3.0, 8.0}) {
    DetectorConfig cfg;
    cfg.nnd_threshold = t;
    std::vector<std::size_t> cur;
    for (const auto& p : detect_changes(q, db, Eigen::Vector2i(0, 0), 1.0, cfg).points) cur.push_back(p.feature);
    std::sort(cur.begin(), cur.end());
    if (t > 0.0) EXPECT_TRUE(std::includes(prev.begin(), prev.end(), cur.begin(), cur.end()));
    prev = cur;
  }
}

TEST(DetectChanges, ScoresSortedAndFlagsConsistent) {
  std::mt19937_64 rng(7);
  const auto q = testing::random_lmd(rng, {"q", 0}, 80, 24, 4.0);
  const auto db = testing::random_lmd(rng, {"d", 0}, 80, 24, 4.0);
  const DetectorConfig cfg;
  for (const auto& s : score_features(q, db, {0, 0}, cfg)) {
    EXPECT_EQ(s.is_outlier, s.lof > cfg.lof_threshold);
    if (s.is_change) {
      EXPECT_FALSE(s.is_outlier);
      EXPECT_GT(s.nnd, cfg.nnd_threshold);
    }
  }
  const auto m = detect_changes(q, db, Eigen::Vector2i(0, 0), 1.0, cfg);
  for (std::size_t i = 1; i < m.points.size(); ++i) EXPECT_GE(m.points[i - 1].score, m.points[i].score);
}

TEST(DetectChanges, OffsetCorrection) {
  std::mt19937_64 rng(8);
  std::size_t with = 0, without = 0;
  for (int trial = 0; trial < 10; ++trial) {
    const auto q = testing::random_lmd(rng, {"q", 0}, 150, 400, 5.0);
    auto db = q;
    // Translate the database copy by a whole number of quanta below 1 m.
    const Eigen::Vector2i s(3, -2);
    for (std::size_t k = 0; k < db.size(); ++k) {
      db.positions[k] += s.cast<double>() * 0.25;
      db.triples[k].x += s.x();
      db.triples[k].y += s.y();
    }
    const Eigen::Vector2i est = estimate_offset(q, db);
    EXPECT_EQ(est, -s);
    with += detect_changes(q, db, est, 1.0, {}).points.size();
    without += detect_changes(q, db, Eigen::Vector2i(0, 0), 1.0, {}).points.size();
  }
  EXPECT_LE(10 * with, without);
}

TEST(RankChangeMasks, OrderAndTies) {
  auto mask = [](std::uint32_t id, double k, bool empty = false) {
    ChangeMask m;
    m.db_id = {"d", id};
    m.rank_score = k;
    if (!empty) m.points.push_back({});
    return m;
  };
  auto r = rank_change_masks({mask(1, 3.0), mask(2, 5.0), mask(3, 1.0)});
  ASSERT_EQ(r.size(), 3u);
  EXPECT_EQ(r[0].rank_score, 5.0);
  EXPECT_EQ(r[2].rank_score, 1.0);
  r = rank_change_masks({mask(9, 2.0), mask(4, 2.0), mask(5, 7.0, true)});
  ASSERT_EQ(r.size(), 2u);
  EXPECT_EQ(r[0].db_id.index, 4u);
  EXPECT_TRUE(rank_change_masks({mask(1, 1.0, true)}).empty());
}

}  // namespace
}  // namespace lmd
