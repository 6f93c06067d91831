#include "lmd/index_archive.h"

#include <gtest/gtest.h>

#include <filesystem>
#include <random>
#include <sstream>

#include "lmd_fixtures.h"
#include "test_util.h"

namespace lmd {
namespace {

TEST(DescriptorRecord, RoundTrip) {
  std::mt19937_64 rng(1);
  auto d = testing::random_lmd(rng, {"set", 4}, 25);
  d.viewpoint.position = {1.25, -3.5};
  d.viewpoint.frame.theta = 0.3;
  d.viewpoint.method = PlannerMethod::kCoR;
  std::stringstream ss;
  write_lmd(ss, d);
  const auto back = read_lmd(ss, d.settings);
  EXPECT_EQ(back.map_id, d.map_id);
  EXPECT_EQ(back.viewpoint.position, d.viewpoint.position);
  EXPECT_EQ(back.viewpoint.method, d.viewpoint.method);
  EXPECT_EQ(back.triples, d.triples);
  EXPECT_EQ(back.change_words, d.change_words);
  EXPECT_EQ(back.positions, d.positions);
  EXPECT_EQ(back.appearance_turns, d.appearance_turns);
  EXPECT_EQ(back.change_turns, d.change_turns);
}

TEST(DescriptorRecord, ByteLayout) {
  std::mt19937_64 rng(2);
  const auto d = testing::random_lmd(rng, {"ab", 1}, 3);
  std::stringstream ss;
  write_lmd(ss, d);
  // name, index, viewpoint, method, orientation, N, then per feature
  // 6 + 8 + 16 + 32 + 8 + 32 bytes.
  EXPECT_EQ(ss.str().size(), (4u + 2) + 4 + 24 + 1 + 1 + 4 + 3 * (6 + 8 + 16 + 8 + 32));
}

TEST(IndexArchive, SaveLoadAnswersIdentically) {
  std::mt19937_64 rng(3);
  InvertedIndex index(LmdSettings::for_descriptor(6), {});
  for (std::uint32_t i = 0; i < 15; ++i) index.insert(testing::random_lmd(rng, {"db", i}, 40));
  PlannerSettings ps{PlannerMethod::kCoR, 17};
  const auto dir = std::filesystem::temp_directory_path() / "lmd_index_test";
  std::filesystem::remove_all(dir);
  save_index(dir, index, ps);
  const StoredIndex stored = load_index(dir);
  EXPECT_EQ(stored.planner.method, PlannerMethod::kCoR);
  EXPECT_EQ(stored.planner.seed, 17u);
  EXPECT_TRUE(stored.index.settings() == index.settings());
  EXPECT_TRUE(stored.index.pyramid() == index.pyramid());
  EXPECT_EQ(stored.index.posting_count(), index.posting_count());
  const auto q = testing::random_lmd(rng, {"q", 0}, 40);
  const auto a = index.query_ranked(q);
  const auto b = stored.index.query_ranked(q);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].map_id, b[i].map_id);
    EXPECT_EQ(a[i].score, b[i].score);
  }
  std::filesystem::remove_all(dir);
}

TEST(IndexArchive, MissingDirectory) {
  EXPECT_THROW(load_index("/nonexistent/lmd/index"), Error);
}

}  // namespace
}  // namespace lmd
