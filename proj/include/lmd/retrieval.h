#ifndef LMD_RETRIEVAL_H_
#define LMD_RETRIEVAL_H_

#include <cstdint>
#include <limits>
#include <map>
#include <vector>

#include <Eigen/Core>

#include "lmd/descriptor.h"

namespace lmd {

// Pyramid levels l = 0..levels with cell size base_width * 2^-l. In bag of
// words mode only appearance words are compared, over one global cell.
struct PyramidConfig {
  int levels = 2;
  double base_width = 5.0;
  bool bag_of_words = false;

  double cell_size(int level) const { return base_width / static_cast<double>(1 << level); }
  double weight(int level) const;
  bool operator==(const PyramidConfig&) const = default;
};

struct MatchResult {
  MapId map_id;
  double score = 0.0;
  int orientation = 0;
  Eigen::Vector2i offset = Eigen::Vector2i::Zero();
};

// Sorted (word, cell) keys of one descriptor, one vector per pyramid level.
using PyramidKeys = std::vector<std::vector<std::uint64_t>>;

PyramidKeys pyramid_keys(const LocalMapDescriptor& lmd, const PyramidConfig& cfg);

// Sum over levels of weight * histogram intersection of two key sets.
double pyramid_match(const PyramidKeys& a, const PyramidKeys& b, const PyramidConfig& cfg);

// Weighted spatial pyramid match of two descriptors.
double spm_similarity(const LocalMapDescriptor& x, const LocalMapDescriptor& y,
                      const PyramidConfig& cfg);

// Rotates relative positions by quarter_turns * 90 degrees and re-quantizes.
// Appearance and change words switch to the matching precomputed variant.
LocalMapDescriptor rotate_lmd(const LocalMapDescriptor& lmd, int quarter_turns);

// Mode of the pose word differences query - db over pairs sharing an
// appearance word; ties go to the lexicographically smallest difference.
Eigen::Vector2i estimate_offset(const LocalMapDescriptor& query, const LocalMapDescriptor& db);

// Best orientation hypothesis of one pair and the offset under it.
MatchResult match_pair(const LocalMapDescriptor& query, const LocalMapDescriptor& db,
                       const PyramidConfig& cfg);

struct Posting {
  std::uint32_t map = 0;  // ordinal into InvertedIndex::descriptors()
  std::uint32_t feature = 0;
};

class InvertedIndex {
 public:
  InvertedIndex(const LmdSettings& settings, const PyramidConfig& pyramid);

  const LmdSettings& settings() const { return settings_; }
  const PyramidConfig& pyramid() const { return pyramid_; }
  std::size_t size() const { return descriptors_.size(); }
  bool empty() const { return descriptors_.empty(); }
  const std::vector<LocalMapDescriptor>& descriptors() const { return descriptors_; }
  const LocalMapDescriptor* find(const MapId& id) const;
  const std::vector<Posting>& postings(AppearanceWord word) const { return postings_[word]; }
  std::size_t posting_count() const;

  // Throws on a duplicate map id or on a settings mismatch.
  void insert(LocalMapDescriptor lmd);

  // Candidates share at least one appearance word with some orientation of
  // the query. Each is scored with its best orientation; zero scores are
  // dropped. Sorted by score descending, then map id.
  std::vector<MatchResult> query_ranked(const LocalMapDescriptor& query,
                                        std::size_t top_k = std::numeric_limits<std::size_t>::max()) const;

  // Scores every indexed map with spm_similarity, without the postings.
  std::vector<MatchResult> query_exhaustive(const LocalMapDescriptor& query,
                                            std::size_t top_k = std::numeric_limits<std::size_t>::max()) const;

 private:
  std::vector<MatchResult> finish(std::vector<MatchResult> results, std::size_t top_k) const;

  LmdSettings settings_;
  PyramidConfig pyramid_;
  std::vector<LocalMapDescriptor> descriptors_;
  std::vector<PyramidKeys> keys_;
  std::map<MapId, std::uint32_t> ordinal_;
  std::vector<std::vector<Posting>> postings_;
};

}  // namespace lmd

#endif  // LMD_RETRIEVAL_H_
