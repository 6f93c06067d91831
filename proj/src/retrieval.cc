#include "lmd/retrieval.h"

#include <algorithm>
#include <cmath>

namespace lmd {

namespace {

constexpr std::int64_t kCellBias = std::int64_t{1} << 23;

std::uint64_t pack_key(AppearanceWord word, std::int64_t cx, std::int64_t cy) {
  const auto ux = static_cast<std::uint64_t>((cx + kCellBias) & 0xFFFFFF);
  const auto uy = static_cast<std::uint64_t>((cy + kCellBias) & 0xFFFFFF);
  return (static_cast<std::uint64_t>(word) << 48) | (ux << 24) | uy;
}

// Pyramid cell of a pose word. Exact integer division when the cell size is
// a whole number of pose quanta.
std::int64_t cell_index(std::int32_t pose_word, double quantum, double cell) {
  const double ratio = cell / quantum;
  const double rounded = std::round(ratio);
  if (rounded >= 1.0 && std::abs(ratio - rounded) < 1e-9) {
    return floor_div(pose_word, static_cast<std::int64_t>(rounded));
  }
  return static_cast<std::int64_t>(std::floor(pose_word * quantum / cell));
}

std::size_t intersect_sorted(const std::vector<std::uint64_t>& a,
                             const std::vector<std::uint64_t>& b) {
  std::size_t i = 0, j = 0, n = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] == b[j]) {
      ++n;
      ++i;
      ++j;
    } else if (a[i] < b[j]) {
      ++i;
    } else {
      ++j;
    }
  }
  return n;
}

void check_compatible(const LocalMapDescriptor& x, const LocalMapDescriptor& y) {
  if (!(x.settings == y.settings)) {
    throw Error("descriptor settings differ between " + x.map_id.str() + " and " +
                y.map_id.str());
  }
}

}  // namespace

double PyramidConfig::weight(int level) const {
  if (bag_of_words) return 1.0;
  if (level == 0) return 1.0 / static_cast<double>(1 << levels);
  return 1.0 / static_cast<double>(1 << (levels - level + 1));
}

PyramidKeys pyramid_keys(const LocalMapDescriptor& lmd, const PyramidConfig& cfg) {
  const int level_count = cfg.bag_of_words ? 1 : cfg.levels + 1;
  PyramidKeys keys(static_cast<std::size_t>(level_count));
  const double q = lmd.settings.pose_quantum;
  for (int l = 0; l < level_count; ++l) {
    auto& level = keys[l];
    level.reserve(lmd.triples.size());
    for (const auto& t : lmd.triples) {
      if (cfg.bag_of_words) {
        level.push_back(pack_key(t.appearance, 0, 0));
      } else {
        const double cell = cfg.cell_size(l);
        level.push_back(pack_key(t.appearance, cell_index(t.x, q, cell), cell_index(t.y, q, cell)));
      }
    }
    std::sort(level.begin(), level.end());
  }
  return keys;
}

double pyramid_match(const PyramidKeys& a, const PyramidKeys& b, const PyramidConfig& cfg) {
  double k = 0.0;
  for (std::size_t l = 0; l < a.size() && l < b.size(); ++l) {
    k += cfg.weight(static_cast<int>(l)) * static_cast<double>(intersect_sorted(a[l], b[l]));
  }
  return k;
}

double spm_similarity(const LocalMapDescriptor& x, const LocalMapDescriptor& y,
                      const PyramidConfig& cfg) {
  check_compatible(x, y);
  return pyramid_match(pyramid_keys(x, cfg), pyramid_keys(y, cfg), cfg);
}

LocalMapDescriptor rotate_lmd(const LocalMapDescriptor& lmd, int quarter_turns) {
  if (quarter_turns < 0 || quarter_turns > 3) {
    throw Error("rotate_lmd: orientation must be in 0..3, got " + std::to_string(quarter_turns));
  }
  LocalMapDescriptor out = lmd;
  if (quarter_turns == 0) return out;
  out.orientation = (lmd.orientation + quarter_turns) % 4;
  for (std::size_t k = 0; k < out.positions.size(); ++k) {
    out.positions[k] = rotate_quarter_turns(lmd.positions[k], quarter_turns);
    const Eigen::Vector2i w = quantize_relative(out.positions[k], lmd.settings.pose_quantum);
    out.triples[k] = {lmd.appearance_turns[k][out.orientation], w.x(), w.y()};
    out.change_words[k] = lmd.change_turns[k][out.orientation];
  }
  return out;
}

Eigen::Vector2i estimate_offset(const LocalMapDescriptor& query, const LocalMapDescriptor& db) {
  if (query.triples.empty() || db.triples.empty()) return Eigen::Vector2i::Zero();
  std::vector<std::pair<AppearanceWord, std::uint32_t>> by_word;
  by_word.reserve(db.triples.size());
  for (std::size_t j = 0; j < db.triples.size(); ++j) {
    by_word.emplace_back(db.triples[j].appearance, static_cast<std::uint32_t>(j));
  }
  std::sort(by_word.begin(), by_word.end());

  auto bounds = [](const std::vector<WordTriple>& t) {
    Eigen::Vector2i lo = {t.front().x, t.front().y}, hi = lo;
    for (const auto& w : t) {
      lo = lo.cwiseMin(Eigen::Vector2i(w.x, w.y));
      hi = hi.cwiseMax(Eigen::Vector2i(w.x, w.y));
    }
    return std::pair{lo, hi};
  };
  const auto [qlo, qhi] = bounds(query.triples);
  const auto [dlo, dhi] = bounds(db.triples);
  const Eigen::Vector2i dmin = qlo - dhi;
  const Eigen::Vector2i span = (qhi - dlo) - dmin + Eigen::Vector2i::Ones();
  std::vector<std::uint32_t> hist(static_cast<std::size_t>(span.x()) * span.y(), 0);

  bool any = false;
  for (const auto& q : query.triples) {
    auto it = std::lower_bound(by_word.begin(), by_word.end(),
                               std::pair<AppearanceWord, std::uint32_t>{q.appearance, 0});
    for (; it != by_word.end() && it->first == q.appearance; ++it) {
      const WordTriple& d = db.triples[it->second];
      const int dx = q.x - d.x - dmin.x();
      const int dy = q.y - d.y - dmin.y();
      ++hist[static_cast<std::size_t>(dx) * span.y() + dy];
      any = true;
    }
  }
  if (!any) return Eigen::Vector2i::Zero();
  // Row-major scan over (dx, dy) keeps the lexicographically smallest mode.
  std::size_t best = 0;
  for (std::size_t i = 1; i < hist.size(); ++i) {
    if (hist[i] > hist[best]) best = i;
  }
  return {static_cast<int>(best / span.y()) + dmin.x(), static_cast<int>(best % span.y()) + dmin.y()};
}

MatchResult match_pair(const LocalMapDescriptor& query, const LocalMapDescriptor& db,
                       const PyramidConfig& cfg) {
  MatchResult r;
  r.map_id = db.map_id;
  r.score = -1.0;
  LocalMapDescriptor best;
  for (int t = 0; t < 4; ++t) {
    LocalMapDescriptor rotated = rotate_lmd(query, t);
    const double k = spm_similarity(rotated, db, cfg);
    if (k > r.score) {
      r.score = k;
      r.orientation = t;
      best = std::move(rotated);
    }
  }
  r.offset = estimate_offset(best, db);
  return r;
}

InvertedIndex::InvertedIndex(const LmdSettings& settings, const PyramidConfig& pyramid)
    : settings_(settings),
      pyramid_(pyramid),
      postings_(std::size_t{1} << settings.retrieval.bits) {
  if (pyramid.levels < 0 || pyramid.levels > 16 || !(pyramid.base_width > 0.0)) {
    throw Error("invalid pyramid config");
  }
}

const LocalMapDescriptor* InvertedIndex::find(const MapId& id) const {
  const auto it = ordinal_.find(id);
  return it == ordinal_.end() ? nullptr : &descriptors_[it->second];
}

std::size_t InvertedIndex::posting_count() const {
  std::size_t n = 0;
  for (const auto& p : postings_) n += p.size();
  return n;
}

void InvertedIndex::insert(LocalMapDescriptor lmd) {
  if (!(lmd.settings == settings_)) {
    throw Error("index_insert: descriptor settings of " + lmd.map_id.str() +
                " do not match the index");
  }
  if (ordinal_.count(lmd.map_id)) throw Error("index_insert: duplicate map " + lmd.map_id.str());
  const auto ordinal = static_cast<std::uint32_t>(descriptors_.size());
  for (std::size_t k = 0; k < lmd.triples.size(); ++k) {
    auto& list = postings_[lmd.triples[k].appearance];
    const Posting p{ordinal, static_cast<std::uint32_t>(k)};
    // Keep each list sorted by map id, then feature.
    auto pos = std::upper_bound(list.begin(), list.end(), p, [&](const Posting& a, const Posting& b) {
      const MapId& ia = a.map == ordinal ? lmd.map_id : descriptors_[a.map].map_id;
      const MapId& ib = b.map == ordinal ? lmd.map_id : descriptors_[b.map].map_id;
      if (ia != ib) return ia < ib;
      return a.feature < b.feature;
    });
    list.insert(pos, p);
  }
  ordinal_.emplace(lmd.map_id, ordinal);
  keys_.push_back(pyramid_keys(lmd, pyramid_));
  descriptors_.push_back(std::move(lmd));
}

std::vector<MatchResult> InvertedIndex::finish(std::vector<MatchResult> results,
                                               std::size_t top_k) const {
  std::sort(results.begin(), results.end(), [](const MatchResult& a, const MatchResult& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.map_id < b.map_id;
  });
  if (results.size() > top_k) results.resize(top_k);
  return results;
}

std::vector<MatchResult> InvertedIndex::query_ranked(const LocalMapDescriptor& query,
                                                     std::size_t top_k) const {
  if (descriptors_.empty()) return {};
  if (!(query.settings == settings_)) {
    throw Error("query: descriptor settings do not match the index");
  }
  std::array<LocalMapDescriptor, 4> rotated;
  std::array<PyramidKeys, 4> rotated_keys;
  std::vector<std::uint8_t> candidate(descriptors_.size(), 0);
  for (int t = 0; t < 4; ++t) {
    rotated[t] = rotate_lmd(query, t);
    rotated_keys[t] = pyramid_keys(rotated[t], pyramid_);
    for (const auto& triple : rotated[t].triples) {
      for (const auto& p : postings_[triple.appearance]) candidate[p.map] = 1;
    }
  }
  std::vector<MatchResult> results;
  for (std::size_t c = 0; c < descriptors_.size(); ++c) {
    if (!candidate[c]) continue;
    MatchResult r;
    r.map_id = descriptors_[c].map_id;
    r.score = -1.0;
    for (int t = 0; t < 4; ++t) {
      const double k = pyramid_match(rotated_keys[t], keys_[c], pyramid_);
      if (k > r.score) {
        r.score = k;
        r.orientation = t;
      }
    }
    if (r.score > 0.0) results.push_back(r);
  }
  results = finish(std::move(results), top_k);
  for (auto& r : results) {
    r.offset = estimate_offset(rotated[r.orientation], descriptors_[ordinal_.at(r.map_id)]);
  }
  return results;
}

std::vector<MatchResult> InvertedIndex::query_exhaustive(const LocalMapDescriptor& query,
                                                         std::size_t top_k) const {
  std::vector<MatchResult> results;
  for (const auto& db : descriptors_) {
    MatchResult r;
    r.map_id = db.map_id;
    r.score = -1.0;
    for (int t = 0; t < 4; ++t) {
      const double k = spm_similarity(rotate_lmd(query, t), db, pyramid_);
      if (k > r.score) {
        r.score = k;
        r.orientation = t;
      }
    }
    if (r.score > 0.0) results.push_back(r);
  }
  results = finish(std::move(results), top_k);
  for (auto& r : results) {
    r.offset = estimate_offset(rotate_lmd(query, r.orientation), *find(r.map_id));
  }
  return results;
}

}  // namespace lmd
