#include "lmd/change_detect.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>

namespace lmd {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Uniform bucket grid for exact K nearest neighbor queries.
class KnnGrid {
 public:
  explicit KnnGrid(const PointList& points) : points_(points) {
    lo_ = hi_ = points.front();
    for (const auto& p : points) {
      lo_ = lo_.cwiseMin(p);
      hi_ = hi_.cwiseMax(p);
    }
    const double extent = std::max((hi_ - lo_).maxCoeff(), 1e-9);
    const double per_side = std::max(1.0, std::sqrt(static_cast<double>(points.size()) / 2.0));
    cell_ = extent / per_side;
    nx_ = static_cast<int>(std::floor((hi_.x() - lo_.x()) / cell_)) + 1;
    ny_ = static_cast<int>(std::floor((hi_.y() - lo_.y()) / cell_)) + 1;
    start_.assign(static_cast<std::size_t>(nx_) * ny_ + 1, 0);
    std::vector<std::size_t> key(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
      const auto c = cell_of(points[i]);
      key[i] = static_cast<std::size_t>(c.second) * nx_ + c.first;
      ++start_[key[i] + 1];
    }
    for (std::size_t k = 1; k < start_.size(); ++k) start_[k] += start_[k - 1];
    order_.resize(points.size());
    std::vector<std::uint32_t> fill(start_.begin(), start_.end() - 1);
    for (std::size_t i = 0; i < points.size(); ++i) order_[fill[key[i]]++] = static_cast<std::uint32_t>(i);
  }

  // The k nearest neighbors of points[self], sorted by (distance, index).
  std::vector<std::pair<double, std::uint32_t>> knn(std::size_t self, int k) const {
    const Point2& p = points_[self];
    const auto [cx, cy] = cell_of(p);
    std::vector<std::pair<double, std::uint32_t>> found;
    const int max_ring = std::max(nx_, ny_);
    for (int ring = 0; ring <= max_ring; ++ring) {
      for (int y = cy - ring; y <= cy + ring; ++y) {
        if (y < 0 || y >= ny_) continue;
        const bool edge_row = (y == cy - ring || y == cy + ring);
        for (int x = cx - ring; x <= cx + ring; x += edge_row ? 1 : 2 * std::max(ring, 1)) {
          if (x >= 0 && x < nx_) {
            const std::size_t key = static_cast<std::size_t>(y) * nx_ + x;
            for (std::uint32_t i = start_[key]; i < start_[key + 1]; ++i) {
              const std::uint32_t j = order_[i];
              if (j == self) continue;
              found.emplace_back((points_[j] - p).norm(), j);
            }
          }
          if (ring == 0) break;
        }
      }
      if (found.size() >= static_cast<std::size_t>(k)) {
        std::nth_element(found.begin(), found.begin() + (k - 1), found.end());
        if (found[k - 1].first < ring * cell_) break;
      }
    }
    std::sort(found.begin(), found.end());
    found.resize(static_cast<std::size_t>(k));
    return found;
  }

 private:
  std::pair<int, int> cell_of(const Point2& p) const {
    return {std::clamp(static_cast<int>(std::floor((p.x() - lo_.x()) / cell_)), 0, nx_ - 1),
            std::clamp(static_cast<int>(std::floor((p.y() - lo_.y()) / cell_)), 0, ny_ - 1)};
  }

  const PointList& points_;
  Point2 lo_, hi_;
  double cell_ = 1.0;
  int nx_ = 1, ny_ = 1;
  std::vector<std::uint32_t> start_;
  std::vector<std::uint32_t> order_;
};

int hamming(ChangeWord a, ChangeWord b) { return std::popcount(a ^ b); }

}  // namespace

void DetectorConfig::validate() const {
  if (lof_neighbors < 1 || !(lof_threshold > 0.0) || !(nnd_threshold >= 0.0) ||
      !(window_half_width > 0.0)) {
    throw Error("invalid detector config");
  }
}

std::vector<double> lof_scores(const PointList& points, int k) {
  if (k < 1) throw Error("lof_scores: k must be positive");
  if (points.size() <= static_cast<std::size_t>(k)) {
    throw Error("lof_scores: need more than " + std::to_string(k) + " points, got " +
                std::to_string(points.size()));
  }
  const std::size_t n = points.size();
  const KnnGrid grid(points);
  std::vector<std::vector<std::pair<double, std::uint32_t>>> nn(n);
  std::vector<double> kdist(n);
  for (std::size_t i = 0; i < n; ++i) {
    nn[i] = grid.knn(i, k);
    kdist[i] = nn[i].back().first;
  }
  // Mean reachability distance; the local reachability density is its reciprocal.
  std::vector<double> mean_reach(n);
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    for (const auto& [d, j] : nn[i]) sum += std::max(kdist[j], d);
    mean_reach[i] = sum / k;
  }
  std::vector<double> lof(n);
  for (std::size_t i = 0; i < n; ++i) {
    // lrd(o) / lrd(p) = mean_reach(p) / mean_reach(o), with coincident points
    // (zero reach) handled explicitly.
    double sum = 0.0;
    for (const auto& [d, j] : nn[i]) {
      if (mean_reach[j] == 0.0) {
        sum += mean_reach[i] == 0.0 ? 1.0 : kInf;
      } else {
        sum += mean_reach[i] / mean_reach[j];
      }
    }
    lof[i] = sum / k;
  }
  return lof;
}

std::vector<std::size_t> filter_outliers(const LocalMapDescriptor& query, const DetectorConfig& cfg) {
  std::vector<std::size_t> keep;
  if (query.positions.size() <= static_cast<std::size_t>(cfg.lof_neighbors)) {
    for (std::size_t i = 0; i < query.positions.size(); ++i) keep.push_back(i);
    return keep;
  }
  const auto lof = lof_scores(query.positions, cfg.lof_neighbors);
  for (std::size_t i = 0; i < lof.size(); ++i) {
    if (!(lof[i] > cfg.lof_threshold)) keep.push_back(i);
  }
  return keep;
}

NnDetector::NnDetector(const LocalMapDescriptor& db, const Eigen::Vector2i& offset,
                       const DetectorConfig& cfg)
    : db_(db), cfg_(cfg) {
  cfg.validate();
  const Point2 shift = offset.cast<double>() * db.settings.pose_quantum;
  positions_.reserve(db.positions.size());
  for (const auto& p : db.positions) positions_.push_back(p + shift);
  if (positions_.empty()) return;
  const double w = cfg_.window_half_width;
  std::int64_t max_bx = 0, max_by = 0;
  std::vector<std::pair<std::int64_t, std::int64_t>> b;
  for (std::size_t i = 0; i < positions_.size(); ++i) {
    const auto bx = static_cast<std::int64_t>(std::floor(positions_[i].x() / w));
    const auto by = static_cast<std::int64_t>(std::floor(positions_[i].y() / w));
    if (i == 0) {
      min_bx_ = max_bx = bx;
      min_by_ = max_by = by;
    }
    min_bx_ = std::min(min_bx_, bx);
    min_by_ = std::min(min_by_, by);
    max_bx = std::max(max_bx, bx);
    max_by = std::max(max_by, by);
    b.emplace_back(bx, by);
  }
  span_x_ = max_bx - min_bx_ + 1;
  span_y_ = max_by - min_by_ + 1;
  bucket_start_.assign(static_cast<std::size_t>(span_x_ * span_y_) + 1, 0);
  for (const auto& [bx, by] : b) ++bucket_start_[static_cast<std::size_t>(bucket_key(bx, by)) + 1];
  for (std::size_t k = 1; k < bucket_start_.size(); ++k) bucket_start_[k] += bucket_start_[k - 1];
  order_.resize(positions_.size());
  std::vector<std::uint32_t> fill(bucket_start_.begin(), bucket_start_.end() - 1);
  for (std::size_t i = 0; i < b.size(); ++i) {
    order_[fill[static_cast<std::size_t>(bucket_key(b[i].first, b[i].second))]++] =
        static_cast<std::uint32_t>(i);
  }
}

std::int64_t NnDetector::bucket_key(std::int64_t bx, std::int64_t by) const {
  return (bx - min_bx_) * span_y_ + (by - min_by_);
}

NnDetector::Neighbor NnDetector::nearest(ChangeWord word, const Point2& predicted,
                                         std::ptrdiff_t exclude) const {
  Neighbor best;
  if (positions_.empty()) return best;
  const double w = cfg_.window_half_width;
  double best_d2 = kInf;
  const auto bx0 = std::max(min_bx_, static_cast<std::int64_t>(std::floor((predicted.x() - w) / w)));
  const auto bx1 = std::min(min_bx_ + span_x_ - 1,
                            static_cast<std::int64_t>(std::floor((predicted.x() + w) / w)));
  const auto by0 = std::max(min_by_, static_cast<std::int64_t>(std::floor((predicted.y() - w) / w)));
  const auto by1 = std::min(min_by_ + span_y_ - 1,
                            static_cast<std::int64_t>(std::floor((predicted.y() + w) / w)));
  for (auto bx = bx0; bx <= bx1; ++bx) {
    for (auto by = by0; by <= by1; ++by) {
      const auto key = static_cast<std::size_t>(bucket_key(bx, by));
      for (std::uint32_t i = bucket_start_[key]; i < bucket_start_[key + 1]; ++i) {
        const std::uint32_t j = order_[i];
        if (static_cast<std::ptrdiff_t>(j) == exclude) continue;
        const Point2 d = positions_[j] - predicted;
        if (std::abs(d.x()) > w || std::abs(d.y()) > w) continue;
        const int h = hamming(word, db_.change_words[j]);
        const double d2 = d.squaredNorm();
        if (best.index < 0 || h < best.hamming || (h == best.hamming && d2 < best_d2) ||
            (h == best.hamming && d2 == best_d2 && static_cast<std::ptrdiff_t>(j) < best.index)) {
          best = {static_cast<std::ptrdiff_t>(j), h};
          best_d2 = d2;
        }
      }
    }
  }
  return best;
}

double NnDetector::score(ChangeWord word, const Point2& predicted) const {
  const Neighbor first = nearest(word, predicted);
  if (first.index < 0) return kInf;
  const auto o = static_cast<std::size_t>(first.index);
  const Neighbor second = nearest(db_.change_words[o], positions_[o], first.index);
  const int denominator = second.index < 0 ? 0 : second.hamming;
  if (denominator == 0) return first.hamming == 0 ? 0.0 : kInf;
  return static_cast<double>(first.hamming) / denominator;
}

double nn_d_score(const LocalMapDescriptor& query, std::size_t feature,
                  const LocalMapDescriptor& db, const Eigen::Vector2i& offset,
                  const DetectorConfig& cfg) {
  const NnDetector detector(db, offset, cfg);
  return detector.score(query.change_words.at(feature), query.positions.at(feature));
}

std::vector<AnomalyScore> score_features(const LocalMapDescriptor& query,
                                         const LocalMapDescriptor& db,
                                         const Eigen::Vector2i& offset, const DetectorConfig& cfg) {
  cfg.validate();
  std::vector<AnomalyScore> scores(query.size());
  std::vector<double> lof;
  if (query.positions.size() > static_cast<std::size_t>(cfg.lof_neighbors)) {
    lof = lof_scores(query.positions, cfg.lof_neighbors);
  }
  const NnDetector detector(db, offset, cfg);
  for (std::size_t k = 0; k < query.size(); ++k) {
    AnomalyScore& s = scores[k];
    s.feature = k;
    s.lof = lof.empty() ? 1.0 : lof[k];
    s.is_outlier = s.lof > cfg.lof_threshold;
    s.nnd = detector.score(query.change_words[k], query.positions[k]);
    s.is_change = !s.is_outlier && s.nnd > cfg.nnd_threshold;
  }
  return scores;
}

ChangeMask detect_changes(const LocalMapDescriptor& query, const LocalMapDescriptor& db,
                          const Eigen::Vector2i& offset, double pair_score,
                          const DetectorConfig& cfg) {
  ChangeMask mask;
  mask.query_id = query.map_id;
  mask.db_id = db.map_id;
  mask.rank_score = pair_score;
  for (const auto& s : score_features(query, db, offset, cfg)) {
    if (s.is_change) mask.points.push_back({s.feature, query.map_position(s.feature), s.nnd});
  }
  std::sort(mask.points.begin(), mask.points.end(), [](const FlaggedPoint& a, const FlaggedPoint& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.feature < b.feature;
  });
  return mask;
}

ChangeMask detect_changes(const LocalMapDescriptor& query, const LocalMapDescriptor& db,
                          const MatchResult& match, const DetectorConfig& cfg) {
  return detect_changes(rotate_lmd(query, match.orientation), db, match.offset, match.score, cfg);
}

std::vector<ChangeMask> rank_change_masks(std::vector<ChangeMask> masks) {
  std::erase_if(masks, [](const ChangeMask& m) { return m.empty(); });
  std::stable_sort(masks.begin(), masks.end(), [](const ChangeMask& a, const ChangeMask& b) {
    if (a.rank_score != b.rank_score) return a.rank_score > b.rank_score;
    return a.db_id < b.db_id;
  });
  return masks;
}

}  // namespace lmd
