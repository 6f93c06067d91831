#ifndef LMD_CHANGE_DETECT_H_
#define LMD_CHANGE_DETECT_H_

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "lmd/descriptor.h"
#include "lmd/retrieval.h"

namespace lmd {

struct DetectorConfig {
  int lof_neighbors = 10;
  double lof_threshold = 1.6;
  double nnd_threshold = 1.5;
  // Search box is [-w, w] x [-w, w] around the predicted location.
  double window_half_width = 3.0;

  void validate() const;
};

struct AnomalyScore {
  std::size_t feature = 0;
  double lof = 1.0;
  double nnd = 0.0;
  bool is_outlier = false;
  bool is_change = false;
};

struct FlaggedPoint {
  std::size_t feature = 0;
  Point2 position = Point2::Zero();  // query map frame
  double score = 0.0;                // NN-d ratio
};

struct ChangeMask {
  MapId query_id;
  MapId db_id;
  double rank_score = 0.0;
  // Sorted by score descending, then feature index.
  std::vector<FlaggedPoint> points;

  bool empty() const { return points.empty(); }
};

// Local outlier factor with the K nearest neighbors (ties by index).
// Throws if there are not more than k points.
std::vector<double> lof_scores(const PointList& points, int k);

// Indices of features whose LOF does not exceed the threshold. All features
// survive when there are too few for LOF.
std::vector<std::size_t> filter_outliers(const LocalMapDescriptor& query, const DetectorConfig& cfg);

// Windowed 1-NN search over database change words. Database positions are
// shifted by offset pose quanta before gating.
class NnDetector {
 public:
  NnDetector(const LocalMapDescriptor& db, const Eigen::Vector2i& offset, const DetectorConfig& cfg);

  // Nearest database feature to a query word around a predicted position,
  // excluding one index if given. Returns -1 if the window is empty.
  struct Neighbor {
    std::ptrdiff_t index = -1;
    int hamming = 0;
  };
  Neighbor nearest(ChangeWord word, const Point2& predicted,
                   std::ptrdiff_t exclude = -1) const;

  // NN-d ratio r(p); +inf when the window is empty or the denominator is 0
  // with a positive numerator, and 0 when both are 0.
  double score(ChangeWord word, const Point2& predicted) const;

  const PointList& shifted_positions() const { return positions_; }

 private:
  std::int64_t bucket_key(std::int64_t bx, std::int64_t by) const;

  const LocalMapDescriptor& db_;
  DetectorConfig cfg_;
  PointList positions_;
  std::int64_t min_bx_ = 0, min_by_ = 0, span_x_ = 0, span_y_ = 0;
  std::vector<std::uint32_t> bucket_start_;
  std::vector<std::uint32_t> order_;
};

double nn_d_score(const LocalMapDescriptor& query, std::size_t feature,
                  const LocalMapDescriptor& db, const Eigen::Vector2i& offset,
                  const DetectorConfig& cfg);

// Scores every query feature. The query must already carry the chosen
// orientation and offset is the estimated pose word offset.
std::vector<AnomalyScore> score_features(const LocalMapDescriptor& query,
                                         const LocalMapDescriptor& db,
                                         const Eigen::Vector2i& offset, const DetectorConfig& cfg);

ChangeMask detect_changes(const LocalMapDescriptor& query, const LocalMapDescriptor& db,
                          const Eigen::Vector2i& offset, double pair_score,
                          const DetectorConfig& cfg);

// Applies the orientation and offset of a retrieval result.
ChangeMask detect_changes(const LocalMapDescriptor& query, const LocalMapDescriptor& db,
                          const MatchResult& match, const DetectorConfig& cfg);

// Non-empty masks by rank score descending, then database map id.
std::vector<ChangeMask> rank_change_masks(std::vector<ChangeMask> masks);

}  // namespace lmd

#endif  // LMD_CHANGE_DETECT_H_
