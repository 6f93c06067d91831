#ifndef LMD_DESCRIPTOR_H_
#define LMD_DESCRIPTOR_H_

#include <array>
#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "lmd/common.h"
#include "lmd/map_ingest.h"
#include "lmd/viewpoint_planner.h"

namespace lmd {

inline constexpr std::uint64_t kDefaultProjectionSeed = 0x4c4d44;

// Shell-sector interest region. Shell i covers [r_{i-1}, r_i) with
// r_i = (i / shells) * radius; sector 0 starts at +x and runs counterclockwise.
struct DescriptorConfig {
  double radius = 1.0;
  int sectors = 1;
  int shells = 10;
  double fine_resolution = 0.01;
  int bits = 10;
  std::uint64_t seed = kDefaultProjectionSeed;

  int dimension() const { return shells * sectors; }
  double shell_radius(int i) const { return radius * i / shells; }
  void validate() const;
  bool operator==(const DescriptorConfig&) const = default;
};

// Retrieval descriptor #1..#8, (R, A) in {(1,1),(6,3),(12,6),(1,6),(3,6),(6,6),(3,1),(6,1)}.
DescriptorConfig retrieval_config(int id);
inline constexpr int kRetrievalConfigCount = 8;

// 60-dim descriptor for change words: R = 6 m, 6 shells, 10 sectors.
DescriptorConfig change_config();

using AppearanceDescriptor = Eigen::VectorXd;

// Map points deduplicated on a fine grid and bucketed for radius queries.
// Each occupied fine cell is represented by the first point that fell into it.
class FineOccupancy {
 public:
  FineOccupancy(const PointList& points, double fine_resolution, const Point2& anchor,
                double bucket_size = 1.0);

  std::size_t size() const { return cells_.size(); }
  const PointList& cells() const { return cells_; }

  template <typename Visit>
  void for_each_within(const Point2& center, double radius, Visit&& visit) const;

 private:
  std::int64_t bucket_key(std::int64_t bx, std::int64_t by) const {
    return (bx - min_bx_) * span_y_ + (by - min_by_);
  }

  double bucket_size_;
  Point2 anchor_;
  PointList cells_;
  std::int64_t min_bx_ = 0, min_by_ = 0, span_x_ = 0, span_y_ = 0;
  // Bucket start offsets into order_ (CSR layout).
  std::vector<std::uint32_t> bucket_start_;
  std::vector<std::uint32_t> order_;
};

// Descriptor at center over the given points (the frame is that of the
// points). quarter_turns rotates the sector origin by that many +90 degrees,
// i.e. yields the descriptor the neighborhood would have after being rotated
// counterclockwise by that amount.
AppearanceDescriptor compute_appearance_descriptor(const Point2& center, const PointList& points,
                                                   const DescriptorConfig& config,
                                                   int quarter_turns = 0);

// All four quarter-turn variants over a prebuilt fine grid.
std::array<AppearanceDescriptor, 4> compute_appearance_descriptors(const Point2& center,
                                                                   const FineOccupancy& fine,
                                                                   const DescriptorConfig& config);

class ProjectionMatrix {
 public:
  ProjectionMatrix() = default;
  ProjectionMatrix(std::uint64_t seed, int bits, int dimension);
  explicit ProjectionMatrix(const DescriptorConfig& config)
      : ProjectionMatrix(config.seed, config.bits, config.dimension()) {}

  int bits() const { return static_cast<int>(entries_.rows()); }
  int dimension() const { return static_cast<int>(entries_.cols()); }
  std::uint64_t seed() const { return seed_; }
  const Eigen::MatrixXd& entries() const { return entries_; }

 private:
  std::uint64_t seed_ = 0;
  Eigen::MatrixXd entries_;
};

using AppearanceWord = std::uint16_t;
using ChangeWord = std::uint64_t;

// Sign binarization of the projected descriptor; y_k <= 0 gives bit 0.
AppearanceWord project_to_word(const AppearanceDescriptor& d, const ProjectionMatrix& p);

// Bit k set iff entry k exceeds the mean of all entries.
ChangeWord binarize_change_descriptor(const AppearanceDescriptor& d);

// Quantized viewpoint-relative coordinates.
Eigen::Vector2i quantize_relative(const Point2& relative, double quantum);
Eigen::Vector2i quantize_pose(const Point2& p, const Viewpoint& vp, double quantum = 0.25);

// Occupied cell centers, one per 2x2 cell bucket; the first in row-major order
// wins. Returned in the grid's frame.
PointList select_interest_points(const OccupancyGrid& grid);

struct WordTriple {
  AppearanceWord appearance = 0;
  std::int32_t x = 0;
  std::int32_t y = 0;

  bool operator==(const WordTriple&) const = default;
};

struct LmdSettings {
  int descriptor_id = 1;
  DescriptorConfig retrieval = retrieval_config(1);
  DescriptorConfig change = change_config();
  double pose_quantum = 0.25;

  static LmdSettings for_descriptor(int id, double pose_quantum = 0.25);
  bool operator==(const LmdSettings&) const = default;
};

struct LocalMapDescriptor {
  MapId map_id;
  Viewpoint viewpoint;
  LmdSettings settings;
  // Quarter turns applied to the relative frame since encoding.
  int orientation = 0;
  std::vector<WordTriple> triples;
  std::vector<ChangeWord> change_words;
  // Viewpoint-relative feature positions under the current orientation.
  PointList positions;
  // Words for each absolute quarter turn; [0] is the encoded orientation.
  std::vector<std::array<AppearanceWord, 4>> appearance_turns;
  std::vector<std::array<ChangeWord, 4>> change_turns;

  std::size_t size() const { return triples.size(); }
  // Feature position in the source map frame.
  Point2 map_position(std::size_t k) const {
    return viewpoint.to_map(rotate_quarter_turns(positions[k], -orientation));
  }
};

// Encodes a map (given in its own frame) relative to a planned viewpoint.
LocalMapDescriptor build_lmd(const LocalMap& map, const Viewpoint& vp, const LmdSettings& settings,
                             const ProjectionMatrix& projection);

// Viewpoint planning followed by build_lmd.
LocalMapDescriptor encode_local_map(const LocalMap& map, const PlannerSettings& planner,
                                    const LmdSettings& settings,
                                    const ProjectionMatrix& projection);

// Implementation of FineOccupancy::for_each_within.
template <typename Visit>
void FineOccupancy::for_each_within(const Point2& center, double radius, Visit&& visit) const {
  if (cells_.empty()) return;
  const Point2 rel = center - anchor_;
  const auto bx0 = std::max<std::int64_t>(
      min_bx_, static_cast<std::int64_t>(std::floor((rel.x() - radius) / bucket_size_)));
  const auto bx1 = std::min<std::int64_t>(
      min_bx_ + span_x_ - 1, static_cast<std::int64_t>(std::floor((rel.x() + radius) / bucket_size_)));
  const auto by0 = std::max<std::int64_t>(
      min_by_, static_cast<std::int64_t>(std::floor((rel.y() - radius) / bucket_size_)));
  const auto by1 = std::min<std::int64_t>(
      min_by_ + span_y_ - 1, static_cast<std::int64_t>(std::floor((rel.y() + radius) / bucket_size_)));
  for (std::int64_t bx = bx0; bx <= bx1; ++bx) {
    for (std::int64_t by = by0; by <= by1; ++by) {
      const auto key = static_cast<std::size_t>(bucket_key(bx, by));
      for (std::uint32_t i = bucket_start_[key]; i < bucket_start_[key + 1]; ++i) {
        const Point2& p = cells_[order_[i]];
        if ((p - center).squaredNorm() < radius * radius) visit(p);
      }
    }
  }
}

}  // namespace lmd

#endif  // LMD_DESCRIPTOR_H_
