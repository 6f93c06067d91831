#ifndef LMD_MAP_INGEST_H_
#define LMD_MAP_INGEST_H_

#include <cstdint>
#include <istream>
#include <vector>

#include <Eigen/Core>

#include "lmd/common.h"

namespace lmd {

// Readings outside (kMinValidRange, kMaxValidRange) are treated as invalid.
inline constexpr double kMinValidRange = 0.05;
inline constexpr double kMaxValidRange = 50.0;

struct ScanRecord {
  Pose2 pose;
  std::vector<double> ranges;
  double angle_min = 0.0;
  double angle_increment = 0.0;
  double timestamp = 0.0;

  static bool is_valid_range(double r) {
    return r > kMinValidRange && r < kMaxValidRange;
  }
  double bearing(std::size_t beam) const {
    return angle_min + static_cast<double>(beam) * angle_increment;
  }
  // World-frame endpoint of a beam.
  Point2 endpoint(std::size_t beam) const;
};

// A pointset built from a fixed-length run of the trajectory.
struct LocalMap {
  MapId id;
  PointList points;
  // point_pose[k] is the trajectory index of the pose that observed points[k].
  std::vector<std::uint32_t> point_pose;
  std::vector<Pose2> trajectory;
  double arc_start = 0.0;
  double arc_end = 0.0;

  bool empty() const { return points.empty(); }
};

// Returns a copy with points and poses rotated by -theta about the origin.
LocalMap align_local_map(const LocalMap& map, double theta);

// Parses CARMEN FLASER lines. Other message types are skipped.
// Throws ParseError naming the offending line.
std::vector<ScanRecord> parse_carmen_log(std::istream& stream);

// Cumulative trajectory arclength at each scan.
std::vector<double> trajectory_arclength(const std::vector<ScanRecord>& scans);

// Cuts the trajectory into windows of window_m arclength every stride_m.
// Windows running past the end of the trajectory are dropped.
std::vector<LocalMap> segment_local_maps(const std::vector<ScanRecord>& scans,
                                         double window_m = 5.0,
                                         double stride_m = 1.0,
                                         const std::string& dataset = "log");

enum class CellLabel : std::uint8_t { kUnknown = 0, kUnoccupied = 1, kOccupied = 2 };

class OccupancyGrid {
 public:
  OccupancyGrid() = default;
  OccupancyGrid(double resolution, const Point2& origin, int width, int height);

  double resolution() const { return resolution_; }
  const Point2& origin() const { return origin_; }
  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return labels_.size(); }

  bool contains(int ix, int iy) const {
    return ix >= 0 && iy >= 0 && ix < width_ && iy < height_;
  }
  std::size_t linear(int ix, int iy) const {
    return static_cast<std::size_t>(iy) * width_ + ix;
  }
  // Cell containing a world point (may lie outside the grid).
  Eigen::Vector2i cell_of(const Point2& p) const;
  Point2 cell_center(int ix, int iy) const;

  CellLabel label(int ix, int iy) const { return labels_[linear(ix, iy)]; }
  std::uint32_t count(int ix, int iy) const { return counts_[linear(ix, iy)]; }
  void set_label(int ix, int iy, CellLabel l) { labels_[linear(ix, iy)] = l; }
  void add_hit(int ix, int iy) { ++counts_[linear(ix, iy)]; }

  bool occupied(int ix, int iy) const {
    return contains(ix, iy) && label(ix, iy) == CellLabel::kOccupied;
  }
  bool unoccupied(int ix, int iy) const {
    return contains(ix, iy) && label(ix, iy) == CellLabel::kUnoccupied;
  }

  std::size_t count_label(CellLabel l) const;
  // Occupied cells in row-major order.
  std::vector<Eigen::Vector2i> occupied_cells() const;

 private:
  double resolution_ = 0.1;
  Point2 origin_ = Point2::Zero();
  int width_ = 0;
  int height_ = 0;
  std::vector<CellLabel> labels_;
  std::vector<std::uint32_t> counts_;
};

// Rasterizes beams pose -> endpoint. The grid covers the bounding box of
// points and poses padded by one cell.
OccupancyGrid rasterize_occupancy(const LocalMap& map, double resolution = 0.1,
                                  std::uint32_t hit_threshold = 1);

// Same, on a caller-provided grid geometry. Beams leaving the grid are clipped.
OccupancyGrid rasterize_occupancy(const LocalMap& map, double resolution,
                                  const Point2& origin, int width, int height,
                                  std::uint32_t hit_threshold = 1);

}  // namespace lmd

#endif  // LMD_MAP_INGEST_H_
