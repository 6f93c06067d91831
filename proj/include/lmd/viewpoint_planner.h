#ifndef LMD_VIEWPOINT_PLANNER_H_
#define LMD_VIEWPOINT_PLANNER_H_

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "lmd/common.h"
#include "lmd/map_ingest.h"

namespace lmd {

// Dominant direction of a quasi-Manhattan scene, folded into [0, pi/2).
struct SceneFrame {
  double theta = 0.0;
};

enum class WallAxis : std::uint8_t { kX, kY };

// A run of occupied cells along one grid row (kX) or column (kY).
struct WallPrimitive {
  WallAxis axis = WallAxis::kX;
  double line_coordinate = 0.0;  // y of the row or x of the column, cell center
  double start = 0.0;
  double end = 0.0;
  std::vector<Eigen::Vector2i> cells;
};

struct WallParse {
  std::vector<WallPrimitive> walls;
  // Occupied cells that belong to no run.
  std::vector<Eigen::Vector2i> isolated_cells;
};

// Inclusive cell rectangle of unoccupied cells.
struct RoomSample {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;

  int area() const { return (x1 - x0 + 1) * (y1 - y0 + 1); }
};

enum class PlannerMethod : std::uint8_t { kCoG, kCoR };

std::string to_string(PlannerMethod m);
PlannerMethod planner_method_from_string(const std::string& s);

struct Viewpoint {
  Point2 position = Point2::Zero();  // map frame
  SceneFrame frame;
  PlannerMethod method = PlannerMethod::kCoG;

  // Map-frame point to viewpoint-relative coordinates.
  Point2 to_local(const Point2& p) const { return rotate(p - position, -frame.theta); }
  Point2 to_map(const Point2& local) const { return rotate(local, frame.theta) + position; }
};

struct PlannerSettings {
  PlannerMethod method = PlannerMethod::kCoG;
  std::uint64_t seed = 0;
  int room_samples = 500;
  double resolution = 0.1;
  double dominance = 0.9;
};

inline constexpr std::size_t kMinOrientationPoints = 10;

// Sum of the Shannon entropies of the x and y projection histograms of the
// points rotated by -theta. Bins are bin_size wide and anchored at the
// rotated centroid.
double projection_entropy(const PointList& points, double theta, double bin_size = 0.1);

// 1 degree grid search for the entropy minimizing orientation.
SceneFrame estimate_dominant_orientation(const PointList& points);

// Row and column runs of >= 3 occupied cells, bridging single-cell gaps.
// The grid is expected to be axis aligned already.
WallParse parse_walls(const OccupancyGrid& grid, const SceneFrame& frame);

// The grid is in the aligned frame; the returned position is rotated back
// into the map frame.
Viewpoint plan_viewpoint_cog(const OccupancyGrid& grid, const SceneFrame& frame);

// Seed-and-grow room sampling.
std::vector<RoomSample> sample_rooms(const OccupancyGrid& grid, int count, std::uint64_t seed);

// Dominant room cells given per-cell room membership. The threshold factor is
// relaxed by 0.05 until the set is non-empty.
std::vector<Eigen::Vector2i> dominant_room_cells(const OccupancyGrid& grid,
                                                 const std::vector<std::uint32_t>& membership,
                                                 double dominance = 0.9);

Viewpoint plan_viewpoint_cor(const OccupancyGrid& grid, const SceneFrame& frame,
                             std::uint64_t seed, int room_samples = 500,
                             double dominance = 0.9);

struct PlannedMap {
  SceneFrame frame;
  OccupancyGrid aligned_grid;
  Viewpoint viewpoint;
};

// Orientation estimate, alignment, rasterization and viewpoint planning.
PlannedMap plan_viewpoint(const LocalMap& map, const PlannerSettings& settings);

}  // namespace lmd

#endif  // LMD_VIEWPOINT_PLANNER_H_
