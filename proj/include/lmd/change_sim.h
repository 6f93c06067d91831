#ifndef LMD_CHANGE_SIM_H_
#define LMD_CHANGE_SIM_H_

#include <cstdint>
#include <vector>

#include "lmd/common.h"
#include "lmd/map_ingest.h"

namespace lmd {

// Axis-aligned rectangle.
struct Rect {
  Point2 min = Point2::Zero();
  Point2 max = Point2::Zero();

  Point2 size() const { return max - min; }
  bool contains(const Point2& p) const {
    return p.x() >= min.x() && p.x() <= max.x() && p.y() >= min.y() && p.y() <= max.y();
  }
  bool contains(const Rect& r) const { return contains(r.min) && contains(r.max); }
};

// Region and objects are axis aligned in the scene frame rotated by theta.
struct ChangeRegion {
  Rect rect;
  double theta = 0.0;
};

struct VirtualObject {
  Rect rect;
};

struct ChangeSimConfig {
  double region_min = 1.0;
  double region_max = 2.0;
  int objects_min = 1;
  int objects_max = 5;
  double object_min = 0.2;
  double object_max = 0.6;
  // Objects keep this clearance from every trajectory pose.
  double pose_clearance = 0.3;
  int max_attempts = 100;
};

struct SimulatedChange {
  LocalMap map;
  ChangeRegion region;
  std::vector<VirtualObject> objects;
  std::vector<std::size_t> modified;  // indices into map.points
  PointList ground_truth;             // modified endpoints, map frame
  int attempts = 0;
};

// Distance along a ray to the first object boundary, or +inf.
double ray_hit_distance(const Point2& origin, const Point2& direction,
                        const std::vector<VirtualObject>& objects);

// Range of a beam after objects are placed: shortened if the beam hits an
// object in front of its original endpoint, unchanged otherwise. The bearing
// is relative to the pose heading and objects share the pose's frame.
double ray_trace(const Pose2& pose, double range, double bearing,
                 const std::vector<VirtualObject>& objects);

// Places a random change region with virtual objects and re-traces every
// beam. Retries until at least one beam is modified.
SimulatedChange inject_change(const LocalMap& map, std::uint64_t seed,
                              const ChangeSimConfig& cfg = {});

}  // namespace lmd

#endif  // LMD_CHANGE_SIM_H_
