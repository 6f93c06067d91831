#ifndef LMD_SYNTHETIC_WORLD_H_
#define LMD_SYNTHETIC_WORLD_H_

#include <cstdint>
#include <ostream>
#include <vector>

#include "lmd/common.h"
#include "lmd/map_ingest.h"

namespace lmd {

struct Segment {
  Point2 a = Point2::Zero();
  Point2 b = Point2::Zero();
};

// A rectangular corridor loop lined with rooms, traversed several times.
struct SyntheticWorldConfig {
  double loop_width = 30.0;   // corridor centerline extent along x
  double loop_height = 18.0;  // and along y
  double corridor_width = 2.0;
  double room_min_width = 2.5;
  double room_max_width = 6.0;
  double room_min_depth = 2.5;
  double room_max_depth = 4.5;
  double door_width = 0.9;
  double laps = 2.2;
  double step = 0.2;          // trajectory spacing between scans (m)
  double lap_offset = 0.25;   // lateral shift alternates sign per lap (m)
  int beams = 180;
  double range_noise = 0.01;
};

struct SyntheticWorld {
  std::vector<Segment> walls;
  std::vector<Pose2> trajectory;
};

SyntheticWorld make_synthetic_world(std::uint64_t seed, const SyntheticWorldConfig& cfg = {});

// Simulated 180 degree laser scans along the trajectory. Ranges are rounded
// to millimeters so a written log parses back to identical scans.
std::vector<ScanRecord> simulate_scans(const SyntheticWorld& world, std::uint64_t seed,
                                       const SyntheticWorldConfig& cfg = {});

// Distance to the first wall along a ray, or +inf.
double cast_ray(const std::vector<Segment>& walls, const Point2& origin, const Point2& direction);

void write_carmen_log(std::ostream& os, const std::vector<ScanRecord>& scans);

}  // namespace lmd

#endif  // LMD_SYNTHETIC_WORLD_H_
