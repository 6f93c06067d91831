#include "lmd/change_sim.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "lmd/viewpoint_planner.h"

namespace lmd {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Slab test; returns the entry distance for rays starting outside the box.
double ray_rect(const Point2& o, const Point2& d, const Rect& r) {
  double t0 = -kInf, t1 = kInf;
  for (int a = 0; a < 2; ++a) {
    if (d[a] == 0.0) {
      if (o[a] < r.min[a] || o[a] > r.max[a]) return kInf;
      continue;
    }
    double ta = (r.min[a] - o[a]) / d[a];
    double tb = (r.max[a] - o[a]) / d[a];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
  }
  if (t0 > t1 || t1 < 0.0) return kInf;
  return std::max(t0, 0.0);
}

}  // namespace

double ray_hit_distance(const Point2& origin, const Point2& direction,
                        const std::vector<VirtualObject>& objects) {
  double best = kInf;
  for (const auto& obj : objects) best = std::min(best, ray_rect(origin, direction, obj.rect));
  return best;
}

double ray_trace(const Pose2& pose, double range, double bearing,
                 const std::vector<VirtualObject>& objects) {
  const double a = pose.theta + bearing;
  const double hit = ray_hit_distance(pose.position(), {std::cos(a), std::sin(a)}, objects);
  return hit < range ? hit : range;
}

SimulatedChange inject_change(const LocalMap& map, std::uint64_t seed, const ChangeSimConfig& cfg) {
  if (map.trajectory.empty()) throw Error("inject_change: map has no scan poses");
  const SceneFrame frame = map.points.size() >= kMinOrientationPoints
                               ? estimate_dominant_orientation(map.points)
                               : SceneFrame{};
  const LocalMap aligned = align_local_map(map, frame.theta);
  const OccupancyGrid grid = rasterize_occupancy(aligned, 0.1);
  Point2 lo = grid.origin();
  Point2 hi = lo + Point2(grid.width(), grid.height()) * grid.resolution();

  auto sensed = [&](const Rect& r) {
    const Eigen::Vector2i a = grid.cell_of(r.min);
    const Eigen::Vector2i b = grid.cell_of(r.max);
    for (int iy = std::max(a.y(), 0); iy <= std::min(b.y(), grid.height() - 1); ++iy) {
      for (int ix = std::max(a.x(), 0); ix <= std::min(b.x(), grid.width() - 1); ++ix) {
        if (grid.label(ix, iy) != CellLabel::kUnknown) return true;
      }
    }
    return false;
  };
  auto clear_of_poses = [&](const Rect& r) {
    for (const auto& pose : aligned.trajectory) {
      const Point2 p = pose.position();
      const Point2 gap = (r.min - p).cwiseMax(p - r.max).cwiseMax(Point2::Zero());
      if (gap.norm() < cfg.pose_clearance) return false;
    }
    return true;
  };

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double a, double b) { return a + (b - a) * unit(rng); };

  SimulatedChange out;
  for (int attempt = 1; attempt <= cfg.max_attempts; ++attempt) {
    out.attempts = attempt;
    ChangeRegion region;
    region.theta = frame.theta;
    const Point2 size(uniform(cfg.region_min, cfg.region_max), uniform(cfg.region_min, cfg.region_max));
    const Point2 center(uniform(lo.x(), hi.x()), uniform(lo.y(), hi.y()));
    region.rect = {center - size / 2.0, center + size / 2.0};
    if (!sensed(region.rect)) continue;

    std::vector<VirtualObject> objects;
    const int count = cfg.objects_min +
                      static_cast<int>(std::floor(unit(rng) * (cfg.objects_max - cfg.objects_min + 1)));
    for (int k = 0; k < std::min(count, cfg.objects_max); ++k) {
      const Point2 side(uniform(cfg.object_min, cfg.object_max), uniform(cfg.object_min, cfg.object_max));
      const Point2 room = (region.rect.size() - side).cwiseMax(Point2::Zero());
      const Point2 corner = region.rect.min + Point2(uniform(0.0, room.x()), uniform(0.0, room.y()));
      const Rect r{corner, (corner + side).cwiseMin(region.rect.max)};
      if (clear_of_poses(r)) objects.push_back({r});
    }
    if (objects.empty()) continue;

    std::vector<std::size_t> modified;
    PointList moved;
    for (std::size_t k = 0; k < aligned.points.size(); ++k) {
      const Point2 origin = aligned.trajectory[aligned.point_pose[k]].position();
      const Point2 beam = aligned.points[k] - origin;
      const double range = beam.norm();
      if (range == 0.0) continue;
      const Point2 dir = beam / range;
      const double hit = ray_hit_distance(origin, dir, objects);
      if (hit < range) {
        modified.push_back(k);
        moved.push_back(origin + hit * dir);
      }
    }
    if (modified.empty()) continue;

    out.map = map;
    out.region = region;
    out.objects = std::move(objects);
    out.modified = std::move(modified);
    for (std::size_t i = 0; i < out.modified.size(); ++i) {
      const Point2 p = rotate(moved[i], frame.theta);
      out.map.points[out.modified[i]] = p;
      out.ground_truth.push_back(p);
    }
    return out;
  }
  throw Error("inject_change: no beam modified after " + std::to_string(cfg.max_attempts) +
              " attempts for map " + map.id.str());
}

}  // namespace lmd
