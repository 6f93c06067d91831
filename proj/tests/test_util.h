#ifndef LMD_TESTS_TEST_UTIL_H_
#define LMD_TESTS_TEST_UTIL_H_

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "lmd/common.h"
#include "lmd/map_ingest.h"
#include "lmd/synthetic_world.h"

namespace lmd::testing {

// Map whose points were all observed from one pose.
inline LocalMap single_pose_map(const PointList& points, const Pose2& pose = {}) {
  LocalMap m;
  m.id = {"t", 0};
  m.trajectory = {pose};
  m.points = points;
  m.point_pose.assign(points.size(), 0);
  return m;
}

// Closed axis-aligned rectangle outline sampled every step meters.
inline PointList rectangle_outline(double w, double h, double step, const Point2& center = Point2::Zero()) {
  PointList pts;
  const int nx = static_cast<int>(std::round(w / step));
  const int ny = static_cast<int>(std::round(h / step));
  const Point2 lo = center - Point2(w / 2, h / 2);
  for (int i = 0; i < nx; ++i) {
    pts.push_back(lo + Point2(i * step, 0));
    pts.push_back(lo + Point2(w - i * step, h));
  }
  for (int j = 0; j < ny; ++j) {
    pts.push_back(lo + Point2(w, j * step));
    pts.push_back(lo + Point2(0, h - j * step));
  }
  return pts;
}

inline std::vector<Segment> box_walls(const Point2& lo, const Point2& hi) {
  return {{{lo.x(), lo.y()}, {hi.x(), lo.y()}},
          {{hi.x(), lo.y()}, {hi.x(), hi.y()}},
          {{hi.x(), hi.y()}, {lo.x(), hi.y()}},
          {{lo.x(), hi.y()}, {lo.x(), lo.y()}}};
}

// Noise-free 360 beam scans of the walls from each pose.
inline LocalMap scan_walls(const std::vector<Segment>& walls, const std::vector<Pose2>& poses,
                           int beams = 360) {
  LocalMap m;
  m.id = {"t", 0};
  m.trajectory = poses;
  for (std::size_t k = 0; k < poses.size(); ++k) {
    for (int b = 0; b < beams; ++b) {
      const double a = poses[k].theta + 2.0 * std::numbers::pi * b / beams;
      const Point2 dir(std::cos(a), std::sin(a));
      const double r = cast_ray(walls, poses[k].position(), dir);
      if (!std::isfinite(r) || !ScanRecord::is_valid_range(r)) continue;
      m.points.push_back(poses[k].position() + r * dir);
      m.point_pose.push_back(static_cast<std::uint32_t>(k));
    }
  }
  return m;
}

// Two rooms joined by a door, observed along a short path.
inline LocalMap two_room_map() {
  std::vector<Segment> walls = box_walls({0, 0}, {8, 4});
  walls.push_back({{4, 0}, {4, 1.5}});
  walls.push_back({{4, 2.5}, {4, 4}});
  walls.push_back({{1, 1}, {1.6, 1}});
  walls.push_back({{6, 3}, {6.8, 3}});
  std::vector<Pose2> poses;
  for (int i = 0; i <= 25; ++i) poses.push_back({1.5 + 0.2 * i, 2.0 + 0.3 * std::sin(0.5 * i), 0.0});
  return scan_walls(walls, poses, 360);
}

inline LocalMap transformed(const LocalMap& m, double angle, const Point2& t) {
  LocalMap out = m;
  for (auto& p : out.points) p = rotate(p, angle) + t;
  for (auto& pose : out.trajectory) {
    const Point2 q = rotate(pose.position(), angle) + t;
    pose = {q.x(), q.y(), pose.theta + angle};
  }
  return out;
}

// Uniform jitter keeps points off exact cell boundaries.
inline LocalMap jittered(const LocalMap& m, double amplitude, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-amplitude, amplitude);
  LocalMap out = m;
  for (auto& p : out.points) p += Point2(u(rng), u(rng));
  return out;
}

inline LocalMap quarter_turned(const LocalMap& m, int turns) {
  LocalMap out = m;
  for (auto& p : out.points) p = rotate_quarter_turns(p, turns);
  for (auto& pose : out.trajectory) {
    const Point2 q = rotate_quarter_turns(pose.position(), turns);
    pose = {q.x(), q.y(), pose.theta + turns * std::numbers::pi / 2};
  }
  return out;
}

}  // namespace lmd::testing

#endif  // LMD_TESTS_TEST_UTIL_H_
