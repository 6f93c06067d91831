#include "lmd/synthetic_world.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <random>

namespace lmd {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void add_box(std::vector<Segment>& walls, const Point2& lo, const Point2& hi) {
  walls.push_back({{lo.x(), lo.y()}, {hi.x(), lo.y()}});
  walls.push_back({{hi.x(), lo.y()}, {hi.x(), hi.y()}});
  walls.push_back({{hi.x(), hi.y()}, {lo.x(), hi.y()}});
  walls.push_back({{lo.x(), hi.y()}, {lo.x(), lo.y()}});
}

// One side of the loop: centerline from start along u, rooms on side n.
struct Side {
  Point2 start;
  Point2 u;
  Point2 n;  // outward normal
  double length;

  Point2 at(double t, double offset) const { return start + t * u + offset * n; }
};

// Wall line at the given offset over [t0, t1], with door gaps cut out.
void add_wall_line(std::vector<Segment>& walls, const Side& side, double offset, double t0,
                   double t1, std::vector<std::pair<double, double>> gaps) {
  std::sort(gaps.begin(), gaps.end());
  double t = t0;
  for (const auto& [g0, g1] : gaps) {
    if (g0 > t) walls.push_back({side.at(t, offset), side.at(g0, offset)});
    t = std::max(t, g1);
  }
  if (t < t1) walls.push_back({side.at(t, offset), side.at(t1, offset)});
}

// Rooms along one side. direction +1 places rooms outward, -1 inward.
void add_rooms(std::vector<Segment>& walls, const Side& side, double direction, double half_width,
               double t_begin, double t_end, double max_depth, double line_t0, double line_t1,
               const SyntheticWorldConfig& cfg, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double a, double b) { return a + (b - a) * unit(rng); };

  std::vector<std::pair<double, double>> doors;
  double t = t_begin;
  while (t_end - t >= cfg.room_min_width) {
    double width = uniform(cfg.room_min_width, cfg.room_max_width);
    if (t_end - (t + width) < cfg.room_min_width) width = t_end - t;
    const double a = t;
    const double b = t + width;
    const double depth = uniform(cfg.room_min_depth, std::max(cfg.room_min_depth, max_depth));
    const double inner = direction * half_width;
    const double outer = direction * (half_width + depth);
    walls.push_back({side.at(a, inner), side.at(a, outer)});
    walls.push_back({side.at(b, inner), side.at(b, outer)});
    walls.push_back({side.at(a, outer), side.at(b, outer)});
    if (unit(rng) < 0.75) {
      const double lo = a + 0.3 + cfg.door_width / 2.0;
      const double hi = b - 0.3 - cfg.door_width / 2.0;
      const double c = uniform(lo, std::max(lo, hi));
      doors.emplace_back(c - cfg.door_width / 2.0, c + cfg.door_width / 2.0);
      // Furniture somewhere in the room.
      const int boxes = static_cast<int>(unit(rng) * 3.0);
      for (int k = 0; k < boxes; ++k) {
        const double sx = uniform(0.3, 0.8);
        const double sy = uniform(0.3, 0.8);
        const double ta = uniform(a + 0.2, std::max(a + 0.2, b - 0.2 - sx));
        const double da = uniform(half_width + 0.5, std::max(half_width + 0.5, half_width + depth - 0.2 - sy));
        const Point2 p0 = side.at(ta, direction * da);
        const Point2 p1 = side.at(ta + sx, direction * (da + sy));
        add_box(walls, p0.cwiseMin(p1), p0.cwiseMax(p1));
      }
    }
    t = b;
  }
  // Pilasters along the corridor wall, away from doors.
  const int pilasters = static_cast<int>((line_t1 - line_t0) / 6.0);
  for (int k = 0; k < pilasters; ++k) {
    const double w = uniform(0.2, 0.5);
    const double p = uniform(0.15, 0.3);
    const double ta = uniform(line_t0 + 0.5, line_t1 - 0.5 - w);
    bool clear = true;
    for (const auto& [g0, g1] : doors) {
      if (ta < g1 + 0.2 && ta + w > g0 - 0.2) clear = false;
    }
    if (!clear) continue;
    const Point2 p0 = side.at(ta, direction * half_width);
    const Point2 p1 = side.at(ta + w, direction * (half_width - p));
    add_box(walls, p0.cwiseMin(p1), p0.cwiseMax(p1));
  }
  add_wall_line(walls, side, direction * half_width, line_t0, line_t1, doors);
}

// Centerline of a rounded rectangle, parameterized by arclength.
struct LoopPath {
  double width, height, radius;

  double perimeter() const {
    return 2.0 * (width + height) - 8.0 * radius + 2.0 * std::numbers::pi * radius;
  }

  // Position and heading at arclength s.
  std::pair<Point2, double> at(double s) const {
    s = std::fmod(s, perimeter());
    if (s < 0) s += perimeter();
    const double arc = std::numbers::pi / 2.0 * radius;
    const double straight[4] = {width - 2 * radius, height - 2 * radius, width - 2 * radius,
                                height - 2 * radius};
    const Point2 starts[4] = {{radius, 0.0}, {width, radius}, {width - radius, height}, {0.0, height - radius}};
    const Point2 dirs[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
    for (int k = 0; k < 4; ++k) {
      const double heading = k * std::numbers::pi / 2.0;
      if (s <= straight[k]) return {starts[k] + s * dirs[k], heading};
      s -= straight[k];
      if (s <= arc || k == 3) {
        const double phi = std::min(s, arc) / radius;
        const Point2 end = starts[k] + straight[k] * dirs[k];
        const Point2 left = rotate_quarter_turns(dirs[k], 1);
        const Point2 center = end + radius * left;
        const Point2 p = center + rotate(-radius * left, phi);
        return {p, heading + phi};
      }
      s -= arc;
    }
    return {starts[0], 0.0};
  }
};

}  // namespace

double cast_ray(const std::vector<Segment>& walls, const Point2& origin, const Point2& direction) {
  double best = kInf;
  for (const auto& w : walls) {
    const Point2 e = w.b - w.a;
    const double denom = direction.x() * e.y() - direction.y() * e.x();
    if (std::abs(denom) < 1e-12) continue;
    const Point2 f = w.a - origin;
    const double t = (f.x() * e.y() - f.y() * e.x()) / denom;
    const double s = (f.x() * direction.y() - f.y() * direction.x()) / denom;
    if (t > 1e-9 && s >= 0.0 && s <= 1.0) best = std::min(best, t);
  }
  return best;
}

SyntheticWorld make_synthetic_world(std::uint64_t seed, const SyntheticWorldConfig& cfg) {
  std::mt19937_64 rng(seed);
  SyntheticWorld world;
  const double w = cfg.loop_width;
  const double h = cfg.loop_height;
  const double hw = cfg.corridor_width / 2.0;
  const Side sides[4] = {
      {{0.0, 0.0}, {1, 0}, {0, -1}, w},
      {{w, 0.0}, {0, 1}, {1, 0}, h},
      {{w, h}, {-1, 0}, {0, 1}, w},
      {{0.0, h}, {0, -1}, {-1, 0}, h},
  };
  const double inner_depth = std::min(cfg.room_max_depth, std::min(w, h) / 2.0 - hw - 0.5);
  for (const auto& side : sides) {
    add_rooms(world.walls, side, +1.0, hw, hw + 0.3, side.length - hw - 0.3, cfg.room_max_depth,
              -hw, side.length + hw, cfg, rng);
    const double margin = hw + inner_depth + 0.2;
    add_rooms(world.walls, side, -1.0, hw, margin, side.length - margin, inner_depth, hw,
              side.length - hw, cfg, rng);
  }

  const LoopPath path{w, h, 0.8};
  const double total = cfg.laps * path.perimeter();
  const double phase = std::uniform_real_distribution<double>(0.0, 2.0 * std::numbers::pi)(rng);
  for (double s = 0.0; s <= total + 1e-9; s += cfg.step) {
    const auto [p, heading] = path.at(s);
    const double offset = cfg.lap_offset * (std::sin(2.0 * std::numbers::pi * s / 23.0 + phase) +
                                            0.6 * std::sin(2.0 * std::numbers::pi * s / 9.7));
    const Point2 q = p + offset * Point2(-std::sin(heading), std::cos(heading));
    world.trajectory.push_back({q.x(), q.y(), heading});
  }
  return world;
}

std::vector<ScanRecord> simulate_scans(const SyntheticWorld& world, std::uint64_t seed,
                                       const SyntheticWorldConfig& cfg) {
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
  std::normal_distribution<double> noise(0.0, cfg.range_noise);
  std::vector<ScanRecord> scans;
  scans.reserve(world.trajectory.size());
  for (std::size_t k = 0; k < world.trajectory.size(); ++k) {
    ScanRecord s;
    s.pose = world.trajectory[k];
    s.angle_min = -std::numbers::pi / 2.0;
    s.angle_increment = std::numbers::pi / cfg.beams;
    s.timestamp = 0.1 * static_cast<double>(k);
    s.ranges.reserve(static_cast<std::size_t>(cfg.beams));
    for (int b = 0; b < cfg.beams; ++b) {
      const double a = s.pose.theta + s.bearing(static_cast<std::size_t>(b));
      double r = cast_ray(world.walls, s.pose.position(), {std::cos(a), std::sin(a)});
      r = std::isfinite(r) ? std::max(0.0, r + (cfg.range_noise > 0.0 ? noise(rng) : 0.0))
                           : kMaxValidRange;
      r = std::min(r, kMaxValidRange);
      s.ranges.push_back(std::round(r * 1000.0) / 1000.0);
    }
    scans.push_back(std::move(s));
  }
  return scans;
}

void write_carmen_log(std::ostream& os, const std::vector<ScanRecord>& scans) {
  os << "# CARMEN log\n";
  char buf[128];
  for (const auto& s : scans) {
    os << "FLASER " << s.ranges.size();
    for (double r : s.ranges) {
      std::snprintf(buf, sizeof(buf), " %.3f", r);
      os << buf;
    }
    std::snprintf(buf, sizeof(buf), " %.17g %.17g %.17g", s.pose.x, s.pose.y, s.pose.theta);
    os << buf << buf;
    std::snprintf(buf, sizeof(buf), " %.6f synth %.6f\n", s.timestamp, s.timestamp);
    os << buf;
  }
}

}  // namespace lmd
