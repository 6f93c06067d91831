#include "lmd/map_ingest.h"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>

namespace lmd {

namespace {

constexpr double kArcEps = 1e-9;

double parse_double(const std::string& token, std::size_t line) {
  // std::from_chars for double is not reliable on all libstdc++ versions.
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(token.c_str(), &end);
  if (end == token.c_str() || *end != '\0' || errno == ERANGE || !std::isfinite(v)) {
    throw ParseError(line, "non-numeric field '" + token + "'");
  }
  return v;
}

// Integer line traversal from a to b inclusive.
template <typename Visit>
void bresenham(int x0, int y0, int x1, int y1, Visit&& visit) {
  const int dx = std::abs(x1 - x0);
  const int dy = -std::abs(y1 - y0);
  const int sx = x0 < x1 ? 1 : -1;
  const int sy = y0 < y1 ? 1 : -1;
  int err = dx + dy;
  while (true) {
    visit(x0, y0);
    if (x0 == x1 && y0 == y1) break;
    const int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x0 += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y0 += sy;
    }
  }
}

}  // namespace

Point2 ScanRecord::endpoint(std::size_t beam) const {
  const double a = pose.theta + bearing(beam);
  return {pose.x + ranges[beam] * std::cos(a), pose.y + ranges[beam] * std::sin(a)};
}

LocalMap align_local_map(const LocalMap& map, double theta) {
  LocalMap out = map;
  if (theta == 0.0) return out;
  for (auto& p : out.points) p = rotate(p, -theta);
  for (auto& pose : out.trajectory) {
    const Point2 q = rotate(pose.position(), -theta);
    pose = {q.x(), q.y(), pose.theta - theta};
  }
  return out;
}

std::vector<ScanRecord> parse_carmen_log(std::istream& stream) {
  std::vector<ScanRecord> scans;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(stream, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::vector<std::string> tok;
    for (std::string t; ls >> t;) tok.push_back(std::move(t));
    if (tok.empty() || tok[0] != "FLASER") continue;
    if (tok.size() < 2) throw ParseError(line_no, "FLASER line without reading count");
    const double n_raw = parse_double(tok[1], line_no);
    if (n_raw < 0 || n_raw != std::floor(n_raw) || n_raw > 1e6) {
      throw ParseError(line_no, "invalid reading count '" + tok[1] + "'");
    }
    const auto n = static_cast<std::size_t>(n_raw);
    // FLASER n r1..rn x y theta odom_x odom_y odom_theta ipc_ts host logger_ts
    if (tok.size() != n + 11) {
      throw ParseError(line_no, "expected " + std::to_string(n + 11) + " fields, got " +
                                    std::to_string(tok.size()));
    }
    ScanRecord s;
    s.ranges.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
      const double r = parse_double(tok[2 + k], line_no);
      if (r < 0) throw ParseError(line_no, "negative range");
      s.ranges.push_back(r);
    }
    s.pose.x = parse_double(tok[2 + n], line_no);
    s.pose.y = parse_double(tok[3 + n], line_no);
    s.pose.theta = parse_double(tok[4 + n], line_no);
    for (std::size_t k = 5; k <= 7; ++k) parse_double(tok[k + n], line_no);
    s.timestamp = parse_double(tok[8 + n], line_no);
    parse_double(tok[10 + n], line_no);
    // Front-facing 180 degree field of view.
    s.angle_min = -std::numbers::pi / 2.0;
    s.angle_increment = n > 0 ? std::numbers::pi / static_cast<double>(n) : 0.0;
    scans.push_back(std::move(s));
  }
  return scans;
}

std::vector<double> trajectory_arclength(const std::vector<ScanRecord>& scans) {
  std::vector<double> arc(scans.size(), 0.0);
  for (std::size_t k = 1; k < scans.size(); ++k) {
    arc[k] = arc[k - 1] + (scans[k].pose.position() - scans[k - 1].pose.position()).norm();
  }
  return arc;
}

std::vector<LocalMap> segment_local_maps(const std::vector<ScanRecord>& scans,
                                         double window_m, double stride_m,
                                         const std::string& dataset) {
  if (!(window_m > 0.0) || !(stride_m > 0.0)) {
    throw Error("segment_local_maps: window and stride must be positive");
  }
  std::vector<LocalMap> maps;
  if (scans.empty()) return maps;
  const std::vector<double> arc = trajectory_arclength(scans);
  const double total = arc.back();
  if (total + kArcEps < window_m) return maps;
  const auto count =
      static_cast<std::size_t>(std::floor((total - window_m) / stride_m + kArcEps)) + 1;

  std::size_t first = 0;
  for (std::size_t m = 0; m < count; ++m) {
    LocalMap map;
    map.id = {dataset, static_cast<std::uint32_t>(m)};
    map.arc_start = static_cast<double>(m) * stride_m;
    map.arc_end = map.arc_start + window_m;
    while (first < scans.size() && arc[first] < map.arc_start - kArcEps) ++first;
    for (std::size_t k = first; k < scans.size() && arc[k] <= map.arc_end + kArcEps; ++k) {
      const ScanRecord& s = scans[k];
      const auto pose_index = static_cast<std::uint32_t>(map.trajectory.size());
      map.trajectory.push_back(s.pose);
      for (std::size_t b = 0; b < s.ranges.size(); ++b) {
        if (!ScanRecord::is_valid_range(s.ranges[b])) continue;
        map.points.push_back(s.endpoint(b));
        map.point_pose.push_back(pose_index);
      }
    }
    maps.push_back(std::move(map));
  }
  return maps;
}

OccupancyGrid::OccupancyGrid(double resolution, const Point2& origin, int width, int height)
    : resolution_(resolution),
      origin_(origin),
      width_(width),
      height_(height),
      labels_(static_cast<std::size_t>(width) * height, CellLabel::kUnknown),
      counts_(static_cast<std::size_t>(width) * height, 0) {
  if (!(resolution > 0.0) || width < 0 || height < 0) {
    throw Error("OccupancyGrid: invalid geometry");
  }
}

Eigen::Vector2i OccupancyGrid::cell_of(const Point2& p) const {
  return {static_cast<int>(std::floor((p.x() - origin_.x()) / resolution_)),
          static_cast<int>(std::floor((p.y() - origin_.y()) / resolution_))};
}

Point2 OccupancyGrid::cell_center(int ix, int iy) const {
  return {origin_.x() + (ix + 0.5) * resolution_, origin_.y() + (iy + 0.5) * resolution_};
}

std::size_t OccupancyGrid::count_label(CellLabel l) const {
  return static_cast<std::size_t>(std::count(labels_.begin(), labels_.end(), l));
}

std::vector<Eigen::Vector2i> OccupancyGrid::occupied_cells() const {
  std::vector<Eigen::Vector2i> cells;
  for (int iy = 0; iy < height_; ++iy) {
    for (int ix = 0; ix < width_; ++ix) {
      if (label(ix, iy) == CellLabel::kOccupied) cells.emplace_back(ix, iy);
    }
  }
  return cells;
}

OccupancyGrid rasterize_occupancy(const LocalMap& map, double resolution,
                                  std::uint32_t hit_threshold) {
  if (map.empty()) throw Error("rasterize_occupancy: empty map");
  Point2 lo = map.points.front();
  Point2 hi = lo;
  for (const auto& p : map.points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  for (const auto& pose : map.trajectory) {
    lo = lo.cwiseMin(pose.position());
    hi = hi.cwiseMax(pose.position());
  }
  // Origin on the world lattice at an even cell index, one cell of margin.
  auto even_floor = [&](double v) {
    const double k = std::floor(v / resolution) - 1.0;
    return (k - 2.0 * std::floor(k / 2.0) == 0.0 ? k : k - 1.0) * resolution;
  };
  const Point2 origin(even_floor(lo.x()), even_floor(lo.y()));
  const int width = static_cast<int>(std::floor((hi.x() - origin.x()) / resolution)) + 2;
  const int height = static_cast<int>(std::floor((hi.y() - origin.y()) / resolution)) + 2;
  return rasterize_occupancy(map, resolution, origin, width, height, hit_threshold);
}

OccupancyGrid rasterize_occupancy(const LocalMap& map, double resolution,
                                  const Point2& origin, int width, int height,
                                  std::uint32_t hit_threshold) {
  OccupancyGrid grid(resolution, origin, width, height);
  std::vector<std::uint8_t> traversed(grid.size(), 0);
  for (std::size_t k = 0; k < map.points.size(); ++k) {
    const Eigen::Vector2i end = grid.cell_of(map.points[k]);
    if (grid.contains(end.x(), end.y())) grid.add_hit(end.x(), end.y());
    if (k >= map.point_pose.size() || map.point_pose[k] >= map.trajectory.size()) continue;
    const Eigen::Vector2i start = grid.cell_of(map.trajectory[map.point_pose[k]].position());
    bresenham(start.x(), start.y(), end.x(), end.y(), [&](int ix, int iy) {
      if ((ix != end.x() || iy != end.y()) && grid.contains(ix, iy)) {
        traversed[grid.linear(ix, iy)] = 1;
      }
    });
  }
  for (int iy = 0; iy < height; ++iy) {
    for (int ix = 0; ix < width; ++ix) {
      if (grid.count(ix, iy) >= hit_threshold && grid.count(ix, iy) > 0) {
        grid.set_label(ix, iy, CellLabel::kOccupied);
      } else if (traversed[grid.linear(ix, iy)]) {
        grid.set_label(ix, iy, CellLabel::kUnoccupied);
      }
    }
  }
  return grid;
}

}  // namespace lmd
