#include "lmd/viewpoint_planner.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

namespace lmd {

std::string to_string(PlannerMethod m) { return m == PlannerMethod::kCoR ? "cor" : "cog"; }

PlannerMethod planner_method_from_string(const std::string& s) {
  if (s == "cog" || s == "CoG") return PlannerMethod::kCoG;
  if (s == "cor" || s == "CoR") return PlannerMethod::kCoR;
  throw Error("unknown planner method '" + s + "'");
}

namespace {

double histogram_entropy(std::vector<std::int64_t>& bins) {
  std::sort(bins.begin(), bins.end());
  const double n = static_cast<double>(bins.size());
  double h = 0.0;
  for (std::size_t i = 0; i < bins.size();) {
    std::size_t j = i;
    while (j < bins.size() && bins[j] == bins[i]) ++j;
    const double p = static_cast<double>(j - i) / n;
    h -= p * std::log(p);
    i = j;
  }
  return h;
}

}  // namespace

double projection_entropy(const PointList& points, double theta, double bin_size) {
  if (points.empty()) return 0.0;
  PointList rotated;
  rotated.reserve(points.size());
  Point2 centroid = Point2::Zero();
  for (const auto& p : points) {
    rotated.push_back(rotate(p, -theta));
    centroid += rotated.back();
  }
  centroid /= static_cast<double>(points.size());
  std::vector<std::int64_t> bx, by;
  bx.reserve(points.size());
  by.reserve(points.size());
  for (const auto& p : rotated) {
    bx.push_back(static_cast<std::int64_t>(std::floor((p.x() - centroid.x()) / bin_size)));
    by.push_back(static_cast<std::int64_t>(std::floor((p.y() - centroid.y()) / bin_size)));
  }
  return histogram_entropy(bx) + histogram_entropy(by);
}

SceneFrame estimate_dominant_orientation(const PointList& points) {
  if (points.size() < kMinOrientationPoints) {
    throw Error("estimate_dominant_orientation: need at least 10 points");
  }
  int best_deg = 0;
  double best = std::numeric_limits<double>::infinity();
  for (int deg = 0; deg < 90; ++deg) {
    const double h = projection_entropy(points, deg * std::numbers::pi / 180.0);
    if (h < best) {
      best = h;
      best_deg = deg;
    }
  }
  return {best_deg * std::numbers::pi / 180.0};
}

WallParse parse_walls(const OccupancyGrid& grid, [[maybe_unused]] const SceneFrame& frame) {
  WallParse parse;
  std::vector<std::uint8_t> in_run(grid.size(), 0);
  const double res = grid.resolution();

  // Scans one line; cell(i) maps the running coordinate to a grid cell.
  auto scan_line = [&](int length, WallAxis axis, auto cell) {
    std::vector<Eigen::Vector2i> run;
    int last = -2;
    auto flush = [&]() {
      if (run.size() >= 3) {
        WallPrimitive w;
        w.axis = axis;
        const Eigen::Vector2i& a = run.front();
        const Eigen::Vector2i& b = run.back();
        if (axis == WallAxis::kX) {
          w.line_coordinate = grid.cell_center(a.x(), a.y()).y();
          w.start = grid.origin().x() + a.x() * res;
          w.end = grid.origin().x() + (b.x() + 1) * res;
        } else {
          w.line_coordinate = grid.cell_center(a.x(), a.y()).x();
          w.start = grid.origin().y() + a.y() * res;
          w.end = grid.origin().y() + (b.y() + 1) * res;
        }
        for (const auto& c : run) in_run[grid.linear(c.x(), c.y())] = 1;
        w.cells = std::move(run);
        parse.walls.push_back(std::move(w));
      }
      run.clear();
    };
    for (int i = 0; i < length; ++i) {
      const Eigen::Vector2i c = cell(i);
      if (!grid.occupied(c.x(), c.y())) continue;
      if (i - last > 2) flush();
      run.push_back(c);
      last = i;
    }
    flush();
  };

  for (int iy = 0; iy < grid.height(); ++iy) {
    scan_line(grid.width(), WallAxis::kX, [iy](int i) { return Eigen::Vector2i(i, iy); });
  }
  for (int ix = 0; ix < grid.width(); ++ix) {
    scan_line(grid.height(), WallAxis::kY, [ix](int i) { return Eigen::Vector2i(ix, i); });
  }
  for (const auto& c : grid.occupied_cells()) {
    if (!in_run[grid.linear(c.x(), c.y())]) parse.isolated_cells.push_back(c);
  }
  return parse;
}

Viewpoint plan_viewpoint_cog(const OccupancyGrid& grid, const SceneFrame& frame) {
  const auto cells = grid.occupied_cells();
  if (cells.empty()) throw Error("plan_viewpoint_cog: no occupied cells");
  Point2 sum = Point2::Zero();
  for (const auto& c : cells) sum += grid.cell_center(c.x(), c.y());
  Viewpoint vp;
  vp.frame = frame;
  vp.method = PlannerMethod::kCoG;
  vp.position = rotate(sum / static_cast<double>(cells.size()), frame.theta);
  return vp;
}

std::vector<RoomSample> sample_rooms(const OccupancyGrid& grid, int count, std::uint64_t seed) {
  std::vector<Eigen::Vector2i> free_cells;
  for (int iy = 0; iy < grid.height(); ++iy) {
    for (int ix = 0; ix < grid.width(); ++ix) {
      if (grid.label(ix, iy) == CellLabel::kUnoccupied) free_cells.emplace_back(ix, iy);
    }
  }
  std::vector<RoomSample> rooms;
  if (free_cells.empty()) return rooms;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, free_cells.size() - 1);

  auto column_free = [&](int x, int y0, int y1) {
    for (int y = y0; y <= y1; ++y) {
      if (!grid.unoccupied(x, y)) return false;
    }
    return true;
  };
  auto row_free = [&](int y, int x0, int x1) {
    for (int x = x0; x <= x1; ++x) {
      if (!grid.unoccupied(x, y)) return false;
    }
    return true;
  };

  rooms.reserve(static_cast<std::size_t>(std::max(count, 0)));
  for (int s = 0; s < count; ++s) {
    const Eigen::Vector2i seed_cell = free_cells[pick(rng)];
    RoomSample r{seed_cell.x(), seed_cell.y(), seed_cell.x(), seed_cell.y()};
    // Sides in the order +x, +y, -x, -y. A blocked side stays blocked since
    // the rectangle only grows.
    bool open[4] = {true, true, true, true};
    while (open[0] || open[1] || open[2] || open[3]) {
      if (open[0]) open[0] = column_free(r.x1 + 1, r.y0, r.y1) ? (++r.x1, true) : false;
      if (open[1]) open[1] = row_free(r.y1 + 1, r.x0, r.x1) ? (++r.y1, true) : false;
      if (open[2]) open[2] = column_free(r.x0 - 1, r.y0, r.y1) ? (--r.x0, true) : false;
      if (open[3]) open[3] = row_free(r.y0 - 1, r.x0, r.x1) ? (--r.y0, true) : false;
    }
    rooms.push_back(r);
  }
  return rooms;
}

std::vector<Eigen::Vector2i> dominant_room_cells(const OccupancyGrid& grid,
                                                 const std::vector<std::uint32_t>& membership,
                                                 double dominance) {
  const int w = grid.width();
  const int h = grid.height();
  std::vector<double> fx(static_cast<std::size_t>(w), 0.0), fy(static_cast<std::size_t>(h), 0.0);
  for (int iy = 0; iy < h; ++iy) {
    for (int ix = 0; ix < w; ++ix) {
      const double m = membership[grid.linear(ix, iy)];
      fx[ix] += m;
      fy[iy] += m;
    }
  }
  const double max_fx = w > 0 ? *std::max_element(fx.begin(), fx.end()) : 0.0;
  const double max_fy = h > 0 ? *std::max_element(fy.begin(), fy.end()) : 0.0;
  std::vector<Eigen::Vector2i> cells;
  // Integer steps avoid drift when relaxing the factor.
  for (int step = 0; cells.empty(); ++step) {
    const double factor = std::max(0.0, dominance - 0.05 * step);
    for (int iy = 0; iy < h; ++iy) {
      if (fy[iy] < factor * max_fy) continue;
      for (int ix = 0; ix < w; ++ix) {
        if (fx[ix] >= factor * max_fx && grid.label(ix, iy) == CellLabel::kUnoccupied) {
          cells.emplace_back(ix, iy);
        }
      }
    }
    if (factor == 0.0) break;
  }
  return cells;
}

Viewpoint plan_viewpoint_cor(const OccupancyGrid& grid, const SceneFrame& frame,
                             std::uint64_t seed, int room_samples, double dominance) {
  const auto rooms = sample_rooms(grid, room_samples, seed);
  if (rooms.empty()) return plan_viewpoint_cog(grid, frame);

  // 2D difference array for rectangle membership counts.
  const int w = grid.width();
  const int h = grid.height();
  std::vector<std::int64_t> diff(static_cast<std::size_t>(w + 1) * (h + 1), 0);
  auto at = [&](int x, int y) -> std::int64_t& {
    return diff[static_cast<std::size_t>(y) * (w + 1) + x];
  };
  for (const auto& r : rooms) {
    at(r.x0, r.y0) += 1;
    at(r.x1 + 1, r.y0) -= 1;
    at(r.x0, r.y1 + 1) -= 1;
    at(r.x1 + 1, r.y1 + 1) += 1;
  }
  std::vector<std::uint32_t> membership(grid.size(), 0);
  std::vector<std::int64_t> row(static_cast<std::size_t>(w), 0);
  for (int iy = 0; iy < h; ++iy) {
    std::int64_t run = 0;
    for (int ix = 0; ix < w; ++ix) {
      run += at(ix, iy);
      row[ix] += run;
      membership[grid.linear(ix, iy)] = static_cast<std::uint32_t>(row[ix]);
    }
  }

  const auto cells = dominant_room_cells(grid, membership, dominance);
  Point2 sum = Point2::Zero();
  for (const auto& c : cells) sum += grid.cell_center(c.x(), c.y());
  Viewpoint vp;
  vp.frame = frame;
  vp.method = PlannerMethod::kCoR;
  vp.position = rotate(sum / static_cast<double>(cells.size()), frame.theta);
  return vp;
}

PlannedMap plan_viewpoint(const LocalMap& map, const PlannerSettings& settings) {
  PlannedMap planned;
  planned.frame = estimate_dominant_orientation(map.points);
  planned.aligned_grid =
      rasterize_occupancy(align_local_map(map, planned.frame.theta), settings.resolution);
  if (settings.method == PlannerMethod::kCoR) {
    planned.viewpoint = plan_viewpoint_cor(planned.aligned_grid, planned.frame, settings.seed,
                                           settings.room_samples, settings.dominance);
  } else {
    planned.viewpoint = plan_viewpoint_cog(planned.aligned_grid, planned.frame);
  }
  return planned;
}

}  // namespace lmd
