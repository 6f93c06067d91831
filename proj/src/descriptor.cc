#include "lmd/descriptor.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <tuple>

namespace lmd {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// (R, A) of the eight retrieval descriptors.
constexpr std::array<std::pair<double, int>, kRetrievalConfigCount> kRetrievalShapes = {{
    {1.0, 1}, {6.0, 3}, {12.0, 6}, {1.0, 6}, {3.0, 6}, {6.0, 6}, {3.0, 1}, {6.0, 1},
}};

int shell_of(double distance, const DescriptorConfig& c) {
  return std::min(c.shells - 1, static_cast<int>(std::floor(distance * c.shells / c.radius)));
}

int sector_of(double angle, const DescriptorConfig& c) {
  double a = std::fmod(angle, kTwoPi);
  if (a < 0.0) a += kTwoPi;
  return std::min(c.sectors - 1, static_cast<int>(std::floor(a * c.sectors / kTwoPi)));
}

}  // namespace

void DescriptorConfig::validate() const {
  if (!(radius > 0.0) || sectors < 1 || shells < 1 || !(fine_resolution > 0.0) || bits < 1 ||
      bits > 64) {
    throw Error("invalid descriptor config");
  }
}

DescriptorConfig retrieval_config(int id) {
  if (id < 1 || id > kRetrievalConfigCount) {
    throw Error("descriptor config id must be in 1.." + std::to_string(kRetrievalConfigCount) +
                ", got " + std::to_string(id));
  }
  DescriptorConfig c;
  c.radius = kRetrievalShapes[id - 1].first;
  c.sectors = kRetrievalShapes[id - 1].second;
  c.shells = 10;
  return c;
}

DescriptorConfig change_config() {
  DescriptorConfig c;
  c.radius = 6.0;
  c.sectors = 10;
  c.shells = 6;
  c.bits = 60;
  return c;
}

FineOccupancy::FineOccupancy(const PointList& points, double fine_resolution,
                             const Point2& anchor, double bucket_size)
    : bucket_size_(bucket_size), anchor_(anchor) {
  std::vector<std::tuple<std::int64_t, std::int64_t, std::uint32_t>> keyed;
  keyed.reserve(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Point2 rel = points[i] - anchor;
    keyed.emplace_back(static_cast<std::int64_t>(std::floor(rel.x() / fine_resolution)),
                       static_cast<std::int64_t>(std::floor(rel.y() / fine_resolution)),
                       static_cast<std::uint32_t>(i));
  }
  std::sort(keyed.begin(), keyed.end());
  for (std::size_t i = 0; i < keyed.size(); ++i) {
    if (i > 0 && std::get<0>(keyed[i]) == std::get<0>(keyed[i - 1]) &&
        std::get<1>(keyed[i]) == std::get<1>(keyed[i - 1])) {
      continue;
    }
    cells_.push_back(points[std::get<2>(keyed[i])]);
  }
  if (cells_.empty()) return;

  std::vector<std::pair<std::int64_t, std::int64_t>> buckets;
  buckets.reserve(cells_.size());
  std::int64_t max_bx = 0, max_by = 0;
  for (std::size_t i = 0; i < cells_.size(); ++i) {
    const Point2 rel = cells_[i] - anchor;
    const auto bx = static_cast<std::int64_t>(std::floor(rel.x() / bucket_size));
    const auto by = static_cast<std::int64_t>(std::floor(rel.y() / bucket_size));
    if (i == 0) {
      min_bx_ = max_bx = bx;
      min_by_ = max_by = by;
    }
    min_bx_ = std::min(min_bx_, bx);
    max_bx = std::max(max_bx, bx);
    min_by_ = std::min(min_by_, by);
    max_by = std::max(max_by, by);
    buckets.emplace_back(bx, by);
  }
  span_x_ = max_bx - min_bx_ + 1;
  span_y_ = max_by - min_by_ + 1;
  bucket_start_.assign(static_cast<std::size_t>(span_x_ * span_y_) + 1, 0);
  for (const auto& [bx, by] : buckets) ++bucket_start_[static_cast<std::size_t>(bucket_key(bx, by)) + 1];
  for (std::size_t k = 1; k < bucket_start_.size(); ++k) bucket_start_[k] += bucket_start_[k - 1];
  order_.resize(cells_.size());
  std::vector<std::uint32_t> fill(bucket_start_.begin(), bucket_start_.end() - 1);
  for (std::size_t i = 0; i < cells_.size(); ++i) {
    const auto key = static_cast<std::size_t>(bucket_key(buckets[i].first, buckets[i].second));
    order_[fill[key]++] = static_cast<std::uint32_t>(i);
  }
}

std::array<AppearanceDescriptor, 4> compute_appearance_descriptors(const Point2& center,
                                                                   const FineOccupancy& fine,
                                                                   const DescriptorConfig& config) {
  config.validate();
  std::array<AppearanceDescriptor, 4> out;
  for (auto& d : out) d = AppearanceDescriptor::Zero(config.dimension());
  fine.for_each_within(center, config.radius, [&](const Point2& p) {
    const Point2 v = p - center;
    const double distance = v.norm();
    if (distance >= config.radius) return;
    const int shell = shell_of(distance, config);
    const double angle = std::atan2(v.y(), v.x());
    for (int t = 0; t < 4; ++t) {
      const int sector = sector_of(angle + t * (std::numbers::pi / 2.0), config);
      out[t][shell * config.sectors + sector] += 1.0;
    }
  });
  return out;
}

AppearanceDescriptor compute_appearance_descriptor(const Point2& center, const PointList& points,
                                                   const DescriptorConfig& config,
                                                   int quarter_turns) {
  const FineOccupancy fine(points, config.fine_resolution, Point2::Zero(),
                           std::max(1.0, config.radius));
  return compute_appearance_descriptors(center, fine, config)[((quarter_turns % 4) + 4) % 4];
}

ProjectionMatrix::ProjectionMatrix(std::uint64_t seed, int bits, int dimension)
    : seed_(seed), entries_(bits, dimension) {
  if (bits < 1 || bits > 16 || dimension < 1) throw Error("invalid projection shape");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  // Row-major fill so the matrix does not depend on Eigen's storage order.
  for (int r = 0; r < bits; ++r) {
    for (int c = 0; c < dimension; ++c) entries_(r, c) = normal(rng);
  }
}

AppearanceWord project_to_word(const AppearanceDescriptor& d, const ProjectionMatrix& p) {
  if (d.size() != p.dimension()) {
    throw Error("project_to_word: descriptor has " + std::to_string(d.size()) +
                " dims, projection expects " + std::to_string(p.dimension()));
  }
  const Eigen::VectorXd y = p.entries() * d;
  AppearanceWord word = 0;
  for (int k = 0; k < y.size(); ++k) {
    if (y[k] > 0.0) word = static_cast<AppearanceWord>(word | (1u << k));
  }
  return word;
}

ChangeWord binarize_change_descriptor(const AppearanceDescriptor& d) {
  if (d.size() > 64) throw Error("change descriptor wider than 64 entries");
  if (d.size() == 0) return 0;
  const double mean = d.mean();
  ChangeWord word = 0;
  for (int k = 0; k < d.size(); ++k) {
    if (d[k] > mean) word |= ChangeWord{1} << k;
  }
  return word;
}

Eigen::Vector2i quantize_relative(const Point2& relative, double quantum) {
  if (!(quantum > 0.0)) throw Error("pose quantum must be positive");
  // Cell centers sit on exact multiples of the quantum relative to lattice
  // viewpoints; the nudge keeps those in the upper bin despite rounding.
  constexpr double kSnap = 1e-9;
  return {static_cast<int>(std::floor(relative.x() / quantum + kSnap)),
          static_cast<int>(std::floor(relative.y() / quantum + kSnap))};
}

Eigen::Vector2i quantize_pose(const Point2& p, const Viewpoint& vp, double quantum) {
  return quantize_relative(vp.to_local(p), quantum);
}

PointList select_interest_points(const OccupancyGrid& grid) {
  PointList points;
  std::vector<std::uint8_t> taken(
      static_cast<std::size_t>((grid.width() + 1) / 2) * ((grid.height() + 1) / 2), 0);
  const int bw = (grid.width() + 1) / 2;
  for (const auto& c : grid.occupied_cells()) {
    const auto bucket = static_cast<std::size_t>((c.y() / 2) * bw + c.x() / 2);
    if (taken[bucket]) continue;
    taken[bucket] = 1;
    points.push_back(grid.cell_center(c.x(), c.y()));
  }
  return points;
}

LmdSettings LmdSettings::for_descriptor(int id, double pose_quantum) {
  LmdSettings s;
  s.descriptor_id = id;
  s.retrieval = retrieval_config(id);
  s.change = change_config();
  s.pose_quantum = pose_quantum;
  return s;
}

LocalMapDescriptor build_lmd(const LocalMap& map, const Viewpoint& vp, const LmdSettings& settings,
                             const ProjectionMatrix& projection) {
  settings.retrieval.validate();
  settings.change.validate();
  if (settings.change.dimension() != 60) throw Error("change descriptor must be 60-dim");
  if (projection.dimension() != settings.retrieval.dimension() ||
      projection.bits() != settings.retrieval.bits) {
    throw Error("projection matrix does not match the retrieval descriptor");
  }

  LocalMapDescriptor lmd;
  lmd.map_id = map.id;
  lmd.viewpoint = vp;
  lmd.settings = settings;
  if (map.empty()) return lmd;

  const LocalMap aligned = align_local_map(map, vp.frame.theta);
  const OccupancyGrid grid = rasterize_occupancy(aligned, 0.1);
  const PointList centers = select_interest_points(grid);
  const Point2 vp_aligned = rotate(vp.position, -vp.frame.theta);

  const FineOccupancy fine(aligned.points, settings.retrieval.fine_resolution, grid.origin(),
                           1.0);
  const bool rotation_free = settings.retrieval.sectors == 1;
  for (const auto& center : centers) {
    const Point2 rel = center - vp_aligned;
    const Eigen::Vector2i w = quantize_relative(rel, settings.pose_quantum);

    const auto app = compute_appearance_descriptors(center, fine, settings.retrieval);
    std::array<AppearanceWord, 4> words;
    words[0] = project_to_word(app[0], projection);
    for (int t = 1; t < 4; ++t) words[t] = rotation_free ? words[0] : project_to_word(app[t], projection);

    const auto chg = compute_appearance_descriptors(center, fine, settings.change);
    std::array<ChangeWord, 4> change;
    for (int t = 0; t < 4; ++t) change[t] = binarize_change_descriptor(chg[t]);

    lmd.triples.push_back({words[0], w.x(), w.y()});
    lmd.change_words.push_back(change[0]);
    lmd.positions.push_back(rel);
    lmd.appearance_turns.push_back(words);
    lmd.change_turns.push_back(change);
  }
  return lmd;
}

LocalMapDescriptor encode_local_map(const LocalMap& map, const PlannerSettings& planner,
                                    const LmdSettings& settings,
                                    const ProjectionMatrix& projection) {
  const PlannedMap planned = plan_viewpoint(map, planner);
  return build_lmd(map, planned.viewpoint, settings, projection);
}

}  // namespace lmd
