#include "lmd/eval_harness.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <memory>
#include <set>
#include <sstream>

#include "lmd/map_archive.h"
#include "lmd/synthetic_world.h"

namespace lmd {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Nearest neighbor lookups against one pointset.
class NearestGrid {
 public:
  explicit NearestGrid(const PointList& points, double cell = 0.5) : points_(points), cell_(cell) {
    lo_ = hi_ = points.front();
    for (const auto& p : points) {
      lo_ = lo_.cwiseMin(p);
      hi_ = hi_.cwiseMax(p);
    }
    nx_ = static_cast<int>(std::floor((hi_.x() - lo_.x()) / cell_)) + 1;
    ny_ = static_cast<int>(std::floor((hi_.y() - lo_.y()) / cell_)) + 1;
    start_.assign(static_cast<std::size_t>(nx_) * ny_ + 1, 0);
    std::vector<std::size_t> key(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
      const auto [cx, cy] = clamp_cell(points[i]);
      key[i] = static_cast<std::size_t>(cy) * nx_ + cx;
      ++start_[key[i] + 1];
    }
    for (std::size_t k = 1; k < start_.size(); ++k) start_[k] += start_[k - 1];
    order_.resize(points.size());
    std::vector<std::uint32_t> fill(start_.begin(), start_.end() - 1);
    for (std::size_t i = 0; i < points.size(); ++i) order_[fill[key[i]]++] = static_cast<std::uint32_t>(i);
  }

  const Point2& lo() const { return lo_; }
  const Point2& hi() const { return hi_; }

  double nearest_distance(const Point2& p) const {
    const auto [cx, cy] = clamp_cell(p);
    double best2 = kInf;
    const int max_ring = std::max(nx_, ny_);
    for (int ring = 0; ring <= max_ring; ++ring) {
      for (int y = cy - ring; y <= cy + ring; ++y) {
        if (y < 0 || y >= ny_) continue;
        const bool edge = (y == cy - ring || y == cy + ring);
        for (int x = cx - ring; x <= cx + ring; x += edge ? 1 : 2 * std::max(ring, 1)) {
          if (x >= 0 && x < nx_) {
            const std::size_t key = static_cast<std::size_t>(y) * nx_ + x;
            for (std::uint32_t i = start_[key]; i < start_[key + 1]; ++i) {
              best2 = std::min(best2, (points_[order_[i]] - p).squaredNorm());
            }
          }
          if (ring == 0) break;
        }
      }
      const double bound = ring * cell_;
      if (best2 <= bound * bound) break;
    }
    return std::sqrt(best2);
  }

 private:
  std::pair<int, int> clamp_cell(const Point2& p) const {
    return {std::clamp(static_cast<int>(std::floor((p.x() - lo_.x()) / cell_)), 0, nx_ - 1),
            std::clamp(static_cast<int>(std::floor((p.y() - lo_.y()) / cell_)), 0, ny_ - 1)};
  }

  const PointList& points_;
  double cell_;
  Point2 lo_, hi_;
  int nx_ = 1, ny_ = 1;
  std::vector<std::uint32_t> start_;
  std::vector<std::uint32_t> order_;
};

double box_gap(const Point2& alo, const Point2& ahi, const Point2& blo, const Point2& bhi) {
  const Point2 gap = (blo - ahi).cwiseMax(alo - bhi).cwiseMax(Point2::Zero());
  return gap.norm();
}

std::string fmt(double v, int precision = 6) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", precision, v);
  return buf;
}

bool mask_hits(const ChangeMask& mask, const PointList& gt, double tolerance) {
  for (const auto& f : mask.points) {
    for (const auto& g : gt) {
      if ((f.position - g).norm() <= tolerance) return true;
    }
  }
  return false;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  // splitmix64 finalizer over the combined value.
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (a + 1) + 0xbf58476d1ce4e5b9ull * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

std::vector<GroundTruthPair> ground_truth_pairs(const std::vector<LocalMap>& maps, double min_gap_m,
                                                double max_avg_nn_m) {
  std::vector<GroundTruthPair> pairs;
  std::vector<std::unique_ptr<NearestGrid>> grids;
  grids.reserve(maps.size());
  for (const auto& m : maps) {
    grids.push_back(m.points.empty() ? nullptr : std::make_unique<NearestGrid>(m.points));
  }
  for (std::size_t i = 0; i < maps.size(); ++i) {
    if (!grids[i]) continue;
    const PointList& query = maps[i].points;
    double best = kInf;
    std::size_t best_j = 0;
    for (std::size_t j = 0; j < maps.size(); ++j) {
      if (!grids[j] || std::abs(maps[i].arc_start - maps[j].arc_start) <= min_gap_m) continue;
      // A candidate whose box is farther than the cutoff cannot produce a pair.
      if (box_gap(grids[i]->lo(), grids[i]->hi(), grids[j]->lo(), grids[j]->hi()) > max_avg_nn_m) {
        continue;
      }
      const double limit = std::min(best, max_avg_nn_m) * static_cast<double>(query.size());
      double sum = 0.0;
      bool pruned = false;
      for (const auto& p : query) {
        sum += grids[j]->nearest_distance(p);
        if (sum > limit) {
          pruned = true;
          break;
        }
      }
      if (pruned) continue;
      const double avg = sum / static_cast<double>(query.size());
      if (avg < best) {
        best = avg;
        best_j = j;
      }
    }
    if (best <= max_avg_nn_m) {
      pairs.push_back({maps[i].id, maps[best_j].id, best,
                       std::abs(maps[i].arc_start - maps[best_j].arc_start)});
    }
  }
  return pairs;
}

double anr(const std::vector<RankedTask>& tasks) {
  if (tasks.empty()) throw Error("anr: no tasks");
  double sum = 0.0;
  for (const auto& t : tasks) {
    if (t.rank < 1 || t.rank > t.n) throw Error("anr: rank outside 1..N");
    sum += 100.0 * static_cast<double>(t.rank) / static_cast<double>(t.n);
  }
  return sum / static_cast<double>(tasks.size());
}

double anr_per_dataset(const std::vector<RankedTask>& tasks) {
  if (tasks.empty()) throw Error("anr: no tasks");
  std::map<std::string, std::vector<RankedTask>> by_dataset;
  for (const auto& t : tasks) by_dataset[t.dataset].push_back(t);
  double sum = 0.0;
  for (const auto& [name, group] : by_dataset) sum += anr(group);
  return sum / static_cast<double>(by_dataset.size());
}

double recognition_rate(const std::vector<RankedTask>& tasks, double top_percent) {
  if (tasks.empty()) throw Error("recognition_rate: no tasks");
  std::size_t hits = 0;
  for (const auto& t : tasks) {
    if (t.rank < 1 || t.rank > t.n) throw Error("recognition_rate: rank outside 1..N");
    // Integer comparison of 100 * rank <= X * n avoids rounding at the boundary.
    if (100.0 * static_cast<double>(t.rank) <= top_percent * static_cast<double>(t.n)) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(tasks.size());
}

std::size_t first_hit_rank(const std::vector<ChangeMask>& ranked_masks, const PointList& ground_truth,
                           double tolerance) {
  for (std::size_t r = 0; r < ranked_masks.size(); ++r) {
    if (mask_hits(ranked_masks[r], ground_truth, tolerance)) return r + 1;
  }
  return 0;
}

std::vector<RecallPoint> change_recall_curve(const std::vector<std::vector<ChangeMask>>& ranked_masks,
                                             const std::vector<PointList>& ground_truth,
                                             double tolerance, std::size_t max_rank) {
  if (ranked_masks.size() != ground_truth.size()) {
    throw Error("change_recall_curve: masks and ground truth differ in length");
  }
  std::vector<std::size_t> first(ranked_masks.size());
  for (std::size_t q = 0; q < ranked_masks.size(); ++q) {
    first[q] = first_hit_rank(ranked_masks[q], ground_truth[q], tolerance);
  }
  std::vector<RecallPoint> curve;
  for (std::size_t k = 1; k <= max_rank; ++k) {
    std::size_t hits = 0;
    for (std::size_t f : first) hits += (f != 0 && f <= k) ? 1 : 0;
    curve.push_back({k, ranked_masks.empty() ? 0.0
                                             : static_cast<double>(hits) /
                                                   static_cast<double>(ranked_masks.size())});
  }
  return curve;
}

PlannerSettings ExperimentConfig::planner_settings() const {
  PlannerSettings p;
  p.method = planner;
  p.seed = seed;
  p.room_samples = room_samples;
  return p;
}

LmdSettings ExperimentConfig::lmd_settings() const { return LmdSettings::for_descriptor(descriptor_id, q); }

PyramidConfig ExperimentConfig::pyramid() const {
  PyramidConfig p;
  p.levels = L;
  p.base_width = W;
  p.bag_of_words = method == RetrievalMethod::kBow;
  return p;
}

DetectorConfig ExperimentConfig::detector() const {
  DetectorConfig d;
  d.lof_neighbors = K_lof;
  d.lof_threshold = T_lof;
  d.nnd_threshold = T_nnd;
  return d;
}

ExperimentConfig parse_experiment_config(std::istream& is) {
  ExperimentConfig cfg;
  std::string line;
  std::size_t line_no = 0;
  std::set<std::string> seen;
  while (std::getline(is, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(line_no, "expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!seen.insert(key).second) throw ParseError(line_no, "duplicate key '" + key + "'");
    auto number = [&]() {
      char* end = nullptr;
      const double v = std::strtod(value.c_str(), &end);
      if (value.empty() || *end != '\0' || !std::isfinite(v)) {
        throw ParseError(line_no, "invalid number for " + key + ": '" + value + "'");
      }
      return v;
    };
    auto integer = [&]() {
      const double v = number();
      if (v != std::floor(v) || v < 0) throw ParseError(line_no, key + " must be a non-negative integer");
      return v;
    };
    if (key == "window") cfg.window = number();
    else if (key == "stride") cfg.stride = number();
    else if (key == "planner") cfg.planner = planner_method_from_string(value);
    else if (key == "descriptor_id") cfg.descriptor_id = static_cast<int>(integer());
    else if (key == "q") cfg.q = number();
    else if (key == "W") cfg.W = number();
    else if (key == "L") cfg.L = static_cast<int>(integer());
    else if (key == "K_lof") cfg.K_lof = static_cast<int>(integer());
    else if (key == "T_lof") cfg.T_lof = number();
    else if (key == "T_nnd") cfg.T_nnd = number();
    else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(std::stoull(value));
    else if (key == "mode") {
      if (value == "changed") cfg.mode = ExperimentMode::kChanged;
      else if (value == "stationary") cfg.mode = ExperimentMode::kStationary;
      else throw ParseError(line_no, "mode must be changed or stationary");
    } else if (key == "method") {
      if (value == "lmd") cfg.method = RetrievalMethod::kLmd;
      else if (value == "bow") cfg.method = RetrievalMethod::kBow;
      else throw ParseError(line_no, "method must be lmd or bow");
    } else if (key == "top") cfg.top = static_cast<std::size_t>(integer());
    else if (key == "hit_tolerance") cfg.hit_tolerance = number();
    else if (key == "loop_gap") cfg.loop_gap = number();
    else if (key == "revisit_cutoff") cfg.revisit_cutoff = number();
    else if (key == "room_samples") cfg.room_samples = static_cast<int>(integer());
    else if (key == "max_queries") cfg.max_queries = static_cast<std::size_t>(integer());
    else throw ParseError(line_no, "unknown key '" + key + "'");
  }
  if (cfg.descriptor_id < 1 || cfg.descriptor_id > kRetrievalConfigCount) {
    throw Error("descriptor_id must be in 1.." + std::to_string(kRetrievalConfigCount));
  }
  if (!(cfg.window > 0) || !(cfg.stride > 0) || !(cfg.q > 0) || !(cfg.W > 0) || cfg.top < 1) {
    throw Error("window, stride, q, W and top must be positive");
  }
  cfg.detector().validate();
  return cfg;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot read config " + path.string());
  return parse_experiment_config(is);
}

std::string format_experiment_config(const ExperimentConfig& c) {
  std::ostringstream os;
  os << "window = " << fmt(c.window, 3) << "\n"
     << "stride = " << fmt(c.stride, 3) << "\n"
     << "planner = " << to_string(c.planner) << "\n"
     << "descriptor_id = " << c.descriptor_id << "\n"
     << "q = " << fmt(c.q, 4) << "\n"
     << "W = " << fmt(c.W, 3) << "\n"
     << "L = " << c.L << "\n"
     << "K_lof = " << c.K_lof << "\n"
     << "T_lof = " << fmt(c.T_lof, 3) << "\n"
     << "T_nnd = " << fmt(c.T_nnd, 3) << "\n"
     << "seed = " << c.seed << "\n"
     << "mode = " << (c.mode == ExperimentMode::kChanged ? "changed" : "stationary") << "\n"
     << "method = " << (c.method == RetrievalMethod::kBow ? "bow" : "lmd") << "\n"
     << "top = " << c.top << "\n"
     << "hit_tolerance = " << fmt(c.hit_tolerance, 3) << "\n"
     << "loop_gap = " << fmt(c.loop_gap, 3) << "\n"
     << "revisit_cutoff = " << fmt(c.revisit_cutoff, 3) << "\n"
     << "room_samples = " << c.room_samples << "\n"
     << "max_queries = " << c.max_queries << "\n";
  return os.str();
}

std::vector<EncodedDataset> encode_datasets(const DatasetCollection& data, const ExperimentConfig& cfg) {
  const LmdSettings settings = cfg.lmd_settings();
  const ProjectionMatrix projection(settings.retrieval);
  const PlannerSettings planner = cfg.planner_settings();
  std::vector<EncodedDataset> out;
  for (const auto& maps : data) {
    EncodedDataset ds;
    ds.maps = maps;
    for (const auto& m : maps) ds.descriptors.push_back(encode_local_map(m, planner, settings, projection));
    ds.pairs = ground_truth_pairs(maps, cfg.loop_gap, cfg.revisit_cutoff);
    out.push_back(std::move(ds));
  }
  return out;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, const DatasetCollection& data) {
  return run_experiment(cfg, encode_datasets(data, cfg));
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, const std::vector<EncodedDataset>& data) {
  ExperimentResult result;
  result.config = cfg;
  const LmdSettings settings = cfg.lmd_settings();
  const ProjectionMatrix projection(settings.retrieval);
  const PlannerSettings planner = cfg.planner_settings();
  const PyramidConfig pyramid = cfg.pyramid();
  const DetectorConfig detector = cfg.detector();

  std::vector<RankedTask> tasks;
  std::vector<std::vector<ChangeMask>> all_masks;
  std::vector<PointList> all_gt;

  for (std::size_t d = 0; d < data.size(); ++d) {
    const EncodedDataset& ds = data[d];
    if (ds.maps.size() != ds.descriptors.size()) throw Error("run_experiment: dataset not encoded");
    InvertedIndex index(settings, pyramid);
    std::map<MapId, std::size_t> by_id;
    for (std::size_t i = 0; i < ds.maps.size(); ++i) {
      if (!(ds.descriptors[i].settings == settings)) {
        throw Error("run_experiment: dataset encoded with different descriptor settings");
      }
      index.insert(ds.descriptors[i]);
      by_id[ds.maps[i].id] = i;
    }
    result.metrics.database_maps += ds.maps.size();

    std::vector<GroundTruthPair> pairs = ds.pairs;
    if (cfg.max_queries > 0 && pairs.size() > cfg.max_queries) {
      std::vector<GroundTruthPair> subset;
      for (std::size_t k = 0; k < cfg.max_queries; ++k) subset.push_back(pairs[k * pairs.size() / cfg.max_queries]);
      pairs = std::move(subset);
    }

    for (const auto& pair : pairs) {
      const std::size_t qi = by_id.at(pair.query);
      const std::size_t gi = by_id.at(pair.relevant);
      const LocalMap& qmap = ds.maps[qi];

      LocalMapDescriptor query;
      PointList gt;
      if (cfg.mode == ExperimentMode::kChanged) {
        const SimulatedChange sim = inject_change(qmap, mix_seed(cfg.seed, d, qmap.id.index));
        query = encode_local_map(sim.map, planner, settings, projection);
        gt = sim.ground_truth;
      } else {
        query = ds.descriptors[qi];
      }

      auto eligible = [&](std::size_t j) {
        return std::abs(ds.maps[j].arc_start - qmap.arc_start) > cfg.loop_gap;
      };
      std::size_t n = 0;
      for (std::size_t j = 0; j < ds.maps.size(); ++j) n += eligible(j) ? 1 : 0;

      std::vector<MatchResult> ranked;
      for (auto& r : index.query_ranked(query)) {
        if (eligible(by_id.at(r.map_id))) ranked.push_back(std::move(r));
      }

      TaskRow row;
      row.query = pair.query;
      row.relevant = pair.relevant;
      row.n = n;
      const auto hit = std::find_if(ranked.begin(), ranked.end(),
                                    [&](const MatchResult& r) { return r.map_id == pair.relevant; });
      if (hit != ranked.end()) {
        row.gt_rank = static_cast<std::size_t>(hit - ranked.begin()) + 1;
        row.k = hit->score;
      } else {
        // Unscored maps follow every scored one, in map id order.
        std::size_t before = 0;
        for (std::size_t j = 0; j < ds.maps.size(); ++j) {
          if (!eligible(j) || ds.maps[j].id >= pair.relevant) continue;
          const bool scored = std::any_of(ranked.begin(), ranked.end(),
                                          [&](const MatchResult& r) { return r.map_id == ds.maps[j].id; });
          before += scored ? 0 : 1;
        }
        row.gt_rank = ranked.size() + before + 1;
      }

      std::vector<ChangeMask> masks;
      for (std::size_t r = 0; r < ranked.size() && r < cfg.top; ++r) {
        masks.push_back(detect_changes(query, ds.descriptors[by_id.at(ranked[r].map_id)], ranked[r], detector));
      }
      masks = rank_change_masks(std::move(masks));

      const MatchResult relevant_match = hit != ranked.end() ? *hit : match_pair(query, ds.descriptors[gi], pyramid);
      const ChangeMask relevant_mask = detect_changes(query, ds.descriptors[gi], relevant_match, detector);
      row.mask_size = relevant_mask.points.size();
      for (const auto& f : relevant_mask.points) {
        for (const auto& g : gt) {
          if ((f.position - g).norm() <= cfg.hit_tolerance) {
            ++row.flagged_near_change;
            break;
          }
        }
      }
      if (cfg.mode == ExperimentMode::kChanged) {
        row.hit_rank = first_hit_rank(masks, gt, cfg.hit_tolerance);
        all_masks.push_back(std::move(masks));
        all_gt.push_back(std::move(gt));
      }

      tasks.push_back({row.gt_rank, row.n, pair.query.dataset});
      result.rows.push_back(std::move(row));
    }
  }

  Metrics& m = result.metrics;
  m.tasks = tasks.size();
  if (!tasks.empty()) {
    m.anr_per_query = anr(tasks);
    m.anr_per_dataset = anr_per_dataset(tasks);
    for (double x : {1.0, 5.0, 10.0, 20.0, 50.0}) m.top_rates[x] = recognition_rate(tasks, x);
  }
  if (!all_masks.empty()) m.recall_curve = change_recall_curve(all_masks, all_gt, cfg.hit_tolerance, cfg.top);
  return result;
}

void write_experiment_outputs(const std::filesystem::path& dir, const ExperimentResult& result) {
  std::filesystem::create_directories(dir);
  const Metrics& m = result.metrics;
  {
    std::ofstream os(dir / "metrics.txt", std::ios::binary);
    os << "tasks: " << m.tasks << "\n"
       << "database_maps: " << m.database_maps << "\n"
       << "anr_per_query: " << fmt(m.anr_per_query, 4) << "\n"
       << "anr_per_dataset: " << fmt(m.anr_per_dataset, 4) << "\n";
    for (const auto& [x, rate] : m.top_rates) os << "top_" << fmt(x, 0) << "_rate: " << fmt(rate, 4) << "\n";
    for (const auto& p : m.recall_curve) os << "change_recall@" << p.rank << ": " << fmt(p.recall, 4) << "\n";
    os << "\n# config\n" << format_experiment_config(result.config);
  }
  {
    std::ofstream os(dir / "per_task.csv", std::ios::binary);
    os << "query_id,gt_rank,N,K,mask_size,hit_rank,relevant_id,flagged_near_change\n";
    for (const auto& r : result.rows) {
      os << r.query.str() << "," << r.gt_rank << "," << r.n << "," << fmt(r.k, 4) << "," << r.mask_size
         << "," << r.hit_rank << "," << r.relevant.str() << "," << r.flagged_near_change << "\n";
    }
  }
  {
    std::ofstream os(dir / "recall_curve.csv", std::ios::binary);
    os << "rank,recall\n";
    for (const auto& p : m.recall_curve) os << p.rank << "," << fmt(p.recall, 6) << "\n";
  }
}

std::vector<LocalMap> load_dataset(const std::filesystem::path& path, const ExperimentConfig& cfg) {
  if (std::filesystem::is_directory(path)) return load_map_archive(path);
  std::ifstream is(path);
  if (!is) throw Error("cannot read dataset " + path.string());
  return segment_local_maps(parse_carmen_log(is), cfg.window, cfg.stride, path.stem().string());
}

std::vector<LocalMap> write_synthetic_benchmark(const std::filesystem::path& dir, std::uint64_t seed,
                                                double window, double stride) {
  std::filesystem::create_directories(dir);
  const SyntheticWorld world = make_synthetic_world(seed);
  const auto scans = simulate_scans(world, seed);
  const auto log_path = dir / "synthetic.log";
  {
    std::ofstream os(log_path, std::ios::binary);
    if (!os) throw Error("cannot write " + log_path.string());
    write_carmen_log(os, scans);
  }
  std::ifstream is(log_path);
  const auto maps = segment_local_maps(parse_carmen_log(is), window, stride, "synthetic");
  save_map_archive(dir / "maps", maps);
  return maps;
}

}  // namespace lmd
