#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lmd/change_detect.h"
#include "lmd/change_sim.h"
#include "lmd/descriptor.h"
#include "lmd/eval_harness.h"
#include "lmd/index_archive.h"
#include "lmd/map_archive.h"
#include "lmd/map_ingest.h"
#include "lmd/retrieval.h"
#include "lmd/viewpoint_planner.h"

namespace fs = std::filesystem;
using namespace lmd;

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6f", std::abs(v) < 5e-7 ? 0.0 : v);
  return buf;
}

int run_ingest(const fs::path& log, double window, double stride, const fs::path& out,
               std::string dataset) {
  std::ifstream is(log);
  if (!is) throw Error("cannot open " + log.string());
  if (dataset.empty()) dataset = log.stem().string();
  const auto scans = parse_carmen_log(is);
  const auto maps = segment_local_maps(scans, window, stride, dataset);
  save_map_archive(out, maps);
  std::cout << "scans " << scans.size() << "\nmaps " << maps.size() << "\n";
  return 0;
}

void write_pgm(const fs::path& path, const OccupancyGrid& grid) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write " + path.string());
  os << "P5\n" << grid.width() << " " << grid.height() << "\n255\n";
  // Top row first, so +y points up in viewers.
  for (int iy = grid.height() - 1; iy >= 0; --iy) {
    for (int ix = 0; ix < grid.width(); ++ix) {
      unsigned char v = 128;
      if (grid.label(ix, iy) == CellLabel::kOccupied) v = 0;
      if (grid.label(ix, iy) == CellLabel::kUnoccupied) v = 255;
      os.put(static_cast<char>(v));
    }
  }
}

int run_plan(const fs::path& record, const std::string& method, std::uint64_t seed,
             const std::string& grid_out) {
  const LocalMap map = load_local_map(record);
  PlannerSettings settings;
  settings.method = planner_method_from_string(method);
  settings.seed = seed;
  const PlannedMap planned = plan_viewpoint(map, settings);
  const Viewpoint& vp = planned.viewpoint;
  std::cout << "{ map_id: " << map.id.str() << ", method: " << to_string(vp.method)
            << ", theta: " << fmt(vp.frame.theta) << ", x: " << fmt(vp.position.x())
            << ", y: " << fmt(vp.position.y()) << ", occupied_cells: "
            << planned.aligned_grid.count_label(CellLabel::kOccupied) << " }\n";
  if (!grid_out.empty()) write_pgm(grid_out, planned.aligned_grid);
  return 0;
}

int run_build_index(const fs::path& maps_dir, const fs::path& out, int descriptor_id, double q,
                    const std::string& planner, std::uint64_t seed, double W, int L, bool bow) {
  const auto maps = load_map_archive(maps_dir);
  PlannerSettings ps;
  ps.method = planner_method_from_string(planner);
  ps.seed = seed;
  const LmdSettings settings = LmdSettings::for_descriptor(descriptor_id, q);
  PyramidConfig pyramid{L, W, bow};
  const ProjectionMatrix projection(settings.retrieval);
  InvertedIndex index(settings, pyramid);
  for (const auto& m : maps) index.insert(encode_local_map(m, ps, settings, projection));
  save_index(out, index, ps);
  std::cout << "maps " << index.size() << "\npostings " << index.posting_count() << "\n";
  return 0;
}

LocalMapDescriptor encode_query(const StoredIndex& stored, const fs::path& record) {
  const LocalMap map = load_local_map(record);
  const ProjectionMatrix projection(stored.index.settings().retrieval);
  return encode_local_map(map, stored.planner, stored.index.settings(), projection);
}

int run_query(const fs::path& index_dir, const fs::path& record, std::size_t top) {
  const StoredIndex stored = load_index(index_dir);
  const auto query = encode_query(stored, record);
  const auto results = stored.index.query_ranked(query, top);
  std::cout << "rank,map_id,score,orientation,offset_x,offset_y\n";
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& r = results[i];
    std::cout << i + 1 << "," << r.map_id.str() << "," << fmt(r.score) << "," << r.orientation
              << "," << r.offset.x() << "," << r.offset.y() << "\n";
  }
  return 0;
}

int run_detect(const fs::path& index_dir, const fs::path& record, std::size_t top,
               const DetectorConfig& cfg, const std::string& csv_out) {
  cfg.validate();
  const StoredIndex stored = load_index(index_dir);
  const auto query = encode_query(stored, record);
  std::vector<ChangeMask> masks;
  for (const auto& r : stored.index.query_ranked(query, top)) {
    masks.push_back(detect_changes(query, *stored.index.find(r.map_id), r, cfg));
  }
  masks = rank_change_masks(std::move(masks));
  std::ofstream csv;
  if (!csv_out.empty()) {
    csv.open(csv_out);
    if (!csv) throw Error("cannot write " + csv_out);
    csv << "mask_rank,db_id,rank_score,feature,x,y,r\n";
  }
  for (std::size_t i = 0; i < masks.size(); ++i) {
    const auto& m = masks[i];
    std::cout << "MASK " << i + 1 << " db " << m.db_id.str() << " K " << fmt(m.rank_score)
              << " points " << m.points.size() << "\n";
    for (const auto& p : m.points) {
      std::cout << "  " << fmt(p.position.x()) << " " << fmt(p.position.y()) << " " << fmt(p.score)
                << "\n";
      if (csv) {
        csv << i + 1 << "," << m.db_id.str() << "," << fmt(m.rank_score) << "," << p.feature << ","
            << fmt(p.position.x()) << "," << fmt(p.position.y()) << "," << fmt(p.score) << "\n";
      }
    }
  }
  return 0;
}

int run_simulate(const fs::path& record, std::uint64_t seed, const fs::path& out) {
  const LocalMap map = load_local_map(record);
  const SimulatedChange sim = inject_change(map, seed);
  save_local_map(out, sim.map);
  fs::path gt = out;
  gt += ".gt";
  std::ofstream os(gt);
  if (!os) throw Error("cannot write " + gt.string());
  os << "# changed endpoints, map frame: x y\n";
  for (const auto& p : sim.ground_truth) os << fmt(p.x()) << " " << fmt(p.y()) << "\n";
  std::cout << "objects " << sim.objects.size() << "\nmodified " << sim.modified.size()
            << "\nattempts " << sim.attempts << "\n";
  return 0;
}

int run_evaluate(const fs::path& config, const std::vector<std::string>& data, const fs::path& out) {
  const ExperimentConfig cfg = load_experiment_config(config);
  DatasetCollection collection;
  for (const auto& d : data) collection.push_back(load_dataset(d, cfg));
  const ExperimentResult result = run_experiment(cfg, collection);
  write_experiment_outputs(out, result);
  std::ifstream metrics(out / "metrics.txt");
  std::cout << metrics.rdbuf();
  return 0;
}

int run_synth(std::uint64_t seed, const fs::path& out) {
  const auto maps = write_synthetic_benchmark(out, seed);
  std::cout << "maps " << maps.size() << "\nlog " << (out / "synthetic.log").string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Local map descriptor retrieval and change detection"};
  app.require_subcommand(1);

  fs::path log, out, record, maps_dir, index_dir, config;
  double window = 5.0, stride = 1.0, q = 0.25, W = 5.0;
  std::string dataset, method = "cog", grid_out, csv_out;
  std::uint64_t seed = 0;
  int descriptor_id = 1, L = 2;
  bool bow = false;
  std::size_t top = 10;
  DetectorConfig det;
  std::vector<std::string> data;

  auto* ingest = app.add_subcommand("ingest", "Segment a CARMEN log into local maps");
  ingest->add_option("--log", log, "CARMEN log")->required();
  ingest->add_option("--window", window, "Trajectory window (m)");
  ingest->add_option("--stride", stride, "Window stride (m)");
  ingest->add_option("--out", out, "Output map directory")->required();
  ingest->add_option("--dataset", dataset, "Dataset name (default: log file stem)");

  auto* plan = app.add_subcommand("plan", "Plan the viewpoint of one local map");
  plan->add_option("--map", record, "Map record")->required();
  plan->add_option("--method", method, "cog or cor");
  plan->add_option("--seed", seed, "Room sampling seed");
  plan->add_option("--grid", grid_out, "Write the aligned occupancy grid as PGM");

  auto* build = app.add_subcommand("build-index", "Encode a map directory into an index");
  build->add_option("--maps", maps_dir, "Map directory")->required();
  build->add_option("--out", out, "Index directory")->required();
  build->add_option("--descriptor", descriptor_id, "Descriptor configuration 1..8");
  build->add_option("--q", q, "Pose quantum (m)");
  build->add_option("--planner", method, "cog or cor");
  build->add_option("--seed", seed, "Planner seed");
  build->add_option("--W", W, "Pyramid base cell width (m)");
  build->add_option("--L", L, "Pyramid levels");
  build->add_flag("--bow", bow, "Appearance words only");

  auto* query = app.add_subcommand("query", "Rank indexed maps against a query map");
  query->add_option("--index", index_dir, "Index directory")->required();
  query->add_option("--map", record, "Query map record")->required();
  query->add_option("--top", top, "Number of results");

  auto* detect = app.add_subcommand("detect", "Change masks of a query against its top matches");
  detect->add_option("--index", index_dir, "Index directory")->required();
  detect->add_option("--query", record, "Query map record")->required();
  detect->add_option("--top", top, "Number of database maps");
  detect->add_option("--t-nnd", det.nnd_threshold, "NN-d threshold");
  detect->add_option("--t-lof", det.lof_threshold, "LOF threshold");
  detect->add_option("--k-lof", det.lof_neighbors, "LOF neighbors");
  detect->add_option("--csv", csv_out, "Write flagged points as CSV");

  auto* simulate = app.add_subcommand("simulate", "Inject virtual objects into a map");
  simulate->add_option("--map", record, "Map record")->required();
  simulate->add_option("--seed", seed, "Seed");
  simulate->add_option("--out", out, "Output record; ground truth goes to <out>.gt")->required();

  auto* evaluate = app.add_subcommand("evaluate", "Run a retrieval and change detection experiment");
  evaluate->add_option("--config", config, "Experiment config")->required();
  evaluate->add_option("--data", data, "Map directories or CARMEN logs")->required();
  evaluate->add_option("--out", out, "Output directory")->required();

  auto* synth = app.add_subcommand("synth", "Generate the synthetic loop benchmark");
  synth->add_option("--seed", seed, "Seed");
  synth->add_option("--out", out, "Output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ingest) return run_ingest(log, window, stride, out, dataset);
    if (*plan) return run_plan(record, method, seed, grid_out);
    if (*build) return run_build_index(maps_dir, out, descriptor_id, q, method, seed, W, L, bow);
    if (*query) return run_query(index_dir, record, top);
    if (*detect) return run_detect(index_dir, record, top, det, csv_out);
    if (*simulate) return run_simulate(record, seed, out);
    if (*evaluate) return run_evaluate(config, data, out);
    if (*synth) return run_synth(seed, out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
