#ifndef LMD_EVAL_HARNESS_H_
#define LMD_EVAL_HARNESS_H_

#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <string>
#include <vector>

#include "lmd/change_detect.h"
#include "lmd/change_sim.h"
#include "lmd/descriptor.h"
#include "lmd/retrieval.h"
#include "lmd/viewpoint_planner.h"

namespace lmd {

struct GroundTruthPair {
  MapId query;
  MapId relevant;
  double avg_nn_distance = 0.0;
  double trajectory_gap = 0.0;
};

// Seed of the change injected into a query map of a dataset.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t dataset, std::uint64_t map_index);

// Loop-closing ground truth within one dataset: the relevant map has the
// smallest mean nearest-neighbor distance among maps more than min_gap_m
// away along the trajectory. Queries whose best candidate is farther than
// max_avg_nn_m are not revisits and are dropped.
std::vector<GroundTruthPair> ground_truth_pairs(const std::vector<LocalMap>& maps,
                                                double min_gap_m = 10.0,
                                                double max_avg_nn_m = 1.0);

// Rank of the relevant map (1-based) among a database of n maps.
struct RankedTask {
  std::size_t rank = 1;
  std::size_t n = 1;
  std::string dataset;
};

// Mean of 100 * rank / n, in percent.
double anr(const std::vector<RankedTask>& tasks);
// Mean over datasets of the per-dataset ANR.
double anr_per_dataset(const std::vector<RankedTask>& tasks);
// Fraction of tasks with 100 * rank / n <= top_percent.
double recognition_rate(const std::vector<RankedTask>& tasks, double top_percent);

struct RecallPoint {
  std::size_t rank = 0;
  double recall = 0.0;
};

// A mask hits if any flagged point is within tolerance of a ground truth
// change point of its query. recall@k is the fraction of queries with a hit
// among their first k ranked masks.
std::vector<RecallPoint> change_recall_curve(const std::vector<std::vector<ChangeMask>>& ranked_masks,
                                             const std::vector<PointList>& ground_truth,
                                             double tolerance, std::size_t max_rank);

// 1-based rank of the first hitting mask, 0 if none.
std::size_t first_hit_rank(const std::vector<ChangeMask>& ranked_masks, const PointList& ground_truth,
                           double tolerance);

enum class ExperimentMode : std::uint8_t { kChanged, kStationary };
enum class RetrievalMethod : std::uint8_t { kLmd, kBow };

struct ExperimentConfig {
  double window = 5.0;
  double stride = 1.0;
  PlannerMethod planner = PlannerMethod::kCoG;
  int descriptor_id = 1;
  double q = 0.25;
  double W = 5.0;
  int L = 2;
  int K_lof = 10;
  double T_lof = 1.6;
  double T_nnd = 1.5;
  std::uint64_t seed = 1;
  ExperimentMode mode = ExperimentMode::kChanged;
  RetrievalMethod method = RetrievalMethod::kLmd;
  std::size_t top = 10;
  double hit_tolerance = 0.5;
  double loop_gap = 10.0;
  double revisit_cutoff = 1.0;
  int room_samples = 500;
  // 0 keeps every ground truth pair; otherwise an evenly spaced subset.
  std::size_t max_queries = 0;

  PlannerSettings planner_settings() const;
  LmdSettings lmd_settings() const;
  PyramidConfig pyramid() const;
  DetectorConfig detector() const;
};

// Flat "key = value" text; '#' starts a comment. Unknown keys and invalid
// values are errors.
ExperimentConfig parse_experiment_config(std::istream& is);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);
std::string format_experiment_config(const ExperimentConfig& cfg);

struct TaskRow {
  MapId query;
  MapId relevant;
  std::size_t gt_rank = 0;
  std::size_t n = 0;
  double k = 0.0;             // score of the relevant map
  std::size_t mask_size = 0;  // flagged points against the relevant map
  std::size_t hit_rank = 0;   // first ranked mask hitting the injected change
  std::size_t flagged_near_change = 0;
};

struct Metrics {
  double anr_per_query = 0.0;
  double anr_per_dataset = 0.0;
  std::map<double, double> top_rates;
  std::vector<RecallPoint> recall_curve;
  std::size_t tasks = 0;
  std::size_t database_maps = 0;
};

struct ExperimentResult {
  ExperimentConfig config;
  Metrics metrics;
  std::vector<TaskRow> rows;
};

// One entry per dataset; maps of one dataset share a trajectory.
using DatasetCollection = std::vector<std::vector<LocalMap>>;

// Database descriptors are reusable across runs that share planner and
// descriptor settings.
struct EncodedDataset {
  std::vector<LocalMap> maps;
  std::vector<LocalMapDescriptor> descriptors;
  std::vector<GroundTruthPair> pairs;
};

std::vector<EncodedDataset> encode_datasets(const DatasetCollection& data, const ExperimentConfig& cfg);

ExperimentResult run_experiment(const ExperimentConfig& cfg, const DatasetCollection& data);
ExperimentResult run_experiment(const ExperimentConfig& cfg, const std::vector<EncodedDataset>& data);

void write_experiment_outputs(const std::filesystem::path& dir, const ExperimentResult& result);

// Loads a map archive directory, or a CARMEN log segmented with the config.
std::vector<LocalMap> load_dataset(const std::filesystem::path& path, const ExperimentConfig& cfg);

// Writes the synthetic benchmark: synthetic.log and the maps/ archive.
std::vector<LocalMap> write_synthetic_benchmark(const std::filesystem::path& dir, std::uint64_t seed,
                                                double window = 5.0, double stride = 1.0);

}  // namespace lmd

#endif  // LMD_EVAL_HARNESS_H_
