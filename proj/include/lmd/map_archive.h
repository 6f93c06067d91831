#ifndef LMD_MAP_ARCHIVE_H_
#define LMD_MAP_ARCHIVE_H_

#include <filesystem>
#include <istream>
#include <ostream>
#include <vector>

#include "lmd/map_ingest.h"

namespace lmd {

// Binary local map record. Layout (little-endian):
//   "LMAP" u32 version
//   u32 len, dataset bytes; u32 index; f64 arc_start; f64 arc_end
//   u32 P; P x (f64 x, f64 y, f64 theta)        trajectory
//   u32 N; N x (f64 x, f64 y)                   points
//   N x u32                                     observing pose index
void write_local_map(std::ostream& os, const LocalMap& map);
LocalMap read_local_map(std::istream& is);

void save_local_map(const std::filesystem::path& path, const LocalMap& map);
LocalMap load_local_map(const std::filesystem::path& path);

// One record per map, named <index>.lmap, inside one directory per dataset.
void save_map_archive(const std::filesystem::path& dir, const std::vector<LocalMap>& maps);
std::vector<LocalMap> load_map_archive(const std::filesystem::path& dir);

}  // namespace lmd

#endif  // LMD_MAP_ARCHIVE_H_
