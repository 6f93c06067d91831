#ifndef LMD_INDEX_ARCHIVE_H_
#define LMD_INDEX_ARCHIVE_H_

#include <filesystem>
#include <istream>
#include <ostream>

#include "lmd/descriptor.h"
#include "lmd/retrieval.h"
#include "lmd/viewpoint_planner.h"

namespace lmd {

// Per-map descriptor record (little-endian):
//   u32 len, dataset bytes; u32 index
//   f64 viewpoint x, y, theta; u8 planner method; u8 orientation
//   u32 N
//   N x (u16 appearance word, i16 pose word x, i16 pose word y)
//   N x u64 change word (60 bits used)
//   N x (f64 x, f64 y) viewpoint-relative position
//   N x 4 x u16 appearance word per quarter turn
//   N x 4 x u64 change word per quarter turn
// Settings are not repeated per record; they live in the archive header.
void write_lmd(std::ostream& os, const LocalMapDescriptor& lmd);
LocalMapDescriptor read_lmd(std::istream& is, const LmdSettings& settings);

struct StoredIndex {
  InvertedIndex index;
  PlannerSettings planner;
};

// Directory with header.txt (settings and projection seed), postings.bin
// and descriptors.bin.
void save_index(const std::filesystem::path& dir, const InvertedIndex& index,
                const PlannerSettings& planner);
StoredIndex load_index(const std::filesystem::path& dir);

}  // namespace lmd

#endif  // LMD_INDEX_ARCHIVE_H_
