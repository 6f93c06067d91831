#include "lmd/map_archive.h"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "lmd/binary_io.h"

namespace lmd {

namespace {
constexpr std::uint32_t kVersion = 1;
}

void write_local_map(std::ostream& os, const LocalMap& map) {
  os.write("LMAP", 4);
  binary::put<std::uint32_t>(os, kVersion);
  binary::put_string(os, map.id.dataset);
  binary::put<std::uint32_t>(os, map.id.index);
  binary::put<double>(os, map.arc_start);
  binary::put<double>(os, map.arc_end);
  binary::put<std::uint32_t>(os, static_cast<std::uint32_t>(map.trajectory.size()));
  for (const auto& p : map.trajectory) {
    binary::put<double>(os, p.x);
    binary::put<double>(os, p.y);
    binary::put<double>(os, p.theta);
  }
  binary::put<std::uint32_t>(os, static_cast<std::uint32_t>(map.points.size()));
  for (const auto& p : map.points) {
    binary::put<double>(os, p.x());
    binary::put<double>(os, p.y());
  }
  for (std::size_t k = 0; k < map.points.size(); ++k) {
    binary::put<std::uint32_t>(os, k < map.point_pose.size() ? map.point_pose[k] : 0u);
  }
}

LocalMap read_local_map(std::istream& is) {
  binary::expect_magic(is, "LMAP");
  if (binary::get<std::uint32_t>(is) != kVersion) throw Error("unsupported LMAP version");
  LocalMap map;
  map.id.dataset = binary::get_string(is);
  map.id.index = binary::get<std::uint32_t>(is);
  map.arc_start = binary::get<double>(is);
  map.arc_end = binary::get<double>(is);
  const auto n_poses = binary::get<std::uint32_t>(is);
  map.trajectory.resize(n_poses);
  for (auto& p : map.trajectory) {
    p.x = binary::get<double>(is);
    p.y = binary::get<double>(is);
    p.theta = binary::get<double>(is);
  }
  const auto n_points = binary::get<std::uint32_t>(is);
  map.points.resize(n_points);
  for (auto& p : map.points) {
    p.x() = binary::get<double>(is);
    p.y() = binary::get<double>(is);
  }
  map.point_pose.resize(n_points);
  for (auto& k : map.point_pose) {
    k = binary::get<std::uint32_t>(is);
    if (k >= n_poses) throw Error("LMAP point references missing pose");
  }
  return map;
}

void save_local_map(const std::filesystem::path& path, const LocalMap& map) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write " + path.string());
  write_local_map(os, map);
}

LocalMap load_local_map(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot read " + path.string());
  return read_local_map(is);
}

void save_map_archive(const std::filesystem::path& dir, const std::vector<LocalMap>& maps) {
  std::filesystem::create_directories(dir);
  for (const auto& m : maps) {
    char name[32];
    std::snprintf(name, sizeof(name), "%06u.lmap", m.id.index);
    save_local_map(dir / name, m);
  }
}

std::vector<LocalMap> load_map_archive(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw Error("not a map archive: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".lmap") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<LocalMap> maps;
  maps.reserve(files.size());
  for (const auto& f : files) maps.push_back(load_local_map(f));
  std::sort(maps.begin(), maps.end(),
            [](const LocalMap& a, const LocalMap& b) { return a.id < b.id; });
  return maps;
}

}  // namespace lmd
