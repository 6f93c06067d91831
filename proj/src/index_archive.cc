#include "lmd/index_archive.h"

#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "lmd/binary_io.h"

namespace lmd {

namespace {

constexpr std::uint32_t kVersion = 1;

std::int16_t narrow_pose_word(std::int32_t w) {
  if (w < std::numeric_limits<std::int16_t>::min() || w > std::numeric_limits<std::int16_t>::max()) {
    throw Error("pose word out of 16-bit range");
  }
  return static_cast<std::int16_t>(w);
}

std::string exact(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_config(std::ostream& os, const std::string& prefix, const DescriptorConfig& c) {
  os << prefix << "radius = " << exact(c.radius) << "\n"
     << prefix << "sectors = " << c.sectors << "\n"
     << prefix << "shells = " << c.shells << "\n"
     << prefix << "fine_resolution = " << exact(c.fine_resolution) << "\n"
     << prefix << "bits = " << c.bits << "\n"
     << prefix << "seed = " << c.seed << "\n";
}

DescriptorConfig read_config(const std::map<std::string, std::string>& kv, const std::string& prefix) {
  auto get = [&](const std::string& k) {
    const auto it = kv.find(prefix + k);
    if (it == kv.end()) throw Error("index header missing " + prefix + k);
    return it->second;
  };
  DescriptorConfig c;
  c.radius = std::stod(get("radius"));
  c.sectors = std::stoi(get("sectors"));
  c.shells = std::stoi(get("shells"));
  c.fine_resolution = std::stod(get("fine_resolution"));
  c.bits = std::stoi(get("bits"));
  c.seed = std::stoull(get("seed"));
  c.validate();
  return c;
}

}  // namespace

void write_lmd(std::ostream& os, const LocalMapDescriptor& lmd) {
  binary::put_string(os, lmd.map_id.dataset);
  binary::put<std::uint32_t>(os, lmd.map_id.index);
  binary::put<double>(os, lmd.viewpoint.position.x());
  binary::put<double>(os, lmd.viewpoint.position.y());
  binary::put<double>(os, lmd.viewpoint.frame.theta);
  binary::put<std::uint8_t>(os, static_cast<std::uint8_t>(lmd.viewpoint.method));
  binary::put<std::uint8_t>(os, static_cast<std::uint8_t>(lmd.orientation));
  const std::size_t n = lmd.size();
  binary::put<std::uint32_t>(os, static_cast<std::uint32_t>(n));
  for (const auto& t : lmd.triples) {
    binary::put<std::uint16_t>(os, t.appearance);
    binary::put<std::int16_t>(os, narrow_pose_word(t.x));
    binary::put<std::int16_t>(os, narrow_pose_word(t.y));
  }
  for (auto w : lmd.change_words) binary::put<std::uint64_t>(os, w);
  for (const auto& p : lmd.positions) {
    binary::put<double>(os, p.x());
    binary::put<double>(os, p.y());
  }
  for (const auto& words : lmd.appearance_turns) {
    for (auto w : words) binary::put<std::uint16_t>(os, w);
  }
  for (const auto& words : lmd.change_turns) {
    for (auto w : words) binary::put<std::uint64_t>(os, w);
  }
}

LocalMapDescriptor read_lmd(std::istream& is, const LmdSettings& settings) {
  LocalMapDescriptor lmd;
  lmd.settings = settings;
  lmd.map_id.dataset = binary::get_string(is);
  lmd.map_id.index = binary::get<std::uint32_t>(is);
  lmd.viewpoint.position.x() = binary::get<double>(is);
  lmd.viewpoint.position.y() = binary::get<double>(is);
  lmd.viewpoint.frame.theta = binary::get<double>(is);
  const auto method = binary::get<std::uint8_t>(is);
  if (method > 1) throw Error("bad planner method in descriptor record");
  lmd.viewpoint.method = static_cast<PlannerMethod>(method);
  lmd.orientation = binary::get<std::uint8_t>(is);
  if (lmd.orientation > 3) throw Error("bad orientation in descriptor record");
  const auto n = binary::get<std::uint32_t>(is);
  lmd.triples.resize(n);
  for (auto& t : lmd.triples) {
    t.appearance = binary::get<std::uint16_t>(is);
    t.x = binary::get<std::int16_t>(is);
    t.y = binary::get<std::int16_t>(is);
  }
  lmd.change_words.resize(n);
  for (auto& w : lmd.change_words) w = binary::get<std::uint64_t>(is);
  lmd.positions.resize(n);
  for (auto& p : lmd.positions) {
    p.x() = binary::get<double>(is);
    p.y() = binary::get<double>(is);
  }
  lmd.appearance_turns.resize(n);
  for (auto& words : lmd.appearance_turns) {
    for (auto& w : words) w = binary::get<std::uint16_t>(is);
  }
  lmd.change_turns.resize(n);
  for (auto& words : lmd.change_turns) {
    for (auto& w : words) w = binary::get<std::uint64_t>(is);
  }
  return lmd;
}

void save_index(const std::filesystem::path& dir, const InvertedIndex& index,
                const PlannerSettings& planner) {
  std::filesystem::create_directories(dir);
  const LmdSettings& s = index.settings();
  {
    std::ofstream os(dir / "header.txt", std::ios::binary);
    if (!os) throw Error("cannot write index header in " + dir.string());
    os << "format = lmd-index-" << kVersion << "\n"
       << "descriptor_id = " << s.descriptor_id << "\n"
       << "pose_quantum = " << exact(s.pose_quantum) << "\n";
    write_config(os, "retrieval.", s.retrieval);
    write_config(os, "change.", s.change);
    os << "pyramid.levels = " << index.pyramid().levels << "\n"
       << "pyramid.base_width = " << exact(index.pyramid().base_width) << "\n"
       << "pyramid.bag_of_words = " << (index.pyramid().bag_of_words ? 1 : 0) << "\n"
       << "planner.method = " << to_string(planner.method) << "\n"
       << "planner.seed = " << planner.seed << "\n"
       << "planner.room_samples = " << planner.room_samples << "\n"
       << "planner.resolution = " << exact(planner.resolution) << "\n"
       << "planner.dominance = " << exact(planner.dominance) << "\n"
       << "maps = " << index.size() << "\n";
  }
  {
    std::ofstream os(dir / "descriptors.bin", std::ios::binary);
    os.write("LMDS", 4);
    binary::put<std::uint32_t>(os, kVersion);
    binary::put<std::uint32_t>(os, static_cast<std::uint32_t>(index.size()));
    for (const auto& d : index.descriptors()) write_lmd(os, d);
  }
  {
    std::ofstream os(dir / "postings.bin", std::ios::binary);
    os.write("LMDP", 4);
    binary::put<std::uint32_t>(os, kVersion);
    const std::size_t words = std::size_t{1} << s.retrieval.bits;
    std::uint32_t nonempty = 0;
    for (std::size_t w = 0; w < words; ++w) nonempty += index.postings(static_cast<AppearanceWord>(w)).empty() ? 0 : 1;
    binary::put<std::uint32_t>(os, nonempty);
    for (std::size_t w = 0; w < words; ++w) {
      const auto& list = index.postings(static_cast<AppearanceWord>(w));
      if (list.empty()) continue;
      binary::put<std::uint16_t>(os, static_cast<std::uint16_t>(w));
      binary::put<std::uint32_t>(os, static_cast<std::uint32_t>(list.size()));
      for (const auto& p : list) {
        binary::put<std::uint32_t>(os, p.map);
        binary::put<std::uint32_t>(os, p.feature);
      }
    }
  }
}

StoredIndex load_index(const std::filesystem::path& dir) {
  std::ifstream hs(dir / "header.txt");
  if (!hs) throw Error("not an index directory: " + dir.string());
  std::map<std::string, std::string> kv;
  for (std::string line; std::getline(hs, line);) {
    const auto eq = line.find(" = ");
    if (eq != std::string::npos) kv[line.substr(0, eq)] = line.substr(eq + 3);
  }
  auto get = [&](const std::string& k) {
    const auto it = kv.find(k);
    if (it == kv.end()) throw Error("index header missing " + k);
    return it->second;
  };
  if (get("format") != "lmd-index-" + std::to_string(kVersion)) throw Error("unsupported index format");

  LmdSettings settings;
  settings.descriptor_id = std::stoi(get("descriptor_id"));
  settings.pose_quantum = std::stod(get("pose_quantum"));
  settings.retrieval = read_config(kv, "retrieval.");
  settings.change = read_config(kv, "change.");
  PyramidConfig pyramid;
  pyramid.levels = std::stoi(get("pyramid.levels"));
  pyramid.base_width = std::stod(get("pyramid.base_width"));
  pyramid.bag_of_words = get("pyramid.bag_of_words") == "1";
  PlannerSettings planner;
  planner.method = planner_method_from_string(get("planner.method"));
  planner.seed = std::stoull(get("planner.seed"));
  planner.room_samples = std::stoi(get("planner.room_samples"));
  planner.resolution = std::stod(get("planner.resolution"));
  planner.dominance = std::stod(get("planner.dominance"));

  StoredIndex stored{InvertedIndex(settings, pyramid), planner};
  std::ifstream ds(dir / "descriptors.bin", std::ios::binary);
  binary::expect_magic(ds, "LMDS");
  if (binary::get<std::uint32_t>(ds) != kVersion) throw Error("unsupported descriptor archive version");
  const auto count = binary::get<std::uint32_t>(ds);
  for (std::uint32_t i = 0; i < count; ++i) stored.index.insert(read_lmd(ds, settings));

  // Postings are rebuilt on insert; the stored file must agree with them.
  std::ifstream ps(dir / "postings.bin", std::ios::binary);
  binary::expect_magic(ps, "LMDP");
  if (binary::get<std::uint32_t>(ps) != kVersion) throw Error("unsupported postings version");
  const auto words = binary::get<std::uint32_t>(ps);
  std::size_t total = 0;
  for (std::uint32_t i = 0; i < words; ++i) {
    const auto word = binary::get<std::uint16_t>(ps);
    const auto n = binary::get<std::uint32_t>(ps);
    const auto& list = stored.index.postings(word);
    if (list.size() != n) throw Error("postings file disagrees with descriptors");
    for (std::uint32_t k = 0; k < n; ++k) {
      const auto map = binary::get<std::uint32_t>(ps);
      const auto feature = binary::get<std::uint32_t>(ps);
      if (list[k].map != map || list[k].feature != feature) {
        throw Error("postings file disagrees with descriptors");
      }
    }
    total += n;
  }
  if (total != stored.index.posting_count()) throw Error("postings file disagrees with descriptors");
  return stored;
}

}  // namespace lmd
