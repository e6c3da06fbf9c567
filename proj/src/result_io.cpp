#include "maskfuse/result_io.hpp"

#include <algorithm>

#include "maskfuse/error.hpp"
#include "maskfuse/formats.hpp"
#include "maskfuse/ply.hpp"

namespace maskfuse {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

ordered_json refs_json(const std::vector<MaskRef>& refs) {
  ordered_json a = ordered_json::array();
  for (const auto& r : refs) a.push_back({r.image, r.local_id});
  return a;
}

std::vector<MaskRef> refs_from_json(const json& a) {
  std::vector<MaskRef> refs;
  for (const auto& e : a) refs.push_back({e.at(0).get<ImageIndex>(), e.at(1).get<LocalId>()});
  return refs;
}

ordered_json partition_json(const Partition& p, const std::vector<MaskRef>& refs) {
  ordered_json sv = ordered_json::object();
  for (const auto& [id, members] : p.members()) {
    std::vector<MaskRef> rs;
    for (VertexId v : members) rs.push_back(refs.at(v));
    sv[std::to_string(id)] = {{"members", members}, {"masks", refs_json(rs)}};
  }
  return sv;
}

}  // namespace

void write_result(const SegmentationResult& result, const PipelineConfig& config, const fs::path& dir, bool debug) {
  fs::create_directories(dir);
  const StageReport& r = result.report;

  ordered_json doc;
  doc["seed"] = config.seed;
  doc["class_count"] = result.classes.size();
  doc["classes"] = ordered_json::array();
  for (std::size_t c = 0; c < result.classes.size(); ++c)
    doc["classes"].push_back({{"id", c}, {"members", refs_json(result.classes[c])}});
  doc["consumed_masks"] = refs_json(result.consumed);
  doc["stages"] = {{"masks", r.masks},
                   {"consumed_masks", r.consumed_masks},
                   {"used_image_pairs", r.used_image_pairs},
                   {"considered_pairs", r.considered_pairs},
                   {"clamped_ratios", r.clamped_ratios},
                   {"tau2d", r.tau2d},
                   {"edges_2d", r.edges_2d},
                   {"supervertices_2d", r.supervertices_2d},
                   {"edges_3d", r.edges_3d},
                   {"empty_clouds", r.empty_clouds},
                   {"pruned_pairs_3d", r.pruned_pairs_3d}};
  doc["config"] = config_to_json(config);
  write_file(dir / "classes.json", doc.dump(2) + "\n");
  write_file(dir / "config_echo.json", config_to_json(config).dump(2) + "\n");

  for (std::size_t i = 0; i < result.mhat.size(); ++i)
    write_labelmap(result.mhat[i], dir / ("mhat_" + std::to_string(i) + ".pgm"));
  write_ply(result.cloud, dir / "cloud.ply");

  if (debug && result.partition_2d && result.partition_final) {
    ordered_json dbg;
    dbg["partition_2d"] = partition_json(*result.partition_2d, result.vertex_refs);
    dbg["partition_final"] = partition_json(*result.partition_final, result.vertex_refs);
    write_file(dir / "partition_debug.json", dbg.dump(1) + "\n");
  }
}

SegmentationResult read_result(const fs::path& dir) {
  const fs::path classes_path = dir / "classes.json";
  if (!fs::exists(classes_path)) throw Error("not a result directory (missing classes.json): " + dir.string());
  SegmentationResult result;
  try {
    const json doc = json::parse(read_file(classes_path));
    const auto& classes = doc.at("classes");
    result.classes.resize(classes.size());
    for (const auto& c : classes) {
      const auto id = c.at("id").get<std::size_t>();
      if (id >= result.classes.size()) throw Error("classes.json: class id out of range");
      result.classes[id] = refs_from_json(c.at("members"));
      std::sort(result.classes[id].begin(), result.classes[id].end());
    }
    result.consumed = refs_from_json(doc.at("consumed_masks"));
    std::sort(result.consumed.begin(), result.consumed.end());
  } catch (const json::exception& e) {
    throw Error("classes.json: " + std::string(e.what()));
  }
  for (std::size_t i = 0;; ++i) {
    const fs::path p = dir / ("mhat_" + std::to_string(i) + ".pgm");
    if (!fs::exists(p)) break;
    result.mhat.push_back(read_labelmap(p));
  }
  result.cloud = read_ply(dir / "cloud.ply");
  return result;
}

}  // namespace maskfuse
