#include <set>

#include "maskfuse/error.hpp"
#include "maskfuse/pipeline.hpp"

namespace maskfuse {

using nlohmann::json;
using nlohmann::ordered_json;

void PipelineConfig::validate() const {
  if (!(reach_radius > 0.0)) throw Error("reach_radius must be positive");
  if (!(match.tau2d_percentile > 0.0 && match.tau2d_percentile <= 100.0))
    throw Error("tau2d_percentile must lie in (0, 100]");
  if (match.tau2d_override && !(*match.tau2d_override >= 0.0)) throw Error("tau2d_override must be non-negative");
  if (!(match.min_match_confidence >= 0.0 && match.min_match_confidence <= 1.0))
    throw Error("min_match_confidence must lie in [0, 1]");
  if (match.max_matches_per_pair < 1) throw Error("max_matches_per_pair must be at least 1");
  if (!(match.pair_policy.max_angle_deg >= 0.0)) throw Error("pair_policy.max_angle_deg must be non-negative");
  if (!(match.pair_policy.max_translation_m >= 0.0)) throw Error("pair_policy.max_translation_m must be non-negative");
  if (!(lift.tau3d >= 0.0)) throw Error("tau3d must be non-negative");
  if (lift.max_cloud_points < 1) throw Error("max_cloud_points must be at least 1");
}

ordered_json config_to_json(const PipelineConfig& c) {
  ordered_json j;
  j["tau2d_percentile"] = c.match.tau2d_percentile;
  j["tau2d_override"] = c.match.tau2d_override ? ordered_json(*c.match.tau2d_override) : ordered_json(nullptr);
  j["min_match_confidence"] = c.match.min_match_confidence;
  j["max_matches_per_pair"] = c.match.max_matches_per_pair;
  j["pair_policy"] = {{"max_angle_deg", c.match.pair_policy.max_angle_deg},
                      {"max_translation_m", c.match.pair_policy.max_translation_m},
                      {"k_nearest", c.match.pair_policy.k_nearest}};
  j["tau3d"] = c.lift.tau3d;
  j["min_point_confidence"] = c.lift.min_point_confidence;
  j["max_cloud_points"] = c.lift.max_cloud_points;
  j["reach_radius"] = c.reach_radius;
  if (c.workspace_origin) {
    j["workspace_origin"] = {c.workspace_origin->x(), c.workspace_origin->y(), c.workspace_origin->z()};
  } else {
    j["workspace_origin"] = nullptr;
  }
  j["background_mask_paths"] = c.background_mask_paths;
  j["seed"] = c.seed;
  return j;
}

PipelineConfig config_from_json(const json& doc, PipelineConfig c) {
  if (!doc.is_object()) throw Error("config must be a JSON object");
  static const std::set<std::string> known = {
      "tau2d_percentile", "tau2d_override", "min_match_confidence", "max_matches_per_pair", "pair_policy",
      "tau3d", "min_point_confidence", "max_cloud_points", "reach_radius", "workspace_origin",
      "background_mask_paths", "seed", "threads"};
  for (const auto& [key, _] : doc.items())
    if (!known.count(key)) throw Error("unknown config key '" + key + "'");
  try {
    if (doc.contains("tau2d_percentile")) c.match.tau2d_percentile = doc["tau2d_percentile"].get<double>();
    if (doc.contains("tau2d_override")) {
      if (doc["tau2d_override"].is_null()) {
        c.match.tau2d_override.reset();
      } else {
        c.match.tau2d_override = doc["tau2d_override"].get<double>();
      }
    }
    if (doc.contains("min_match_confidence")) c.match.min_match_confidence = doc["min_match_confidence"].get<double>();
    if (doc.contains("max_matches_per_pair"))
      c.match.max_matches_per_pair = doc["max_matches_per_pair"].get<std::size_t>();
    if (doc.contains("pair_policy")) {
      const auto& p = doc["pair_policy"];
      if (p.contains("max_angle_deg")) c.match.pair_policy.max_angle_deg = p["max_angle_deg"].get<double>();
      if (p.contains("max_translation_m")) c.match.pair_policy.max_translation_m = p["max_translation_m"].get<double>();
      if (p.contains("k_nearest")) c.match.pair_policy.k_nearest = p["k_nearest"].get<std::size_t>();
    }
    if (doc.contains("tau3d")) c.lift.tau3d = doc["tau3d"].get<double>();
    if (doc.contains("min_point_confidence")) c.lift.min_point_confidence = doc["min_point_confidence"].get<double>();
    if (doc.contains("max_cloud_points")) c.lift.max_cloud_points = doc["max_cloud_points"].get<std::size_t>();
    if (doc.contains("reach_radius")) c.reach_radius = doc["reach_radius"].get<double>();
    if (doc.contains("workspace_origin")) {
      if (doc["workspace_origin"].is_null()) {
        c.workspace_origin.reset();
      } else {
        const auto v = doc["workspace_origin"].get<std::vector<double>>();
        if (v.size() != 3) throw Error("workspace_origin must have 3 components");
        c.workspace_origin = Eigen::Vector3d(v[0], v[1], v[2]);
      }
    }
    if (doc.contains("background_mask_paths"))
      c.background_mask_paths = doc["background_mask_paths"].get<std::vector<std::string>>();
    if (doc.contains("seed")) c.seed = doc["seed"].get<std::uint64_t>();
    if (doc.contains("threads")) c.threads = doc["threads"].get<unsigned>();
  } catch (const json::exception& e) {
    throw Error(std::string("invalid config value: ") + e.what());
  }
  c.validate();
  return c;
}

}  // namespace maskfuse
