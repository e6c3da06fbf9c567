#include "maskfuse/scene.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <Eigen/Dense>
#include <json.hpp>

#include "maskfuse/error.hpp"
#include "maskfuse/formats.hpp"

namespace maskfuse {

namespace fs = std::filesystem;
using nlohmann::json;

LabelMap::LabelMap(int width, int height, LocalId fill)
    : width_(width), height_(height), labels_(static_cast<std::size_t>(width) * height, fill) {
  if (width <= 0 || height <= 0) throw Error("label map dimensions must be positive");
}

LabelMap::LabelMap(int width, int height, std::vector<LocalId> labels)
    : width_(width), height_(height), labels_(std::move(labels)) {
  if (width <= 0 || height <= 0) throw Error("label map dimensions must be positive");
  if (labels_.size() != static_cast<std::size_t>(width) * height) throw Error("label map size mismatch");
}

std::vector<LocalId> LabelMap::mask_ids() const {
  std::vector<bool> seen(65536, false);
  for (LocalId v : labels_) seen[v] = true;
  std::vector<LocalId> ids;
  for (std::size_t id = 1; id < seen.size(); ++id)
    if (seen[id]) ids.push_back(static_cast<LocalId>(id));
  return ids;
}

CameraPose CameraPose::from_row_major(std::span<const double> m) {
  if (m.size() != 16) throw Error("pose must have 16 entries, got " + std::to_string(m.size()));
  if (m[12] != 0.0 || m[13] != 0.0 || m[14] != 0.0 || m[15] != 1.0)
    throw Error("pose last row must be (0, 0, 0, 1)");
  CameraPose pose;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) pose.rotation(r, c) = m[r * 4 + c];
    pose.translation(r) = m[r * 4 + 3];
  }
  return pose;
}

std::vector<double> CameraPose::to_row_major() const {
  std::vector<double> m(16, 0.0);
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) m[r * 4 + c] = rotation(r, c);
    m[r * 4 + 3] = translation(r);
  }
  m[15] = 1.0;
  return m;
}

void CameraPose::validate(double tolerance) const {
  if (!rotation.allFinite() || !translation.allFinite()) throw Error("pose contains non-finite values");
  const double orth = (rotation.transpose() * rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  if (orth > tolerance) throw Error("pose rotation is not orthonormal");
  if (std::abs(rotation.determinant() - 1.0) > tolerance) throw Error("pose rotation has determinant != +1");
}

double rotation_angle_deg(const Eigen::Matrix3d& a, const Eigen::Matrix3d& b) {
  const double trace = (a.transpose() * b).trace();
  const double c = std::clamp((trace - 1.0) / 2.0, -1.0, 1.0);
  return std::acos(c) * 180.0 / 3.14159265358979323846;
}

std::vector<CameraPose> Scene::poses() const {
  std::vector<CameraPose> out;
  out.reserve(images.size());
  for (const auto& im : images) out.push_back(im.pose);
  return out;
}

namespace {

void validate_same_shape(const LabelMap& map, const ImageMeta& image, const std::string& what) {
  if (map.width() != image.width || map.height() != image.height)
    throw Error(what + " dimensions do not match image " + std::to_string(image.index));
}

}  // namespace

void Scene::validate() const {
  if (images.empty()) throw Error("empty scene");
  if (label_maps.size() != images.size() || pointmaps.size() != images.size())
    throw Error("scene has inconsistent per-image data");
  for (std::size_t i = 0; i < images.size(); ++i) {
    const ImageMeta& im = images[i];
    if (im.index != i) throw Error("image indices must be contiguous from 0");
    if (im.width <= 0 || im.height <= 0) throw Error("image " + std::to_string(i) + " has empty dimensions");
    validate_same_shape(label_maps[i], im, "label map");
    if (pointmaps[i].width != im.width || pointmaps[i].height != im.height)
      throw Error("pointmap dimensions do not match label map for image " + std::to_string(i));
    im.pose.validate();
  }
  for (const auto& set : correspondences) {
    if (set.image_a >= images.size() || set.image_b >= images.size())
      throw Error("correspondences reference nonexistent image");
    if (set.image_a >= set.image_b) throw Error("correspondence sets must satisfy image_a < image_b");
    const ImageMeta& a = images[set.image_a];
    const ImageMeta& b = images[set.image_b];
    for (const auto& m : set.matches) {
      if (m.a.x >= a.width || m.a.y >= a.height || m.b.x >= b.width || m.b.y >= b.height)
        throw Error("match pixel out of bounds in pair (" + std::to_string(set.image_a) + ", " +
                    std::to_string(set.image_b) + ")");
      if (!(m.confidence >= 0.0f && m.confidence <= 1.0f)) throw Error("match confidence outside [0,1]");
    }
  }
  if (ground_truth) {
    if (ground_truth->size() != images.size()) throw Error("ground truth count does not match image count");
    for (std::size_t i = 0; i < images.size(); ++i) validate_same_shape((*ground_truth)[i], images[i], "ground truth");
  }
  if (background_masks) {
    if (background_masks->size() != images.size()) throw Error("background mask count does not match image count");
    for (std::size_t i = 0; i < images.size(); ++i)
      validate_same_shape((*background_masks)[i], images[i], "background mask");
  }
}

std::vector<Pixel> mask_pixels(const LabelMap& labels, LocalId local_id) {
  std::vector<Pixel> out;
  if (local_id == 0) return out;
  for (int y = 0; y < labels.height(); ++y)
    for (int x = 0; x < labels.width(); ++x)
      if (labels.at(x, y) == local_id) out.push_back({static_cast<std::uint16_t>(x), static_cast<std::uint16_t>(y)});
  return out;
}

LiftedPixel pixel_to_point(const Scene& scene, ImageIndex image, Pixel pixel) {
  if (image >= scene.pointmaps.size()) throw Error("unknown image " + std::to_string(image));
  const PointMap& pm = scene.pointmaps[image];
  if (pixel.x >= pm.width || pixel.y >= pm.height)
    throw Error("pixel (" + std::to_string(pixel.x) + ", " + std::to_string(pixel.y) + ") out of bounds");
  const std::size_t i = pm.index(pixel.x, pixel.y);
  return {pm.points[i], pm.confidence[i]};
}

namespace {

std::vector<std::string> path_list(const json& doc, const char* key) {
  std::vector<std::string> out;
  if (!doc.contains(key) || doc[key].is_null()) return out;
  if (!doc[key].is_array()) throw Error(std::string("manifest key '") + key + "' must be an array of paths");
  for (const auto& p : doc[key]) out.push_back(p.get<std::string>());
  return out;
}

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

std::vector<LabelMap> load_maps(const fs::path& base, const std::vector<std::string>& paths) {
  std::vector<LabelMap> maps;
  for (const auto& p : paths) maps.push_back(read_labelmap(resolve(base, p)));
  return maps;
}

}  // namespace

Scene load_scene(const fs::path& manifest_path) {
  if (!fs::exists(manifest_path)) throw Error("manifest not found: " + manifest_path.string());
  json doc;
  try {
    doc = json::parse(read_file(manifest_path));
  } catch (const json::exception& e) {
    throw Error("manifest " + manifest_path.string() + " does not parse: " + e.what());
  }
  const fs::path base = manifest_path.parent_path();
  Scene scene;
  try {
    if (!doc.contains("images") || !doc["images"].is_array() || doc["images"].empty()) throw Error("empty scene");

    std::vector<ImageMeta> metas;
    std::set<ImageIndex> seen;
    for (const auto& entry : doc["images"]) {
      ImageMeta meta;
      meta.index = entry.at("index").get<ImageIndex>();
      if (!seen.insert(meta.index).second) throw Error("duplicate image index " + std::to_string(meta.index));
      meta.labelmap_path = entry.at("labelmap").get<std::string>();
      meta.pointmap_path = entry.at("pointmap").get<std::string>();
      const auto pose = entry.at("pose").get<std::vector<double>>();
      meta.pose = CameraPose::from_row_major(pose);
      metas.push_back(std::move(meta));
    }
    std::sort(metas.begin(), metas.end(), [](const ImageMeta& a, const ImageMeta& b) { return a.index < b.index; });

    for (auto& meta : metas) {
      LabelMap labels = read_labelmap(resolve(base, meta.labelmap_path));
      PointMap points = read_pointmap(resolve(base, meta.pointmap_path));
      meta.width = labels.width();
      meta.height = labels.height();
      scene.label_maps.push_back(std::move(labels));
      scene.pointmaps.push_back(std::move(points));
    }
    scene.images = std::move(metas);

    for (const auto& p : path_list(doc, "correspondences")) {
      CorrespondenceSet set = read_correspondences(resolve(base, p));
      if (set.image_a == set.image_b) {
        warn("ignoring same-image correspondence file " + p);
        continue;
      }
      if (set.image_a > set.image_b) {
        std::swap(set.image_a, set.image_b);
        for (auto& m : set.matches) std::swap(m.a, m.b);
      }
      scene.correspondences.push_back(std::move(set));
      scene.correspondence_paths.push_back(p);
    }

    scene.ground_truth_paths = path_list(doc, "ground_truth");
    if (!scene.ground_truth_paths.empty()) scene.ground_truth = load_maps(base, scene.ground_truth_paths);
    scene.background_mask_paths = path_list(doc, "background_masks");
    if (!scene.background_mask_paths.empty()) scene.background_masks = load_maps(base, scene.background_mask_paths);
  } catch (const json::exception& e) {
    throw Error("manifest " + manifest_path.string() + ": " + e.what());
  }
  scene.validate();
  return scene;
}

fs::path write_scene(const Scene& scene, const fs::path& dir) {
  scene.validate();
  fs::create_directories(dir);
  json doc;
  doc["images"] = json::array();
  for (std::size_t i = 0; i < scene.size(); ++i) {
    const std::string idx = std::to_string(i);
    const std::string label_name = "labels_" + idx + ".pgm";
    const std::string point_name = "pointmap_" + idx + ".pmap";
    write_labelmap(scene.label_maps[i], dir / label_name);
    write_pointmap(scene.pointmaps[i], dir / point_name);
    doc["images"].push_back({{"index", i},
                             {"labelmap", label_name},
                             {"pointmap", point_name},
                             {"pose", scene.images[i].pose.to_row_major()}});
  }
  doc["correspondences"] = json::array();
  for (const auto& set : scene.correspondences) {
    const std::string name = "corr_" + std::to_string(set.image_a) + "_" + std::to_string(set.image_b) + ".corr";
    write_correspondences(set, dir / name);
    doc["correspondences"].push_back(name);
  }
  auto write_maps = [&](const std::optional<std::vector<LabelMap>>& maps, const std::string& prefix, const char* key) {
    if (!maps) return;
    doc[key] = json::array();
    for (std::size_t i = 0; i < maps->size(); ++i) {
      const std::string name = prefix + std::to_string(i) + ".pgm";
      write_labelmap((*maps)[i], dir / name);
      doc[key].push_back(name);
    }
  };
  write_maps(scene.ground_truth, "gt_", "ground_truth");
  write_maps(scene.background_masks, "bg_", "background_masks");
  const fs::path manifest = dir / "manifest.json";
  write_file(manifest, doc.dump(2) + "\n");
  return manifest;
}

}  // namespace maskfuse
