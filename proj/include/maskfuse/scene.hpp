#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace maskfuse {

using ImageIndex = std::uint32_t;
using LocalId = std::uint16_t;

struct Pixel {
  std::uint16_t x = 0;
  std::uint16_t y = 0;
  friend auto operator<=>(const Pixel&, const Pixel&) = default;
};

// Row-major grid of local mask ids; 0 is "unassigned".
class LabelMap {
 public:
  LabelMap() = default;
  LabelMap(int width, int height, LocalId fill = 0);
  LabelMap(int width, int height, std::vector<LocalId> labels);

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return labels_.size(); }
  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }

  LocalId at(int x, int y) const { return labels_[static_cast<std::size_t>(y) * width_ + x]; }
  LocalId& at(int x, int y) { return labels_[static_cast<std::size_t>(y) * width_ + x]; }
  LocalId operator[](std::size_t i) const { return labels_[i]; }
  LocalId& operator[](std::size_t i) { return labels_[i]; }

  std::span<const LocalId> labels() const { return labels_; }
  // Sorted distinct nonzero ids.
  std::vector<LocalId> mask_ids() const;

  friend bool operator==(const LabelMap&, const LabelMap&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<LocalId> labels_;
};

// Vertex identity of every graph: one mask in one image.
struct MaskRef {
  ImageIndex image = 0;
  LocalId local_id = 0;
  friend auto operator<=>(const MaskRef&, const MaskRef&) = default;
};

// Camera-to-world rigid transform.
struct CameraPose {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  // 4x4 row-major homogeneous matrix; the last row must be (0, 0, 0, 1).
  static CameraPose from_row_major(std::span<const double> m);
  std::vector<double> to_row_major() const;
  // Throws Error unless R^T R = I and det R = +1 within `tolerance`.
  void validate(double tolerance = 1e-6) const;

  Eigen::Vector3d position() const { return translation; }
  friend bool operator==(const CameraPose& a, const CameraPose& b) {
    return a.rotation == b.rotation && a.translation == b.translation;
  }
};

// Geodesic angle between two rotations, degrees.
double rotation_angle_deg(const Eigen::Matrix3d& a, const Eigen::Matrix3d& b);

struct PointMap {
  int width = 0;
  int height = 0;
  std::vector<Eigen::Vector3f> points;  // world frame, meters, row-major
  std::vector<float> confidence;        // [0, 1], row-major

  PointMap() = default;
  PointMap(int w, int h)
      : width(w), height(h),
        points(static_cast<std::size_t>(w) * h, Eigen::Vector3f::Zero()),
        confidence(static_cast<std::size_t>(w) * h, 0.0f) {}

  std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width + x; }
  friend bool operator==(const PointMap&, const PointMap&) = default;
};

struct PixelMatch {
  Pixel a;
  Pixel b;
  float confidence = 1.0f;
  friend bool operator==(const PixelMatch&, const PixelMatch&) = default;
};

struct CorrespondenceSet {
  ImageIndex image_a = 0;
  ImageIndex image_b = 0;
  std::vector<PixelMatch> matches;
  friend bool operator==(const CorrespondenceSet&, const CorrespondenceSet&) = default;
};

struct ImageMeta {
  ImageIndex index = 0;
  int width = 0;
  int height = 0;
  std::string labelmap_path;
  std::string pointmap_path;
  CameraPose pose;
};

// A fully loaded and cross-validated scene. Images are stored at position
// equal to their index (indices are contiguous from 0).
struct Scene {
  std::vector<ImageMeta> images;
  std::vector<LabelMap> label_maps;
  std::vector<PointMap> pointmaps;
  std::vector<CorrespondenceSet> correspondences;
  std::vector<std::string> correspondence_paths;
  std::optional<std::vector<LabelMap>> ground_truth;
  std::vector<std::string> ground_truth_paths;
  // Optional per-image masks marking table/background pixels (nonzero = background).
  std::optional<std::vector<LabelMap>> background_masks;
  std::vector<std::string> background_mask_paths;

  std::size_t size() const { return images.size(); }
  std::vector<CameraPose> poses() const;
  // Throws Error on any inconsistency between the parts.
  void validate() const;
};

// Pixels equal to `local_id`, row-major order. Empty if the id is absent.
std::vector<Pixel> mask_pixels(const LabelMap& labels, LocalId local_id);

struct LiftedPixel {
  Eigen::Vector3f point;
  float confidence;
};

// Pointmap entry for `pixel`, verbatim. Throws Error when out of bounds.
LiftedPixel pixel_to_point(const Scene& scene, ImageIndex image, Pixel pixel);

// Manifest JSON with paths resolved relative to the manifest's directory.
Scene load_scene(const std::filesystem::path& manifest_path);

// Writes every part of `scene` into `dir` using canonical file names and a
// manifest.json referencing them. Returns the manifest path.
std::filesystem::path write_scene(const Scene& scene, const std::filesystem::path& dir);

}  // namespace maskfuse
