#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "maskfuse/match2d.hpp"
#include "maskfuse/scene.hpp"

// Synthetic tabletop scenes with exact ground truth.
//
// Objects are axis-aligned boxes and spheres resting on a square table at
// z = 0, surrounded by a spherical backdrop. Cameras sit on a ring around
// the table center and look at it. Every view is ray cast analytically.
//
// Input label maps use local id 1 for the table, 2 for the backdrop and
// 2 + k for object k (before over-segmentation adds fragment ids). Ground
// truth maps hold object ids 1..n and 0 elsewhere; background masks mark
// table pixels.
namespace maskfuse::synth {

struct SynthSpec {
  int n_objects = 5;
  int n_views = 6;
  int width = 640;
  int height = 480;
  double focal_px = 525.0;
  double box_side_min = 0.04;  // meters
  double box_side_max = 0.08;
  double sphere_radius_min = 0.02;
  double sphere_radius_max = 0.04;
  double sphere_fraction = 0.4;
  double table_half_extent = 0.35;
  double placement_half_extent = 0.2;
  double min_gap = 0.05;  // between object footprints
  double ring_radius = 0.8;
  double ring_height = 0.5;
  double backdrop_radius = 4.0;
  int overseg_k = 1;
  double match_dropout = 0.0;
  double spurious_rate = 0.0;
  double pointmap_noise_sigma = 0.0;
  PairPolicy match_pairs;  // which view pairs receive correspondences
  std::uint64_t seed = 0;

  void validate() const;
};

nlohmann::ordered_json spec_to_json(const SynthSpec& spec);
SynthSpec spec_from_json(const nlohmann::json& doc, SynthSpec base = {});

enum class Shape : std::uint8_t { kBox, kSphere };
enum class Surface : std::uint8_t { kObject, kTable, kBackdrop };

struct Primitive {
  Shape shape = Shape::kBox;
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  Eigen::Vector3d half_extent = Eigen::Vector3d::Zero();  // boxes
  double radius = 0.0;                                     // spheres
  std::uint16_t object_id = 0;                             // 1-based

  // Signed distance to the surface (exact for spheres and for points on or
  // outside a box).
  double surface_distance(const Eigen::Vector3d& p) const;
};

struct Hit {
  double t = 0.0;
  Eigen::Vector3d point = Eigen::Vector3d::Zero();
  Surface surface = Surface::kBackdrop;
  std::uint16_t object_id = 0;
};

class World {
 public:
  World() = default;
  World(std::vector<Primitive> objects, std::vector<CameraPose> cameras, const SynthSpec& spec);

  const std::vector<Primitive>& objects() const { return objects_; }
  const std::vector<CameraPose>& cameras() const { return cameras_; }
  int width() const { return width_; }
  int height() const { return height_; }

  // First surface along origin + t * dir (dir normalized), t > 0.
  Hit cast(const Eigen::Vector3d& origin, const Eigen::Vector3d& dir) const;
  // Unit world-space ray through continuous pixel coordinates (u, v).
  Eigen::Vector3d ray(std::size_t camera, double u, double v) const;
  // Continuous pixel coordinates of a world point, if in front of the camera.
  std::optional<Eigen::Vector2d> project(std::size_t camera, const Eigen::Vector3d& point) const;

 private:
  std::vector<Primitive> objects_;
  std::vector<CameraPose> cameras_;
  int width_ = 0;
  int height_ = 0;
  double focal_ = 0.0;
  double table_half_extent_ = 0.0;
  double backdrop_radius_ = 0.0;
};

// Exact per-pixel render of one view, row-major.
struct RenderedView {
  int width = 0;
  int height = 0;
  std::vector<Eigen::Vector3d> points;
  std::vector<Surface> surface;
  std::vector<std::uint16_t> object_id;  // 0 off-object
};

struct SynthScene {
  SynthSpec spec;
  World world;
  std::vector<RenderedView> views;
  std::vector<LabelMap> object_masks;  // input masks before over-segmentation
  Scene scene;                         // what the engine sees, ground truth included
};

// Ring cameras looking at the table center, camera-to-world.
std::vector<CameraPose> ring_cameras(const SynthSpec& spec);

// Non-overlapping primitives. Throws Error after bounded retries.
std::vector<Primitive> place_objects(const SynthSpec& spec);

RenderedView render_view(const World& world, std::size_t camera);

// Splits every mask not listed in `keep_ids` into 1..overseg_k fragments
// with seeded parallel planar cuts. Fragment union equals the original mask.
std::vector<LabelMap> inject_oversegmentation(std::vector<LabelMap> label_maps, int overseg_k, std::uint64_t seed,
                                              std::span<const LocalId> keep_ids = {});

// Exact correspondences for each pair in `pairs`: pixel p of view a maps to
// the pixel containing the projection of its surface point into view b,
// provided that point is the first hit along view b's ray (within 1e-6 m)
// and that pixel shows the same surface.
// Where several pixels land in one target pixel, the one projecting
// closest to its center is kept. Then floor(dropout * n) matches are removed
// and floor(spurious_rate * remaining) random wrong pairs are appended.
std::vector<CorrespondenceSet> generate_matches(const World& world, const std::vector<RenderedView>& views,
                                                const std::vector<std::pair<ImageIndex, ImageIndex>>& pairs,
                                                double dropout, double spurious_rate, std::uint64_t seed,
                                                unsigned threads = 1);

// Adds isotropic Gaussian noise to every point; confidence becomes
// exp(-|n|^2 / (2 sigma^2)) clipped to [0.1, 1]. sigma = 0 is the identity.
Scene corrupt_pointmaps(Scene scene, double sigma, std::uint64_t seed);

SynthScene generate(const SynthSpec& spec, unsigned threads = 1);

// Scene files plus synth_spec.json. Returns the manifest path.
std::filesystem::path write_synth(const SynthScene& synth, const std::filesystem::path& dir);

}  // namespace maskfuse::synth
