#include "maskfuse/synth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <set>

#include <Eigen/Geometry>

#include "maskfuse/error.hpp"
#include "maskfuse/formats.hpp"
#include "maskfuse/parallel.hpp"
#include "maskfuse/random.hpp"

namespace maskfuse::synth {

using Eigen::Vector2d;
using Eigen::Vector3d;
using nlohmann::json;
using nlohmann::ordered_json;

constexpr LocalId kTableId = 1;
constexpr LocalId kBackdropId = 2;
constexpr LocalId kFirstObjectId = 3;

void SynthSpec::validate() const {
  if (n_objects < 1) throw Error("synth: n_objects must be at least 1");
  if (n_views < 1) throw Error("synth: n_views must be at least 1");
  if (overseg_k < 1) throw Error("synth: overseg_k must be at least 1");
  if (width < 2 || height < 2 || width > 65535 || height > 65535) throw Error("synth: invalid image size");
  if (!(focal_px > 0.0)) throw Error("synth: focal length must be positive");
  if (n_objects + kFirstObjectId > 60000) throw Error("synth: too many objects");
  if (!(box_side_min > 0.0 && box_side_min <= box_side_max)) throw Error("synth: invalid box size range");
  if (!(sphere_radius_min > 0.0 && sphere_radius_min <= sphere_radius_max))
    throw Error("synth: invalid sphere radius range");
  if (!(sphere_fraction >= 0.0 && sphere_fraction <= 1.0)) throw Error("synth: sphere_fraction must lie in [0, 1]");
  if (!(placement_half_extent > 0.0 && placement_half_extent <= table_half_extent))
    throw Error("synth: placement area must lie within the table");
  if (!(min_gap >= 0.0)) throw Error("synth: min_gap must be non-negative");
  if (!(ring_radius > 0.0 && ring_height > 0.0)) throw Error("synth: camera ring must lie above the table");
  if (!(backdrop_radius > 2.0 * std::hypot(ring_radius, ring_height)))
    throw Error("synth: backdrop must enclose the cameras with margin");
  for (double rate : {match_dropout, spurious_rate})
    if (!(rate >= 0.0 && rate <= 1.0)) throw Error("synth: rates must lie in [0, 1]");
  if (!(pointmap_noise_sigma >= 0.0)) throw Error("synth: noise sigma must be non-negative");
}

ordered_json spec_to_json(const SynthSpec& s) {
  ordered_json j;
  j["n_objects"] = s.n_objects;
  j["n_views"] = s.n_views;
  j["width"] = s.width;
  j["height"] = s.height;
  j["focal_px"] = s.focal_px;
  j["box_side_min"] = s.box_side_min;
  j["box_side_max"] = s.box_side_max;
  j["sphere_radius_min"] = s.sphere_radius_min;
  j["sphere_radius_max"] = s.sphere_radius_max;
  j["sphere_fraction"] = s.sphere_fraction;
  j["table_half_extent"] = s.table_half_extent;
  j["placement_half_extent"] = s.placement_half_extent;
  j["min_gap"] = s.min_gap;
  j["ring_radius"] = s.ring_radius;
  j["ring_height"] = s.ring_height;
  j["backdrop_radius"] = s.backdrop_radius;
  j["overseg_k"] = s.overseg_k;
  j["match_dropout"] = s.match_dropout;
  j["spurious_rate"] = s.spurious_rate;
  j["pointmap_noise_sigma"] = s.pointmap_noise_sigma;
  j["match_pairs"] = {{"max_angle_deg", s.match_pairs.max_angle_deg},
                      {"max_translation_m", s.match_pairs.max_translation_m},
                      {"k_nearest", s.match_pairs.k_nearest}};
  j["seed"] = s.seed;
  return j;
}

SynthSpec spec_from_json(const json& doc, SynthSpec s) {
  auto read = [&](const char* key, auto& field) {
    if (doc.contains(key)) field = doc[key].get<std::decay_t<decltype(field)>>();
  };
  try {
    read("n_objects", s.n_objects);
    read("n_views", s.n_views);
    read("width", s.width);
    read("height", s.height);
    read("focal_px", s.focal_px);
    read("box_side_min", s.box_side_min);
    read("box_side_max", s.box_side_max);
    read("sphere_radius_min", s.sphere_radius_min);
    read("sphere_radius_max", s.sphere_radius_max);
    read("sphere_fraction", s.sphere_fraction);
    read("table_half_extent", s.table_half_extent);
    read("placement_half_extent", s.placement_half_extent);
    read("min_gap", s.min_gap);
    read("ring_radius", s.ring_radius);
    read("ring_height", s.ring_height);
    read("backdrop_radius", s.backdrop_radius);
    read("overseg_k", s.overseg_k);
    read("match_dropout", s.match_dropout);
    read("spurious_rate", s.spurious_rate);
    read("pointmap_noise_sigma", s.pointmap_noise_sigma);
    read("seed", s.seed);
    if (doc.contains("match_pairs")) {
      const auto& p = doc["match_pairs"];
      if (p.contains("max_angle_deg")) s.match_pairs.max_angle_deg = p["max_angle_deg"].get<double>();
      if (p.contains("max_translation_m")) s.match_pairs.max_translation_m = p["max_translation_m"].get<double>();
      if (p.contains("k_nearest")) s.match_pairs.k_nearest = p["k_nearest"].get<std::size_t>();
    }
  } catch (const json::exception& e) {
    throw Error(std::string("synth spec: ") + e.what());
  }
  s.validate();
  return s;
}

double Primitive::surface_distance(const Vector3d& p) const {
  if (shape == Shape::kSphere) return (p - center).norm() - radius;
  const Vector3d q = (p - center).cwiseAbs() - half_extent;
  return q.cwiseMax(0.0).norm() + std::min(q.maxCoeff(), 0.0);
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kMinT = 1e-9;

double intersect_box(const Primitive& b, const Vector3d& o, const Vector3d& d) {
  double t0 = -kInf;
  double t1 = kInf;
  for (int k = 0; k < 3; ++k) {
    const double lo = b.center[k] - b.half_extent[k];
    const double hi = b.center[k] + b.half_extent[k];
    if (d[k] == 0.0) {
      if (o[k] < lo || o[k] > hi) return kInf;
      continue;
    }
    double a = (lo - o[k]) / d[k];
    double c = (hi - o[k]) / d[k];
    if (a > c) std::swap(a, c);
    t0 = std::max(t0, a);
    t1 = std::min(t1, c);
  }
  if (t0 > t1) return kInf;
  if (t0 > kMinT) return t0;
  return kInf;  // cameras never start inside a box
}

double intersect_sphere(const Vector3d& center, double radius, const Vector3d& o, const Vector3d& d, bool far_root) {
  const Vector3d oc = o - center;
  const double b = oc.dot(d);
  const double c = oc.squaredNorm() - radius * radius;
  const double disc = b * b - c;
  if (disc < 0.0) return kInf;
  const double s = std::sqrt(disc);
  // Numerically stable near root: c / (-b + s) == -b - s.
  const double near = b > 0.0 ? c / (-b - s) : -b - s;
  const double far = -b + s;
  if (far_root) return far > kMinT ? far : kInf;
  if (near > kMinT) return near;
  return kInf;
}

}  // namespace

World::World(std::vector<Primitive> objects, std::vector<CameraPose> cameras, const SynthSpec& spec)
    : objects_(std::move(objects)),
      cameras_(std::move(cameras)),
      width_(spec.width),
      height_(spec.height),
      focal_(spec.focal_px),
      table_half_extent_(spec.table_half_extent),
      backdrop_radius_(spec.backdrop_radius) {}

Hit World::cast(const Vector3d& o, const Vector3d& d) const {
  Hit hit;
  hit.t = kInf;
  for (const auto& obj : objects_) {
    const double t = obj.shape == Shape::kBox ? intersect_box(obj, o, d) : intersect_sphere(obj.center, obj.radius, o, d, false);
    if (t < hit.t) {
      hit.t = t;
      hit.surface = Surface::kObject;
      hit.object_id = obj.object_id;
    }
  }
  if (d.z() < 0.0 && o.z() > 0.0) {
    const double t = -o.z() / d.z();
    const Vector3d p = o + t * d;
    if (t < hit.t && std::abs(p.x()) <= table_half_extent_ && std::abs(p.y()) <= table_half_extent_) {
      hit.t = t;
      hit.surface = Surface::kTable;
      hit.object_id = 0;
    }
  }
  if (hit.t == kInf) {
    hit.t = intersect_sphere(Vector3d::Zero(), backdrop_radius_, o, d, true);
    hit.surface = Surface::kBackdrop;
    hit.object_id = 0;
  }
  hit.point = o + hit.t * d;
  if (hit.surface == Surface::kTable) hit.point.z() = 0.0;
  return hit;
}

Vector3d World::ray(std::size_t camera, double u, double v) const {
  const CameraPose& pose = cameras_.at(camera);
  const double cx = 0.5 * (width_ - 1);
  const double cy = 0.5 * (height_ - 1);
  const Vector3d local((u - cx) / focal_, (v - cy) / focal_, 1.0);
  return (pose.rotation * local).normalized();
}

std::optional<Vector2d> World::project(std::size_t camera, const Vector3d& point) const {
  const CameraPose& pose = cameras_.at(camera);
  const Vector3d c = pose.rotation.transpose() * (point - pose.translation);
  if (c.z() <= 1e-9) return std::nullopt;
  return Vector2d(focal_ * c.x() / c.z() + 0.5 * (width_ - 1), focal_ * c.y() / c.z() + 0.5 * (height_ - 1));
}

std::vector<CameraPose> ring_cameras(const SynthSpec& spec) {
  std::vector<CameraPose> cams;
  const Vector3d target = Vector3d::Zero();
  const Vector3d up = Vector3d::UnitZ();
  for (int i = 0; i < spec.n_views; ++i) {
    const double theta = 2.0 * std::numbers::pi * i / spec.n_views;
    const Vector3d position(spec.ring_radius * std::cos(theta), spec.ring_radius * std::sin(theta), spec.ring_height);
    const Vector3d forward = (target - position).normalized();
    const Vector3d right = forward.cross(up).normalized();
    const Vector3d down = forward.cross(right);
    CameraPose pose;
    pose.rotation.col(0) = right;
    pose.rotation.col(1) = down;
    pose.rotation.col(2) = forward;
    pose.translation = position;
    cams.push_back(pose);
  }
  return cams;
}

std::vector<Primitive> place_objects(const SynthSpec& spec) {
  spec.validate();
  Rng rng(stream_seed(spec.seed, Stream::kSynthPlacement));
  std::vector<Primitive> placed;
  // Footprint half sizes in the table plane.
  auto footprint = [](const Primitive& p) {
    return p.shape == Shape::kBox ? Eigen::Vector2d(p.half_extent.x(), p.half_extent.y())
                                  : Eigen::Vector2d(p.radius, p.radius);
  };
  constexpr int kRetries = 2000;
  for (int k = 0; k < spec.n_objects; ++k) {
    bool ok = false;
    for (int attempt = 0; attempt < kRetries && !ok; ++attempt) {
      Primitive p;
      p.object_id = static_cast<std::uint16_t>(k + 1);
      if (rng.uniform() < spec.sphere_fraction) {
        p.shape = Shape::kSphere;
        p.radius = rng.uniform(spec.sphere_radius_min, spec.sphere_radius_max);
        p.center = Vector3d(0, 0, p.radius);
      } else {
        p.shape = Shape::kBox;
        p.half_extent = 0.5 * Vector3d(rng.uniform(spec.box_side_min, spec.box_side_max),
                                       rng.uniform(spec.box_side_min, spec.box_side_max),
                                       rng.uniform(spec.box_side_min, spec.box_side_max));
        p.center = Vector3d(0, 0, p.half_extent.z());
      }
      const Eigen::Vector2d half = footprint(p);
      const double span_x = spec.placement_half_extent - half.x();
      const double span_y = spec.placement_half_extent - half.y();
      if (span_x <= 0.0 || span_y <= 0.0) continue;
      p.center.x() = rng.uniform(-span_x, span_x);
      p.center.y() = rng.uniform(-span_y, span_y);
      ok = std::all_of(placed.begin(), placed.end(), [&](const Primitive& q) {
        const Eigen::Vector2d gap = ((p.center - q.center).head<2>().cwiseAbs() - half - footprint(q)).cwiseMax(0.0);
        return gap.norm() >= spec.min_gap;
      });
      if (ok) placed.push_back(p);
    }
    if (!ok) throw Error("synth: cannot place " + std::to_string(spec.n_objects) + " objects without overlap");
  }
  return placed;
}

RenderedView render_view(const World& world, std::size_t camera) {
  RenderedView view;
  view.width = world.width();
  view.height = world.height();
  const std::size_t n = static_cast<std::size_t>(view.width) * view.height;
  view.points.resize(n);
  view.surface.resize(n);
  view.object_id.resize(n);
  const Vector3d origin = world.cameras().at(camera).translation;
  for (int y = 0; y < view.height; ++y) {
    for (int x = 0; x < view.width; ++x) {
      const std::size_t k = static_cast<std::size_t>(y) * view.width + x;
      const Hit hit = world.cast(origin, world.ray(camera, x, y));
      view.points[k] = hit.point;
      view.surface[k] = hit.surface;
      view.object_id[k] = hit.object_id;
    }
  }
  return view;
}

std::vector<LabelMap> inject_oversegmentation(std::vector<LabelMap> label_maps, int overseg_k, std::uint64_t seed,
                                              std::span<const LocalId> keep_ids) {
  if (overseg_k < 1) throw Error("overseg_k must be at least 1");
  if (overseg_k == 1) return label_maps;
  for (std::size_t i = 0; i < label_maps.size(); ++i) {
    LabelMap& labels = label_maps[i];
    const auto ids = labels.mask_ids();
    if (ids.empty()) continue;
    std::uint32_t next_id = ids.back() + 1u;
    for (LocalId id : ids) {
      if (std::find(keep_ids.begin(), keep_ids.end(), id) != keep_ids.end()) continue;
      Rng rng(hash_key({seed, i, id}));
      const auto pixels = mask_pixels(labels, id);
      const std::size_t pieces =
          std::min<std::size_t>(1 + rng.below(static_cast<std::uint64_t>(overseg_k)), pixels.size());
      const double phi = rng.uniform(0.0, std::numbers::pi);
      if (pieces <= 1) continue;
      if (next_id + pieces - 1 > 65535) throw Error("over-segmentation ran out of 16-bit mask ids");
      // Order by signed distance along the cut normal; equal-count bands
      // between parallel cut lines.
      std::vector<std::pair<double, std::size_t>> order(pixels.size());
      for (std::size_t p = 0; p < pixels.size(); ++p)
        order[p] = {pixels[p].x * std::cos(phi) + pixels[p].y * std::sin(phi), p};
      std::sort(order.begin(), order.end());
      for (std::size_t rank = 0; rank < order.size(); ++rank) {
        const std::size_t band = rank * pieces / order.size();
        if (band == 0) continue;
        const Pixel& px = pixels[order[rank].second];
        labels.at(px.x, px.y) = static_cast<LocalId>(next_id + band - 1);
      }
      next_id += static_cast<std::uint32_t>(pieces - 1);
    }
  }
  return label_maps;
}

namespace {

struct Candidate {
  double residual = kInf;
  std::uint32_t source = std::numeric_limits<std::uint32_t>::max();
};

CorrespondenceSet exact_matches(const World& world, const std::vector<RenderedView>& views, ImageIndex a, ImageIndex b) {
  const RenderedView& va = views.at(a);
  const RenderedView& vb = views.at(b);
  const Vector3d cb = world.cameras().at(b).translation;
  std::vector<Candidate> best(static_cast<std::size_t>(vb.width) * vb.height);
  for (std::size_t k = 0; k < va.points.size(); ++k) {
    const Vector3d& x = va.points[k];
    const auto uv = world.project(b, x);
    if (!uv) continue;
    const double ub = std::round(uv->x());
    const double vb_ = std::round(uv->y());
    if (ub < 0 || vb_ < 0 || ub >= vb.width || vb_ >= vb.height) continue;
    const double dist = (x - cb).norm();
    const Hit hit = world.cast(cb, (x - cb) / dist);
    if (std::abs(hit.t - dist) > 1e-6 || (hit.point - x).norm() > 1e-6) continue;
    const std::size_t target = static_cast<std::size_t>(vb_) * vb.width + static_cast<std::size_t>(ub);
    // The target pixel's own ray must land on the same surface.
    if (vb.surface[target] != va.surface[k] || vb.object_id[target] != va.object_id[k]) continue;
    const double residual = (*uv - Vector2d(ub, vb_)).squaredNorm();
    if (residual < best[target].residual) best[target] = {residual, static_cast<std::uint32_t>(k)};
  }
  std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs;  // (source, target)
  for (std::size_t t = 0; t < best.size(); ++t)
    if (best[t].source != std::numeric_limits<std::uint32_t>::max())
      pairs.emplace_back(best[t].source, static_cast<std::uint32_t>(t));
  std::sort(pairs.begin(), pairs.end());

  CorrespondenceSet set{a, b, {}};
  set.matches.reserve(pairs.size());
  for (const auto& [s, t] : pairs) {
    set.matches.push_back({{static_cast<std::uint16_t>(s % va.width), static_cast<std::uint16_t>(s / va.width)},
                           {static_cast<std::uint16_t>(t % vb.width), static_cast<std::uint16_t>(t / vb.width)},
                           1.0f});
  }
  return set;
}

std::uint64_t match_key(const PixelMatch& m) {
  return (std::uint64_t{m.a.x} << 48) | (std::uint64_t{m.a.y} << 32) | (std::uint64_t{m.b.x} << 16) | m.b.y;
}

void degrade(CorrespondenceSet& set, int wa, int ha, int wb, int hb, double dropout, double spurious_rate,
             std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t n = set.matches.size();
  const auto removed = static_cast<std::size_t>(std::floor(dropout * static_cast<double>(n)));
  if (removed > 0) {
    std::vector<std::uint32_t> index(n);
    std::iota(index.begin(), index.end(), 0u);
    for (std::size_t i = 0; i < removed; ++i) std::swap(index[i], index[i + rng.below(n - i)]);
    std::vector<std::uint8_t> drop(n, 0);
    for (std::size_t i = 0; i < removed; ++i) drop[index[i]] = 1;
    std::vector<PixelMatch> kept;
    kept.reserve(n - removed);
    for (std::size_t i = 0; i < n; ++i)
      if (!drop[i]) kept.push_back(set.matches[i]);
    set.matches = std::move(kept);
  }

  const auto extra = static_cast<std::size_t>(std::floor(spurious_rate * static_cast<double>(set.matches.size())));
  if (extra == 0) return;
  // Spurious pairs never repeat an existing match.
  std::set<std::uint64_t> taken;
  for (const auto& m : set.matches) taken.insert(match_key(m));
  std::size_t added = 0;
  while (added < extra) {
    PixelMatch m;
    m.a = {static_cast<std::uint16_t>(rng.below(wa)), static_cast<std::uint16_t>(rng.below(ha))};
    m.b = {static_cast<std::uint16_t>(rng.below(wb)), static_cast<std::uint16_t>(rng.below(hb))};
    m.confidence = static_cast<float>(rng.uniform(0.5, 1.0));
    if (!taken.insert(match_key(m)).second) continue;
    set.matches.push_back(m);
    ++added;
  }
}

}  // namespace

std::vector<CorrespondenceSet> generate_matches(const World& world, const std::vector<RenderedView>& views,
                                                const std::vector<std::pair<ImageIndex, ImageIndex>>& pairs,
                                                double dropout, double spurious_rate, std::uint64_t seed,
                                                unsigned threads) {
  if (!(dropout >= 0.0 && dropout <= 1.0) || !(spurious_rate >= 0.0 && spurious_rate <= 1.0))
    throw Error("match dropout and spurious rate must lie in [0, 1]");
  std::vector<CorrespondenceSet> sets(pairs.size());
  parallel_for(pairs.size(), threads, [&](std::size_t i) {
    const auto [a, b] = pairs[i];
    sets[i] = exact_matches(world, views, a, b);
    const RenderedView& va = views[a];
    const RenderedView& vb = views[b];
    degrade(sets[i], va.width, va.height, vb.width, vb.height, dropout, spurious_rate, hash_key({seed, a, b}));
  });
  return sets;
}

Scene corrupt_pointmaps(Scene scene, double sigma, std::uint64_t seed) {
  if (!(sigma >= 0.0)) throw Error("noise sigma must be non-negative");
  if (sigma == 0.0) return scene;
  for (std::size_t i = 0; i < scene.pointmaps.size(); ++i) {
    PointMap& pm = scene.pointmaps[i];
    Rng rng(hash_key({seed, i}));
    for (std::size_t k = 0; k < pm.points.size(); ++k) {
      const Vector3d noise(sigma * rng.normal(), sigma * rng.normal(), sigma * rng.normal());
      pm.points[k] = (pm.points[k].cast<double>() + noise).cast<float>();
      const double conf = std::exp(-noise.squaredNorm() / (2.0 * sigma * sigma));
      pm.confidence[k] = static_cast<float>(std::clamp(conf, 0.1, 1.0));
    }
  }
  return scene;
}

SynthScene generate(const SynthSpec& spec, unsigned threads) {
  spec.validate();
  SynthScene out;
  out.spec = spec;
  out.world = World(place_objects(spec), ring_cameras(spec), spec);
  const auto n = static_cast<std::size_t>(spec.n_views);

  out.views.resize(n);
  parallel_for(n, threads, [&](std::size_t i) { out.views[i] = render_view(out.world, i); });

  Scene& scene = out.scene;
  std::vector<LabelMap> gt;
  std::vector<LabelMap> background;
  for (std::size_t i = 0; i < n; ++i) {
    const RenderedView& v = out.views[i];
    LabelMap labels(v.width, v.height);
    LabelMap truth(v.width, v.height);
    LabelMap table(v.width, v.height);
    PointMap pm(v.width, v.height);
    for (std::size_t k = 0; k < v.points.size(); ++k) {
      switch (v.surface[k]) {
        case Surface::kObject:
          labels[k] = static_cast<LocalId>(kFirstObjectId + v.object_id[k] - 1);
          truth[k] = v.object_id[k];
          break;
        case Surface::kTable:
          labels[k] = kTableId;
          table[k] = 1;
          break;
        case Surface::kBackdrop:
          labels[k] = kBackdropId;
          break;
      }
      pm.points[k] = v.points[k].cast<float>();
      pm.confidence[k] = 1.0f;
    }
    ImageMeta meta;
    meta.index = static_cast<ImageIndex>(i);
    meta.width = v.width;
    meta.height = v.height;
    meta.pose = out.world.cameras()[i];
    scene.images.push_back(meta);
    out.object_masks.push_back(labels);
    scene.pointmaps.push_back(std::move(pm));
    gt.push_back(std::move(truth));
    background.push_back(std::move(table));
  }
  const LocalId keep[] = {kTableId, kBackdropId};
  scene.label_maps =
      inject_oversegmentation(out.object_masks, spec.overseg_k, stream_seed(spec.seed, Stream::kSynthOverseg), keep);
  scene.ground_truth = std::move(gt);
  scene.background_masks = std::move(background);

  const auto pairs = candidate_pairs(scene.poses(), spec.match_pairs);
  scene.correspondences = generate_matches(out.world, out.views, pairs, spec.match_dropout, spec.spurious_rate,
                                           stream_seed(spec.seed, Stream::kSynthMatches), threads);
  scene = corrupt_pointmaps(std::move(scene), spec.pointmap_noise_sigma, stream_seed(spec.seed, Stream::kSynthNoise));
  scene.validate();
  return out;
}

std::filesystem::path write_synth(const SynthScene& synth, const std::filesystem::path& dir) {
  const auto manifest = write_scene(synth.scene, dir);
  write_file(dir / "synth_spec.json", spec_to_json(synth.spec).dump(2) + "\n");
  return manifest;
}

}  // namespace maskfuse::synth
