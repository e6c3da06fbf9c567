#include "maskfuse/metrics.hpp"

#include <algorithm>
#include <limits>
#include <map>

#include "maskfuse/error.hpp"
#include "maskfuse/kdtree.hpp"
#include "maskfuse/parallel.hpp"

namespace maskfuse::metrics {

std::size_t intersection_size(std::span<const Element> a, std::span<const Element> b) {
  std::size_t n = 0;
  auto i = a.begin();
  auto j = b.begin();
  while (i != a.end() && j != b.end()) {
    if (*i < *j) {
      ++i;
    } else if (*j < *i) {
      ++j;
    } else {
      ++n;
      ++i;
      ++j;
    }
  }
  return n;
}

double iou(std::span<const Element> a, std::span<const Element> b) {
  if (a.empty() && b.empty()) throw Error("IoU of two empty sets");
  const auto inter = static_cast<double>(intersection_size(a, b));
  return inter / (static_cast<double>(a.size() + b.size()) - inter);
}

double f1(std::span<const Element> a, std::span<const Element> b) {
  if (a.empty() && b.empty()) throw Error("F1 of two empty sets");
  return 2.0 * static_cast<double>(intersection_size(a, b)) / static_cast<double>(a.size() + b.size());
}

double precision(std::span<const Element> pred, std::span<const Element> gt) {
  if (pred.empty()) throw Error("precision of an empty prediction");
  return static_cast<double>(intersection_size(pred, gt)) / static_cast<double>(pred.size());
}

namespace {

double nearest_sum(std::span<const Eigen::Vector3d> from, const KdTree& to) {
  double sum = 0.0;
  for (const auto& x : from) sum += to.nearest(x).squared_distance;
  return sum;
}

// offset + nearest_sum(from, to), or infinity as soon as the running total
// exceeds bound. Partial sums of nonnegative terms never decrease, so a
// finite result is bit-identical to the unbounded one.
double bounded_sum(double offset, std::span<const Eigen::Vector3d> from, const KdTree& to, double bound) {
  double sum = 0.0;
  for (const auto& x : from) {
    sum += to.nearest(x).squared_distance;
    if (offset + sum > bound) return std::numeric_limits<double>::infinity();
  }
  return offset + sum;
}

}  // namespace

double symmetric_chamfer(std::span<const Eigen::Vector3d> s, std::span<const Eigen::Vector3d> t) {
  if (s.empty() || t.empty()) throw Error("Chamfer distance of an empty set");
  return nearest_sum(s, KdTree(t)) + nearest_sum(t, KdTree(s));
}

namespace {

struct Region {
  std::vector<Element> pixels;
  std::vector<Eigen::Vector3d> points;
};

// Groups pixels of `maps` by nonzero value; keys ascending.
std::map<std::uint32_t, Region> regions(const std::vector<LabelMap>& maps, const Scene& scene) {
  std::map<std::uint32_t, Region> out;
  for (std::size_t i = 0; i < maps.size(); ++i) {
    const PointMap& pm = scene.pointmaps.at(i);
    for (std::size_t k = 0; k < maps[i].size(); ++k) {
      const LocalId v = maps[i][k];
      if (v == 0) continue;
      Region& r = out[v];
      r.pixels.push_back(pixel_key(static_cast<ImageIndex>(i), k));
      r.points.push_back(pm.points[k].cast<double>());
    }
  }
  return out;
}

void check_shapes(const std::vector<LabelMap>& mhat, const std::vector<LabelMap>& gt) {
  if (mhat.size() != gt.size()) throw Error("prediction and ground truth have different image counts");
  for (std::size_t i = 0; i < mhat.size(); ++i)
    if (mhat[i].width() != gt[i].width() || mhat[i].height() != gt[i].height())
      throw Error("prediction and ground truth shapes differ for image " + std::to_string(i));
}

}  // namespace

std::vector<ObjectMatchReport> match_objects(const std::vector<LabelMap>& mhat, const Scene& scene,
                                             std::vector<std::string>* diagnostics, unsigned threads) {
  if (!scene.ground_truth) throw Error("scene has no ground truth");
  const auto& gt = *scene.ground_truth;
  check_shapes(mhat, gt);

  const auto objects = regions(gt, scene);
  const auto classes = regions(mhat, scene);
  std::vector<std::uint32_t> object_ids;
  std::vector<const Region*> object_regions;
  for (const auto& [id, r] : objects) {
    object_ids.push_back(id);
    object_regions.push_back(&r);
  }
  std::vector<ClassId> class_ids;
  std::vector<const Region*> class_regions;
  for (const auto& [id, r] : classes) {
    class_ids.push_back(id);
    class_regions.push_back(&r);
  }
  if (class_ids.empty() && diagnostics)
    diagnostics->push_back("prediction has no foreground classes; all object scores are 0");

  std::vector<KdTree> object_index(object_ids.size());
  std::vector<KdTree> class_index(class_ids.size());
  parallel_for(object_ids.size(), threads, [&](std::size_t o) { object_index[o] = KdTree(object_regions[o]->points); });
  parallel_for(class_ids.size(), threads, [&](std::size_t c) { class_index[c] = KdTree(class_regions[c]->points); });

  std::vector<ObjectMatchReport> reports(object_ids.size());
  parallel_for(object_ids.size(), threads, [&](std::size_t o) {
    const Region& obj = *object_regions[o];
    ObjectMatchReport& rep = reports[o];
    rep.object_id = object_ids[o];
    rep.object_pixels = obj.pixels.size();
    if (class_ids.empty()) return;

    std::vector<double> ious(class_ids.size());
    std::size_t best_iou = 0;
    for (std::size_t c = 0; c < class_ids.size(); ++c) {
      ious[c] = iou(class_regions[c]->pixels, obj.pixels);
      if (ious[c] > ious[best_iou]) best_iou = c;
    }

    // Argmin Chamfer, lowest class index on ties. The IoU winner goes first
    // to give a tight bound; equal pixel sets have distance exactly 0.
    auto chamfer_to = [&](std::size_t c, double bound) {
      if (ious[c] == 1.0) return 0.0;
      const double forward = bounded_sum(0.0, obj.points, class_index[c], bound);
      if (forward == std::numeric_limits<double>::infinity()) return forward;
      return bounded_sum(forward, class_regions[c]->points, object_index[o], bound);
    };
    std::size_t best_chamfer = best_iou;
    double best_chamfer_value = chamfer_to(best_iou, std::numeric_limits<double>::infinity());
    for (std::size_t c = 0; c < class_ids.size(); ++c) {
      if (c == best_iou) continue;
      const double d = chamfer_to(c, best_chamfer_value);
      if (d < best_chamfer_value || (d == best_chamfer_value && c < best_chamfer)) {
        best_chamfer_value = d;
        best_chamfer = c;
      }
    }
    rep.iou_class = class_ids[best_iou];
    rep.iou = ious[best_iou];
    rep.f1 = f1(class_regions[best_iou]->pixels, obj.pixels);
    rep.precision = precision(class_regions[best_iou]->pixels, obj.pixels);
    rep.chamfer_class = class_ids[best_chamfer];
    rep.chamfer = best_chamfer_value;
    rep.iou_sel = ious[best_chamfer];
  });
  return reports;
}

double pixel_utility(const std::vector<LabelMap>& mhat, const std::vector<LabelMap>& ground_truth,
                     std::vector<std::string>* diagnostics) {
  check_shapes(mhat, ground_truth);
  std::size_t predicted = 0;
  std::size_t truth = 0;
  for (std::size_t i = 0; i < mhat.size(); ++i) {
    for (std::size_t k = 0; k < mhat[i].size(); ++k) {
      predicted += mhat[i][k] != 0;
      truth += ground_truth[i][k] != 0;
    }
  }
  if (truth == 0) throw Error("ground truth has no foreground pixels");
  const double u = static_cast<double>(predicted) / static_cast<double>(truth);
  if (u > 1.0 && diagnostics)
    diagnostics->push_back("pixel utility exceeds 1: prediction labels ground-truth background as foreground");
  return u;
}

namespace {

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

void fill_means(MetricsReport& r) {
  r.mean_iou = r.mean_f1 = r.mean_chamfer = r.mean_iou_sel = r.mean_precision = 0.0;
  if (!r.objects.empty()) {
    for (const auto& o : r.objects) {
      r.mean_iou += o.iou;
      r.mean_f1 += o.f1;
      r.mean_chamfer += o.chamfer;
      r.mean_iou_sel += o.iou_sel;
      r.mean_precision += o.precision;
    }
    const auto n = static_cast<double>(r.objects.size());
    r.mean_iou /= n;
    r.mean_f1 /= n;
    r.mean_chamfer /= n;
    r.mean_iou_sel /= n;
    r.mean_precision /= n;
  }
  r.pixel_utility_mean = 0.0;
  for (double u : r.pixel_utilities) r.pixel_utility_mean += u;
  if (!r.pixel_utilities.empty()) r.pixel_utility_mean /= static_cast<double>(r.pixel_utilities.size());
  r.pixel_utility_median = median(r.pixel_utilities);
}

}  // namespace

MetricsReport evaluate(const std::vector<LabelMap>& mhat, const Scene& scene, unsigned threads) {
  MetricsReport r;
  r.objects = match_objects(mhat, scene, &r.diagnostics, threads);
  r.pixel_utilities.push_back(pixel_utility(mhat, *scene.ground_truth, &r.diagnostics));
  std::vector<bool> seen(65536, false);
  for (const auto& m : mhat)
    for (LocalId v : m.labels()) seen[v] = true;
  r.foreground_classes = static_cast<std::size_t>(std::count(seen.begin() + 1, seen.end(), true));
  fill_means(r);
  return r;
}

MetricsReport combine(const std::vector<MetricsReport>& reports) {
  MetricsReport out;
  for (const auto& r : reports) {
    out.objects.insert(out.objects.end(), r.objects.begin(), r.objects.end());
    out.pixel_utilities.insert(out.pixel_utilities.end(), r.pixel_utilities.begin(), r.pixel_utilities.end());
    out.diagnostics.insert(out.diagnostics.end(), r.diagnostics.begin(), r.diagnostics.end());
    out.foreground_classes += r.foreground_classes;
  }
  fill_means(out);
  return out;
}

nlohmann::ordered_json to_json(const MetricsReport& r) {
  nlohmann::ordered_json j;
  j["per_object"] = nlohmann::ordered_json::array();
  for (const auto& o : r.objects) {
    j["per_object"].push_back({{"object_id", o.object_id},
                               {"pixels", o.object_pixels},
                               {"iou_class", o.iou_class},
                               {"chamfer_class", o.chamfer_class},
                               {"iou", o.iou},
                               {"f1", o.f1},
                               {"d_chamfer", o.chamfer},
                               {"iou_sel", o.iou_sel},
                               {"precision", o.precision}});
  }
  j["means"] = {{"iou", r.mean_iou},
                {"f1", r.mean_f1},
                {"d_chamfer", r.mean_chamfer},
                {"iou_sel", r.mean_iou_sel},
                {"precision", r.mean_precision}};
  j["pixel_utility"] = {{"mean", r.pixel_utility_mean}, {"median", r.pixel_utility_median}};
  j["foreground_classes"] = r.foreground_classes;
  j["diagnostics"] = r.diagnostics;
  return j;
}

}  // namespace maskfuse::metrics
