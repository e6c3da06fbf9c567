#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "maskfuse/contraction.hpp"
#include "maskfuse/scene.hpp"

namespace maskfuse {

// Per-image byte mask, row-major; nonzero marks a background pixel.
using PixelMask = std::vector<std::uint8_t>;

// Every mask that keeps at least one foreground pixel, in ascending MaskRef
// order. A mask's vertex id is its position in `refs`.
struct MaskTable {
  std::vector<MaskRef> refs;
  std::vector<std::vector<Pixel>> pixels;  // foreground pixels, row-major
  // Masks whose every pixel is background.
  std::vector<MaskRef> consumed;

  std::size_t size() const { return refs.size(); }
  std::optional<VertexId> find(MaskRef ref) const;
  std::vector<VertexId> vertex_ids() const;
  std::size_t area(VertexId v) const { return pixels[v].size(); }
};

// `background` may be empty (no background) or hold one mask per image.
MaskTable build_mask_table(const Scene& scene, const std::vector<PixelMask>& background);

struct PairPolicy {
  double max_angle_deg = 75.0;
  double max_translation_m = 1.5;
  std::size_t k_nearest = 4;
};

struct Match2dConfig {
  double tau2d_percentile = 78.0;
  std::optional<double> tau2d_override;
  double min_match_confidence = 0.5;
  std::size_t max_matches_per_pair = 10000;
  PairPolicy pair_policy;
};

// Canonical key: first < second.
using MaskPair = std::pair<MaskRef, MaskRef>;

class MatchCountTable {
 public:
  void add(MaskRef a, MaskRef b, std::uint32_t count = 1);
  std::uint32_t count(MaskRef a, MaskRef b) const;
  const std::map<MaskPair, std::uint32_t>& entries() const { return counts_; }
  std::size_t size() const { return counts_.size(); }
  bool empty() const { return counts_.empty(); }

 private:
  std::map<MaskPair, std::uint32_t> counts_;
};

struct Ratio {
  double value = 0.0;
  bool clamped = false;  // raw h / min(g1, g2) exceeded 1
};

CorrespondenceSet filter_confident(const CorrespondenceSet& matches, double min_conf);

// Uniform sample without replacement, original order preserved.
CorrespondenceSet subsample_matches(const CorrespondenceSet& matches, std::size_t max_n, std::uint64_t seed);

// Unordered image pairs (a < b) that pass both pose thresholds and rank
// among the k best-scored partners of a or of b.
std::vector<std::pair<ImageIndex, ImageIndex>> candidate_pairs(const std::vector<CameraPose>& poses,
                                                               const PairPolicy& policy);

// Counts matches whose two pixels both carry a nonzero label. Matches that
// repeat an earlier (pixel_a, pixel_b) pair are counted once.
MatchCountTable match_counts(const std::vector<LabelMap>& label_maps,
                             const std::vector<CorrespondenceSet>& correspondences);

Ratio overlap_ratio(std::uint64_t h, std::uint64_t g1, std::uint64_t g2);

// Nearest-rank percentile: the ceil(p/100 * n)-th smallest value.
double percentile_threshold(std::vector<double> ratios, double percentile);

struct Graph2d {
  MaskGraph graph;       // vertex ids index into the mask table
  double tau2d = 0.0;    // threshold actually applied
  std::size_t considered_pairs = 0;
  std::size_t clamped_ratios = 0;
  std::size_t used_image_pairs = 0;
};

// Builds G_2d over the foreground masks of `table`. Matches touching a
// background pixel are discarded before confidence filtering and subsampling.
Graph2d build_2d_graph(const Scene& scene, const MaskTable& table, const std::vector<PixelMask>& background,
                       const Match2dConfig& config, std::uint64_t seed, unsigned threads = 1);

}  // namespace maskfuse
