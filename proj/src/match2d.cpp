#include "maskfuse/match2d.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "maskfuse/error.hpp"
#include "maskfuse/parallel.hpp"
#include "maskfuse/random.hpp"

namespace maskfuse {

std::optional<VertexId> MaskTable::find(MaskRef ref) const {
  const auto it = std::lower_bound(refs.begin(), refs.end(), ref);
  if (it == refs.end() || *it != ref) return std::nullopt;
  return static_cast<VertexId>(it - refs.begin());
}

std::vector<VertexId> MaskTable::vertex_ids() const {
  std::vector<VertexId> ids(refs.size());
  std::iota(ids.begin(), ids.end(), VertexId{0});
  return ids;
}

MaskTable build_mask_table(const Scene& scene, const std::vector<PixelMask>& background) {
  if (!background.empty() && background.size() != scene.size())
    throw Error("background masks do not cover every image");
  MaskTable table;
  for (std::size_t i = 0; i < scene.size(); ++i) {
    const LabelMap& labels = scene.label_maps[i];
    std::vector<std::vector<Pixel>> by_id(65536);
    std::vector<bool> present(65536, false);
    for (int y = 0; y < labels.height(); ++y) {
      for (int x = 0; x < labels.width(); ++x) {
        const std::size_t k = static_cast<std::size_t>(y) * labels.width() + x;
        const LocalId id = labels[k];
        if (id == 0) continue;
        present[id] = true;
        if (!background.empty() && background[i][k]) continue;
        by_id[id].push_back({static_cast<std::uint16_t>(x), static_cast<std::uint16_t>(y)});
      }
    }
    for (std::size_t id = 1; id < by_id.size(); ++id) {
      const MaskRef ref{static_cast<ImageIndex>(i), static_cast<LocalId>(id)};
      if (!by_id[id].empty()) {
        table.refs.push_back(ref);
        table.pixels.push_back(std::move(by_id[id]));
      } else if (present[id]) {
        table.consumed.push_back(ref);
      }
    }
  }
  return table;
}

void MatchCountTable::add(MaskRef a, MaskRef b, std::uint32_t count) {
  if (b < a) std::swap(a, b);
  counts_[{a, b}] += count;
}

std::uint32_t MatchCountTable::count(MaskRef a, MaskRef b) const {
  if (b < a) std::swap(a, b);
  const auto it = counts_.find({a, b});
  return it == counts_.end() ? 0 : it->second;
}

CorrespondenceSet filter_confident(const CorrespondenceSet& matches, double min_conf) {
  if (!(min_conf >= 0.0 && min_conf <= 1.0)) throw Error("min_conf must lie in [0, 1]");
  CorrespondenceSet out{matches.image_a, matches.image_b, {}};
  std::copy_if(matches.matches.begin(), matches.matches.end(), std::back_inserter(out.matches),
               [&](const PixelMatch& m) { return m.confidence >= min_conf; });
  return out;
}

CorrespondenceSet subsample_matches(const CorrespondenceSet& matches, std::size_t max_n, std::uint64_t seed) {
  if (max_n < 1) throw Error("max_n must be at least 1");
  const std::size_t n = matches.matches.size();
  if (n <= max_n) return matches;
  // Partial Fisher-Yates over indices, then restore input order.
  std::vector<std::uint32_t> index(n);
  std::iota(index.begin(), index.end(), 0u);
  Rng rng(seed);
  for (std::size_t i = 0; i < max_n; ++i) {
    const std::size_t j = i + rng.below(n - i);
    std::swap(index[i], index[j]);
  }
  index.resize(max_n);
  std::sort(index.begin(), index.end());
  CorrespondenceSet out{matches.image_a, matches.image_b, {}};
  out.matches.reserve(max_n);
  for (std::uint32_t i : index) out.matches.push_back(matches.matches[i]);
  return out;
}

std::vector<std::pair<ImageIndex, ImageIndex>> candidate_pairs(const std::vector<CameraPose>& poses,
                                                               const PairPolicy& policy) {
  const std::size_t n = poses.size();
  auto normalized = [](double value, double limit) { return limit > 0.0 ? value / limit : 0.0; };

  // partners[a] = (score, b) for every b passing both thresholds.
  std::vector<std::vector<std::pair<double, ImageIndex>>> partners(n);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      const double angle = rotation_angle_deg(poses[a].rotation, poses[b].rotation);
      const double dist = (poses[a].translation - poses[b].translation).norm();
      if (angle > policy.max_angle_deg || dist > policy.max_translation_m) continue;
      const double score = normalized(angle, policy.max_angle_deg) + normalized(dist, policy.max_translation_m);
      partners[a].emplace_back(score, static_cast<ImageIndex>(b));
      partners[b].emplace_back(score, static_cast<ImageIndex>(a));
    }
  }
  std::set<std::pair<ImageIndex, ImageIndex>> kept;
  for (std::size_t a = 0; a < n; ++a) {
    auto& list = partners[a];
    std::sort(list.begin(), list.end());
    const std::size_t take = std::min(policy.k_nearest, list.size());
    for (std::size_t k = 0; k < take; ++k) {
      const auto b = list[k].second;
      kept.emplace(std::min<ImageIndex>(a, b), std::max<ImageIndex>(a, b));
    }
  }
  return {kept.begin(), kept.end()};
}

namespace {

std::uint64_t match_key(const PixelMatch& m) {
  return (std::uint64_t{m.a.x} << 48) | (std::uint64_t{m.a.y} << 32) | (std::uint64_t{m.b.x} << 16) | m.b.y;
}

void count_set(const std::vector<LabelMap>& label_maps, const CorrespondenceSet& set, MatchCountTable& table) {
  const LabelMap& la = label_maps.at(set.image_a);
  const LabelMap& lb = label_maps.at(set.image_b);
  std::vector<std::uint64_t> seen;
  seen.reserve(set.matches.size());
  for (const auto& m : set.matches) seen.push_back(match_key(m));
  std::sort(seen.begin(), seen.end());
  seen.erase(std::unique(seen.begin(), seen.end()), seen.end());
  for (std::uint64_t key : seen) {
    const int xa = static_cast<int>((key >> 48) & 0xffff);
    const int ya = static_cast<int>((key >> 32) & 0xffff);
    const int xb = static_cast<int>((key >> 16) & 0xffff);
    const int yb = static_cast<int>(key & 0xffff);
    if (!la.contains(xa, ya) || !lb.contains(xb, yb)) throw Error("match pixel out of bounds");
    const LocalId i = la.at(xa, ya);
    const LocalId j = lb.at(xb, yb);
    if (i == 0 || j == 0) continue;
    table.add({set.image_a, i}, {set.image_b, j});
  }
}

}  // namespace

MatchCountTable match_counts(const std::vector<LabelMap>& label_maps,
                             const std::vector<CorrespondenceSet>& correspondences) {
  MatchCountTable table;
  for (const auto& set : correspondences) {
    if (set.image_a == set.image_b) {
      warn("ignoring same-image correspondences for image " + std::to_string(set.image_a));
      continue;
    }
    count_set(label_maps, set, table);
  }
  return table;
}

Ratio overlap_ratio(std::uint64_t h, std::uint64_t g1, std::uint64_t g2) {
  if (g1 == 0 || g2 == 0) throw Error("overlap ratio of a zero-area mask");
  const double raw = static_cast<double>(h) / static_cast<double>(std::min(g1, g2));
  if (raw > 1.0) return {1.0, true};
  return {raw, false};
}

double percentile_threshold(std::vector<double> ratios, double percentile) {
  if (ratios.empty()) throw Error("no candidate pairs");
  if (!(percentile > 0.0 && percentile <= 100.0)) throw Error("percentile must lie in (0, 100]");
  std::sort(ratios.begin(), ratios.end());
  const double n = static_cast<double>(ratios.size());
  // The epsilon keeps exact products such as 70 * 10 / 100 from rounding up.
  auto rank = static_cast<std::size_t>(std::ceil(percentile * n / 100.0 - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, ratios.size());
  return ratios[rank - 1];
}

Graph2d build_2d_graph(const Scene& scene, const MaskTable& table, const std::vector<PixelMask>& background,
                       const Match2dConfig& config, std::uint64_t seed, unsigned threads) {
  const auto pairs = candidate_pairs(scene.poses(), config.pair_policy);
  std::vector<const CorrespondenceSet*> used;
  for (const auto& set : scene.correspondences) {
    if (set.image_a == set.image_b) {
      warn("ignoring same-image correspondences for image " + std::to_string(set.image_a));
      continue;
    }
    if (std::binary_search(pairs.begin(), pairs.end(), std::make_pair(set.image_a, set.image_b))) used.push_back(&set);
  }

  // Label maps restricted to foreground pixels.
  std::vector<LabelMap> foreground = scene.label_maps;
  if (!background.empty()) {
    for (std::size_t i = 0; i < foreground.size(); ++i)
      for (std::size_t k = 0; k < foreground[i].size(); ++k)
        if (background[i][k]) foreground[i][k] = 0;
  }

  std::vector<MatchCountTable> partial(used.size());
  parallel_for(used.size(), threads, [&](std::size_t s) {
    const CorrespondenceSet& set = *used[s];
    const LabelMap& la = foreground[set.image_a];
    const LabelMap& lb = foreground[set.image_b];
    CorrespondenceSet kept{set.image_a, set.image_b, {}};
    for (const auto& m : set.matches)
      if (la.at(m.a.x, m.a.y) != 0 && lb.at(m.b.x, m.b.y) != 0) kept.matches.push_back(m);
    kept = filter_confident(kept, config.min_match_confidence);
    kept = subsample_matches(kept, config.max_matches_per_pair,
                             hash_key({stream_seed(seed, Stream::kSubsample), set.image_a, set.image_b}));
    count_set(foreground, kept, partial[s]);
  });
  MatchCountTable counts;
  for (const auto& t : partial)
    for (const auto& [key, h] : t.entries()) counts.add(key.first, key.second, h);

  Graph2d out;
  out.used_image_pairs = used.size();
  std::vector<std::pair<VertexId, VertexId>> candidates;
  std::vector<double> ratios;
  for (const auto& [key, h] : counts.entries()) {
    const auto u = table.find(key.first);
    const auto v = table.find(key.second);
    ensure(u && v, "match count references a mask missing from the mask table");
    const Ratio r = overlap_ratio(h, table.area(*u), table.area(*v));
    if (r.clamped) ++out.clamped_ratios;
    candidates.emplace_back(*u, *v);
    ratios.push_back(r.value);
  }
  out.considered_pairs = ratios.size();
  if (out.clamped_ratios > 0)
    warn(std::to_string(out.clamped_ratios) + " overlap ratios exceeded 1 and were clamped");

  std::vector<std::pair<VertexId, VertexId>> edges;
  if (config.tau2d_override || !ratios.empty()) {
    out.tau2d = config.tau2d_override ? *config.tau2d_override : percentile_threshold(ratios, config.tau2d_percentile);
    for (std::size_t k = 0; k < candidates.size(); ++k)
      if (ratios[k] >= out.tau2d) edges.push_back(candidates[k]);
  }
  out.graph = MaskGraph(table.vertex_ids(), std::move(edges));
  return out;
}

}  // namespace maskfuse
