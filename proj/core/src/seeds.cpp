#include "sgwsod/seeds.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <string>

#include "sgwsod/errors.hpp"
#include "sgwsod/log.hpp"

namespace sgwsod {

SuperpixelSaliency::SuperpixelSaliency(const SuperpixelGrid& grid, const SaliencyMap& map)
    : sums_(grid.superpixel_count(), 0.0) {
  const auto labels = grid.labels();
  for (std::size_t p = 0; p < labels.size(); ++p) sums_[labels[p]] += map.values[p];
}

namespace {

double region_mean(const SuperpixelGrid& grid, const SuperpixelSaliency& sal,
                   std::span<const SuperpixelId> ids) {
  double sum = 0.0;
  std::int64_t area = 0;
  for (SuperpixelId id : ids) {
    sum += sal.sum(id);
    area += grid.sizes()[id];
  }
  return area > 0 ? sum / static_cast<double>(area) : 0.0;
}

std::vector<SuperpixelId> neighborhood(const Proposal& p, const Adjacency& adj, std::size_t count) {
  std::vector<char> mark(count, 0);
  for (SuperpixelId id : p.superpixel_ids) mark[id] = 1;
  std::vector<SuperpixelId> out;
  for (SuperpixelId id : p.superpixel_ids) {
    for (SuperpixelId n : adj[id]) {
      if (mark[n] == 0) {
        mark[n] = 2;
        out.push_back(n);
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

void check_dims(const SuperpixelGrid& grid, const SaliencyMap& map) {
  if (map.width != grid.width() || map.height != grid.height() ||
      map.values.size() != grid.pixel_count()) {
    throw ValidationError("saliency map for class " + std::to_string(map.class_id) +
                          " does not match the superpixel grid");
  }
}

}  // namespace

double region_saliency(const SuperpixelGrid& grid, const Proposal& proposal, const SaliencyMap& map) {
  check_dims(grid, map);
  return region_mean(grid, SuperpixelSaliency(grid, map), proposal.superpixel_ids);
}

double neighborhood_saliency(const SuperpixelGrid& grid, const Proposal& proposal,
                             const SaliencyMap& map, const Adjacency& adj) {
  check_dims(grid, map);
  const auto ring = neighborhood(proposal, adj, grid.superpixel_count());
  return region_mean(grid, SuperpixelSaliency(grid, map), ring);
}

double saliency_contrast(double rs, double ns, std::int64_t area_px, double sigma) {
  if (!(sigma > 0.0)) throw ValidationError("sigma must be positive");
  double exponent = static_cast<double>(area_px) / (sigma * sigma);
  if (exponent > kMaxAreaExponent) {
    log::warn("area/sigma^2 = ", exponent, " capped at ", kMaxAreaExponent);
    exponent = kMaxAreaExponent;
  }
  return std::exp(exponent) * (rs - ns);
}

std::vector<SeedScore> score_proposals(const ImageRecord& record, int class_id, double sigma) {
  const SaliencyMap* map = record.saliency_for(class_id);
  if (map == nullptr) {
    throw ValidationError("record '" + record.id + "': no saliency map for positive class " +
                          std::to_string(class_id));
  }
  check_dims(record.grid, *map);
  const SuperpixelSaliency sal(record.grid, *map);
  const Adjacency adj = adjacency(record.grid);

  std::vector<SeedScore> scores;
  scores.reserve(record.proposals.size());
  for (std::size_t i = 0; i < record.proposals.size(); ++i) {
    const Proposal& p = record.proposals[i];
    const auto ring = neighborhood(p, adj, record.grid.superpixel_count());
    if (ring.empty()) {
      log::debug("record '", record.id, "' proposal ", i, ": empty neighborhood, NS = 0");
    }
    SeedScore s;
    s.proposal_index = static_cast<int>(i);
    s.class_id = class_id;
    s.rs = region_mean(record.grid, sal, p.superpixel_ids);
    s.ns = region_mean(record.grid, sal, ring);
    s.contrast = saliency_contrast(s.rs, s.ns, p.area_px, sigma);
    scores.push_back(s);
  }
  return scores;
}

SeedAssignment select_seeds(const ImageRecord& record, double sigma) {
  SeedAssignment out;
  for (int c : record.labels.positives()) {
    const auto scores = score_proposals(record, c, sigma);
    std::size_t best = 0;
    for (std::size_t i = 1; i < scores.size(); ++i) {
      if (scores[i].contrast > scores[best].contrast) best = i;
    }
    out.seeds.push_back({c, static_cast<int>(best), scores[best]});
  }
  return out;
}

void select_negatives(const ImageRecord& record, SeedAssignment& a) {
  const std::size_t n = record.proposals.size();
  std::vector<char> used(n, 0);
  for (const auto& s : a.seeds) used[static_cast<std::size_t>(s.seed_index)] = 1;

  a.negatives.clear();
  for (const auto& s : a.seeds) {
    const SaliencyMap* map = record.saliency_for(s.class_id);
    if (map == nullptr) {
      throw ValidationError("record '" + record.id + "': no saliency map for positive class " +
                            std::to_string(s.class_id));
    }
    const SuperpixelSaliency sal(record.grid, *map);
    int best = -1;
    double best_rs = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (used[i]) continue;
      const double rs = region_mean(record.grid, sal, record.proposals[i].superpixel_ids);
      if (best < 0 || rs < best_rs) {
        best = static_cast<int>(i);
        best_rs = rs;
      }
    }
    if (best < 0) {
      log::warn("record '", record.id, "': only ", n, " proposals for ", a.seeds.size(),
                " seeds; negatives truncated to ", a.negatives.size());
      break;
    }
    used[static_cast<std::size_t>(best)] = 1;
    a.negatives.push_back(best);
  }

  a.sample_indices.clear();
  a.targets.clear();
  for (const auto& s : a.seeds) {
    a.sample_indices.push_back(s.seed_index);
    a.targets.push_back(1.0);
  }
  for (int neg : a.negatives) {
    a.sample_indices.push_back(neg);
    a.targets.push_back(0.0);
  }
}

SeedAssignment assign_seeds(const ImageRecord& record, double sigma) {
  SeedAssignment a = select_seeds(record, sigma);
  select_negatives(record, a);
  return a;
}

std::vector<Box> threshold_baseline(const SaliencyMap& map, double theta) {
  if (!(theta > 0.0 && theta < 1.0)) throw ValidationError("threshold theta must be in (0, 1)");
  if (map.values.empty()) return {};
  const float peak = *std::max_element(map.values.begin(), map.values.end());
  if (!(peak > 0.0f)) return {};
  const double cut = theta * static_cast<double>(peak);

  const int w = map.width;
  const int h = map.height;
  std::vector<char> on(map.values.size());
  for (std::size_t p = 0; p < on.size(); ++p) on[p] = static_cast<double>(map.values[p]) >= cut;

  std::vector<char> seen(on.size(), 0);
  std::vector<Box> boxes;
  std::queue<int> frontier;
  for (int start = 0; start < w * h; ++start) {
    if (!on[static_cast<std::size_t>(start)] || seen[static_cast<std::size_t>(start)]) continue;
    Box b{start % w, start / w, start % w + 1, start / w + 1};
    seen[static_cast<std::size_t>(start)] = 1;
    frontier.push(start);
    while (!frontier.empty()) {
      const int p = frontier.front();
      frontier.pop();
      const int x = p % w;
      const int y = p / w;
      b.x0 = std::min(b.x0, x);
      b.y0 = std::min(b.y0, y);
      b.x1 = std::max(b.x1, x + 1);
      b.y1 = std::max(b.y1, y + 1);
      const int nx[4] = {x - 1, x + 1, x, x};
      const int ny[4] = {y, y, y - 1, y + 1};
      for (int k = 0; k < 4; ++k) {
        if (nx[k] < 0 || ny[k] < 0 || nx[k] >= w || ny[k] >= h) continue;
        const auto q = static_cast<std::size_t>(ny[k] * w + nx[k]);
        if (on[q] && !seen[q]) {
          seen[q] = 1;
          frontier.push(static_cast<int>(q));
        }
      }
    }
    boxes.push_back(b);
  }
  return boxes;
}

}  // namespace sgwsod
