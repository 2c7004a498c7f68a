#pragma once

// Brute-force reference implementations used as test oracles. They share no
// code with the library beyond its data types.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <set>
#include <vector>

#include "sgwsod/dataset.hpp"
#include "sgwsod/eval.hpp"
#include "sgwsod/geometry.hpp"
#include "sgwsod/model.hpp"

namespace oracle {

using sgwsod::Box;
using sgwsod::Detection;
using sgwsod::ImageRecord;
using sgwsod::Proposal;
using sgwsod::SaliencyMap;
using sgwsod::SuperpixelGrid;
using sgwsod::SuperpixelId;

inline double box_iou(const Box& a, const Box& b) {
  std::int64_t inter = 0;
  std::int64_t uni = 0;
  const int x1 = std::max(a.x1, b.x1);
  const int y1 = std::max(a.y1, b.y1);
  for (int y = 0; y < y1; ++y) {
    for (int x = 0; x < x1; ++x) {
      const bool ia = x >= a.x0 && x < a.x1 && y >= a.y0 && y < a.y1;
      const bool ib = x >= b.x0 && x < b.x1 && y >= b.y0 && y < b.y1;
      inter += ia && ib;
      uni += ia || ib;
    }
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

// Scans every horizontally or vertically adjacent pixel pair.
inline std::vector<std::set<SuperpixelId>> adjacency(const SuperpixelGrid& g) {
  std::vector<std::set<SuperpixelId>> out(g.superpixel_count());
  for (int y = 0; y < g.height(); ++y) {
    for (int x = 0; x < g.width(); ++x) {
      const SuperpixelId a = g.at(x, y);
      if (x + 1 < g.width() && g.at(x + 1, y) != a) {
        out[a].insert(g.at(x + 1, y));
        out[g.at(x + 1, y)].insert(a);
      }
      if (y + 1 < g.height() && g.at(x, y + 1) != a) {
        out[a].insert(g.at(x, y + 1));
        out[g.at(x, y + 1)].insert(a);
      }
    }
  }
  return out;
}

inline std::vector<char> member_mask(const SuperpixelGrid& g, const std::vector<SuperpixelId>& ids) {
  std::vector<char> m(g.superpixel_count(), 0);
  for (auto id : ids) m[id] = 1;
  return m;
}

inline std::int64_t pixel_count(const SuperpixelGrid& g, const std::vector<SuperpixelId>& ids) {
  const auto m = member_mask(g, ids);
  std::int64_t n = 0;
  for (int y = 0; y < g.height(); ++y) {
    for (int x = 0; x < g.width(); ++x) n += m[g.at(x, y)];
  }
  return n;
}

inline double mean_over(const SuperpixelGrid& g, const std::vector<char>& mask, const SaliencyMap& map) {
  double sum = 0.0;
  std::int64_t n = 0;
  for (int y = 0; y < g.height(); ++y) {
    for (int x = 0; x < g.width(); ++x) {
      if (mask[g.at(x, y)]) {
        sum += map.at(x, y);
        ++n;
      }
    }
  }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

inline double region_saliency(const SuperpixelGrid& g, const Proposal& p, const SaliencyMap& map) {
  return mean_over(g, member_mask(g, p.superpixel_ids), map);
}

// Neighborhood: superpixels owning a pixel 4-adjacent to a member pixel, minus members.
inline double neighborhood_saliency(const SuperpixelGrid& g, const Proposal& p, const SaliencyMap& map) {
  const auto members = member_mask(g, p.superpixel_ids);
  std::vector<char> ring(g.superpixel_count(), 0);
  const int dx[] = {1, -1, 0, 0};
  const int dy[] = {0, 0, 1, -1};
  for (int y = 0; y < g.height(); ++y) {
    for (int x = 0; x < g.width(); ++x) {
      if (!members[g.at(x, y)]) continue;
      for (int k = 0; k < 4; ++k) {
        const int nx = x + dx[k];
        const int ny = y + dy[k];
        if (nx < 0 || ny < 0 || nx >= g.width() || ny >= g.height()) continue;
        const auto id = g.at(nx, ny);
        if (!members[id]) ring[id] = 1;
      }
    }
  }
  return mean_over(g, ring, map);
}

struct SeedResult {
  std::vector<int> seeds;      // per positive class, ascending class id
  std::vector<int> negatives;  // per positive class
};

inline SeedResult select(const ImageRecord& r, double sigma) {
  SeedResult out;
  const auto n = r.proposals.size();
  std::vector<int> classes;
  for (std::size_t c = 0; c < r.labels.y.size(); ++c) {
    if (r.labels.y[c] > 0) classes.push_back(static_cast<int>(c));
  }
  std::vector<std::vector<double>> rs(classes.size(), std::vector<double>(n));
  for (std::size_t k = 0; k < classes.size(); ++k) {
    const SaliencyMap* map = nullptr;
    for (const auto& m : r.saliency) {
      if (m.class_id == classes[k]) map = &m;
    }
    int best = 0;
    double best_sc = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      const auto& p = r.proposals[i];
      rs[k][i] = oracle::region_saliency(r.grid, p, *map);
      const double ns = oracle::neighborhood_saliency(r.grid, p, *map);
      const double area = static_cast<double>(pixel_count(r.grid, p.superpixel_ids));
      const double sc = std::exp(std::min(area / (sigma * sigma), 64.0)) * (rs[k][i] - ns);
      if (sc > best_sc) {
        best_sc = sc;
        best = static_cast<int>(i);
      }
    }
    out.seeds.push_back(best);
  }
  std::vector<char> used(n, 0);
  for (int s : out.seeds) used[static_cast<std::size_t>(s)] = 1;
  for (std::size_t k = 0; k < classes.size(); ++k) {
    int best = -1;
    for (std::size_t i = 0; i < n; ++i) {
      if (used[i]) continue;
      if (best < 0 || rs[k][i] < rs[k][static_cast<std::size_t>(best)]) best = static_cast<int>(i);
    }
    if (best < 0) break;
    used[static_cast<std::size_t>(best)] = 1;
    out.negatives.push_back(best);
  }
  return out;
}

// Union-find components over pixels at or above theta * max; boxes sorted by
// the raster index of each component's first pixel.
inline std::vector<Box> threshold_boxes(const SaliencyMap& map, double theta) {
  const int w = map.width;
  const int h = map.height;
  float mx = 0.0f;
  for (float v : map.values) mx = std::max(mx, v);
  if (mx <= 0.0f) return {};
  const double cut = theta * mx;
  std::vector<int> parent(static_cast<std::size_t>(w * h));
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int a) {
    while (parent[static_cast<std::size_t>(a)] != a) a = parent[static_cast<std::size_t>(a)];
    return a;
  };
  auto on = [&](int x, int y) { return map.at(x, y) >= cut; };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!on(x, y)) continue;
      if (x + 1 < w && on(x + 1, y)) parent[static_cast<std::size_t>(find(y * w + x + 1))] = find(y * w + x);
      if (y + 1 < h && on(x, y + 1)) parent[static_cast<std::size_t>(find((y + 1) * w + x))] = find(y * w + x);
    }
  }
  std::vector<int> first;
  std::vector<Box> boxes;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!on(x, y)) continue;
      const int root = find(y * w + x);
      auto it = std::find(first.begin(), first.end(), root);
      if (it == first.end()) {
        first.push_back(root);
        boxes.push_back(Box{x, y, x + 1, y + 1});
      } else {
        Box& b = boxes[static_cast<std::size_t>(it - first.begin())];
        b.x0 = std::min(b.x0, x);
        b.y0 = std::min(b.y0, y);
        b.x1 = std::max(b.x1, x + 1);
        b.y1 = std::max(b.y1, y + 1);
      }
    }
  }
  return boxes;
}

// Repeatedly take the best remaining detection and drop everything it overlaps.
inline std::vector<Detection> nms(std::vector<Detection> remaining, double threshold) {
  std::vector<Detection> kept;
  while (!remaining.empty()) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < remaining.size(); ++i) {
      const auto& a = remaining[i];
      const auto& b = remaining[best];
      if (a.score > b.score || (a.score == b.score && a.proposal_index < b.proposal_index)) best = i;
    }
    const Detection top = remaining[best];
    kept.push_back(top);
    std::vector<Detection> next;
    for (std::size_t i = 0; i < remaining.size(); ++i) {
      if (i != best && box_iou(remaining[i].bbox, top.bbox) < threshold) next.push_back(remaining[i]);
    }
    remaining = std::move(next);
  }
  return kept;
}

// Every relevant item contributes 1/npos times the best precision at any
// cutoff at or below its rank; unretrieved relevant items contribute 0.
inline double average_precision(const std::vector<bool>& hits, std::size_t npos) {
  if (npos == 0) return 0.0;
  std::vector<double> precision(hits.size());
  std::size_t tp = 0;
  for (std::size_t k = 0; k < hits.size(); ++k) {
    tp += hits[k];
    precision[k] = static_cast<double>(tp) / static_cast<double>(k + 1);
  }
  double ap = 0.0;
  for (std::size_t k = 0; k < hits.size(); ++k) {
    if (!hits[k]) continue;
    double best = 0.0;
    for (std::size_t j = k; j < hits.size(); ++j) best = std::max(best, precision[j]);
    ap += best;
  }
  return ap / static_cast<double>(npos);
}

// Eleven-point interpolation: mean over recall levels 0, 0.1, ..., 1 of the
// best precision at recall >= level.
inline double average_precision_11(const std::vector<bool>& hits, std::size_t npos) {
  double ap = 0.0;
  for (int t = 0; t <= 10; ++t) {
    const double level = t / 10.0;
    double best = 0.0;
    std::size_t tp = 0;
    for (std::size_t k = 0; k < hits.size(); ++k) {
      tp += hits[k];
      const double recall = static_cast<double>(tp) / static_cast<double>(npos);
      if (recall >= level) best = std::max(best, static_cast<double>(tp) / static_cast<double>(k + 1));
    }
    ap += best / 11.0;
  }
  return ap;
}

// Straight-line forward pass over the raw parameter arrays.
struct Forward {
  std::vector<double> saliency;              // N
  std::vector<std::vector<double>> scores;   // C x N
  std::vector<double> image_scores;          // C
};

inline std::vector<double> dense(const sgwsod::Dense& d, const std::vector<double>& x, bool relu) {
  std::vector<double> y(d.bias.size());
  for (std::size_t o = 0; o < y.size(); ++o) {
    double s = d.bias[o];
    for (std::size_t i = 0; i < x.size(); ++i) s += d.weight(o, i) * x[i];
    y[o] = relu ? std::max(0.0, s) : s;
  }
  return y;
}

inline Forward forward(const sgwsod::ModelParams& p, const sgwsod::Matrix<double>& features) {
  const auto& t = p.values;
  const std::size_t n = features.rows();
  const auto c_count = static_cast<std::size_t>(p.config.num_classes);
  Forward f;
  std::vector<std::vector<double>> cls(n);
  std::vector<std::vector<double>> det(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> h(features.row(i).begin(), features.row(i).end());
    for (const auto& layer : t.trunk) h = dense(layer, h, true);
    double pi = 1.0;
    if (p.config.saliency_weighting) {
      const double z = dense(t.saliency_out, dense(t.saliency_hidden, h, true), false)[0];
      pi = 1.0 / (1.0 + std::exp(-z));
    }
    f.saliency.push_back(pi);
    for (auto& v : h) v *= pi;
    cls[i] = dense(t.cls_stream, h, false);
    det[i] = dense(t.det_stream, h, false);
  }
  f.scores.assign(c_count, std::vector<double>(n));
  f.image_scores.assign(c_count, 0.0);
  for (std::size_t c = 0; c < c_count; ++c) {
    double det_norm = 0.0;
    for (std::size_t i = 0; i < n; ++i) det_norm += std::exp(det[i][c]);
    for (std::size_t i = 0; i < n; ++i) {
      double cls_norm = 0.0;
      for (std::size_t k = 0; k < c_count; ++k) cls_norm += std::exp(cls[i][k]);
      f.scores[c][i] = std::exp(cls[i][c]) / cls_norm * std::exp(det[i][c]) / det_norm;
      f.image_scores[c] += f.scores[c][i];
    }
  }
  return f;
}

}  // namespace oracle
