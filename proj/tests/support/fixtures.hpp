#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "sgwsod/dataset.hpp"
#include "sgwsod/rng.hpp"

namespace fixture {

using namespace sgwsod;

// Square cells of `cell` pixels tiled over cols x rows; ids in raster order.
inline SuperpixelGrid tiled_grid(int cols, int rows, int cell) {
  std::vector<SuperpixelId> labels;
  for (int y = 0; y < rows * cell; ++y) {
    for (int x = 0; x < cols * cell; ++x) {
      labels.push_back(static_cast<SuperpixelId>((y / cell) * cols + x / cell));
    }
  }
  return SuperpixelGrid(cols * cell, rows * cell, std::move(labels));
}

// Nearest-site partition of a width x height image into `sites` superpixels.
inline SuperpixelGrid voronoi_grid(int width, int height, int sites, Rng& rng) {
  std::vector<std::pair<int, int>> points;
  while (static_cast<int>(points.size()) < sites) {
    const std::pair<int, int> p{rng.between(0, width - 1), rng.between(0, height - 1)};
    if (std::find(points.begin(), points.end(), p) == points.end()) points.push_back(p);
  }
  std::vector<SuperpixelId> labels;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      int best = 0;
      int best_d = std::numeric_limits<int>::max();
      for (int s = 0; s < sites; ++s) {
        const int dx = x - points[static_cast<std::size_t>(s)].first;
        const int dy = y - points[static_cast<std::size_t>(s)].second;
        if (dx * dx + dy * dy < best_d) {
          best_d = dx * dx + dy * dy;
          best = s;
        }
      }
      labels.push_back(static_cast<SuperpixelId>(best));
    }
  }
  return SuperpixelGrid(width, height, std::move(labels));
}

inline std::vector<SuperpixelId> random_subset(std::size_t count, Rng& rng) {
  std::vector<SuperpixelId> ids;
  for (std::size_t i = 0; i < count; ++i) {
    if (rng.uniform() < 0.4) ids.push_back(static_cast<SuperpixelId>(i));
  }
  if (ids.empty()) ids.push_back(static_cast<SuperpixelId>(rng.below(count)));
  return ids;
}

inline SaliencyMap random_map(int class_id, int width, int height, Rng& rng) {
  SaliencyMap m{class_id, width, height, {}};
  for (int i = 0; i < width * height; ++i) m.values.push_back(static_cast<float>(rng.uniform()));
  return m;
}

inline SaliencyMap cell_map(int class_id, const SuperpixelGrid& g, const std::vector<float>& per_cell) {
  SaliencyMap m{class_id, g.width(), g.height(), {}};
  for (auto id : g.labels()) m.values.push_back(per_cell[id]);
  return m;
}

// Random record on a Voronoi grid with random proposals, labels and maps.
inline ImageRecord random_record(Rng& rng, int num_classes, int feature_dim) {
  ImageRecord r;
  r.id = "rand";
  const int w = rng.between(8, 24);
  const int h = rng.between(8, 24);
  r.grid = voronoi_grid(w, h, rng.between(4, 12), rng);
  const int n = rng.between(2, 12);
  for (int i = 0; i < n; ++i) r.proposals.push_back(make_proposal(r.grid, random_subset(r.grid.superpixel_count(), rng)));
  r.features = Matrix<float>(static_cast<std::size_t>(n), static_cast<std::size_t>(feature_dim));
  for (auto& v : r.features.flat()) v = static_cast<float>(rng.normal());
  r.labels.y.assign(static_cast<std::size_t>(num_classes), -1);
  for (int c = 0; c < num_classes; ++c) {
    if (rng.uniform() < 0.5) r.labels.y[static_cast<std::size_t>(c)] = 1;
  }
  if (r.labels.positives().empty()) r.labels.y[rng.below(static_cast<std::uint64_t>(num_classes))] = 1;
  for (int c : r.labels.positives()) r.saliency.push_back(random_map(c, w, h, rng));
  return r;
}

// Two touching 2x2-cell objects of classes 0 and 1 on a 6x4 lattice of 4-pixel
// cells. Each class map is 1 on its own object and 0.6 on the other, so both
// objects clear a 0.5 threshold together.
inline ImageRecord touching_objects() {
  ImageRecord r;
  r.id = "touching";
  r.grid = tiled_grid(6, 4, 4);
  const std::vector<SuperpixelId> a{7, 8, 13, 14};
  const std::vector<SuperpixelId> b{9, 10, 15, 16};
  std::vector<SuperpixelId> both = a;
  both.insert(both.end(), b.begin(), b.end());
  r.proposals.push_back(make_proposal(r.grid, both));
  r.proposals.push_back(make_proposal(r.grid, a));
  r.proposals.push_back(make_proposal(r.grid, b));
  r.proposals.push_back(make_proposal(r.grid, {0, 1}));
  r.proposals.push_back(make_proposal(r.grid, {22, 23}));
  r.proposals.push_back(make_proposal(r.grid, {7, 13}));
  r.features = Matrix<float>(r.proposals.size(), 4, 0.0f);
  r.labels.y = {1, 1};
  std::vector<float> m0(24, 0.0f);
  std::vector<float> m1(24, 0.0f);
  for (auto id : a) {
    m0[id] = 1.0f;
    m1[id] = 0.6f;
  }
  for (auto id : b) {
    m0[id] = 0.6f;
    m1[id] = 1.0f;
  }
  r.saliency.push_back(cell_map(0, r.grid, m0));
  r.saliency.push_back(cell_map(1, r.grid, m1));
  r.gt_boxes = {{0, Box{4, 4, 12, 12}}, {1, Box{12, 4, 20, 12}}};
  return r;
}

}  // namespace fixture
