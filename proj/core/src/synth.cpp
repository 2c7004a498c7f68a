#include "sgwsod/synth.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <numeric>
#include <set>

#include "sgwsod/errors.hpp"
#include "sgwsod/rng.hpp"

namespace sgwsod {
namespace {

// Rectangle on the cell lattice, half-open like Box.
struct CellRect {
  int cx0, cy0, cx1, cy1;
  int area() const { return (cx1 - cx0) * (cy1 - cy0); }
  bool overlaps(const CellRect& o) const {
    return cx0 < o.cx1 && o.cx0 < cx1 && cy0 < o.cy1 && o.cy0 < cy1;
  }
};

struct PlantedObject {
  int class_id;
  CellRect cells;
  CellRect core;
};

std::vector<SuperpixelId> cells_of(const CellRect& r, int k) {
  std::vector<SuperpixelId> ids;
  for (int y = r.cy0; y < r.cy1; ++y) {
    for (int x = r.cx0; x < r.cx1; ++x) ids.push_back(static_cast<SuperpixelId>(y * k + x));
  }
  return ids;
}

std::vector<PlantedObject> place_objects(const SynthConfig& cfg, Rng& rng) {
  const int k = cfg.cells_per_side;
  for (int attempt = 0; attempt < 1000; ++attempt) {
    const int count = rng.between(cfg.objects_min, cfg.objects_max);
    std::vector<int> classes(static_cast<std::size_t>(cfg.num_classes));
    std::iota(classes.begin(), classes.end(), 0);
    rng.shuffle(std::span<int>(classes));

    std::vector<PlantedObject> objects;
    bool ok = true;
    for (int n = 0; n < count && ok; ++n) {
      ok = false;
      for (int tries = 0; tries < 200; ++tries) {
        const int w = rng.between(cfg.object_cells_min, cfg.object_cells_max);
        const int h = rng.between(cfg.object_cells_min, cfg.object_cells_max);
        const int x = rng.between(0, k - w);
        const int y = rng.between(0, k - h);
        const CellRect r{x, y, x + w, y + h};
        const bool clash = std::any_of(objects.begin(), objects.end(),
                                       [&](const PlantedObject& o) { return o.cells.overlaps(r); });
        if (clash) continue;
        objects.push_back({classes[static_cast<std::size_t>(n)], r, r});
        ok = true;
        break;
      }
    }
    if (ok) return objects;
  }
  throw ValidationError("synth: could not place objects; config infeasible");
}

// Sub-rectangle covering at most ~45% of the object, so its box IoU with the
// object stays below 0.5.
CellRect random_part(const CellRect& o, Rng& rng) {
  const int w = o.cx1 - o.cx0;
  const int h = o.cy1 - o.cy0;
  for (;;) {
    const int pw = rng.between(1, w);
    const int ph = rng.between(1, h);
    if (pw * ph * 20 > w * h * 9) continue;
    const int x = rng.between(o.cx0, o.cx1 - pw);
    const int y = rng.between(o.cy0, o.cy1 - ph);
    return {x, y, x + pw, y + ph};
  }
}

CellRect grown(const CellRect& o, int k, Rng& rng) {
  for (;;) {
    CellRect g = o;
    if (rng.below(2) && g.cx0 > 0) --g.cx0;
    if (rng.below(2) && g.cy0 > 0) --g.cy0;
    if (rng.below(2) && g.cx1 < k) ++g.cx1;
    if (rng.below(2) && g.cy1 < k) ++g.cy1;
    if (g.area() > o.area()) return g;
    if (o.area() == k * k) return g;
  }
}

}  // namespace

void validate_synth_config(const SynthConfig& c) {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw ValidationError(std::string("synth config: ") + what);
  };
  require(c.grid_side >= 1, "grid_side must be positive");
  require(c.cells_per_side >= 1, "cells_per_side must be positive");
  require(c.grid_side % c.cells_per_side == 0, "cells_per_side must divide grid_side");
  require(c.num_images >= 1, "num_images must be positive");
  require(c.num_classes >= 1, "num_classes must be positive");
  require(c.feature_dim >= 1, "feature_dim must be positive");
  require(c.objects_min >= 1 && c.objects_max >= c.objects_min, "need 1 <= objects_min <= objects_max");
  require(c.objects_max <= c.num_classes, "objects_max exceeds num_classes (objects carry distinct classes)");
  require(c.object_cells_min >= 1 && c.object_cells_max >= c.object_cells_min,
          "need 1 <= object_cells_min <= object_cells_max");
  require(c.object_cells_max <= c.cells_per_side, "objects larger than the image");
  require(c.parts_per_object >= 0 && c.random_proposals >= 0, "proposal counts must be non-negative");
  require(c.saliency_noise >= 0.0 && c.saliency_noise < 1.0, "saliency_noise must be in [0, 1)");
  require(c.feature_snr > 0.0, "feature_snr must be positive");
  require(c.body_signal >= 0.0 && c.body_signal <= 1.0, "body_signal must be in [0, 1]");
  const long cells = static_cast<long>(c.cells_per_side) * c.cells_per_side;
  const long needed = static_cast<long>(c.objects_max) * c.object_cells_min * c.object_cells_min;
  require(needed <= cells, "infeasible: more object cells than superpixels");
}

Dataset generate_synthetic(const SynthConfig& cfg) {
  validate_synth_config(cfg);
  const int k = cfg.cells_per_side;
  const int cell = cfg.grid_side / k;
  const int side = cfg.grid_side;
  const auto dim = static_cast<std::size_t>(cfg.feature_dim);

  // Templates: one identity direction per class plus a shared extent direction.
  Rng template_rng(cfg.template_seed);
  Matrix<double> identity(static_cast<std::size_t>(cfg.num_classes), dim);
  for (auto& v : identity.flat()) v = template_rng.normal();
  std::vector<double> extent(dim);
  for (auto& v : extent) v = template_rng.normal();

  Dataset ds;
  ds.manifest.num_classes = cfg.num_classes;
  ds.manifest.feature_dim = cfg.feature_dim;
  ds.manifest.seed = cfg.seed;
  for (int c = 0; c < cfg.num_classes; ++c) ds.manifest.class_names.push_back("class_" + std::to_string(c));

  std::vector<SuperpixelId> labels(static_cast<std::size_t>(side) * side);
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      labels[static_cast<std::size_t>(y) * side + x] = static_cast<SuperpixelId>((y / cell) * k + x / cell);
    }
  }
  const SuperpixelGrid grid(side, side, labels);

  Rng rng(cfg.seed);
  for (int n = 0; n < cfg.num_images; ++n) {
    ImageRecord r;
    char stem[48];
    std::snprintf(stem, sizeof stem, "s%llu_%05d", static_cast<unsigned long long>(cfg.seed), n);
    r.id = stem;
    r.grid = grid;

    auto objects = place_objects(cfg, rng);
    std::vector<int> owner(grid.superpixel_count(), -1);
    std::vector<char> in_core(grid.superpixel_count(), 0);
    for (std::size_t o = 0; o < objects.size(); ++o) {
      objects[o].core = random_part(objects[o].cells, rng);
      for (SuperpixelId id : cells_of(objects[o].cells, k)) owner[id] = static_cast<int>(o);
      for (SuperpixelId id : cells_of(objects[o].core, k)) in_core[id] = 1;
    }

    r.labels.y.assign(static_cast<std::size_t>(cfg.num_classes), -1);
    for (const auto& o : objects) {
      r.labels.y[static_cast<std::size_t>(o.class_id)] = 1;
      r.gt_boxes.push_back({o.class_id, Box{o.cells.cx0 * cell, o.cells.cy0 * cell,
                                            o.cells.cx1 * cell, o.cells.cy1 * cell}});
    }

    for (int c : r.labels.positives()) {
      SaliencyMap m{c, side, side, std::vector<float>(grid.pixel_count())};
      for (std::size_t p = 0; p < m.values.size(); ++p) {
        const int o = owner[labels[p]];
        const double base = (o >= 0 && objects[static_cast<std::size_t>(o)].class_id == c) ? 1.0 : 0.0;
        const double noise = rng.uniform(-cfg.saliency_noise, cfg.saliency_noise);
        m.values[p] = static_cast<float>(std::max(0.0, base + noise));
      }
      r.saliency.push_back(std::move(m));
    }

    // Candidate superpixel sets; the planted objects come first so that
    // deduplication keeps them.
    std::vector<std::vector<SuperpixelId>> sets;
    for (const auto& o : objects) sets.push_back(cells_of(o.cells, k));
    for (const auto& o : objects) {
      for (int p = 0; p < cfg.parts_per_object; ++p) {
        sets.push_back(cells_of(p == 0 ? o.core : random_part(o.cells, rng), k));
      }
      sets.push_back(cells_of(grown(o.cells, k, rng), k));
    }
    for (std::size_t a = 0; a < objects.size(); ++a) {
      for (std::size_t b = a + 1; b < objects.size(); ++b) {
        auto u = cells_of(objects[a].cells, k);
        auto v = cells_of(objects[b].cells, k);
        u.insert(u.end(), v.begin(), v.end());
        sets.push_back(std::move(u));
      }
    }
    for (int q = 0; q < cfg.random_proposals; ++q) {
      if (q % 2 == 0) {
        const int w = rng.between(1, std::max(1, k / 2));
        const int h = rng.between(1, std::max(1, k / 2));
        const int x = rng.between(0, k - w);
        const int y = rng.between(0, k - h);
        sets.push_back(cells_of({x, y, x + w, y + h}, k));
      } else {
        const int count = rng.between(2, std::max(2, k / 2 + 2));
        std::vector<SuperpixelId> ids;
        for (int t = 0; t < count; ++t) {
          ids.push_back(static_cast<SuperpixelId>(rng.below(grid.superpixel_count())));
        }
        sets.push_back(std::move(ids));
      }
    }

    std::set<std::vector<SuperpixelId>> seen;
    std::vector<Proposal> proposals;
    for (auto& s : sets) {
      Proposal p = make_proposal(grid, std::move(s));
      if (seen.insert(p.superpixel_ids).second) proposals.push_back(std::move(p));
    }
    rng.shuffle(std::span<Proposal>(proposals));
    r.proposals = std::move(proposals);

    r.features = Matrix<float>(r.proposals.size(), dim);
    for (std::size_t i = 0; i < r.proposals.size(); ++i) {
      const Proposal& p = r.proposals[i];
      std::vector<std::int64_t> overlap(objects.size(), 0);
      std::vector<double> evidence(objects.size(), 0.0);
      for (SuperpixelId id : p.superpixel_ids) {
        if (owner[id] < 0) continue;
        const auto o = static_cast<std::size_t>(owner[id]);
        overlap[o] += grid.sizes()[id];
        evidence[o] += static_cast<double>(grid.sizes()[id]) * (in_core[id] ? 1.0 : cfg.body_signal);
      }
      int dominant = -1;
      for (std::size_t o = 0; o < objects.size(); ++o) {
        if (overlap[o] > 0 && (dominant < 0 || overlap[o] > overlap[static_cast<std::size_t>(dominant)])) {
          dominant = static_cast<int>(o);
        }
      }
      double strength = 0.0, coverage = 0.0;
      int cls = 0;
      if (dominant >= 0) {
        const auto& o = objects[static_cast<std::size_t>(dominant)];
        const double ov = static_cast<double>(overlap[static_cast<std::size_t>(dominant)]);
        strength = evidence[static_cast<std::size_t>(dominant)] / static_cast<double>(p.area_px);
        coverage = ov / static_cast<double>(o.cells.area() * cell * cell);
        cls = o.class_id;
      }
      for (std::size_t d = 0; d < dim; ++d) {
        const double signal = strength * identity(static_cast<std::size_t>(cls), d) + coverage * extent[d];
        r.features(i, d) = static_cast<float>(signal + rng.normal() / cfg.feature_snr);
      }
    }

    ds.manifest.images.push_back(r.id);
    ds.records.push_back(std::move(r));
  }
  return ds;
}

}  // namespace sgwsod
