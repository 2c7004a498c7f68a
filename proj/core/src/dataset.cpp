#include "sgwsod/dataset.hpp"

#include <algorithm>
#include <climits>
#include <cmath>
#include <string>

#include "sgwsod/errors.hpp"

namespace sgwsod {

SuperpixelGrid::SuperpixelGrid(int width, int height, std::vector<SuperpixelId> labels)
    : width_(width), height_(height), labels_(std::move(labels)) {
  if (width <= 0 || height <= 0) {
    throw ValidationError("superpixel grid: width and height must be positive");
  }
  if (labels_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
    throw ValidationError("superpixel grid: expected " + std::to_string(width * height) +
                          " labels, got " + std::to_string(labels_.size()));
  }
  const SuperpixelId max_id = *std::max_element(labels_.begin(), labels_.end());
  count_ = static_cast<std::size_t>(max_id) + 1;
  sizes_.assign(count_, 0);
  for (SuperpixelId id : labels_) ++sizes_[id];
  for (std::size_t i = 0; i < count_; ++i) {
    if (sizes_[i] == 0) {
      throw ValidationError("superpixel grid: id " + std::to_string(i) +
                            " missing; ids must cover [0, N_S)");
    }
  }
}

Adjacency adjacency(const SuperpixelGrid& grid) {
  Adjacency nbrs(grid.superpixel_count());
  auto link = [&](SuperpixelId a, SuperpixelId b) {
    if (a == b) return;
    nbrs[a].push_back(b);
    nbrs[b].push_back(a);
  };
  for (int y = 0; y < grid.height(); ++y) {
    for (int x = 0; x < grid.width(); ++x) {
      const SuperpixelId here = grid.at(x, y);
      if (x + 1 < grid.width()) link(here, grid.at(x + 1, y));
      if (y + 1 < grid.height()) link(here, grid.at(x, y + 1));
    }
  }
  for (auto& list : nbrs) {
    std::sort(list.begin(), list.end());
    list.erase(std::unique(list.begin(), list.end()), list.end());
  }
  return nbrs;
}

Proposal make_proposal(const SuperpixelGrid& grid, std::vector<SuperpixelId> ids) {
  if (ids.empty()) throw ValidationError("proposal: empty superpixel set");
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  if (ids.back() >= grid.superpixel_count()) {
    throw ValidationError("proposal: superpixel id " + std::to_string(ids.back()) +
                          " out of range");
  }
  std::vector<char> member(grid.superpixel_count(), 0);
  for (SuperpixelId id : ids) member[id] = 1;

  Proposal p;
  p.superpixel_ids = std::move(ids);
  int x0 = INT_MAX, y0 = INT_MAX, x1 = -1, y1 = -1;
  for (int y = 0; y < grid.height(); ++y) {
    for (int x = 0; x < grid.width(); ++x) {
      if (!member[grid.at(x, y)]) continue;
      ++p.area_px;
      x0 = std::min(x0, x);
      y0 = std::min(y0, y);
      x1 = std::max(x1, x + 1);
      y1 = std::max(y1, y + 1);
    }
  }
  p.bbox = Box{x0, y0, x1, y1};
  return p;
}

std::vector<int> LabelVector::positives() const {
  std::vector<int> out;
  for (std::size_t c = 0; c < y.size(); ++c) {
    if (y[c] > 0) out.push_back(static_cast<int>(c));
  }
  return out;
}

const SaliencyMap* ImageRecord::saliency_for(int c) const {
  for (const auto& m : saliency) {
    if (m.class_id == c) return &m;
  }
  return nullptr;
}

namespace {

[[noreturn]] void fail(const ImageRecord& r, const std::string& field, const std::string& what) {
  throw ValidationError("record '" + r.id + "', field '" + field + "': " + what);
}

}  // namespace

void validate_record(const ImageRecord& r, int num_classes, int feature_dim) {
  if (r.grid.pixel_count() == 0) fail(r, "grid", "empty superpixel grid");
  if (r.proposals.empty()) fail(r, "proposals", "need at least one proposal");

  for (std::size_t i = 0; i < r.proposals.size(); ++i) {
    const Proposal& p = r.proposals[i];
    const std::string field = "proposals[" + std::to_string(i) + "]";
    if (p.superpixel_ids.empty()) fail(r, field, "empty superpixel set");
    for (SuperpixelId id : p.superpixel_ids) {
      if (id >= r.grid.superpixel_count()) fail(r, field, "superpixel id out of range");
    }
    if (!std::is_sorted(p.superpixel_ids.begin(), p.superpixel_ids.end()) ||
        std::adjacent_find(p.superpixel_ids.begin(), p.superpixel_ids.end()) !=
            p.superpixel_ids.end()) {
      fail(r, field, "superpixel ids must be sorted and unique");
    }
  }

  if (r.features.rows() != r.proposals.size()) {
    fail(r, "features",
         "dimension mismatch: " + std::to_string(r.features.rows()) + " rows for " +
             std::to_string(r.proposals.size()) + " proposals");
  }
  if (r.features.cols() != static_cast<std::size_t>(feature_dim)) {
    fail(r, "features",
         "dimension mismatch: " + std::to_string(r.features.cols()) + " columns, expected " +
             std::to_string(feature_dim));
  }
  for (float v : r.features.flat()) {
    if (!std::isfinite(v)) fail(r, "features", "non-finite value");
  }

  if (r.labels.num_classes() != static_cast<std::size_t>(num_classes)) {
    fail(r, "labels", "expected " + std::to_string(num_classes) + " entries");
  }
  for (auto v : r.labels.y) {
    if (v != 1 && v != -1) fail(r, "labels", "entries must be +1 or -1");
  }
  if (r.labels.positives().empty()) fail(r, "labels", "label vector without positives");

  int prev_class = -1;
  for (const auto& m : r.saliency) {
    const std::string field = "saliency[" + std::to_string(m.class_id) + "]";
    if (m.class_id < 0 || m.class_id >= num_classes) fail(r, field, "class id out of range");
    if (m.class_id <= prev_class) fail(r, field, "maps must be in ascending class order");
    prev_class = m.class_id;
    if (!r.labels.positive(m.class_id)) fail(r, field, "map for a non-positive class");
    if (m.width != r.grid.width() || m.height != r.grid.height() ||
        m.values.size() != r.grid.pixel_count()) {
      fail(r, field, "dimension mismatch with superpixel grid");
    }
    for (float v : m.values) {
      if (!std::isfinite(v)) fail(r, field, "non-finite value");
      if (v < 0.0f) fail(r, field, "negative saliency value");
    }
  }
  if (!r.saliency.empty() && r.saliency.size() != r.labels.positives().size()) {
    fail(r, "saliency", "maps must exist exactly for the positive classes");
  }

  for (std::size_t k = 0; k < r.gt_boxes.size(); ++k) {
    const auto& g = r.gt_boxes[k];
    const std::string field = "gt_boxes[" + std::to_string(k) + "]";
    if (g.class_id < 0 || g.class_id >= num_classes) fail(r, field, "class id out of range");
    if (!g.box.valid()) fail(r, field, "invalid box");
  }
}

}  // namespace sgwsod
