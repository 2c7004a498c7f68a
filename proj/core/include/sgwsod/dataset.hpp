#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sgwsod/geometry.hpp"
#include "sgwsod/matrix.hpp"

namespace sgwsod {

using SuperpixelId = std::uint32_t;

// Row-major grid of superpixel ids. Every id in [0, count) occurs at least once.
class SuperpixelGrid {
 public:
  SuperpixelGrid() = default;
  // Throws ValidationError if the labels are not a dense id range.
  SuperpixelGrid(int width, int height, std::vector<SuperpixelId> labels);

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t pixel_count() const { return labels_.size(); }
  std::size_t superpixel_count() const { return count_; }
  SuperpixelId at(int x, int y) const { return labels_[static_cast<std::size_t>(y) * width_ + x]; }
  std::span<const SuperpixelId> labels() const { return labels_; }

  // Pixel count of each superpixel.
  const std::vector<std::int64_t>& sizes() const { return sizes_; }

  friend bool operator==(const SuperpixelGrid& a, const SuperpixelGrid& b) {
    return a.width_ == b.width_ && a.height_ == b.height_ && a.labels_ == b.labels_;
  }

 private:
  int width_ = 0;
  int height_ = 0;
  std::size_t count_ = 0;
  std::vector<SuperpixelId> labels_;
  std::vector<std::int64_t> sizes_;
};

// neighbors[i] is the sorted list of superpixels sharing a 4-connected pixel
// edge with superpixel i. Symmetric, irreflexive.
using Adjacency = std::vector<std::vector<SuperpixelId>>;
Adjacency adjacency(const SuperpixelGrid& grid);

// A region proposal is a set of superpixels; bbox and area are derived.
struct Proposal {
  std::vector<SuperpixelId> superpixel_ids;  // sorted, unique, nonempty
  Box bbox;
  std::int64_t area_px = 0;

  friend bool operator==(const Proposal&, const Proposal&) = default;
};

// Builds a proposal from any id list (duplicates removed). Throws
// ValidationError on an empty list or out-of-range id.
Proposal make_proposal(const SuperpixelGrid& grid, std::vector<SuperpixelId> ids);

struct SaliencyMap {
  int class_id = 0;
  int width = 0;
  int height = 0;
  std::vector<float> values;  // row-major, finite, >= 0

  float at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
  friend bool operator==(const SaliencyMap&, const SaliencyMap&) = default;
};

// Entries are +1 (present) or -1 (absent).
struct LabelVector {
  std::vector<std::int8_t> y;

  std::size_t num_classes() const { return y.size(); }
  bool positive(int c) const { return y[static_cast<std::size_t>(c)] > 0; }
  std::vector<int> positives() const;

  friend bool operator==(const LabelVector&, const LabelVector&) = default;
};

struct GroundTruth {
  int class_id = 0;
  Box box;
  friend bool operator==(const GroundTruth&, const GroundTruth&) = default;
};

struct ImageRecord {
  std::string id;
  SuperpixelGrid grid;
  std::vector<Proposal> proposals;
  Matrix<float> features;  // one row per proposal
  LabelVector labels;
  std::vector<SaliencyMap> saliency;  // one per positive class, ascending class id
  std::vector<GroundTruth> gt_boxes;

  // Saliency map for class c, or nullptr.
  const SaliencyMap* saliency_for(int c) const;

  friend bool operator==(const ImageRecord&, const ImageRecord&) = default;
};

// Checks every ImageRecord invariant against the dataset dimensions.
// Throws ValidationError naming the record and field.
void validate_record(const ImageRecord& record, int num_classes, int feature_dim);

}  // namespace sgwsod
