#pragma once

#include <vector>

#include "sgwsod/dataset.hpp"

namespace sgwsod {

inline constexpr double kDefaultSigma = 1e3;
inline constexpr double kDefaultThreshold = 0.5;
// Upper bound on area / sigma^2 before exponentiation.
inline constexpr double kMaxAreaExponent = 64.0;

struct SeedScore {
  int proposal_index = 0;
  int class_id = 0;
  double rs = 0.0;        // mean saliency inside the proposal
  double ns = 0.0;        // mean saliency over adjacent superpixels
  double contrast = 0.0;  // exp(area / sigma^2) * (rs - ns)
};

struct ClassSeed {
  int class_id = 0;
  int seed_index = 0;
  SeedScore score;
};

// Seeds, mined negatives and the saliency targets aligned with them.
// sample_indices lists every seed (class order) then every negative;
// targets holds 1.0 for seeds and 0.0 for negatives.
struct SeedAssignment {
  std::vector<ClassSeed> seeds;
  std::vector<int> negatives;
  std::vector<int> sample_indices;
  std::vector<double> targets;

  friend bool operator==(const SeedAssignment& a, const SeedAssignment& b) {
    if (a.negatives != b.negatives || a.sample_indices != b.sample_indices || a.targets != b.targets ||
        a.seeds.size() != b.seeds.size()) {
      return false;
    }
    for (std::size_t k = 0; k < a.seeds.size(); ++k) {
      if (a.seeds[k].class_id != b.seeds[k].class_id || a.seeds[k].seed_index != b.seeds[k].seed_index) {
        return false;
      }
    }
    return true;
  }
};

// Per-superpixel sums of one saliency map; all region statistics reduce to
// sums over these.
class SuperpixelSaliency {
 public:
  SuperpixelSaliency(const SuperpixelGrid& grid, const SaliencyMap& map);
  double sum(SuperpixelId id) const { return sums_[id]; }

 private:
  std::vector<double> sums_;
};

double region_saliency(const SuperpixelGrid& grid, const Proposal& proposal, const SaliencyMap& map);
double neighborhood_saliency(const SuperpixelGrid& grid, const Proposal& proposal,
                             const SaliencyMap& map, const Adjacency& adj);
double saliency_contrast(double rs, double ns, std::int64_t area_px, double sigma);

// Scores every proposal of the record for class c. Requires a saliency map for c.
std::vector<SeedScore> score_proposals(const ImageRecord& record, int class_id, double sigma);

// One seed per positive class: argmax of the contrast, lowest index on ties.
// Throws ValidationError if a positive class has no saliency map.
SeedAssignment select_seeds(const ImageRecord& record, double sigma = kDefaultSigma);

// Fills negatives, sample_indices and targets. For each positive class in
// ascending order takes the unused proposal with the lowest region saliency.
void select_negatives(const ImageRecord& record, SeedAssignment& assignment);

// select_seeds followed by select_negatives.
SeedAssignment assign_seeds(const ImageRecord& record, double sigma = kDefaultSigma);

// Comparator: binarize at theta * max(map), 4-connected components, one
// enclosing box per component in raster order of first pixel.
std::vector<Box> threshold_baseline(const SaliencyMap& map, double theta = kDefaultThreshold);

}  // namespace sgwsod
