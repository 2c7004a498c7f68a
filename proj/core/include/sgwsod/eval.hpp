#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sgwsod/dataset.hpp"
#include "sgwsod/model.hpp"

namespace sgwsod {

inline constexpr double kDefaultNmsThreshold = 0.4;
inline constexpr double kMatchIou = 0.5;

struct Detection {
  int image_index = 0;
  int class_id = 0;
  int proposal_index = 0;
  Box bbox;
  double score = 0.0;
};

struct ScoredDataset {
  std::vector<Detection> detections;            // one per (image, class, proposal)
  std::vector<std::vector<double>> image_scores;  // per image, length C
};

// Frozen-model scoring; labels and saliency maps are not read.
ScoredDataset score_dataset(const ModelParams& params, const std::vector<ImageRecord>& records);

// Greedy suppression within one (image, class) group. Order: score
// descending, then proposal index ascending. Suppresses IoU >= threshold.
std::vector<Detection> nms(std::vector<Detection> detections, double iou_threshold);

// Applies nms per (image, class) group; output grouped by image then class.
std::vector<Detection> nms_all(const std::vector<Detection>& detections, double iou_threshold);

// Area under the interpolated precision/recall curve. `hits` lists ranked
// items (best first) as true/false positives; num_positives counts all
// relevant items, including those never retrieved.
double average_precision(const std::vector<bool>& hits, std::size_t num_positives, bool eleven_point = false);

// Per-class AP at the given IoU; nullopt for classes without ground truth.
std::vector<std::optional<double>> detection_ap(const std::vector<Detection>& detections,
                                                const std::vector<ImageRecord>& records, int num_classes,
                                                double iou_threshold = kMatchIou, bool eleven_point = false);

// Fraction of positive images whose top-scoring box for the class hits a GT
// box of that class at IoU >= 0.5; nullopt for classes with no positive image.
std::vector<std::optional<double>> corloc(const std::vector<Detection>& detections,
                                          const std::vector<ImageRecord>& records, int num_classes);

// Images ranked by image score per class.
std::vector<std::optional<double>> classification_ap(const std::vector<std::vector<double>>& image_scores,
                                                     const std::vector<LabelVector>& labels, int num_classes,
                                                     bool eleven_point = false);

// Unweighted mean over defined entries; nullopt if none.
std::optional<double> mean_defined(const std::vector<std::optional<double>>& values);

struct EvalOptions {
  double nms_threshold = kDefaultNmsThreshold;
  bool eleven_point = false;
};

struct EvalReport {
  std::vector<std::string> class_names;
  std::vector<std::optional<double>> detection_ap;
  std::optional<double> mean_ap;
  std::vector<std::optional<double>> corloc;
  std::optional<double> mean_corloc;
  std::vector<std::optional<double>> classification_ap;
  std::optional<double> mean_classification_ap;
  std::size_t num_images = 0;
  std::size_t num_gt_boxes = 0;
  std::size_t num_corloc_images = 0;
};

// Detection and classification AP on `test`; CorLoc on `trainval`.
EvalReport evaluate(const ModelParams& params, const std::vector<ImageRecord>& test,
                    const std::vector<ImageRecord>& trainval, const std::vector<std::string>& class_names,
                    const EvalOptions& options = {});

std::string report_json(const EvalReport& report);
std::string report_csv(const EvalReport& report);

}  // namespace sgwsod
