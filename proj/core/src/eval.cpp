#include "sgwsod/eval.hpp"

#include <algorithm>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "sgwsod/errors.hpp"
#include "sgwsod/log.hpp"

namespace sgwsod {

ScoredDataset score_dataset(const ModelParams& params, const std::vector<ImageRecord>& records) {
  ScoredDataset out;
  const auto classes = static_cast<std::size_t>(params.config.num_classes);
  for (std::size_t k = 0; k < records.size(); ++k) {
    const ImageRecord& r = records[k];
    const ForwardTrace t = forward(params, to_double(r.features));
    for (std::size_t c = 0; c < classes; ++c) {
      for (std::size_t i = 0; i < r.proposals.size(); ++i) {
        out.detections.push_back({static_cast<int>(k), static_cast<int>(c), static_cast<int>(i),
                                  r.proposals[i].bbox, t.scores(c, i)});
      }
    }
    out.image_scores.push_back(t.image_scores);
  }
  return out;
}

std::vector<Detection> nms(std::vector<Detection> dets, double iou_threshold) {
  if (!(iou_threshold > 0.0 && iou_threshold < 1.0)) throw ValidationError("nms threshold must be in (0, 1)");
  std::sort(dets.begin(), dets.end(), [](const Detection& a, const Detection& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.proposal_index < b.proposal_index;
  });
  std::vector<Detection> kept;
  for (const auto& d : dets) {
    const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](const Detection& k) {
      return iou(k.bbox, d.bbox) >= iou_threshold;
    });
    if (!suppressed) kept.push_back(d);
  }
  return kept;
}

std::vector<Detection> nms_all(const std::vector<Detection>& dets, double iou_threshold) {
  std::map<std::pair<int, int>, std::vector<Detection>> groups;
  for (const auto& d : dets) groups[{d.image_index, d.class_id}].push_back(d);
  std::vector<Detection> out;
  for (auto& [key, group] : groups) {
    auto kept = nms(std::move(group), iou_threshold);
    out.insert(out.end(), kept.begin(), kept.end());
  }
  return out;
}

double average_precision(const std::vector<bool>& hits, std::size_t num_positives, bool eleven_point) {
  if (num_positives == 0) return 0.0;
  std::vector<double> precision;
  std::vector<double> recall;
  std::size_t tp = 0;
  for (std::size_t k = 0; k < hits.size(); ++k) {
    if (hits[k]) ++tp;
    precision.push_back(static_cast<double>(tp) / static_cast<double>(k + 1));
    recall.push_back(static_cast<double>(tp) / static_cast<double>(num_positives));
  }

  if (eleven_point) {
    double ap = 0.0;
    for (int j = 0; j <= 10; ++j) {
      const double t = j / 10.0;
      double best = 0.0;
      for (std::size_t k = 0; k < recall.size(); ++k) {
        if (recall[k] >= t) best = std::max(best, precision[k]);
      }
      ap += best / 11.0;
    }
    return ap;
  }

  // Continuous: envelope the precision from the right, integrate over recall steps.
  std::vector<double> mrec{0.0};
  std::vector<double> mpre{0.0};
  mrec.insert(mrec.end(), recall.begin(), recall.end());
  mpre.insert(mpre.end(), precision.begin(), precision.end());
  mrec.push_back(1.0);
  mpre.push_back(0.0);
  for (std::size_t k = mpre.size() - 1; k-- > 0;) mpre[k] = std::max(mpre[k], mpre[k + 1]);
  double ap = 0.0;
  for (std::size_t k = 1; k < mrec.size(); ++k) {
    if (mrec[k] != mrec[k - 1]) ap += (mrec[k] - mrec[k - 1]) * mpre[k];
  }
  return ap;
}

namespace {

// Ranked order shared by all detection metrics: score descending, then image,
// then proposal index.
bool ranked_before(const Detection& a, const Detection& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.image_index != b.image_index) return a.image_index < b.image_index;
  return a.proposal_index < b.proposal_index;
}

}  // namespace

std::vector<std::optional<double>> detection_ap(const std::vector<Detection>& dets,
                                                const std::vector<ImageRecord>& records, int num_classes,
                                                double iou_threshold, bool eleven_point) {
  std::vector<std::optional<double>> out(static_cast<std::size_t>(num_classes));
  for (int c = 0; c < num_classes; ++c) {
    std::size_t num_gt = 0;
    std::vector<std::vector<Box>> gt(records.size());
    for (std::size_t k = 0; k < records.size(); ++k) {
      for (const auto& g : records[k].gt_boxes) {
        if (g.class_id == c) gt[k].push_back(g.box);
      }
      num_gt += gt[k].size();
    }
    if (num_gt == 0) {
      log::info("class ", c, " has no ground truth; detection AP excluded from the mean");
      continue;
    }

    std::vector<Detection> ranked;
    for (const auto& d : dets) {
      if (d.class_id == c) ranked.push_back(d);
    }
    std::sort(ranked.begin(), ranked.end(), ranked_before);

    std::vector<std::vector<char>> used(records.size());
    for (std::size_t k = 0; k < records.size(); ++k) used[k].assign(gt[k].size(), 0);
    std::vector<bool> hits;
    hits.reserve(ranked.size());
    for (const auto& d : ranked) {
      const auto k = static_cast<std::size_t>(d.image_index);
      if (k >= records.size()) throw ValidationError("detection refers to an unknown image");
      double best = -1.0;
      std::size_t best_g = 0;
      for (std::size_t g = 0; g < gt[k].size(); ++g) {
        const double o = iou(d.bbox, gt[k][g]);
        if (o > best) {
          best = o;
          best_g = g;
        }
      }
      if (best >= iou_threshold && !used[k][best_g]) {
        used[k][best_g] = 1;
        hits.push_back(true);
      } else {
        hits.push_back(false);
      }
    }
    out[static_cast<std::size_t>(c)] = average_precision(hits, num_gt, eleven_point);
  }
  return out;
}

std::vector<std::optional<double>> corloc(const std::vector<Detection>& dets,
                                          const std::vector<ImageRecord>& records, int num_classes) {
  const auto classes = static_cast<std::size_t>(num_classes);
  // top[k][c]: best detection of class c in image k.
  std::vector<std::vector<const Detection*>> top(records.size(), std::vector<const Detection*>(classes));
  for (const auto& d : dets) {
    const auto k = static_cast<std::size_t>(d.image_index);
    const auto c = static_cast<std::size_t>(d.class_id);
    if (k >= records.size() || c >= classes) throw ValidationError("detection out of range");
    if (top[k][c] == nullptr || ranked_before(d, *top[k][c])) top[k][c] = &d;
  }

  std::vector<std::optional<double>> out(classes);
  for (std::size_t c = 0; c < classes; ++c) {
    std::size_t positives = 0;
    std::size_t hits = 0;
    for (std::size_t k = 0; k < records.size(); ++k) {
      if (!records[k].labels.positive(static_cast<int>(c))) continue;
      ++positives;
      const Detection* d = top[k][c];
      if (d == nullptr) continue;
      for (const auto& g : records[k].gt_boxes) {
        if (g.class_id == static_cast<int>(c) && iou(d->bbox, g.box) >= kMatchIou) {
          ++hits;
          break;
        }
      }
    }
    if (positives == 0) {
      log::info("class ", c, " has no positive image; CorLoc excluded from the mean");
      continue;
    }
    out[c] = static_cast<double>(hits) / static_cast<double>(positives);
  }
  return out;
}

std::vector<std::optional<double>> classification_ap(const std::vector<std::vector<double>>& image_scores,
                                                     const std::vector<LabelVector>& labels, int num_classes,
                                                     bool eleven_point) {
  if (image_scores.size() != labels.size()) {
    throw ValidationError("classification_ap: scores and labels differ in length");
  }
  std::vector<std::optional<double>> out(static_cast<std::size_t>(num_classes));
  for (std::size_t c = 0; c < out.size(); ++c) {
    std::vector<std::size_t> order(labels.size());
    std::size_t positives = 0;
    for (std::size_t k = 0; k < labels.size(); ++k) {
      order[k] = k;
      if (labels[k].positive(static_cast<int>(c))) ++positives;
    }
    if (positives == 0) continue;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return image_scores[a][c] > image_scores[b][c];
    });
    std::vector<bool> hits;
    for (std::size_t k : order) hits.push_back(labels[k].positive(static_cast<int>(c)));
    out[c] = average_precision(hits, positives, eleven_point);
  }
  return out;
}

std::optional<double> mean_defined(const std::vector<std::optional<double>>& values) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& v : values) {
    if (v) {
      sum += *v;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

EvalReport evaluate(const ModelParams& params, const std::vector<ImageRecord>& test,
                    const std::vector<ImageRecord>& trainval, const std::vector<std::string>& class_names,
                    const EvalOptions& options) {
  const int classes = params.config.num_classes;
  EvalReport rep;
  rep.class_names = class_names;
  rep.num_images = test.size();
  rep.num_corloc_images = trainval.size();
  for (const auto& r : test) rep.num_gt_boxes += r.gt_boxes.size();

  const ScoredDataset scored = score_dataset(params, test);
  const auto kept = nms_all(scored.detections, options.nms_threshold);
  rep.detection_ap = detection_ap(kept, test, classes, kMatchIou, options.eleven_point);
  rep.mean_ap = mean_defined(rep.detection_ap);

  std::vector<LabelVector> labels;
  for (const auto& r : test) labels.push_back(r.labels);
  rep.classification_ap = classification_ap(scored.image_scores, labels, classes, options.eleven_point);
  rep.mean_classification_ap = mean_defined(rep.classification_ap);

  const ScoredDataset scored_tv = score_dataset(params, trainval);
  rep.corloc = corloc(scored_tv.detections, trainval, classes);
  rep.mean_corloc = mean_defined(rep.corloc);
  return rep;
}

namespace {

nlohmann::ordered_json opt(const std::optional<double>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

nlohmann::ordered_json opt_list(const std::vector<std::optional<double>>& vs) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& v : vs) arr.push_back(opt(v));
  return arr;
}

std::string cell(const std::optional<double>& v) {
  if (!v) return "";
  std::ostringstream os;
  os.precision(4);
  os << std::fixed << *v * 100.0;
  return os.str();
}

}  // namespace

std::string report_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["version"] = 1;
  j["class_names"] = r.class_names;
  j["detection_ap"] = opt_list(r.detection_ap);
  j["mean_ap"] = opt(r.mean_ap);
  j["corloc"] = opt_list(r.corloc);
  j["mean_corloc"] = opt(r.mean_corloc);
  j["classification_ap"] = opt_list(r.classification_ap);
  j["mean_classification_ap"] = opt(r.mean_classification_ap);
  j["num_images"] = r.num_images;
  j["num_gt_boxes"] = r.num_gt_boxes;
  j["num_corloc_images"] = r.num_corloc_images;
  return j.dump(2);
}

std::string report_csv(const EvalReport& r) {
  std::ostringstream os;
  os << "metric";
  for (const auto& n : r.class_names) os << ',' << n;
  os << ",mean\n";
  auto row = [&](const char* name, const std::vector<std::optional<double>>& vs, const std::optional<double>& m) {
    os << name;
    for (const auto& v : vs) os << ',' << cell(v);
    os << ',' << cell(m) << '\n';
  };
  row("detection_ap", r.detection_ap, r.mean_ap);
  row("corloc", r.corloc, r.mean_corloc);
  row("classification_ap", r.classification_ap, r.mean_classification_ap);
  return os.str();
}

}  // namespace sgwsod
