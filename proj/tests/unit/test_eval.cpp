#include <doctest.h>

#include <cmath>

#include <nlohmann/json.hpp>

#include "oracles.hpp"
#include "sgwsod/eval.hpp"
#include "sgwsod/rng.hpp"
#include "sgwsod/synth.hpp"

using namespace sgwsod;

namespace {

Detection det(int image, int cls, int index, Box b, double score) { return Detection{image, cls, index, b, score}; }

ImageRecord gt_record(std::vector<GroundTruth> gt, std::vector<std::int8_t> labels) {
  ImageRecord r;
  r.gt_boxes = std::move(gt);
  r.labels.y = std::move(labels);
  return r;
}

Box random_box(Rng& rng, int extent = 30) {
  const int x0 = rng.between(0, extent);
  const int y0 = rng.between(0, extent);
  return Box{x0, y0, x0 + rng.between(1, 15), y0 + rng.between(1, 15)};
}

// Three ground-truth boxes; five detections ranked TP, duplicate, TP, miss, TP.
struct ApFixture {
  std::vector<ImageRecord> records;
  std::vector<Detection> detections;
};

ApFixture three_gt_five_detections() {
  ApFixture f;
  f.records.push_back(gt_record({{0, Box{0, 0, 10, 10}}, {0, Box{20, 0, 30, 10}}}, {1}));
  f.records.push_back(gt_record({{0, Box{0, 0, 8, 8}}}, {1}));
  f.detections = {
      det(0, 0, 0, Box{0, 0, 10, 10}, 0.9),    // TP
      det(0, 0, 1, Box{1, 0, 10, 10}, 0.8),    // duplicate of the first GT
      det(1, 0, 0, Box{0, 0, 8, 9}, 0.7),      // TP, IoU 64/72
      det(1, 0, 1, Box{40, 40, 50, 50}, 0.6),  // no overlap
      det(0, 0, 2, Box{21, 0, 30, 10}, 0.5),   // TP, IoU 0.9
  };
  return f;
}

}  // namespace

TEST_SUITE("eval") {
  TEST_CASE("nms examples") {
    const Box b{0, 0, 10, 10};
    CHECK(nms({det(0, 0, 3, b, 0.2)}, 0.4).size() == 1);
    const auto kept = nms({det(0, 0, 1, b, 0.8), det(0, 0, 0, b, 0.9)}, 0.4);
    REQUIRE(kept.size() == 1);
    CHECK(kept[0].score == 0.9);
    // IoU exactly at the threshold suppresses.
    const auto half = nms({det(0, 0, 0, Box{0, 0, 10, 10}, 0.9), det(0, 0, 1, Box{0, 0, 10, 5}, 0.8)}, 0.5);
    CHECK(half.size() == 1);
    // Score ties go to the lower proposal index.
    const auto tie = nms({det(0, 0, 4, b, 0.5), det(0, 0, 2, b, 0.5)}, 0.4);
    CHECK(tie[0].proposal_index == 2);
  }

  TEST_CASE("nms matches the repeated-argmax reference and ignores input order") {
    Rng rng(10);
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<Detection> dets;
      for (int i = 0; i < 20; ++i) dets.push_back(det(0, 0, i, random_box(rng), std::round(rng.uniform() * 8) / 8));
      const double t = rng.uniform(0.1, 0.9);
      const auto kept = nms(dets, t);
      const auto expected = oracle::nms(dets, t);
      REQUIRE(kept.size() == expected.size());
      for (std::size_t k = 0; k < kept.size(); ++k) CHECK(kept[k].proposal_index == expected[k].proposal_index);
      rng.shuffle(std::span<Detection>(dets));
      const auto again = nms(dets, t);
      REQUIRE(again.size() == kept.size());
      for (std::size_t k = 0; k < kept.size(); ++k) CHECK(again[k].proposal_index == kept[k].proposal_index);
    }
  }

  TEST_CASE("nms_all keeps groups apart") {
    const Box b{0, 0, 10, 10};
    const auto out = nms_all({det(1, 0, 0, b, 0.5), det(0, 1, 0, b, 0.9), det(0, 0, 0, b, 0.7), det(0, 0, 1, b, 0.6)}, 0.4);
    REQUIRE(out.size() == 3);
    CHECK(out[0].image_index == 0);
    CHECK(out[0].class_id == 0);
    CHECK(out[1].class_id == 1);
    CHECK(out[2].image_index == 1);
  }

  TEST_CASE("average precision examples") {
    CHECK(average_precision({true}, 1) == 1.0);
    CHECK(average_precision({false, false}, 2) == 0.0);
    CHECK(average_precision({}, 3) == 0.0);
    CHECK(average_precision({false, true}, 1) == 0.5);
    CHECK(average_precision({true, false}, 2) == 0.5);  // one positive never retrieved
  }

  TEST_CASE("detection AP: perfect, disjoint and hand fixture") {
    const auto one = std::vector<ImageRecord>{gt_record({{0, Box{2, 2, 6, 6}}}, {1})};
    CHECK(detection_ap({det(0, 0, 0, Box{2, 2, 6, 6}, 0.3)}, one, 1)[0] == 1.0);
    CHECK(detection_ap({det(0, 0, 0, Box{20, 20, 30, 30}, 0.3)}, one, 1)[0] == 0.0);

    const ApFixture f = three_gt_five_detections();
    // Precision at each TP: 1, 2/3, 3/5; the 2/3 already dominates later cutoffs.
    const double expected = (1.0 + 2.0 / 3.0 + 3.0 / 5.0) / 3.0;
    CHECK(std::abs(*detection_ap(f.detections, f.records, 1)[0] - expected) < 1e-9);
    CHECK(std::abs(*detection_ap(f.detections, f.records, 1, kMatchIou, true)[0] - 8.4 / 11.0) < 1e-9);
  }

  TEST_CASE("classes without ground truth are undefined and skipped in the mean") {
    const auto recs = std::vector<ImageRecord>{gt_record({{1, Box{0, 0, 4, 4}}}, {-1, 1})};
    const auto ap = detection_ap({det(0, 1, 0, Box{0, 0, 4, 4}, 0.5)}, recs, 2);
    CHECK_FALSE(ap[0].has_value());
    CHECK(ap[1] == 1.0);
    CHECK(mean_defined(ap) == 1.0);
    CHECK_FALSE(mean_defined({std::nullopt}).has_value());
  }

  TEST_CASE("detection AP matches hit enumeration on random instances") {
    Rng rng(20);
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<ImageRecord> recs;
      std::vector<Detection> dets;
      std::size_t num_gt = 0;
      for (int k = 0; k < 4; ++k) {
        std::vector<GroundTruth> gt;
        const int count = rng.between(0, 3);
        for (int g = 0; g < count; ++g) gt.push_back({0, random_box(rng, 20)});
        num_gt += gt.size();
        recs.push_back(gt_record(gt, {static_cast<std::int8_t>(count > 0 ? 1 : -1)}));
        for (int i = 0; i < 6; ++i) dets.push_back(det(k, 0, i, random_box(rng, 20), rng.uniform()));
      }
      if (num_gt == 0) continue;
      // Reference matching over the ranked list.
      auto ranked = dets;
      std::sort(ranked.begin(), ranked.end(), [](auto& a, auto& b) { return a.score > b.score; });
      std::vector<std::vector<bool>> used(4);
      for (int k = 0; k < 4; ++k) used[static_cast<std::size_t>(k)].assign(recs[static_cast<std::size_t>(k)].gt_boxes.size(), false);
      std::vector<bool> hits;
      for (const auto& d : ranked) {
        const auto& gts = recs[static_cast<std::size_t>(d.image_index)].gt_boxes;
        int best = -1;
        double best_iou = 0.0;
        for (std::size_t g = 0; g < gts.size(); ++g) {
          const double o = oracle::box_iou(d.bbox, gts[g].box);
          if (best < 0 || o > best_iou) {
            best = static_cast<int>(g);
            best_iou = o;
          }
        }
        auto& u = used[static_cast<std::size_t>(d.image_index)];
        const bool hit = best >= 0 && best_iou >= 0.5 && !u[static_cast<std::size_t>(best)];
        if (hit) u[static_cast<std::size_t>(best)] = true;
        hits.push_back(hit);
      }
      const double ap = *detection_ap(dets, recs, 1)[0];
      CHECK(std::abs(ap - oracle::average_precision(hits, num_gt)) < 1e-9);
      CHECK(std::abs(*detection_ap(dets, recs, 1, kMatchIou, true)[0] - oracle::average_precision_11(hits, num_gt)) <
            1e-9);
      // Rank statistic: a strictly increasing transform changes nothing.
      auto squashed = dets;
      for (auto& d : squashed) d.score = std::exp(3.0 * d.score) - 7.0;
      CHECK(*detection_ap(squashed, recs, 1)[0] == ap);
    }
  }

  TEST_CASE("CorLoc examples") {
    std::vector<ImageRecord> recs;
    std::vector<Detection> dets;
    // Ten positive images; the top box hits in images 0, 2, 3, 5, 8, 9.
    const std::vector<int> good{0, 2, 3, 5, 8, 9};
    for (int k = 0; k < 10; ++k) {
      recs.push_back(gt_record({{0, Box{0, 0, 10, 10}}}, {1, -1}));
      const bool hit = std::find(good.begin(), good.end(), k) != good.end();
      dets.push_back(det(k, 0, 0, hit ? Box{0, 0, 10, 9} : Box{0, 0, 10, 4}, 0.9));
      dets.push_back(det(k, 0, 1, hit ? Box{50, 50, 60, 60} : Box{0, 0, 10, 10}, 0.1));  // lower score, ignored
      dets.push_back(det(k, 1, 0, Box{0, 0, 10, 10}, 0.5));  // class 1 is negative everywhere
    }
    const auto c = corloc(dets, recs, 2);
    CHECK(std::abs(*c[0] - 0.6) < 1e-9);
    CHECK_FALSE(c[1].has_value());

    for (auto& d : dets) {
      if (d.class_id == 0 && d.proposal_index == 0) d.bbox = Box{0, 0, 10, 10};
    }
    CHECK(corloc(dets, recs, 2)[0] == 1.0);
    for (auto& d : dets) d.bbox = Box{30, 30, 40, 40};
    CHECK(corloc(dets, recs, 2)[0] == 0.0);
  }

  TEST_CASE("classification AP examples") {
    const std::vector<LabelVector> labels{{{1}}, {{1}}, {{-1}}, {{-1}}};
    CHECK(classification_ap({{0.9}, {0.8}, {0.2}, {0.1}}, labels, 1)[0] == 1.0);
    const std::vector<LabelVector> one{{{-1}}, {{-1}}, {{-1}}, {{-1}}, {{1}}};
    CHECK(std::abs(*classification_ap({{0.9}, {0.8}, {0.7}, {0.6}, {0.1}}, one, 1)[0] - 0.2) < 1e-12);
    CHECK_FALSE(classification_ap({{0.5}}, {{{-1}}}, 1)[0].has_value());
  }

  TEST_CASE("classification AP matches prefix enumeration on random fixtures") {
    Rng rng(30);
    for (int trial = 0; trial < 100; ++trial) {
      const int n = rng.between(1, 12);
      std::vector<std::vector<double>> scores;
      std::vector<LabelVector> labels;
      std::size_t npos = 0;
      for (int k = 0; k < n; ++k) {
        scores.push_back({rng.uniform()});
        const bool pos = rng.uniform() < 0.4;
        npos += pos;
        labels.push_back(LabelVector{{static_cast<std::int8_t>(pos ? 1 : -1)}});
      }
      const auto ap = classification_ap(scores, labels, 1);
      if (npos == 0) {
        CHECK_FALSE(ap[0].has_value());
        continue;
      }
      std::vector<int> order(static_cast<std::size_t>(n));
      std::iota(order.begin(), order.end(), 0);
      std::sort(order.begin(), order.end(), [&](int a, int b) { return scores[static_cast<std::size_t>(a)][0] > scores[static_cast<std::size_t>(b)][0]; });
      std::vector<bool> hits;
      for (int k : order) hits.push_back(labels[static_cast<std::size_t>(k)].y[0] > 0);
      CHECK(std::abs(*ap[0] - oracle::average_precision(hits, npos)) < 1e-9);
    }
  }

  TEST_CASE("scoring matches the forward pass") {
    CHECK(score_dataset(init_params(ModelConfig{}, 1), {}).detections.empty());

    SynthConfig cfg;
    cfg.num_images = 3;
    const Dataset ds = generate_synthetic(cfg);
    ModelConfig mc;
    mc.num_classes = cfg.num_classes;
    mc.feature_dim = cfg.feature_dim;
    mc.trunk_widths = {8};
    ModelParams p = init_params(mc, 2);
    const ScoredDataset scored = score_dataset(p, ds.records);
    std::size_t k = 0;
    for (std::size_t img = 0; img < ds.records.size(); ++img) {
      const ForwardTrace t = forward(p, to_double(ds.records[img].features));
      CHECK(scored.image_scores[img] == t.image_scores);
      for (std::size_t c = 0; c < t.scores.rows(); ++c) {
        for (std::size_t i = 0; i < t.scores.cols(); ++i, ++k) {
          REQUIRE(k < scored.detections.size());
          const Detection& d = scored.detections[k];
          CHECK(d.image_index == static_cast<int>(img));
          CHECK(d.class_id == static_cast<int>(c));
          CHECK(d.proposal_index == static_cast<int>(i));
          CHECK(d.bbox == ds.records[img].proposals[i].bbox);
          CHECK(d.score == t.scores(c, i));
        }
      }
    }
    CHECK(k == scored.detections.size());

    for (auto& view : tensors(p.values)) std::fill(view.data.begin(), view.data.end(), 0.0);
    const ScoredDataset flat = score_dataset(p, ds.records);
    for (const auto& d : flat.detections) {
      const double n = static_cast<double>(ds.records[static_cast<std::size_t>(d.image_index)].proposals.size());
      CHECK(d.score == doctest::Approx(1.0 / (cfg.num_classes * n)).epsilon(1e-14));
    }
  }

  TEST_CASE("an oracle model scores perfectly on noise-free data") {
    SynthConfig cfg;
    cfg.num_images = 30;
    cfg.saliency_noise = 0.0;
    const Dataset ds = generate_synthetic(cfg);
    std::vector<Detection> dets;
    std::vector<std::vector<double>> image_scores;
    std::vector<LabelVector> labels;
    for (std::size_t k = 0; k < ds.records.size(); ++k) {
      const auto& r = ds.records[k];
      for (int c = 0; c < cfg.num_classes; ++c) {
        for (std::size_t i = 0; i < r.proposals.size(); ++i) {
          const auto& p = r.proposals[i];
          bool planted = false;
          for (const auto& g : r.gt_boxes) planted |= g.class_id == c && p.bbox == g.box && p.area_px == g.box.area();
          dets.push_back(det(static_cast<int>(k), c, static_cast<int>(i), p.bbox, planted ? 1.0 : 0.0));
        }
      }
      image_scores.emplace_back();
      for (int c = 0; c < cfg.num_classes; ++c) image_scores.back().push_back(r.labels.positive(c) ? 1.0 : 0.0);
      labels.push_back(r.labels);
    }
    CHECK(mean_defined(detection_ap(nms_all(dets, kDefaultNmsThreshold), ds.records, cfg.num_classes)) == 1.0);
    CHECK(mean_defined(corloc(dets, ds.records, cfg.num_classes)) == 1.0);
    CHECK(mean_defined(classification_ap(image_scores, labels, cfg.num_classes)) == 1.0);
  }

  TEST_CASE("report json marks undefined entries as null") {
    EvalReport r;
    r.class_names = {"a", "b"};
    r.detection_ap = {0.5, std::nullopt};
    r.mean_ap = 0.5;
    r.corloc = {std::nullopt, 1.0};
    r.mean_corloc = 1.0;
    r.classification_ap = {1.0, 1.0};
    r.mean_classification_ap = 1.0;
    const auto j = nlohmann::json::parse(report_json(r));
    CHECK(j["version"] == 1);
    CHECK(report_csv(r).find("class") != std::string::npos);
    CHECK(j.dump().find("null") != std::string::npos);
  }
}
