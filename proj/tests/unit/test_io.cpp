#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <iterator>

#include <nlohmann/json.hpp>

#include "oracles.hpp"
#include "sgwsod/errors.hpp"
#include "sgwsod/io.hpp"
#include "sgwsod/seeds.hpp"
#include "sgwsod/synth.hpp"
#include "temp_dir.hpp"

using namespace sgwsod;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

SynthConfig small_config(std::uint64_t seed) {
  SynthConfig cfg;
  cfg.num_images = 6;
  cfg.seed = seed;
  return cfg;
}

std::vector<fs::path> files_under(const fs::path& dir) {
  std::vector<fs::path> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) out.push_back(fs::relative(e.path(), dir));
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

TEST_SUITE("io") {
  TEST_CASE("empty dataset saves a manifest only and loads back") {
    test::TempDir tmp;
    Dataset ds;
    ds.manifest.num_classes = 2;
    ds.manifest.feature_dim = 3;
    ds.manifest.class_names = {"a", "b"};
    save_dataset(ds, tmp.path());
    CHECK(files_under(tmp.path()) == std::vector<fs::path>{"manifest.json"});
    const Dataset back = load_dataset(tmp.path());
    CHECK(back == ds);
    CHECK(back.records.empty());
  }

  TEST_CASE("single-image dataset writes one record pair") {
    test::TempDir tmp;
    SynthConfig cfg = small_config(2);
    cfg.num_images = 1;
    const Dataset ds = generate_synthetic(cfg);
    save_dataset(ds, tmp.path());
    const std::string id = ds.records[0].id;
    CHECK(files_under(tmp.path()) ==
          std::vector<fs::path>{"manifest.json", fs::path("records") / (id + ".bin"), fs::path("records") / (id + ".json")});
  }

  TEST_CASE("round trip reproduces records exactly") {
    test::TempDir tmp;
    const Dataset ds = generate_synthetic(small_config(9));
    save_dataset(ds, tmp.path());
    CHECK(load_dataset(tmp.path()) == ds);
    CHECK(load_dataset(tmp.path() / "manifest.json") == ds);
  }

  TEST_CASE("saved bytes are a function of the dataset") {
    test::TempDir a;
    test::TempDir b;
    save_dataset(generate_synthetic(small_config(4)), a.path());
    save_dataset(generate_synthetic(small_config(4)), b.path());
    const auto files = files_under(a.path());
    REQUIRE(files == files_under(b.path()));
    for (const auto& f : files) CHECK(slurp(a.path() / f) == slurp(b.path() / f));
  }

  TEST_CASE("record blob header") {
    test::TempDir tmp;
    const Dataset ds = generate_synthetic(small_config(4));
    save_dataset(ds, tmp.path());
    const std::string blob = slurp(tmp.path() / "records" / (ds.records[0].id + ".bin"));
    REQUIRE(blob.size() > 16);
    CHECK(blob.substr(0, 8) == std::string("SGWSREC\0", 8));
    CHECK(static_cast<unsigned char>(blob[8]) == 1);
  }

  TEST_CASE("load errors") {
    test::TempDir tmp;
    const Dataset ds = generate_synthetic(small_config(5));
    const std::string id = ds.records[0].id;
    const fs::path header = tmp.path() / "records" / (id + ".json");

    SUBCASE("missing manifest") { CHECK_THROWS_AS(load_dataset(tmp.path() / "nope"), ValidationError); }

    SUBCASE("missing record blob") {
      save_dataset(ds, tmp.path());
      fs::remove(tmp.path() / "records" / (id + ".bin"));
      CHECK_THROWS_WITH_AS(load_dataset(tmp.path()), doctest::Contains((id + ".bin").c_str()), ValidationError);
    }

    SUBCASE("one feature row short of the proposal count") {
      save_dataset(ds, tmp.path());
      auto j = nlohmann::json::parse(slurp(header));
      j["proposals"].push_back(nlohmann::json::array({0}));
      j["num_proposals"] = j["proposals"].size();
      std::ofstream(header) << j.dump();
      CHECK_THROWS_WITH_AS(load_dataset(tmp.path()), doctest::Contains("dimension mismatch"), ValidationError);
    }

    SUBCASE("label vector without positives") {
      save_dataset(ds, tmp.path());
      auto j = nlohmann::json::parse(slurp(header));
      for (auto& y : j["labels"]) y = -1;
      std::ofstream(header) << j.dump();
      CHECK_THROWS_AS(load_dataset(tmp.path()), ValidationError);
    }

    SUBCASE("unsupported version") {
      save_dataset(ds, tmp.path());
      auto j = nlohmann::json::parse(slurp(header));
      j["version"] = 2;
      std::ofstream(header) << j.dump();
      CHECK_THROWS_WITH_AS(load_dataset(tmp.path()), doctest::Contains("version"), ValidationError);
    }

    SUBCASE("duplicate class names") {
      Dataset bad;
      bad.manifest.num_classes = 2;
      bad.manifest.class_names = {"x", "x"};
      CHECK_THROWS_AS(validate_manifest(bad.manifest), ValidationError);
    }
  }

  TEST_CASE("synthetic generation is deterministic") {
    CHECK(generate_synthetic(small_config(8)) == generate_synthetic(small_config(8)));
    CHECK_FALSE(generate_synthetic(small_config(8)) == generate_synthetic(small_config(9)));
  }

  TEST_CASE("synthetic images pass validation and carry maps for every positive") {
    SynthConfig cfg;
    cfg.num_images = 50;
    cfg.num_classes = 4;
    const Dataset ds = generate_synthetic(cfg);
    REQUIRE(ds.records.size() == 50);
    for (const auto& r : ds.records) {
      CHECK_NOTHROW(validate_record(r, 4, cfg.feature_dim));
      const auto pos = r.labels.positives();
      CHECK_FALSE(pos.empty());
      REQUIRE(r.saliency.size() == pos.size());
      for (std::size_t k = 0; k < pos.size(); ++k) CHECK(r.saliency[k].class_id == pos[k]);
      std::vector<int> gt_classes;
      for (const auto& g : r.gt_boxes) gt_classes.push_back(g.class_id);
      std::sort(gt_classes.begin(), gt_classes.end());
      CHECK(gt_classes == pos);
    }
  }

  TEST_CASE("noise-free single object: exact saliency and the planted proposal wins") {
    SynthConfig cfg;
    cfg.num_images = 20;
    cfg.saliency_noise = 0.0;
    cfg.objects_min = cfg.objects_max = 1;
    const Dataset ds = generate_synthetic(cfg);
    for (const auto& r : ds.records) {
      REQUIRE(r.gt_boxes.size() == 1);
      const GroundTruth& gt = r.gt_boxes[0];
      const SaliencyMap& map = *r.saliency_for(gt.class_id);
      int planted = -1;
      for (std::size_t i = 0; i < r.proposals.size(); ++i) {
        const Proposal& p = r.proposals[i];
        const double rs = region_saliency(r.grid, p, map);
        if (p.bbox == gt.box && p.area_px == gt.box.area()) {
          planted = static_cast<int>(i);
          CHECK(rs == 1.0);
        } else if (intersection_area(p.bbox, gt.box) == 0) {
          CHECK(rs == 0.0);
        }
      }
      REQUIRE(planted >= 0);
      const SeedAssignment a = assign_seeds(r);
      CHECK(a.seeds[0].seed_index == planted);
      CHECK(region_saliency(r.grid, r.proposals[static_cast<std::size_t>(a.negatives[0])], map) == 0.0);
    }
  }

  TEST_CASE("noise-free multi-object images: each planted proposal maximizes contrast") {
    SynthConfig cfg;
    cfg.num_images = 30;
    cfg.saliency_noise = 0.0;
    cfg.seed = 77;
    const Dataset ds = generate_synthetic(cfg);
    for (const auto& r : ds.records) {
      const SeedAssignment a = assign_seeds(r);
      for (const auto& s : a.seeds) {
        const Proposal& p = r.proposals[static_cast<std::size_t>(s.seed_index)];
        bool is_planted = false;
        for (const auto& g : r.gt_boxes) {
          is_planted |= g.class_id == s.class_id && p.bbox == g.box && p.area_px == g.box.area();
        }
        CHECK(is_planted);
      }
    }
  }

  TEST_CASE("synth config validation") {
    SynthConfig cfg;
    cfg.saliency_noise = 1.0;
    CHECK_THROWS_AS(validate_synth_config(cfg), ValidationError);
    cfg = SynthConfig{};
    cfg.num_images = 0;
    CHECK_THROWS_AS(validate_synth_config(cfg), ValidationError);
    cfg = SynthConfig{};
    cfg.objects_max = cfg.num_classes + 1;
    CHECK_THROWS_AS(validate_synth_config(cfg), ValidationError);
    cfg = SynthConfig{};
    cfg.cells_per_side = 7;  // does not divide 32
    CHECK_THROWS_AS(validate_synth_config(cfg), ValidationError);
  }
}
