#include "sgwsod/cli.hpp"

#include <fstream>
#include <iomanip>
#include <memory>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "sgwsod/checkpoint.hpp"
#include "sgwsod/errors.hpp"
#include "sgwsod/eval.hpp"
#include "sgwsod/experiment.hpp"
#include "sgwsod/gradcheck.hpp"
#include "sgwsod/io.hpp"
#include "sgwsod/seeds.hpp"
#include "sgwsod/synth.hpp"
#include "sgwsod/trainer.hpp"

namespace sgwsod::cli {
namespace {

using ordered_json = nlohmann::ordered_json;

struct Globals {
  std::uint64_t seed = 1;
  bool json = false;
};

ordered_json envelope(const char* command) {
  ordered_json j;
  j["version"] = 1;
  j["command"] = command;
  return j;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError(path + ": cannot open for writing");
  f << text;
  if (!f) throw IoError(path + ": write failed");
}

std::vector<int> parse_widths(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const int v = std::stoi(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
      out.push_back(v);
    } catch (const std::exception&) {
      throw ValidationError("--trunk: '" + text + "' is not a comma-separated list of integers");
    }
  }
  if (out.empty()) throw ValidationError("--trunk: need at least one width");
  return out;
}

// Model and optimizer flags shared by `train` and `ablate`.
struct TrainFlags {
  TrainConfig train;
  std::string trunk = "128,128";
  int saliency_hidden = 32;
  double epsilon = 1e-8;
  std::uint64_t shuffle_seed = 0;
  bool shuffle_seed_set = false;

  void add_to(CLI::App& app) {
    app.add_option("--epochs", train.epochs, "Training epochs")->capture_default_str();
    app.add_option("--lr1", train.lr_phase1, "Learning rate up to the phase boundary")->capture_default_str();
    app.add_option("--lr2", train.lr_phase2, "Learning rate after the phase boundary")->capture_default_str();
    app.add_option("--phase-boundary", train.phase_boundary, "Last epoch trained at --lr1")->capture_default_str();
    app.add_option("--momentum", train.momentum, "SGD momentum coefficient")->capture_default_str();
    app.add_option("--lambda1", train.lambda1, "Weight of the seed classification loss")->capture_default_str();
    app.add_option("--lambda2", train.lambda2, "Weight of the seed saliency loss")->capture_default_str();
    app.add_option("--lambda3", train.lambda3, "L2 weight decay")->capture_default_str();
    app.add_option("--sigma", train.sigma, "Area scale of the saliency contrast")->capture_default_str();
    app.add_option("--trunk", trunk, "Trunk layer widths, comma separated")->capture_default_str();
    app.add_option("--saliency-hidden", saliency_hidden, "Hidden width of the saliency branch")
        ->capture_default_str();
    app.add_option("--epsilon", epsilon, "Clamp for log arguments")->capture_default_str();
    app.add_option("--jitter", train.feature_jitter, "Std of Gaussian feature jitter (0 = off)")
        ->capture_default_str();
    app.add_option("--shuffle-seed", shuffle_seed, "Seed for epoch shuffling (default: --seed)")
        ->each([this](const std::string&) { shuffle_seed_set = true; });
    app.add_flag("--no-saliency-subnet", train.disable_saliency_subnet,
                 "Remove the saliency sub-network and its loss");
    app.add_flag("--no-seed-losses", train.disable_seed_losses, "Drop both seed losses");
  }

  ModelConfig model(const DatasetManifest& m) const {
    ModelConfig mc;
    mc.feature_dim = m.feature_dim;
    mc.num_classes = m.num_classes;
    mc.trunk_widths = parse_widths(trunk);
    mc.saliency_hidden = saliency_hidden;
    mc.epsilon = epsilon;
    return mc;
  }

  TrainConfig resolved(std::uint64_t seed) const {
    TrainConfig t = train;
    t.init_seed = seed;
    t.shuffle_seed = shuffle_seed_set ? shuffle_seed : seed;
    return t;
  }
};

// --- synth ------------------------------------------------------------------

struct SynthCommand {
  SynthConfig cfg;
  std::string out_dir;

  void add_to(CLI::App& app) {
    app.add_option("--out", out_dir, "Output dataset directory")->required();
    app.add_option("--images", cfg.num_images, "Number of images")->capture_default_str();
    app.add_option("--classes", cfg.num_classes, "Number of classes")->capture_default_str();
    app.add_option("--feature-dim", cfg.feature_dim, "Feature dimension")->capture_default_str();
    app.add_option("--grid", cfg.grid_side, "Image side in pixels")->capture_default_str();
    app.add_option("--cells", cfg.cells_per_side, "Superpixels per image side")->capture_default_str();
    app.add_option("--objects-min", cfg.objects_min, "Minimum objects per image")->capture_default_str();
    app.add_option("--objects-max", cfg.objects_max, "Maximum objects per image")->capture_default_str();
    app.add_option("--object-cells-min", cfg.object_cells_min, "Minimum object side in cells")
        ->capture_default_str();
    app.add_option("--object-cells-max", cfg.object_cells_max, "Maximum object side in cells")
        ->capture_default_str();
    app.add_option("--parts", cfg.parts_per_object, "Part proposals per object")->capture_default_str();
    app.add_option("--random-proposals", cfg.random_proposals, "Random distractor proposals")
        ->capture_default_str();
    app.add_option("--noise", cfg.saliency_noise, "Saliency noise amplitude in [0,1)")->capture_default_str();
    app.add_option("--snr", cfg.feature_snr, "Feature signal-to-noise ratio")->capture_default_str();
    app.add_option("--body-signal", cfg.body_signal, "Class evidence of non-core object pixels")
        ->capture_default_str();
    app.add_option("--template-seed", cfg.template_seed, "Seed of the shared class templates")
        ->capture_default_str();
  }

  int run(const Globals& g, std::ostream& out) {
    cfg.seed = g.seed;
    const Dataset ds = generate_synthetic(cfg);
    save_dataset(ds, out_dir);
    if (g.json) {
      auto j = envelope("synth");
      j["path"] = out_dir;
      j["images"] = ds.records.size();
      j["seed"] = cfg.seed;
      out << j.dump() << '\n';
    } else {
      out << "wrote " << ds.records.size() << " images to " << out_dir << '\n';
    }
    return kExitOk;
  }
};

// --- seeds ------------------------------------------------------------------

struct SeedsCommand {
  std::string data;
  std::string out_file;
  double sigma = kDefaultSigma;
  double theta = 0.0;

  void add_to(CLI::App& app) {
    app.add_option("--data", data, "Dataset directory or manifest")->required();
    app.add_option("--sigma", sigma, "Area scale of the saliency contrast")->capture_default_str();
    app.add_option("--out", out_file, "Write JSON here instead of stdout");
    app.add_option("--threshold-baseline", theta,
                   "Also report thresholded-saliency boxes at this fraction of the map maximum");
  }

  int run(const Globals&, std::ostream& out) {
    if (!(sigma > 0.0)) throw ValidationError("--sigma must be positive");
    if (theta != 0.0 && !(theta > 0.0 && theta < 1.0)) throw ValidationError("--threshold-baseline must be in (0, 1)");
    const Dataset ds = load_dataset(data);
    auto j = envelope("seeds");
    j["sigma"] = sigma;
    auto images = ordered_json::array();
    for (const auto& r : ds.records) {
      const SeedAssignment a = assign_seeds(r, sigma);
      ordered_json classes = ordered_json::object();
      for (std::size_t k = 0; k < a.seeds.size(); ++k) {
        const auto& s = a.seeds[k];
        const Box& b = r.proposals[static_cast<std::size_t>(s.seed_index)].bbox;
        ordered_json entry;
        entry["seed_index"] = s.seed_index;
        entry["seed_bbox"] = {b.x0, b.y0, b.x1, b.y1};
        entry["contrast"] = s.score.contrast;
        entry["negatives"] = k < a.negatives.size() ? ordered_json::array({a.negatives[k]}) : ordered_json::array();
        if (theta > 0.0) {
          auto boxes = ordered_json::array();
          for (const Box& t : threshold_baseline(*r.saliency_for(s.class_id), theta)) {
            boxes.push_back({t.x0, t.y0, t.x1, t.y1});
          }
          entry["threshold_boxes"] = boxes;
        }
        classes[ds.manifest.class_names[static_cast<std::size_t>(s.class_id)]] = entry;
      }
      images.push_back({{"id", r.id}, {"classes", classes}});
    }
    j["images"] = images;
    if (out_file.empty()) {
      out << j.dump(2) << '\n';
    } else {
      write_text(out_file, j.dump(2) + "\n");
    }
    return kExitOk;
  }
};

// --- train ------------------------------------------------------------------

struct TrainCommand {
  TrainFlags flags;
  std::string data;
  std::string out_ckpt;
  std::string log_file;

  void add_to(CLI::App& app) {
    app.add_option("--data", data, "Training dataset directory or manifest")->required();
    app.add_option("--out", out_ckpt, "Checkpoint path")->required();
    app.add_option("--log", log_file, "Also write the epoch log (JSON lines) to this file");
    flags.add_to(app);
  }

  int run(const Globals& g, std::ostream& out) {
    const TrainConfig tc = flags.resolved(g.seed);
    validate_train_config(tc);
    const Dataset ds = load_dataset(data);
    const ModelConfig mc = flags.model(ds.manifest);
    validate_model_config(effective_model_config(mc, tc));

    std::ostringstream epochs;
    TrainOptions opts;
    opts.checkpoint = out_ckpt;
    opts.log_stream = &epochs;
    const TrainResult result = train(ds.records, mc, tc, opts);
    out << epochs.str();
    if (!log_file.empty()) write_text(log_file, epochs.str());
    if (g.json) {
      auto j = envelope("train");
      j["checkpoint"] = result.log.checkpoint_path;
      j["epochs"] = result.log.epochs.size();
      out << j.dump() << '\n';
    } else {
      out << "checkpoint: " << result.log.checkpoint_path << '\n';
    }
    return kExitOk;
  }
};

// --- eval -------------------------------------------------------------------

void print_report(const EvalReport& r, std::ostream& out) {
  auto pct = [](const std::optional<double>& v) {
    std::ostringstream os;
    if (v) {
      os << std::fixed << std::setprecision(1) << 100.0 * *v;
    } else {
      os << "-";
    }
    return os.str();
  };
  out << std::left << std::setw(14) << "class" << std::right << std::setw(10) << "det AP" << std::setw(10)
      << "CorLoc" << std::setw(10) << "cls AP" << '\n';
  for (std::size_t c = 0; c < r.class_names.size(); ++c) {
    out << std::left << std::setw(14) << r.class_names[c] << std::right << std::setw(10) << pct(r.detection_ap[c])
        << std::setw(10) << pct(r.corloc[c]) << std::setw(10) << pct(r.classification_ap[c]) << '\n';
  }
  out << std::left << std::setw(14) << "mean" << std::right << std::setw(10) << pct(r.mean_ap) << std::setw(10)
      << pct(r.mean_corloc) << std::setw(10) << pct(r.mean_classification_ap) << '\n';
}

struct EvalCommand {
  std::string checkpoint;
  std::string data;
  std::string corloc_data;
  std::string out_file;
  std::string csv_file;
  EvalOptions options;

  void add_to(CLI::App& app) {
    app.add_option("--checkpoint", checkpoint, "Model checkpoint")->required();
    app.add_option("--data", data, "Test dataset (detection and classification AP)")->required();
    app.add_option("--corloc-data", corloc_data, "Trainval dataset for CorLoc (default: --data)");
    app.add_option("--nms", options.nms_threshold, "NMS IoU threshold")->capture_default_str();
    app.add_flag("--ap11", options.eleven_point, "Use 11-point interpolated AP");
    app.add_option("--out", out_file, "Write the report JSON to this file");
    app.add_option("--csv", csv_file, "Write the per-class table as CSV");
  }

  int run(const Globals& g, std::ostream& out) {
    if (!(options.nms_threshold > 0.0 && options.nms_threshold < 1.0)) {
      throw ValidationError("--nms must be in (0, 1)");
    }
    const ModelParams params = load_checkpoint(checkpoint);
    const Dataset test = load_dataset(data);
    const Dataset trainval = corloc_data.empty() ? test : load_dataset(corloc_data);
    for (const Dataset* ds : {&test, &trainval}) {
      if (ds->manifest.num_classes != params.config.num_classes ||
          ds->manifest.feature_dim != params.config.feature_dim) {
        throw ValidationError("dataset dimensions do not match the checkpoint");
      }
    }
    const EvalReport rep = evaluate(params, test.records, trainval.records, test.manifest.class_names, options);
    const std::string json = report_json(rep);
    if (!out_file.empty()) write_text(out_file, json + "\n");
    if (!csv_file.empty()) write_text(csv_file, report_csv(rep));
    if (g.json) {
      auto j = envelope("eval");
      j["report"] = ordered_json::parse(json);
      out << j.dump(2) << '\n';
    } else {
      print_report(rep, out);
    }
    return kExitOk;
  }
};

// --- gradcheck --------------------------------------------------------------

struct GradcheckCommand {
  int instances = 20;
  double step = kGradCheckStep;
  double tolerance = kGradCheckTolerance;

  void add_to(CLI::App& app) {
    app.add_option("--instances", instances, "Random (C, N, D) instances")->capture_default_str();
    app.add_option("--step", step, "Central difference step")->capture_default_str();
    app.add_option("--tolerance", tolerance, "Pass threshold on max relative error")->capture_default_str();
  }

  int run(const Globals& g, std::ostream& out, std::ostream& err) {
    if (instances < 1) throw ValidationError("--instances must be >= 1");
    if (!(step > 0.0) || !(tolerance > 0.0)) throw ValidationError("--step and --tolerance must be positive");
    double worst = 0.0;
    std::size_t entries = 0;
    auto cases = ordered_json::array();
    for (const auto& c : gradcheck_suite(g.seed, instances)) {
      const GradCheckReport r = check_gradients(c, step);
      worst = std::max(worst, r.max_relative_error);
      entries += r.entries_checked;
      cases.push_back({{"classes", c.num_classes},
                       {"proposals", c.num_proposals},
                       {"feature_dim", c.feature_dim},
                       {"saliency_weighting", c.saliency_weighting},
                       {"max_relative_error", r.max_relative_error}});
    }
    const bool pass = worst < tolerance;
    if (g.json) {
      auto j = envelope("gradcheck");
      j["max_relative_error"] = worst;
      j["tolerance"] = tolerance;
      j["entries"] = entries;
      j["pass"] = pass;
      j["cases"] = cases;
      out << j.dump(2) << '\n';
    } else {
      out << "max relative error " << std::scientific << std::setprecision(3) << worst << " over " << entries
          << " entries (" << instances << " instances): " << (pass ? "PASS" : "FAIL") << '\n';
    }
    if (!pass) {
      err << "gradcheck: max relative error " << worst << " exceeds " << tolerance << '\n';
      return kExitRuntime;
    }
    return kExitOk;
  }
};

// --- ablate -----------------------------------------------------------------

struct AblateCommand {
  TrainFlags flags;
  std::string train_data;
  std::string test_data;
  int num_seeds = 5;

  AblateCommand() {
    const Benchmark b = standard_benchmark(1);
    flags.train = b.train;
    flags.trunk = "32,32";
    flags.saliency_hidden = b.model.saliency_hidden;
  }

  void add_to(CLI::App& app) {
    app.add_option("--data", train_data, "Training dataset (default: the built-in synthetic benchmark)");
    app.add_option("--test", test_data, "Test dataset (required with --data)");
    app.add_option("--seeds", num_seeds, "Benchmark seeds --seed .. --seed+n-1")->capture_default_str();
    flags.add_to(app);
  }

  int run(const Globals& g, std::ostream& out) {
    std::vector<AblationRow> rows;
    if (train_data.empty()) {
      if (!test_data.empty()) throw ValidationError("--test requires --data");
      if (num_seeds < 1) throw ValidationError("--seeds must be >= 1");
      std::vector<std::uint64_t> seeds;
      for (int k = 0; k < num_seeds; ++k) seeds.push_back(g.seed + static_cast<std::uint64_t>(k));
      rows = run_ablation(seeds);
    } else {
      if (test_data.empty()) throw ValidationError("--data requires --test");
      const TrainConfig tc = flags.resolved(g.seed);
      validate_train_config(tc);
      const Dataset train = load_dataset(train_data);
      const Dataset test = load_dataset(test_data);
      const ModelConfig mc = flags.model(train.manifest);
      validate_model_config(mc);
      rows = run_ablation(train, test, mc, tc);
    }
    if (g.json) {
      out << ablation_json(rows) << '\n';
    } else {
      out << ablation_table(rows);
    }
    return kExitOk;
  }
};

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Saliency-guided weakly supervised object detection", "sgwsod"};
  app.require_subcommand(1);
  Globals globals;
  app.add_option("--seed", globals.seed, "Seed for data generation, initialization and shuffling")
      ->capture_default_str();
  app.add_flag("--json", globals.json, "Emit machine-readable JSON");

  SynthCommand synth;
  SeedsCommand seeds;
  TrainCommand train_cmd;
  EvalCommand eval_cmd;
  GradcheckCommand gradcheck;
  AblateCommand ablate;
  auto* synth_app = app.add_subcommand("synth", "Generate a synthetic dataset");
  auto* seeds_app = app.add_subcommand("seeds", "Select seeds and negatives per image");
  auto* train_app = app.add_subcommand("train", "Train a model and write a checkpoint");
  auto* eval_app = app.add_subcommand("eval", "Evaluate a checkpoint");
  auto* grad_app = app.add_subcommand("gradcheck", "Finite-difference gradient check");
  auto* ablate_app = app.add_subcommand("ablate", "Compare the three component configurations");
  synth.add_to(*synth_app);
  seeds.add_to(*seeds_app);
  train_cmd.add_to(*train_app);
  eval_cmd.add_to(*eval_app);
  gradcheck.add_to(*grad_app);
  ablate.add_to(*ablate_app);
  for (auto* sub : {synth_app, seeds_app, train_app, eval_app, grad_app, ablate_app}) sub->fallthrough();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  }

  try {
    if (synth_app->parsed()) return synth.run(globals, out);
    if (seeds_app->parsed()) return seeds.run(globals, out);
    if (train_app->parsed()) return train_cmd.run(globals, out);
    if (eval_app->parsed()) return eval_cmd.run(globals, out);
    if (grad_app->parsed()) return gradcheck.run(globals, out, err);
    if (ablate_app->parsed()) return ablate.run(globals, out);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitValidation;
}

}  // namespace sgwsod::cli
