#pragma once

#include <cstdint>

#include "sgwsod/io.hpp"

namespace sgwsod {

// Parameters of the synthetic detection world. Images tile a square pixel grid
// into square superpixel cells and plant axis-aligned rectangular objects on
// the cell lattice, each of a distinct class.
//
// Every object has a discriminative core (a sub-rectangle under half its
// area). A proposal's feature row is
//   identity[c] * (|P & core| + body_signal * |P & body|) / |P|
//     + extent * |P & object| / |object| + N(0, 1/snr^2)
// for the dominant overlapping object of class c, so class evidence peaks on
// the core while only whole-object proposals carry full extent.
struct SynthConfig {
  int grid_side = 32;            // pixels per image side
  int cells_per_side = 8;        // superpixels per side; must divide grid_side
  int objects_min = 1;
  int objects_max = 2;
  int object_cells_min = 3;      // object side length in cells
  int object_cells_max = 4;
  int parts_per_object = 3;     // the first part is always the core
  double body_signal = 0.25;    // class evidence of non-core object pixels
  int random_proposals = 10;
  int num_images = 50;
  int num_classes = 4;
  int feature_dim = 16;
  double saliency_noise = 0.2;   // uniform noise amplitude in [0, 1)
  double feature_snr = 4.0;      // per-dimension signal RMS over noise std
  std::uint64_t seed = 1;
  // Class templates are drawn from this seed so that separately generated
  // splits share one feature space.
  std::uint64_t template_seed = 0x5eed5a11ce;
};

// Throws ValidationError when a field is out of range or the layout cannot
// hold objects_max objects.
void validate_synth_config(const SynthConfig& cfg);

// Deterministic in cfg. Record ids are "s<seed>_<index>", index zero-padded to five digits.
Dataset generate_synthetic(const SynthConfig& cfg);

}  // namespace sgwsod
