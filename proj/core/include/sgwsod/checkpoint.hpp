#pragma once

#include <filesystem>
#include <string>

#include "sgwsod/model.hpp"

namespace sgwsod {

// Little-endian layout:
//   8-byte magic "SGWSCKPT", u32 version, u32 tensor count,
//   model config (u32 feature_dim, u32 num_classes, u32 saliency_hidden,
//   u32 saliency_weighting, u32 trunk depth, u32 widths..., f64 epsilon,
//   f64 lambda1..3),
//   shape table (u32 rank, u32 dims...) per tensor,
//   then f32 data per tensor in declaration order.
// Momentum buffers are not stored.
std::string encode_checkpoint(const ModelParams& params);
ModelParams decode_checkpoint(const std::string& bytes, const std::string& origin = "checkpoint");

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path);
ModelParams load_checkpoint(const std::filesystem::path& path);

}  // namespace sgwsod
