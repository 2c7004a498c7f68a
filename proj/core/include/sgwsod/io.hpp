#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sgwsod/dataset.hpp"

namespace sgwsod {

inline constexpr int kFormatVersion = 1;

struct DatasetManifest {
  int num_classes = 1;
  int feature_dim = 1;
  std::vector<std::string> class_names;
  std::vector<std::string> images;  // file stems under records/
  std::uint64_t seed = 0;

  friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

struct Dataset {
  DatasetManifest manifest;
  std::vector<ImageRecord> records;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

// Throws ValidationError on C < 1, D < 1 or bad class names.
void validate_manifest(const DatasetManifest& manifest);

// Reads manifest.json and every records/<id>.{json,bin}. Any missing file or
// invariant violation throws ValidationError naming the file and field.
Dataset load_dataset(const std::filesystem::path& manifest_path);

// Writes manifest.json and records/<id>.{json,bin} under dir. Output bytes are
// a pure function of the dataset. Throws IoError on write failure.
void save_dataset(const Dataset& dataset, const std::filesystem::path& dir);

// Accepts either a dataset directory or a path to its manifest.json.
std::filesystem::path resolve_manifest(const std::filesystem::path& path);

}  // namespace sgwsod
