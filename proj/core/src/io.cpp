#include "sgwsod/io.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "sgwsod/errors.hpp"

namespace sgwsod {
namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

constexpr std::array<char, 8> kRecordMagic = {'S', 'G', 'W', 'S', 'R', 'E', 'C', '\0'};

// Little-endian byte sink / source independent of host order.
class ByteWriter {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void raw(const char* data, std::size_t n) { bytes_.insert(bytes_.end(), data, data + n); }
  const std::string& bytes() const { return bytes_; }

 private:
  std::string bytes_;
};

class ByteReader {
 public:
  ByteReader(std::string bytes, std::string origin)
      : bytes_(std::move(bytes)), origin_(std::move(origin)) {}

  std::uint32_t u32(const char* field) {
    need(4, field);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += 4;
    return v;
  }
  float f32(const char* field) { return std::bit_cast<float>(u32(field)); }
  std::string raw(std::size_t n, const char* field) {
    need(n, field);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n, const char* field) const {
    if (pos_ + n > bytes_.size()) {
      throw ValidationError(origin_ + ": truncated while reading '" + field + "'");
    }
  }
  std::string bytes_;
  std::string origin_;
  std::size_t pos_ = 0;
};

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError(path.string() + ": missing file");
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const fs::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path.string() + ": cannot open for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError(path.string() + ": write failed");
}

ordered_json parse_json(const fs::path& path) {
  const std::string text = read_file(path);
  try {
    return ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(path.string() + ": malformed JSON (" + e.what() + ")");
  }
}

template <typename T>
T field(const ordered_json& j, const char* key, const fs::path& origin) {
  if (!j.contains(key)) {
    throw ValidationError(origin.string() + ": missing field '" + key + "'");
  }
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ValidationError(origin.string() + ": field '" + key + "' has the wrong type");
  }
}

void check_version(const ordered_json& j, const fs::path& origin) {
  const int v = field<int>(j, "version", origin);
  if (v != kFormatVersion) {
    throw ValidationError(origin.string() + ": field 'version': unsupported value " +
                          std::to_string(v));
  }
}

ordered_json record_header(const ImageRecord& r) {
  ordered_json j;
  j["version"] = kFormatVersion;
  j["id"] = r.id;
  j["width"] = r.grid.width();
  j["height"] = r.grid.height();
  j["labels"] = r.labels.y;
  ordered_json classes = ordered_json::array();
  for (const auto& m : r.saliency) classes.push_back(m.class_id);
  j["saliency_classes"] = classes;
  j["num_proposals"] = r.proposals.size();
  j["feature_dim"] = r.features.cols();
  ordered_json props = ordered_json::array();
  for (const auto& p : r.proposals) props.push_back(p.superpixel_ids);
  j["proposals"] = props;
  ordered_json gts = ordered_json::array();
  for (const auto& g : r.gt_boxes) {
    gts.push_back({{"class", g.class_id}, {"box", {g.box.x0, g.box.y0, g.box.x1, g.box.y1}}});
  }
  j["gt_boxes"] = gts;
  return j;
}

std::string record_blob(const ImageRecord& r) {
  ByteWriter w;
  w.raw(kRecordMagic.data(), kRecordMagic.size());
  w.u32(static_cast<std::uint32_t>(kFormatVersion));
  w.u32(0);  // reserved
  for (SuperpixelId id : r.grid.labels()) w.u32(id);
  for (const auto& m : r.saliency) {
    for (float v : m.values) w.f32(v);
  }
  for (float v : r.features.flat()) w.f32(v);
  return w.bytes();
}

ImageRecord read_record(const fs::path& dir, const std::string& stem,
                        const DatasetManifest& manifest) {
  const fs::path json_path = dir / "records" / (stem + ".json");
  const fs::path bin_path = dir / "records" / (stem + ".bin");
  const ordered_json j = parse_json(json_path);
  check_version(j, json_path);

  ImageRecord r;
  r.id = field<std::string>(j, "id", json_path);
  const int width = field<int>(j, "width", json_path);
  const int height = field<int>(j, "height", json_path);
  if (width <= 0 || height <= 0) {
    throw ValidationError(json_path.string() + ": field 'width'/'height' must be positive");
  }
  r.labels.y = field<std::vector<std::int8_t>>(j, "labels", json_path);
  const auto sal_classes = field<std::vector<int>>(j, "saliency_classes", json_path);
  const auto num_proposals = field<std::size_t>(j, "num_proposals", json_path);
  const auto feature_dim = field<std::size_t>(j, "feature_dim", json_path);
  const auto id_lists = field<std::vector<std::vector<SuperpixelId>>>(j, "proposals", json_path);
  if (id_lists.size() != num_proposals) {
    throw ValidationError(json_path.string() + ": field 'proposals': dimension mismatch, " +
                          std::to_string(id_lists.size()) + " lists for num_proposals " +
                          std::to_string(num_proposals));
  }
  if (feature_dim != static_cast<std::size_t>(manifest.feature_dim)) {
    throw ValidationError(json_path.string() + ": field 'feature_dim': dimension mismatch with manifest");
  }
  for (const auto& g : field<ordered_json>(j, "gt_boxes", json_path)) {
    const auto b = field<std::vector<int>>(g, "box", json_path);
    if (b.size() != 4) throw ValidationError(json_path.string() + ": field 'gt_boxes': box needs 4 ints");
    r.gt_boxes.push_back({field<int>(g, "class", json_path), Box{b[0], b[1], b[2], b[3]}});
  }

  ByteReader in(read_file(bin_path), bin_path.string());
  if (in.raw(kRecordMagic.size(), "magic") != std::string(kRecordMagic.data(), kRecordMagic.size())) {
    throw ValidationError(bin_path.string() + ": field 'magic': not a record blob");
  }
  if (in.u32("version") != static_cast<std::uint32_t>(kFormatVersion)) {
    throw ValidationError(bin_path.string() + ": field 'version': unsupported");
  }
  in.u32("reserved");

  const std::size_t pixels = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  const std::size_t expected =
      4 * (pixels + sal_classes.size() * pixels + num_proposals * feature_dim);
  if (in.remaining() != expected) {
    throw ValidationError(bin_path.string() + ": dimension mismatch, payload is " +
                          std::to_string(in.remaining()) + " bytes, header implies " +
                          std::to_string(expected));
  }
  std::vector<SuperpixelId> labels(pixels);
  for (auto& v : labels) v = in.u32("label grid");
  try {
    r.grid = SuperpixelGrid(width, height, std::move(labels));
  } catch (const ValidationError& e) {
    throw ValidationError(bin_path.string() + ": field 'label grid': " + e.what());
  }
  for (int c : sal_classes) {
    SaliencyMap m{c, width, height, std::vector<float>(pixels)};
    for (auto& v : m.values) v = in.f32("saliency");
    r.saliency.push_back(std::move(m));
  }
  std::vector<float> feats(num_proposals * feature_dim);
  for (auto& v : feats) v = in.f32("features");
  r.features = Matrix<float>(num_proposals, feature_dim, std::move(feats));

  r.proposals.reserve(num_proposals);
  for (std::size_t i = 0; i < id_lists.size(); ++i) {
    try {
      r.proposals.push_back(make_proposal(r.grid, id_lists[i]));
    } catch (const ValidationError& e) {
      throw ValidationError(json_path.string() + ": field 'proposals[" + std::to_string(i) +
                            "]': " + e.what());
    }
  }
  try {
    validate_record(r, manifest.num_classes, manifest.feature_dim);
  } catch (const ValidationError& e) {
    throw ValidationError(json_path.string() + ": " + e.what());
  }
  return r;
}

}  // namespace

void validate_manifest(const DatasetManifest& m) {
  if (m.num_classes < 1) throw ValidationError("manifest: field 'num_classes' must be >= 1");
  if (m.feature_dim < 1) throw ValidationError("manifest: field 'feature_dim' must be >= 1");
  if (m.class_names.size() != static_cast<std::size_t>(m.num_classes)) {
    throw ValidationError("manifest: field 'class_names' must have num_classes entries");
  }
  std::set<std::string> unique(m.class_names.begin(), m.class_names.end());
  if (unique.size() != m.class_names.size()) {
    throw ValidationError("manifest: field 'class_names' has duplicate entries");
  }
  std::set<std::string> stems(m.images.begin(), m.images.end());
  if (stems.size() != m.images.size()) {
    throw ValidationError("manifest: field 'images' has duplicate stems");
  }
}

fs::path resolve_manifest(const fs::path& path) {
  if (fs::is_directory(path)) return path / "manifest.json";
  return path;
}

Dataset load_dataset(const fs::path& manifest_path_in) {
  const fs::path manifest_path = resolve_manifest(manifest_path_in);
  const ordered_json j = parse_json(manifest_path);
  check_version(j, manifest_path);

  Dataset ds;
  ds.manifest.num_classes = field<int>(j, "num_classes", manifest_path);
  ds.manifest.feature_dim = field<int>(j, "feature_dim", manifest_path);
  ds.manifest.class_names = field<std::vector<std::string>>(j, "class_names", manifest_path);
  ds.manifest.images = field<std::vector<std::string>>(j, "images", manifest_path);
  ds.manifest.seed = field<std::uint64_t>(j, "seed", manifest_path);
  try {
    validate_manifest(ds.manifest);
  } catch (const ValidationError& e) {
    throw ValidationError(manifest_path.string() + ": " + e.what());
  }

  const fs::path dir = manifest_path.parent_path();
  ds.records.reserve(ds.manifest.images.size());
  for (const auto& stem : ds.manifest.images) {
    ds.records.push_back(read_record(dir, stem, ds.manifest));
  }
  return ds;
}

void save_dataset(const Dataset& ds, const fs::path& dir) {
  validate_manifest(ds.manifest);
  if (ds.records.size() != ds.manifest.images.size()) {
    throw ValidationError("save_dataset: manifest lists " +
                          std::to_string(ds.manifest.images.size()) + " images but " +
                          std::to_string(ds.records.size()) + " records were given");
  }
  for (const auto& r : ds.records) {
    validate_record(r, ds.manifest.num_classes, ds.manifest.feature_dim);
  }

  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError(dir.string() + ": cannot create directory (" + ec.message() + ")");
  if (!ds.records.empty()) {
    fs::create_directories(dir / "records", ec);
    if (ec) throw IoError((dir / "records").string() + ": cannot create directory");
  }

  ordered_json m;
  m["version"] = kFormatVersion;
  m["num_classes"] = ds.manifest.num_classes;
  m["feature_dim"] = ds.manifest.feature_dim;
  m["class_names"] = ds.manifest.class_names;
  m["images"] = ds.manifest.images;
  m["seed"] = ds.manifest.seed;
  write_file(dir / "manifest.json", m.dump(2) + "\n");

  for (std::size_t k = 0; k < ds.records.size(); ++k) {
    const auto& stem = ds.manifest.images[k];
    write_file(dir / "records" / (stem + ".json"), record_header(ds.records[k]).dump(2) + "\n");
    write_file(dir / "records" / (stem + ".bin"), record_blob(ds.records[k]));
  }
}

}  // namespace sgwsod
