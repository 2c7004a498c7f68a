#include "sgwsod/checkpoint.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iterator>

#include "sgwsod/errors.hpp"

namespace sgwsod {
namespace {

constexpr char kMagic[8] = {'S', 'G', 'W', 'S', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::string& s, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}
void put_u64(std::string& s, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

class Cursor {
 public:
  Cursor(const std::string& bytes, const std::string& origin) : bytes_(bytes), origin_(origin) {}
  std::uint64_t take(int n, const char* what) {
    if (pos_ + static_cast<std::size_t>(n) > bytes_.size()) {
      throw ValidationError(origin_ + ": truncated at " + what);
    }
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += static_cast<std::size_t>(n);
    return v;
  }
  std::uint32_t u32(const char* what) { return static_cast<std::uint32_t>(take(4, what)); }
  double f64(const char* what) { return std::bit_cast<double>(take(8, what)); }
  float f32(const char* what) { return std::bit_cast<float>(u32(what)); }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::string& bytes_;
  const std::string& origin_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_checkpoint(const ModelParams& params) {
  const ModelConfig& c = params.config;
  const auto views = tensors(params.values);
  std::string s(kMagic, sizeof kMagic);
  put_u32(s, kVersion);
  put_u32(s, static_cast<std::uint32_t>(views.size()));
  put_u32(s, static_cast<std::uint32_t>(c.feature_dim));
  put_u32(s, static_cast<std::uint32_t>(c.num_classes));
  put_u32(s, static_cast<std::uint32_t>(c.saliency_hidden));
  put_u32(s, c.saliency_weighting ? 1u : 0u);
  put_u32(s, static_cast<std::uint32_t>(c.trunk_widths.size()));
  for (int w : c.trunk_widths) put_u32(s, static_cast<std::uint32_t>(w));
  for (double v : {c.epsilon, c.lambda1, c.lambda2, c.lambda3}) put_u64(s, std::bit_cast<std::uint64_t>(v));
  for (const auto& v : views) {
    put_u32(s, static_cast<std::uint32_t>(v.shape.size()));
    for (std::size_t d : v.shape) put_u32(s, static_cast<std::uint32_t>(d));
  }
  for (const auto& v : views) {
    for (double x : v.data) put_u32(s, std::bit_cast<std::uint32_t>(static_cast<float>(x)));
  }
  return s;
}

ModelParams decode_checkpoint(const std::string& bytes, const std::string& origin) {
  if (bytes.size() < sizeof kMagic || bytes.compare(0, sizeof kMagic, kMagic, sizeof kMagic) != 0) {
    throw ValidationError(origin + ": not a checkpoint (bad magic)");
  }
  Cursor in(bytes, origin);
  for (std::size_t k = 0; k < sizeof kMagic; ++k) in.take(1, "magic");
  if (in.u32("version") != kVersion) throw ValidationError(origin + ": unsupported checkpoint version");
  const std::uint32_t count = in.u32("tensor count");

  ModelConfig c;
  c.feature_dim = static_cast<int>(in.u32("feature_dim"));
  c.num_classes = static_cast<int>(in.u32("num_classes"));
  c.saliency_hidden = static_cast<int>(in.u32("saliency_hidden"));
  c.saliency_weighting = in.u32("saliency_weighting") != 0;
  const std::uint32_t depth = in.u32("trunk depth");
  if (depth > 1024) throw ValidationError(origin + ": implausible trunk depth");
  c.trunk_widths.clear();
  for (std::uint32_t l = 0; l < depth; ++l) c.trunk_widths.push_back(static_cast<int>(in.u32("trunk width")));
  c.epsilon = in.f64("epsilon");
  c.lambda1 = in.f64("lambda1");
  c.lambda2 = in.f64("lambda2");
  c.lambda3 = in.f64("lambda3");
  validate_model_config(c);

  ModelParams p{c, zeros_like(c), zeros_like(c)};
  auto views = tensors(p.values);
  if (count != views.size()) throw ValidationError(origin + ": tensor count does not match config");
  for (const auto& v : views) {
    const std::uint32_t rank = in.u32("rank");
    if (rank != v.shape.size()) throw ValidationError(origin + ": shape mismatch for " + v.name);
    for (std::size_t d : v.shape) {
      if (in.u32("dim") != d) throw ValidationError(origin + ": shape mismatch for " + v.name);
    }
  }
  for (auto& v : views) {
    for (auto& x : v.data) {
      const float f = in.f32(v.name.c_str());
      if (!std::isfinite(f)) throw ValidationError(origin + ": non-finite value in " + v.name);
      x = f;
    }
  }
  if (!in.done()) throw ValidationError(origin + ": trailing bytes");
  return p;
}

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path) {
  const std::string bytes = encode_checkpoint(params);
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path.string() + ": cannot open for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError(path.string() + ": write failed");
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError(path.string() + ": missing file");
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes, path.string());
}

}  // namespace sgwsod
