#include "pyrabow/descriptor_cache.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "pyrabow/error.hpp"

namespace pyrabow {
namespace {

constexpr char kMagic[4] = {'B', 'V', 'W', 'D'};

void put_u32(std::vector<char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_f32(std::vector<char>& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }

class Reader {
 public:
  Reader(std::vector<char> bytes, std::string name)
      : bytes_(std::move(bytes)), name_(std::move(name)) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i]))
           << (8 * i);
    pos_ += 4;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }

  void expect_magic() {
    need(4);
    if (std::memcmp(bytes_.data(), kMagic, 4) != 0)
      throw Error(name_ + ": not a descriptor cache (bad magic)");
    pos_ = 4;
  }

  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw Error(name_ + ": descriptor cache truncated");
  }

  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  std::vector<char> bytes_;
  std::string name_;
  std::size_t pos_ = 0;
};

}  // namespace

void write_descriptor_cache(const std::filesystem::path& path,
                            std::span<const CachedImage> images) {
  std::vector<char> out(std::begin(kMagic), std::end(kMagic));
  put_u32(out, kDescriptorCacheVersion);
  put_u32(out, static_cast<std::uint32_t>(images.size()));
  for (const auto& img : images) {
    const auto& f = img.features;
    put_u32(out, img.record_index);
    put_u32(out, static_cast<std::uint32_t>(f.keypoints.size()));
    put_u32(out, static_cast<std::uint32_t>(kDescriptorDim));
    for (const auto& kp : f.keypoints) {
      put_f32(out, kp.x);
      put_f32(out, kp.y);
      put_f32(out, kp.scale);
    }
    for (const auto& d : f.descriptors)
      for (float v : d) put_f32(out, v);
  }

  // Write-then-rename so a crashed run never leaves a half-written cache.
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw Error("cannot write " + tmp.string());
    os.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!os) throw Error("cannot write " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::vector<CachedImage> read_descriptor_cache(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open descriptor cache " + path.string());
  Reader rd({std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()},
            path.string());
  rd.expect_magic();
  const auto version = rd.u32();
  if (version != kDescriptorCacheVersion)
    throw Error(path.string() + ": unsupported descriptor cache version " +
                std::to_string(version));
  const auto count = rd.u32();
  std::vector<CachedImage> images;
  images.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    CachedImage img;
    img.record_index = rd.u32();
    const auto n = rd.u32();
    const auto dim = rd.u32();
    if (dim != kDescriptorDim)
      throw Error(path.string() + ": descriptor dim " + std::to_string(dim) +
                  " != 128");
    rd.need(static_cast<std::size_t>(n) * (3 + dim) * 4);
    img.features.keypoints.resize(n);
    for (auto& kp : img.features.keypoints) {
      kp.x = rd.f32();
      kp.y = rd.f32();
      kp.scale = rd.f32();
    }
    img.features.descriptors.resize(n);
    for (auto& d : img.features.descriptors)
      for (float& v : d) v = rd.f32();
    images.push_back(std::move(img));
  }
  if (!rd.at_end()) throw Error(path.string() + ": trailing bytes in descriptor cache");
  return images;
}

}  // namespace pyrabow
