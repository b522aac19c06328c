#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "heliofield/binio.hpp"
#include "heliofield/config.hpp"
#include "heliofield/errors.hpp"

namespace heliofield {

struct ImageGeometry {
  int height = 32;
  int width = 32;
  int channels = 10;

  [[nodiscard]] std::size_t pixel_count() const {
    return static_cast<std::size_t>(height) * width * channels;
  }

  bool operator==(const ImageGeometry&) const = default;

  static ImageGeometry from_config(const Config& cfg) {
    ImageGeometry g;
    g.height = static_cast<int>(cfg.i64("backbone.image_h"));
    g.width = static_cast<int>(cfg.i64("backbone.image_w"));
    g.channels = static_cast<int>(cfg.i64("backbone.image_c"));
    if (g.height < 1 || g.width < 1 || g.channels < 1) {
      throw ConfigError("image dimensions must be positive");
    }
    return g;
  }
};

/// Timestamp-keyed image tensors, stored flat in (row, column, channel)
/// order. Backing file layout mirrors the embedding store: magic "SWIM",
/// u16 version = 1, u32 count, u32 height, u32 width, u32 channels, then
/// count index records (i64 image_key_utc, u64 byte offset from file
/// start), then payload rows of little-endian f32 values.
class ImageSet {
 public:
  ImageSet() = default;
  explicit ImageSet(ImageGeometry geom) : geom_(geom) {}

  [[nodiscard]] const ImageGeometry& geometry() const { return geom_; }
  [[nodiscard]] std::size_t size() const { return images_.size(); }

  [[nodiscard]] std::vector<std::int64_t> keys() const {
    std::vector<std::int64_t> out;
    out.reserve(images_.size());
    for (const auto& [k, _] : images_) out.push_back(k);
    return out;
  }

  [[nodiscard]] bool contains(std::int64_t key) const {
    return images_.count(key) != 0;
  }

  void put(std::int64_t key, std::vector<float> pixels) {
    if (pixels.size() != geom_.pixel_count()) {
      throw DataError("image has " + std::to_string(pixels.size()) +
                      " values, geometry expects " +
                      std::to_string(geom_.pixel_count()));
    }
    images_[key] = std::move(pixels);
  }

  [[nodiscard]] const std::vector<float>& get(std::int64_t key) const {
    auto it = images_.find(key);
    if (it == images_.end()) {
      throw DataError("no image stored for key " + std::to_string(key));
    }
    return it->second;
  }

  [[nodiscard]] std::string serialize() const {
    std::string out;
    out += "SWIM";
    binio::put_u16(out, 1);
    binio::put_u32(out, static_cast<std::uint32_t>(images_.size()));
    binio::put_u32(out, static_cast<std::uint32_t>(geom_.height));
    binio::put_u32(out, static_cast<std::uint32_t>(geom_.width));
    binio::put_u32(out, static_cast<std::uint32_t>(geom_.channels));
    const std::uint64_t payload_start = out.size() + 16ull * images_.size();
    const std::uint64_t row_bytes = 4ull * geom_.pixel_count();
    std::uint64_t i = 0;
    for (const auto& [key, _] : images_) {
      binio::put_i64(out, key);
      binio::put_u64(out, payload_start + i * row_bytes);
      ++i;
    }
    for (const auto& [_, pixels] : images_) {
      for (float v : pixels) binio::put_f32(out, v);
    }
    return out;
  }

  void save(const std::string& path) const {
    binio::write_binary_file(path, serialize());
  }

  static ImageSet load(const std::string& path) {
    std::string buf = binio::read_binary_file(path);
    binio::Reader r(buf, path);
    r.expect_magic("SWIM");
    std::uint16_t version = r.u16();
    if (version != 1) {
      throw DataError(path + ": unsupported image file version " +
                      std::to_string(version));
    }
    std::uint32_t count = r.u32();
    ImageGeometry geom;
    geom.height = static_cast<int>(r.u32());
    geom.width = static_cast<int>(r.u32());
    geom.channels = static_cast<int>(r.u32());
    if (geom.pixel_count() == 0) throw DataError(path + ": empty image geometry");
    ImageSet set(geom);
    std::vector<std::pair<std::int64_t, std::uint64_t>> index;
    index.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
      std::int64_t key = r.i64();
      std::uint64_t offset = r.u64();
      index.emplace_back(key, offset);
    }
    for (const auto& [key, offset] : index) {
      r.seek(offset);
      std::vector<float> pixels(geom.pixel_count());
      for (float& v : pixels) v = r.f32();
      if (set.contains(key)) {
        throw DataError(path + ": duplicate image key " + std::to_string(key));
      }
      set.put(key, std::move(pixels));
    }
    return set;
  }

 private:
  ImageGeometry geom_;
  std::map<std::int64_t, std::vector<float>> images_;
};

}  // namespace heliofield
