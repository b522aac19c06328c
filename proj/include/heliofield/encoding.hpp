#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "heliofield/binio.hpp"
#include "heliofield/config.hpp"
#include "heliofield/constants.hpp"
#include "heliofield/errors.hpp"

namespace heliofield {

/// Multi-band sinusoidal position encoding over normalized coordinates,
/// plus the file-backed embedding store that pairs image keys with
/// precomputed embedding vectors.

inline double unit_lat(double lat_deg) {
  if (!(lat_deg >= -90.0 && lat_deg <= 90.0)) {
    throw DataError("latitude out of range [-90, 90]: " + std::to_string(lat_deg));
  }
  return lat_deg / 90.0;
}

inline double unit_lon(double lon_deg) {
  if (!(lon_deg >= 0.0 && lon_deg < 360.0)) {
    throw DataError("longitude out of range [0, 360): " + std::to_string(lon_deg));
  }
  return lon_deg / 180.0 - 1.0;
}

/// Appends [sin(2^0 pi x), cos(2^0 pi x), ..., sin(2^{L-1} pi x),
/// cos(2^{L-1} pi x)] to `out`.
inline void fourier_encode(double x, int bands, std::vector<double>& out) {
  if (bands < 1) throw ConfigError("encoding bands must be >= 1");
  if (!std::isfinite(x)) throw DataError("non-finite coordinate in encoding");
  double freq = constants::kPi;
  for (int b = 0; b < bands; ++b) {
    out.push_back(std::sin(freq * x));
    out.push_back(std::cos(freq * x));
    freq *= 2.0;
  }
}

inline std::vector<double> fourier_encode(double x, int bands) {
  std::vector<double> out;
  out.reserve(2 * static_cast<std::size_t>(bands));
  fourier_encode(x, bands, out);
  return out;
}

/// d/dx of each entry of fourier_encode(x, bands), same ordering.
inline std::vector<double> fourier_encode_derivative(double x, int bands) {
  std::vector<double> out;
  out.reserve(2 * static_cast<std::size_t>(bands));
  double freq = constants::kPi;
  for (int b = 0; b < bands; ++b) {
    out.push_back(freq * std::cos(freq * x));
    out.push_back(-freq * std::sin(freq * x));
    freq *= 2.0;
  }
  return out;
}

struct EncodingConfig {
  int bands = 10;
  int embedding_dim = 128;
  /// Coordinate names in concatenation order; each is one normalized scalar.
  std::vector<std::string> coords = {"sc_lat", "sc_lon", "fp_lat", "fp_lon"};

  [[nodiscard]] int coord_count() const { return static_cast<int>(coords.size()); }

  [[nodiscard]] int feature_dim() const {
    return embedding_dim + 2 * bands * coord_count();
  }

  static EncodingConfig from_config(const Config& cfg) {
    EncodingConfig e;
    e.bands = static_cast<int>(cfg.i64("encoding.bands"));
    e.embedding_dim = static_cast<int>(cfg.i64("encoding.embedding_dim"));
    e.coords = cfg.list_str("encoding.coords");
    if (e.bands < 1) throw ConfigError("encoding.bands must be >= 1");
    if (e.embedding_dim < 1) throw ConfigError("encoding.embedding_dim must be >= 1");
    if (e.coords.empty()) throw ConfigError("encoding.coords must not be empty");
    return e;
  }
};

/// [embedding || gamma(c_1) || ... || gamma(c_C)].
inline std::vector<double> build_feature(const std::vector<double>& embedding,
                                         const std::vector<double>& norm_coords,
                                         const EncodingConfig& cfg) {
  if (static_cast<int>(embedding.size()) != cfg.embedding_dim) {
    throw DataError("embedding dimension " + std::to_string(embedding.size()) +
                    " does not match configured " +
                    std::to_string(cfg.embedding_dim));
  }
  if (static_cast<int>(norm_coords.size()) != cfg.coord_count()) {
    throw DataError("coordinate count " + std::to_string(norm_coords.size()) +
                    " does not match configured " +
                    std::to_string(cfg.coord_count()));
  }
  std::vector<double> feature = embedding;
  feature.reserve(static_cast<std::size_t>(cfg.feature_dim()));
  for (double c : norm_coords) fourier_encode(c, cfg.bands, feature);
  return feature;
}

/// In-memory embedding table keyed by image timestamp, backed by the
/// binary store format below.
class EmbeddingStore {
 public:
  EmbeddingStore() = default;

  EmbeddingStore(int dim) : dim_(dim) {
    if (dim < 1) throw ConfigError("embedding dimension must be >= 1");
  }

  [[nodiscard]] int dim() const { return dim_; }
  [[nodiscard]] std::size_t size() const { return rows_.size(); }

  [[nodiscard]] std::vector<std::int64_t> keys() const {
    std::vector<std::int64_t> out;
    out.reserve(rows_.size());
    for (const auto& [k, _] : rows_) out.push_back(k);
    return out;
  }

  [[nodiscard]] bool contains(std::int64_t key) const {
    return rows_.count(key) != 0;
  }

  void put(std::int64_t key, const std::vector<float>& row) {
    if (static_cast<int>(row.size()) != dim_) {
      throw DataError("embedding row has dimension " +
                      std::to_string(row.size()) + ", store expects " +
                      std::to_string(dim_));
    }
    rows_[key] = row;
  }

  [[nodiscard]] const std::vector<float>& get(std::int64_t key) const {
    auto it = rows_.find(key);
    if (it == rows_.end()) {
      throw DataError("no embedding stored for image key " + std::to_string(key));
    }
    return it->second;
  }

  [[nodiscard]] std::vector<double> get_f64(std::int64_t key) const {
    const std::vector<float>& row = get(key);
    return {row.begin(), row.end()};
  }

  /// Where each key's payload row starts in the serialized file; the
  /// image index CSV copies these offsets verbatim.
  [[nodiscard]] std::vector<std::pair<std::int64_t, std::uint64_t>>
  index_entries() const {
    constexpr std::uint64_t header = 4 + 2 + 4 + 4;
    const std::uint64_t payload_start = header + 16ull * rows_.size();
    const std::uint64_t row_bytes = 4ull * static_cast<std::uint64_t>(dim_);
    std::vector<std::pair<std::int64_t, std::uint64_t>> out;
    out.reserve(rows_.size());
    std::uint64_t i = 0;
    for (const auto& [key, _] : rows_) {
      out.emplace_back(key, payload_start + i * row_bytes);
      ++i;
    }
    return out;
  }

  /// Layout: magic "SWEB", u16 version = 1, u32 count, u32 dim, then
  /// count index records (i64 image_key_utc, u64 byte offset from file
  /// start), then payload rows of dim little-endian f32 values.
  [[nodiscard]] std::string serialize() const {
    std::string out;
    out += "SWEB";
    binio::put_u16(out, 1);
    binio::put_u32(out, static_cast<std::uint32_t>(rows_.size()));
    binio::put_u32(out, static_cast<std::uint32_t>(dim_));
    for (const auto& [key, offset] : index_entries()) {
      binio::put_i64(out, key);
      binio::put_u64(out, offset);
    }
    for (const auto& [_, row] : rows_) {
      for (float v : row) binio::put_f32(out, v);
    }
    return out;
  }

  void save(const std::string& path) const {
    binio::write_binary_file(path, serialize());
  }

  static EmbeddingStore load(const std::string& path) {
    std::string buf = binio::read_binary_file(path);
    binio::Reader r(buf, path);
    r.expect_magic("SWEB");
    std::uint16_t version = r.u16();
    if (version != 1) {
      throw DataError(path + ": unsupported embedding store version " +
                      std::to_string(version));
    }
    std::uint32_t count = r.u32();
    std::uint32_t dim = r.u32();
    if (dim < 1) throw DataError(path + ": embedding dimension is zero");
    EmbeddingStore store(static_cast<int>(dim));
    std::vector<std::pair<std::int64_t, std::uint64_t>> index;
    index.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
      std::int64_t key = r.i64();
      std::uint64_t offset = r.u64();
      index.emplace_back(key, offset);
    }
    for (const auto& [key, offset] : index) {
      r.seek(offset);
      std::vector<float> row(dim);
      for (std::uint32_t j = 0; j < dim; ++j) row[j] = r.f32();
      if (store.contains(key)) {
        throw DataError(path + ": duplicate image key " + std::to_string(key));
      }
      store.put(key, row);
    }
    return store;
  }

 private:
  int dim_ = 0;
  std::map<std::int64_t, std::vector<float>> rows_;
};

/// Common lookup contract for the file-backed store and the trainable
/// backbone; the training loop only sees this surface.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  [[nodiscard]] virtual int dim() const = 0;
  [[nodiscard]] virtual std::vector<double> embedding(std::int64_t image_key) const = 0;
};

class StoreEmbeddingProvider final : public EmbeddingProvider {
 public:
  explicit StoreEmbeddingProvider(EmbeddingStore store) : store_(std::move(store)) {}

  [[nodiscard]] int dim() const override { return store_.dim(); }

  [[nodiscard]] std::vector<double> embedding(std::int64_t image_key) const override {
    return store_.get_f64(image_key);
  }

  [[nodiscard]] const EmbeddingStore& store() const { return store_; }

 private:
  EmbeddingStore store_;
};

}  // namespace heliofield
