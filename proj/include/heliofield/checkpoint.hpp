#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "heliofield/backbone.hpp"
#include "heliofield/binio.hpp"
#include "heliofield/errors.hpp"
#include "heliofield/nn/heads.hpp"
#include "heliofield/nn/tensor.hpp"

namespace heliofield {

struct NamedTensor {
  std::string name;
  neural::Tensor<double> values;
};

/// Parameter snapshot. Layout: magic "SWHP", u16 version = 1, u64
/// architecture digest, u32 tensor count, then per tensor: u16 name
/// length, name bytes, u8 rank, rank u32 extents, and the row-major
/// payload as little-endian f32. Values are stored in single precision;
/// loading widens back to double.
struct Checkpoint {
  std::uint64_t arch_digest = 0;
  std::vector<NamedTensor> tensors;

  [[nodiscard]] const NamedTensor* find(const std::string& name) const {
    for (const NamedTensor& t : tensors) {
      if (t.name == name) return &t;
    }
    return nullptr;
  }

  [[nodiscard]] const neural::Tensor<double>& require(const std::string& name) const {
    const NamedTensor* t = find(name);
    if (t == nullptr) throw DataError("checkpoint is missing tensor '" + name + "'");
    return t->values;
  }

  [[nodiscard]] std::string serialize() const {
    std::string out;
    out += "SWHP";
    binio::put_u16(out, 1);
    binio::put_u64(out, arch_digest);
    binio::put_u32(out, static_cast<std::uint32_t>(tensors.size()));
    for (const NamedTensor& t : tensors) {
      if (t.name.size() > 0xffff) throw DataError("checkpoint tensor name too long");
      binio::put_u16(out, static_cast<std::uint16_t>(t.name.size()));
      out += t.name;
      if (t.values.shape.size() > 0xff) throw DataError("checkpoint tensor rank too high");
      out.push_back(static_cast<char>(t.values.shape.size()));
      for (std::size_t extent : t.values.shape) {
        binio::put_u32(out, static_cast<std::uint32_t>(extent));
      }
      for (double v : t.values.data) binio::put_f32(out, static_cast<float>(v));
    }
    return out;
  }

  void save(const std::string& path) const {
    binio::write_binary_file(path, serialize());
  }

  static Checkpoint load(const std::string& path) {
    std::string buf = binio::read_binary_file(path);
    binio::Reader r(buf, path);
    r.expect_magic("SWHP");
    std::uint16_t version = r.u16();
    if (version != 1) {
      throw DataError(path + ": unsupported checkpoint version " +
                      std::to_string(version));
    }
    Checkpoint ckpt;
    ckpt.arch_digest = r.u64();
    std::uint32_t count = r.u32();
    ckpt.tensors.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
      NamedTensor t;
      std::uint16_t name_len = r.u16();
      t.name = r.bytes(name_len);
      std::uint8_t rank = r.u8();
      std::vector<std::size_t> shape(rank);
      for (std::uint8_t d = 0; d < rank; ++d) shape[d] = r.u32();
      t.values = neural::Tensor<double>(shape);
      for (double& v : t.values.data) v = r.f32();
      ckpt.tensors.push_back(std::move(t));
    }
    return ckpt;
  }
};

inline void append_head_tensors(const neural::HeadParams& params,
                                std::vector<NamedTensor>& out) {
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const std::string base = "head.layer" + std::to_string(l + 1);
    out.push_back({base + ".weight", params.layers[l].weight});
    out.push_back({base + ".bias", params.layers[l].bias});
  }
}

inline void append_backbone_tensors(const MockBackbone& backbone,
                                    std::vector<NamedTensor>& out) {
  out.push_back({"backbone.weight", backbone.weight});
  out.push_back({"backbone.bias", backbone.bias});
}

inline neural::HeadParams head_from_checkpoint(const Checkpoint& ckpt,
                                               const neural::HeadConfig& cfg) {
  neural::HeadParams params = neural::HeadParams::shaped(cfg);
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const std::string base = "head.layer" + std::to_string(l + 1);
    const neural::Tensor<double>& w = ckpt.require(base + ".weight");
    const neural::Tensor<double>& b = ckpt.require(base + ".bias");
    if (!w.same_shape(params.layers[l].weight) ||
        !b.same_shape(params.layers[l].bias)) {
      throw DataError("checkpoint layer " + std::to_string(l + 1) +
                      " shape does not match the configured head");
    }
    params.layers[l].weight = w;
    params.layers[l].bias = b;
  }
  return params;
}

inline MockBackbone backbone_from_checkpoint(const Checkpoint& ckpt,
                                             const BackboneConfig& cfg) {
  MockBackbone backbone(cfg);
  const neural::Tensor<double>& w = ckpt.require("backbone.weight");
  const neural::Tensor<double>& b = ckpt.require("backbone.bias");
  if (!w.same_shape(backbone.weight) || !b.same_shape(backbone.bias)) {
    throw DataError("checkpoint backbone shape does not match configuration");
  }
  backbone.weight = w;
  backbone.bias = b;
  return backbone;
}

}  // namespace heliofield
