#include <catch2/catch_amalgamated.hpp>

#include <cstring>
#include <vector>

#include "heliofield/checkpoint.hpp"
#include "heliofield/images.hpp"
#include "heliofield/rng.hpp"

#include "helpers.hpp"

using namespace heliofield;

TEST_CASE("checkpoint round trips through single precision", "[checkpoint]") {
  const std::string dir = testutil::temp_dir("ckpt_roundtrip");
  Checkpoint ckpt;
  ckpt.arch_digest = 0xdeadbeefcafef00dull;
  NamedTensor t;
  t.name = "head.layer1.weight";
  t.values = neural::Tensor<double>(2, 3);
  Rng rng(8);
  for (double& v : t.values.data) v = rng.normal();
  ckpt.tensors.push_back(t);

  ckpt.save(dir + "/model.swhp");
  const Checkpoint back = Checkpoint::load(dir + "/model.swhp");
  REQUIRE(back.arch_digest == ckpt.arch_digest);
  REQUIRE(back.tensors.size() == 1);
  REQUIRE(back.tensors[0].name == t.name);
  REQUIRE(back.tensors[0].values.shape == t.values.shape);
  for (std::size_t i = 0; i < t.values.size(); ++i) {
    // Values are stored as f32; the round trip lands exactly on the
    // nearest single-precision value.
    REQUIRE(back.tensors[0].values[i] ==
            static_cast<double>(static_cast<float>(t.values[i])));
  }
  // A second serialization of the loaded snapshot is byte-identical.
  REQUIRE(back.serialize() == ckpt.serialize());
}

TEST_CASE("checkpoint binary layout starts with magic and digest",
          "[checkpoint]") {
  Checkpoint ckpt;
  ckpt.arch_digest = 0x0102030405060708ull;
  const std::string bytes = ckpt.serialize();
  REQUIRE(bytes.substr(0, 4) == "SWHP");
  std::uint16_t version = 0;
  std::memcpy(&version, bytes.data() + 4, 2);
  REQUIRE(version == 1);
  std::uint64_t digest = 0;
  std::memcpy(&digest, bytes.data() + 6, 8);
  REQUIRE(digest == ckpt.arch_digest);
  std::uint32_t count = 0;
  std::memcpy(&count, bytes.data() + 14, 4);
  REQUIRE(count == 0);
}

TEST_CASE("missing tensors are reported by name", "[checkpoint]") {
  Checkpoint ckpt;
  REQUIRE(ckpt.find("head.layer1.weight") == nullptr);
  CHECK_THROWS_WITH(ckpt.require("head.layer1.weight"),
                    Catch::Matchers::ContainsSubstring("head.layer1.weight"));
}

TEST_CASE("head parameters rebuild from a snapshot", "[checkpoint]") {
  neural::HeadConfig cfg;
  cfg.kind = neural::HeadKind::kLinear;
  cfg.input_dim = 12;
  cfg.hidden = 8;
  cfg.validate();
  Rng rng(4);
  neural::HeadParams params = neural::HeadParams::random_init(cfg, rng);
  for (double& v : params.layers.back().weight.data) v = rng.normal();

  Checkpoint ckpt;
  append_head_tensors(params, ckpt.tensors);
  REQUIRE(ckpt.tensors.size() == 8);  // four layers, weight and bias each

  const neural::HeadParams restored = head_from_checkpoint(ckpt, cfg);
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    REQUIRE(restored.layers[l].weight.data == params.layers[l].weight.data);
    REQUIRE(restored.layers[l].bias.data == params.layers[l].bias.data);
  }

  neural::HeadConfig wider = cfg;
  wider.hidden = 16;
  CHECK_THROWS_AS(head_from_checkpoint(ckpt, wider), DataError);
}

TEST_CASE("backbone parameters rebuild from a snapshot", "[checkpoint]") {
  BackboneConfig cfg;
  cfg.geom = ImageGeometry{4, 4, 1};
  cfg.patch = 2;
  cfg.dim = 5;
  MockBackbone bb(cfg);
  Rng rng(6);
  bb.init_random(rng);

  Checkpoint ckpt;
  append_backbone_tensors(bb, ckpt.tensors);
  const MockBackbone restored = backbone_from_checkpoint(ckpt, cfg);
  REQUIRE(restored.weight.data == bb.weight.data);
  REQUIRE(restored.bias.data == bb.bias.data);

  BackboneConfig other = cfg;
  other.dim = 6;
  CHECK_THROWS_AS(backbone_from_checkpoint(ckpt, other), DataError);
  Checkpoint empty;
  CHECK_THROWS_AS(backbone_from_checkpoint(empty, cfg), DataError);
}

TEST_CASE("corrupt checkpoint files are rejected", "[checkpoint]") {
  const std::string dir = testutil::temp_dir("ckpt_corrupt");
  binio::write_binary_file(dir + "/bad.swhp", "SWEB\x01\x00junk");
  CHECK_THROWS_AS(Checkpoint::load(dir + "/bad.swhp"), DataError);
  CHECK_THROWS_AS(Checkpoint::load(dir + "/absent.swhp"), MissingInputError);
}

TEST_CASE("image sets round trip bit-exactly", "[images]") {
  const std::string dir = testutil::temp_dir("images_roundtrip");
  ImageSet set(ImageGeometry{4, 4, 2});
  Rng rng(12);
  for (std::int64_t key : {100, 200, 300}) {
    std::vector<float> px(set.geometry().pixel_count());
    for (auto& v : px) v = static_cast<float>(rng.normal());
    set.put(key, px);
  }
  set.save(dir + "/images.swim");
  const ImageSet back = ImageSet::load(dir + "/images.swim");
  REQUIRE(back.geometry() == set.geometry());
  REQUIRE(back.size() == 3);
  for (std::int64_t key : set.keys()) {
    const auto& a = set.get(key);
    const auto& b = back.get(key);
    REQUIRE(std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0);
  }
  REQUIRE(back.serialize() == set.serialize());
}

TEST_CASE("image set validates keys and shapes", "[images]") {
  ImageSet set(ImageGeometry{2, 2, 1});
  CHECK_THROWS_AS(set.put(1, {1.0f}), DataError);
  set.put(1, {1.0f, 2.0f, 3.0f, 4.0f});
  CHECK_THROWS_AS(set.get(2), DataError);
  CHECK(set.contains(1));
}
