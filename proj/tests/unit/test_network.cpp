#include <filesystem>

#include "cutie/netgen.hpp"
#include "cutie/network.hpp"
#include "doctest.h"

using namespace cutie;
namespace fs = std::filesystem;

namespace {

bool has_violation(const std::vector<Violation>& v, const std::string& text) {
  for (const auto& x : v)
    if (x.message.find(text) != std::string::npos) return true;
  return false;
}

}  // namespace

TEST_CASE("benchmark network validates against the default arch") {
  const NetworkDesc net = make_benchmark_network({});
  const auto violations = validate(net, ArchConfig{});
  for (const auto& v : violations)
    MESSAGE("layer ", v.layer, ": ", v.message);
  CHECK(violations.empty());
}

TEST_CASE("benchmark network dims chain as in the reference table") {
  const NetworkDesc net = make_benchmark_network({});
  const auto shapes = chain_shapes(net);
  REQUIRE(shapes.size() == 13);
  // (in_h, in_w, in_ch) per layer, pooling rows included.
  const uint32_t expected[13][3] = {
      {32, 32, 126}, {32, 32, 128}, {32, 32, 128}, {32, 32, 128},
      {16, 16, 128}, {16, 16, 128}, {16, 16, 128}, {8, 8, 128},
      {8, 8, 128},   {8, 8, 128},   {4, 4, 128},   {4, 4, 128},
      {1, 1, 128}};
  for (size_t i = 0; i < 13; ++i) {
    CHECK(shapes[i].in_h == expected[i][0]);
    CHECK(shapes[i].in_w == expected[i][1]);
    CHECK(shapes[i].in_ch == expected[i][2]);
  }
  CHECK(shapes.back().out_ch == 10);
}

TEST_CASE("validate flags kernel and channel overruns") {
  NetworkDesc net = make_benchmark_network({});
  net.layers[0].kh = net.layers[0].kw = 5;
  auto violations = validate(net, ArchConfig{});
  CHECK(has_violation(violations, "kernel exceeds K"));

  net = make_benchmark_network({});
  net.layers[1].out_ch = 256;
  net.layers[2].in_ch = 256;
  violations = validate(net, ArchConfig{});
  CHECK(has_violation(violations, "out_ch exceeds N_O"));
}

TEST_CASE("validate flags stride, pooling and input-size problems") {
  NetworkDesc net = make_benchmark_network({});
  net.layers[0].sh = 4;
  CHECK(has_violation(validate(net, ArchConfig{}), "stride outside"));

  net = make_benchmark_network({});
  net.layers.insert(net.layers.begin(), net.layers[3]);  // pool first
  CHECK(has_violation(validate(net, ArchConfig{}),
                      "pooling without preceding conv"));

  net = make_benchmark_network({});
  net.input_dims.h = 64;
  CHECK(has_violation(validate(net, ArchConfig{}), "exceeds I_H x I_W"));
}

TEST_CASE("op counts match the reference table") {
  LayerDesc l;
  l.kind = LayerKind::Conv2D;
  l.kh = l.kw = 3;
  l.in_ch = 126;
  l.out_ch = 128;
  CHECK(op_count(l, 32, 32) == 297271296);  // 297 MOp
  l.in_ch = 128;
  CHECK(op_count(l, 32, 32) == 301989888);  // 302 MOp
  CHECK(op_count(l, 16, 16) == 75497472);   // 75.5 MOp
  CHECK(op_count(l, 8, 8) == 18874368);     // 18.9 MOp
  CHECK(op_count(l, 4, 4) == 4718592);      // 4.7 MOp

  LayerDesc fc;
  fc.kind = LayerKind::FullyConnected;
  fc.in_ch = 128;
  fc.out_ch = 10;
  CHECK(op_count(fc, 1, 1) == 2560);  // 2.6 KOp

  // Summed network total stays within 1% of 1.1 GOp.
  const uint64_t total = 297271296ull + 2 * 301989888ull + 2 * 75497472ull +
                         2 * 18874368ull + 4718592ull + 2560ull;
  CHECK(total == 1094715904ull);
  CHECK(std::abs(static_cast<double>(total) - 1.1e9) / 1.1e9 < 0.01);
}

TEST_CASE("op_count is multiplicative in the output width") {
  LayerDesc l;
  l.kind = LayerKind::Conv2D;
  l.kh = l.kw = 3;
  l.in_ch = 16;
  l.out_ch = 32;
  CHECK(op_count(l, 8, 16) == 2 * op_count(l, 8, 8));
}

TEST_CASE("pooling layers are not counted") {
  LayerDesc pool;
  pool.kind = LayerKind::MaxPool;
  CHECK_THROWS_AS(op_count(pool, 16, 16), NotCounted);
}

TEST_CASE("conv output dims") {
  CHECK(conv_output_dims(32, 32, 3, 3, 1, 1, Padding::Full) ==
        std::pair<uint32_t, uint32_t>{32, 32});
  CHECK(conv_output_dims(32, 32, 3, 3, 2, 2, Padding::Full) ==
        std::pair<uint32_t, uint32_t>{16, 16});
  CHECK(conv_output_dims(5, 5, 3, 3, 1, 1, Padding::None) ==
        std::pair<uint32_t, uint32_t>{3, 3});
  CHECK_THROWS_AS(conv_output_dims(2, 2, 3, 3, 1, 1, Padding::None),
                  ShapeError);
}

TEST_CASE("manifest roundtrip preserves the network") {
  Rng rng(21);
  const NetworkDesc net = make_random_network(rng);
  const auto dir = fs::temp_directory_path() / "ctnet_rt";
  fs::create_directories(dir);
  const auto manifest = save_network(dir / "net.ctnet", net);
  const NetworkDesc loaded = load_network(manifest);

  REQUIRE(loaded.layers.size() == net.layers.size());
  CHECK(loaded.input_dims.h == net.input_dims.h);
  CHECK(loaded.input_dims.w == net.input_dims.w);
  CHECK(loaded.input_dims.c == net.input_dims.c);
  CHECK(loaded.encoder == net.encoder);
  for (size_t i = 0; i < net.layers.size(); ++i) {
    const LayerDesc& a = net.layers[i];
    const LayerDesc& b = loaded.layers[i];
    CHECK(a.kind == b.kind);
    CHECK(a.in_ch == b.in_ch);
    CHECK(a.out_ch == b.out_ch);
    CHECK(a.kh == b.kh);
    CHECK(a.sw == b.sw);
    CHECK(a.padding == b.padding);
    CHECK(a.depthwise == b.depthwise);
    CHECK(a.activation == b.activation);
    if (a.has_ternary_weights())
      CHECK(std::get<PackedTritTensor>(a.weights) ==
            std::get<PackedTritTensor>(b.weights));
    REQUIRE(a.bn.has_value() == b.bn.has_value());
    if (a.bn) {
      CHECK(a.bn->gamma == b.bn->gamma);
      CHECK(a.bn->mu == b.bn->mu);
      CHECK(a.bn->sigma2 == b.bn->sigma2);
    }
  }
  fs::remove_all(dir);
}
