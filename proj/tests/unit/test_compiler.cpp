#include <cmath>

#include "cutie/compiler.hpp"
#include "cutie/golden.hpp"
#include "cutie/netgen.hpp"
#include "cutie/rng.hpp"
#include "doctest.h"

using namespace cutie;

namespace {

LayerDesc conv_with_bn(uint32_t in_ch, uint32_t out_ch, uint32_t k,
                       double gamma, double beta, double mu, double sigma2,
                       double eps = 0.0) {
  LayerDesc l;
  l.kind = LayerKind::Conv2D;
  l.in_ch = in_ch;
  l.out_ch = out_ch;
  l.kh = l.kw = k;
  l.padding = Padding::Full;
  l.bn = BatchNorm{};
  l.bn->gamma.assign(out_ch, gamma);
  l.bn->beta.assign(out_ch, beta);
  l.bn->mu.assign(out_ch, mu);
  l.bn->sigma2.assign(out_ch, sigma2);
  l.bn->eps.assign(out_ch, eps);
  l.activation = Activation::Hardtanh;
  return l;
}

// The real-valued reference the integer thresholds must reproduce.
int8_t float_reference(double a, double gamma, double beta, double mu,
                       double s) {
  const double bn = gamma * (a - mu) / s + beta;
  const double y = std::clamp(bn, -1.0, 1.0);
  return golden::ternarize_float(y);
}

}  // namespace

TEST_CASE("fold thresholds: unit batch-norm") {
  const LayerDesc l = conv_with_bn(1, 1, 1, 1.0, 0.0, 0.0, 1.0);
  const auto pairs = fold_thresholds(l);
  REQUIRE(pairs.size() == 1);
  CHECK(pairs[0].lo == 0);
  CHECK(pairs[0].hi == 1);
  CHECK(apply_thresholds(0, pairs[0]) == 0);
  CHECK(apply_thresholds(1, pairs[0]) == 1);
  CHECK(apply_thresholds(-1, pairs[0]) == -1);
}

TEST_CASE("fold thresholds: worked example with scaling") {
  // gamma=2, beta=0.5, mu=3, sigma^2+eps=4 -> t_hi = 3, t_lo = 2.
  const LayerDesc l = conv_with_bn(4, 1, 3, 2.0, 0.5, 3.0, 4.0);
  const auto pairs = fold_thresholds(l);
  CHECK(pairs[0].hi == 3);
  CHECK(pairs[0].lo == 2);
  for (int a = -10; a <= 10; ++a)
    CHECK(apply_thresholds(a, pairs[0]) ==
          float_reference(a, 2.0, 0.5, 3.0, 2.0));
}

TEST_CASE("fold thresholds match the float reference exhaustively") {
  Rng rng(101);
  for (int trial = 0; trial < 200; ++trial) {
    const double gamma = rng.uniform(0.05, 4.0);
    const double beta = rng.uniform(-2.0, 2.0);
    const double mu = rng.uniform(-40.0, 40.0);
    const double sigma2 = rng.uniform(0.01, 400.0);
    const LayerDesc l = conv_with_bn(16, 1, 3, gamma, beta, mu, sigma2);
    const auto pairs = fold_thresholds(l);
    const double s = std::sqrt(sigma2);
    const int64_t range = 3 * 3 * 16;
    for (int64_t a = -range; a <= range; ++a)
      REQUIRE(apply_thresholds(a, pairs[0]) ==
              float_reference(static_cast<double>(a), gamma, beta, mu, s));
  }
}

TEST_CASE("fold thresholds clamp to the accumulator range") {
  // A tiny gamma pushes the raw thresholds far outside the reachable range.
  const LayerDesc l = conv_with_bn(16, 1, 3, 1e-6, 0.0, 0.0, 400.0);
  const auto pairs = fold_thresholds(l);
  const int32_t bound = 3 * 3 * 16 + 1;
  CHECK(pairs[0].hi <= bound);
  CHECK(pairs[0].lo >= -bound);
  CHECK(pairs[0].lo <= pairs[0].hi);
}

TEST_CASE("fold thresholds reject degenerate and unnormalized gamma") {
  CHECK_THROWS_AS(fold_thresholds(conv_with_bn(1, 1, 1, 0.0, 0, 0, 1)),
                  DegenerateChannel);
  CHECK_THROWS_AS(fold_thresholds(conv_with_bn(1, 1, 1, -1.0, 0, 0, 1)),
                  Error);
}

TEST_CASE("normalize_gamma_sign flips weights and parameters") {
  Rng rng(55);
  LayerDesc l = conv_with_bn(3, 2, 3, 1.0, 0.1, 2.0, 1.0);
  l.bn->gamma[1] = -1.5;
  l.bn->mu[1] = 4.0;
  l.weights = make_random_kernels(rng, 2, 3, 3, 3, 0.3);
  const auto orig = std::get<PackedTritTensor>(l.weights).unpack();

  const LayerDesc norm = normalize_gamma_sign(l);
  CHECK(norm.bn->gamma[0] == 1.0);
  CHECK(norm.bn->gamma[1] == 1.5);
  CHECK(norm.bn->mu[1] == -4.0);
  CHECK(norm.bn->beta[1] == l.bn->beta[1]);
  const auto flipped = std::get<PackedTritTensor>(norm.weights).unpack();
  const size_t ksize = 27;
  for (size_t i = 0; i < ksize; ++i) {
    CHECK(flipped[i] == orig[i]);                  // channel 0 untouched
    CHECK(flipped[ksize + i] == -orig[ksize + i]);  // channel 1 negated
  }

  // All-positive gamma leaves the layer untouched.
  const LayerDesc same = normalize_gamma_sign(norm);
  CHECK(std::get<PackedTritTensor>(same.weights).unpack() == flipped);

  // All-zero kernels stay all-zero under negation.
  LayerDesc zl = conv_with_bn(1, 1, 1, -1.0, 0.0, 0.0, 1.0);
  zl.weights = PackedTritTensor::zeros({1, 1, 1, 1});
  const LayerDesc zn = normalize_gamma_sign(zl);
  CHECK(std::get<PackedTritTensor>(zn.weights).unpack() ==
        std::vector<int8_t>{0});
  CHECK(zn.bn->gamma[0] == 1.0);
}

TEST_CASE("negative-gamma channels compile to an equivalent program") {
  Rng rng(77);
  for (int trial = 0; trial < 20; ++trial) {
    NetworkDesc net;
    net.input_dims = {5, 5, 3};
    LayerDesc l = conv_with_bn(3, 4, 3, 1.0, 0.0, 0.0, 4.0);
    for (uint32_t c = 0; c < 4; ++c) {
      l.bn->gamma[c] = (c % 2 ? -1.0 : 1.0) * rng.uniform(0.5, 2.0);
      l.bn->beta[c] = rng.uniform(-1.0, 1.0);
      l.bn->mu[c] = rng.uniform(-5.0, 5.0);
    }
    l.weights = make_random_kernels(rng, 4, 3, 3, 3, 0.3);
    net.layers = {l};

    const CompiledProgram prog = emit_program(net, ArchConfig{});
    for (int i = 0; i < 5; ++i) {
      const auto input = make_random_input(rng, 5, 5, 3, 0.3);
      CHECK(golden::ref_run(prog, input) == golden::ref_run(net, input));
    }
  }
}

TEST_CASE("fuse_pooling marks the instruction and scales avg thresholds") {
  NetworkDesc net;
  net.input_dims = {8, 8, 4};
  LayerDesc conv = conv_with_bn(4, 4, 3, 1.0, 0.0, 0.0, 16.0);
  Rng rng(5);
  conv.weights = make_random_kernels(rng, 4, 3, 3, 4, 0.3);

  LayerDesc maxpool;
  maxpool.kind = LayerKind::MaxPool;
  maxpool.kh = maxpool.kw = 2;

  net.layers = {conv, maxpool};
  const CompiledProgram with_max = emit_program(net, ArchConfig{});
  REQUIRE(with_max.instrs.size() == 1);
  CHECK(with_max.instrs[0].pool == PoolKind::Max);

  net.layers = {conv};
  const CompiledProgram plain = emit_program(net, ArchConfig{});
  CHECK(plain.instrs[0].pool == PoolKind::None);
  // Max pooling leaves the thresholds untouched.
  for (uint32_t c = 0; c < 4; ++c)
    CHECK(with_max.thresholds[c] == plain.thresholds[c]);

  LayerDesc avgpool;
  avgpool.kind = LayerKind::AvgPool;
  avgpool.kh = avgpool.kw = 4;
  net.layers = {conv, avgpool};
  const CompiledProgram with_avg = emit_program(net, ArchConfig{});
  CHECK(with_avg.instrs[0].pool == PoolKind::Avg);
  for (uint32_t c = 0; c < 4; ++c) {
    CHECK(with_avg.thresholds[c].hi == 16 * plain.thresholds[c].hi);
    CHECK(with_avg.thresholds[c].lo == 16 * plain.thresholds[c].lo);
  }
}

TEST_CASE("pooling without a preceding conv is rejected") {
  NetworkDesc net;
  net.input_dims = {4, 4, 2};
  LayerDesc pool;
  pool.kind = LayerKind::MaxPool;
  pool.kh = pool.kw = 2;
  pool.in_ch = pool.out_ch = 2;
  net.layers = {pool};
  CHECK_THROWS_AS(emit_program(net, ArchConfig{}), UnsupportedGraph);
}

TEST_CASE("lower_dense maps the classifier onto the weight buffer") {
  Rng rng(9);
  LayerDesc fc;
  fc.kind = LayerKind::FullyConnected;
  fc.in_ch = 128;
  fc.out_ch = 10;
  {
    std::vector<int8_t> w(1280);
    for (auto& t : w) t = rng.trit(0.4);
    fc.weights = PackedTritTensor::from_values({10, 128}, w);
  }
  const LayerDesc low = lower_dense(fc, ArchConfig{});
  CHECK(low.kind == LayerKind::Conv2D);
  CHECK(low.kh == 1);
  CHECK(low.in_ch == 128);
  CHECK(low.out_ch == 10);

  // 1152 inputs exactly fill the K*K*N_I buffer.
  LayerDesc big;
  big.kind = LayerKind::FullyConnected;
  big.in_ch = 1152;
  big.out_ch = 128;
  {
    std::vector<int8_t> w(static_cast<size_t>(1152) * 128);
    for (auto& t : w) t = rng.trit(0.4);
    big.weights = PackedTritTensor::from_values({128, 1152}, w);
  }
  const LayerDesc lowered = lower_dense(big, ArchConfig{});
  CHECK(lowered.kh == 3);
  CHECK(lowered.in_ch == 128);
  CHECK(std::get<PackedTritTensor>(lowered.weights).count() ==
        128ull * 1152);

  LayerDesc oversize;
  oversize.kind = LayerKind::FullyConnected;
  oversize.in_ch = 2000;
  oversize.out_ch = 10;
  CHECK_THROWS_AS(lower_dense(oversize, ArchConfig{}), UnsupportedGraph);
}

TEST_CASE("lower_depthwise expands to one-hot kernels") {
  Rng rng(31);
  LayerDesc dw;
  dw.kind = LayerKind::Conv2D;
  dw.depthwise = true;
  dw.in_ch = dw.out_ch = 6;
  dw.kh = dw.kw = 3;
  dw.padding = Padding::Full;
  std::vector<int8_t> taps(6 * 9);
  for (auto& t : taps) t = rng.trit(0.2);
  dw.weights = PackedTritTensor::from_values({6, 3, 3, 1}, taps);

  const LayerDesc full = lower_depthwise(dw);
  const auto w = std::get<PackedTritTensor>(full.weights).unpack();
  for (uint32_t o = 0; o < 6; ++o)
    for (uint32_t t = 0; t < 9; ++t)
      for (uint32_t ci = 0; ci < 6; ++ci) {
        const int8_t v = w[(o * 9 + t) * 6 + ci];
        if (ci == o)
          CHECK(v == taps[o * 9 + t]);
        else
          CHECK(v == 0);
      }

  LayerDesc bad = dw;
  bad.out_ch = 4;
  CHECK_THROWS_AS(lower_depthwise(bad), UnsupportedGraph);
}

TEST_CASE("depthwise lowering is equivalent on the golden model") {
  Rng rng(32);
  NetworkDesc net;
  net.input_dims = {6, 6, 5};
  LayerDesc dw = conv_with_bn(5, 5, 3, 1.0, 0.0, 0.0, 4.0);
  dw.depthwise = true;
  std::vector<int8_t> taps(5 * 9);
  for (auto& t : taps) t = rng.trit(0.2);
  dw.weights = PackedTritTensor::from_values({5, 3, 3, 1}, taps);
  net.layers = {dw};

  NetworkDesc lowered_net = net;
  lowered_net.layers[0] = lower_depthwise(dw);

  const auto prog = emit_program(net, ArchConfig{});
  for (int i = 0; i < 10; ++i) {
    const auto input = make_random_input(rng, 6, 6, 5, 0.3);
    const auto a = golden::ref_run(prog, input);
    const auto b = golden::ref_run(lowered_net, input);
    CHECK(a == b);
  }
}

TEST_CASE("identity depthwise passes the input through pre-threshold") {
  golden::RefTensor in(4, 4, 3);
  Rng rng(33);
  for (auto& v : in.v) v = rng.trit(0.2);
  // Center-tap identity kernels.
  std::vector<int8_t> kernels(3 * 9 * 3, 0);
  for (uint32_t c = 0; c < 3; ++c) kernels[(c * 9 + 4) * 3 + c] = 1;
  const auto acc = golden::ref_conv(in, kernels, 3, 3, 3, 1, 1, true);
  CHECK(acc.v == in.v);
}

TEST_CASE("emit_program on the benchmark network") {
  const NetworkDesc net = make_benchmark_network({});
  ArchConfig arch;
  arch.l = 9;  // eight conv stages plus the classifier
  const CompiledProgram prog = emit_program(net, arch);
  REQUIRE(prog.instrs.size() == 9);
  CHECK(prog.instrs[2].pool == PoolKind::Max);
  CHECK(prog.instrs[7].pool == PoolKind::Avg);
  CHECK(prog.instrs[8].kh == 1);  // lowered classifier

  // Weight image: one K*K*N_I slot per output channel.
  CHECK(prog.weight_image.count() == (8ull * 128 + 10) * 1152);
  // Layer 1 occupies 128 x 1152 trits.
  CHECK(prog.instrs[1].weight_base - prog.instrs[0].weight_base ==
        128ull * 1152);

  // The default queue depth of 8 cannot hold the 9 fused layers.
  CHECK_THROWS_AS(emit_program(net, ArchConfig{}), QueueOverflow);
}

TEST_CASE("single identity conv compiles to sign thresholds") {
  NetworkDesc net;
  net.input_dims = {1, 1, 1};
  LayerDesc l;
  l.kind = LayerKind::Conv2D;
  l.in_ch = l.out_ch = 1;
  l.kh = l.kw = 1;
  l.weights = PackedTritTensor::from_values({1, 1, 1, 1},
                                            std::vector<int8_t>{1});
  net.layers = {l};
  const CompiledProgram prog = emit_program(net, ArchConfig{});
  REQUIRE(prog.instrs.size() == 1);
  CHECK(prog.thresholds[0].lo == 0);
  CHECK(prog.thresholds[0].hi == 1);
}

TEST_CASE("compiled programs match the float pipeline on random networks") {
  Rng rng(2024);
  int tested = 0;
  while (tested < 100) {
    const NetworkDesc net = make_random_network(rng);
    if (!validate(net, ArchConfig{}).empty()) continue;
    CompiledProgram prog;
    try {
      prog = emit_program(net, ArchConfig{});
    } catch (const QueueOverflow&) {
      continue;
    }
    const auto input = make_random_input(rng, net.input_dims.h,
                                         net.input_dims.w, net.input_dims.c,
                                         0.35);
    REQUIRE(golden::ref_run(prog, input) == golden::ref_run(net, input));
    ++tested;
  }
}

TEST_CASE("threshold output is monotone in the accumulator") {
  Rng rng(303);
  for (int trial = 0; trial < 50; ++trial) {
    const double gamma = rng.uniform(0.05, 3.0);
    const LayerDesc l = conv_with_bn(8, 1, 3, gamma, rng.uniform(-1, 1),
                                     rng.uniform(-10, 10),
                                     rng.uniform(0.1, 100.0));
    const auto pairs = fold_thresholds(l);
    int8_t prev = -1;
    for (int a = -80; a <= 80; ++a) {
      const int8_t out = apply_thresholds(a, pairs[0]);
      CHECK(out >= prev);
      prev = out;
    }
  }
}

TEST_CASE("program file roundtrip") {
  Rng rng(404);
  const NetworkDesc net = make_random_network(rng);
  if (validate(net, ArchConfig{}).empty()) {
    const CompiledProgram prog = emit_program(net, ArchConfig{});
    const auto path = std::filesystem::temp_directory_path() / "rt.ctprog";
    save_program(path, prog);
    const CompiledProgram loaded = load_program(path);
    CHECK(loaded.instrs.size() == prog.instrs.size());
    CHECK(loaded.thresholds == prog.thresholds);
    CHECK(loaded.weight_image == prog.weight_image);
    CHECK(loaded.arch.n_i == prog.arch.n_i);
    for (size_t i = 0; i < prog.instrs.size(); ++i) {
      CHECK(loaded.instrs[i].in_h == prog.instrs[i].in_h);
      CHECK(loaded.instrs[i].weight_base == prog.instrs[i].weight_base);
      CHECK(loaded.instrs[i].pool == prog.instrs[i].pool);
    }
    std::filesystem::remove(path);
  }
}
