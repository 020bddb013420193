#pragma once

#include "cutie/network.hpp"
#include "cutie/rng.hpp"

namespace cutie {

// Seeded generators for benchmark and fuzzing networks. Weights are random
// ternary values; batch-norm parameters are drawn so the folded thresholds
// land inside the reachable accumulator range.

struct BenchmarkOptions {
  uint64_t seed = 1;
  double weight_sparsity = 0.607;
  // Binary mode: dense +-1 weights and collapsed threshold bands, so every
  // activation is +-1.
  bool binary = false;
};

// The CIFAR-sized reference topology: eight 3x3 conv layers (126->128,
// then 128->128) over 32x32 with three 2x2 max-pool stages, a final 4x4
// average pool and a 128->10 classifier.
NetworkDesc make_benchmark_network(const BenchmarkOptions& opts);

struct RandomNetOptions {
  uint32_t max_h = 8, max_w = 8;
  uint32_t max_ch = 10;
  uint32_t max_weight_layers = 4;
  double weight_sparsity = 0.4;
  bool allow_pooling = true;
  bool allow_dense_tail = true;
  bool allow_depthwise = true;
};

NetworkDesc make_random_network(Rng& rng, const RandomNetOptions& opts = {});

PackedTritTensor make_random_input(Rng& rng, uint32_t h, uint32_t w,
                                   uint32_t c, double zero_prob);

// Random batch-norm parameters scaled to a layer with `taps` kernel taps.
BatchNorm make_random_bn(Rng& rng, uint32_t channels, uint64_t taps,
                         bool binary);

PackedTritTensor make_random_kernels(Rng& rng, uint32_t out_ch, uint32_t kh,
                                     uint32_t kw, uint32_t in_ch,
                                     double zero_prob);

}  // namespace cutie
