#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cutie/compiler.hpp"

namespace cutie {
namespace golden {

// Plain (H, W, C) integer tensor: trits for activations, wide integers for
// accumulators. This model deliberately shares no datapath code with the
// simulator; it is the equivalence oracle.
struct RefTensor {
  uint32_t h = 0, w = 0, c = 0;
  std::vector<int32_t> v;

  RefTensor() = default;
  RefTensor(uint32_t h_, uint32_t w_, uint32_t c_)
      : h(h_), w(w_), c(c_), v(static_cast<size_t>(h_) * w_ * c_, 0) {}

  int32_t at(uint32_t y, uint32_t x, uint32_t ch) const {
    return v[(static_cast<size_t>(y) * w + x) * c + ch];
  }
  int32_t& at(uint32_t y, uint32_t x, uint32_t ch) {
    return v[(static_cast<size_t>(y) * w + x) * c + ch];
  }
};

// Direct six-nested-loop convolution, no reordering or tiling. Kernels are
// laid out (out_ch, kh, kw, in_ch); `padding` zero-pads by kh/2 and kw/2.
RefTensor ref_conv(const RefTensor& input, std::span<const int8_t> kernels,
                   uint32_t out_ch, uint32_t kh, uint32_t kw, uint32_t sh,
                   uint32_t sw, bool padding);

// Per-channel ternarization with the compiler's boundary rule.
RefTensor ref_threshold(const RefTensor& acc,
                        std::span<const ThresholdPair> pairs);

// Non-overlapping pooling; max over trits, sum over raw accumulators.
RefTensor ref_pool_max(const RefTensor& trits, uint32_t pw, uint32_t ph);
RefTensor ref_pool_sum(const RefTensor& acc, uint32_t pw, uint32_t ph);

// Executes a compiled program on the integer path.
PackedTritTensor ref_run(const CompiledProgram& prog,
                         const PackedTritTensor& input);

// Executes a network description on the real-valued reference pipeline:
// conv -> batch-norm -> Hardtanh -> ternarize (y >= 0.5 -> +1,
// y < -0.5 -> -1). Max pooling acts on the ternarized values. Average
// pooling sums raw accumulators and applies the layer's decision boundary
// rounded to the integer accumulator grid, scaled by the pool area; this is
// only defined for ternary weights.
PackedTritTensor ref_run(const NetworkDesc& net, const PackedTritTensor& input);

// The reference real-valued ternarizer (ties documented above).
inline int8_t ternarize_float(double y) {
  if (y >= 0.5) return 1;
  if (y < -0.5) return -1;
  return 0;
}

}  // namespace golden
}  // namespace cutie
