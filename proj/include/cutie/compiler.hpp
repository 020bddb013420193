#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "cutie/network.hpp"

namespace cutie {

// Two per-channel integer decision boundaries of the ternarization unit.
// Boundary rule: out = +1 iff acc >= hi; out = -1 iff acc < lo; else 0.
// With ceil-derived thresholds this is exactly equivalent to the real-valued
// conv -> BN -> Hardtanh -> ternarize pipeline on integer accumulators,
// where the real ternarizer maps y >= 0.5 to +1 and y < -0.5 to -1 (the tie
// y == -0.5 resolves to 0, y == +0.5 to +1).
struct ThresholdPair {
  int32_t lo = 0;
  int32_t hi = 1;

  bool operator==(const ThresholdPair&) const = default;
};

inline int8_t apply_thresholds(int64_t acc, ThresholdPair t) {
  return acc >= t.hi ? int8_t{1} : (acc < t.lo ? int8_t{-1} : int8_t{0});
}

enum class PoolKind : uint8_t { None = 0, Max = 1, Avg = 2 };

struct LayerInstr {
  uint32_t in_h = 0, in_w = 0, in_ch = 0;
  uint32_t out_ch = 0;
  uint32_t kh = 1, kw = 1;
  uint32_t sh = 1, sw = 1;
  bool padding = false;  // full zero padding
  PoolKind pool = PoolKind::None;
  uint32_t pool_w = 0, pool_h = 0;
  uint64_t weight_base = 0;     // trit offset into the weight image
  uint64_t threshold_base = 0;  // index into the threshold image

  uint32_t conv_out_h() const;
  uint32_t conv_out_w() const;
  uint32_t out_h() const {
    return pool == PoolKind::None ? conv_out_h() : conv_out_h() / pool_h;
  }
  uint32_t out_w() const {
    return pool == PoolKind::None ? conv_out_w() : conv_out_w() / pool_w;
  }
  uint32_t pool_area() const {
    return pool == PoolKind::None ? 1 : pool_w * pool_h;
  }
};

struct CompiledProgram {
  ArchConfig arch;
  std::vector<LayerInstr> instrs;
  std::vector<ThresholdPair> thresholds;
  PackedTritTensor weight_image;  // dims {n_kernels, K*K*N_I}
};

// Folds bias + batch-norm + Hardtanh + ternarization into integer threshold
// pairs. Requires gamma > 0 on every channel (run normalize_gamma_sign
// first); gamma == 0 raises DegenerateChannel. A layer without batch-norm
// folds under unit parameters, i.e. plain sign ternarization (0, 1).
// Thresholds are clamped to the accumulator range +-(kh*kw*in_ch + 1),
// which leaves the decision function unchanged.
std::vector<ThresholdPair> fold_thresholds(const LayerDesc& conv);

// Flips gamma < 0 channels: negates the channel's kernel, gamma and mu.
// The returned layer is functionally identical and has all gamma > 0.
LayerDesc normalize_gamma_sign(const LayerDesc& conv);

// Merges a pooling layer into a conv instruction. Average pooling scales the
// layer's threshold pairs by the pool area (the pooling unit sums raw
// accumulators; max pooling operates on ternarized values, so its
// thresholds are untouched).
LayerInstr fuse_pooling(const LayerInstr& conv_instr, const LayerDesc& pool,
                        std::span<ThresholdPair> layer_thresholds);

// Lowers a dense layer onto the conv datapath. Inputs up to N_I map to a
// 1x1 kernel over a 1x1 pixel; larger inputs (up to K*K*N_I) map to a KxK
// kernel over a KxK map holding the flattened features, channels innermost.
LayerDesc lower_dense(const LayerDesc& fc, const ArchConfig& arch);

// Expands a depthwise conv into a standard conv whose kernel for output
// channel c is zero except at input channel c.
LayerDesc lower_depthwise(const LayerDesc& dw);

// Full lowering pipeline: validate, lower dense/depthwise, normalize gamma
// signs, fold thresholds, fuse pooling, pack zero-padded kernels.
// Programs with more than arch.l fused layers raise QueueOverflow.
CompiledProgram emit_program(const NetworkDesc& net, const ArchConfig& arch);

// `.ctprog` container, little-endian throughout:
//   "CTP1" | version u32 | arch 8xu32 |
//   n_instr u32 | per instr: 12xu32 + 2xu64 |
//   n_pairs u32 | pairs 2xi32 |
//   weight dims (rank u8 + u32 each) | weight trit count u64 | packed bytes.
void save_program(const std::filesystem::path& path, const CompiledProgram& p);
CompiledProgram load_program(const std::filesystem::path& path);

}  // namespace cutie
