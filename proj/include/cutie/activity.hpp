#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "cutie/simulator.hpp"

namespace cutie {

// Switching-activity statistics over a simulation trace. A multiplier input
// node toggles when its activation value changes between consecutive
// evaluations; an adder-tree input node (a product) toggles when the
// corresponding weight is non-zero and the activation value changes.
struct LayerToggles {
  uint64_t adder_toggles = 0;
  uint64_t multiplier_toggles = 0;
  uint64_t adder_node_transitions = 0;       // nodes x transitions
  uint64_t multiplier_node_transitions = 0;
};

struct ToggleStats {
  double adder_input_toggle_prob = 0.0;
  double multiplier_toggle_prob = 0.0;
  uint64_t adder_toggles = 0;
  uint64_t multiplier_toggles = 0;
  std::vector<LayerToggles> per_layer;
};

enum class ToggleMode { Unrolled, Iterative };

// `factor` (iterative mode) splits the input channels into that many tiles
// processed sequentially on a shared datapath, alternating weight and
// feature-map tiles every cycle, as an output-stationary iteratively
// decomposed design would.
ToggleStats count_toggles(const SimTrace& trace, ToggleMode mode,
                          uint32_t factor = 2);

// Mean pixel-to-pixel Hamming distance, in bits, over the 2-bit two's
// complement pixel encoding (2 * channels bits per pixel). `pixels` holds a
// flattened stream of `channels`-deep trit pixels in traversal order.
double hamming_stats(std::span<const int8_t> pixels, uint32_t channels);

// Per-bit / per-event energy constants. Values ship in calibration files;
// they are fitted, not derived from first principles.
struct CostModel {
  double dram_pj_per_bit = 20.0;
  double fm_mem_pj_per_bit = 0.1;
  double weight_mem_pj_per_bit = 0.16;
  double compute_pj_per_toggled_node = 0.0029;
  // Toggled internal adder-tree nodes per toggled tree input; an input flip
  // propagates through the reduction levels.
  double popcount_tree_factor = 8.0;
  double codec_pj_per_trit = 0.005;
  double compute_pj_per_op = 0.0012;  // tiling-model compute cost
  double static_pj_per_cycle = 2.0;

  static CostModel load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
};

// Itemized energy figures in picojoules. The total is the exact sum of the
// items.
struct EnergyItems {
  double compute_mult = 0.0;
  double compute_popcount = 0.0;
  double fm_mem = 0.0;
  double weight_mem = 0.0;
  double io = 0.0;
  double codec = 0.0;
  double static_ = 0.0;

  double total() const {
    return compute_mult + compute_popcount + fm_mem + weight_mem + io +
           codec + static_;
  }
};

struct EnergyReport {
  std::vector<EnergyItems> per_layer;
  EnergyItems totals;
};

// Energy from a trace: compute items scale with toggle counts, memory items
// with accounted bits (1.6 bits per trit in the packed memories), I/O with
// the network input/output transfers at DRAM cost.
EnergyReport energy_estimate(const SimTrace& trace, const CostModel& cost);

// Binary-equivalent estimate of a report: memory and I/O items divided by
// 1.6, the popcount share of compute halved, the codec item removed.
EnergyReport binary_discount(const EnergyReport& report);

// --- tiling transfer model ---------------------------------------------------

enum class TilingStrategy { LayerFirst, DepthFirst };

struct TilingPlan {
  uint32_t fm_h = 32, fm_w = 32;
  uint32_t channels = 128;
  uint32_t layers = 8;
  uint32_t kernel = 3;
  TilingStrategy strategy = TilingStrategy::DepthFirst;
  uint32_t tile_h = 0, tile_w = 0;  // 0 = use arch I_H x I_W
};

struct TilingResult {
  uint64_t tiles = 0;
  double bits_external = 0.0;  // feature-map bits over the chip I/O
  double bits_weights = 0.0;   // weight bits into the OCU buffers
  uint64_t ops = 0;            // including halo recomputation
  double e_feature_pj = 0.0;
  double e_weight_pj = 0.0;
  double e_compute_pj = 0.0;
  double total_pj() const { return e_feature_pj + e_weight_pj + e_compute_pj; }
};

// External-transfer model for a uniform conv stack (`layers` conv layers,
// `channels` in/out, KxK kernels, stride 1, full padding). Feature values
// count 1.6 bits each. Layer-first reads every (halo-extended) input tile
// and writes every output tile per layer; depth-first pushes one tile
// through all layers, re-reading only the depth-accumulated halo and
// reloading weights per tile. The final network output is assumed to stay
// on chip in both strategies.
TilingResult tiling_transfer(const TilingPlan& plan, const ArchConfig& arch,
                             const CostModel& cost);

}  // namespace cutie
