#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "cutie/compiler.hpp"

namespace cutie {

// Scheduling mode for tile-buffer line loads. The default hides line loads
// under the window releases of the previous row (stalling only when a load
// cannot finish in time); `stall_on_row_advance` serializes them instead.
struct SimOptions {
  bool stall_on_row_advance = false;
  bool collect_windows = true;
};

enum class CyclePhase : uint8_t {
  WeightLoad = 0,
  Execute = 1,
  Stall = 2,
  Drain = 3
};

struct CycleRecord {
  uint32_t cycle = 0;
  uint16_t layer = 0;
  uint8_t phase = 0;
  uint8_t active_stages = 0;
  uint32_t read_trits = 0;
  uint32_t write_trits = 0;
  int32_t window = -1;  // index into the layer's window list, -1 if none
};

struct LayerCycles {
  uint64_t load = 0;          // weight-load cycles for this layer
  uint64_t load_exposed = 0;  // portion not hidden under the previous layer
  uint64_t priming = 0;
  uint64_t windows = 0;
  uint64_t stalls = 0;
  uint64_t drain = 0;
  uint64_t execute() const { return priming + windows + stalls + drain; }
};

// Per-OCU product codes are not materialized: code(oc, window, i) =
// trit_mul_raw(windows[window * slot + i], kernels[oc * slot + i]).
struct LayerTrace {
  LayerInstr instr;
  std::vector<int8_t> kernels;  // out_ch x (K*K*N_I), padded slot layout
  std::vector<ThresholdPair> thresholds;
  LayerCycles cycles;
  uint32_t n_windows = 0;
  std::vector<int8_t> windows;        // n_windows x (K*K*N_I), if collected
  std::vector<int32_t> accumulators;  // n_windows x out_ch
  std::vector<int8_t> outputs;        // out_h x out_w x out_ch trits
  uint64_t fm_read_words = 0, fm_read_trits = 0;
  uint64_t fm_write_words = 0, fm_write_trits = 0;
  uint64_t weight_load_trits = 0;
  uint32_t active_stages = 0;
};

struct SimTrace {
  ArchConfig arch;
  std::vector<LayerTrace> layers;
  std::vector<CycleRecord> cycle_log;
  uint64_t total_cycles = 0;
};

struct RunResult {
  PackedTritTensor output;
  SimTrace trace;
};

// Cycle-approximate execution of a compiled program. The output is exact
// (must equal the golden model trit for trit); cycle counts follow the
// documented window/priming/drain model. `arch` must agree with prog.arch.
RunResult run_program(const CompiledProgram& prog,
                      const PackedTritTensor& input, const ArchConfig& arch,
                      const SimOptions& opts = {});

struct CycleReport {
  uint64_t cycles = 0;  // exposed load + execute
  uint64_t ops = 0;
  double ops_per_cycle = 0.0;
  double utilization = 0.0;  // vs 2 * K^2 * N_I * N_O per cycle
};
CycleReport cycle_report(const SimTrace& trace, size_t layer);

// --- datapath building blocks (exposed for direct testing) ------------------

// K-line sliding-window store. Releases K x K x N_I activation windows in
// left-to-right, top-to-bottom order, handling zero padding and stride, and
// accounts feature-map reads (whole lines, up to K pixels per read cycle).
class TileBuffer {
 public:
  TileBuffer(const ArchConfig& arch, const LayerInstr& instr,
             std::span<const int8_t> fm);

  uint64_t priming_cycles() const { return priming_cycles_; }
  uint32_t n_windows() const { return out_h_ * out_w_; }
  uint64_t window_trits() const { return window_trits_; }

  // Fills `out` (K*K*N_I trits) with the next window. `row_load_cycles`
  // receives the line-load cycles incurred by the row advance immediately
  // before this window (0 inside a row). Returns false when the layer is
  // exhausted.
  bool next_window(std::span<int8_t> out, uint64_t& row_load_cycles);

  uint64_t read_words() const { return read_words_; }
  uint64_t read_trits() const { return read_trits_; }

 private:
  uint64_t line_load_cycles(int64_t row_lo, int64_t row_hi);

  const ArchConfig arch_;
  LayerInstr instr_;
  std::span<const int8_t> fm_;
  uint32_t out_h_ = 0, out_w_ = 0;
  uint64_t window_trits_ = 0;
  int64_t center_y0_ = 0, center_x0_ = 0;
  uint32_t oy_ = 0, ox_ = 0;
  int64_t loaded_hi_ = -1;  // highest input row currently resident
  uint64_t priming_cycles_ = 0;
  uint64_t read_words_ = 0, read_trits_ = 0;
};

// Pooling block of one compute unit: register + FIFO + add/max ALU.
// Values stream in conv-output row-major order; one partial per horizontal
// window lives in the FIFO. The completed value emerges on the last pixel
// of each pooling window.
class PoolUnit {
 public:
  PoolUnit() = default;
  PoolUnit(PoolKind kind, uint32_t pool_w, uint32_t pool_h, uint32_t fifo_capacity);

  std::optional<int32_t> update(int32_t value, uint32_t x, uint32_t y);
  size_t fifo_depth() const { return fifo_.size(); }

 private:
  PoolKind kind_ = PoolKind::None;
  uint32_t pw_ = 0, ph_ = 0;
  uint32_t capacity_ = 0;
  int32_t reg_ = 0;
  std::deque<int32_t> fifo_;
};

// One output-channel compute unit: dual weight banks, multiplier/popcount
// datapath, pooling block and threshold decider.
class Ocu {
 public:
  Ocu() = default;
  explicit Ocu(uint64_t slot_trits) : banks_{std::vector<int8_t>(slot_trits, 0),
                                             std::vector<int8_t>(slot_trits, 0)} {}

  void load_bank(int bank, std::span<const int8_t> kernel);
  void swap_banks() { active_ = 1 - active_; }
  int active_bank() const { return active_; }

  void configure(ThresholdPair thr, PoolKind pool, uint32_t pool_w,
                 uint32_t pool_h, uint32_t conv_out_w, uint32_t fifo_capacity);

  struct Result {
    int32_t acc = 0;
    std::optional<int8_t> out;
  };
  // One cycle: multiply, popcount-accumulate, pool, threshold.
  Result step(std::span<const int8_t> window);

 private:
  std::vector<int8_t> banks_[2];
  int active_ = 0;
  ThresholdPair thr_;
  PoolKind pool_ = PoolKind::None;
  PoolUnit pool_unit_;
  uint32_t conv_out_w_ = 0;
  uint32_t x_ = 0, y_ = 0;
};

// --- `.cttrace` file --------------------------------------------------------
//
// Header: "CTR1" | version u32 | arch 8xu32 | n_layers u32 | per layer:
// instr (12xu32 + 2xu64) + LayerCycles (6xu64) + accounting (7xu64) +
// active_stages u32 + thresholds (u32 count + 2xi32 each) + packed kernels
// (u64 trit count + bytes). Then n_cycles u64 followed by fixed-size
// records: 16-byte header + the released window packed 2 bits per trit
// (ceil(K*K*N_I/4) bytes, zeros outside execute cycles).
// The in-memory accumulator and output arrays are not part of the file.
void save_trace(const std::filesystem::path& path, const SimTrace& trace);
SimTrace load_trace(const std::filesystem::path& path);
uint64_t trace_record_size(const ArchConfig& arch);

}  // namespace cutie
