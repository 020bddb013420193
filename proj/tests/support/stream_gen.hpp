#pragma once

// Test-side generators for switching-activity experiments: per-channel
// Markov pixel streams with tunable smoothness, and synthetic single-layer
// traces built from sliding windows over such streams.

#include <span>
#include <vector>

#include "cutie/rng.hpp"
#include "cutie/simulator.hpp"

namespace cutie::testsupport {

// Row-major (h x w x c) trit image. Each channel follows a Markov chain
// along the pixel traversal order: with probability `redraw` the value is
// redrawn from the stationary distribution (zero_frac zeros, +-1 split
// evenly), otherwise it is held. Binary streams use zero_frac = 0.
inline std::vector<int8_t> markov_image(Rng& rng, uint32_t h, uint32_t w,
                                        uint32_t c, double zero_frac,
                                        double redraw) {
  std::vector<int8_t> img(static_cast<size_t>(h) * w * c);
  std::vector<int8_t> state(c);
  const auto draw = [&]() -> int8_t {
    if (zero_frac > 0.0 && rng.uniform() < zero_frac) return 0;
    return (rng.next() & 1) ? int8_t{1} : int8_t{-1};
  };
  for (uint32_t ch = 0; ch < c; ++ch) state[ch] = draw();
  size_t i = 0;
  for (uint32_t p = 0; p < h * w; ++p) {
    for (uint32_t ch = 0; ch < c; ++ch) {
      if (p > 0 && rng.uniform() < redraw) state[ch] = draw();
      img[i++] = state[ch];
    }
  }
  return img;
}

// Single-layer trace whose windows slide (unpadded, stride 1) over `image`.
// Kernels are (out_ch x K*K*N_I) in the padded slot layout.
inline SimTrace synth_trace(const ArchConfig& arch, uint32_t img_h,
                            uint32_t img_w, std::span<const int8_t> image,
                            std::vector<int8_t> kernels, uint32_t out_ch) {
  LayerInstr li;
  li.in_h = img_h;
  li.in_w = img_w;
  li.in_ch = arch.n_i;
  li.out_ch = out_ch;
  li.kh = li.kw = arch.k;
  li.sh = li.sw = 1;
  li.padding = false;

  SimTrace trace;
  trace.arch = arch;
  LayerTrace lt;
  lt.instr = li;
  lt.kernels = std::move(kernels);
  lt.active_stages = (out_ch + arch.n_o / arch.p - 1) / (arch.n_o / arch.p);

  TileBuffer tb(arch, li, image);
  lt.n_windows = tb.n_windows();
  const uint64_t slot = arch.kernel_slot_trits();
  lt.windows.reserve(static_cast<size_t>(lt.n_windows) * slot);
  std::vector<int8_t> win(slot);
  uint64_t row_load = 0;
  while (tb.next_window(win, row_load))
    lt.windows.insert(lt.windows.end(), win.begin(), win.end());
  lt.cycles.windows = lt.n_windows;
  lt.fm_read_trits = tb.read_trits();
  lt.fm_read_words = tb.read_words();
  trace.layers.push_back(std::move(lt));
  trace.total_cycles = trace.layers[0].n_windows;
  return trace;
}

inline std::vector<int8_t> sparse_kernels(Rng& rng, uint32_t out_ch,
                                          uint64_t slot, double zero_frac) {
  std::vector<int8_t> k(static_cast<size_t>(out_ch) * slot);
  for (auto& v : k) v = rng.trit(zero_frac);
  return k;
}

// Stream parameters calibrated so the mean pixel-to-pixel Hamming distance
// of a 128-channel stream lands at ~33/256 bits (ternary) and ~44/256 bits
// (binary) in the 2-bit two's complement encoding.
struct StreamCalibration {
  double zero_frac;
  double redraw;
};
inline StreamCalibration ternary_calibration() { return {0.65, 0.3466}; }
inline StreamCalibration binary_calibration() { return {0.0, 0.6875}; }

}  // namespace cutie::testsupport
