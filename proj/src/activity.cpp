#include "cutie/activity.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <sstream>

namespace cutie {

namespace {

ToggleStats finalize(std::vector<LayerToggles> per_layer) {
  ToggleStats s;
  uint64_t adder_tr = 0, mult_tr = 0;
  for (const LayerToggles& lt : per_layer) {
    s.adder_toggles += lt.adder_toggles;
    s.multiplier_toggles += lt.multiplier_toggles;
    adder_tr += lt.adder_node_transitions;
    mult_tr += lt.multiplier_node_transitions;
  }
  s.adder_input_toggle_prob =
      adder_tr ? static_cast<double>(s.adder_toggles) / adder_tr : 0.0;
  s.multiplier_toggle_prob =
      mult_tr ? static_cast<double>(s.multiplier_toggles) / mult_tr : 0.0;
  s.per_layer = std::move(per_layer);
  return s;
}

}  // namespace

ToggleStats count_toggles(const SimTrace& trace, ToggleMode mode,
                          uint32_t factor) {
  const uint64_t slot = trace.arch.kernel_slot_trits();
  bool any_windows = false;
  std::vector<LayerToggles> per_layer;

  for (const LayerTrace& lt : trace.layers) {
    LayerToggles acc;
    const uint32_t n = lt.n_windows;
    const uint32_t oc = lt.instr.out_ch;
    if (lt.windows.size() != static_cast<uint64_t>(n) * slot) {
      per_layer.push_back(acc);
      continue;
    }
    any_windows = any_windows || n > 0;

    if (mode == ToggleMode::Unrolled) {
      // Weights are held fixed for the whole layer: an adder-tree input
      // toggles iff its weight is non-zero and the window value at that
      // position changed since the previous cycle.
      std::vector<uint32_t> nnz(slot, 0);
      for (uint32_t o = 0; o < oc; ++o)
        for (uint64_t i = 0; i < slot; ++i)
          if (lt.kernels[o * slot + i] != 0) ++nnz[i];

      for (uint32_t w = 1; w < n; ++w) {
        const int8_t* prev = lt.windows.data() + (w - 1) * slot;
        const int8_t* cur = lt.windows.data() + static_cast<uint64_t>(w) * slot;
        for (uint64_t i = 0; i < slot; ++i) {
          if (prev[i] != cur[i]) {
            acc.adder_toggles += nnz[i];
            acc.multiplier_toggles += oc;  // activation inputs; weights fixed
          }
        }
      }
      const uint64_t transitions = n > 1 ? n - 1 : 0;
      acc.adder_node_transitions = transitions * slot * oc;
      // Two input nodes per multiplier (activation and weight).
      acc.multiplier_node_transitions = transitions * slot * oc * 2;
    } else {
      if (factor == 0 || trace.arch.n_i % factor != 0)
        throw Error("iterative factor must divide N_I");
      const uint32_t csz = trace.arch.n_i / factor;  // channels per tile
      const uint64_t shared = slot / factor;          // shared datapath nodes
      const uint32_t pixels = trace.arch.k * trace.arch.k;

      // Emulates the shared datapath: for every window, `factor` subcycles
      // with both the weight tile and the feature tile switching each
      // subcycle. Values are tracked per OCU across the whole stream.
      std::vector<int8_t> prev_prod(shared * oc, 0);
      std::vector<int8_t> prev_act(shared, 0);
      std::vector<int8_t> prev_wgt(shared * oc, 0);
      bool first = true;
      for (uint32_t w = 0; w < n; ++w) {
        const int8_t* win = lt.windows.data() + static_cast<uint64_t>(w) * slot;
        for (uint32_t t = 0; t < factor; ++t) {
          for (uint32_t px = 0; px < pixels; ++px)
            for (uint32_t j = 0; j < csz; ++j) {
              const uint64_t node = static_cast<uint64_t>(px) * csz + j;
              const uint64_t pos =
                  static_cast<uint64_t>(px) * trace.arch.n_i + t * csz + j;
              const int8_t a = win[pos];
              if (!first && a != prev_act[node]) acc.multiplier_toggles += oc;
              prev_act[node] = a;
              for (uint32_t o = 0; o < oc; ++o) {
                const int8_t wv = lt.kernels[o * slot + pos];
                const int8_t p =
                    static_cast<int8_t>(int{a} * int{wv});
                const uint64_t noc = node * oc + o;
                if (!first) {
                  if (p != prev_prod[noc]) ++acc.adder_toggles;
                  if (wv != prev_wgt[noc]) ++acc.multiplier_toggles;
                }
                prev_prod[noc] = p;
                prev_wgt[noc] = wv;
              }
            }
          first = false;
        }
      }
      const uint64_t transitions =
          n > 0 ? static_cast<uint64_t>(n) * factor - 1 : 0;
      acc.adder_node_transitions = transitions * shared * oc;
      acc.multiplier_node_transitions = transitions * shared * oc * 2;
    }
    per_layer.push_back(acc);
  }

  if (!any_windows)
    throw EmptyTrace("trace holds no executed windows");
  return finalize(std::move(per_layer));
}

double hamming_stats(std::span<const int8_t> pixels, uint32_t channels) {
  if (channels == 0 || pixels.size() % channels != 0)
    throw ShapeError("pixel stream length is not a multiple of channels");
  const size_t n = pixels.size() / channels;
  if (n < 2)
    throw UndefinedStat("pixel-to-pixel Hamming needs at least two pixels");
  uint64_t bits = 0;
  for (size_t p = 1; p < n; ++p) {
    const int8_t* a = pixels.data() + (p - 1) * channels;
    const int8_t* b = pixels.data() + p * channels;
    for (uint32_t c = 0; c < channels; ++c) {
      const unsigned x = static_cast<unsigned>((a[c] ^ b[c]) & 0x3);
      bits += std::popcount(x);
    }
  }
  return static_cast<double>(bits) / static_cast<double>(n - 1);
}

// --- cost model ---------------------------------------------------------------

CostModel CostModel::load(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open cost model " + path.string());
  CostModel m;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string key, eq;
    double value;
    if (!(ls >> key)) continue;
    if (!(ls >> eq >> value) || eq != "=")
      throw FormatError(path.string() + ":" + std::to_string(lineno) +
                        ": expected key = value");
    if (key == "dram_pj_per_bit") m.dram_pj_per_bit = value;
    else if (key == "fm_mem_pj_per_bit") m.fm_mem_pj_per_bit = value;
    else if (key == "weight_mem_pj_per_bit") m.weight_mem_pj_per_bit = value;
    else if (key == "compute_pj_per_toggled_node")
      m.compute_pj_per_toggled_node = value;
    else if (key == "popcount_tree_factor") m.popcount_tree_factor = value;
    else if (key == "codec_pj_per_trit") m.codec_pj_per_trit = value;
    else if (key == "compute_pj_per_op") m.compute_pj_per_op = value;
    else if (key == "static_pj_per_cycle") m.static_pj_per_cycle = value;
    else
      throw FormatError("unknown cost-model key '" + key + "'");
  }
  return m;
}

void CostModel::save(const std::filesystem::path& path) const {
  std::ofstream os(path);
  if (!os) throw FormatError("cannot open " + path.string() + " for writing");
  os << "dram_pj_per_bit = " << dram_pj_per_bit << "\n"
     << "fm_mem_pj_per_bit = " << fm_mem_pj_per_bit << "\n"
     << "weight_mem_pj_per_bit = " << weight_mem_pj_per_bit << "\n"
     << "compute_pj_per_toggled_node = " << compute_pj_per_toggled_node << "\n"
     << "popcount_tree_factor = " << popcount_tree_factor << "\n"
     << "codec_pj_per_trit = " << codec_pj_per_trit << "\n"
     << "compute_pj_per_op = " << compute_pj_per_op << "\n"
     << "static_pj_per_cycle = " << static_pj_per_cycle << "\n";
}

// --- energy estimation ----------------------------------------------------------

EnergyReport energy_estimate(const SimTrace& trace, const CostModel& cost) {
  const ToggleStats toggles = count_toggles(trace, ToggleMode::Unrolled);
  constexpr double kBitsPerTrit = 1.6;

  EnergyReport rep;
  for (size_t i = 0; i < trace.layers.size(); ++i) {
    const LayerTrace& lt = trace.layers[i];
    const LayerToggles& tg = toggles.per_layer[i];
    EnergyItems e;
    e.compute_popcount = static_cast<double>(tg.adder_toggles) *
                         cost.popcount_tree_factor *
                         cost.compute_pj_per_toggled_node;
    e.compute_mult = static_cast<double>(tg.multiplier_toggles) *
                     cost.compute_pj_per_toggled_node;
    const double fm_trits =
        static_cast<double>(lt.fm_read_trits + lt.fm_write_trits);
    e.fm_mem = fm_trits * kBitsPerTrit * cost.fm_mem_pj_per_bit;
    e.weight_mem = static_cast<double>(lt.weight_load_trits) * kBitsPerTrit *
                   cost.weight_mem_pj_per_bit;
    e.codec = (fm_trits + static_cast<double>(lt.weight_load_trits)) *
              cost.codec_pj_per_trit;
    if (i == 0) {
      const double in_trits = static_cast<double>(lt.instr.in_h) *
                              lt.instr.in_w * lt.instr.in_ch;
      e.io += in_trits * kBitsPerTrit * cost.dram_pj_per_bit;
    }
    if (i + 1 == trace.layers.size()) {
      const double out_trits = static_cast<double>(lt.instr.out_h()) *
                               lt.instr.out_w() * lt.instr.out_ch;
      e.io += out_trits * kBitsPerTrit * cost.dram_pj_per_bit;
    }
    e.static_ =
        static_cast<double>(lt.cycles.load_exposed + lt.cycles.execute()) *
        cost.static_pj_per_cycle;
    rep.per_layer.push_back(e);
  }
  for (const EnergyItems& e : rep.per_layer) {
    rep.totals.compute_mult += e.compute_mult;
    rep.totals.compute_popcount += e.compute_popcount;
    rep.totals.fm_mem += e.fm_mem;
    rep.totals.weight_mem += e.weight_mem;
    rep.totals.io += e.io;
    rep.totals.codec += e.codec;
    rep.totals.static_ += e.static_;
  }
  return rep;
}

EnergyReport binary_discount(const EnergyReport& report) {
  // Core-power adjustment: the on-chip memory items shrink by the packing
  // ratio, the popcount share halves, codec banks disappear. Off-chip I/O
  // is not part of the discount.
  EnergyReport out = report;
  const auto discount = [](EnergyItems& e) {
    e.fm_mem /= 1.6;
    e.weight_mem /= 1.6;
    e.compute_popcount /= 2.0;
    e.codec = 0.0;
  };
  for (EnergyItems& e : out.per_layer) discount(e);
  discount(out.totals);
  return out;
}

// --- tiling transfer model -------------------------------------------------------

namespace {

// Input rows/cols covered by an output region [lo, hi) extended by `halo`
// per side, clipped to [0, extent).
uint64_t clipped_span(int64_t lo, int64_t hi, int64_t halo, int64_t extent) {
  const int64_t a = std::max<int64_t>(0, lo - halo);
  const int64_t b = std::min<int64_t>(extent, hi + halo);
  return b > a ? static_cast<uint64_t>(b - a) : 0;
}

}  // namespace

TilingResult tiling_transfer(const TilingPlan& plan, const ArchConfig& arch,
                             const CostModel& cost) {
  constexpr double kBitsPerTrit = 1.6;
  const uint32_t halo = plan.kernel / 2;
  const uint64_t weight_trits_per_layer = static_cast<uint64_t>(plan.channels) *
                                          plan.kernel * plan.kernel *
                                          plan.channels;
  const uint64_t ops_per_pixel_layer =
      2ull * plan.kernel * plan.kernel * plan.channels * plan.channels;

  TilingResult r;

  const bool fits = plan.fm_h <= arch.i_h && plan.fm_w <= arch.i_w;
  if (fits) {
    r.tiles = 1;
    r.bits_external = static_cast<double>(plan.fm_h) * plan.fm_w *
                      plan.channels * kBitsPerTrit;
    r.bits_weights =
        static_cast<double>(plan.layers) * weight_trits_per_layer *
        kBitsPerTrit;
    r.ops = static_cast<uint64_t>(plan.fm_h) * plan.fm_w * plan.layers *
            ops_per_pixel_layer;
  } else {
    const uint32_t th = plan.tile_h ? plan.tile_h : arch.i_h;
    const uint32_t tw = plan.tile_w ? plan.tile_w : arch.i_w;
    if (th > arch.i_h || tw > arch.i_w)
      throw CapacityError("tile exceeds the feature-map memory");
    const uint32_t nty = (plan.fm_h + th - 1) / th;
    const uint32_t ntx = (plan.fm_w + tw - 1) / tw;
    r.tiles = static_cast<uint64_t>(nty) * ntx;

    double ext_trits = 0.0;
    uint64_t ops = 0;
    for (uint32_t ty = 0; ty < nty; ++ty)
      for (uint32_t tx = 0; tx < ntx; ++tx) {
        const int64_t y0 = static_cast<int64_t>(ty) * th;
        const int64_t y1 = std::min<int64_t>(plan.fm_h, y0 + th);
        const int64_t x0 = static_cast<int64_t>(tx) * tw;
        const int64_t x1 = std::min<int64_t>(plan.fm_w, x0 + tw);
        if (plan.strategy == TilingStrategy::LayerFirst) {
          // Every layer re-reads the tile with a one-layer halo.
          const uint64_t rows = clipped_span(y0, y1, halo, plan.fm_h);
          const uint64_t cols = clipped_span(x0, x1, halo, plan.fm_w);
          ext_trits += static_cast<double>(plan.layers) * rows * cols *
                       plan.channels;
          ops += static_cast<uint64_t>(y1 - y0) * (x1 - x0) * plan.layers *
                 ops_per_pixel_layer;
        } else {
          // Depth-first: the tile's input is read once with the
          // depth-accumulated halo; inner layers recompute the overlap.
          const uint64_t in_rows =
              clipped_span(y0, y1, static_cast<int64_t>(halo) * plan.layers,
                           plan.fm_h);
          const uint64_t in_cols =
              clipped_span(x0, x1, static_cast<int64_t>(halo) * plan.layers,
                           plan.fm_w);
          ext_trits += static_cast<double>(in_rows) * in_cols * plan.channels;
          for (uint32_t layer = 0; layer < plan.layers; ++layer) {
            const int64_t grow =
                static_cast<int64_t>(halo) * (plan.layers - 1 - layer);
            const uint64_t rows = clipped_span(y0, y1, grow, plan.fm_h);
            const uint64_t cols = clipped_span(x0, x1, grow, plan.fm_w);
            ops += rows * cols * ops_per_pixel_layer;
          }
        }
      }
    if (plan.strategy == TilingStrategy::LayerFirst) {
      // Intermediate maps cross external memory; the final output stays.
      ext_trits += static_cast<double>(plan.layers - 1) * plan.fm_h *
                   plan.fm_w * plan.channels;
      r.bits_weights = static_cast<double>(plan.layers) *
                       weight_trits_per_layer * kBitsPerTrit;
    } else {
      const uint64_t loads = plan.layers == 1 ? 1 : r.tiles * plan.layers;
      r.bits_weights =
          static_cast<double>(loads) * weight_trits_per_layer * kBitsPerTrit;
    }
    r.bits_external = ext_trits * kBitsPerTrit;
    r.ops = ops;
  }

  r.e_feature_pj = r.bits_external * cost.dram_pj_per_bit;
  r.e_weight_pj = r.bits_weights * cost.weight_mem_pj_per_bit;
  r.e_compute_pj = static_cast<double>(r.ops) * cost.compute_pj_per_op;
  return r;
}

}  // namespace cutie
