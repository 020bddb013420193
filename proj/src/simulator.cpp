#include "cutie/simulator.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>

namespace cutie {

// --- TileBuffer --------------------------------------------------------------

TileBuffer::TileBuffer(const ArchConfig& arch, const LayerInstr& instr,
                       std::span<const int8_t> fm)
    : arch_(arch), instr_(instr), fm_(fm) {
  if (fm.size() != static_cast<size_t>(instr.in_h) * instr.in_w * instr.in_ch)
    throw ShapeError("feature map size does not match layer dims");
  out_h_ = instr.conv_out_h();
  out_w_ = instr.conv_out_w();
  window_trits_ = static_cast<uint64_t>(arch.k) * arch.k * arch.n_i;
  // First window center; padding starts at the top-left corner, otherwise
  // the center is offset to the lower-right so the kernel stays in bounds.
  center_y0_ = instr.padding ? 0 : instr.kh / 2;
  center_x0_ = instr.padding ? 0 : instr.kw / 2;

  const int64_t hi =
      std::min<int64_t>(instr.in_h - 1, center_y0_ + arch_.k / 2);
  const uint64_t lines = hi >= 0 ? static_cast<uint64_t>(hi) + 1 : 0;
  priming_cycles_ = lines * ((instr.in_w + arch_.k - 1) / arch_.k);
  read_words_ += lines * instr.in_w *
                 ((instr.in_ch + arch_.fm_word_trits() - 1) /
                  arch_.fm_word_trits());
  read_trits_ += lines * instr.in_w * instr.in_ch;
  loaded_hi_ = hi;
}

uint64_t TileBuffer::line_load_cycles(int64_t row_lo, int64_t row_hi) {
  // Loads rows (loaded_hi_, row_hi]; rows below row_lo were already retired.
  (void)row_lo;
  const int64_t hi = std::min<int64_t>(instr_.in_h - 1, row_hi);
  if (hi <= loaded_hi_) return 0;
  const uint64_t lines = static_cast<uint64_t>(hi - loaded_hi_);
  loaded_hi_ = hi;
  read_words_ += lines * instr_.in_w *
                 ((instr_.in_ch + arch_.fm_word_trits() - 1) /
                  arch_.fm_word_trits());
  read_trits_ += lines * instr_.in_w * instr_.in_ch;
  return lines * ((instr_.in_w + arch_.k - 1) / arch_.k);
}

bool TileBuffer::next_window(std::span<int8_t> out,
                             uint64_t& row_load_cycles) {
  row_load_cycles = 0;
  if (oy_ >= out_h_) return false;
  if (out.size() != window_trits_) throw ShapeError("window span size");

  const int64_t cy = center_y0_ + static_cast<int64_t>(oy_) * instr_.sh;
  const int64_t cx = center_x0_ + static_cast<int64_t>(ox_) * instr_.sw;
  if (ox_ == 0 && oy_ > 0)
    row_load_cycles =
        line_load_cycles(cy - arch_.k / 2, cy + arch_.k / 2);

  // Physical K x K window around the center. Out-of-bounds pixels and
  // channels past in_ch are zero (padding trit silences the multipliers).
  std::fill(out.begin(), out.end(), int8_t{0});
  const int64_t half = arch_.k / 2;
  for (int64_t r = 0; r < arch_.k; ++r) {
    const int64_t iy = cy - half + r;
    if (iy < 0 || iy >= instr_.in_h) continue;
    for (int64_t s = 0; s < arch_.k; ++s) {
      const int64_t ix = cx - half + s;
      if (ix < 0 || ix >= instr_.in_w) continue;
      std::memcpy(out.data() + (r * arch_.k + s) * arch_.n_i,
                  fm_.data() + (iy * instr_.in_w + ix) * instr_.in_ch,
                  instr_.in_ch);
    }
  }

  if (++ox_ == out_w_) {
    ox_ = 0;
    ++oy_;
  }
  return true;
}

// --- PoolUnit ----------------------------------------------------------------

PoolUnit::PoolUnit(PoolKind kind, uint32_t pool_w, uint32_t pool_h,
                   uint32_t fifo_capacity)
    : kind_(kind), pw_(pool_w), ph_(pool_h), capacity_(fifo_capacity) {}

std::optional<int32_t> PoolUnit::update(int32_t value, uint32_t x, uint32_t y) {
  const auto comb = [&](int32_t a, int32_t b) {
    return kind_ == PoolKind::Max ? std::max(a, b) : a + b;
  };
  const uint32_t col = x % pw_;
  const uint32_t row = y % ph_;
  reg_ = col == 0 ? value : comb(reg_, value);
  if (col != pw_ - 1) return std::nullopt;

  if (ph_ == 1) return reg_;
  if (row == 0) {
    if (fifo_.size() >= capacity_)
      throw CapacityError("pooling FIFO overflow");
    fifo_.push_back(reg_);
    return std::nullopt;
  }
  if (fifo_.empty()) throw CapacityError("pooling FIFO underflow");
  const int32_t partial = fifo_.front();
  fifo_.pop_front();
  if (row < ph_ - 1) {
    fifo_.push_back(comb(partial, reg_));
    return std::nullopt;
  }
  return comb(partial, reg_);
}

// --- Ocu ----------------------------------------------------------------------

void Ocu::load_bank(int bank, std::span<const int8_t> kernel) {
  if (kernel.size() != banks_[bank].size())
    throw ShapeError("kernel size does not match weight bank");
  std::copy(kernel.begin(), kernel.end(), banks_[bank].begin());
}

void Ocu::configure(ThresholdPair thr, PoolKind pool, uint32_t pool_w,
                    uint32_t pool_h, uint32_t conv_out_w,
                    uint32_t fifo_capacity) {
  thr_ = thr;
  pool_ = pool;
  conv_out_w_ = conv_out_w;
  x_ = y_ = 0;
  if (pool != PoolKind::None)
    pool_unit_ = PoolUnit(pool, pool_w, pool_h, fifo_capacity);
}

Ocu::Result Ocu::step(std::span<const int8_t> window) {
  const std::vector<int8_t>& w = banks_[active_];
  if (window.size() != w.size())
    throw ShapeError("window size does not match weight bank");

  // Multiplier array + dual popcount: count positive product codes (MSB
  // set) minus negative ones (LSB set).
  int msb = 0, lsb = 0;
  for (size_t i = 0; i < w.size(); ++i) {
    const int p = int{window[i]} * int{w[i]};
    msb += p > 0;
    lsb += p < 0;
  }
  Result res;
  res.acc = msb - lsb;

  switch (pool_) {
    case PoolKind::None:
      res.out = apply_thresholds(res.acc, thr_);
      break;
    case PoolKind::Max: {
      const auto done =
          pool_unit_.update(apply_thresholds(res.acc, thr_), x_, y_);
      if (done) res.out = static_cast<int8_t>(*done);
      break;
    }
    case PoolKind::Avg: {
      const auto done = pool_unit_.update(res.acc, x_, y_);
      if (done) res.out = apply_thresholds(*done, thr_);
      break;
    }
  }
  if (++x_ == conv_out_w_) {
    x_ = 0;
    ++y_;
  }
  return res;
}

// --- run_program ---------------------------------------------------------------

namespace {

bool arch_equal(const ArchConfig& a, const ArchConfig& b) {
  return a.n_i == b.n_i && a.n_o == b.n_o && a.k == b.k && a.i_w == b.i_w &&
         a.i_h == b.i_h && a.l == b.l && a.p == b.p && a.w_s == b.w_s;
}

}  // namespace

RunResult run_program(const CompiledProgram& prog,
                      const PackedTritTensor& input, const ArchConfig& arch,
                      const SimOptions& opts) {
  if (!arch_equal(arch, prog.arch))
    throw Error("arch config does not match the compiled program");
  if (prog.instrs.empty()) throw UnsupportedGraph("empty program");
  if (prog.instrs.size() > arch.l)
    throw CapacityError("program exceeds the layer queue");

  const LayerInstr& first = prog.instrs.front();
  const auto& idims = input.dims();
  if (idims.size() != 3 || idims[0] != first.in_h || idims[1] != first.in_w ||
      idims[2] != first.in_ch)
    throw ShapeError("input tensor does not match the first instruction");

  const uint64_t slot = arch.kernel_slot_trits();
  const auto image = prog.weight_image.unpack();
  const uint32_t stage_ch = arch.n_o / arch.p;

  RunResult rr;
  SimTrace& trace = rr.trace;
  trace.arch = arch;

  std::vector<Ocu> ocus(arch.n_o);
  for (auto& o : ocus) o = Ocu(slot);

  std::vector<int8_t> fm = input.unpack();
  uint32_t fm_h = first.in_h, fm_w = first.in_w, fm_c = first.in_ch;

  uint64_t cycle = 0;
  uint64_t prev_execute = 0;

  for (size_t k = 0; k < prog.instrs.size(); ++k) {
    const LayerInstr& li = prog.instrs[k];
    if (li.in_h > arch.i_h || li.in_w > arch.i_w || li.in_ch > arch.n_i ||
        li.out_ch > arch.n_o)
      throw CapacityError("layer exceeds architecture capacity");
    if (fm_h != li.in_h || fm_w != li.in_w || fm_c != li.in_ch)
      throw ShapeError("feature map does not chain into layer " +
                       std::to_string(k));
    if (li.weight_base + static_cast<uint64_t>(li.out_ch) * slot >
        prog.weight_image.count())
      throw FormatError("weight image too small for layer " +
                        std::to_string(k));
    if (li.threshold_base + li.out_ch > prog.thresholds.size())
      throw FormatError("threshold image too small for layer " +
                        std::to_string(k));

    LayerTrace lt;
    lt.instr = li;
    lt.kernels.assign(image.begin() + static_cast<long>(li.weight_base),
                      image.begin() +
                          static_cast<long>(li.weight_base +
                                            static_cast<uint64_t>(li.out_ch) *
                                                slot));
    lt.thresholds.assign(
        prog.thresholds.begin() + static_cast<long>(li.threshold_base),
        prog.thresholds.begin() +
            static_cast<long>(li.threshold_base + li.out_ch));
    lt.active_stages = (li.out_ch + stage_ch - 1) / stage_ch;

    // Weight loading: one kernel pixel (N_I trits) per cycle into the
    // inactive bank of every OCU in parallel; overlapped with the previous
    // layer's execution for all but the first layer.
    lt.cycles.load = static_cast<uint64_t>(arch.k) * arch.k;
    lt.cycles.load_exposed =
        k == 0 ? lt.cycles.load
               : (lt.cycles.load > prev_execute ? lt.cycles.load - prev_execute
                                                : 0);
    lt.weight_load_trits = static_cast<uint64_t>(li.out_ch) * slot;
    for (uint64_t c = 0; c < lt.cycles.load_exposed; ++c)
      trace.cycle_log.push_back({static_cast<uint32_t>(cycle++),
                                 static_cast<uint16_t>(k), 0,
                                 static_cast<uint8_t>(lt.active_stages), 0, 0,
                                 -1});

    for (uint32_t oc = 0; oc < li.out_ch; ++oc) {
      ocus[oc].load_bank(1 - ocus[oc].active_bank(),
                         std::span<const int8_t>(lt.kernels.data() +
                                                     static_cast<uint64_t>(oc) *
                                                         slot,
                                                 slot));
      ocus[oc].swap_banks();
      const uint32_t fifo_cap =
          li.pool == PoolKind::None ? 0 : (arch.i_w + li.pool_w - 1) / li.pool_w;
      ocus[oc].configure(lt.thresholds[oc], li.pool, li.pool_w, li.pool_h,
                         li.conv_out_w(), fifo_cap);
    }

    TileBuffer tb(arch, li, std::span<const int8_t>(fm.data(), fm.size()));
    const uint32_t out_h = li.out_h(), out_w = li.out_w();
    const uint32_t conv_ow = li.conv_out_w();
    std::vector<int8_t> out_fm(static_cast<size_t>(out_h) * out_w * li.out_ch,
                               0);
    lt.n_windows = tb.n_windows();
    if (opts.collect_windows)
      lt.windows.reserve(static_cast<size_t>(lt.n_windows) * slot);
    lt.accumulators.reserve(static_cast<size_t>(lt.n_windows) * li.out_ch);
    lt.cycles.priming = tb.priming_cycles();
    for (uint64_t c = 0; c < lt.cycles.priming; ++c)
      trace.cycle_log.push_back({static_cast<uint32_t>(cycle++),
                                 static_cast<uint16_t>(k), 2,
                                 static_cast<uint8_t>(lt.active_stages),
                                 static_cast<uint32_t>(arch.k * li.in_ch), 0,
                                 -1});

    std::vector<int8_t> window(slot);
    uint64_t row_load = 0;
    uint32_t widx = 0;
    uint32_t out_pixel = 0;
    const uint32_t write_words_per_pixel =
        (li.out_ch + arch.fm_word_trits() - 1) / arch.fm_word_trits();
    while (tb.next_window(std::span<int8_t>(window), row_load)) {
      if (row_load > 0) {
        const uint64_t stall_cycles =
            opts.stall_on_row_advance
                ? row_load
                : (row_load > conv_ow ? row_load - conv_ow : 0);
        lt.cycles.stalls += stall_cycles;
        for (uint64_t c = 0; c < stall_cycles; ++c)
          trace.cycle_log.push_back({static_cast<uint32_t>(cycle++),
                                     static_cast<uint16_t>(k), 2,
                                     static_cast<uint8_t>(lt.active_stages),
                                     static_cast<uint32_t>(arch.k * li.in_ch),
                                     0, -1});
      }

      CycleRecord rec{static_cast<uint32_t>(cycle++),
                      static_cast<uint16_t>(k), 1,
                      static_cast<uint8_t>(lt.active_stages), 0, 0,
                      static_cast<int32_t>(widx)};
      bool emitted = false;
      for (uint32_t oc = 0; oc < li.out_ch; ++oc) {
        const Ocu::Result res = ocus[oc].step(window);
        lt.accumulators.push_back(res.acc);
        if (res.out) {
          out_fm[static_cast<size_t>(out_pixel) * li.out_ch + oc] = *res.out;
          emitted = true;
        }
      }
      if (emitted) {
        ++out_pixel;
        rec.write_trits = li.out_ch;
        lt.fm_write_trits += li.out_ch;
        lt.fm_write_words += write_words_per_pixel;
      }
      if (opts.collect_windows)
        lt.windows.insert(lt.windows.end(), window.begin(), window.end());
      trace.cycle_log.push_back(rec);
      ++widx;
    }
    if (out_pixel != static_cast<uint32_t>(out_h) * out_w)
      throw Error("internal: pooled output count mismatch");

    lt.cycles.windows = lt.n_windows;
    lt.cycles.drain = arch.p;
    for (uint64_t c = 0; c < lt.cycles.drain; ++c)
      trace.cycle_log.push_back({static_cast<uint32_t>(cycle++),
                                 static_cast<uint16_t>(k), 3,
                                 static_cast<uint8_t>(lt.active_stages), 0, 0,
                                 -1});

    lt.fm_read_words = tb.read_words();
    lt.fm_read_trits = tb.read_trits();
    lt.outputs = out_fm;
    prev_execute = lt.cycles.execute();
    trace.layers.push_back(std::move(lt));

    fm = std::move(out_fm);
    fm_h = out_h;
    fm_w = out_w;
    fm_c = li.out_ch;
  }

  trace.total_cycles = cycle;
  rr.output = PackedTritTensor::from_values({fm_h, fm_w, fm_c}, fm);
  return rr;
}

CycleReport cycle_report(const SimTrace& trace, size_t layer) {
  if (layer >= trace.layers.size()) throw Error("layer index out of range");
  const LayerTrace& lt = trace.layers[layer];
  CycleReport r;
  r.cycles = lt.cycles.load_exposed + lt.cycles.execute();
  LayerDesc equiv;
  equiv.kind = LayerKind::Conv2D;
  equiv.in_ch = lt.instr.in_ch;
  equiv.out_ch = lt.instr.out_ch;
  equiv.kh = lt.instr.kh;
  equiv.kw = lt.instr.kw;
  r.ops = op_count(equiv, lt.instr.conv_out_h(), lt.instr.conv_out_w());
  r.ops_per_cycle = static_cast<double>(r.ops) / static_cast<double>(r.cycles);
  const double peak = 2.0 * trace.arch.k * trace.arch.k * trace.arch.n_i *
                      trace.arch.n_o;
  r.utilization = r.ops_per_cycle / peak;
  return r;
}

// --- trace file I/O -----------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'C', 'T', 'R', '1'};

void put_u32(std::ostream& os, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v),
                        static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& os, uint64_t v) {
  put_u32(os, static_cast<uint32_t>(v));
  put_u32(os, static_cast<uint32_t>(v >> 32));
}

uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw FormatError("truncated trace file");
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) |
         (static_cast<uint32_t>(b[3]) << 24);
}

uint64_t get_u64(std::istream& is) {
  const uint64_t lo = get_u32(is);
  const uint64_t hi = get_u32(is);
  return lo | (hi << 32);
}

void pack_window_2bit(std::span<const int8_t> window, std::vector<uint8_t>& out) {
  std::fill(out.begin(), out.end(), uint8_t{0});
  for (size_t i = 0; i < window.size(); ++i)
    out[i / 4] |= static_cast<uint8_t>((window[i] & 0x3) << (2 * (i % 4)));
}

int8_t unpack_trit_2bit(uint8_t code) {
  // 0b00 = 0, 0b01 = +1, 0b11 = -1 (two's complement).
  if (code == 0b01) return 1;
  if (code == 0b11) return -1;
  return 0;
}

}  // namespace

uint64_t trace_record_size(const ArchConfig& arch) {
  return 16 + (arch.kernel_slot_trits() + 3) / 4;
}

void save_trace(const std::filesystem::path& path, const SimTrace& trace) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open " + path.string() + " for writing");
  os.write(kMagic, 4);
  put_u32(os, 1);
  const ArchConfig& a = trace.arch;
  for (const uint32_t v : {a.n_i, a.n_o, a.k, a.i_w, a.i_h, a.l, a.p, a.w_s})
    put_u32(os, v);
  put_u32(os, static_cast<uint32_t>(trace.layers.size()));
  for (const LayerTrace& lt : trace.layers) {
    const LayerInstr& li = lt.instr;
    for (const uint32_t v :
         {li.in_h, li.in_w, li.in_ch, li.out_ch, li.kh, li.kw, li.sh, li.sw,
          static_cast<uint32_t>(li.padding), static_cast<uint32_t>(li.pool),
          li.pool_w, li.pool_h})
      put_u32(os, v);
    put_u64(os, li.weight_base);
    put_u64(os, li.threshold_base);
    for (const uint64_t v :
         {lt.cycles.load, lt.cycles.load_exposed, lt.cycles.priming,
          lt.cycles.windows, lt.cycles.stalls, lt.cycles.drain})
      put_u64(os, v);
    for (const uint64_t v :
         {lt.fm_read_words, lt.fm_read_trits, lt.fm_write_words,
          lt.fm_write_trits, lt.weight_load_trits,
          static_cast<uint64_t>(lt.n_windows),
          static_cast<uint64_t>(lt.active_stages)})
      put_u64(os, v);
    put_u32(os, static_cast<uint32_t>(lt.thresholds.size()));
    for (const ThresholdPair& t : lt.thresholds) {
      put_u32(os, static_cast<uint32_t>(t.lo));
      put_u32(os, static_cast<uint32_t>(t.hi));
    }
    const PackedTritTensor packed = PackedTritTensor::from_values(
        {static_cast<uint32_t>(lt.kernels.size())}, lt.kernels);
    put_u64(os, packed.count());
    os.write(reinterpret_cast<const char*>(packed.payload().data()),
             static_cast<std::streamsize>(packed.payload().size()));
  }

  put_u64(os, trace.cycle_log.size());
  const uint64_t slot = a.kernel_slot_trits();
  std::vector<uint8_t> wbuf((slot + 3) / 4);
  for (const CycleRecord& rec : trace.cycle_log) {
    put_u32(os, rec.cycle);
    os.put(static_cast<char>(rec.layer & 0xff));
    os.put(static_cast<char>(rec.layer >> 8));
    os.put(static_cast<char>(rec.phase));
    os.put(static_cast<char>(rec.active_stages));
    put_u32(os, rec.read_trits);
    put_u32(os, rec.write_trits);
    std::fill(wbuf.begin(), wbuf.end(), uint8_t{0});
    if (rec.phase == 1 && rec.window >= 0) {
      const LayerTrace& lt = trace.layers[rec.layer];
      if (!lt.windows.empty())
        pack_window_2bit(
            std::span<const int8_t>(
                lt.windows.data() + static_cast<uint64_t>(rec.window) * slot,
                slot),
            wbuf);
    }
    os.write(reinterpret_cast<const char*>(wbuf.data()),
             static_cast<std::streamsize>(wbuf.size()));
  }
  if (!os) throw FormatError("write failed: " + path.string());
}

SimTrace load_trace(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open " + path.string());
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    throw FormatError("bad magic in " + path.string());
  if (get_u32(is) != 1) throw FormatError("unsupported trace version");

  SimTrace trace;
  ArchConfig& a = trace.arch;
  a.n_i = get_u32(is);
  a.n_o = get_u32(is);
  a.k = get_u32(is);
  a.i_w = get_u32(is);
  a.i_h = get_u32(is);
  a.l = get_u32(is);
  a.p = get_u32(is);
  a.w_s = get_u32(is);

  const uint32_t n_layers = get_u32(is);
  trace.layers.resize(n_layers);
  const uint64_t slot = a.kernel_slot_trits();
  for (LayerTrace& lt : trace.layers) {
    LayerInstr& li = lt.instr;
    li.in_h = get_u32(is);
    li.in_w = get_u32(is);
    li.in_ch = get_u32(is);
    li.out_ch = get_u32(is);
    li.kh = get_u32(is);
    li.kw = get_u32(is);
    li.sh = get_u32(is);
    li.sw = get_u32(is);
    li.padding = get_u32(is) != 0;
    li.pool = static_cast<PoolKind>(get_u32(is));
    li.pool_w = get_u32(is);
    li.pool_h = get_u32(is);
    li.weight_base = get_u64(is);
    li.threshold_base = get_u64(is);
    lt.cycles.load = get_u64(is);
    lt.cycles.load_exposed = get_u64(is);
    lt.cycles.priming = get_u64(is);
    lt.cycles.windows = get_u64(is);
    lt.cycles.stalls = get_u64(is);
    lt.cycles.drain = get_u64(is);
    lt.fm_read_words = get_u64(is);
    lt.fm_read_trits = get_u64(is);
    lt.fm_write_words = get_u64(is);
    lt.fm_write_trits = get_u64(is);
    lt.weight_load_trits = get_u64(is);
    lt.n_windows = static_cast<uint32_t>(get_u64(is));
    lt.active_stages = static_cast<uint32_t>(get_u64(is));
    const uint32_t n_thr = get_u32(is);
    lt.thresholds.resize(n_thr);
    for (ThresholdPair& t : lt.thresholds) {
      t.lo = static_cast<int32_t>(get_u32(is));
      t.hi = static_cast<int32_t>(get_u32(is));
    }
    const uint64_t n_kernel_trits = get_u64(is);
    std::vector<uint8_t> payload(static_cast<size_t>((n_kernel_trits + 4) / 5));
    is.read(reinterpret_cast<char*>(payload.data()),
            static_cast<std::streamsize>(payload.size()));
    if (!is) throw FormatError("truncated kernel payload");
    lt.kernels = PackedTritTensor::from_payload(
                     {static_cast<uint32_t>(n_kernel_trits)}, payload)
                     .unpack();
    lt.windows.reserve(static_cast<size_t>(lt.n_windows) * slot);
  }

  const uint64_t n_cycles = get_u64(is);
  trace.cycle_log.resize(static_cast<size_t>(n_cycles));
  std::vector<uint8_t> wbuf((slot + 3) / 4);
  for (CycleRecord& rec : trace.cycle_log) {
    rec.cycle = get_u32(is);
    const int lo = is.get();
    const int hi = is.get();
    const int phase = is.get();
    const int stages = is.get();
    if (hi < 0 || stages < 0) throw FormatError("truncated cycle record");
    rec.layer = static_cast<uint16_t>(lo | (hi << 8));
    rec.phase = static_cast<uint8_t>(phase);
    rec.active_stages = static_cast<uint8_t>(stages);
    rec.read_trits = get_u32(is);
    rec.write_trits = get_u32(is);
    is.read(reinterpret_cast<char*>(wbuf.data()),
            static_cast<std::streamsize>(wbuf.size()));
    if (!is) throw FormatError("truncated window payload");
    rec.window = -1;
    if (rec.phase == 1) {
      LayerTrace& lt = trace.layers[rec.layer];
      rec.window = static_cast<int32_t>(lt.windows.size() / slot);
      for (uint64_t i = 0; i < slot; ++i)
        lt.windows.push_back(
            unpack_trit_2bit((wbuf[i / 4] >> (2 * (i % 4))) & 0x3));
    }
  }
  trace.total_cycles = n_cycles;
  return trace;
}

}  // namespace cutie
