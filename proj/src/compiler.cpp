#include "cutie/compiler.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

namespace cutie {

uint32_t LayerInstr::conv_out_h() const {
  return conv_output_dims(in_h, in_w, kh, kw, sh, sw,
                          padding ? Padding::Full : Padding::None)
      .first;
}

uint32_t LayerInstr::conv_out_w() const {
  return conv_output_dims(in_h, in_w, kh, kw, sh, sw,
                          padding ? Padding::Full : Padding::None)
      .second;
}

namespace {

int32_t clamp_threshold(double t, int64_t bound) {
  const double c = std::ceil(t);
  if (c > static_cast<double>(bound)) return static_cast<int32_t>(bound);
  if (c < static_cast<double>(-bound)) return static_cast<int32_t>(-bound);
  return static_cast<int32_t>(c);
}

BatchNorm unit_bn(uint32_t channels) {
  BatchNorm bn;
  bn.gamma.assign(channels, 1.0);
  bn.beta.assign(channels, 0.0);
  bn.mu.assign(channels, 0.0);
  bn.sigma2.assign(channels, 1.0);
  bn.eps.assign(channels, 0.0);
  return bn;
}

}  // namespace

std::vector<ThresholdPair> fold_thresholds(const LayerDesc& conv) {
  const BatchNorm bn = conv.bn ? *conv.bn : unit_bn(conv.out_ch);
  if (!bn.consistent() || bn.channels() != conv.out_ch)
    throw ShapeError("batch-norm parameter count mismatch");

  // Accumulator range of this layer; +-(range + 1) encodes never-fire.
  const int64_t bound =
      static_cast<int64_t>(conv.kh) * conv.kw * conv.in_ch + 1;

  std::vector<ThresholdPair> pairs(conv.out_ch);
  for (uint32_t c = 0; c < conv.out_ch; ++c) {
    const double gamma = bn.gamma[c];
    if (gamma == 0.0)
      throw DegenerateChannel("channel " + std::to_string(c) +
                              " has gamma == 0");
    if (gamma < 0.0)
      throw Error("fold_thresholds requires gamma > 0; "
                  "run normalize_gamma_sign first");
    const double s = std::sqrt(bn.sigma2[c] + bn.eps[c]);
    const double t_hi = (0.5 - bn.beta[c]) * s / gamma + bn.mu[c];
    const double t_lo = (-0.5 - bn.beta[c]) * s / gamma + bn.mu[c];
    pairs[c].hi = clamp_threshold(t_hi, bound);
    pairs[c].lo = clamp_threshold(t_lo, bound);
  }
  return pairs;
}

LayerDesc normalize_gamma_sign(const LayerDesc& conv) {
  LayerDesc out = conv;
  if (!out.bn) return out;
  const uint64_t kernel_size =
      static_cast<uint64_t>(out.kh) * out.kw * out.in_ch;

  std::vector<int8_t> trits;
  if (out.has_ternary_weights())
    trits = std::get<PackedTritTensor>(out.weights).unpack();

  for (uint32_t c = 0; c < out.out_ch; ++c) {
    if (out.bn->gamma[c] >= 0.0) continue;
    out.bn->gamma[c] = -out.bn->gamma[c];
    out.bn->mu[c] = -out.bn->mu[c];
    const uint64_t base = c * kernel_size;
    if (!trits.empty()) {
      for (uint64_t i = 0; i < kernel_size; ++i)
        trits[base + i] = static_cast<int8_t>(-trits[base + i]);
    } else if (out.has_real_weights()) {
      auto& w = std::get<RealTensor>(out.weights).values;
      for (uint64_t i = 0; i < kernel_size; ++i) w[base + i] = -w[base + i];
    }
  }
  if (!trits.empty())
    out.weights = PackedTritTensor::from_values(
        std::get<PackedTritTensor>(conv.weights).dims(), trits);
  return out;
}

LayerInstr fuse_pooling(const LayerInstr& conv_instr, const LayerDesc& pool,
                        std::span<ThresholdPair> layer_thresholds) {
  if (pool.kind != LayerKind::MaxPool && pool.kind != LayerKind::AvgPool)
    throw UnsupportedGraph("fuse_pooling expects a pooling layer");
  LayerInstr out = conv_instr;
  const uint32_t oh = conv_instr.conv_out_h();
  const uint32_t ow = conv_instr.conv_out_w();
  if (pool.kh > oh || pool.kw > ow)
    throw UnsupportedGraph("pooling window exceeds conv output");
  if (oh % pool.kh != 0 || ow % pool.kw != 0)
    throw UnsupportedGraph("pooling window does not divide conv output");
  out.pool = pool.kind == LayerKind::MaxPool ? PoolKind::Max : PoolKind::Avg;
  out.pool_h = pool.kh;
  out.pool_w = pool.kw;
  if (out.pool == PoolKind::Avg) {
    const int64_t area = static_cast<int64_t>(pool.kh) * pool.kw;
    const int64_t bound =
        (static_cast<int64_t>(conv_instr.kh) * conv_instr.kw *
             conv_instr.in_ch) *
            area +
        1;
    for (ThresholdPair& t : layer_thresholds) {
      const int64_t hi = static_cast<int64_t>(t.hi) * area;
      const int64_t lo = static_cast<int64_t>(t.lo) * area;
      t.hi = static_cast<int32_t>(std::clamp(hi, -bound, bound));
      t.lo = static_cast<int32_t>(std::clamp(lo, -bound, bound));
    }
  }
  return out;
}

LayerDesc lower_dense(const LayerDesc& fc, const ArchConfig& arch) {
  if (fc.kind != LayerKind::FullyConnected)
    throw UnsupportedGraph("lower_dense expects a dense layer");
  const uint64_t features = fc.in_ch;
  if (features > arch.kernel_slot_trits())
    throw UnsupportedGraph("dense input " + std::to_string(features) +
                           " exceeds K*K*N_I = " +
                           std::to_string(arch.kernel_slot_trits()));
  if (fc.out_ch > arch.n_o)
    throw UnsupportedGraph("dense output exceeds N_O");

  LayerDesc out = fc;
  out.kind = LayerKind::Conv2D;
  out.sh = out.sw = 1;
  out.padding = Padding::None;
  out.depthwise = false;

  if (features <= arch.n_i) {
    // 1x1 kernel over the producer's 1x1xF pixel.
    out.kh = out.kw = 1;
    out.in_ch = static_cast<uint32_t>(features);
    if (fc.has_ternary_weights()) {
      auto w = std::get<PackedTritTensor>(fc.weights).unpack();
      out.weights = PackedTritTensor::from_values(
          {fc.out_ch, 1, 1, out.in_ch}, w);
    } else if (fc.has_real_weights()) {
      RealTensor w = std::get<RealTensor>(fc.weights);
      w.dims = {fc.out_ch, 1, 1, out.in_ch};
      out.weights = std::move(w);
    }
    return out;
  }

  // KxK kernel over a KxKxN_I map holding the flattened features.
  out.kh = out.kw = arch.k;
  out.in_ch = arch.n_i;
  const uint64_t slot = arch.kernel_slot_trits();
  if (fc.has_ternary_weights()) {
    const auto w = std::get<PackedTritTensor>(fc.weights).unpack();
    std::vector<int8_t> padded(fc.out_ch * slot, 0);
    for (uint32_t o = 0; o < fc.out_ch; ++o)
      for (uint64_t f = 0; f < features; ++f)
        padded[o * slot + f] = w[o * features + f];
    out.weights = PackedTritTensor::from_values(
        {fc.out_ch, arch.k, arch.k, arch.n_i}, padded);
  } else if (fc.has_real_weights()) {
    const auto& w = std::get<RealTensor>(fc.weights).values;
    RealTensor padded;
    padded.dims = {fc.out_ch, arch.k, arch.k, arch.n_i};
    padded.values.assign(fc.out_ch * slot, 0.0);
    for (uint32_t o = 0; o < fc.out_ch; ++o)
      for (uint64_t f = 0; f < features; ++f)
        padded.values[o * slot + f] = w[o * features + f];
    out.weights = std::move(padded);
  }
  return out;
}

LayerDesc lower_depthwise(const LayerDesc& dw) {
  if (!dw.depthwise) return dw;
  if (dw.in_ch != dw.out_ch)
    throw UnsupportedGraph("depthwise layer with in_ch != out_ch");
  LayerDesc out = dw;
  out.depthwise = false;
  const uint64_t taps = static_cast<uint64_t>(dw.kh) * dw.kw;

  if (dw.has_ternary_weights()) {
    const auto w = std::get<PackedTritTensor>(dw.weights).unpack();
    if (w.size() != taps * dw.out_ch)
      throw ShapeError("depthwise weights must have dims {out_ch, kh, kw, 1}");
    std::vector<int8_t> full(
        static_cast<size_t>(dw.out_ch) * taps * dw.in_ch, 0);
    for (uint32_t c = 0; c < dw.out_ch; ++c)
      for (uint64_t t = 0; t < taps; ++t)
        full[(c * taps + t) * dw.in_ch + c] = w[c * taps + t];
    out.weights = PackedTritTensor::from_values(
        {dw.out_ch, dw.kh, dw.kw, dw.in_ch}, full);
  } else if (dw.has_real_weights()) {
    const auto& w = std::get<RealTensor>(dw.weights).values;
    if (w.size() != taps * dw.out_ch)
      throw ShapeError("depthwise weights must have dims {out_ch, kh, kw, 1}");
    RealTensor full;
    full.dims = {dw.out_ch, dw.kh, dw.kw, dw.in_ch};
    full.values.assign(static_cast<size_t>(dw.out_ch) * taps * dw.in_ch, 0.0);
    for (uint32_t c = 0; c < dw.out_ch; ++c)
      for (uint64_t t = 0; t < taps; ++t)
        full.values[(c * taps + t) * dw.in_ch + c] = w[c * taps + t];
    out.weights = std::move(full);
  }
  return out;
}

CompiledProgram emit_program(const NetworkDesc& net, const ArchConfig& arch) {
  {
    const auto violations = validate(net, arch);
    if (!violations.empty()) {
      std::string msg = "network fails validation:";
      for (const auto& v : violations)
        msg += "\n  layer " + std::to_string(v.layer) + ": " + v.message;
      throw UnsupportedGraph(msg);
    }
  }

  CompiledProgram prog;
  prog.arch = arch;
  const uint64_t slot = arch.kernel_slot_trits();
  std::vector<int8_t> image;

  const auto shapes = chain_shapes(net);
  for (size_t i = 0; i < net.layers.size(); ++i) {
    const LayerDesc* src = &net.layers[i];
    if (src->kind == LayerKind::MaxPool || src->kind == LayerKind::AvgPool)
      throw UnsupportedGraph("pooling without preceding conv at layer " +
                             std::to_string(i));

    LayerDesc lowered = *src;
    if (lowered.kind == LayerKind::FullyConnected)
      lowered = lower_dense(lowered, arch);
    if (lowered.depthwise) lowered = lower_depthwise(lowered);
    if (!lowered.has_ternary_weights())
      throw UnsupportedGraph("layer " + std::to_string(i) +
                             " has no ternary weights; quantize first");
    if (!lowered.bn) lowered.bn = unit_bn(lowered.out_ch);
    lowered = normalize_gamma_sign(lowered);
    std::vector<ThresholdPair> pairs = fold_thresholds(lowered);

    LayerInstr instr;
    if (src->kind == LayerKind::FullyConnected && src->in_ch <= arch.n_i) {
      instr.in_h = instr.in_w = 1;
    } else if (src->kind == LayerKind::FullyConnected) {
      instr.in_h = instr.in_w = arch.k;
    } else {
      instr.in_h = shapes[i].in_h;
      instr.in_w = shapes[i].in_w;
    }
    instr.in_ch = lowered.in_ch;
    instr.out_ch = lowered.out_ch;
    instr.kh = lowered.kh;
    instr.kw = lowered.kw;
    instr.sh = lowered.sh;
    instr.sw = lowered.sw;
    instr.padding = lowered.padding == Padding::Full;
    instr.weight_base = image.size();
    instr.threshold_base = prog.thresholds.size();

    // Zero-padded kernel packing: the kh x kw kernel sits centered in the
    // K x K slot, channels 0..in_ch-1 in the N_I-deep direction.
    const auto kernel = std::get<PackedTritTensor>(lowered.weights).unpack();
    const uint32_t oh = (arch.k - lowered.kh) / 2;
    const uint32_t ow = (arch.k - lowered.kw) / 2;
    image.resize(image.size() + static_cast<size_t>(lowered.out_ch) * slot, 0);
    int8_t* dst = image.data() + instr.weight_base;
    for (uint32_t o = 0; o < lowered.out_ch; ++o) {
      const int8_t* ksrc =
          kernel.data() +
          static_cast<uint64_t>(o) * lowered.kh * lowered.kw * lowered.in_ch;
      for (uint32_t r = 0; r < lowered.kh; ++r)
        for (uint32_t s = 0; s < lowered.kw; ++s)
          std::memcpy(dst + o * slot +
                          (static_cast<uint64_t>(oh + r) * arch.k + (ow + s)) *
                              arch.n_i,
                      ksrc + (static_cast<uint64_t>(r) * lowered.kw + s) *
                                 lowered.in_ch,
                      lowered.in_ch);
    }

    // Fuse an immediately following pooling layer.
    if (i + 1 < net.layers.size() &&
        (net.layers[i + 1].kind == LayerKind::MaxPool ||
         net.layers[i + 1].kind == LayerKind::AvgPool)) {
      instr = fuse_pooling(instr, net.layers[i + 1],
                           std::span<ThresholdPair>(pairs));
      ++i;
    }

    prog.thresholds.insert(prog.thresholds.end(), pairs.begin(), pairs.end());
    prog.instrs.push_back(instr);
  }

  if (prog.instrs.size() > arch.l)
    throw QueueOverflow("program needs " + std::to_string(prog.instrs.size()) +
                        " layer slots but L = " + std::to_string(arch.l));

  const uint32_t n_kernels = static_cast<uint32_t>(image.size() / slot);
  prog.weight_image = PackedTritTensor::from_values(
      {n_kernels, static_cast<uint32_t>(slot)}, image);
  return prog;
}

// --- `.ctprog` I/O ----------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'C', 'T', 'P', '1'};

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

void put_i32(std::ostream& os, int32_t v) {
  put_u32(os, static_cast<uint32_t>(v));
}

uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw FormatError("truncated program file");
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) |
         (static_cast<uint32_t>(b[3]) << 24);
}

uint64_t get_u64(std::istream& is) {
  const uint64_t lo = get_u32(is);
  const uint64_t hi = get_u32(is);
  return lo | (hi << 32);
}

int32_t get_i32(std::istream& is) { return static_cast<int32_t>(get_u32(is)); }

}  // namespace

void save_program(const std::filesystem::path& path,
                  const CompiledProgram& p) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open " + path.string() + " for writing");
  os.write(kMagic, 4);
  put_u32(os, 1);
  for (const uint32_t v : {p.arch.n_i, p.arch.n_o, p.arch.k, p.arch.i_w,
                           p.arch.i_h, p.arch.l, p.arch.p, p.arch.w_s})
    put_u32(os, v);
  put_u32(os, static_cast<uint32_t>(p.instrs.size()));
  for (const LayerInstr& li : p.instrs) {
    for (const uint32_t v :
         {li.in_h, li.in_w, li.in_ch, li.out_ch, li.kh, li.kw, li.sh, li.sw,
          static_cast<uint32_t>(li.padding), static_cast<uint32_t>(li.pool),
          li.pool_w, li.pool_h})
      put_u32(os, v);
    put_u64(os, li.weight_base);
    put_u64(os, li.threshold_base);
  }
  put_u32(os, static_cast<uint32_t>(p.thresholds.size()));
  for (const ThresholdPair& t : p.thresholds) {
    put_i32(os, t.lo);
    put_i32(os, t.hi);
  }
  const auto& dims = p.weight_image.dims();
  os.put(static_cast<char>(dims.size()));
  for (const uint32_t d : dims) put_u32(os, d);
  put_u64(os, p.weight_image.count());
  os.write(reinterpret_cast<const char*>(p.weight_image.payload().data()),
           static_cast<std::streamsize>(p.weight_image.payload().size()));
  if (!os) throw FormatError("write failed: " + path.string());
}

CompiledProgram load_program(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open " + path.string());
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    throw FormatError("bad magic in " + path.string());
  if (get_u32(is) != 1) throw FormatError("unsupported program version");

  CompiledProgram p;
  p.arch.n_i = get_u32(is);
  p.arch.n_o = get_u32(is);
  p.arch.k = get_u32(is);
  p.arch.i_w = get_u32(is);
  p.arch.i_h = get_u32(is);
  p.arch.l = get_u32(is);
  p.arch.p = get_u32(is);
  p.arch.w_s = get_u32(is);

  const uint32_t n_instr = get_u32(is);
  p.instrs.resize(n_instr);
  for (LayerInstr& li : p.instrs) {
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
  }
  const uint32_t n_pairs = get_u32(is);
  p.thresholds.resize(n_pairs);
  for (ThresholdPair& t : p.thresholds) {
    t.lo = get_i32(is);
    t.hi = get_i32(is);
  }
  const int rank = is.get();
  if (rank < 0) throw FormatError("truncated weight image header");
  std::vector<uint32_t> dims(static_cast<size_t>(rank));
  for (auto& d : dims) d = get_u32(is);
  const uint64_t count = get_u64(is);
  if (count != dims_product(dims))
    throw FormatError("weight image dims do not match trit count");
  std::vector<uint8_t> payload(static_cast<size_t>((count + 4) / 5));
  is.read(reinterpret_cast<char*>(payload.data()),
          static_cast<std::streamsize>(payload.size()));
  if (!is) throw FormatError("truncated weight image in " + path.string());
  p.weight_image =
      PackedTritTensor::from_payload(std::move(dims), std::move(payload));
  return p;
}

}  // namespace cutie
