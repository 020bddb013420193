#include "cutie/golden.hpp"

#include <algorithm>
#include <cmath>

namespace cutie {
namespace golden {

RefTensor ref_conv(const RefTensor& input, std::span<const int8_t> kernels,
                   uint32_t out_ch, uint32_t kh, uint32_t kw, uint32_t sh,
                   uint32_t sw, bool padding) {
  const auto [oh, ow] =
      conv_output_dims(input.h, input.w, kh, kw, sh, sw,
                       padding ? Padding::Full : Padding::None);
  const uint64_t ksize = static_cast<uint64_t>(kh) * kw * input.c;
  if (kernels.size() != ksize * out_ch)
    throw ShapeError("kernel tensor does not match conv geometry");
  const int64_t pad_h = padding ? kh / 2 : 0;
  const int64_t pad_w = padding ? kw / 2 : 0;

  RefTensor out(oh, ow, out_ch);
  for (uint32_t y = 0; y < oh; ++y)
    for (uint32_t x = 0; x < ow; ++x)
      for (uint32_t o = 0; o < out_ch; ++o) {
        int32_t acc = 0;
        const int8_t* k = kernels.data() + o * ksize;
        for (uint32_t ky = 0; ky < kh; ++ky)
          for (uint32_t kx = 0; kx < kw; ++kx) {
            const int64_t iy = static_cast<int64_t>(y) * sh - pad_h + ky;
            const int64_t ix = static_cast<int64_t>(x) * sw - pad_w + kx;
            if (iy < 0 || iy >= input.h || ix < 0 || ix >= input.w) continue;
            for (uint32_t ci = 0; ci < input.c; ++ci)
              acc += input.at(static_cast<uint32_t>(iy),
                              static_cast<uint32_t>(ix), ci) *
                     k[(static_cast<uint64_t>(ky) * kw + kx) * input.c + ci];
          }
        out.at(y, x, o) = acc;
      }
  return out;
}

RefTensor ref_threshold(const RefTensor& acc,
                        std::span<const ThresholdPair> pairs) {
  if (pairs.size() != acc.c)
    throw ShapeError("threshold pair count does not match channels");
  RefTensor out(acc.h, acc.w, acc.c);
  for (uint32_t y = 0; y < acc.h; ++y)
    for (uint32_t x = 0; x < acc.w; ++x)
      for (uint32_t c = 0; c < acc.c; ++c)
        out.at(y, x, c) = apply_thresholds(acc.at(y, x, c), pairs[c]);
  return out;
}

namespace {

RefTensor pool_reduce(const RefTensor& t, uint32_t pw, uint32_t ph, bool max) {
  if (ph == 0 || pw == 0 || t.h % ph != 0 || t.w % pw != 0)
    throw ShapeError("pooling window does not divide feature map");
  RefTensor out(t.h / ph, t.w / pw, t.c);
  for (uint32_t y = 0; y < out.h; ++y)
    for (uint32_t x = 0; x < out.w; ++x)
      for (uint32_t c = 0; c < t.c; ++c) {
        int32_t r = max ? INT32_MIN : 0;
        for (uint32_t dy = 0; dy < ph; ++dy)
          for (uint32_t dx = 0; dx < pw; ++dx) {
            const int32_t v = t.at(y * ph + dy, x * pw + dx, c);
            r = max ? std::max(r, v) : r + v;
          }
        out.at(y, x, c) = r;
      }
  return out;
}

RefTensor unpack_to_ref(const PackedTritTensor& t) {
  const auto& d = t.dims();
  if (d.size() != 3) throw ShapeError("expected an (H, W, C) trit tensor");
  RefTensor r(d[0], d[1], d[2]);
  const auto vals = t.unpack();
  for (size_t i = 0; i < vals.size(); ++i) r.v[i] = vals[i];
  return r;
}

PackedTritTensor pack_from_ref(const RefTensor& r) {
  std::vector<int8_t> vals(r.v.size());
  for (size_t i = 0; i < vals.size(); ++i)
    vals[i] = static_cast<int8_t>(r.v[i]);
  return PackedTritTensor::from_values({r.h, r.w, r.c}, vals);
}

}  // namespace

RefTensor ref_pool_max(const RefTensor& trits, uint32_t pw, uint32_t ph) {
  return pool_reduce(trits, pw, ph, true);
}

RefTensor ref_pool_sum(const RefTensor& acc, uint32_t pw, uint32_t ph) {
  return pool_reduce(acc, pw, ph, false);
}

PackedTritTensor ref_run(const CompiledProgram& prog,
                         const PackedTritTensor& input) {
  RefTensor fm = unpack_to_ref(input);
  const auto image = prog.weight_image.unpack();
  const uint64_t slot = prog.arch.kernel_slot_trits();

  for (const LayerInstr& li : prog.instrs) {
    if (fm.h != li.in_h || fm.w != li.in_w || fm.c != li.in_ch)
      throw ShapeError("feature map does not match layer instruction dims");

    // Recover the active kh x kw x in_ch kernels from the centered,
    // zero-padded K x K x N_I slots.
    const uint64_t ksize = static_cast<uint64_t>(li.kh) * li.kw * li.in_ch;
    std::vector<int8_t> kernels(ksize * li.out_ch);
    const uint32_t oh = (prog.arch.k - li.kh) / 2;
    const uint32_t ow = (prog.arch.k - li.kw) / 2;
    for (uint32_t o = 0; o < li.out_ch; ++o)
      for (uint32_t ky = 0; ky < li.kh; ++ky)
        for (uint32_t kx = 0; kx < li.kw; ++kx)
          for (uint32_t ci = 0; ci < li.in_ch; ++ci)
            kernels[((static_cast<uint64_t>(o) * li.kh + ky) * li.kw + kx) *
                        li.in_ch +
                    ci] =
                image[li.weight_base + o * slot +
                      (static_cast<uint64_t>(oh + ky) * prog.arch.k +
                       (ow + kx)) *
                          prog.arch.n_i +
                      ci];

    const RefTensor acc = ref_conv(fm, kernels, li.out_ch, li.kh, li.kw,
                                   li.sh, li.sw, li.padding);
    const std::span<const ThresholdPair> pairs(
        prog.thresholds.data() + li.threshold_base, li.out_ch);

    switch (li.pool) {
      case PoolKind::None:
        fm = ref_threshold(acc, pairs);
        break;
      case PoolKind::Max:
        fm = ref_pool_max(ref_threshold(acc, pairs), li.pool_w, li.pool_h);
        break;
      case PoolKind::Avg:
        fm = ref_threshold(ref_pool_sum(acc, li.pool_w, li.pool_h), pairs);
        break;
    }
  }
  return pack_from_ref(fm);
}

// --- real-valued reference path ---------------------------------------------

namespace {

struct RealFm {
  uint32_t h = 0, w = 0, c = 0;
  std::vector<double> v;

  RealFm(uint32_t h_, uint32_t w_, uint32_t c_)
      : h(h_), w(w_), c(c_), v(static_cast<size_t>(h_) * w_ * c_, 0.0) {}
  double at(uint32_t y, uint32_t x, uint32_t ch) const {
    return v[(static_cast<size_t>(y) * w + x) * c + ch];
  }
  double& at(uint32_t y, uint32_t x, uint32_t ch) {
    return v[(static_cast<size_t>(y) * w + x) * c + ch];
  }
};

std::vector<double> weight_values(const LayerDesc& l) {
  if (l.has_real_weights()) return std::get<RealTensor>(l.weights).values;
  if (l.has_ternary_weights()) {
    const auto t = std::get<PackedTritTensor>(l.weights).unpack();
    return std::vector<double>(t.begin(), t.end());
  }
  throw UnsupportedGraph("layer has no weights");
}

RealFm real_conv(const RealFm& in, const LayerDesc& l) {
  const auto [oh, ow] = conv_output_dims(in.h, in.w, l.kh, l.kw, l.sh, l.sw,
                                         l.padding);
  const auto w = weight_values(l);
  const uint64_t ksize = static_cast<uint64_t>(l.kh) * l.kw * l.in_ch;
  const int64_t pad_h = l.padding == Padding::Full ? l.kh / 2 : 0;
  const int64_t pad_w = l.padding == Padding::Full ? l.kw / 2 : 0;
  RealFm out(oh, ow, l.out_ch);
  for (uint32_t y = 0; y < oh; ++y)
    for (uint32_t x = 0; x < ow; ++x)
      for (uint32_t o = 0; o < l.out_ch; ++o) {
        double acc = 0.0;
        for (uint32_t ky = 0; ky < l.kh; ++ky)
          for (uint32_t kx = 0; kx < l.kw; ++kx) {
            const int64_t iy = static_cast<int64_t>(y) * l.sh - pad_h + ky;
            const int64_t ix = static_cast<int64_t>(x) * l.sw - pad_w + kx;
            if (iy < 0 || iy >= in.h || ix < 0 || ix >= in.w) continue;
            for (uint32_t ci = 0; ci < l.in_ch; ++ci)
              acc += in.at(static_cast<uint32_t>(iy),
                           static_cast<uint32_t>(ix), ci) *
                     w[(o * ksize) +
                       (static_cast<uint64_t>(ky) * l.kw + kx) * l.in_ch + ci];
          }
        out.at(y, x, o) = acc;
      }
  return out;
}

double bn_apply(const BatchNorm& bn, uint32_t c, double a) {
  const double s = std::sqrt(bn.sigma2[c] + bn.eps[c]);
  return bn.gamma[c] * (a - bn.mu[c]) / s + bn.beta[c];
}

double hardtanh(double y) { return std::clamp(y, -1.0, 1.0); }

// Integer decision boundaries of this layer, derived independently of the
// compiler (same math, separate code path).
ThresholdPair own_fold(const BatchNorm& bn, uint32_t c) {
  const double gamma = bn.gamma[c];
  if (gamma == 0.0) throw DegenerateChannel("gamma == 0");
  const double sign = gamma > 0 ? 1.0 : -1.0;
  if (sign < 0) throw Error("reference fold expects gamma > 0");
  const double s = std::sqrt(bn.sigma2[c] + bn.eps[c]);
  ThresholdPair t;
  t.hi = static_cast<int32_t>(std::ceil((0.5 - bn.beta[c]) * s / gamma +
                                        bn.mu[c]));
  t.lo = static_cast<int32_t>(std::ceil((-0.5 - bn.beta[c]) * s / gamma +
                                        bn.mu[c]));
  return t;
}

BatchNorm unit_bn_for(uint32_t channels) {
  BatchNorm bn;
  bn.gamma.assign(channels, 1.0);
  bn.beta.assign(channels, 0.0);
  bn.mu.assign(channels, 0.0);
  bn.sigma2.assign(channels, 1.0);
  bn.eps.assign(channels, 0.0);
  return bn;
}

}  // namespace

PackedTritTensor ref_run(const NetworkDesc& net,
                         const PackedTritTensor& input) {
  const auto in_dims = input.dims();
  if (in_dims.size() != 3) throw ShapeError("expected an (H, W, C) input");
  RealFm fm(in_dims[0], in_dims[1], in_dims[2]);
  {
    const auto vals = input.unpack();
    for (size_t i = 0; i < vals.size(); ++i) fm.v[i] = vals[i];
  }

  for (size_t i = 0; i < net.layers.size(); ++i) {
    LayerDesc l = net.layers[i];
    if (l.kind == LayerKind::MaxPool || l.kind == LayerKind::AvgPool)
      throw UnsupportedGraph("pooling without preceding conv");
    if (l.kind == LayerKind::FullyConnected) {
      // Flatten to a 1x1 pixel and treat as a 1x1 conv.
      RealFm flat(1, 1, static_cast<uint32_t>(fm.v.size()));
      flat.v = fm.v;
      fm = std::move(flat);
      l.kind = LayerKind::Conv2D;
      l.kh = l.kw = 1;
      l.sh = l.sw = 1;
      l.padding = Padding::None;
      if (l.has_real_weights()) {
        auto& w = std::get<RealTensor>(l.weights);
        w.dims = {l.out_ch, 1, 1, l.in_ch};
      }
    }
    if (l.depthwise) l = lower_depthwise(l);
    if (l.in_ch != fm.c) throw ShapeError("channel chaining mismatch");

    const BatchNorm bn_raw = l.bn ? *l.bn : unit_bn_for(l.out_ch);
    // The sign-normalized layer is used so gamma > 0 holds; this is the
    // same functional layer by construction.
    LayerDesc norm = l;
    norm.bn = bn_raw;
    norm = normalize_gamma_sign(norm);
    const BatchNorm& bn = *norm.bn;

    const RealFm acc = real_conv(fm, norm);

    const bool has_pool = i + 1 < net.layers.size() &&
                          (net.layers[i + 1].kind == LayerKind::MaxPool ||
                           net.layers[i + 1].kind == LayerKind::AvgPool);
    if (has_pool && net.layers[i + 1].kind == LayerKind::AvgPool) {
      const LayerDesc& pool = net.layers[i + 1];
      if (!norm.has_ternary_weights())
        throw UnsupportedGraph(
            "average pooling reference requires ternary weights");
      // Sum raw accumulators per window, then compare against the layer's
      // integer decision boundary scaled by the pool area.
      if (acc.h % pool.kh != 0 || acc.w % pool.kw != 0)
        throw ShapeError("pooling window does not divide feature map");
      const int64_t area = static_cast<int64_t>(pool.kh) * pool.kw;
      RealFm out(acc.h / pool.kh, acc.w / pool.kw, acc.c);
      for (uint32_t y = 0; y < out.h; ++y)
        for (uint32_t x = 0; x < out.w; ++x)
          for (uint32_t c = 0; c < acc.c; ++c) {
            int64_t sum = 0;
            for (uint32_t dy = 0; dy < pool.kh; ++dy)
              for (uint32_t dx = 0; dx < pool.kw; ++dx)
                sum += static_cast<int64_t>(std::llround(
                    acc.at(y * pool.kh + dy, x * pool.kw + dx, c)));
            const ThresholdPair t = own_fold(bn, c);
            const int64_t hi = static_cast<int64_t>(t.hi) * area;
            const int64_t lo = static_cast<int64_t>(t.lo) * area;
            out.at(y, x, c) = sum >= hi ? 1 : (sum < lo ? -1 : 0);
          }
      fm = std::move(out);
      ++i;
      continue;
    }

    // Per-pixel: batch-norm, Hardtanh, ternarize.
    RealFm trits(acc.h, acc.w, acc.c);
    for (uint32_t y = 0; y < acc.h; ++y)
      for (uint32_t x = 0; x < acc.w; ++x)
        for (uint32_t c = 0; c < acc.c; ++c)
          trits.at(y, x, c) =
              ternarize_float(hardtanh(bn_apply(bn, c, acc.at(y, x, c))));

    if (has_pool) {  // max pooling on the ternarized values
      const LayerDesc& pool = net.layers[i + 1];
      if (trits.h % pool.kh != 0 || trits.w % pool.kw != 0)
        throw ShapeError("pooling window does not divide feature map");
      RealFm out(trits.h / pool.kh, trits.w / pool.kw, trits.c);
      for (uint32_t y = 0; y < out.h; ++y)
        for (uint32_t x = 0; x < out.w; ++x)
          for (uint32_t c = 0; c < trits.c; ++c) {
            double m = -2.0;
            for (uint32_t dy = 0; dy < pool.kh; ++dy)
              for (uint32_t dx = 0; dx < pool.kw; ++dx)
                m = std::max(m,
                             trits.at(y * pool.kh + dy, x * pool.kw + dx, c));
            out.at(y, x, c) = m;
          }
      fm = std::move(out);
      ++i;
    } else {
      fm = std::move(trits);
    }
  }

  std::vector<int8_t> vals(fm.v.size());
  for (size_t i = 0; i < vals.size(); ++i)
    vals[i] = static_cast<int8_t>(std::llround(fm.v[i]));
  return PackedTritTensor::from_values({fm.h, fm.w, fm.c}, vals);
}

}  // namespace golden
}  // namespace cutie
