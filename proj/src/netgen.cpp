#include "cutie/netgen.hpp"

#include <cmath>

namespace cutie {

PackedTritTensor make_random_kernels(Rng& rng, uint32_t out_ch, uint32_t kh,
                                     uint32_t kw, uint32_t in_ch,
                                     double zero_prob) {
  const uint64_t n = static_cast<uint64_t>(out_ch) * kh * kw * in_ch;
  std::vector<int8_t> v(static_cast<size_t>(n));
  for (auto& t : v) t = rng.trit(zero_prob);
  return PackedTritTensor::from_values({out_ch, kh, kw, in_ch}, v);
}

BatchNorm make_random_bn(Rng& rng, uint32_t channels, uint64_t taps,
                         bool binary) {
  BatchNorm bn;
  bn.gamma.resize(channels);
  bn.beta.resize(channels);
  bn.mu.resize(channels);
  bn.sigma2.resize(channels);
  bn.eps.assign(channels, 1e-5);
  const double acc_std = std::sqrt(static_cast<double>(taps) * 0.5);
  for (uint32_t c = 0; c < channels; ++c) {
    if (binary) {
      // Collapse the zero band: both thresholds fold to the same integer,
      // so the decider only ever outputs +-1.
      bn.gamma[c] = 1.0;
      bn.beta[c] = 0.0;
      bn.sigma2[c] = 1e-8;
      bn.eps[c] = 0.0;
      bn.mu[c] =
          static_cast<double>(rng.uniform_int(
              -static_cast<int64_t>(acc_std), static_cast<int64_t>(acc_std))) +
          0.5;
    } else {
      const double sign = rng.uniform() < 0.25 ? -1.0 : 1.0;
      bn.gamma[c] = sign * rng.uniform(0.5, 2.0);
      bn.beta[c] = rng.uniform(-1.0, 1.0);
      const double s = rng.uniform(acc_std * 0.2, acc_std * 1.5);
      bn.sigma2[c] = s * s;
      bn.mu[c] = sign * rng.uniform(-acc_std, acc_std);
    }
  }
  return bn;
}

namespace {

LayerDesc conv_layer(Rng& rng, uint32_t in_ch, uint32_t out_ch, uint32_t k,
                     Padding padding, double zero_prob, bool binary) {
  LayerDesc l;
  l.kind = LayerKind::Conv2D;
  l.in_ch = in_ch;
  l.out_ch = out_ch;
  l.kh = l.kw = k;
  l.sh = l.sw = 1;
  l.padding = padding;
  l.weights = make_random_kernels(rng, out_ch, k, k, in_ch, zero_prob);
  l.bn = make_random_bn(rng, out_ch,
                        static_cast<uint64_t>(k) * k * in_ch, binary);
  l.activation = Activation::Hardtanh;
  return l;
}

LayerDesc pool_layer(LayerKind kind, uint32_t window) {
  LayerDesc l;
  l.kind = kind;
  l.kh = l.kw = window;
  l.sh = l.sw = window;
  return l;
}

}  // namespace

NetworkDesc make_benchmark_network(const BenchmarkOptions& opts) {
  Rng rng(opts.seed);
  const double zp = opts.binary ? 0.0 : opts.weight_sparsity;

  NetworkDesc net;
  net.input_dims = {32, 32, 126};
  net.encoder = opts.binary ? InputEncoder::BinaryThermometer
                            : InputEncoder::TernaryThermometer;

  net.layers.push_back(conv_layer(rng, 126, 128, 3, Padding::Full, zp,
                                  opts.binary));
  net.layers.push_back(conv_layer(rng, 128, 128, 3, Padding::Full, zp,
                                  opts.binary));
  net.layers.push_back(conv_layer(rng, 128, 128, 3, Padding::Full, zp,
                                  opts.binary));
  net.layers.push_back(pool_layer(LayerKind::MaxPool, 2));
  net.layers.push_back(conv_layer(rng, 128, 128, 3, Padding::Full, zp,
                                  opts.binary));
  net.layers.push_back(conv_layer(rng, 128, 128, 3, Padding::Full, zp,
                                  opts.binary));
  net.layers.push_back(pool_layer(LayerKind::MaxPool, 2));
  net.layers.push_back(conv_layer(rng, 128, 128, 3, Padding::Full, zp,
                                  opts.binary));
  net.layers.push_back(conv_layer(rng, 128, 128, 3, Padding::Full, zp,
                                  opts.binary));
  net.layers.push_back(pool_layer(LayerKind::MaxPool, 2));
  net.layers.push_back(conv_layer(rng, 128, 128, 3, Padding::Full, zp,
                                  opts.binary));
  net.layers.push_back(pool_layer(LayerKind::AvgPool, 4));

  LayerDesc fc;
  fc.kind = LayerKind::FullyConnected;
  fc.in_ch = 128;
  fc.out_ch = 10;
  {
    std::vector<int8_t> w(128 * 10);
    for (auto& t : w) t = rng.trit(zp);
    fc.weights = PackedTritTensor::from_values({10, 128}, w);
  }
  fc.activation = Activation::None;
  net.layers.push_back(fc);
  return net;
}

NetworkDesc make_random_network(Rng& rng, const RandomNetOptions& opts) {
  NetworkDesc net;
  uint32_t h = static_cast<uint32_t>(rng.uniform_int(3, opts.max_h));
  uint32_t w = static_cast<uint32_t>(rng.uniform_int(3, opts.max_w));
  uint32_t c = static_cast<uint32_t>(rng.uniform_int(1, opts.max_ch));
  net.input_dims = {h, w, c};

  const uint32_t n_layers =
      static_cast<uint32_t>(rng.uniform_int(1, opts.max_weight_layers));
  for (uint32_t i = 0; i < n_layers; ++i) {
    const uint32_t out_ch =
        static_cast<uint32_t>(rng.uniform_int(1, opts.max_ch));
    uint32_t k = rng.uniform() < 0.7 ? 3 : 1;
    Padding padding = rng.uniform() < 0.6 ? Padding::Full : Padding::None;
    if (padding == Padding::None && (h < k || w < k)) padding = Padding::Full;
    LayerDesc l = conv_layer(rng, c, out_ch, k, padding,
                             opts.weight_sparsity, false);
    if (opts.allow_depthwise && c == out_ch && rng.uniform() < 0.15) {
      l.depthwise = true;
      std::vector<int8_t> dw(static_cast<size_t>(out_ch) * k * k);
      for (auto& t : dw) t = rng.trit(opts.weight_sparsity);
      l.weights = PackedTritTensor::from_values({out_ch, k, k, 1}, dw);
    }
    // Strides beyond 1 only when the output stays non-empty.
    if (rng.uniform() < 0.3) {
      const uint32_t s = static_cast<uint32_t>(rng.uniform_int(2, 3));
      const uint32_t eff_h = padding == Padding::Full ? h : h - k + 1;
      const uint32_t eff_w = padding == Padding::Full ? w : w - k + 1;
      if (eff_h > s && eff_w > s) {
        l.sh = l.sw = s;
      }
    }
    net.layers.push_back(l);
    const auto shapes = chain_shapes(net);
    h = shapes.back().out_h;
    w = shapes.back().out_w;
    c = shapes.back().out_ch;

    if (opts.allow_pooling && rng.uniform() < 0.4) {
      for (const uint32_t win : {2u, 3u}) {
        if (h % win == 0 && w % win == 0 && h > win && w > win) {
          net.layers.push_back(pool_layer(
              rng.uniform() < 0.7 ? LayerKind::MaxPool : LayerKind::AvgPool,
              win));
          h /= win;
          w /= win;
          break;
        }
      }
    }
  }

  // Reduce to a single pixel now and then so a dense tail becomes legal.
  if (opts.allow_dense_tail && h == w && h >= 2 && h <= 4 &&
      !net.layers.empty() && net.layers.back().kind == LayerKind::Conv2D &&
      rng.uniform() < 0.35) {
    net.layers.push_back(pool_layer(
        rng.uniform() < 0.5 ? LayerKind::AvgPool : LayerKind::MaxPool, h));
    w = h = 1;
  }

  if (opts.allow_dense_tail && h == 1 && w == 1 && rng.uniform() < 0.8) {
    const uint64_t flat = static_cast<uint64_t>(h) * w * c;
    if (flat <= 1152) {
      LayerDesc fc;
      fc.kind = LayerKind::FullyConnected;
      fc.in_ch = static_cast<uint32_t>(flat);
      fc.out_ch = static_cast<uint32_t>(rng.uniform_int(1, opts.max_ch));
      std::vector<int8_t> wv(static_cast<size_t>(flat) * fc.out_ch);
      for (auto& t : wv) t = rng.trit(opts.weight_sparsity);
      fc.weights =
          PackedTritTensor::from_values({fc.out_ch, fc.in_ch}, wv);
      fc.bn = make_random_bn(rng, fc.out_ch, flat, false);
      fc.activation = Activation::Hardtanh;
      net.layers.push_back(fc);
    }
  }
  return net;
}

PackedTritTensor make_random_input(Rng& rng, uint32_t h, uint32_t w,
                                   uint32_t c, double zero_prob) {
  std::vector<int8_t> v(static_cast<size_t>(h) * w * c);
  for (auto& t : v) t = rng.trit(zero_prob);
  return PackedTritTensor::from_values({h, w, c}, v);
}

}  // namespace cutie
