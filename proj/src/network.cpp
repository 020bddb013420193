#include "cutie/network.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace cutie {

std::pair<uint32_t, uint32_t> conv_output_dims(uint32_t h, uint32_t w,
                                               uint32_t kh, uint32_t kw,
                                               uint32_t sh, uint32_t sw,
                                               Padding padding) {
  const uint32_t ph = padding == Padding::Full ? kh / 2 : 0;
  const uint32_t pw = padding == Padding::Full ? kw / 2 : 0;
  if (h + 2 * ph < kh || w + 2 * pw < kw)
    throw ShapeError("kernel larger than (padded) feature map");
  const uint32_t oh = (h + 2 * ph - kh) / sh + 1;
  const uint32_t ow = (w + 2 * pw - kw) / sw + 1;
  return {oh, ow};
}

uint64_t op_count(const LayerDesc& layer, uint32_t out_h, uint32_t out_w) {
  if (layer.kind == LayerKind::MaxPool || layer.kind == LayerKind::AvgPool)
    throw NotCounted("pooling layers are not counted");
  return 2ull * out_h * out_w * layer.kh * layer.kw * layer.in_ch *
         layer.out_ch;
}

std::vector<LayerShape> chain_shapes(const NetworkDesc& net) {
  std::vector<LayerShape> shapes;
  uint32_t h = net.input_dims.h, w = net.input_dims.w, c = net.input_dims.c;
  for (const LayerDesc& l : net.layers) {
    LayerShape s{h, w, c, 0, 0, 0};
    switch (l.kind) {
      case LayerKind::Conv2D: {
        if (l.in_ch != c)
          throw ShapeError("conv in_ch " + std::to_string(l.in_ch) +
                           " does not match incoming channels " +
                           std::to_string(c));
        auto [oh, ow] =
            conv_output_dims(h, w, l.kh, l.kw, l.sh, l.sw, l.padding);
        s.out_h = oh;
        s.out_w = ow;
        s.out_ch = l.out_ch;
        break;
      }
      case LayerKind::MaxPool:
      case LayerKind::AvgPool: {
        if (h % l.kh != 0 || w % l.kw != 0)
          throw ShapeError("pooling window does not divide feature map");
        s.out_h = h / l.kh;
        s.out_w = w / l.kw;
        s.out_ch = c;
        break;
      }
      case LayerKind::FullyConnected: {
        const uint64_t flat = static_cast<uint64_t>(h) * w * c;
        if (l.in_ch != flat)
          throw ShapeError("dense in_ch " + std::to_string(l.in_ch) +
                           " does not match flattened input " +
                           std::to_string(flat));
        s.out_h = 1;
        s.out_w = 1;
        s.out_ch = l.out_ch;
        break;
      }
    }
    shapes.push_back(s);
    h = s.out_h;
    w = s.out_w;
    c = s.out_ch;
  }
  return shapes;
}

namespace {

void check_weight_dims(const LayerDesc& l, int idx,
                       std::vector<Violation>& out) {
  std::vector<uint32_t> expected;
  if (l.kind == LayerKind::Conv2D)
    expected = {l.out_ch, l.kh, l.kw, l.depthwise ? 1 : l.in_ch};
  else
    expected = {l.out_ch, l.in_ch};
  const std::vector<uint32_t>* dims = nullptr;
  if (l.has_real_weights()) dims = &std::get<RealTensor>(l.weights).dims;
  if (l.has_ternary_weights())
    dims = &std::get<PackedTritTensor>(l.weights).dims();
  if (dims && *dims != expected)
    out.push_back({idx, "weight tensor dims do not match layer geometry"});
}

}  // namespace

std::vector<Violation> validate(const NetworkDesc& net,
                                const ArchConfig& arch) {
  std::vector<Violation> out;
  if (net.input_dims.h > arch.i_h || net.input_dims.w > arch.i_w)
    out.push_back({-1, "input feature map exceeds I_H x I_W"});
  if (net.input_dims.c > arch.n_i)
    out.push_back({-1, "input channels exceed N_I"});
  if (arch.n_o % arch.p != 0)
    out.push_back({-1, "N_O not divisible by pipeline stages P"});

  uint32_t h = net.input_dims.h, w = net.input_dims.w, c = net.input_dims.c;
  bool chain_ok = true;
  for (size_t i = 0; i < net.layers.size(); ++i) {
    const LayerDesc& l = net.layers[i];
    const int idx = static_cast<int>(i);
    switch (l.kind) {
      case LayerKind::Conv2D: {
        if (l.kh != l.kw) out.push_back({idx, "kernel is not square"});
        if (l.kh % 2 == 0) out.push_back({idx, "kernel size is even"});
        if (l.kh > arch.k || l.kw > arch.k)
          out.push_back({idx, "kernel exceeds K"});
        if (l.sh < 1 || l.sh > 3 || l.sw < 1 || l.sw > 3)
          out.push_back({idx, "stride outside [1, 3]"});
        if (l.in_ch > arch.n_i) out.push_back({idx, "in_ch exceeds N_I"});
        if (l.out_ch > arch.n_o) out.push_back({idx, "out_ch exceeds N_O"});
        if (l.depthwise && l.in_ch != l.out_ch)
          out.push_back({idx, "depthwise layer with in_ch != out_ch"});
        if (l.bn && (!l.bn->consistent() || l.bn->channels() != l.out_ch))
          out.push_back({idx, "batch-norm parameter count mismatch"});
        check_weight_dims(l, idx, out);
        if (chain_ok && l.in_ch != c) {
          out.push_back({idx, "in_ch does not match producer out_ch"});
          chain_ok = false;
        }
        break;
      }
      case LayerKind::MaxPool:
      case LayerKind::AvgPool: {
        const bool after_conv =
            i > 0 && net.layers[i - 1].kind == LayerKind::Conv2D;
        if (!after_conv)
          out.push_back({idx, "pooling without preceding conv"});
        if (l.kh == 0 || l.kw == 0 || l.kh > h || l.kw > w)
          out.push_back({idx, "pooling window exceeds feature dims"});
        else if (h % l.kh != 0 || w % l.kw != 0)
          out.push_back({idx, "pooling window does not divide feature map"});
        break;
      }
      case LayerKind::FullyConnected: {
        const uint64_t flat = static_cast<uint64_t>(h) * w * c;
        if (l.in_ch != flat) {
          out.push_back({idx, "dense in_ch does not match flattened input"});
          chain_ok = false;
        }
        // The lowered layer consumes either a single pixel or a full
        // KxKxN_I window; other producer shapes cannot reach the weight
        // buffer in one shot.
        if (!(h == 1 && w == 1) &&
            !(h == arch.k && w == arch.k && c == arch.n_i))
          out.push_back(
              {idx, "dense layer requires a 1x1 or KxKxN_I producer"});
        if (l.in_ch > arch.kernel_slot_trits())
          out.push_back({idx, "dense input exceeds K*K*N_I weight slots"});
        if (l.out_ch > arch.n_o) out.push_back({idx, "out_ch exceeds N_O"});
        if (l.bn && (!l.bn->consistent() || l.bn->channels() != l.out_ch))
          out.push_back({idx, "batch-norm parameter count mismatch"});
        check_weight_dims(l, idx, out);
        break;
      }
    }
    // Advance dims; on hard shape breakage keep the declared values so later
    // layers still get individually checked.
    try {
      NetworkDesc probe;
      probe.input_dims = {h, w, c};
      probe.layers = {l};
      const auto s = chain_shapes(probe).front();
      h = s.out_h;
      w = s.out_w;
      c = s.out_ch;
    } catch (const ShapeError&) {
      c = l.out_ch ? l.out_ch : c;
    }
    if (h > arch.i_h || w > arch.i_w)
      out.push_back({idx, "intermediate feature map exceeds I_H x I_W"});
  }
  return out;
}

// --- manifest I/O -----------------------------------------------------------

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

LayerKind parse_kind(const std::string& v) {
  if (v == "conv") return LayerKind::Conv2D;
  if (v == "maxpool") return LayerKind::MaxPool;
  if (v == "avgpool") return LayerKind::AvgPool;
  if (v == "dense") return LayerKind::FullyConnected;
  throw FormatError("unknown layer kind '" + v + "'");
}

InputEncoder parse_encoder(const std::string& v) {
  if (v == "raw_trits") return InputEncoder::RawTrits;
  if (v == "binary_thermometer") return InputEncoder::BinaryThermometer;
  if (v == "ternary_thermometer") return InputEncoder::TernaryThermometer;
  throw FormatError("unknown encoder '" + v + "'");
}

BatchNorm bn_from_tensor(const RealTensor& t) {
  if (t.dims.size() != 2 || t.dims[0] != 5)
    throw FormatError("batch-norm tensor must have dims {5, out_ch}");
  const size_t n = t.dims[1];
  BatchNorm bn;
  auto row = [&](size_t r) {
    return std::vector<double>(t.values.begin() + static_cast<long>(r * n),
                               t.values.begin() + static_cast<long>((r + 1) * n));
  };
  bn.gamma = row(0);
  bn.beta = row(1);
  bn.mu = row(2);
  bn.sigma2 = row(3);
  bn.eps = row(4);
  return bn;
}

RealTensor bn_to_tensor(const BatchNorm& bn) {
  RealTensor t;
  t.dims = {5, static_cast<uint32_t>(bn.channels())};
  t.values.reserve(5 * bn.channels());
  for (const auto* v : {&bn.gamma, &bn.beta, &bn.mu, &bn.sigma2, &bn.eps})
    t.values.insert(t.values.end(), v->begin(), v->end());
  return t;
}

}  // namespace

NetworkDesc load_network(const std::filesystem::path& manifest) {
  std::ifstream is(manifest);
  if (!is) throw FormatError("cannot open " + manifest.string());
  const auto dir = manifest.parent_path();

  NetworkDesc net;
  LayerDesc* cur = nullptr;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line == "[layer]") {
      net.layers.emplace_back();
      cur = &net.layers.back();
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw FormatError(manifest.string() + ":" + std::to_string(lineno) +
                        ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    std::istringstream vs(val);

    if (!cur) {
      if (key == "input_dims") {
        if (!(vs >> net.input_dims.h >> net.input_dims.w >> net.input_dims.c))
          throw FormatError("bad input_dims '" + val + "'");
      } else if (key == "encoder") {
        net.encoder = parse_encoder(val);
      } else {
        throw FormatError("unknown header key '" + key + "'");
      }
      continue;
    }

    if (key == "kind") {
      cur->kind = parse_kind(val);
    } else if (key == "in_ch") {
      vs >> cur->in_ch;
    } else if (key == "out_ch") {
      vs >> cur->out_ch;
    } else if (key == "kernel") {
      if (!(vs >> cur->kh >> cur->kw))
        throw FormatError("bad kernel '" + val + "'");
    } else if (key == "stride") {
      if (!(vs >> cur->sh >> cur->sw))
        throw FormatError("bad stride '" + val + "'");
    } else if (key == "padding") {
      if (val == "none")
        cur->padding = Padding::None;
      else if (val == "full")
        cur->padding = Padding::Full;
      else
        throw FormatError("unknown padding '" + val + "'");
    } else if (key == "depthwise") {
      cur->depthwise = val == "1" || val == "true";
    } else if (key == "weights") {
      TensorData t = load_tensor(dir / val);
      if (auto* p = std::get_if<PackedTritTensor>(&t))
        cur->weights = std::move(*p);
      else if (auto* r = std::get_if<RealTensor>(&t))
        cur->weights = std::move(*r);
      else
        throw FormatError("weight tensor must be trit or real: " + val);
    } else if (key == "bn") {
      cur->bn = bn_from_tensor(load_real_tensor(dir / val));
    } else if (key == "activation") {
      if (val == "none")
        cur->activation = Activation::None;
      else if (val == "hardtanh")
        cur->activation = Activation::Hardtanh;
      else
        throw FormatError("unknown activation '" + val + "'");
    } else {
      throw FormatError("unknown layer key '" + key + "'");
    }
  }
  return net;
}

std::string layer_kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::Conv2D: return "conv";
    case LayerKind::MaxPool: return "maxpool";
    case LayerKind::AvgPool: return "avgpool";
    case LayerKind::FullyConnected: return "dense";
  }
  return "?";
}

std::filesystem::path save_network(const std::filesystem::path& manifest,
                                   const NetworkDesc& net) {
  const auto dir = manifest.parent_path();
  const std::string stem = manifest.stem().string();
  std::ofstream os(manifest);
  if (!os) throw FormatError("cannot open " + manifest.string());

  os << "input_dims = " << net.input_dims.h << " " << net.input_dims.w << " "
     << net.input_dims.c << "\n";
  const char* enc = net.encoder == InputEncoder::RawTrits ? "raw_trits"
                    : net.encoder == InputEncoder::BinaryThermometer
                        ? "binary_thermometer"
                        : "ternary_thermometer";
  os << "encoder = " << enc << "\n";

  for (size_t i = 0; i < net.layers.size(); ++i) {
    const LayerDesc& l = net.layers[i];
    os << "\n[layer]\n";
    os << "kind = " << layer_kind_name(l.kind) << "\n";
    os << "in_ch = " << l.in_ch << "\n";
    os << "out_ch = " << l.out_ch << "\n";
    os << "kernel = " << l.kh << " " << l.kw << "\n";
    os << "stride = " << l.sh << " " << l.sw << "\n";
    os << "padding = " << (l.padding == Padding::Full ? "full" : "none")
       << "\n";
    if (l.depthwise) os << "depthwise = 1\n";
    if (!std::holds_alternative<std::monostate>(l.weights)) {
      const std::string wfile =
          stem + "_l" + std::to_string(i) + "_w.cttensor";
      if (l.has_real_weights())
        save_tensor(dir / wfile, std::get<RealTensor>(l.weights));
      else
        save_tensor(dir / wfile, std::get<PackedTritTensor>(l.weights));
      os << "weights = " << wfile << "\n";
    }
    if (l.bn) {
      const std::string bfile =
          stem + "_l" + std::to_string(i) + "_bn.cttensor";
      save_tensor(dir / bfile, bn_to_tensor(*l.bn));
      os << "bn = " << bfile << "\n";
    }
    os << "activation = "
       << (l.activation == Activation::Hardtanh ? "hardtanh" : "none") << "\n";
  }
  if (!os) throw FormatError("write failed: " + manifest.string());
  return manifest;
}

}  // namespace cutie
