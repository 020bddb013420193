#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "cutie/tensor.hpp"

namespace cutie {

enum class LayerKind : uint8_t { Conv2D, MaxPool, AvgPool, FullyConnected };
enum class Padding : uint8_t { None, Full };
enum class Activation : uint8_t { None, Hardtanh };
enum class InputEncoder : uint8_t {
  RawTrits,
  BinaryThermometer,
  TernaryThermometer
};

// Per-output-channel batch-norm parameters. A convolution bias has no
// separate field: it folds into beta (beta' = beta + gamma * bias / s).
struct BatchNorm {
  std::vector<double> gamma;
  std::vector<double> beta;
  std::vector<double> mu;
  std::vector<double> sigma2;
  std::vector<double> eps;

  size_t channels() const { return gamma.size(); }
  bool consistent() const {
    return beta.size() == gamma.size() && mu.size() == gamma.size() &&
           sigma2.size() == gamma.size() && eps.size() == gamma.size();
  }
};

// One layer of a full-precision network description. Weight layout for
// Conv2D / FullyConnected is (out_ch, kh, kw, in_ch), channels innermost;
// a dense layer uses kh = kw = 1 with in_ch = input feature count.
struct LayerDesc {
  LayerKind kind = LayerKind::Conv2D;
  uint32_t in_ch = 0;
  uint32_t out_ch = 0;
  uint32_t kh = 1, kw = 1;
  uint32_t sh = 1, sw = 1;
  Padding padding = Padding::None;
  bool depthwise = false;
  // monostate for pooling layers.
  std::variant<std::monostate, RealTensor, PackedTritTensor> weights;
  std::optional<BatchNorm> bn;
  Activation activation = Activation::None;

  bool has_ternary_weights() const {
    return std::holds_alternative<PackedTritTensor>(weights);
  }
  bool has_real_weights() const {
    return std::holds_alternative<RealTensor>(weights);
  }
};

struct InputDims {
  uint32_t h = 0, w = 0, c = 0;
};

struct NetworkDesc {
  std::vector<LayerDesc> layers;
  InputDims input_dims;
  InputEncoder encoder = InputEncoder::RawTrits;
};

// Compile-time architecture parameters. The feature-map memory word holds
// n_o / p trits; w_s is the number of memory words per full pixel.
struct ArchConfig {
  uint32_t n_i = 128;
  uint32_t n_o = 128;
  uint32_t k = 3;
  uint32_t i_w = 32;
  uint32_t i_h = 32;
  uint32_t l = 8;
  uint32_t p = 4;
  uint32_t w_s = 4;

  uint32_t fm_word_trits() const { return n_o / p; }
  uint64_t kernel_slot_trits() const {
    return static_cast<uint64_t>(k) * k * n_i;
  }
};

struct Violation {
  int layer;  // -1 for network-level problems
  std::string message;
};

// Empty result means the network is mappable onto the architecture.
// Violations are data, not errors; layer-queue depth is checked at
// emit time, not here.
std::vector<Violation> validate(const NetworkDesc& net, const ArchConfig& arch);

// Conv output spatial dims under the scheduler's padding rules.
std::pair<uint32_t, uint32_t> conv_output_dims(uint32_t h, uint32_t w,
                                               uint32_t kh, uint32_t kw,
                                               uint32_t sh, uint32_t sw,
                                               Padding padding);

// Number of multiply + add operations of a weight-bearing layer:
//   2 * out_h * out_w * kh * kw * in_ch * out_ch.
// Pooling and activations are not counted; pooling layers throw NotCounted.
uint64_t op_count(const LayerDesc& layer, uint32_t out_h, uint32_t out_w);

// Walks the layer chain, returning per-layer (in_h, in_w, in_ch) and the
// final output dims. Throws ShapeError on inconsistent chaining.
struct LayerShape {
  uint32_t in_h, in_w, in_ch;
  uint32_t out_h, out_w, out_ch;
};
std::vector<LayerShape> chain_shapes(const NetworkDesc& net);

// --- `.ctnet` manifest ------------------------------------------------------
//
// Line-oriented text with a header and one [layer] block per layer; tensor
// payloads live in side files referenced by relative path.
NetworkDesc load_network(const std::filesystem::path& manifest);
// Writes `<stem>.ctnet` plus `<stem>_l<k>_w.cttensor` / `_bn.cttensor`
// side files into the manifest's directory. Returns the manifest path.
std::filesystem::path save_network(const std::filesystem::path& manifest,
                                   const NetworkDesc& net);

std::string layer_kind_name(LayerKind k);

}  // namespace cutie
