#include "cutie/trit.hpp"

#include <string>

namespace cutie {

int popcount_accumulate(std::span<const ProductCode> products) {
  int msb = 0;
  int lsb = 0;
  for (const ProductCode p : products) {
    msb += p.msb() ? 1 : 0;
    lsb += p.lsb() ? 1 : 0;
  }
  return msb - lsb;
}

uint8_t pack5(const std::array<Trit, 5>& t) {
  int8_t raw[5];
  for (int i = 0; i < 5; ++i) raw[i] = static_cast<int8_t>(t[i].value());
  return pack5_raw(raw);
}

std::array<Trit, 5> unpack5(uint8_t byte) {
  if (byte >= 243)
    throw InvalidCodeword("codec byte " + std::to_string(byte) +
                          " out of range [0, 242]");
  int8_t raw[5];
  unpack5_raw(byte, raw);
  std::array<Trit, 5> out;
  for (int i = 0; i < 5; ++i) out[i] = Trit(raw[i]);
  return out;
}

uint8_t pack5_raw(const int8_t t[5]) {
  unsigned v = 0;
  unsigned p = 1;
  for (int i = 0; i < 5; ++i) {
    v += static_cast<unsigned>(t[i] + 1) * p;
    p *= 3;
  }
  return static_cast<uint8_t>(v);
}

void unpack5_raw(uint8_t byte, int8_t out[5]) {
  unsigned v = byte;
  for (int i = 0; i < 5; ++i) {
    out[i] = static_cast<int8_t>(static_cast<int>(v % 3) - 1);
    v /= 3;
  }
}

std::vector<int8_t> binary_thermometer(int64_t x, int64_t m) {
  if (x < 0 || x > m)
    throw EncodingRange("binary thermometer input " + std::to_string(x) +
                        " outside [0, " + std::to_string(m) + "]");
  std::vector<int8_t> out(static_cast<size_t>(m));
  for (int64_t i = 0; i < m; ++i) out[static_cast<size_t>(i)] = i < x ? 1 : -1;
  return out;
}

std::vector<int8_t> ternary_thermometer(int64_t x, int64_t m) {
  if (x < 0 || x > 2 * m)
    throw EncodingRange("ternary thermometer input " + std::to_string(x) +
                        " outside [0, " + std::to_string(2 * m) + "]");
  const int64_t d = x - m;
  const int sign = d > 0 ? 1 : (d < 0 ? -1 : 0);
  const std::vector<int8_t> f = binary_thermometer(d < 0 ? -d : d, m);
  std::vector<int8_t> out(static_cast<size_t>(m));
  for (size_t i = 0; i < out.size(); ++i)
    out[i] = static_cast<int8_t>(sign * ((f[i] + 1) / 2));
  return out;
}

uint64_t dims_product(std::span<const uint32_t> dims) {
  uint64_t n = 1;
  for (const uint32_t d : dims) n *= d;
  return n;
}

PackedTritTensor PackedTritTensor::from_values(std::vector<uint32_t> dims,
                                               std::span<const int8_t> trits) {
  const uint64_t n = dims_product(dims);
  if (n != trits.size())
    throw ShapeError("trit count " + std::to_string(trits.size()) +
                     " does not match dims product " + std::to_string(n));
  PackedTritTensor t;
  t.dims_ = std::move(dims);
  t.count_ = n;
  t.payload_.resize(static_cast<size_t>((n + 4) / 5));
  uint64_t i = 0;
  for (size_t b = 0; b < t.payload_.size(); ++b) {
    int8_t group[5] = {-1, -1, -1, -1, -1};  // pad digits encode as 0
    for (int j = 0; j < 5 && i < n; ++j, ++i) group[j] = trits[i];
    t.payload_[b] = pack5_raw(group);
  }
  return t;
}

PackedTritTensor PackedTritTensor::zeros(std::vector<uint32_t> dims) {
  const uint64_t n = dims_product(dims);
  std::vector<int8_t> v(static_cast<size_t>(n), 0);
  return from_values(std::move(dims), v);
}

PackedTritTensor PackedTritTensor::from_payload(std::vector<uint32_t> dims,
                                                std::vector<uint8_t> payload) {
  const uint64_t n = dims_product(dims);
  if (payload.size() != (n + 4) / 5)
    throw FormatError("payload length " + std::to_string(payload.size()) +
                      " does not match trit count " + std::to_string(n));
  for (const uint8_t b : payload)
    if (b >= 243)
      throw InvalidCodeword("payload byte " + std::to_string(b) +
                            " out of range [0, 242]");
  PackedTritTensor t;
  t.dims_ = std::move(dims);
  t.count_ = n;
  t.payload_ = std::move(payload);
  return t;
}

int8_t PackedTritTensor::at(uint64_t flat_index) const {
  if (flat_index >= count_) throw ShapeError("trit index out of range");
  int8_t group[5];
  unpack5_raw(payload_[static_cast<size_t>(flat_index / 5)], group);
  return group[flat_index % 5];
}

std::vector<int8_t> PackedTritTensor::unpack() const {
  std::vector<int8_t> out(static_cast<size_t>(count_));
  uint64_t i = 0;
  for (size_t b = 0; b < payload_.size() && i < count_; ++b) {
    int8_t group[5];
    unpack5_raw(payload_[b], group);
    for (int j = 0; j < 5 && i < count_; ++j, ++i) out[static_cast<size_t>(i)] = group[j];
  }
  return out;
}

}  // namespace cutie
