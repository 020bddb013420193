#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "cutie/errors.hpp"

namespace cutie {

// A ternary digit in {-1, 0, +1}. Construction rejects anything else, so a
// Trit in hand is always valid. The unpacked in-memory representation used
// by the datapath model is 2-bit two's complement: 00 = 0, 01 = +1, 11 = -1.
class Trit {
 public:
  constexpr Trit() : v_(0) {}
  explicit Trit(int value) : v_(static_cast<int8_t>(value)) {
    if (value < -1 || value > 1)
      throw Error("trit value must be -1, 0 or +1");
  }

  constexpr int value() const { return v_; }

  // 2-bit two's complement code (0b00, 0b01, 0b11).
  constexpr uint8_t twobit() const { return static_cast<uint8_t>(v_ & 0x3); }

  friend constexpr bool operator==(Trit a, Trit b) { return a.v_ == b.v_; }

 private:
  int8_t v_;
};

// 2-bit code of a ternary multiplier output. Distinct encoding from the
// activation/weight trits so the two cannot be mixed up:
//   0b10 -> +1, 0b01 -> -1, 0b00 -> 0. Code 0b11 never occurs.
class ProductCode {
 public:
  constexpr ProductCode() : bits_(0) {}

  static constexpr ProductCode from_value(int v) {
    ProductCode p;
    p.bits_ = v > 0 ? 0b10 : (v < 0 ? 0b01 : 0b00);
    return p;
  }

  constexpr uint8_t bits() const { return bits_; }
  constexpr bool msb() const { return (bits_ & 0b10) != 0; }
  constexpr bool lsb() const { return (bits_ & 0b01) != 0; }
  constexpr int value() const { return msb() ? 1 : (lsb() ? -1 : 0); }

 private:
  uint8_t bits_;
};

// Ternary multiply. Inputs are ordinary trits, output is a ProductCode.
constexpr ProductCode trit_mul(Trit a, Trit w) {
  return ProductCode::from_value(a.value() * w.value());
}

// Raw-int8 variant for bulk datapath loops.
constexpr ProductCode trit_mul_raw(int8_t a, int8_t w) {
  return ProductCode::from_value(int{a} * int{w});
}

// Sum of the decoded products: count of set MSBs minus count of set LSBs.
int popcount_accumulate(std::span<const ProductCode> products);

// --- 5-trits-in-one-byte codec -------------------------------------------
//
// Base-3 positional code with digit (t + 1), little-endian digit order:
//   byte = sum_i (t[i] + 1) * 3^i,   byte in [0, 242].
// Stores 8 bits per 5 trits, i.e. 1.6 bits per symbol.

uint8_t pack5(const std::array<Trit, 5>& t);
std::array<Trit, 5> unpack5(uint8_t byte);

// Unchecked raw forms used by the tensor container (inputs must be trits).
uint8_t pack5_raw(const int8_t t[5]);
void unpack5_raw(uint8_t byte, int8_t out[5]);

// --- thermometer input encoders -------------------------------------------

// Maps x in [0, M] to M entries: +1 for i < x, -1 for i >= x.
std::vector<int8_t> binary_thermometer(int64_t x, int64_t m);

// Maps x in [0, 2M] to M entries:
//   g(x)_i = sgn(x - M) * (f(|x - M|)_i + 1) / 2, with sgn(0) = 0.
std::vector<int8_t> ternary_thermometer(int64_t x, int64_t m);

// --- packed tensor container ----------------------------------------------
//
// Row-major, innermost dimension = channels. Payload stores 5 trits per
// byte; a partially filled final byte pads with -1 digits (code 0), which
// keeps every payload byte below 243.
class PackedTritTensor {
 public:
  PackedTritTensor() = default;

  static PackedTritTensor from_values(std::vector<uint32_t> dims,
                                      std::span<const int8_t> trits);
  static PackedTritTensor zeros(std::vector<uint32_t> dims);
  // Validates payload length and codeword range.
  static PackedTritTensor from_payload(std::vector<uint32_t> dims,
                                       std::vector<uint8_t> payload);

  const std::vector<uint32_t>& dims() const { return dims_; }
  uint64_t count() const { return count_; }
  const std::vector<uint8_t>& payload() const { return payload_; }

  int8_t at(uint64_t flat_index) const;
  std::vector<int8_t> unpack() const;

  bool operator==(const PackedTritTensor& o) const {
    return dims_ == o.dims_ && count_ == o.count_ && payload_ == o.payload_;
  }

 private:
  std::vector<uint32_t> dims_;
  std::vector<uint8_t> payload_;
  uint64_t count_ = 0;
};

uint64_t dims_product(std::span<const uint32_t> dims);

}  // namespace cutie
