#pragma once

#include <cstdint>
#include <filesystem>
#include <variant>
#include <vector>

#include "cutie/trit.hpp"

namespace cutie {

// Dense real-valued tensor, row-major, channels innermost.
struct RealTensor {
  std::vector<uint32_t> dims;
  std::vector<double> values;

  bool operator==(const RealTensor&) const = default;
};

// Dense int32 tensor (raw integer images for the input encoders).
struct IntTensor {
  std::vector<uint32_t> dims;
  std::vector<int32_t> values;

  bool operator==(const IntTensor&) const = default;
};

using TensorData = std::variant<PackedTritTensor, RealTensor, IntTensor>;

// `.cttensor` container:
//   magic "CTT1" | dtype u8 (0 packed-trit, 1 real64, 2 int32) | rank u8 |
//   dims u32 LE each | payload (packed trit bytes, or LE scalars).
void save_tensor(const std::filesystem::path& path, const PackedTritTensor& t);
void save_tensor(const std::filesystem::path& path, const RealTensor& t);
void save_tensor(const std::filesystem::path& path, const IntTensor& t);
void save_tensor(const std::filesystem::path& path, const TensorData& t);

TensorData load_tensor(const std::filesystem::path& path);

// Typed loaders; throw FormatError if the file holds a different dtype.
PackedTritTensor load_trit_tensor(const std::filesystem::path& path);
RealTensor load_real_tensor(const std::filesystem::path& path);
IntTensor load_int_tensor(const std::filesystem::path& path);

}  // namespace cutie
