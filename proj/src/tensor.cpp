#include "cutie/tensor.hpp"

#include <cstring>
#include <fstream>

namespace cutie {

namespace {

constexpr char kMagic[4] = {'C', 'T', 'T', '1'};

void write_u32(std::ostream& os, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v),
                        static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t read_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw FormatError("truncated tensor file");
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) |
         (static_cast<uint32_t>(b[3]) << 24);
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open " + path.string() + " for writing");
  return os;
}

void write_header(std::ostream& os, uint8_t dtype,
                  const std::vector<uint32_t>& dims) {
  os.write(kMagic, 4);
  os.put(static_cast<char>(dtype));
  if (dims.size() > 255) throw FormatError("tensor rank exceeds 255");
  os.put(static_cast<char>(dims.size()));
  for (const uint32_t d : dims) write_u32(os, d);
}

}  // namespace

void save_tensor(const std::filesystem::path& path,
                 const PackedTritTensor& t) {
  auto os = open_out(path);
  write_header(os, 0, t.dims());
  os.write(reinterpret_cast<const char*>(t.payload().data()),
           static_cast<std::streamsize>(t.payload().size()));
  if (!os) throw FormatError("write failed: " + path.string());
}

void save_tensor(const std::filesystem::path& path, const RealTensor& t) {
  if (dims_product(t.dims) != t.values.size())
    throw ShapeError("real tensor dims do not match value count");
  auto os = open_out(path);
  write_header(os, 1, t.dims);
  // Little-endian IEEE doubles; this code assumes a little-endian host.
  os.write(reinterpret_cast<const char*>(t.values.data()),
           static_cast<std::streamsize>(t.values.size() * sizeof(double)));
  if (!os) throw FormatError("write failed: " + path.string());
}

void save_tensor(const std::filesystem::path& path, const IntTensor& t) {
  if (dims_product(t.dims) != t.values.size())
    throw ShapeError("int tensor dims do not match value count");
  auto os = open_out(path);
  write_header(os, 2, t.dims);
  os.write(reinterpret_cast<const char*>(t.values.data()),
           static_cast<std::streamsize>(t.values.size() * sizeof(int32_t)));
  if (!os) throw FormatError("write failed: " + path.string());
}

void save_tensor(const std::filesystem::path& path, const TensorData& t) {
  std::visit([&](const auto& v) { save_tensor(path, v); }, t);
}

TensorData load_tensor(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open " + path.string());
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    throw FormatError("bad magic in " + path.string());
  const int dtype = is.get();
  const int rank = is.get();
  if (dtype < 0 || rank < 0) throw FormatError("truncated tensor header");
  std::vector<uint32_t> dims(static_cast<size_t>(rank));
  for (auto& d : dims) d = read_u32(is);
  const uint64_t n = dims_product(dims);
  if (n > (uint64_t{1} << 34))
    throw FormatError("tensor dims overflow sanity limit");

  if (dtype == 0) {
    std::vector<uint8_t> payload(static_cast<size_t>((n + 4) / 5));
    is.read(reinterpret_cast<char*>(payload.data()),
            static_cast<std::streamsize>(payload.size()));
    if (!is) throw FormatError("truncated trit payload in " + path.string());
    return PackedTritTensor::from_payload(std::move(dims), std::move(payload));
  }
  if (dtype == 1) {
    RealTensor t;
    t.dims = std::move(dims);
    t.values.resize(static_cast<size_t>(n));
    is.read(reinterpret_cast<char*>(t.values.data()),
            static_cast<std::streamsize>(n * sizeof(double)));
    if (!is) throw FormatError("truncated real payload in " + path.string());
    return t;
  }
  if (dtype == 2) {
    IntTensor t;
    t.dims = std::move(dims);
    t.values.resize(static_cast<size_t>(n));
    is.read(reinterpret_cast<char*>(t.values.data()),
            static_cast<std::streamsize>(n * sizeof(int32_t)));
    if (!is) throw FormatError("truncated int payload in " + path.string());
    return t;
  }
  throw FormatError("unknown dtype code " + std::to_string(dtype));
}

PackedTritTensor load_trit_tensor(const std::filesystem::path& path) {
  TensorData t = load_tensor(path);
  if (auto* p = std::get_if<PackedTritTensor>(&t)) return std::move(*p);
  throw FormatError(path.string() + " does not hold a packed trit tensor");
}

RealTensor load_real_tensor(const std::filesystem::path& path) {
  TensorData t = load_tensor(path);
  if (auto* p = std::get_if<RealTensor>(&t)) return std::move(*p);
  throw FormatError(path.string() + " does not hold a real tensor");
}

IntTensor load_int_tensor(const std::filesystem::path& path) {
  TensorData t = load_tensor(path);
  if (auto* p = std::get_if<IntTensor>(&t)) return std::move(*p);
  throw FormatError(path.string() + " does not hold an int tensor");
}

}  // namespace cutie
