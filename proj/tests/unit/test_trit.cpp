#include <array>
#include <vector>

#include "cutie/rng.hpp"
#include "cutie/trit.hpp"
#include "doctest.h"

using namespace cutie;

namespace {

std::array<Trit, 5> quintet(int a, int b, int c, int d, int e) {
  return {Trit(a), Trit(b), Trit(c), Trit(d), Trit(e)};
}

}  // namespace

TEST_CASE("trit construction rejects out-of-range values") {
  CHECK_NOTHROW(Trit(-1));
  CHECK_NOTHROW(Trit(0));
  CHECK_NOTHROW(Trit(1));
  CHECK_THROWS_AS(Trit(2), Error);
  CHECK_THROWS_AS(Trit(-2), Error);
}

TEST_CASE("trit two's complement codes") {
  CHECK(Trit(0).twobit() == 0b00);
  CHECK(Trit(1).twobit() == 0b01);
  CHECK(Trit(-1).twobit() == 0b11);
}

TEST_CASE("pack5 known values") {
  CHECK(pack5(quintet(0, 0, 0, 0, 0)) == 121);
  CHECK(pack5(quintet(-1, -1, -1, -1, -1)) == 0);
  // 2 + 3 + 0 + 27 + 162, the base-3 polynomial evaluated by hand.
  CHECK(pack5(quintet(1, 0, -1, 0, 1)) == 194);
}

TEST_CASE("unpack5 known values and range check") {
  CHECK(unpack5(121) == quintet(0, 0, 0, 0, 0));
  CHECK(unpack5(242) == quintet(1, 1, 1, 1, 1));
  CHECK_THROWS_AS(unpack5(243), InvalidCodeword);
  CHECK_THROWS_AS(unpack5(255), InvalidCodeword);
}

TEST_CASE("codec bijective over all 243 quintets and bytes") {
  for (unsigned byte = 0; byte < 243; ++byte) {
    const auto t = unpack5(static_cast<uint8_t>(byte));
    CHECK(pack5(t) == byte);
  }
  for (int a = -1; a <= 1; ++a)
    for (int b = -1; b <= 1; ++b)
      for (int c = -1; c <= 1; ++c)
        for (int d = -1; d <= 1; ++d)
          for (int e = -1; e <= 1; ++e) {
            const auto q = quintet(a, b, c, d, e);
            CHECK(unpack5(pack5(q)) == q);
          }
}

TEST_CASE("product code encoding f") {
  CHECK(trit_mul(Trit(1), Trit(1)).bits() == 0b10);
  CHECK(trit_mul(Trit(1), Trit(-1)).bits() == 0b01);
  CHECK(trit_mul(Trit(0), Trit(-1)).bits() == 0b00);
  // Code 0b11 never occurs and decode(encode(x)) = x.
  for (int a = -1; a <= 1; ++a)
    for (int w = -1; w <= 1; ++w) {
      const ProductCode p = trit_mul(Trit(a), Trit(w));
      CHECK(p.bits() != 0b11);
      CHECK(p.value() == a * w);
    }
}

TEST_CASE("popcount accumulate basics") {
  CHECK(popcount_accumulate({}) == 0);
  const std::vector<ProductCode> seq = {
      ProductCode::from_value(1), ProductCode::from_value(1),
      ProductCode::from_value(-1), ProductCode::from_value(0)};
  CHECK(popcount_accumulate(seq) == 1);
}

TEST_CASE("popcount accumulate equals the dot-product oracle") {
  Rng rng(42);
  for (int trial = 0; trial < 10000; ++trial) {
    const size_t n = static_cast<size_t>(rng.uniform_int(0, 96));
    std::vector<ProductCode> codes(n);
    int expected = 0;
    for (size_t i = 0; i < n; ++i) {
      const int a = static_cast<int>(rng.uniform_int(-1, 1));
      const int w = static_cast<int>(rng.uniform_int(-1, 1));
      codes[i] = trit_mul_raw(static_cast<int8_t>(a), static_cast<int8_t>(w));
      expected += a * w;
    }
    REQUIRE(popcount_accumulate(codes) == expected);
  }
  // One full-width OCU worth of products.
  std::vector<ProductCode> wide(1152);
  int expected = 0;
  for (auto& p : wide) {
    const int a = static_cast<int>(rng.uniform_int(-1, 1));
    const int w = static_cast<int>(rng.uniform_int(-1, 1));
    p = trit_mul_raw(static_cast<int8_t>(a), static_cast<int8_t>(w));
    expected += a * w;
  }
  CHECK(popcount_accumulate(wide) == expected);
  CHECK(popcount_accumulate(wide) >= -1152);
  CHECK(popcount_accumulate(wide) <= 1152);
}

TEST_CASE("binary thermometer") {
  CHECK(binary_thermometer(0, 4) == std::vector<int8_t>{-1, -1, -1, -1});
  CHECK(binary_thermometer(4, 4) == std::vector<int8_t>{1, 1, 1, 1});

  const auto enc = binary_thermometer(110, 128);
  REQUIRE(enc.size() == 128);
  for (size_t i = 0; i < 110; ++i) CHECK(enc[i] == 1);
  for (size_t i = 110; i < 128; ++i) CHECK(enc[i] == -1);

  CHECK_THROWS_AS(binary_thermometer(-1, 4), EncodingRange);
  CHECK_THROWS_AS(binary_thermometer(5, 4), EncodingRange);
}

TEST_CASE("ternary thermometer") {
  const auto enc = ternary_thermometer(110, 128);
  REQUIRE(enc.size() == 128);
  for (size_t i = 0; i < 18; ++i) CHECK(enc[i] == -1);
  for (size_t i = 18; i < 128; ++i) CHECK(enc[i] == 0);

  CHECK(ternary_thermometer(16, 16) == std::vector<int8_t>(16, 0));
  CHECK(ternary_thermometer(32, 16) == std::vector<int8_t>(16, 1));
  CHECK_THROWS_AS(ternary_thermometer(-1, 16), EncodingRange);
  CHECK_THROWS_AS(ternary_thermometer(33, 16), EncodingRange);
}

TEST_CASE("thermometer structural properties") {
  const int64_t m = 37;
  std::vector<int8_t> prev;
  for (int64_t x = 0; x <= 2 * m; ++x) {
    const auto t = ternary_thermometer(x, m);
    const int sign = x > m ? 1 : (x < m ? -1 : 0);
    int64_t nonzero = 0;
    for (const int8_t v : t) {
      if (v != 0) {
        ++nonzero;
        CHECK(int{v} == sign);
      }
    }
    CHECK(nonzero == (x > m ? x - m : m - x));
  }
  // Monotone: increasing x flips binary entries only from -1 to +1.
  for (int64_t x = 0; x <= m; ++x) {
    const auto b = binary_thermometer(x, m);
    if (!prev.empty()) {
      for (size_t i = 0; i < b.size(); ++i) CHECK(b[i] >= prev[i]);
    }
    prev = b;
  }
}

TEST_CASE("packed tensor stores 1.6 bits per trit") {
  Rng rng(7);
  std::vector<int8_t> v(500);
  for (auto& t : v) t = rng.trit(0.3);
  const auto packed = PackedTritTensor::from_values({5, 10, 10}, v);
  CHECK(packed.payload().size() == 100);  // 500 trits / 5 per byte
  for (const uint8_t b : packed.payload()) CHECK(b < 243);
  CHECK(packed.unpack() == v);
  for (uint64_t i = 0; i < packed.count(); i += 37)
    CHECK(packed.at(i) == v[static_cast<size_t>(i)]);
}

TEST_CASE("packed tensor tail padding and payload validation") {
  std::vector<int8_t> v(7, 1);
  const auto packed = PackedTritTensor::from_values({7}, v);
  CHECK(packed.payload().size() == 2);
  CHECK(packed.unpack() == v);

  CHECK_THROWS_AS(PackedTritTensor::from_payload({7}, {255, 0}),
                  InvalidCodeword);
  CHECK_THROWS_AS(PackedTritTensor::from_payload({7}, {0}), FormatError);
  CHECK_THROWS_AS(
      PackedTritTensor::from_values({3}, std::vector<int8_t>{1, 0}),
      ShapeError);
}
