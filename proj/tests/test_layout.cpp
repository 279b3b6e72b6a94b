#include <algorithm>
#include <numeric>
#include <set>

#include "doctest.h"
#include "llmcomp/error.hpp"
#include "llmcomp/layout.hpp"

using namespace llmcomp;

namespace {

uint64_t morton_bitwise(uint32_t m, uint32_t n) {
  uint64_t z = 0;
  for (unsigned b = 0; b < 32; ++b) {
    z |= uint64_t((n >> b) & 1u) << (2 * b);
    z |= uint64_t((m >> b) & 1u) << (2 * b + 1);
  }
  return z;
}

}  // namespace

TEST_CASE("morton code matches a bit-by-bit interleave") {
  CHECK(morton_encode(0, 0) == 0);
  CHECK(morton_encode(0, 1) == 1);
  CHECK(morton_encode(1, 0) == 2);
  CHECK(morton_encode(1, 1) == 3);
  for (uint32_t m : {2u, 5u, 77u, 1023u, 65535u, 0xffffffffu})
    for (uint32_t n : {0u, 3u, 100u, 4095u, 0x12345678u}) CHECK(morton_encode(m, n) == morton_bitwise(m, n));
}

TEST_CASE("order and rank are inverse permutations") {
  for (auto kind : {LayoutKind::zorder, LayoutKind::row_major, LayoutKind::column_major})
    for (uint32_t m : {1u, 3u, 8u, 13u})
      for (uint32_t n : {1u, 4u, 7u, 16u}) {
        const LinearIndexMap map(m, n, kind);
        std::vector<uint32_t> sorted(map.order().begin(), map.order().end());
        std::sort(sorted.begin(), sorted.end());
        std::vector<uint32_t> iota(size_t{m} * n);
        std::iota(iota.begin(), iota.end(), 0u);
        CHECK(sorted == iota);
        for (uint32_t j = 0; j < m * n; ++j) CHECK(map.rank()[map.order()[j]] == j);
      }
}

TEST_CASE("row-major and column-major visiting orders") {
  const LinearIndexMap row(2, 3, LayoutKind::row_major);
  CHECK(std::vector<uint32_t>(row.order().begin(), row.order().end()) == std::vector<uint32_t>{0, 1, 2, 3, 4, 5});
  const LinearIndexMap col(2, 3, LayoutKind::column_major);
  CHECK(std::vector<uint32_t>(col.order().begin(), col.order().end()) == std::vector<uint32_t>{0, 3, 1, 4, 2, 5});
}

TEST_CASE("z-order on a non-power-of-two grid follows ascending Morton codes") {
  const uint32_t m = 5, n = 3;
  const LinearIndexMap map(m, n, LayoutKind::zorder);
  for (size_t j = 1; j < map.order().size(); ++j) {
    const uint32_t a = map.order()[j - 1], b = map.order()[j];
    CHECK(morton_bitwise(a / n, a % n) < morton_bitwise(b / n, b % n));
  }
  const LinearIndexMap square(4, 4, LayoutKind::zorder);
  CHECK(std::vector<uint32_t>(square.order().begin(), square.order().begin() + 6) ==
        std::vector<uint32_t>{0, 1, 4, 5, 2, 3});
}

TEST_CASE("stream coordinates walk every cell once per timestep") {
  const Dims d{3, 4, 5};
  const auto coords = stream_coords(d, LayoutKind::zorder);
  REQUIRE(coords.size() == d.count());
  std::set<std::tuple<uint32_t, uint32_t, uint32_t>> seen;
  for (size_t p = 0; p < coords.size(); ++p) {
    CHECK(coords[p].t == p / d.plane());
    seen.insert({coords[p].t, coords[p].x, coords[p].y});
  }
  CHECK(seen.size() == d.count());
}

TEST_CASE("flatten and unflatten invert each other") {
  for (auto kind : {LayoutKind::zorder, LayoutKind::row_major, LayoutKind::column_major}) {
    const Field f = gen_synthetic(SyntheticKind::white_noise, {2, 7, 11}, 5, {Precision::f64});
    const Sequence s = flatten(f, kind);
    const Field g = unflatten(s.values, f.dims(), kind, f.precision());
    CHECK(std::equal(f.values().begin(), f.values().end(), g.values().begin()));
    for (size_t p = 0; p < s.values.size(); ++p) {
      const Coord& c = s.coords[p];
      CHECK(s.values[p] == f.at(c.t, c.x, c.y));
    }
  }
  CHECK_THROWS_AS(unflatten(std::vector<double>(5), {1, 2, 2}, LayoutKind::zorder, Precision::f64), Error);
}

TEST_CASE("row-major Chebyshev step matches its closed form") {
  for (uint32_t m : {2u, 5u, 16u})
    for (uint32_t n : {2u, 3u, 17u}) {
      const double within = double(m) * (n - 1);
      const double wraps = double(m - 1) * std::max(1u, n - 1);
      CHECK(mean_chebyshev_step(m, n, LayoutKind::row_major) == doctest::Approx((within + wraps) / (m * n - 1.0)));
    }
}

TEST_CASE("layout names parse") {
  CHECK(parse_layout("zorder") == LayoutKind::zorder);
  CHECK(parse_layout("row") == LayoutKind::row_major);
  CHECK(parse_layout("col") == LayoutKind::column_major);
  CHECK_THROWS_AS(parse_layout("hilbert"), Error);
}
