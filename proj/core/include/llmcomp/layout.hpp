#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "llmcomp/field.hpp"

namespace llmcomp {

enum class LayoutKind : uint8_t { zorder = 0, row_major = 1, column_major = 2 };

LayoutKind parse_layout(std::string_view s);  // "zorder", "row", "col"
std::string_view to_string(LayoutKind kind);

// Interleaves the bits of (m, n); n supplies the low bit of each pair.
constexpr uint64_t morton_encode(uint32_t m, uint32_t n) {
  auto spread = [](uint64_t x) {
    x &= 0xffffffffULL;
    x = (x | (x << 16)) & 0x0000ffff0000ffffULL;
    x = (x | (x << 8)) & 0x00ff00ff00ff00ffULL;
    x = (x | (x << 4)) & 0x0f0f0f0f0f0f0f0fULL;
    x = (x | (x << 2)) & 0x3333333333333333ULL;
    x = (x | (x << 1)) & 0x5555555555555555ULL;
    return x;
  };
  return spread(n) | (spread(m) << 1);
}

struct Coord {
  uint32_t x = 0;  // row m
  uint32_t y = 0;  // column n
  uint32_t t = 0;
  bool operator==(const Coord&) const = default;
};

// Per-timestep visiting order of an M x N plane. order[j] is the row-major
// cell index (m * N + n) visited at in-plane position j; rank is its inverse.
class LinearIndexMap {
 public:
  LinearIndexMap(uint32_t m, uint32_t n, LayoutKind kind);

  std::span<const uint32_t> order() const { return order_; }
  std::span<const uint32_t> rank() const { return rank_; }
  uint32_t rows() const { return m_; }
  uint32_t cols() const { return n_; }
  LayoutKind kind() const { return kind_; }

  // Coordinates of stream position p across the whole sequence.
  Coord coord(size_t p) const;

 private:
  uint32_t m_, n_;
  LayoutKind kind_;
  std::vector<uint32_t> order_;
  std::vector<uint32_t> rank_;
};

struct Sequence {
  std::vector<double> values;
  std::vector<Coord> coords;
};

// Coordinates for every stream position of a field with `dims`.
std::vector<Coord> stream_coords(Dims dims, LayoutKind kind);

Sequence flatten(const Field& field, LayoutKind kind);
Field unflatten(std::span<const double> sequence, Dims dims, LayoutKind kind, Precision precision);

// Mean Chebyshev distance between consecutive in-plane positions.
double mean_chebyshev_step(uint32_t m, uint32_t n, LayoutKind kind);

}  // namespace llmcomp
