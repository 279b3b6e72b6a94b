#include "llmcomp/layout.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "llmcomp/error.hpp"

namespace llmcomp {

LayoutKind parse_layout(std::string_view s) {
  if (s == "zorder") return LayoutKind::zorder;
  if (s == "row") return LayoutKind::row_major;
  if (s == "col") return LayoutKind::column_major;
  fail(ErrorKind::usage, "unknown layout '" + std::string(s) + "' (expected zorder, row or col)");
}

std::string_view to_string(LayoutKind kind) {
  switch (kind) {
    case LayoutKind::zorder: return "zorder";
    case LayoutKind::row_major: return "row";
    case LayoutKind::column_major: return "col";
  }
  return "unknown";
}

LinearIndexMap::LinearIndexMap(uint32_t m, uint32_t n, LayoutKind kind) : m_(m), n_(n), kind_(kind) {
  const size_t cells = size_t{m} * n;
  order_.resize(cells);
  switch (kind) {
    case LayoutKind::row_major:
      std::iota(order_.begin(), order_.end(), 0u);
      break;
    case LayoutKind::column_major: {
      size_t j = 0;
      for (uint32_t c = 0; c < n; ++c)
        for (uint32_t r = 0; r < m; ++r) order_[j++] = r * n + c;
      break;
    }
    case LayoutKind::zorder: {
      // Sorting the real cells by code is the same as walking the padded
      // power-of-two grid and skipping cells outside M x N.
      std::vector<std::pair<uint64_t, uint32_t>> keyed(cells);
      for (uint32_t r = 0; r < m; ++r)
        for (uint32_t c = 0; c < n; ++c) keyed[size_t{r} * n + c] = {morton_encode(r, c), r * n + c};
      std::sort(keyed.begin(), keyed.end());
      for (size_t j = 0; j < cells; ++j) order_[j] = keyed[j].second;
      break;
    }
  }
  rank_.resize(cells);
  for (size_t j = 0; j < cells; ++j) rank_[order_[j]] = static_cast<uint32_t>(j);
}

Coord LinearIndexMap::coord(size_t p) const {
  const size_t plane = order_.size();
  const uint32_t cell = order_[p % plane];
  return {cell / n_, cell % n_, static_cast<uint32_t>(p / plane)};
}

std::vector<Coord> stream_coords(Dims dims, LayoutKind kind) {
  const LinearIndexMap map(dims.m, dims.n, kind);
  std::vector<Coord> coords(dims.count());
  for (size_t p = 0; p < coords.size(); ++p) coords[p] = map.coord(p);
  return coords;
}

Sequence flatten(const Field& field, LayoutKind kind) {
  const Dims& d = field.dims();
  const LinearIndexMap map(d.m, d.n, kind);
  const size_t plane = d.plane();
  const auto values = field.values();
  Sequence seq;
  seq.values.resize(d.count());
  seq.coords.resize(d.count());
  for (uint32_t t = 0; t < d.t; ++t) {
    const size_t base = t * plane;
    for (size_t j = 0; j < plane; ++j) {
      const uint32_t cell = map.order()[j];
      seq.values[base + j] = values[base + cell];
      seq.coords[base + j] = {cell / d.n, cell % d.n, t};
    }
  }
  return seq;
}

Field unflatten(std::span<const double> sequence, Dims dims, LayoutKind kind, Precision precision) {
  if (sequence.size() != dims.count())
    fail(ErrorKind::malformed_input, "sequence length " + std::to_string(sequence.size()) +
                                         " does not match dims (" + std::to_string(dims.count()) + " samples)");
  const LinearIndexMap map(dims.m, dims.n, kind);
  const size_t plane = dims.plane();
  std::vector<double> values(dims.count());
  for (uint32_t t = 0; t < dims.t; ++t) {
    const size_t base = t * plane;
    for (size_t j = 0; j < plane; ++j) values[base + map.order()[j]] = sequence[base + j];
  }
  return Field(dims, precision, std::move(values));
}

double mean_chebyshev_step(uint32_t m, uint32_t n, LayoutKind kind) {
  const LinearIndexMap map(m, n, kind);
  const auto order = map.order();
  if (order.size() < 2) return 0.0;
  double total = 0.0;
  for (size_t j = 1; j < order.size(); ++j) {
    const long r0 = order[j - 1] / n, c0 = order[j - 1] % n;
    const long r1 = order[j] / n, c1 = order[j] % n;
    total += static_cast<double>(std::max(std::labs(r1 - r0), std::labs(c1 - c0)));
  }
  return total / static_cast<double>(order.size() - 1);
}

}  // namespace llmcomp
