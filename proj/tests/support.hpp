#pragma once

#include <cmath>
#include <filesystem>
#include <span>
#include <unistd.h>
#include <string>
#include <vector>

#include "llmcomp/field.hpp"
#include "llmcomp/layout.hpp"
#include "llmcomp/predictor.hpp"

namespace testing {

using namespace llmcomp;

// Fresh per-process scratch directory under the system temp path.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("llmcomp-" + name + "-" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

// Knows the true token stream and ranks the true token last, so it never
// lands in any top-k with k < V.
class AdversarialPredictor final : public Predictor {
 public:
  AdversarialPredictor(std::vector<uint32_t> truth, Dims dims, LayoutKind layout, uint32_t vocab, uint32_t context)
      : truth_(std::move(truth)), dims_(dims), map_(dims.m, dims.n, layout), vocab_(vocab), context_(context) {}

  uint32_t vocab() const override { return vocab_; }
  uint32_t context_length() const override { return context_; }
  void scores(const Context& ctx, std::span<double> out) const override {
    const Coord& c = ctx.coords.back();
    const size_t p = size_t{c.t} * dims_.plane() + map_.rank()[size_t{c.x} * dims_.n + c.y];
    for (uint32_t v = 0; v < vocab_; ++v) out[v] = v == truth_[p] ? -1.0 : static_cast<double>(v % 7);
  }

 private:
  std::vector<uint32_t> truth_;
  Dims dims_;
  LinearIndexMap map_;
  uint32_t vocab_, context_;
};

// Pseudo-random scores derived only from the context, so encoder and
// decoder agree while ranks look arbitrary.
class HashPredictor final : public Predictor {
 public:
  HashPredictor(uint32_t vocab, uint32_t context, uint64_t salt) : vocab_(vocab), context_(context), salt_(salt) {}
  uint32_t vocab() const override { return vocab_; }
  uint32_t context_length() const override { return context_; }
  void scores(const Context& ctx, std::span<double> out) const override {
    uint64_t h = salt_ ^ 0x9e3779b97f4a7c15ULL;
    for (uint32_t t : ctx.tokens) h = (h ^ t) * 0x100000001b3ULL;
    for (uint32_t v = 0; v < vocab_; ++v) {
      uint64_t x = h + v * 0xbf58476d1ce4e5b9ULL;
      x ^= x >> 31;
      x *= 0x94d049bb133111ebULL;
      x ^= x >> 29;
      out[v] = static_cast<double>(x % 1000);
    }
    if (!ctx.tokens.empty()) out[ctx.tokens.back()] += 500.0;
  }

 private:
  uint32_t vocab_, context_;
  uint64_t salt_;
};

inline double max_relative_error(const Field& a, const Field& b) {
  double m = 0.0;
  for (size_t i = 0; i < a.values().size(); ++i) m = std::max(m, std::abs(a.values()[i] - b.values()[i]));
  return a.vrange() > 0 ? m / a.vrange() : (m == 0 ? 0.0 : INFINITY);
}

}  // namespace testing
