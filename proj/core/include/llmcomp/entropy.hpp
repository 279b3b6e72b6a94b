#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "llmcomp/io.hpp"

namespace llmcomp {

// Byte-oriented range coder with carry propagation (32-bit range, 33-bit
// low, top-byte normalisation at 2^24). Every encoder byte is consumed by
// the matching decoder, so truncation is always detected.
class RangeEncoder {
 public:
  void encode(uint32_t cum, uint32_t freq, uint32_t total);
  // Up to 16 raw bits at a time, lowest chunk first for wider values.
  void encode_bits(uint64_t value, unsigned nbits);
  Bytes finish();

 private:
  void shift_low();

  uint64_t low_ = 0;
  uint32_t range_ = 0xFFFFFFFFu;
  uint8_t cache_ = 0;
  uint64_t cache_size_ = 1;
  Bytes out_;
};

class RangeDecoder {
 public:
  explicit RangeDecoder(std::span<const uint8_t> bytes);

  // Scaled target in [0, total); pass to the model, then call consume().
  uint32_t target(uint32_t total);
  void consume(uint32_t cum, uint32_t freq);
  uint64_t decode_bits(unsigned nbits);

  // Throws corruption unless every input byte was used.
  void expect_end() const;

 private:
  uint8_t next_byte();
  void normalize();

  std::span<const uint8_t> in_;
  size_t pos_ = 0;
  uint32_t code_ = 0;
  uint32_t range_ = 0xFFFFFFFFu;
  uint32_t scale_ = 1;
};

// Adaptive order-0 frequency model over [0, alphabet). Counts start at 1,
// grow by 2 per occurrence (a KT-style estimator) and are halved once the
// total passes `limit`. Cumulative counts live in a Fenwick tree.
class AdaptiveModel {
 public:
  explicit AdaptiveModel(uint32_t alphabet);

  uint32_t alphabet() const { return alphabet_; }
  void encode(RangeEncoder& enc, uint32_t symbol);
  uint32_t decode(RangeDecoder& dec);

 private:
  uint32_t cumulative(uint32_t symbol) const;  // sum of counts below symbol
  uint32_t find(uint32_t target) const;        // largest s with cumulative(s) <= target
  void add(uint32_t symbol, uint32_t delta);
  void update(uint32_t symbol);
  void rebuild();

  static constexpr uint32_t increment = 2;
  uint32_t alphabet_;
  uint32_t limit_;
  uint32_t total_ = 0;
  uint32_t top_bit_ = 1;
  std::vector<uint32_t> counts_;
  std::vector<uint32_t> tree_;
};

// Non-negative integers as an adaptive bit-length bucket followed by the
// raw bits below the leading one.
class AdaptiveIntegerCoder {
 public:
  AdaptiveIntegerCoder() : buckets_(65) {}
  void encode(RangeEncoder& enc, uint64_t value);
  uint64_t decode(RangeDecoder& dec);

 private:
  AdaptiveModel buckets_;
};

constexpr uint64_t zigzag(int64_t v) { return (static_cast<uint64_t>(v) << 1) ^ static_cast<uint64_t>(v >> 63); }
constexpr int64_t unzigzag(uint64_t u) { return static_cast<int64_t>(u >> 1) ^ -static_cast<int64_t>(u & 1); }

// Symbols in [0, alphabet) through one adaptive model. An empty stream
// encodes to an empty payload.
Bytes entropy_encode(std::span<const uint32_t> symbols, uint32_t alphabet);
std::vector<uint32_t> entropy_decode(std::span<const uint8_t> bytes, size_t count, uint32_t alphabet);

// n * H0 in bits for the empirical symbol distribution.
double order0_entropy_bits(std::span<const uint32_t> symbols);

}  // namespace llmcomp
