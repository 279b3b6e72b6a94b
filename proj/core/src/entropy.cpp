#include "llmcomp/entropy.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <string>
#include <unordered_map>

#include "llmcomp/error.hpp"

namespace llmcomp {

namespace {
constexpr uint32_t top = 1u << 24;
constexpr uint32_t max_total = 1u << 22;
}  // namespace

void RangeEncoder::shift_low() {
  if (static_cast<uint32_t>(low_) < 0xFF000000u || (low_ >> 32) != 0) {
    const auto carry = static_cast<uint8_t>(low_ >> 32);
    uint8_t byte = cache_;
    do {
      out_.push_back(static_cast<uint8_t>(byte + carry));
      byte = 0xFF;
    } while (--cache_size_ != 0);
    cache_ = static_cast<uint8_t>(static_cast<uint32_t>(low_) >> 24);
  }
  ++cache_size_;
  low_ = (low_ & 0x00FFFFFFu) << 8;
}

void RangeEncoder::encode(uint32_t cum, uint32_t freq, uint32_t total) {
  const uint32_t r = range_ / total;
  low_ += static_cast<uint64_t>(r) * cum;
  range_ = r * freq;
  while (range_ < top) {
    range_ <<= 8;
    shift_low();
  }
}

void RangeEncoder::encode_bits(uint64_t value, unsigned nbits) {
  while (nbits > 0) {
    const unsigned chunk = std::min(nbits, 16u);
    encode(static_cast<uint32_t>(value & ((1u << chunk) - 1)), 1, 1u << chunk);
    value >>= chunk;
    nbits -= chunk;
  }
}

Bytes RangeEncoder::finish() {
  for (int i = 0; i < 5; ++i) shift_low();
  return std::move(out_);
}

RangeDecoder::RangeDecoder(std::span<const uint8_t> bytes) : in_(bytes) {
  for (int i = 0; i < 5; ++i) code_ = (code_ << 8) | next_byte();
}

uint8_t RangeDecoder::next_byte() {
  if (pos_ >= in_.size()) fail(ErrorKind::corruption, "entropy-coded stream is truncated");
  return in_[pos_++];
}

void RangeDecoder::normalize() {
  while (range_ < top) {
    code_ = (code_ << 8) | next_byte();
    range_ <<= 8;
  }
}

uint32_t RangeDecoder::target(uint32_t total) {
  scale_ = range_ / total;
  const uint32_t value = code_ / scale_;
  if (value >= total) fail(ErrorKind::corruption, "entropy-coded stream is inconsistent");
  return value;
}

void RangeDecoder::consume(uint32_t cum, uint32_t freq) {
  code_ -= scale_ * cum;
  range_ = scale_ * freq;
  normalize();
}

uint64_t RangeDecoder::decode_bits(unsigned nbits) {
  uint64_t value = 0;
  unsigned shift = 0;
  while (nbits > 0) {
    const unsigned chunk = std::min(nbits, 16u);
    const uint32_t v = target(1u << chunk);
    consume(v, 1);
    value |= static_cast<uint64_t>(v) << shift;
    shift += chunk;
    nbits -= chunk;
  }
  return value;
}

void RangeDecoder::expect_end() const {
  if (pos_ != in_.size()) fail(ErrorKind::corruption, "trailing bytes after entropy-coded stream");
}

AdaptiveModel::AdaptiveModel(uint32_t alphabet) : alphabet_(alphabet) {
  if (alphabet == 0 || alphabet > max_total / 4) fail(ErrorKind::usage, "unsupported alphabet size");
  limit_ = std::max<uint32_t>(1u << 16, 4 * alphabet);
  counts_.assign(alphabet, 1);
  while (top_bit_ * 2 <= alphabet) top_bit_ *= 2;
  rebuild();
}

void AdaptiveModel::rebuild() {
  tree_.assign(alphabet_ + 1, 0);
  total_ = 0;
  for (uint32_t s = 0; s < alphabet_; ++s) {
    total_ += counts_[s];
    for (uint32_t i = s + 1; i <= alphabet_; i += i & (~i + 1)) tree_[i] += counts_[s];
  }
}

void AdaptiveModel::add(uint32_t symbol, uint32_t delta) {
  for (uint32_t i = symbol + 1; i <= alphabet_; i += i & (~i + 1)) tree_[i] += delta;
  total_ += delta;
}

uint32_t AdaptiveModel::cumulative(uint32_t symbol) const {
  uint32_t sum = 0;
  for (uint32_t i = symbol; i > 0; i -= i & (~i + 1)) sum += tree_[i];
  return sum;
}

uint32_t AdaptiveModel::find(uint32_t target) const {
  uint32_t pos = 0;
  for (uint32_t step = top_bit_; step > 0; step >>= 1) {
    const uint32_t next = pos + step;
    if (next <= alphabet_ && tree_[next] <= target) {
      pos = next;
      target -= tree_[next];
    }
  }
  return pos;
}

void AdaptiveModel::update(uint32_t symbol) {
  counts_[symbol] += increment;
  add(symbol, increment);
  if (total_ > limit_) {
    for (auto& c : counts_) c = (c + 1) / 2;
    rebuild();
  }
}

void AdaptiveModel::encode(RangeEncoder& enc, uint32_t symbol) {
  if (symbol >= alphabet_)
    fail(ErrorKind::usage, "symbol " + std::to_string(symbol) + " outside alphabet " + std::to_string(alphabet_));
  enc.encode(cumulative(symbol), counts_[symbol], total_);
  update(symbol);
}

uint32_t AdaptiveModel::decode(RangeDecoder& dec) {
  const uint32_t target = dec.target(total_);
  const uint32_t symbol = find(target);
  dec.consume(cumulative(symbol), counts_[symbol]);
  update(symbol);
  return symbol;
}

void AdaptiveIntegerCoder::encode(RangeEncoder& enc, uint64_t value) {
  const auto width = static_cast<uint32_t>(std::bit_width(value));
  buckets_.encode(enc, width);
  if (width > 1) enc.encode_bits(value, width - 1);
}

uint64_t AdaptiveIntegerCoder::decode(RangeDecoder& dec) {
  const uint32_t width = buckets_.decode(dec);
  if (width <= 1) return width;
  return (uint64_t{1} << (width - 1)) | dec.decode_bits(width - 1);
}

Bytes entropy_encode(std::span<const uint32_t> symbols, uint32_t alphabet) {
  if (symbols.empty()) return {};
  AdaptiveModel model(alphabet);
  RangeEncoder enc;
  for (uint32_t s : symbols) model.encode(enc, s);
  return enc.finish();
}

std::vector<uint32_t> entropy_decode(std::span<const uint8_t> bytes, size_t count, uint32_t alphabet) {
  if (count == 0) {
    if (!bytes.empty()) fail(ErrorKind::corruption, "payload present for an empty stream");
    return {};
  }
  AdaptiveModel model(alphabet);
  RangeDecoder dec(bytes);
  std::vector<uint32_t> out(count);
  for (auto& s : out) s = model.decode(dec);
  dec.expect_end();
  return out;
}

double order0_entropy_bits(std::span<const uint32_t> symbols) {
  std::unordered_map<uint32_t, size_t> counts;
  for (uint32_t s : symbols) ++counts[s];
  const double n = static_cast<double>(symbols.size());
  double bits = 0.0;
  for (const auto& [s, c] : counts) bits -= static_cast<double>(c) * std::log2(static_cast<double>(c) / n);
  return bits;
}

}  // namespace llmcomp
