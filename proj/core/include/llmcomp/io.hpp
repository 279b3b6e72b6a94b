#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "llmcomp/error.hpp"

namespace llmcomp {

static_assert(std::endian::native == std::endian::little,
              "byte streams assume a little-endian host");

using Bytes = std::vector<uint8_t>;
using Digest = std::array<uint8_t, 32>;

// Appends fixed-width little-endian values to a byte buffer.
class ByteWriter {
 public:
  explicit ByteWriter(Bytes& out) : out_(out) {}

  template <class T>
  void put(T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    const auto* p = reinterpret_cast<const uint8_t*>(&value);
    out_.insert(out_.end(), p, p + sizeof(T));
  }

  void put_bytes(std::span<const uint8_t> bytes) {
    out_.insert(out_.end(), bytes.begin(), bytes.end());
  }

  size_t size() const { return out_.size(); }

 private:
  Bytes& out_;
};

// Reads fixed-width little-endian values; throws malformed_input on underrun.
class ByteReader {
 public:
  explicit ByteReader(std::span<const uint8_t> in) : in_(in) {}

  template <class T>
  T get() {
    static_assert(std::is_trivially_copyable_v<T>);
    require(sizeof(T));
    T value;
    std::memcpy(&value, in_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  std::span<const uint8_t> get_bytes(size_t n) {
    require(n);
    auto s = in_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

  size_t position() const { return pos_; }
  size_t remaining() const { return in_.size() - pos_; }

 private:
  void require(size_t n) const {
    if (in_.size() - pos_ < n) fail(ErrorKind::malformed_input, "unexpected end of data");
  }

  std::span<const uint8_t> in_;
  size_t pos_ = 0;
};

uint32_t crc32(std::span<const uint8_t> bytes);
Digest sha256(std::span<const uint8_t> bytes);
std::string to_hex(std::span<const uint8_t> bytes);

Bytes read_file(const std::filesystem::path& path);

// Writes to a sibling temporary file and renames it over `path`, so a
// failed write never leaves a partial output behind.
void write_file_atomic(const std::filesystem::path& path, std::span<const uint8_t> bytes);

}  // namespace llmcomp
