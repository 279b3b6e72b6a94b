#include "llmcomp/io.hpp"

#include <openssl/sha.h>
#include <zlib.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <system_error>

namespace llmcomp {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::usage: return "usage";
    case ErrorKind::io: return "io";
    case ErrorKind::malformed_input: return "malformed-input";
    case ErrorKind::corruption: return "corruption";
    case ErrorKind::bound_violation: return "bound-violation";
    case ErrorKind::divergence: return "divergence";
  }
  return "unknown";
}

uint32_t crc32(std::span<const uint8_t> bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed large buffers in chunks.
  size_t offset = 0;
  while (offset < bytes.size()) {
    const size_t chunk = std::min<size_t>(bytes.size() - offset, 1u << 30);
    crc = ::crc32(crc, bytes.data() + offset, static_cast<uInt>(chunk));
    offset += chunk;
  }
  return static_cast<uint32_t>(crc);
}

Digest sha256(std::span<const uint8_t> bytes) {
  Digest out{};
  SHA256(bytes.data(), bytes.size(), out.data());
  return out;
}

std::string to_hex(std::span<const uint8_t> bytes) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string s;
  s.reserve(bytes.size() * 2);
  for (uint8_t b : bytes) {
    s.push_back(digits[b >> 4]);
    s.push_back(digits[b & 15]);
  }
  return s;
}

Bytes read_file(const std::filesystem::path& path) {
  if (path.empty()) fail(ErrorKind::io, "empty input path");
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) fail(ErrorKind::io, "cannot open '" + path.string() + "' for reading");
  const auto size = static_cast<size_t>(in.tellg());
  Bytes bytes(size);
  in.seekg(0);
  if (size > 0 && !in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(size)))
    fail(ErrorKind::io, "read failed on '" + path.string() + "'");
  return bytes;
}

void write_file_atomic(const std::filesystem::path& path, std::span<const uint8_t> bytes) {
  if (path.empty()) fail(ErrorKind::io, "empty output path");
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::io, "cannot open '" + tmp.string() + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) {
      out.close();
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      fail(ErrorKind::io, "write failed on '" + tmp.string() + "'");
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    fail(ErrorKind::io, "cannot rename into '" + path.string() + "'");
  }
}

}  // namespace llmcomp
