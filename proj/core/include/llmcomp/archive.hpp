#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>

#include "llmcomp/field.hpp"
#include "llmcomp/io.hpp"
#include "llmcomp/layout.hpp"
#include "llmcomp/predictor.hpp"

namespace llmcomp {

inline constexpr uint16_t archive_version = 1;
inline constexpr size_t archive_header_size = 168;

// Sections in on-disk order.
enum class Section : uint8_t { quantizer = 0, predictor = 1, prefix = 2, ranks = 3, corrections = 4, residuals = 5 };
inline constexpr size_t section_count = 6;
std::string_view to_string(Section s);

// Fixed 168-byte little-endian header, followed by the section payloads.
struct ArchiveHeader {
  Dims dims;
  Precision precision = Precision::f64;
  LayoutKind layout = LayoutKind::zorder;
  PredictorKind predictor = PredictorKind::last_value;
  double epsilon = 0.0;
  double vmin = 0.0;
  double vmax = 0.0;
  uint32_t vocab = 0;
  uint32_t context = 0;
  uint32_t topk = 0;
  Digest predictor_hash{};
  uint64_t rank_count = 0;
  uint64_t correction_count = 0;
  uint64_t residual_count = 0;

  bool operator==(const ArchiveHeader&) const = default;
};

struct Archive {
  ArchiveHeader header;
  std::array<Bytes, section_count> sections;

  Bytes& section(Section s) { return sections[static_cast<size_t>(s)]; }
  const Bytes& section(Section s) const { return sections[static_cast<size_t>(s)]; }

  // Total serialized size, the |Z| of the compression ratio.
  size_t size_bytes() const;
};

Bytes serialize_archive(const Archive& archive);
// Verifies the header checksum and every section checksum before returning.
Archive parse_archive(std::span<const uint8_t> bytes);

void save_archive(const Archive& archive, const std::filesystem::path& path);
Archive load_archive(const std::filesystem::path& path);

}  // namespace llmcomp
