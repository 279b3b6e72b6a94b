#include "llmcomp/archive.hpp"

#include <cstring>
#include <string>

#include "llmcomp/error.hpp"

namespace llmcomp {

namespace {
constexpr char magic[4] = {'L', 'L', 'M', 'C'};
}

std::string_view to_string(Section s) {
  switch (s) {
    case Section::quantizer: return "quantizer";
    case Section::predictor: return "predictor";
    case Section::prefix: return "prefix";
    case Section::ranks: return "ranks";
    case Section::corrections: return "corrections";
    case Section::residuals: return "residuals";
  }
  return "unknown";
}

size_t Archive::size_bytes() const {
  size_t total = archive_header_size;
  for (const auto& s : sections) total += s.size();
  return total;
}

Bytes serialize_archive(const Archive& archive) {
  const ArchiveHeader& h = archive.header;
  Bytes out(std::begin(magic), std::end(magic));
  out.reserve(archive.size_bytes());
  ByteWriter w(out);
  w.put<uint16_t>(archive_version);
  w.put<uint16_t>(static_cast<uint16_t>(archive_header_size));
  w.put<uint32_t>(h.dims.t);
  w.put<uint32_t>(h.dims.m);
  w.put<uint32_t>(h.dims.n);
  w.put<uint8_t>(static_cast<uint8_t>(h.precision));
  w.put<uint8_t>(static_cast<uint8_t>(h.layout));
  w.put<uint8_t>(static_cast<uint8_t>(h.predictor));
  w.put<uint8_t>(0);
  w.put<double>(h.epsilon);
  w.put<double>(h.vmin);
  w.put<double>(h.vmax);
  w.put<uint32_t>(h.vocab);
  w.put<uint32_t>(h.context);
  w.put<uint32_t>(h.topk);
  w.put_bytes(h.predictor_hash);
  w.put<uint64_t>(h.rank_count);
  w.put<uint64_t>(h.correction_count);
  w.put<uint64_t>(h.residual_count);
  for (const auto& s : archive.sections) {
    if (s.size() > UINT32_MAX) fail(ErrorKind::usage, "archive section exceeds 4 GiB");
    w.put<uint32_t>(static_cast<uint32_t>(s.size()));
    w.put<uint32_t>(crc32(s));
  }
  w.put<uint32_t>(crc32(out));
  for (const auto& s : archive.sections) w.put_bytes(s);
  return out;
}

Archive parse_archive(std::span<const uint8_t> bytes) {
  if (bytes.size() < archive_header_size || std::memcmp(bytes.data(), magic, sizeof(magic)) != 0)
    fail(ErrorKind::malformed_input, "not an archive (bad magic)");
  ByteReader r(bytes);
  r.get_bytes(sizeof(magic));
  const auto version = r.get<uint16_t>();
  if (version != archive_version) fail(ErrorKind::malformed_input, "unsupported archive version " + std::to_string(version));
  if (r.get<uint16_t>() != archive_header_size) fail(ErrorKind::malformed_input, "unexpected archive header size");

  uint32_t stored_header_crc;
  std::memcpy(&stored_header_crc, bytes.data() + archive_header_size - 4, 4);
  if (crc32(bytes.first(archive_header_size - 4)) != stored_header_crc)
    fail(ErrorKind::corruption, "archive header checksum mismatch");

  Archive a;
  ArchiveHeader& h = a.header;
  h.dims.t = r.get<uint32_t>();
  h.dims.m = r.get<uint32_t>();
  h.dims.n = r.get<uint32_t>();
  const auto precision = r.get<uint8_t>();
  const auto layout = r.get<uint8_t>();
  const auto predictor = r.get<uint8_t>();
  r.get<uint8_t>();
  if (precision > 1 || layout > 2 || (predictor > 2 && predictor != 255))
    fail(ErrorKind::malformed_input, "archive header has an unknown enum value");
  h.precision = static_cast<Precision>(precision);
  h.layout = static_cast<LayoutKind>(layout);
  h.predictor = static_cast<PredictorKind>(predictor);
  h.epsilon = r.get<double>();
  h.vmin = r.get<double>();
  h.vmax = r.get<double>();
  h.vocab = r.get<uint32_t>();
  h.context = r.get<uint32_t>();
  h.topk = r.get<uint32_t>();
  const auto hash = r.get_bytes(32);
  std::copy(hash.begin(), hash.end(), h.predictor_hash.begin());
  h.rank_count = r.get<uint64_t>();
  h.correction_count = r.get<uint64_t>();
  h.residual_count = r.get<uint64_t>();

  std::array<uint32_t, section_count> lengths{}, crcs{};
  uint64_t payload = 0;
  for (size_t i = 0; i < section_count; ++i) {
    lengths[i] = r.get<uint32_t>();
    crcs[i] = r.get<uint32_t>();
    payload += lengths[i];
  }
  r.get<uint32_t>();
  if (bytes.size() != archive_header_size + payload)
    fail(ErrorKind::corruption, "archive is " + std::to_string(bytes.size()) + " bytes, header describes " +
                                    std::to_string(archive_header_size + payload));
  for (size_t i = 0; i < section_count; ++i) {
    const auto body = r.get_bytes(lengths[i]);
    if (crc32(body) != crcs[i])
      fail(ErrorKind::corruption, std::string(to_string(static_cast<Section>(i))) + " section checksum mismatch");
    a.sections[i].assign(body.begin(), body.end());
  }

  if (h.dims.t == 0 || h.dims.m == 0 || h.dims.n == 0 || h.vocab < 2 || h.topk == 0 || h.topk > h.vocab)
    fail(ErrorKind::malformed_input, "archive header has inconsistent parameters");
  const uint64_t total = h.dims.count();
  const uint64_t prefix = std::min<uint64_t>(h.context, total);
  if (h.rank_count != total - prefix || h.correction_count > h.rank_count || h.residual_count > total)
    fail(ErrorKind::malformed_input, "archive stream lengths do not match its dims");
  return a;
}

void save_archive(const Archive& archive, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_archive(archive));
}

Archive load_archive(const std::filesystem::path& path) { return parse_archive(read_file(path)); }

}  // namespace llmcomp
