#include "llmcomp/metrics.hpp"

#include <cmath>
#include <limits>

#include "llmcomp/codec.hpp"
#include "llmcomp/error.hpp"

namespace llmcomp {

double compression_ratio(size_t original_bytes, size_t archive_bytes) {
  if (archive_bytes == 0) fail(ErrorKind::usage, "archive size must be positive");
  return static_cast<double>(original_bytes) / static_cast<double>(archive_bytes);
}

double bitrate(size_t archive_bytes, size_t samples) {
  if (samples == 0) fail(ErrorKind::usage, "field has no samples");
  return 8.0 * static_cast<double>(archive_bytes) / static_cast<double>(samples);
}

ErrorStats error_stats(const Field& original, const Field& reconstructed) {
  if (original.dims() != reconstructed.dims()) fail(ErrorKind::usage, "fields differ in shape");
  const auto a = original.values();
  const auto b = reconstructed.values();
  ErrorStats s;
  double sum = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double d = std::abs(a[i] - b[i]);
    s.max_abs = std::max(s.max_abs, d);
    sum += d * d;
  }
  s.mse = sum / static_cast<double>(a.size());
  const double range = original.vrange();
  constexpr double inf = std::numeric_limits<double>::infinity();
  if (range > 0.0) s.max_rel = s.max_abs / range;
  else s.max_rel = s.max_abs == 0.0 ? 0.0 : inf;
  if (s.mse == 0.0) s.psnr = inf;
  else s.psnr = 10.0 * std::log10(range * range / s.mse);
  return s;
}

StorageBreakdown storage_breakdown(const Archive& archive) {
  StorageBreakdown b;
  b.header = archive_header_size;
  b.quantizer = archive.section(Section::quantizer).size();
  b.predictor = archive.section(Section::predictor).size();
  b.prefix = archive.section(Section::prefix).size();
  b.ranks = archive.section(Section::ranks).size();
  b.corrections = archive.section(Section::corrections).size();
  b.residuals = archive.section(Section::residuals).size();
  return b;
}

VerifyReport verify(const Field& original, const Archive& archive, const Predictor* predictor) {
  const ArchiveHeader& h = archive.header;
  if (original.dims() != h.dims) fail(ErrorKind::usage, "original field dims do not match the archive");
  const Field recon = decompress(archive, predictor);
  VerifyReport r;
  r.errors = error_stats(original, recon);
  r.epsilon = h.epsilon;
  const size_t size = archive.size_bytes();
  r.ratio = compression_ratio(original.size_bytes(), size);
  r.bitrate = bitrate(size, original.dims().count());
  r.expands = r.ratio < 1.0;
  const double range = original.vrange();
  bool ok = true;
  for (size_t i = 0; i < recon.values().size() && ok; ++i)
    ok = std::abs(original.values()[i] - recon.values()[i]) <= h.epsilon * range;
  r.within_bound = ok;
  return r;
}

}  // namespace llmcomp
