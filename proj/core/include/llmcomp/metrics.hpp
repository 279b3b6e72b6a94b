#pragma once

#include <cstddef>

#include "llmcomp/archive.hpp"
#include "llmcomp/field.hpp"
#include "llmcomp/predictor.hpp"

namespace llmcomp {

// Original bytes over compressed bytes.
double compression_ratio(size_t original_bytes, size_t archive_bytes);
// Compressed bits per original sample.
double bitrate(size_t archive_bytes, size_t samples);

struct ErrorStats {
  double max_abs = 0.0;
  double max_rel = 0.0;  // max_abs / vrange; +inf for a constant field reconstructed inexactly
  double mse = 0.0;
  double psnr = 0.0;     // +inf when the reconstruction is exact
};

// vrange is taken from the original field.
ErrorStats error_stats(const Field& original, const Field& reconstructed);

struct StorageBreakdown {
  size_t header = 0;
  size_t quantizer = 0;
  size_t predictor = 0;
  size_t prefix = 0;
  size_t ranks = 0;
  size_t corrections = 0;
  size_t residuals = 0;

  size_t total() const { return header + quantizer + predictor + prefix + ranks + corrections + residuals; }
};

StorageBreakdown storage_breakdown(const Archive& archive);

struct VerifyReport {
  ErrorStats errors;
  double epsilon = 0.0;
  double ratio = 0.0;
  double bitrate = 0.0;
  bool within_bound = false;
  bool expands = false;  // archive larger than the original
};

// Decompresses `archive` and checks every point against the relative bound
// recorded in its header.
VerifyReport verify(const Field& original, const Archive& archive, const Predictor* predictor = nullptr);

}  // namespace llmcomp
