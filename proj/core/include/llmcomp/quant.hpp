#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "llmcomp/io.hpp"
#include "llmcomp/layout.hpp"

namespace llmcomp {

// Scalar quantizer with V bins. Bin v covers [boundaries[v-1], boundaries[v])
// with implicit -inf / +inf at the ends; a sample equal to a boundary
// belongs to the higher bin.
struct QuantizerModel {
  uint32_t vocab = 0;
  std::vector<double> boundaries;  // V - 1, strictly increasing
  std::vector<double> levels;      // V reconstruction values
  std::vector<bool> wide;          // bins that cannot meet the tolerance by themselves
  double lo = 0.0;                 // observed data range at fit time
  double hi = 0.0;
  double tolerance = 0.0;          // absolute tolerance the wide flags were computed for

  uint32_t quantize(double x) const;

  // Bin edges clipped to the observed data range.
  double bin_left(uint32_t v) const;
  double bin_right(uint32_t v) const;
  // Midpoint of the clipped bin.
  double midpoint(uint32_t v) const { return 0.5 * (bin_left(v) + bin_right(v)); }

  size_t wide_count() const;

  // Recomputes `wide` for tolerance e: a bin is wide when some point of
  // its clipped extent lies farther than e from its level.
  void flag_wide_bins(double e);

  bool operator==(const QuantizerModel&) const = default;
};

struct LloydMaxOptions {
  uint32_t max_iters = 200;
  double rel_tol = 1e-9;  // stop once no level moves more than rel_tol * range
  size_t max_samples = 1'000'000;
  uint64_t seed = 0x5eed;
};

struct LloydMaxTrace {
  std::vector<double> mse;  // after each iteration
  uint32_t iterations = 0;
  bool converged = false;
};

QuantizerModel lloyd_max_fit(std::span<const double> samples, uint32_t vocab, double tolerance,
                             const LloydMaxOptions& options = {}, LloydMaxTrace* trace = nullptr);

// Empirical mean squared error of reconstructing `samples` with levels only.
double quantization_mse(std::span<const double> samples, const QuantizerModel& model);

// q = round-half-even((x - level) / (2e)).
int64_t residual_for(double x, double level, double tolerance);

// Reconstruction for a token. `residual` must be present exactly when the
// token's bin is wide.
double dequantize(uint32_t token, std::optional<int64_t> residual, const QuantizerModel& model,
                  double tolerance);

struct QuantizedField {
  std::vector<uint32_t> tokens;    // stream order
  std::vector<Coord> coords;       // stream order
  std::vector<int64_t> residuals;  // one per wide-bin occurrence, stream order
};

QuantizedField quantize_field(const Field& field, const QuantizerModel& model, LayoutKind layout);

// Stream-order reconstructions. Throws corruption if the residual stream
// is not exactly consumed.
std::vector<double> dequantize_stream(std::span<const uint32_t> tokens, std::span<const int64_t> residuals,
                                      const QuantizerModel& model, double tolerance);

void write_quantizer(ByteWriter& w, const QuantizerModel& model);
QuantizerModel read_quantizer(ByteReader& r, double tolerance);

}  // namespace llmcomp
