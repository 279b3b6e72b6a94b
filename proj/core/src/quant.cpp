#include "llmcomp/quant.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "llmcomp/error.hpp"
#include "llmcomp/rng.hpp"

namespace llmcomp {

namespace {

constexpr double inf = std::numeric_limits<double>::infinity();

double up(double x) { return std::nextafter(x, inf); }

// Boundaries become midpoints of adjacent levels, kept strictly increasing
// and with every level inside its own half-open bin.
void boundaries_from_levels(QuantizerModel& q) {
  for (size_t v = 0; v + 1 < q.levels.size(); ++v) {
    const double a = q.levels[v], c = q.levels[v + 1];
    double b = a + 0.5 * (c - a);
    if (b <= a) b = c;
    q.boundaries[v] = b;
  }
}

void make_levels_increasing(std::vector<double>& levels) {
  for (size_t v = 1; v < levels.size(); ++v)
    if (levels[v] <= levels[v - 1]) levels[v] = up(levels[v - 1]);
}

QuantizerModel degenerate_model(uint32_t vocab, double value, double tolerance) {
  QuantizerModel q;
  q.vocab = vocab;
  q.lo = q.hi = value;
  q.levels.resize(vocab);
  q.boundaries.resize(vocab - 1);
  q.levels[0] = value;
  double b = value;
  for (uint32_t v = 1; v < vocab; ++v) {
    b = up(b);
    q.boundaries[v - 1] = b;
    q.levels[v] = b;
  }
  q.flag_wide_bins(tolerance);
  return q;
}

}  // namespace

uint32_t QuantizerModel::quantize(double x) const {
  return static_cast<uint32_t>(std::upper_bound(boundaries.begin(), boundaries.end(), x) - boundaries.begin());
}

double QuantizerModel::bin_left(uint32_t v) const { return v == 0 ? lo : std::max(lo, boundaries[v - 1]); }

double QuantizerModel::bin_right(uint32_t v) const {
  return v + 1 == vocab ? hi : std::min(hi, boundaries[v]);
}

size_t QuantizerModel::wide_count() const { return static_cast<size_t>(std::count(wide.begin(), wide.end(), true)); }

void QuantizerModel::flag_wide_bins(double e) {
  tolerance = e;
  wide.assign(vocab, false);
  for (uint32_t v = 0; v < vocab; ++v) {
    const double left = bin_left(v), right = bin_right(v);
    if (right < left) continue;  // bin lies outside the observed range
    wide[v] = std::max(levels[v] - left, right - levels[v]) > e;
  }
}

double quantization_mse(std::span<const double> samples, const QuantizerModel& model) {
  if (samples.empty()) return 0.0;
  double sum = 0.0;
  for (double x : samples) {
    const double d = x - model.levels[model.quantize(x)];
    sum += d * d;
  }
  return sum / static_cast<double>(samples.size());
}

QuantizerModel lloyd_max_fit(std::span<const double> samples, uint32_t vocab, double tolerance,
                             const LloydMaxOptions& options, LloydMaxTrace* trace) {
  if (vocab < 2) fail(ErrorKind::usage, "vocabulary size must be at least 2");
  if (samples.empty()) fail(ErrorKind::usage, "cannot fit a quantizer to zero samples");

  const auto [mn, mx] = std::minmax_element(samples.begin(), samples.end());
  const double lo = *mn, hi = *mx;
  if (trace) *trace = {};
  if (lo == hi) {
    if (trace) trace->converged = true;
    return degenerate_model(vocab, lo, tolerance);
  }

  std::vector<double> sorted;
  if (samples.size() > options.max_samples) {
    Rng rng(options.seed);
    sorted.resize(options.max_samples);
    for (auto& s : sorted) s = samples[rng.below(samples.size())];
  } else {
    sorted.assign(samples.begin(), samples.end());
  }
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> prefix(sorted.size() + 1, 0.0);
  for (size_t i = 0; i < sorted.size(); ++i) prefix[i + 1] = prefix[i] + sorted[i];

  QuantizerModel q;
  q.vocab = vocab;
  q.lo = lo;
  q.hi = hi;
  q.levels.assign(vocab, 0.0);
  q.boundaries.resize(vocab - 1);
  const double width = (hi - lo) / vocab;
  for (uint32_t v = 1; v < vocab; ++v) q.boundaries[v - 1] = lo + width * v;

  const double tol = options.rel_tol * (hi - lo);
  std::vector<size_t> edge(vocab + 1);
  std::vector<double> previous;
  for (uint32_t iter = 0; iter < options.max_iters; ++iter) {
    edge[0] = 0;
    edge[vocab] = sorted.size();
    for (uint32_t v = 1; v < vocab; ++v)
      edge[v] = static_cast<size_t>(std::lower_bound(sorted.begin(), sorted.end(), q.boundaries[v - 1]) - sorted.begin());

    previous = q.levels;
    for (uint32_t v = 0; v < vocab; ++v) {
      const size_t a = edge[v], b = edge[v + 1];
      if (b > a) {
        const double mean = (prefix[b] - prefix[a]) / static_cast<double>(b - a);
        q.levels[v] = std::clamp(mean, sorted[a], sorted[b - 1]);
      } else {
        // Empty bin: keep V fixed by parking the level mid-interval.
        q.levels[v] = 0.5 * (q.bin_left(v) + q.bin_right(v));
      }
    }
    make_levels_increasing(q.levels);
    boundaries_from_levels(q);

    double movement = 0.0;
    for (uint32_t v = 0; v < vocab; ++v) movement = std::max(movement, std::abs(q.levels[v] - previous[v]));
    if (trace) {
      trace->mse.push_back(quantization_mse(sorted, q));
      trace->iterations = iter + 1;
    }
    if (iter > 0 && movement < tol) {
      if (trace) trace->converged = true;
      break;
    }
  }
  q.flag_wide_bins(tolerance);
  return q;
}

int64_t residual_for(double x, double level, double tolerance) {
  return static_cast<int64_t>(std::nearbyint((x - level) / (2.0 * tolerance)));
}

double dequantize(uint32_t token, std::optional<int64_t> residual, const QuantizerModel& model, double tolerance) {
  if (token >= model.vocab) fail(ErrorKind::corruption, "token " + std::to_string(token) + " outside vocabulary");
  if (residual.has_value() != static_cast<bool>(model.wide[token]))
    fail(ErrorKind::corruption, residual ? "residual supplied for a narrow bin" : "missing residual for a wide bin");
  const double level = model.levels[token];
  if (!residual) return level;
  return level + static_cast<double>(*residual) * (2.0 * tolerance);
}

QuantizedField quantize_field(const Field& field, const QuantizerModel& model, LayoutKind layout) {
  if (field.vmin() < model.lo || field.vmax() > model.hi)
    fail(ErrorKind::usage, "field values fall outside the quantizer's fitted range");
  Sequence seq = flatten(field, layout);
  QuantizedField out;
  out.tokens.resize(seq.values.size());
  out.coords = std::move(seq.coords);
  for (size_t p = 0; p < seq.values.size(); ++p) {
    const double x = seq.values[p];
    const uint32_t token = model.quantize(x);
    out.tokens[p] = token;
    if (model.wide[token]) out.residuals.push_back(residual_for(x, model.levels[token], model.tolerance));
  }
  return out;
}

std::vector<double> dequantize_stream(std::span<const uint32_t> tokens, std::span<const int64_t> residuals,
                                      const QuantizerModel& model, double tolerance) {
  std::vector<double> out(tokens.size());
  size_t next = 0;
  for (size_t p = 0; p < tokens.size(); ++p) {
    const uint32_t token = tokens[p];
    if (token >= model.vocab) fail(ErrorKind::corruption, "token outside vocabulary at position " + std::to_string(p));
    std::optional<int64_t> residual;
    if (model.wide[token]) {
      if (next == residuals.size()) fail(ErrorKind::corruption, "residual stream underrun");
      residual = residuals[next++];
    }
    out[p] = dequantize(token, residual, model, tolerance);
  }
  if (next != residuals.size()) fail(ErrorKind::corruption, "residual stream overrun");
  return out;
}

void write_quantizer(ByteWriter& w, const QuantizerModel& model) {
  w.put<uint32_t>(model.vocab);
  w.put<double>(model.lo);
  w.put<double>(model.hi);
  for (double b : model.boundaries) w.put<double>(b);
  for (double l : model.levels) w.put<double>(l);
  std::vector<uint8_t> bits((model.vocab + 7) / 8, 0);
  for (uint32_t v = 0; v < model.vocab; ++v)
    if (model.wide[v]) bits[v / 8] |= static_cast<uint8_t>(1u << (v % 8));
  w.put_bytes(bits);
}

QuantizerModel read_quantizer(ByteReader& r, double tolerance) {
  QuantizerModel q;
  q.vocab = r.get<uint32_t>();
  if (q.vocab < 2 || q.vocab > (1u << 24)) fail(ErrorKind::malformed_input, "bad quantizer vocabulary size");
  q.lo = r.get<double>();
  q.hi = r.get<double>();
  q.boundaries.resize(q.vocab - 1);
  for (auto& b : q.boundaries) b = r.get<double>();
  q.levels.resize(q.vocab);
  for (auto& l : q.levels) l = r.get<double>();
  const auto bits = r.get_bytes((q.vocab + 7) / 8);
  q.wide.resize(q.vocab);
  for (uint32_t v = 0; v < q.vocab; ++v) q.wide[v] = (bits[v / 8] >> (v % 8)) & 1u;
  for (size_t i = 1; i < q.boundaries.size(); ++i)
    if (!(q.boundaries[i] > q.boundaries[i - 1])) fail(ErrorKind::malformed_input, "quantizer boundaries not increasing");
  q.tolerance = tolerance;
  return q;
}

}  // namespace llmcomp
