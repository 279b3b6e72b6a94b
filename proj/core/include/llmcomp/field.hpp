#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

namespace llmcomp {

enum class Precision : uint8_t { f32 = 0, f64 = 1 };

constexpr size_t bytes_per_sample(Precision p) { return p == Precision::f32 ? 4 : 8; }
std::string_view to_string(Precision p);
Precision parse_precision(std::string_view s);

struct Dims {
  uint32_t t = 0;
  uint32_t m = 0;
  uint32_t n = 0;

  size_t count() const { return size_t{t} * m * n; }
  size_t plane() const { return size_t{m} * n; }
  bool operator==(const Dims&) const = default;
};

// Parses "T,M,N".
Dims parse_dims(std::string_view s);

// A T x M x N field of finite samples in (t, m, n) row-major order.
// Samples of an f32 field are stored widened to double but are always
// exactly representable as float.
class Field {
 public:
  // Validates shape and finiteness, rounds to `precision` and computes
  // the value range.
  Field(Dims dims, Precision precision, std::vector<double> values);

  const Dims& dims() const { return dims_; }
  Precision precision() const { return precision_; }
  std::span<const double> values() const { return values_; }
  double at(size_t t, size_t m, size_t n) const { return values_[(t * dims_.m + m) * dims_.n + n]; }

  double vmin() const { return vmin_; }
  double vmax() const { return vmax_; }
  double vrange() const { return vmax_ - vmin_; }

  size_t size_bytes() const { return dims_.count() * bytes_per_sample(precision_); }

 private:
  Dims dims_;
  Precision precision_;
  std::vector<double> values_;
  double vmin_ = 0.0;
  double vmax_ = 0.0;
};

// Relative bound epsilon bound to a field's value range.
struct ErrorBound {
  double epsilon = 0.0;
  double e_abs = 0.0;

  static ErrorBound relative(double epsilon, double vmin, double vmax);
  static ErrorBound relative(double epsilon, const Field& field) {
    return relative(epsilon, field.vmin(), field.vmax());
  }

  // Tolerance handed to the quantizer. It is smaller than e_abs by the
  // rounding slack of the output precision so that a reconstruction that
  // is rounded to f32/f64 still satisfies |x - x'| / vrange <= epsilon.
  // Constant fields get the smallest positive double instead of zero.
  double working(Precision precision, double vmin, double vmax) const;
};

Field decode_field(std::span<const uint8_t> bytes, Dims dims, Precision precision);
std::vector<uint8_t> encode_field(const Field& field);

Field load_field(const std::filesystem::path& path, Dims dims, Precision precision);
void save_field(const Field& field, const std::filesystem::path& path);

enum class SyntheticKind { smooth_advection, sinusoid_mixture, piecewise_constant, white_noise };

SyntheticKind parse_synthetic_kind(std::string_view s);
std::string_view to_string(SyntheticKind kind);

struct SyntheticOptions {
  Precision precision = Precision::f64;
  uint32_t plateaus = 4;  // piecewise_constant only
};

Field gen_synthetic(SyntheticKind kind, Dims dims, uint64_t seed, SyntheticOptions options = {});

// Pooled Pearson correlation of x[t, m, n] with x[t + 1, m, n].
double lag1_temporal_autocorrelation(const Field& field);

}  // namespace llmcomp
