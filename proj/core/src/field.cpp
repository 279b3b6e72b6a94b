#include "llmcomp/field.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "llmcomp/error.hpp"
#include "llmcomp/io.hpp"
#include "llmcomp/rng.hpp"

namespace llmcomp {

std::string_view to_string(Precision p) { return p == Precision::f32 ? "f32" : "f64"; }

Precision parse_precision(std::string_view s) {
  if (s == "f32") return Precision::f32;
  if (s == "f64") return Precision::f64;
  fail(ErrorKind::usage, "unknown precision '" + std::string(s) + "' (expected f32 or f64)");
}

Dims parse_dims(std::string_view s) {
  uint32_t parts[3] = {0, 0, 0};
  size_t pos = 0;
  for (int i = 0; i < 3; ++i) {
    const size_t end = i < 2 ? s.find(',', pos) : s.size();
    if (end == std::string_view::npos) fail(ErrorKind::usage, "dims must be T,M,N");
    const auto token = s.substr(pos, end - pos);
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), parts[i]);
    if (ec != std::errc{} || ptr != token.data() + token.size() || parts[i] == 0)
      fail(ErrorKind::usage, "dims must be three positive integers T,M,N, got '" + std::string(s) + "'");
    pos = end + 1;
  }
  return {parts[0], parts[1], parts[2]};
}

Field::Field(Dims dims, Precision precision, std::vector<double> values)
    : dims_(dims), precision_(precision), values_(std::move(values)) {
  if (dims.t == 0 || dims.m == 0 || dims.n == 0) fail(ErrorKind::usage, "field dims must be positive");
  if (values_.size() != dims.count())
    fail(ErrorKind::malformed_input, "field has " + std::to_string(values_.size()) + " samples, dims require " +
                                         std::to_string(dims.count()));
  vmin_ = std::numeric_limits<double>::infinity();
  vmax_ = -std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < values_.size(); ++i) {
    double& v = values_[i];
    if (precision == Precision::f32) v = static_cast<double>(static_cast<float>(v));
    if (!std::isfinite(v)) fail(ErrorKind::malformed_input, "non-finite sample at index " + std::to_string(i));
    vmin_ = std::min(vmin_, v);
    vmax_ = std::max(vmax_, v);
  }
}

ErrorBound ErrorBound::relative(double epsilon, double vmin, double vmax) {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) fail(ErrorKind::usage, "error bound must be positive");
  return {epsilon, epsilon * (vmax - vmin)};
}

double ErrorBound::working(Precision precision, double vmin, double vmax) const {
  if (e_abs == 0.0) return std::numeric_limits<double>::denorm_min();
  const double magnitude = std::max(std::abs(vmin), std::abs(vmax));
  double ulp;
  if (precision == Precision::f32) {
    const auto f = static_cast<float>(magnitude);
    ulp = static_cast<double>(std::nextafter(f, std::numeric_limits<float>::infinity()) - f);
  } else {
    ulp = std::nextafter(magnitude, std::numeric_limits<double>::infinity()) - magnitude;
  }
  const double w = e_abs * (1.0 - 1e-9) - ulp;
  if (!(w > 0.0))
    fail(ErrorKind::usage, "error bound " + std::to_string(epsilon) + " is below the resolution of " +
                               std::string(to_string(precision)) + " samples of this field");
  return w;
}

Field decode_field(std::span<const uint8_t> bytes, Dims dims, Precision precision) {
  const size_t expected = dims.count() * bytes_per_sample(precision);
  if (bytes.size() != expected)
    fail(ErrorKind::malformed_input, "field file has " + std::to_string(bytes.size()) + " bytes, dims " +
                                         std::to_string(dims.t) + "," + std::to_string(dims.m) + "," +
                                         std::to_string(dims.n) + " " + std::string(to_string(precision)) +
                                         " require " + std::to_string(expected));
  std::vector<double> values(dims.count());
  ByteReader reader(bytes);
  for (auto& v : values)
    v = precision == Precision::f32 ? static_cast<double>(reader.get<float>()) : reader.get<double>();
  return Field(dims, precision, std::move(values));
}

std::vector<uint8_t> encode_field(const Field& field) {
  Bytes out;
  out.reserve(field.size_bytes());
  ByteWriter w(out);
  for (double v : field.values()) {
    if (field.precision() == Precision::f32)
      w.put(static_cast<float>(v));
    else
      w.put(v);
  }
  return out;
}

Field load_field(const std::filesystem::path& path, Dims dims, Precision precision) {
  return decode_field(read_file(path), dims, precision);
}

void save_field(const Field& field, const std::filesystem::path& path) {
  write_file_atomic(path, encode_field(field));
}

SyntheticKind parse_synthetic_kind(std::string_view s) {
  if (s == "smooth-advection") return SyntheticKind::smooth_advection;
  if (s == "sinusoid-mixture") return SyntheticKind::sinusoid_mixture;
  if (s == "piecewise-constant") return SyntheticKind::piecewise_constant;
  if (s == "white-noise") return SyntheticKind::white_noise;
  fail(ErrorKind::usage, "unknown synthetic kind '" + std::string(s) + "'");
}

std::string_view to_string(SyntheticKind kind) {
  switch (kind) {
    case SyntheticKind::smooth_advection: return "smooth-advection";
    case SyntheticKind::sinusoid_mixture: return "sinusoid-mixture";
    case SyntheticKind::piecewise_constant: return "piecewise-constant";
    case SyntheticKind::white_noise: return "white-noise";
  }
  return "unknown";
}

namespace {

constexpr double two_pi = 2.0 * std::numbers::pi;

// A few plane waves drifting slowly in time plus one Gaussian blob advected
// across the grid, on top of a temperature-like offset.
std::vector<double> smooth_advection(Dims d, Rng& rng) {
  struct Wave {
    double amp, km, kn, omega, phase;
  };
  Wave waves[3];
  for (auto& w : waves) {
    w.amp = rng.uniform(2.0, 8.0);
    w.km = 1.0 + static_cast<double>(rng.below(2));
    w.kn = 1.0 + static_cast<double>(rng.below(2));
    w.omega = rng.uniform(0.03, 0.12);
    w.phase = rng.uniform(0.0, two_pi);
  }
  const double base = rng.uniform(240.0, 280.0);
  const double blob_amp = rng.uniform(10.0, 25.0);
  const double sigma = std::max(1.0, std::max(d.m, d.n) / 4.0);
  const double m0 = rng.uniform(0.0, d.m), n0 = rng.uniform(0.0, d.n);
  const double um = rng.uniform(-0.25, 0.25) * std::max(1.0, d.m / 16.0);
  const double un = rng.uniform(-0.25, 0.25) * std::max(1.0, d.n / 16.0);

  std::vector<double> v(d.count());
  size_t i = 0;
  for (uint32_t t = 0; t < d.t; ++t) {
    const double cm = m0 + um * t, cn = n0 + un * t;
    for (uint32_t m = 0; m < d.m; ++m) {
      for (uint32_t n = 0; n < d.n; ++n) {
        double x = base;
        for (const auto& w : waves)
          x += w.amp * std::sin(two_pi * (w.km * m / d.m + w.kn * n / d.n) - w.omega * t + w.phase);
        const double dm = m - cm, dn = n - cn;
        x += blob_amp * std::exp(-(dm * dm + dn * dn) / (2.0 * sigma * sigma));
        v[i++] = x;
      }
    }
  }
  return v;
}

std::vector<double> sinusoid_mixture(Dims d, Rng& rng) {
  struct Mode {
    double amp, fm, fn, omega, phase;
  };
  Mode modes[6];
  for (auto& mo : modes) {
    mo.amp = rng.uniform(0.5, 3.0);
    mo.fm = rng.uniform(0.0, 4.0);
    mo.fn = rng.uniform(0.0, 4.0);
    mo.omega = rng.uniform(0.0, 0.2);
    mo.phase = rng.uniform(0.0, two_pi);
  }
  const double offset = rng.uniform(-5.0, 5.0);
  std::vector<double> v(d.count());
  size_t i = 0;
  for (uint32_t t = 0; t < d.t; ++t)
    for (uint32_t m = 0; m < d.m; ++m)
      for (uint32_t n = 0; n < d.n; ++n) {
        double x = offset;
        for (const auto& mo : modes)
          x += mo.amp * std::sin(two_pi * (mo.fm * m / d.m + mo.fn * n / d.n) + mo.omega * t + mo.phase);
        v[i++] = x;
      }
  return v;
}

// Contiguous runs (in storage order) of `plateaus` distinct levels. Every
// level appears whenever the field has at least `plateaus` samples.
std::vector<double> piecewise_constant(Dims d, Rng& rng, uint32_t plateaus) {
  const size_t count = d.count();
  const size_t levels = std::max<size_t>(1, std::min<size_t>(plateaus, count));
  std::vector<size_t> cuts;
  while (cuts.size() + 1 < levels) {
    const size_t c = 1 + rng.below(count - 1);
    if (std::find(cuts.begin(), cuts.end(), c) == cuts.end()) cuts.push_back(c);
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.push_back(count);

  std::vector<double> values;
  for (size_t l = 0; l < levels; ++l) values.push_back(std::round(rng.uniform(-100.0, 100.0) * 8.0) / 8.0 + 256.0 * l);

  std::vector<double> v(count);
  size_t level = 0;
  for (size_t i = 0; i < count; ++i) {
    while (i >= cuts[level]) ++level;
    v[i] = values[level];
  }
  return v;
}

std::vector<double> white_noise(Dims d, Rng& rng) {
  const double mean = rng.uniform(-10.0, 10.0);
  const double sd = rng.uniform(0.5, 5.0);
  std::vector<double> v(d.count());
  for (auto& x : v) x = mean + sd * rng.normal();
  return v;
}

}  // namespace

Field gen_synthetic(SyntheticKind kind, Dims dims, uint64_t seed, SyntheticOptions options) {
  if (dims.t == 0 || dims.m == 0 || dims.n == 0) fail(ErrorKind::usage, "field dims must be positive");
  Rng rng(seed ^ (0x9e3779b97f4a7c15ULL * (static_cast<uint64_t>(kind) + 1)));
  std::vector<double> v;
  switch (kind) {
    case SyntheticKind::smooth_advection: v = smooth_advection(dims, rng); break;
    case SyntheticKind::sinusoid_mixture: v = sinusoid_mixture(dims, rng); break;
    case SyntheticKind::piecewise_constant: v = piecewise_constant(dims, rng, options.plateaus); break;
    case SyntheticKind::white_noise: v = white_noise(dims, rng); break;
  }
  return Field(dims, options.precision, std::move(v));
}

double lag1_temporal_autocorrelation(const Field& field) {
  const Dims& d = field.dims();
  if (d.t < 2) return 0.0;
  const size_t plane = d.plane();
  const auto v = field.values();
  const size_t pairs = plane * (d.t - 1);
  double ma = 0, mb = 0;
  for (size_t i = 0; i < pairs; ++i) {
    ma += v[i];
    mb += v[i + plane];
  }
  ma /= pairs;
  mb /= pairs;
  double sab = 0, saa = 0, sbb = 0;
  for (size_t i = 0; i < pairs; ++i) {
    const double a = v[i] - ma, b = v[i + plane] - mb;
    sab += a * b;
    saa += a * a;
    sbb += b * b;
  }
  if (saa == 0.0 || sbb == 0.0) return 1.0;
  return sab / std::sqrt(saa * sbb);
}

}  // namespace llmcomp
