#include <cmath>
#include <limits>
#include <set>

#include "doctest.h"
#include "llmcomp/field.hpp"
#include "support.hpp"

using namespace llmcomp;

TEST_CASE("dims parse and count") {
  const Dims d = parse_dims("3,4,5");
  CHECK(d == Dims{3, 4, 5});
  CHECK(d.count() == 60);
  CHECK(d.plane() == 20);
  CHECK_THROWS_AS(parse_dims("3,4"), Error);
  CHECK_THROWS_AS(parse_dims("3,0,5"), Error);
  CHECK_THROWS_AS(parse_dims("a,b,c"), Error);
}

TEST_CASE("field rejects bad shapes and non-finite samples") {
  CHECK_THROWS_AS(Field({1, 2, 2}, Precision::f64, {1, 2, 3}), Error);
  try {
    Field({1, 2, 2}, Precision::f64, {1, 2, std::numeric_limits<double>::quiet_NaN(), 4});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::malformed_input);
    CHECK(std::string(e.what()).find("2") != std::string::npos);
  }
  CHECK_THROWS_AS(Field({1, 1, 1}, Precision::f32, {1e300}), Error);
}

TEST_CASE("value range and f32 rounding") {
  const Field f({1, 1, 4}, Precision::f32, {0.1, -2.5, 7.0, 3.0});
  CHECK(f.vmin() == -2.5);
  CHECK(f.vmax() == 7.0);
  CHECK(f.vrange() == 9.5);
  CHECK(f.values()[0] == static_cast<double>(0.1f));
  CHECK(f.size_bytes() == 16);
}

TEST_CASE("raw encode and decode round trip in both precisions") {
  for (Precision p : {Precision::f32, Precision::f64}) {
    const Field f = gen_synthetic(SyntheticKind::sinusoid_mixture, {2, 5, 7}, 3, {p});
    const auto bytes = encode_field(f);
    CHECK(bytes.size() == f.size_bytes());
    const Field g = decode_field(bytes, f.dims(), p);
    CHECK(std::vector<double>(g.values().begin(), g.values().end()) ==
          std::vector<double>(f.values().begin(), f.values().end()));
  }
  CHECK_THROWS_AS(decode_field(std::vector<uint8_t>(7), {1, 1, 1}, Precision::f64), Error);
}

TEST_CASE("save and load through the file system") {
  const auto dir = testing::scratch_dir("field");
  const Field f = gen_synthetic(SyntheticKind::white_noise, {2, 3, 4}, 9, {Precision::f64});
  save_field(f, dir / "x.raw");
  const Field g = load_field(dir / "x.raw", f.dims(), Precision::f64);
  CHECK(g.values()[5] == f.values()[5]);
  CHECK_FALSE(std::filesystem::exists(dir / "x.raw.tmp"));
  try {
    load_field(dir / "missing.raw", f.dims(), Precision::f64);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::io);
  }
}

TEST_CASE("absolute bound is epsilon times the value range") {
  const ErrorBound b = ErrorBound::relative(1e-3, -2.0, 8.0);
  CHECK(b.e_abs == doctest::Approx(1e-2));
  for (Precision p : {Precision::f32, Precision::f64}) {
    const double w = b.working(p, -2.0, 8.0);
    CHECK(w > 0.0);
    CHECK(w < b.e_abs);
  }
  CHECK(ErrorBound::relative(1e-3, 5.0, 5.0).working(Precision::f64, 5.0, 5.0) ==
        std::numeric_limits<double>::denorm_min());
}

TEST_CASE("working tolerance leaves room for output rounding") {
  const double vmin = 1000.0, vmax = 1000.5;
  const ErrorBound b = ErrorBound::relative(1e-3, vmin, vmax);
  const double w = b.working(Precision::f32, vmin, vmax);
  const float ulp = std::nextafter(1000.5f, 2000.0f) - 1000.5f;
  CHECK(w + ulp <= b.e_abs);
  CHECK_THROWS_AS(ErrorBound::relative(1e-9, vmin, vmax).working(Precision::f32, vmin, vmax), Error);
}

TEST_CASE("synthetic generators are deterministic per seed") {
  for (auto kind : {SyntheticKind::smooth_advection, SyntheticKind::sinusoid_mixture, SyntheticKind::piecewise_constant,
                    SyntheticKind::white_noise}) {
    CAPTURE(to_string(kind));
    const Field a = gen_synthetic(kind, {3, 8, 9}, 42);
    const Field b = gen_synthetic(kind, {3, 8, 9}, 42);
    const Field c = gen_synthetic(kind, {3, 8, 9}, 43);
    CHECK(std::equal(a.values().begin(), a.values().end(), b.values().begin()));
    CHECK_FALSE(std::equal(a.values().begin(), a.values().end(), c.values().begin()));
    CHECK(parse_synthetic_kind(to_string(kind)) == kind);
  }
}

TEST_CASE("smooth data is temporally correlated and noise is not") {
  const Field smooth = gen_synthetic(SyntheticKind::smooth_advection, {16, 16, 16}, 1);
  const Field noise = gen_synthetic(SyntheticKind::white_noise, {16, 16, 16}, 1);
  CHECK(lag1_temporal_autocorrelation(smooth) > 0.9);
  CHECK(std::abs(lag1_temporal_autocorrelation(noise)) < 0.1);
}

TEST_CASE("piecewise constant fields hold the requested number of plateaus") {
  SyntheticOptions o;
  o.plateaus = 5;
  const Field f = gen_synthetic(SyntheticKind::piecewise_constant, {2, 10, 10}, 4, o);
  const std::set<double> distinct(f.values().begin(), f.values().end());
  CHECK(distinct.size() == 5);
}
