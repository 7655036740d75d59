#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "toruswkb/torus_grid.hpp"

using namespace toruswkb;

TEST_CASE("make_grid builds the uniform node set") {
  const TorusGrid g = make_grid(1, 8);
  CHECK(g.size() == 8);
  for (std::size_t j = 0; j < 8; ++j) CHECK(g.node(j)[0] == doctest::Approx(j * kPi / 4));
  CHECK(g.spacing() * 8 == doctest::Approx(kTwoPi).epsilon(1e-15));

  const TorusGrid g2 = make_grid(2, 16);
  CHECK(g2.size() == 256);
  CHECK(g2.spacing() == doctest::Approx(kPi / 8));
  CHECK(g2.index(1, 2) == 18);
  CHECK(g2.index(-1, 16) == 15 * 16);
}

TEST_CASE("make_grid rejects bad shapes") {
  CHECK_THROWS_AS(make_grid(1, 12), InvalidArgument);
  CHECK_THROWS_AS(make_grid(1, 4), InvalidArgument);
  CHECK_THROWS_AS(make_grid(3, 8), InvalidArgument);
}

TEST_CASE("angles wrap into [0, 2pi) and distances use the nearest image") {
  CHECK(wrap_angle(-0.5) == doctest::Approx(kTwoPi - 0.5));
  CHECK(wrap_angle(kTwoPi) == doctest::Approx(0.0));
  CHECK(torus_distance({0.1, 0.0}, {kTwoPi - 0.1, 0.0}, 1) == doctest::Approx(0.2));
  CHECK(torus_distance({0.0, 0.0}, {1.5 * kPi, 0.0}, 1) == doctest::Approx(0.5 * kPi));
}

TEST_CASE("spectral transform of a constant and of a pure mode") {
  const TorusGrid g = make_grid(1, 16);
  ComplexField one(g, Complex(1.0));
  const ComplexField c = spectral_transform(one, TransformDirection::Forward);
  for (std::size_t i = 0; i < g.size(); ++i)
    CHECK(std::abs(c.values[i] - (i == 0 ? Complex(1.0) : Complex(0.0))) < 1e-14);

  ComplexField mode(g);
  for (std::size_t j = 0; j < g.size(); ++j) mode.values[j] = std::polar(1.0, 3.0 * g.node(j)[0]);
  const ComplexField cm = spectral_transform(mode, TransformDirection::Forward);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const bool at3 = frequency(static_cast<int>(i), 16) == 3;
    CHECK(std::abs(cm.values[i] - (at3 ? Complex(1.0) : Complex(0.0))) < 1e-14);
  }
}

TEST_CASE("spectral round trip and Parseval on random data") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> nd;
  for (int dim : {1, 2}) {
    const TorusGrid g = make_grid(dim, dim == 1 ? 256 : 32);
    ComplexField f(g);
    for (auto& z : f.values) z = {nd(rng), nd(rng)};
    const ComplexField c = spectral_transform(f, TransformDirection::Forward);
    const ComplexField back = spectral_transform(c, TransformDirection::Inverse);
    double err = 0.0, scale = 0.0, e_x = 0.0, e_k = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      err = std::max(err, std::abs(back.values[i] - f.values[i]));
      scale = std::max(scale, std::abs(f.values[i]));
      e_x += std::norm(f.values[i]);
      e_k += std::norm(c.values[i]);
    }
    CHECK(err / scale <= 1e-12);
    // sum |f|^2 h^n = (2 pi)^n sum |c|^2
    CHECK(e_x * g.cell_volume() == doctest::Approx(std::pow(kTwoPi, dim) * e_k).epsilon(1e-12));
  }
}

TEST_CASE("gradient_spectral differentiates band-limited fields") {
  const TorusGrid g = make_grid(1, 64);
  const VectorField d = gradient_spectral(sample(g, [](const Point& x) { return std::cos(x[0]); }));
  for (std::size_t i = 0; i < g.size(); ++i) CHECK(std::abs(d.values[i][0] + std::sin(g.node(i)[0])) <= 1e-12);

  const VectorField z = gradient_spectral(ScalarField(g, 3.0));
  for (const auto& v : z.values) CHECK(std::abs(v[0]) <= 1e-14);

  const TorusGrid g2 = make_grid(2, 32);
  const VectorField d2 =
      gradient_spectral(sample(g2, [](const Point& x) { return std::cos(x[0]) + std::cos(x[1]); }));
  for (std::size_t i = 0; i < g2.size(); ++i) {
    const Point x = g2.node(i);
    CHECK(std::abs(d2.values[i][0] + std::sin(x[0])) <= 1e-12);
    CHECK(std::abs(d2.values[i][1] + std::sin(x[1])) <= 1e-12);
  }

  // highest admissible mode N/4
  const VectorField d3 = gradient_spectral(sample(g, [](const Point& x) { return std::sin(16 * x[0]); }));
  for (std::size_t i = 0; i < g.size(); ++i)
    CHECK(std::abs(d3.values[i][0] - 16 * std::cos(16 * g.node(i)[0])) <= 1e-10);
}

TEST_CASE("periodic interpolation") {
  const TorusGrid g = make_grid(1, 256);
  const ScalarField s = sample(g, [](const Point& x) { return std::sin(x[0]); });
  CHECK(interpolate_periodic(s, g.node(17)) == s.values[17]);
  CHECK(std::abs(interpolate_periodic(s, {0.3, 0.0}) - std::sin(0.3)) <= 1e-4);
  // seam continuity
  CHECK(std::abs(interpolate_periodic(s, {0.01, 0.0}) - interpolate_periodic(s, {0.01 + kTwoPi, 0.0})) <= 1e-14);

  const TorusGrid g2 = make_grid(2, 8);
  const ScalarField lin = sample(g2, [](const Point& x) { return 2.0 * x[0] + 3.0 * x[1]; });
  const double h = g2.spacing();
  const Point mid{1.5 * h, 2.5 * h};
  const double corners = (lin.values[g2.index(1, 2)] + lin.values[g2.index(2, 2)] + lin.values[g2.index(1, 3)] +
                          lin.values[g2.index(2, 3)]) /
                         4.0;
  CHECK(interpolate_periodic(lin, mid) == doctest::Approx(corners));
}

TEST_CASE("fields serialize to CSV, one row per node") {
  const TorusGrid g = make_grid(1, 8);
  std::ostringstream os;
  write_field_csv(os, ScalarField(g, 1.0), "v");
  std::istringstream in(os.str());
  std::string line;
  int rows = 0;
  std::getline(in, line);
  CHECK(line == "x,v");
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 8);
}
