#include <doctest.h>

#include <cmath>
#include <random>

#include "toruswkb/wigner.hpp"

using namespace toruswkb;

namespace {

WaveFunction random_state(const TorusGrid& g, int kmax, double hbar, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01;
  WaveFunction psi{g, std::vector<Complex>(g.size(), 0.0), hbar, 1.0};
  for (int k = -kmax; k <= kmax; ++k) {
    const Complex c(n01(rng), n01(rng));
    for (std::size_t i = 0; i < g.size(); ++i) psi.values[i] += c * std::polar(1.0, k * g.node(i)[0]);
  }
  const double n = psi.norm();
  for (auto& z : psi.values) z /= n;
  return psi;
}

WaveFunction plane_wave(const TorusGrid& g, int k, double hbar) {
  WaveFunction psi{g, std::vector<Complex>(g.size()), hbar, 1.0};
  for (std::size_t i = 0; i < g.size(); ++i) psi.values[i] = std::polar(1.0 / std::sqrt(kTwoPi), k * g.node(i)[0]);
  return psi;
}

TestSymbol x_symbol(int q, bool sine) {
  TestSymbol b;
  b.dim = 1;
  b.terms.push_back({{q, 0}, sine ? 0.0 : 1.0, sine ? 1.0 : 0.0, MomentumProfile::unit()});
  return b;
}

TestSymbol momentum_symbol(double radius, double center) {
  TestSymbol b;
  b.dim = 1;
  b.terms.push_back({{0, 0}, 1.0, 0.0, MomentumProfile::bump(radius, {center, 0.0})});
  return b;
}

Complex inner(const WaveFunction& psi, const std::vector<Complex>& v) {
  Complex s = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) s += std::conj(psi.values[i]) * v[i];
  return s * psi.grid.cell_volume();
}

double max_diff(const std::vector<Complex>& a, const std::vector<Complex>& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

}  // namespace

TEST_CASE("Weyl quantization of elementary symbols") {
  const TorusGrid g = make_grid(1, 128);
  const WaveFunction psi = random_state(g, 12, 0.1, 1);
  CHECK(max_diff(weyl_quantize_apply(unit_symbol(1), psi).values, psi.values) <= 1e-12);

  const ComplexField mult = weyl_quantize_apply(x_symbol(2, false), psi);
  for (std::size_t i = 0; i < g.size(); ++i)
    CHECK(std::abs(mult.values[i] - std::cos(2 * g.node(i)[0]) * psi.values[i]) <= 1e-10);

  const TestSymbol chi = momentum_symbol(1.0, 0.3);
  for (int k0 : {-5, 0, 3, 8}) {
    const WaveFunction pw = plane_wave(g, k0, 0.1);
    const double factor = chi.value({0.0, 0.0}, {0.1 * k0, 0.0});
    const ComplexField out = weyl_quantize_apply(chi, pw);
    for (std::size_t i = 0; i < g.size(); ++i) CHECK(std::abs(out.values[i] - factor * pw.values[i]) <= 1e-10);
  }
  CHECK_THROWS_AS(weyl_quantize_apply(momentum_symbol(5.0, 0.0), psi), MomentumWindowExceeded);
}

TEST_CASE("Weyl quantization is linear") {
  const TorusGrid g = make_grid(1, 64);
  const WaveFunction a = random_state(g, 8, 0.2, 2), b = random_state(g, 8, 0.2, 3);
  const Complex s(0.7, -0.2), t(-1.3, 0.4);
  WaveFunction mix = a;
  for (std::size_t i = 0; i < g.size(); ++i) mix.values[i] = s * a.values[i] + t * b.values[i];
  const TestSymbol b1 = momentum_symbol(1.5, 0.2);
  const ComplexField oa = weyl_quantize_apply(b1, a), ob = weyl_quantize_apply(b1, b);
  const ComplexField om = weyl_quantize_apply(b1, mix);
  for (std::size_t i = 0; i < g.size(); ++i) CHECK(std::abs(om.values[i] - (s * oa.values[i] + t * ob.values[i])) <= 1e-10);

  TestSymbol sum = b1;
  const TestSymbol b2 = x_symbol(1, true);
  sum.terms.push_back(b2.terms[0]);
  const ComplexField o2 = weyl_quantize_apply(b2, a), os = weyl_quantize_apply(sum, a);
  for (std::size_t i = 0; i < g.size(); ++i) CHECK(std::abs(os.values[i] - (oa.values[i] + o2.values[i])) <= 1e-10);
}

TEST_CASE("pairing") {
  const TorusGrid g = make_grid(1, 128);
  const WaveFunction psi = random_state(g, 10, 0.1, 4);
  CHECK(pairing(psi, unit_symbol(1)) == doctest::Approx(1.0).epsilon(1e-12));

  // the FFT evaluation agrees with <psi, Op(b) psi> from the direct sum
  TestSymbol b = momentum_symbol(1.2, -0.1);
  b.terms.push_back({{2, 0}, 0.5, -0.3, MomentumProfile::bump(0.8)});
  const Complex direct = inner(psi, weyl_quantize_apply(b, psi).values);
  CHECK(std::abs(pairing_complex(psi, b) - direct) <= 1e-10);
  CHECK(std::abs(pairing_complex(psi, b).imag()) <= 1e-8);

  // constant amplitude: (2 pi)^-1 times the integral of the symbol
  WaveFunction flat{g, std::vector<Complex>(g.size(), Complex(1.0 / std::sqrt(kTwoPi))), 0.1, 1.0};
  TestSymbol xs = x_symbol(1, false);
  xs.terms.push_back({{0, 0}, 2.0, 0.0, MomentumProfile::unit()});
  CHECK(pairing(flat, xs) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(std::abs(pairing(flat, x_symbol(3, true))) <= 1e-12);
}

TEST_CASE("classical pairing") {
  PhaseParticleMeasure dirac;
  dirac.dim = 1;
  dirac.points = {{{1.0, 0.0}, {0.4, 0.0}}};
  dirac.weights = {1.0};
  const auto battery = standard_battery(1, 3, 2.0);
  CHECK(classical_pairing(unit_symbol(1), dirac) == 1.0);
  for (const auto& b : battery) CHECK(classical_pairing(b, dirac) == b.value({1.0, 0.0}, {0.4, 0.0}));

  // particles drawn from a smooth density against nodal quadrature
  const TorusGrid g = make_grid(1, 512);
  GridMeasure rho{g, std::vector<double>(g.size())};
  for (std::size_t i = 0; i < g.size(); ++i) rho.density[i] = (1.0 + 0.5 * std::sin(g.node(i)[0])) / kTwoPi;
  const auto momentum = [](const Point& x) { return Point{std::cos(x[0]), 0.0}; };
  PhaseParticleMeasure omega;
  omega.dim = 1;
  const ParticleMeasure sample = grid_to_particles(rho, 100000, 5);
  for (const auto& x : sample.points) omega.points.push_back({x, momentum(x)});
  omega.weights = sample.weights;
  for (const auto& b : battery) {
    double quad = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) quad += rho.density[i] * g.spacing() * b.value(g.node(i), momentum(g.node(i)));
    CHECK(std::abs(classical_pairing(b, omega) - quad) <= 1e-3);
  }
}

TEST_CASE("Husimi field of a plane wave") {
  const TorusGrid g = make_grid(1, 256);
  const double hbar = 1.0 / 16;
  const int k0 = 10;
  const HusimiField H = husimi(plane_wave(g, k0, hbar), 2.0);
  CHECK(H.mass() == doctest::Approx(1.0).epsilon(1e-3));
  const GridMeasure marginal = husimi_position_marginal(H);
  for (double d : marginal.density) CHECK(d == doctest::Approx(1.0 / kTwoPi).epsilon(1e-10));
  // |<g_{x,p}, e^{ik0 x}>|^2 / (2 pi hbar) is a Gaussian in p of variance hbar / 2
  const std::size_t i = 17;
  for (std::size_t m = 0; m < H.momentum_count(); ++m) {
    const double dp = H.momentum(m)[0] - hbar * k0;
    const double expected = std::sqrt(4 * kPi * hbar) / kTwoPi * std::exp(-dp * dp / hbar) / (kTwoPi * hbar);
    CHECK(H.at(m, i) == doctest::Approx(expected).epsilon(1e-8).scale(1.0));
  }
  CHECK_THROWS_AS(husimi(plane_wave(g, 30, hbar), 2.0), WindowTooSmall);
}

TEST_CASE("Husimi field of a coherent state peaks at its centre") {
  const TorusGrid g = make_grid(1, 512);
  const double hbar = 1.0 / 32, x0 = 2.0, p0 = 0.5;
  WaveFunction psi{g, std::vector<Complex>(g.size()), hbar, 1.0};
  for (std::size_t i = 0; i < g.size(); ++i) {
    Complex s = 0.0;
    for (int nu = -1; nu <= 1; ++nu) {
      const double r = g.node(i)[0] - x0 + kTwoPi * nu;
      s += std::exp(-r * r / (2 * hbar)) * std::polar(1.0, p0 * r / hbar);
    }
    psi.values[i] = s;
  }
  const double n = psi.norm();
  for (auto& z : psi.values) z /= n;
  const HusimiField H = husimi(psi, 2.0);
  std::size_t best = 0;
  for (std::size_t k = 1; k < H.values.size(); ++k)
    if (H.values[k] > H.values[best]) best = k;
  const std::size_t m = best / g.size(), i = best % g.size();
  CHECK(std::abs(H.momentum(m)[0] - p0) <= hbar / 2);
  CHECK(std::abs(g.node(i)[0] - x0) <= g.spacing());
}

TEST_CASE("WKB states concentrate on the graph") {
  LaxOleinikConfig lo;
  lo.dt = 0.1;
  const TorusGrid g = make_grid(1, 4096);
  const Potential V = Potential::cosine(g);
  const WeakKamSolution S = solve_weak_kam_plus(V, 1.0, lo);
  // support inside the differentiability domain, clear of the cut locus
  GridMeasure sigma0{g, std::vector<double>(g.size(), 0.0)};
  double mass = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double r = min_image(g.node(i)[0] - kPi / 2) / 0.5;
    sigma0.density[i] = std::abs(r) < 1.0 ? std::exp(1.0 - 1.0 / (1.0 - r * r)) : 0.0;
    mass += sigma0.density[i] * g.spacing();
  }
  for (double& v : sigma0.density) v /= mass;

  WkbConfig cfg;
  cfg.hbar = 1.0 / 32;
  const WaveFunction phi = wkb_initial(sigma0, S, cfg);
  const double window = battery_radius(V, 1.0) + 1.5 + 6 * std::sqrt(cfg.hbar);
  CHECK(husimi_tube_mass(husimi(phi, window), S, 3 * std::sqrt(cfg.hbar)) >= 0.9);

  // semiclassical pairing at hbar = 1/128 against the lifted density
  cfg.hbar = 1.0 / 128;
  const WaveFunction fine = wkb_initial(sigma0, S, cfg);
  const PreparedDensity prep = prepare_initial_density(sigma0, S, cfg);
  PhaseParticleMeasure omega;
  omega.dim = 1;
  for (std::size_t i = 0; i < g.size(); ++i)
    if (prep.density.density[i] > 0.0) {
      omega.points.push_back({g.node(i), S.gradient.values[i]});
      omega.weights.push_back(prep.density.density[i] * g.spacing());
    }
  for (const auto& b : standard_battery(1, 3, battery_radius(V, 1.0)))
    CHECK(std::abs(pairing(fine, b) - classical_pairing(b, omega)) <= 5e-2);
}
