#pragma once

// Toroidal Weyl quantization
//
//     Op(b) psi(x) = (2 pi)^{-n} sum_k int e^{i <x - y, k>} b(y, hbar k / 2) psi(2y - x) dy,
//
// with the k-sum over the grid frequencies and the y-integral by nodal
// quadrature, plus the Husimi (coherent-state) phase-space density.

#include <string>
#include <vector>

#include "toruswkb/measures.hpp"
#include "toruswkb/schrodinger.hpp"
#include "toruswkb/torus_grid.hpp"
#include "toruswkb/weak_kam.hpp"

namespace toruswkb {

/// Momentum factor of a symbol term.
struct MomentumProfile {
  enum class Kind { Unit, Bump };
  Kind kind = Kind::Unit;
  /// Bump: exp(1 - 1 / (1 - |xi - center|^2 / radius^2)) inside the ball.
  double radius = 1.0;
  Point center{0.0, 0.0};

  double value(const Point& xi, int dim) const;
  static MomentumProfile unit() { return {}; }
  static MomentumProfile bump(double radius, Point center = {0.0, 0.0}) {
    return {Kind::Bump, radius, center};
  }
};

/// One term (alpha cos(q.x) + beta sin(q.x)) * profile(xi).
struct SymbolTerm {
  std::array<int, 2> q{0, 0};
  double cos_coeff = 1.0;
  double sin_coeff = 0.0;
  MomentumProfile profile;
};

/// Real symbol given by a finite sum of terms.
struct TestSymbol {
  int dim = 1;
  std::string id;
  std::vector<SymbolTerm> terms;

  double value(const Point& x, const Point& xi) const;
};

/// Symbol 1.
TestSymbol unit_symbol(int dim);

/// cos(q.x) chi(xi) and sin(q.x) chi(xi) for |q|_inf <= max_mode (one of each
/// +-q pair), chi a bump of the given radius centred at 0.
std::vector<TestSymbol> standard_battery(int dim, int max_mode, double bump_radius);

/// sqrt(2 m (c0 - min V)) + 1: the bump radius covering the energy shell.
double battery_radius(const Potential& V, double mass);

/// Throws MomentumWindowExceeded unless every bump profile lies inside
/// |xi_a| <= hbar * N / 4 on each axis.
void check_momentum_window(const TestSymbol& b, const TorusGrid& grid, double hbar);

/// Direct evaluation of the quantized symbol on psi (O(N^{2n}) per term).
ComplexField weyl_quantize_apply(const TestSymbol& b, const WaveFunction& psi);

/// <psi, Op(b) psi> with nodal quadrature. Evaluated by an FFT correlation
/// that is algebraically identical to the direct double sum.
Complex pairing_complex(const WaveFunction& psi, const TestSymbol& b);

/// Real part of the pairing; throws Error when |Im| > 1e-8.
double pairing(const WaveFunction& psi, const TestSymbol& b);

/// sum_i w_i b(x_i, p_i).
double classical_pairing(const TestSymbol& b, const PhaseParticleMeasure& omega);

struct HusimiField {
  TorusGrid grid;
  double hbar = 1.0;
  /// Momentum lattice indices k with p = hbar k, |k_a| <= kmax on each axis.
  int kmax = 0;
  /// values[m * grid.size() + i] for the m-th momentum (row-major over the
  /// (2 kmax + 1)^n box) at node i.
  std::vector<double> values;

  std::size_t momentum_count() const;
  Point momentum(std::size_t m) const;
  double at(std::size_t m, std::size_t i) const { return values[m * grid.size() + i]; }
  /// int int H dx dp over the window.
  double mass() const;
};

/// H(x, p) = |<g_{x,p}, psi>|^2 / (2 pi hbar)^n with Gaussian coherent states
/// of width sqrt(hbar), periodized over 3 images per axis. Throws
/// WindowTooSmall when the outermost momentum shell carries more than 1% of
/// the mass in the window.
HusimiField husimi(const WaveFunction& psi, double p_window);

/// Position marginal renormalized to unit mass.
GridMeasure husimi_position_marginal(const HusimiField& H);

/// Fraction of the Husimi mass with |p - grad S(x)| <= radius.
double husimi_tube_mass(const HusimiField& H, const WeakKamSolution& S, double radius);

}  // namespace toruswkb
