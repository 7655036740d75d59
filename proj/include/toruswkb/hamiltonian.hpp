#pragma once

// Mechanical Hamiltonian H(x, p) = |p|^2 / 2m + V(x) on T^n x R^n, its
// Lagrangian L(x, v) = m |v|^2 / 2 - V(x), the critical value c[0] = max V,
// and a Stormer-Verlet discretization of the Hamiltonian flow.

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "toruswkb/torus_grid.hpp"

namespace toruswkb {

class WeakKamSolution;

/// Second derivatives of V: {d_xx, d_xy, d_yy}. In 1D only d_xx is used.
using Hessian2 = std::array<double, 3>;

/// A smooth periodic potential. Always carries nodal samples; carries an
/// analytic evaluator (value, gradient, Hessian) when built from a closed
/// form. Sampled potentials are evaluated off-grid by their trigonometric
/// interpolant.
class Potential {
 public:
  struct Analytic {
    std::function<double(const Point&)> value;
    std::function<Point(const Point&)> gradient;
    std::function<Hessian2(const Point&)> hessian;
  };

  /// V == 0.
  static Potential zero(const TorusGrid& grid);
  /// 1D: amplitude * cos x. 2D: amplitude * (cos x + cos y / 2).
  static Potential cosine(const TorusGrid& grid, double amplitude = 1.0);
  /// 1D: a0 cos(x + f0) + a1 cos(2x + f1). 2D: a0 cos(x + f0) + a1 cos(y + f1).
  static Potential two_mode(const TorusGrid& grid, std::array<double, 2> amplitudes,
                            std::array<double, 2> phases);
  /// Closed-form potential; samples are taken from `analytic.value`.
  static Potential from_analytic(const TorusGrid& grid, Analytic analytic, std::string name);
  /// Smooth potential known only through its samples.
  static Potential from_samples(ScalarField samples, std::string name = "sampled");

  const TorusGrid& grid() const { return samples_.grid; }
  int dim() const { return samples_.grid.dim(); }
  const ScalarField& samples() const { return samples_; }
  bool has_analytic() const { return analytic_.has_value(); }
  const std::string& name() const { return name_; }

  double value(const Point& x) const;
  Point gradient(const Point& x) const;
  Hessian2 hessian(const Point& x) const;

  /// Same potential sampled on another grid (requires an analytic form, or
  /// resamples the trigonometric interpolant).
  Potential resampled(const TorusGrid& grid) const;

 private:
  ScalarField samples_;
  std::optional<Analytic> analytic_;
  std::string name_;
  // Fourier coefficients of the samples, used when no analytic form exists.
  std::vector<Complex> coeffs_;
};

struct HamiltonianParams {
  double mass = 1.0;
};

struct PhasePoint {
  Point x{0.0, 0.0};
  Point p{0.0, 0.0};
};

/// c[0] = max V. Uses the analytic evaluator on an 8x refined grid when
/// available, the nodal maximum otherwise.
double critical_value(const Potential& V);

/// Node index of the first nodal maximum of V (the anchor x* used to
/// normalize weak KAM solutions).
std::size_t argmax_node(const Potential& V);

double ham_eval(const PhasePoint& z, const Potential& V, double mass);
double lagrangian_eval(const Point& x, const Point& velocity, const Potential& V, double mass);

/// Number of Verlet steps used for time t at nominal step `step`:
/// max(1, round(t / step)) for t > 0, and 0 for t == 0. The effective step is
/// t / count, so the final time is hit exactly.
long flow_step_count(double t, double step);

/// One kick-drift-kick Stormer-Verlet step of size h (h may be negative).
PhasePoint verlet_step(const PhasePoint& z, double h, const Potential& V, double mass);

/// Approximates phi_H^t(z). Positions are reduced mod 2 pi.
PhasePoint flow(const PhasePoint& z, double t, double step, const Potential& V, double mass);

struct TrajectorySample {
  double t;
  PhasePoint z;
  double energy;
};

/// Every Verlet step of flow(z, t, step), including t = 0.
std::vector<TrajectorySample> flow_trajectory(const PhasePoint& z, double t, double step,
                                              const Potential& V, double mass);

/// Position of phi_H^t(x, grad S(x)). Throws ParticleOutsideDomain if x is
/// not in the differentiability domain of S.
Point flow_graph_map(const Point& x, const WeakKamSolution& S, double t, double step,
                     const Potential& V, double mass);

}  // namespace toruswkb
