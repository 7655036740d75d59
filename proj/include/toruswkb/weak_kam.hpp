#pragma once

// Positive-type weak KAM solutions of (1/2m)|grad S|^2 + V = c[0] computed as
// the fixed point of a discrete forward Lax-Oleinik operator
//
//     (T u)(x) = max_y { u(y) - h_dt(x, y) },
//     h_dt(x, y) = min_nu m |x - y - 2 pi nu|^2 / (2 dt) - dt (V(x) + V(y)) / 2,
//
// where the maximum runs over all grid nodes y. One sweep applies T, removes
// the drift dt * c[0] and re-anchors the iterate to vanish at a node where V
// is maximal.

#include <cstdint>
#include <optional>
#include <vector>

#include "toruswkb/hamiltonian.hpp"
#include "toruswkb/torus_grid.hpp"

namespace toruswkb {

struct CostMatrix;

struct LaxOleinikConfig {
  double dt = 0.05;
  int max_iters = 20000;
  double tol = 1e-10;
  int winding_range = 1;
  /// Differentiability threshold; defaults to 0.2 * sqrt(spacing).
  std::optional<double> tau;

  void validate() const;
};

using Mask = std::vector<std::uint8_t>;

struct WeakKamSolution {
  ScalarField values;
  /// Central differences on the mask, forward differences elsewhere.
  VectorField gradient;
  /// 1 where the node is treated as a point of dom(grad S+).
  Mask diff_mask;
  double c0 = 0.0;
  double mass = 1.0;
  /// sup over the mask of |(1/2m)|grad S|^2 + V - c0|.
  double residual = 0.0;
  std::size_t anchor = 0;
  int iterations = 0;
  double final_change = 0.0;
  /// Mean of (T u - u) over nodes in the last sweep, before the drift is
  /// removed. Should approach dt * c[0].
  double drift_per_step = 0.0;
  double dt = 0.0;

  const TorusGrid& grid() const { return values.grid; }
  /// True when every corner of the cell containing x is in the mask.
  bool in_domain(const Point& x) const;
  double value_at(const Point& x) const { return interpolate_periodic(values, x); }
  Point gradient_at(const Point& x) const { return interpolate_periodic(gradient, x); }
};

double default_tau(const TorusGrid& grid);

/// One-step cost between two points given their potential values.
double one_step_cost(const Point& x, const Point& y, double dt, double vx, double vy, double mass,
                     int winding_range, int dim);
double one_step_cost(const Point& x, const Point& y, double dt, const Potential& V, double mass,
                     int winding_range);

/// One application of the discrete forward Lax-Oleinik operator. The maximum
/// is exact over all nodes: candidates farther than a Lipschitz bound are
/// provably dominated by the self transition and are skipped.
ScalarField lax_oleinik_plus(const ScalarField& u, const LaxOleinikConfig& cfg, const Potential& V,
                             double mass);

/// Throws NonConvergence when max_iters sweeps do not reach cfg.tol.
WeakKamSolution solve_weak_kam_plus(const Potential& V, double mass, const LaxOleinikConfig& cfg);

/// A node is dropped when, along some axis, the forward and backward
/// difference quotients differ by more than tau * (1 + |central difference|).
Mask differentiability_mask(const ScalarField& S, double tau);

/// Gradient by central differences on `mask`, forward differences elsewhere.
VectorField masked_gradient(const ScalarField& S, const Mask& mask);

/// Pointwise |(1/2m)|grad S|^2 + V - c0| (zero off the mask).
ScalarField eikonal_residual(const WeakKamSolution& S, const Potential& V);

/// Mask with every node within `margin` nodes (Chebyshev distance) of an
/// excluded node also excluded.
Mask shrink_mask(const TorusGrid& grid, const Mask& mask, int margin);

/// sup_x |(T S)(x) - dt c0 - S(x)|.
double fixed_point_defect(const WeakKamSolution& S, const LaxOleinikConfig& cfg, const Potential& V);

/// Transfers a solution to a finer grid: cubic Hermite in 1D (values and
/// gradients), multilinear in 2D. A fine node is in the mask iff every corner
/// of its coarse cell is.
WeakKamSolution refine_solution(const WeakKamSolution& S, const TorusGrid& fine,
                                const Potential& V_fine);

/// sup over the cost-matrix sources x_i of
/// |max_j { S(y_j) - t c0 - h_t(x_i, y_j) } - S(x_i)|.
/// For t == 0 the defect is 0 by definition (h_0 vanishes only on the
/// diagonal).
double check_c_convexity(const WeakKamSolution& S, double t, const CostMatrix& costs);

}  // namespace toruswkb
