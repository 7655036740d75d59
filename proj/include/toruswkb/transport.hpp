#pragma once

// Optimal transport for the Lagrangian cost
//
//     c^{0,t}(x, y) = inf { int_0^t m |g'|^2 / 2 - V(g) ds : g(0) = x, g(t) = y },
//
// evaluated by minimizing a discrete action over piecewise-linear curves in
// the universal cover, one winding class at a time.

#include <array>
#include <cstddef>
#include <vector>

#include "toruswkb/hamiltonian.hpp"
#include "toruswkb/measures.hpp"
#include "toruswkb/torus_grid.hpp"
#include "toruswkb/weak_kam.hpp"

namespace toruswkb {

struct ActionPath {
  int dim = 1;
  double t = 0.0;
  /// M + 1 nodes in R^n; nodes.front() = x, nodes.back() = y + 2 pi nu.
  std::vector<Point> nodes;
  std::array<int, 2> winding{0, 0};
  double action = 0.0;
  /// max-norm of the gradient of the discrete action at the returned nodes.
  double gradient_norm = 0.0;
  int newton_iterations = 0;
};

/// sum_s m |g_{s+1} - g_s|^2 / (2 dt) - dt (V(g_s) + V(g_{s+1})) / 2.
double discrete_action(const std::vector<Point>& nodes, double t, const Potential& V, double mass);

/// Minimizes the discrete action for every winding nu in {-W..W}^n (relative
/// to the nearest image of y) and returns the best stationary path. Throws
/// OptFailed when no winding class reaches |grad A| <= 1e-8.
ActionPath minimal_action_path(const Point& x, const Point& y, double t, int M, int winding_range,
                               const Potential& V, double mass);

struct CostMatrix {
  std::vector<Point> sources;
  std::vector<Point> targets;
  double t = 0.0;
  DenseMatrix values;

  double operator()(std::size_t i, std::size_t j) const { return values(i, j); }
};

/// Entry-wise minimal actions; at most 128 points per side.
CostMatrix cost_matrix(const std::vector<Point>& sources, const std::vector<Point>& targets, double t,
                       int M, const Potential& V, double mass, int winding_range = 1);

struct TransportPlan {
  DenseMatrix weights;
  double cost = 0.0;
  bool exact = false;
  /// Exact mode: dual potentials and the smallest reduced cost
  /// c_ij - u_i - v_j (>= -1e-12 * scale certifies optimality).
  std::vector<double> u;
  std::vector<double> v;
  double min_reduced_cost = 0.0;
  double dual_objective = 0.0;
  int pivots = 0;
  /// Sinkhorn mode: regularization and the bound eps * log(n m) on how far
  /// the entropic plan's cost can sit above the optimum.
  double epsilon = 0.0;
  double epsilon_gap = 0.0;
};

/// Exact transportation simplex for at most 64 atoms per side, Sinkhorn
/// otherwise. Throws Infeasible when the marginal masses differ.
TransportPlan kantorovich(const ParticleMeasure& mu, const ParticleMeasure& nu, const CostMatrix& C);
TransportPlan kantorovich_exact(const std::vector<double>& a, const std::vector<double>& b,
                                const DenseMatrix& C);

/// <C, plan>.
double plan_cost(const DenseMatrix& plan, const DenseMatrix& C);

struct FlowAction {
  double action = 0.0;
  /// Trajectory samples whose position left dom(grad S).
  std::size_t exit_samples = 0;
};

/// Trapezoid integral of L(g, g') along the Verlet trajectory of z.
double flow_action(const PhasePoint& z, double t, double step, const Potential& V, double mass);
/// Same, starting from (x, grad S(x)); samples leaving the mask are counted.
FlowAction flow_action(const Point& x, const WeakKamSolution& S, double t, double step,
                       const Potential& V, double mass);

struct DisplacementConfig {
  double step = 1e-3;
  int path_nodes = 64;
  int winding_range = 1;
};

struct DisplacementReport {
  std::size_t atoms = 0;
  double t = 0.0;
  /// (a) sum_i w_i flow_action(x_i).
  double flow_action = 0.0;
  /// (b) cost of the graph coupling x_i -> Psi^t(x_i).
  double graph_cost = 0.0;
  /// (c) Kantorovich optimum between sigma_0 and sigma_t.
  double optimal_cost = 0.0;
  double gap_flow = 0.0;
  double gap_graph = 0.0;
  /// Gaps divided by |c|, or absolute when |c| < 1e-12.
  double rel_gap_flow = 0.0;
  double rel_gap_graph = 0.0;
  bool exact = false;
  std::size_t exit_samples = 0;
  CostMatrix costs;
  TransportPlan plan;
};

DisplacementReport displacement_check(const ParticleMeasure& sigma0, const WeakKamSolution& S, double t,
                                      const Potential& V, double mass, const DisplacementConfig& cfg = {});

}  // namespace toruswkb
