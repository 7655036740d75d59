#pragma once

// Probability measures on T^n (particles or grid densities) and on
// T^n x R^n (phase-space particles): graph lifts, pushforwards, distances,
// entropic transport, and weak-form residuals of the continuity and Liouville
// equations.
//
// The random-curve probability space of the action-minimization problem is
// identified with the particle index set: particle i carries weight w_i and
// follows one curve.

#include <cstdint>
#include <functional>
#include <vector>

#include "toruswkb/hamiltonian.hpp"
#include "toruswkb/torus_grid.hpp"
#include "toruswkb/weak_kam.hpp"

namespace toruswkb {

struct ParticleMeasure {
  int dim = 1;
  std::vector<Point> points;
  std::vector<double> weights;

  std::size_t size() const { return points.size(); }
  /// Checks sizes, nonnegative weights summing to 1 within 1e-12, reduced
  /// positions.
  void validate() const;
};

struct GridMeasure {
  TorusGrid grid;
  /// Density per node; sum(density) * cell_volume == 1.
  std::vector<double> density;

  double mass() const;
  void validate() const;
  /// Atoms at the nodes with weights density * cell_volume.
  ParticleMeasure as_atoms() const;
};

struct PhaseParticleMeasure {
  int dim = 1;
  std::vector<PhasePoint> points;
  std::vector<double> weights;

  std::size_t size() const { return points.size(); }
  void validate() const;
};

/// Uniform weights 1/n on the given points.
ParticleMeasure uniform_particles(int dim, std::vector<Point> points);

/// Particle i -> (x_i, grad S(x_i)). Throws ParticleOutsideDomain naming the
/// first particle outside dom(grad S).
PhaseParticleMeasure lift_graph(const ParticleMeasure& sigma, const WeakKamSolution& S);

/// Every phase particle advanced by the Verlet flow; weights untouched.
PhaseParticleMeasure pushforward_flow(const PhaseParticleMeasure& omega, double t, double step,
                                      const Potential& V, double mass);

ParticleMeasure project(const PhaseParticleMeasure& omega);
ParticleMeasure pushforward_map(const ParticleMeasure& sigma,
                                const std::function<Point(const Point&)>& map);

struct GraphDistance {
  /// max over in-domain particles of |p_i - grad S(x_i)|.
  double distance = 0.0;
  /// Particles whose positions left dom(grad S).
  std::size_t exit_count = 0;
  double exit_mass = 0.0;
  /// max |p_i - grad S(x_i)| over the particles that left the domain.
  double max_excursion = 0.0;
};
GraphDistance graph_distance(const PhaseParticleMeasure& omega, const WeakKamSolution& S);

/// Exact 1-Wasserstein distance on the circle R / 2 pi Z.
double w1_circle(const ParticleMeasure& mu, const ParticleMeasure& nu);
double w1_circle(const GridMeasure& mu, const GridMeasure& nu);
double w1_circle(const GridMeasure& mu, const ParticleMeasure& nu);

/// Dense row-major matrix, rows indexed by sources.
struct DenseMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  DenseMatrix() = default;
  DenseMatrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), values(r * c, fill) {}
  double& operator()(std::size_t i, std::size_t j) { return values[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return values[i * cols + j]; }
  DenseMatrix transposed() const;
};

struct SinkhornResult {
  /// Transport cost <C, plan> of the entropic plan (entropy term excluded).
  double cost = 0.0;
  DenseMatrix plan;
  double epsilon = 0.0;
  int iterations = 0;
  /// Max marginal violation of the returned plan.
  double marginal_error = 0.0;
};

struct SinkhornConfig {
  /// Final regularization; when <= 0 it defaults to 1e-2 * median(C - min C).
  double epsilon = 0.0;
  int max_iters = 100000;
  double tol = 1e-10;
  /// Geometric epsilon schedule from max(C) - min(C) down to epsilon.
  bool epsilon_scaling = true;
};

/// Log-domain Sinkhorn between weight vectors a, b for cost C. Throws
/// NonConvergence when the marginals are not met within max_iters.
SinkhornResult sinkhorn(const std::vector<double>& a, const std::vector<double>& b,
                        const DenseMatrix& C, const SinkhornConfig& cfg = {});

// --- weak-form residuals ---------------------------------------------------

/// C-infinity bump supported in (0, 1): exp(1 - 1 / (1 - (2t - 1)^2)), peak 1.
double time_bump(double t);
double time_bump_derivative(double t);

/// Spatial test mode cos(q.x) or sin(q.x).
struct SpatialMode {
  std::array<int, 2> q{0, 0};
  bool sine = false;

  double value(const Point& x) const;
  Point gradient(const Point& x) const;
};

/// All cos / sin modes with 0 < |q|_inf <= max_mode (one of each +-q pair) plus
/// the constant mode.
std::vector<SpatialMode> standard_modes(int dim, int max_mode);

/// Smooth bump in momentum supported in |p| < radius, value 1 at p = 0.
struct MomentumCutoff {
  double radius = 4.0;

  double value(const Point& p, int dim) const;
  Point gradient(const Point& p, int dim) const;
};

struct TimedParticleMeasure {
  double t;
  ParticleMeasure sigma;
};
struct TimedPhaseMeasure {
  double t;
  PhaseParticleMeasure omega;
};

struct ResidualReport {
  /// max over test functions of |residual|.
  double max_residual = 0.0;
  std::vector<double> per_function;
};

/// max_f |int_0^1 int (d_t f + grad_x f . grad S / m) d sigma_t dt| with
/// f = time_bump(t) * mode(x); time integral by the trapezoid rule over the
/// path samples, which must be uniform in [0, 1] and include both endpoints.
ResidualReport continuity_residual(const std::vector<TimedParticleMeasure>& path,
                                   const WeakKamSolution& S, double mass,
                                   const std::vector<SpatialMode>& modes);

/// max_f |int_0^1 int (d_s f + {H, f}) d omega_s ds| with
/// f = time_bump(s) * mode(x) * cutoff(p) and {H, f} = p/m . grad_x f - grad V . grad_p f.
ResidualReport liouville_residual(const std::vector<TimedPhaseMeasure>& path, const Potential& V,
                                  double mass, const std::vector<SpatialMode>& modes,
                                  const MomentumCutoff& cutoff);

// --- grid solver and sampling ----------------------------------------------

/// Face velocities of a finite-volume scheme: faces[axis][i] is the velocity
/// through the face between node i and its +axis neighbour.
struct FaceVelocity {
  TorusGrid grid;
  std::array<std::vector<double>, 2> faces;
};

/// v = grad S / m at faces, from difference quotients of S across each face.
FaceVelocity face_velocity(const WeakKamSolution& S, double mass);
/// Constant velocity field (test override).
FaceVelocity constant_face_velocity(const TorusGrid& grid, const Point& velocity);

struct UpwindResult {
  GridMeasure sigma;
  long steps = 0;
  double dt = 0.0;
};

/// First-order conservative upwind solution of d_t rho + div(v rho) = 0 up to
/// time t. The step is cfl * h / (max total outflow speed of a cell), which
/// keeps the update nonnegative. Throws CflViolation unless 0 < cfl <= 0.9.
UpwindResult advect_density_upwind(const GridMeasure& sigma0, const FaceVelocity& velocity, double t,
                                   double cfl);
UpwindResult advect_density_upwind(const GridMeasure& sigma0, const WeakKamSolution& S, double mass,
                                   double t, double cfl);

/// Deterministic sampling: inverse CDF at stratified quantiles (1D) or
/// systematic cell-wise allocation (2D). Cells are centred on the nodes. The
/// seed fixes the stratification offset and in-cell positions.
ParticleMeasure grid_to_particles(const GridMeasure& sigma, std::size_t count, std::uint64_t seed);

/// Periodic hat-kernel histogram of half-width `bandwidth` (at least one
/// spacing); every particle deposits exactly its weight.
GridMeasure particles_to_grid(const ParticleMeasure& sigma, const TorusGrid& grid, double bandwidth);

/// Portable uniform double in [0, 1) from a 64-bit engine draw.
double uniform01(std::uint64_t bits);

}  // namespace toruswkb
