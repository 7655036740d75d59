#pragma once

// WKB initial data a(x) exp(i S(x) / hbar) and their evolution under
//
//     i hbar d_t psi = -(hbar^2 / 2m) Laplacian psi + V psi
//
// by Strang splitting with an exact spectral kinetic step.

#include <optional>
#include <vector>

#include "toruswkb/hamiltonian.hpp"
#include "toruswkb/measures.hpp"
#include "toruswkb/torus_grid.hpp"
#include "toruswkb/weak_kam.hpp"

namespace toruswkb {

struct WaveFunction {
  TorusGrid grid;
  std::vector<Complex> values;
  double hbar = 1.0;
  double mass = 1.0;

  /// sqrt(sum |psi_j|^2 * cell_volume).
  double norm() const;
};

struct WkbConfig {
  double hbar = 1.0 / 32.0;
  /// Nodes removed around every node outside the differentiability mask.
  int mask_margin = 24;
  /// Radius (radians) of the compactly supported mollifier; 0 disables it.
  double mollifier_bandwidth = 0.02;
  /// Amplitudes below this value are set to zero.
  double amplitude_floor = 0.0;

  void validate() const;
};

struct PreparedDensity {
  GridMeasure density;
  /// W1 between the requested and the prepared density (1D only).
  std::optional<double> trimming_w1;
};

/// Trims sigma0 to the mask shrunk by cfg.mask_margin, mollifies, trims again
/// (safety) and renormalizes. Throws EmptySupport when no mass survives.
PreparedDensity prepare_initial_density(const GridMeasure& sigma0, const WeakKamSolution& S,
                                        const WkbConfig& cfg);

/// Throws ResolutionError when fewer than 8 nodes cover the local phase
/// wavelength 2 pi hbar / p_max.
void check_resolution(const TorusGrid& grid, double hbar, double p_max);

/// psi_j = a_j exp(i S(x_j) / hbar) with a = sqrt of the prepared density.
WaveFunction wkb_initial(const GridMeasure& sigma0, const WeakKamSolution& S, const WkbConfig& cfg);

/// Same construction from an already prepared density.
WaveFunction wkb_from_density(const GridMeasure& rho, const WeakKamSolution& S, double hbar);

/// hbar * || grad |psi| ||_{L^2}, with the gradient taken spectrally.
double scaled_amplitude_gradient(const WaveFunction& psi);

/// Strang splitting propagator for a fixed (grid, V, hbar, m, dt). Holds the
/// phase tables and an FFT plan; not thread-safe.
class SplitStepPropagator {
 public:
  SplitStepPropagator(const TorusGrid& grid, const Potential& V, double hbar, double mass, double dt);

  double dt() const { return dt_; }
  void step(std::vector<Complex>& values) const;
  void advance(std::vector<Complex>& values, long steps) const;

 private:
  TorusGrid grid_;
  double dt_;
  std::vector<Complex> half_potential_;
  std::vector<Complex> kinetic_;
  SpectralPlan plan_;
};

WaveFunction strang_step(const WaveFunction& psi, double dt, const Potential& V);

/// round(t / dt) steps of size t / round(t / dt).
WaveFunction propagate(const WaveFunction& psi, double t, double dt, const Potential& V);

/// States at the requested increasing times; every time must be an integer
/// multiple of dt within 1e-9.
std::vector<WaveFunction> propagate_snapshots(const WaveFunction& psi, const std::vector<double>& times,
                                              double dt, const Potential& V);

/// <psi, H psi> with the kinetic part evaluated spectrally.
double energy(const WaveFunction& psi, const Potential& V);

/// Free evolution by the exact Fourier multiplier.
WaveFunction free_evolution_exact(const WaveFunction& psi, double t);

/// |psi|^2 as a grid measure.
GridMeasure position_density(const WaveFunction& psi);

}  // namespace toruswkb
