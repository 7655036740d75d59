#include "toruswkb/schrodinger.hpp"

#include <algorithm>
#include <cmath>

namespace toruswkb {

double WaveFunction::norm() const {
  double s = 0.0;
  for (const auto& z : values) s += std::norm(z);
  return std::sqrt(s * grid.cell_volume());
}

void WkbConfig::validate() const {
  if (!(hbar > 0.0)) throw InvalidArgument("hbar must be positive");
  if (mask_margin < 1) throw InvalidArgument("mask margin must be at least one node");
  if (mollifier_bandwidth < 0.0) throw InvalidArgument("mollifier bandwidth must be nonnegative");
  if (amplitude_floor < 0.0) throw InvalidArgument("amplitude floor must be nonnegative");
}

namespace {

// Periodic convolution with the normalized C-infinity bump of radius r.
std::vector<double> mollify(const TorusGrid& g, const std::vector<double>& rho, double r) {
  const double h = g.spacing();
  if (r < h) return rho;
  const long reach = static_cast<long>(std::floor(r / h));
  std::vector<double> kernel(2 * reach + 1);
  double ksum = 0.0;
  for (long a = -reach; a <= reach; ++a) {
    const double s = (a * h) / r;
    kernel[a + reach] = std::abs(s) < 1.0 ? std::exp(-1.0 / (1.0 - s * s)) : 0.0;
    ksum += kernel[a + reach];
  }
  // tensor-product kernel, normalized to unit discrete mass
  std::vector<double> out(rho.size(), 0.0);
  const double norm = g.dim() == 1 ? ksum : ksum * ksum;
  const long rb = g.dim() == 2 ? reach : 0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (rho[i] == 0.0) continue;
    const auto mi = g.multi_index(i);
    for (long a = -reach; a <= reach; ++a)
      for (long b = -rb; b <= rb; ++b) {
        const double w = kernel[a + reach] * (g.dim() == 2 ? kernel[b + reach] : 1.0) / norm;
        if (w > 0.0) out[g.index(mi[0] + a, mi[1] + b)] += w * rho[i];
      }
  }
  return out;
}

}  // namespace

PreparedDensity prepare_initial_density(const GridMeasure& sigma0, const WeakKamSolution& S,
                                        const WkbConfig& cfg) {
  cfg.validate();
  const TorusGrid& g = sigma0.grid;
  if (!(g == S.grid()))
    throw GridMismatch("initial density and weak KAM solution must share the grid");
  const Mask trimmed = shrink_mask(g, S.diff_mask, cfg.mask_margin);
  std::vector<double> rho(g.size(), 0.0);
  for (std::size_t i = 0; i < g.size(); ++i) rho[i] = trimmed[i] ? sigma0.density[i] : 0.0;
  rho = mollify(g, rho, cfg.mollifier_bandwidth);
  for (std::size_t i = 0; i < g.size(); ++i)
    if (!S.diff_mask[i]) rho[i] = 0.0;
  double mass = 0.0;
  for (double r : rho) mass += r;
  mass *= g.cell_volume();
  if (!(mass > 0.0)) throw EmptySupport("trimming removed all mass of the initial density");
  for (double& r : rho) r /= mass;

  PreparedDensity out{GridMeasure{g, std::move(rho)}, std::nullopt};
  if (g.dim() == 1) out.trimming_w1 = w1_circle(sigma0, out.density);
  return out;
}

void check_resolution(const TorusGrid& grid, double hbar, double p_max) {
  if (p_max <= 0.0) return;
  const double per_wavelength = kTwoPi * hbar / p_max / grid.spacing();
  if (per_wavelength < 8.0)
    throw ResolutionError("only " + std::to_string(per_wavelength) +
                          " nodes per phase wavelength 2 pi hbar / p_max; at least 8 are required");
}

WaveFunction wkb_from_density(const GridMeasure& rho, const WeakKamSolution& S, double hbar) {
  const TorusGrid& g = rho.grid;
  if (!(g == S.grid())) throw GridMismatch("density and weak KAM solution must share the grid");
  double p_max = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (rho.density[i] <= 0.0) continue;
    const Point& p = S.gradient.values[i];
    p_max = std::max(p_max, std::hypot(p[0], g.dim() == 2 ? p[1] : 0.0));
  }
  check_resolution(g, hbar, p_max);
  WaveFunction psi{g, std::vector<Complex>(g.size()), hbar, S.mass};
  for (std::size_t i = 0; i < g.size(); ++i)
    psi.values[i] = std::sqrt(rho.density[i]) * std::polar(1.0, S.values.values[i] / hbar);
  const double n = psi.norm();
  for (auto& z : psi.values) z /= n;
  return psi;
}

WaveFunction wkb_initial(const GridMeasure& sigma0, const WeakKamSolution& S, const WkbConfig& cfg) {
  PreparedDensity prepared = prepare_initial_density(sigma0, S, cfg);
  if (cfg.amplitude_floor > 0.0) {
    const double floor2 = cfg.amplitude_floor * cfg.amplitude_floor;
    for (double& r : prepared.density.density)
      if (r < floor2) r = 0.0;
  }
  return wkb_from_density(prepared.density, S, cfg.hbar);
}

double scaled_amplitude_gradient(const WaveFunction& psi) {
  ScalarField a(psi.grid);
  for (std::size_t i = 0; i < a.values.size(); ++i) a.values[i] = std::abs(psi.values[i]);
  const VectorField grad = gradient_spectral(a);
  double s = 0.0;
  for (const auto& v : grad.values) s += v[0] * v[0] + v[1] * v[1];
  return psi.hbar * std::sqrt(s * psi.grid.cell_volume());
}

SplitStepPropagator::SplitStepPropagator(const TorusGrid& grid, const Potential& V, double hbar,
                                         double mass, double dt)
    : grid_(grid), dt_(dt), plan_(grid) {
  if (!(dt > 0.0)) throw InvalidArgument("time step must be positive");
  if (!(hbar > 0.0) || !(mass > 0.0)) throw InvalidArgument("hbar and mass must be positive");
  if (!(V.grid() == grid)) throw GridMismatch("potential and wave function live on different grids");
  half_potential_.resize(grid.size());
  kinetic_.resize(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    half_potential_[i] = std::polar(1.0, -V.samples().values[i] * dt / (2.0 * hbar));
    const auto k = frequency_vector(grid, i);
    const double k2 = static_cast<double>(k[0]) * k[0] + static_cast<double>(k[1]) * k[1];
    kinetic_[i] = std::polar(1.0, -hbar * k2 * dt / (2.0 * mass));
  }
}

void SplitStepPropagator::step(std::vector<Complex>& v) const {
  for (std::size_t i = 0; i < v.size(); ++i) v[i] *= half_potential_[i];
  plan_.forward(v);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] *= kinetic_[i];
  plan_.inverse(v);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] *= half_potential_[i];
}

void SplitStepPropagator::advance(std::vector<Complex>& v, long steps) const {
  for (long s = 0; s < steps; ++s) step(v);
}

WaveFunction strang_step(const WaveFunction& psi, double dt, const Potential& V) {
  SplitStepPropagator prop(psi.grid, V, psi.hbar, psi.mass, dt);
  WaveFunction out = psi;
  prop.step(out.values);
  return out;
}

WaveFunction propagate(const WaveFunction& psi, double t, double dt, const Potential& V) {
  if (t < 0.0) throw InvalidArgument("propagation time must be nonnegative");
  const long n = flow_step_count(t, dt);
  WaveFunction out = psi;
  if (n == 0) return out;
  SplitStepPropagator prop(psi.grid, V, psi.hbar, psi.mass, t / static_cast<double>(n));
  prop.advance(out.values, n);
  return out;
}

std::vector<WaveFunction> propagate_snapshots(const WaveFunction& psi, const std::vector<double>& times,
                                              double dt, const Potential& V) {
  if (!(dt > 0.0)) throw InvalidArgument("time step must be positive");
  SplitStepPropagator prop(psi.grid, V, psi.hbar, psi.mass, dt);
  std::vector<WaveFunction> out;
  out.reserve(times.size());
  WaveFunction cur = psi;
  long done = 0;
  for (double t : times) {
    const double steps_real = t / dt;
    const long steps = std::lround(steps_real);
    if (std::abs(steps_real - static_cast<double>(steps)) > 1e-9 * std::max(1.0, steps_real))
      throw InvalidArgument("snapshot times must be multiples of the time step");
    if (steps < done) throw InvalidArgument("snapshot times must be increasing");
    prop.advance(cur.values, steps - done);
    done = steps;
    out.push_back(cur);
  }
  return out;
}

double energy(const WaveFunction& psi, const Potential& V) {
  if (!(V.grid() == psi.grid)) throw GridMismatch("potential and wave function live on different grids");
  std::vector<Complex> c = psi.values;
  SpectralPlan plan(psi.grid);
  plan.forward(c);
  double kin = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    const auto k = frequency_vector(psi.grid, i);
    const double k2 = static_cast<double>(k[0]) * k[0] + static_cast<double>(k[1]) * k[1];
    kin += k2 * std::norm(c[i]);
  }
  // Parseval: sum_j |psi_j|^2 h^n = (2 pi)^n sum_k |c_k|^2
  kin *= psi.hbar * psi.hbar / (2.0 * psi.mass) * std::pow(kTwoPi, psi.grid.dim());
  double pot = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i) pot += V.samples().values[i] * std::norm(psi.values[i]);
  return kin + pot * psi.grid.cell_volume();
}

WaveFunction free_evolution_exact(const WaveFunction& psi, double t) {
  WaveFunction out = psi;
  SpectralPlan plan(psi.grid);
  plan.forward(out.values);
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    const auto k = frequency_vector(psi.grid, i);
    const double k2 = static_cast<double>(k[0]) * k[0] + static_cast<double>(k[1]) * k[1];
    out.values[i] *= std::polar(1.0, -psi.hbar * k2 * t / (2.0 * psi.mass));
  }
  plan.inverse(out.values);
  return out;
}

GridMeasure position_density(const WaveFunction& psi) {
  GridMeasure m{psi.grid, std::vector<double>(psi.grid.size())};
  for (std::size_t i = 0; i < m.density.size(); ++i) m.density[i] = std::norm(psi.values[i]);
  return m;
}

}  // namespace toruswkb
