#include "toruswkb/measures.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace toruswkb {

namespace {

void check_weights(const std::vector<double>& w, std::size_t n, const char* what) {
  if (w.size() != n) throw InvalidArgument(std::string(what) + ": weights and points differ in size");
  double s = 0.0;
  for (double x : w) {
    if (!(x >= 0.0) || !std::isfinite(x)) throw InvalidArgument(std::string(what) + ": negative weight");
    s += x;
  }
  if (std::abs(s - 1.0) > 1e-12) throw InvalidArgument(std::string(what) + ": weights do not sum to 1");
}

void check_dim(int dim) {
  if (dim != 1 && dim != 2) throw DimensionError("measure dimension must be 1 or 2");
}

}  // namespace

void ParticleMeasure::validate() const {
  check_dim(dim);
  check_weights(weights, points.size(), "particle measure");
  for (const auto& p : points)
    for (int k = 0; k < dim; ++k)
      if (!(p[k] >= 0.0 && p[k] < kTwoPi)) throw InvalidArgument("particle position not reduced mod 2 pi");
}

double GridMeasure::mass() const {
  return std::accumulate(density.begin(), density.end(), 0.0) * grid.cell_volume();
}

void GridMeasure::validate() const {
  if (density.size() != grid.size()) throw GridMismatch("grid measure size does not match grid");
  for (double d : density)
    if (!(d >= 0.0) || !std::isfinite(d)) throw InvalidArgument("grid density must be nonnegative");
  if (std::abs(mass() - 1.0) > 1e-10) throw InvalidArgument("grid measure does not have unit mass");
}

ParticleMeasure GridMeasure::as_atoms() const {
  ParticleMeasure out;
  out.dim = grid.dim();
  out.points.reserve(grid.size());
  out.weights.reserve(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    out.points.push_back(grid.node(i));
    out.weights.push_back(density[i] * grid.cell_volume());
  }
  return out;
}

void PhaseParticleMeasure::validate() const {
  check_dim(dim);
  check_weights(weights, points.size(), "phase measure");
}

ParticleMeasure uniform_particles(int dim, std::vector<Point> points) {
  ParticleMeasure out;
  out.dim = dim;
  for (auto& p : points) p = wrap_point(p, dim);
  out.weights.assign(points.size(), points.empty() ? 0.0 : 1.0 / static_cast<double>(points.size()));
  out.points = std::move(points);
  return out;
}

PhaseParticleMeasure lift_graph(const ParticleMeasure& sigma, const WeakKamSolution& S) {
  if (sigma.dim != S.grid().dim()) throw DimensionError("measure and weak KAM solution differ in dimension");
  PhaseParticleMeasure out;
  out.dim = sigma.dim;
  out.weights = sigma.weights;
  out.points.reserve(sigma.size());
  for (std::size_t i = 0; i < sigma.size(); ++i) {
    const Point& x = sigma.points[i];
    if (!S.in_domain(x))
      throw ParticleOutsideDomain("particle " + std::to_string(i) + " lies outside dom grad S+", i);
    out.points.push_back({x, S.gradient_at(x)});
  }
  return out;
}

PhaseParticleMeasure pushforward_flow(const PhaseParticleMeasure& omega, double t, double step,
                                      const Potential& V, double mass) {
  PhaseParticleMeasure out = omega;
  for (auto& z : out.points) z = flow(z, t, step, V, mass);
  return out;
}

ParticleMeasure project(const PhaseParticleMeasure& omega) {
  ParticleMeasure out;
  out.dim = omega.dim;
  out.weights = omega.weights;
  out.points.reserve(omega.size());
  for (const auto& z : omega.points) out.points.push_back(z.x);
  return out;
}

ParticleMeasure pushforward_map(const ParticleMeasure& sigma,
                                const std::function<Point(const Point&)>& map) {
  ParticleMeasure out = sigma;
  for (auto& p : out.points) p = wrap_point(map(p), sigma.dim);
  return out;
}

GraphDistance graph_distance(const PhaseParticleMeasure& omega, const WeakKamSolution& S) {
  GraphDistance r;
  for (std::size_t i = 0; i < omega.size(); ++i) {
    const auto& z = omega.points[i];
    const Point g = S.gradient_at(z.x);
    double d2 = 0.0;
    for (int k = 0; k < omega.dim; ++k) d2 += (z.p[k] - g[k]) * (z.p[k] - g[k]);
    const double d = std::sqrt(d2);
    if (S.in_domain(z.x)) {
      r.distance = std::max(r.distance, d);
    } else {
      ++r.exit_count;
      r.exit_mass += omega.weights[i];
      r.max_excursion = std::max(r.max_excursion, d);
    }
  }
  return r;
}

// --- W1 on the circle ------------------------------------------------------

double w1_circle(const ParticleMeasure& mu, const ParticleMeasure& nu) {
  if (mu.dim != 1 || nu.dim != 1) throw DimensionError("w1_circle is defined for dim = 1 only");
  struct Atom {
    double x;
    double w;
  };
  std::vector<Atom> atoms;
  atoms.reserve(mu.size() + nu.size());
  for (std::size_t i = 0; i < mu.size(); ++i) atoms.push_back({wrap_angle(mu.points[i][0]), mu.weights[i]});
  for (std::size_t i = 0; i < nu.size(); ++i) atoms.push_back({wrap_angle(nu.points[i][0]), -nu.weights[i]});
  std::sort(atoms.begin(), atoms.end(), [](const Atom& a, const Atom& b) { return a.x < b.x; });

  // G = F_mu - F_nu is piecewise constant between consecutive atoms.
  struct Piece {
    double g;
    double len;
  };
  std::vector<Piece> pieces;
  pieces.reserve(atoms.size() + 1);
  double prev = 0.0, g = 0.0;
  for (const auto& a : atoms) {
    if (a.x > prev) pieces.push_back({g, a.x - prev});
    g += a.w;
    prev = a.x;
  }
  if (kTwoPi > prev) pieces.push_back({g, kTwoPi - prev});

  // The optimal rotation offset is a length-weighted median of G.
  std::vector<Piece> sorted = pieces;
  std::sort(sorted.begin(), sorted.end(), [](const Piece& a, const Piece& b) { return a.g < b.g; });
  double acc = 0.0, alpha = sorted.empty() ? 0.0 : sorted.back().g;
  for (const auto& p : sorted) {
    acc += p.len;
    if (acc >= 0.5 * kTwoPi) {
      alpha = p.g;
      break;
    }
  }
  double w1 = 0.0;
  for (const auto& p : pieces) w1 += p.len * std::abs(p.g - alpha);
  return w1;
}

double w1_circle(const GridMeasure& mu, const GridMeasure& nu) {
  return w1_circle(mu.as_atoms(), nu.as_atoms());
}

double w1_circle(const GridMeasure& mu, const ParticleMeasure& nu) {
  return w1_circle(mu.as_atoms(), nu);
}

// --- Sinkhorn --------------------------------------------------------------

DenseMatrix DenseMatrix::transposed() const {
  DenseMatrix t(cols, rows);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) t(j, i) = (*this)(i, j);
  return t;
}

namespace {

double log_sum_exp(const std::vector<double>& v) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : v) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

}  // namespace

SinkhornResult sinkhorn(const std::vector<double>& a, const std::vector<double>& b,
                        const DenseMatrix& C, const SinkhornConfig& cfg) {
  const std::size_t n = a.size(), m = b.size();
  if (C.rows != n || C.cols != m) throw InvalidArgument("sinkhorn: cost matrix shape mismatch");
  for (double c : C.values)
    if (!std::isfinite(c)) throw InvalidArgument("sinkhorn: cost matrix must be finite");
  const double cmin = *std::min_element(C.values.begin(), C.values.end());
  const double cmax = *std::max_element(C.values.begin(), C.values.end());

  double eps = cfg.epsilon;
  if (!(eps > 0.0)) {
    std::vector<double> shifted(C.values);
    for (double& c : shifted) c -= cmin;
    std::nth_element(shifted.begin(), shifted.begin() + shifted.size() / 2, shifted.end());
    const double med = shifted[shifted.size() / 2];
    eps = 1e-2 * (med > 0.0 ? med : (cmax > cmin ? cmax - cmin : 1.0));
  }

  std::vector<double> loga(n), logb(m);
  for (std::size_t i = 0; i < n; ++i) loga[i] = a[i] > 0.0 ? std::log(a[i]) : -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < m; ++j) logb[j] = b[j] > 0.0 ? std::log(b[j]) : -std::numeric_limits<double>::infinity();

  std::vector<double> f(n, 0.0), g(m, 0.0), buf(std::max(n, m));
  std::vector<double> schedule;
  if (cfg.epsilon_scaling) {
    for (double e = std::max(cmax - cmin, eps); e > eps; e *= 0.5) schedule.push_back(e);
  }
  schedule.push_back(eps);

  SinkhornResult res;
  res.epsilon = eps;
  int total = 0;
  double err = std::numeric_limits<double>::infinity();
  for (std::size_t stage = 0; stage < schedule.size(); ++stage) {
    const double e = schedule[stage];
    const bool last = stage + 1 == schedule.size();
    const int stage_iters = last ? cfg.max_iters : 100;
    for (int it = 0; it < stage_iters; ++it) {
      ++total;
      buf.resize(m);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) buf[j] = (g[j] - C(i, j)) / e + logb[j];
        f[i] = -e * log_sum_exp(buf);
      }
      buf.resize(n);
      for (std::size_t j = 0; j < m; ++j) {
        for (std::size_t i = 0; i < n; ++i) buf[i] = (f[i] - C(i, j)) / e + loga[i];
        g[j] = -e * log_sum_exp(buf);
      }
      // columns are exact after the g update; measure the row defect
      err = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (!(a[i] > 0.0)) continue;
        double row = 0.0;
        for (std::size_t j = 0; j < m; ++j)
          if (b[j] > 0.0) row += std::exp((f[i] + g[j] - C(i, j)) / e + loga[i] + logb[j]);
        err = std::max(err, std::abs(row - a[i]));
      }
      if (err <= (last ? cfg.tol : 1e-6)) break;
    }
  }
  if (err > cfg.tol)
    throw NonConvergence("sinkhorn did not reach the marginal tolerance", err);

  res.plan = DenseMatrix(n, m);
  double cost = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      const double p = (a[i] > 0.0 && b[j] > 0.0)
                           ? std::exp((f[i] + g[j] - C(i, j)) / eps + loga[i] + logb[j])
                           : 0.0;
      res.plan(i, j) = p;
      cost += p * C(i, j);
    }
  res.cost = cost;
  res.iterations = total;
  double merr = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < m; ++j) row += res.plan(i, j);
    merr = std::max(merr, std::abs(row - a[i]));
  }
  for (std::size_t j = 0; j < m; ++j) {
    double col = 0.0;
    for (std::size_t i = 0; i < n; ++i) col += res.plan(i, j);
    merr = std::max(merr, std::abs(col - b[j]));
  }
  res.marginal_error = merr;
  return res;
}

// --- residuals -------------------------------------------------------------

double time_bump(double t) {
  const double s = 2.0 * t - 1.0;
  if (std::abs(s) >= 1.0) return 0.0;
  return std::exp(1.0 - 1.0 / (1.0 - s * s));
}

double time_bump_derivative(double t) {
  const double s = 2.0 * t - 1.0;
  if (std::abs(s) >= 1.0) return 0.0;
  const double q = 1.0 - s * s;
  return time_bump(t) * (-4.0 * s / (q * q));
}

double SpatialMode::value(const Point& x) const {
  const double ph = q[0] * x[0] + q[1] * x[1];
  return sine ? std::sin(ph) : std::cos(ph);
}

Point SpatialMode::gradient(const Point& x) const {
  const double ph = q[0] * x[0] + q[1] * x[1];
  const double d = sine ? std::cos(ph) : -std::sin(ph);
  return {q[0] * d, q[1] * d};
}

std::vector<SpatialMode> standard_modes(int dim, int max_mode) {
  std::vector<SpatialMode> out;
  out.push_back({{0, 0}, false});
  if (dim == 1) {
    for (int q = 1; q <= max_mode; ++q) {
      out.push_back({{q, 0}, false});
      out.push_back({{q, 0}, true});
    }
    return out;
  }
  for (int a = 0; a <= max_mode; ++a)
    for (int b = -max_mode; b <= max_mode; ++b) {
      if (a == 0 && b <= 0) continue;
      out.push_back({{a, b}, false});
      out.push_back({{a, b}, true});
    }
  return out;
}

double MomentumCutoff::value(const Point& p, int dim) const {
  const double r2 = (p[0] * p[0] + (dim == 2 ? p[1] * p[1] : 0.0)) / (radius * radius);
  if (r2 >= 1.0) return 0.0;
  return std::exp(1.0 - 1.0 / (1.0 - r2));
}

Point MomentumCutoff::gradient(const Point& p, int dim) const {
  const double r2 = (p[0] * p[0] + (dim == 2 ? p[1] * p[1] : 0.0)) / (radius * radius);
  if (r2 >= 1.0) return {0.0, 0.0};
  const double q = 1.0 - r2;
  const double f = value(p, dim) * (-2.0 / (radius * radius * q * q));
  return {f * p[0], dim == 2 ? f * p[1] : 0.0};
}

namespace {

template <class Path>
std::vector<double> trapezoid_weights(const Path& path) {
  if (path.size() < 2) throw InvalidArgument("residual path needs at least two time samples");
  const double t0 = path.front().t, t1 = path.back().t;
  if (std::abs(t0) > 1e-12 || std::abs(t1 - 1.0) > 1e-12)
    throw InvalidArgument("residual path must span [0, 1]");
  const double dt = (t1 - t0) / static_cast<double>(path.size() - 1);
  for (std::size_t s = 0; s < path.size(); ++s)
    if (std::abs(path[s].t - (t0 + s * dt)) > 1e-9) throw InvalidArgument("residual path must be uniform in time");
  std::vector<double> w(path.size(), dt);
  w.front() *= 0.5;
  w.back() *= 0.5;
  return w;
}

}  // namespace

ResidualReport continuity_residual(const std::vector<TimedParticleMeasure>& path,
                                   const WeakKamSolution& S, double mass,
                                   const std::vector<SpatialMode>& modes) {
  const auto wq = trapezoid_weights(path);
  ResidualReport rep;
  rep.per_function.assign(modes.size(), 0.0);
  for (std::size_t s = 0; s < path.size(); ++s) {
    const double b = time_bump(path[s].t), db = time_bump_derivative(path[s].t);
    const ParticleMeasure& sigma = path[s].sigma;
    for (std::size_t i = 0; i < sigma.size(); ++i) {
      const Point& x = sigma.points[i];
      const Point v = S.gradient_at(x);
      for (std::size_t f = 0; f < modes.size(); ++f) {
        const Point gx = modes[f].gradient(x);
        const double adv = (gx[0] * v[0] + gx[1] * v[1]) / mass;
        rep.per_function[f] += wq[s] * sigma.weights[i] * (db * modes[f].value(x) + b * adv);
      }
    }
  }
  for (double r : rep.per_function) rep.max_residual = std::max(rep.max_residual, std::abs(r));
  return rep;
}

ResidualReport liouville_residual(const std::vector<TimedPhaseMeasure>& path, const Potential& V,
                                  double mass, const std::vector<SpatialMode>& modes,
                                  const MomentumCutoff& cutoff) {
  const auto wq = trapezoid_weights(path);
  const int dim = V.dim();
  ResidualReport rep;
  rep.per_function.assign(modes.size(), 0.0);
  for (std::size_t s = 0; s < path.size(); ++s) {
    const double b = time_bump(path[s].t), db = time_bump_derivative(path[s].t);
    const PhaseParticleMeasure& omega = path[s].omega;
    for (std::size_t i = 0; i < omega.size(); ++i) {
      const PhasePoint& z = omega.points[i];
      const double chi = cutoff.value(z.p, dim);
      const Point dchi = cutoff.gradient(z.p, dim);
      const Point gv = V.gradient(z.x);
      for (std::size_t f = 0; f < modes.size(); ++f) {
        const double g = modes[f].value(z.x);
        const Point gx = modes[f].gradient(z.x);
        double bracket = 0.0;
        for (int k = 0; k < dim; ++k) bracket += z.p[k] / mass * gx[k] * chi - gv[k] * g * dchi[k];
        rep.per_function[f] += wq[s] * omega.weights[i] * (db * g * chi + b * bracket);
      }
    }
  }
  for (double r : rep.per_function) rep.max_residual = std::max(rep.max_residual, std::abs(r));
  return rep;
}

// --- upwind ----------------------------------------------------------------

FaceVelocity face_velocity(const WeakKamSolution& S, double mass) {
  const TorusGrid& g = S.grid();
  FaceVelocity fv{g, {}};
  for (int axis = 0; axis < g.dim(); ++axis) {
    fv.faces[axis].resize(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
      const auto mi = g.multi_index(i);
      const std::size_t j = g.index(mi[0] + (axis == 0), mi[1] + (axis == 1));
      fv.faces[axis][i] = (S.values.values[j] - S.values.values[i]) / (g.spacing() * mass);
    }
  }
  return fv;
}

FaceVelocity constant_face_velocity(const TorusGrid& grid, const Point& velocity) {
  FaceVelocity fv{grid, {}};
  for (int axis = 0; axis < grid.dim(); ++axis) fv.faces[axis].assign(grid.size(), velocity[axis]);
  return fv;
}

UpwindResult advect_density_upwind(const GridMeasure& sigma0, const FaceVelocity& vel, double t,
                                   double cfl) {
  if (!(cfl > 0.0) || cfl > 0.9) throw CflViolation("upwind CFL number must lie in (0, 0.9]");
  if (!(sigma0.grid == vel.grid)) throw GridMismatch("density and velocity live on different grids");
  if (t < 0.0) throw InvalidArgument("advection time must be nonnegative");
  const TorusGrid& g = sigma0.grid;
  const int dim = g.dim();
  const double h = g.spacing();

  std::vector<std::array<std::size_t, 2>> down(g.size());
  double max_out = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto mi = g.multi_index(i);
    double out = 0.0;
    for (int axis = 0; axis < dim; ++axis) {
      down[i][axis] = g.index(mi[0] - (axis == 0), mi[1] - (axis == 1));
      out += std::max(vel.faces[axis][i], 0.0) + std::max(-vel.faces[axis][down[i][axis]], 0.0);
    }
    max_out = std::max(max_out, out);
  }

  UpwindResult res{sigma0, 0, 0.0};
  if (t == 0.0 || max_out == 0.0) return res;
  const double dt_max = cfl * h / max_out;
  res.steps = static_cast<long>(std::ceil(t / dt_max));
  res.dt = t / static_cast<double>(res.steps);
  const double lambda = res.dt / h;

  std::vector<double> rho = sigma0.density, flux(g.size()), next(g.size());
  for (long s = 0; s < res.steps; ++s) {
    next = rho;
    for (int axis = 0; axis < dim; ++axis) {
      const auto& v = vel.faces[axis];
      for (std::size_t i = 0; i < g.size(); ++i) {
        const auto mi = g.multi_index(i);
        const std::size_t up = g.index(mi[0] + (axis == 0), mi[1] + (axis == 1));
        flux[i] = std::max(v[i], 0.0) * rho[i] + std::min(v[i], 0.0) * rho[up];
      }
      for (std::size_t i = 0; i < g.size(); ++i) next[i] -= lambda * (flux[i] - flux[down[i][axis]]);
    }
    rho.swap(next);
  }
  res.sigma.density = std::move(rho);
  return res;
}

UpwindResult advect_density_upwind(const GridMeasure& sigma0, const WeakKamSolution& S, double mass,
                                   double t, double cfl) {
  if (!(sigma0.grid == S.grid()))
    throw GridMismatch("upwind solver: density grid (N=" + std::to_string(sigma0.grid.points_per_dim()) +
                       ") differs from weak KAM grid (N=" + std::to_string(S.grid().points_per_dim()) + ")");
  return advect_density_upwind(sigma0, face_velocity(S, mass), t, cfl);
}

// --- sampling --------------------------------------------------------------

double uniform01(std::uint64_t bits) { return static_cast<double>(bits >> 11) * 0x1.0p-53; }

ParticleMeasure grid_to_particles(const GridMeasure& sigma, std::size_t count, std::uint64_t seed) {
  if (count == 0) throw InvalidArgument("particle count must be positive");
  const TorusGrid& g = sigma.grid;
  const double h = g.spacing();
  const double vol = g.cell_volume();
  std::mt19937_64 rng(seed);
  const double offset = uniform01(rng());

  std::vector<double> cum(g.size() + 1, 0.0);
  for (std::size_t j = 0; j < g.size(); ++j) cum[j + 1] = cum[j] + sigma.density[j] * vol;
  const double total = cum.back();
  if (!(total > 0.0)) throw EmptySupport("cannot sample a measure without mass");

  ParticleMeasure out;
  out.dim = g.dim();
  out.points.reserve(count);
  out.weights.assign(count, 1.0 / static_cast<double>(count));
  std::size_t j = 0;
  for (std::size_t i = 0; i < count; ++i) {
    const double q = (static_cast<double>(i) + offset) / static_cast<double>(count) * total;
    while (j + 1 < g.size() && cum[j + 1] <= q) ++j;
    while (sigma.density[j] <= 0.0 && j + 1 < g.size()) ++j;
    const Point c = g.node(j);
    const double mj = cum[j + 1] - cum[j];
    const double frac = mj > 0.0 ? std::clamp((q - cum[j]) / mj, 0.0, 1.0 - 1e-12) : 0.5;
    Point p{0.0, 0.0};
    if (g.dim() == 1) {
      p[0] = c[0] - 0.5 * h + frac * h;
    } else {
      // systematic allocation picks the cell; the position inside is uniform
      p[0] = c[0] - 0.5 * h + uniform01(rng()) * h;
      p[1] = c[1] - 0.5 * h + uniform01(rng()) * h;
    }
    out.points.push_back(wrap_point(p, g.dim()));
  }
  return out;
}

GridMeasure particles_to_grid(const ParticleMeasure& sigma, const TorusGrid& grid, double bandwidth) {
  if (sigma.dim != grid.dim()) throw DimensionError("particles and grid differ in dimension");
  const double h = grid.spacing();
  if (bandwidth < h * (1.0 - 1e-12)) throw InvalidArgument("kernel bandwidth must be at least one spacing");
  const long reach = static_cast<long>(std::ceil(bandwidth / h));
  GridMeasure out{grid, std::vector<double>(grid.size(), 0.0)};
  std::vector<std::pair<std::size_t, double>> taps;
  for (std::size_t i = 0; i < sigma.size(); ++i) {
    const Point& x = sigma.points[i];
    taps.clear();
    double norm = 0.0;
    std::array<long, 2> base{0, 0};
    for (int k = 0; k < grid.dim(); ++k) base[k] = static_cast<long>(std::floor(wrap_angle(x[k]) / h));
    const long rb = grid.dim() == 2 ? reach + 1 : 0;
    for (long a = -reach; a <= reach + 1; ++a)
      for (long b = -rb; b <= rb; ++b) {
        const double dx = std::abs(min_image((base[0] + a) * h - x[0]));
        double w = std::max(0.0, 1.0 - dx / bandwidth);
        if (grid.dim() == 2) {
          const double dy = std::abs(min_image((base[1] + b) * h - x[1]));
          w *= std::max(0.0, 1.0 - dy / bandwidth);
        }
        if (w <= 0.0) continue;
        taps.push_back({grid.index(base[0] + a, base[1] + b), w});
        norm += w;
      }
    for (const auto& [node, w] : taps) out.density[node] += sigma.weights[i] * w / norm / grid.cell_volume();
  }
  return out;
}

}  // namespace toruswkb
