#include "toruswkb/weak_kam.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "toruswkb/transport.hpp"

namespace toruswkb {

void LaxOleinikConfig::validate() const {
  if (!(dt > 0.0) || dt > 0.5) throw InvalidArgument("Lax-Oleinik dt must lie in (0, 0.5]");
  if (!(tol > 0.0)) throw InvalidArgument("Lax-Oleinik tol must be positive");
  if (max_iters < 1) throw InvalidArgument("Lax-Oleinik max_iters must be >= 1");
  if (winding_range < 0) throw InvalidArgument("winding range must be >= 0");
  if (tau && !(*tau > 0.0)) throw InvalidArgument("tau must be positive");
}

bool WeakKamSolution::in_domain(const Point& x) const {
  const CellStencil st = cell_stencil(grid(), x);
  for (int c = 0; c < st.count; ++c)
    if (st.weights[c] > 0.0 && !diff_mask[st.nodes[c]]) return false;
  return true;
}

double default_tau(const TorusGrid& grid) { return 0.2 * std::sqrt(grid.spacing()); }

double one_step_cost(const Point& x, const Point& y, double dt, double vx, double vy, double mass,
                     int winding_range, int dim) {
  double best_sq = std::numeric_limits<double>::infinity();
  const int w = winding_range;
  for (int a = -w; a <= w; ++a) {
    const double d0 = x[0] - y[0] - kTwoPi * a;
    if (dim == 1) {
      best_sq = std::min(best_sq, d0 * d0);
      continue;
    }
    for (int b = -w; b <= w; ++b) {
      const double d1 = x[1] - y[1] - kTwoPi * b;
      best_sq = std::min(best_sq, d0 * d0 + d1 * d1);
    }
  }
  return mass * best_sq / (2.0 * dt) - dt * (vx + vy) / 2.0;
}

double one_step_cost(const Point& x, const Point& y, double dt, const Potential& V, double mass,
                     int winding_range) {
  return one_step_cost(x, y, dt, V.value(x), V.value(y), mass, winding_range, V.dim());
}

namespace {

// Lipschitz bound of the grid function with respect to the torus metric:
// neighbour slopes bound every increment along axis-aligned grid paths.
double lipschitz_bound(const ScalarField& u) {
  const TorusGrid& g = u.grid;
  std::array<double, 2> slope{0.0, 0.0};
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto mi = g.multi_index(i);
    slope[0] = std::max(slope[0], std::abs(u.values[g.index(mi[0] + 1, mi[1])] - u.values[i]));
    if (g.dim() == 2)
      slope[1] = std::max(slope[1], std::abs(u.values[g.index(mi[0], mi[1] + 1)] - u.values[i]));
  }
  return std::hypot(slope[0], slope[1]) / g.spacing();
}

}  // namespace

ScalarField lax_oleinik_plus(const ScalarField& u, const LaxOleinikConfig& cfg, const Potential& V,
                             double mass) {
  const TorusGrid& g = u.grid;
  if (!(V.grid() == g)) throw GridMismatch("potential and field live on different grids");
  const auto& v = V.samples().values;
  const int dim = g.dim();
  const int n = g.points_per_dim();
  const double h = g.spacing();
  const double dt = cfg.dt;

  // A candidate y at torus distance d can only beat y = x when
  //   L d - m d^2 / (2 dt) + dt osc(V) / 2 >= 0.
  const double lip = lipschitz_bound(u);
  const double osc = *std::max_element(v.begin(), v.end()) - *std::min_element(v.begin(), v.end());
  const double radius = dt / mass * (lip + std::sqrt(lip * lip + mass * osc));
  const long reach = static_cast<long>(std::ceil(radius / h)) + 2;

  ScalarField out(g);
  if (2 * reach >= n) {
    for (std::size_t i = 0; i < g.size(); ++i) {
      const Point xi = g.node(i);
      double best = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < g.size(); ++j) {
        const double val =
            u.values[j] - one_step_cost(xi, g.node(j), dt, v[i], v[j], mass, cfg.winding_range, dim);
        best = std::max(best, val);
      }
      out.values[i] = best;
    }
    return out;
  }

  const double reach_sq = static_cast<double>(reach) * static_cast<double>(reach);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto mi = g.multi_index(i);
    const Point xi = g.node(i);
    double best = -std::numeric_limits<double>::infinity();
    if (dim == 1) {
      for (long o = -reach; o <= reach; ++o) {
        const std::size_t j = g.index(mi[0] + o);
        const double val =
            u.values[j] - one_step_cost(xi, g.node(j), dt, v[i], v[j], mass, cfg.winding_range, 1);
        best = std::max(best, val);
      }
    } else {
      for (long a = -reach; a <= reach; ++a)
        for (long b = -reach; b <= reach; ++b) {
          if (static_cast<double>(a * a + b * b) > reach_sq) continue;
          const std::size_t j = g.index(mi[0] + a, mi[1] + b);
          const double val =
              u.values[j] - one_step_cost(xi, g.node(j), dt, v[i], v[j], mass, cfg.winding_range, 2);
          best = std::max(best, val);
        }
    }
    out.values[i] = best;
  }
  return out;
}

Mask differentiability_mask(const ScalarField& S, double tau) {
  const TorusGrid& g = S.grid;
  const double h = g.spacing();
  Mask mask(g.size(), 1);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto mi = g.multi_index(i);
    for (int axis = 0; axis < g.dim(); ++axis) {
      const long da = axis == 0 ? 1 : 0;
      const long db = axis == 1 ? 1 : 0;
      const double fwd = (S.values[g.index(mi[0] + da, mi[1] + db)] - S.values[i]) / h;
      const double bwd = (S.values[i] - S.values[g.index(mi[0] - da, mi[1] - db)]) / h;
      const double central = 0.5 * (fwd + bwd);
      if (std::abs(fwd - bwd) > tau * (1.0 + std::abs(central))) mask[i] = 0;
    }
  }
  return mask;
}

VectorField masked_gradient(const ScalarField& S, const Mask& mask) {
  const TorusGrid& g = S.grid;
  const double h = g.spacing();
  VectorField grad(g);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto mi = g.multi_index(i);
    for (int axis = 0; axis < g.dim(); ++axis) {
      const long da = axis == 0 ? 1 : 0;
      const long db = axis == 1 ? 1 : 0;
      const double up = S.values[g.index(mi[0] + da, mi[1] + db)];
      if (mask[i]) {
        const double down = S.values[g.index(mi[0] - da, mi[1] - db)];
        grad.values[i][axis] = (up - down) / (2.0 * h);
      } else {
        grad.values[i][axis] = (up - S.values[i]) / h;
      }
    }
  }
  return grad;
}

ScalarField eikonal_residual(const WeakKamSolution& S, const Potential& V) {
  const TorusGrid& g = S.grid();
  ScalarField r(g);
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!S.diff_mask[i]) continue;
    const Point& p = S.gradient.values[i];
    const double p2 = p[0] * p[0] + (g.dim() == 2 ? p[1] * p[1] : 0.0);
    r.values[i] = std::abs(p2 / (2.0 * S.mass) + V.samples().values[i] - S.c0);
  }
  return r;
}

Mask shrink_mask(const TorusGrid& g, const Mask& mask, int margin) {
  Mask out = mask;
  if (margin <= 0) return out;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (mask[i]) continue;
    const auto mi = g.multi_index(i);
    const int span_b = g.dim() == 2 ? margin : 0;
    for (long a = -margin; a <= margin; ++a)
      for (long b = -span_b; b <= span_b; ++b) out[g.index(mi[0] + a, mi[1] + b)] = 0;
  }
  return out;
}

namespace {

void finalize(WeakKamSolution& S, const Potential& V, double tau) {
  S.diff_mask = differentiability_mask(S.values, tau);
  S.gradient = masked_gradient(S.values, S.diff_mask);
  const ScalarField r = eikonal_residual(S, V);
  S.residual = *std::max_element(r.values.begin(), r.values.end());
}

}  // namespace

WeakKamSolution solve_weak_kam_plus(const Potential& V, double mass, const LaxOleinikConfig& cfg) {
  cfg.validate();
  if (!(mass > 0.0)) throw InvalidArgument("mass must be positive");
  const TorusGrid& g = V.grid();

  WeakKamSolution S;
  S.c0 = critical_value(V);
  S.mass = mass;
  S.anchor = argmax_node(V);
  S.dt = cfg.dt;
  ScalarField u(g, 0.0);

  double change = std::numeric_limits<double>::infinity();
  int it = 0;
  while (it < cfg.max_iters) {
    ScalarField next = lax_oleinik_plus(u, cfg, V, mass);
    ++it;
    double drift = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) drift += next.values[i] - u.values[i];
    S.drift_per_step = drift / static_cast<double>(g.size());
    for (double& x : next.values) x -= cfg.dt * S.c0;
    const double shift = next.values[S.anchor];
    change = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      next.values[i] -= shift;
      change = std::max(change, std::abs(next.values[i] - u.values[i]));
    }
    u = std::move(next);
    if (change <= cfg.tol) break;
  }
  S.values = std::move(u);
  S.iterations = it;
  S.final_change = change;
  if (change > cfg.tol)
    throw NonConvergence("weak KAM iteration did not converge in " + std::to_string(it) +
                             " sweeps (last change " + std::to_string(change) + ")",
                         change);
  finalize(S, V, cfg.tau.value_or(default_tau(g)));
  return S;
}

double fixed_point_defect(const WeakKamSolution& S, const LaxOleinikConfig& cfg, const Potential& V) {
  const ScalarField next = lax_oleinik_plus(S.values, cfg, V, S.mass);
  double d = 0.0;
  for (std::size_t i = 0; i < next.values.size(); ++i)
    d = std::max(d, std::abs(next.values[i] - cfg.dt * S.c0 - S.values[i]));
  return d;
}

WeakKamSolution refine_solution(const WeakKamSolution& S, const TorusGrid& fine,
                                const Potential& V_fine) {
  const TorusGrid& coarse = S.grid();
  if (fine.dim() != coarse.dim()) throw DimensionError("refinement must keep the dimension");
  if (!(V_fine.grid() == fine)) throw GridMismatch("potential must live on the fine grid");
  WeakKamSolution out;
  out.c0 = S.c0;
  out.mass = S.mass;
  out.dt = S.dt;
  out.iterations = S.iterations;
  out.final_change = S.final_change;
  out.drift_per_step = S.drift_per_step;
  out.values = ScalarField(fine);
  out.gradient = VectorField(fine);
  out.diff_mask.assign(fine.size(), 0);

  const double h = coarse.spacing();
  for (std::size_t i = 0; i < fine.size(); ++i) {
    const Point x = fine.node(i);
    const CellStencil st = cell_stencil(coarse, x);
    bool inside = true;
    for (int c = 0; c < st.count; ++c)
      if (st.weights[c] > 0.0 && !S.diff_mask[st.nodes[c]]) inside = false;
    out.diff_mask[i] = inside ? 1 : 0;
    if (fine.dim() == 1) {
      const double s = st.weights[1];
      const double f0 = S.values.values[st.nodes[0]], f1 = S.values.values[st.nodes[1]];
      const double d0 = S.gradient.values[st.nodes[0]][0] * h;
      const double d1 = S.gradient.values[st.nodes[1]][0] * h;
      const double s2 = s * s, s3 = s2 * s;
      out.values.values[i] = (2 * s3 - 3 * s2 + 1) * f0 + (s3 - 2 * s2 + s) * d0 +
                             (-2 * s3 + 3 * s2) * f1 + (s3 - s2) * d1;
      out.gradient.values[i][0] = ((6 * s2 - 6 * s) * f0 + (3 * s2 - 4 * s + 1) * d0 +
                                   (-6 * s2 + 6 * s) * f1 + (3 * s2 - 2 * s) * d1) /
                                  h;
    } else {
      out.values.values[i] = interpolate_periodic(S.values, x);
      out.gradient.values[i] = interpolate_periodic(S.gradient, x);
    }
  }
  // anchor: the fine node closest to the coarse anchor
  const int ratio = fine.points_per_dim() / coarse.points_per_dim();
  const auto ma = coarse.multi_index(S.anchor);
  out.anchor = fine.index(static_cast<long>(ma[0]) * ratio, static_cast<long>(ma[1]) * ratio);
  const ScalarField r = eikonal_residual(out, V_fine);
  out.residual = *std::max_element(r.values.begin(), r.values.end());
  return out;
}

double check_c_convexity(const WeakKamSolution& S, double t, const CostMatrix& costs) {
  if (t == 0.0) return 0.0;
  double defect = 0.0;
  for (std::size_t i = 0; i < costs.sources.size(); ++i) {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < costs.targets.size(); ++j)
      best = std::max(best, S.value_at(costs.targets[j]) - t * S.c0 - costs(i, j));
    defect = std::max(defect, std::abs(best - S.value_at(costs.sources[i])));
  }
  return defect;
}

}  // namespace toruswkb
