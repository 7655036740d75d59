#include "toruswkb/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

namespace toruswkb {

namespace {

using Mat2 = std::array<double, 4>;  // row-major 2x2

bool invert_pd(const Mat2& a, int dim, Mat2& inv) {
  if (dim == 1) {
    if (!(a[0] > 0.0)) return false;
    inv = {1.0 / a[0], 0.0, 0.0, 0.0};
    return true;
  }
  const double det = a[0] * a[3] - a[1] * a[2];
  if (!(a[0] > 0.0) || !(det > 0.0)) return false;
  inv = {a[3] / det, -a[1] / det, -a[2] / det, a[0] / det};
  return true;
}

Point mat_vec(const Mat2& a, const Point& x) {
  return {a[0] * x[0] + a[1] * x[1], a[2] * x[0] + a[3] * x[1]};
}

struct ActionGradient {
  double action;
  std::vector<Point> grad;  // interior nodes 1..M-1
  double norm;
};

ActionGradient action_and_gradient(const std::vector<Point>& g, double t, const Potential& V,
                                   double mass) {
  const int dim = V.dim();
  const std::size_t M = g.size() - 1;
  const double dt = t / static_cast<double>(M);
  ActionGradient r{discrete_action(g, t, V, mass), std::vector<Point>(M + 1, Point{0.0, 0.0}), 0.0};
  for (std::size_t s = 1; s < M; ++s) {
    const Point gv = V.gradient(g[s]);
    for (int a = 0; a < dim; ++a) {
      r.grad[s][a] = mass * (2.0 * g[s][a] - g[s - 1][a] - g[s + 1][a]) / dt - dt * gv[a];
      r.norm = std::max(r.norm, std::abs(r.grad[s][a]));
    }
  }
  return r;
}

// Solves H d = -grad for the block-tridiagonal action Hessian. Returns false
// when a pivot block is not positive definite.
bool newton_direction(const std::vector<Point>& g, const ActionGradient& ag, double t,
                      const Potential& V, double mass, std::vector<Point>& dir) {
  const int dim = V.dim();
  const std::size_t M = g.size() - 1;
  const double dt = t / static_cast<double>(M);
  const double beta = -mass / dt;
  std::vector<Mat2> dinv(M + 1);
  std::vector<Point> y(M + 1, Point{0.0, 0.0});
  for (std::size_t s = 1; s < M; ++s) {
    const Hessian2 hv = V.hessian(g[s]);
    Mat2 a{2.0 * mass / dt - dt * hv[0], -dt * hv[1], -dt * hv[1], 2.0 * mass / dt - dt * hv[2]};
    Point rhs{-ag.grad[s][0], -ag.grad[s][1]};
    if (s > 1) {
      const Mat2& p = dinv[s - 1];
      for (int k = 0; k < 4; ++k) a[k] -= beta * beta * p[k];
      const Point py = mat_vec(p, y[s - 1]);
      rhs[0] -= beta * py[0];
      rhs[1] -= beta * py[1];
    }
    if (!invert_pd(a, dim, dinv[s])) return false;
    y[s] = rhs;
  }
  dir.assign(M + 1, Point{0.0, 0.0});
  for (std::size_t s = M - 1; s >= 1; --s) {
    Point r = y[s];
    if (s + 1 < M) {
      r[0] -= beta * dir[s + 1][0];
      r[1] -= beta * dir[s + 1][1];
    }
    dir[s] = mat_vec(dinv[s], r);
    if (dim == 1) dir[s][1] = 0.0;
  }
  return true;
}

std::vector<Point> shifted(const std::vector<Point>& g, const std::vector<Point>& d, double alpha) {
  std::vector<Point> out = g;
  for (std::size_t s = 1; s + 1 < g.size(); ++s) {
    out[s][0] += alpha * d[s][0];
    out[s][1] += alpha * d[s][1];
  }
  return out;
}

constexpr double kStationarityTol = 1e-8;

// Damped Newton from the straight segment; gradient descent with Armijo
// backtracking whenever the Hessian is not positive definite.
bool minimize_path(std::vector<Point>& g, double t, const Potential& V, double mass, ActionGradient& ag,
                   int& iters) {
  const std::size_t M = g.size() - 1;
  const double dt = t / static_cast<double>(M);
  ag = action_and_gradient(g, t, V, mass);
  std::vector<Point> dir;
  for (iters = 0; iters < 500 && ag.norm > kStationarityTol; ++iters) {
    const bool newton = newton_direction(g, ag, t, V, mass, dir);
    if (!newton) {
      dir.assign(M + 1, Point{0.0, 0.0});
      for (std::size_t s = 1; s < M; ++s) dir[s] = {-ag.grad[s][0] * dt / mass, -ag.grad[s][1] * dt / mass};
    }
    double slope = 0.0;
    for (std::size_t s = 1; s < M; ++s) slope += ag.grad[s][0] * dir[s][0] + ag.grad[s][1] * dir[s][1];
    double alpha = 1.0;
    bool moved = false;
    for (int k = 0; k < 60; ++k, alpha *= 0.5) {
      auto trial = shifted(g, dir, alpha);
      auto tg = action_and_gradient(trial, t, V, mass);
      const double slack = 1e-13 * (1.0 + std::abs(ag.action));
      if (tg.action <= ag.action + 1e-4 * alpha * slope + slack || (newton && alpha == 1.0 && tg.norm < 0.5 * ag.norm)) {
        g = std::move(trial);
        ag = std::move(tg);
        moved = true;
        break;
      }
    }
    if (!moved) break;
  }
  return ag.norm <= kStationarityTol;
}

}  // namespace

double discrete_action(const std::vector<Point>& g, double t, const Potential& V, double mass) {
  const int dim = V.dim();
  const std::size_t M = g.size() - 1;
  const double dt = t / static_cast<double>(M);
  double a = 0.0;
  double vprev = V.value(g[0]);
  for (std::size_t s = 0; s < M; ++s) {
    double d2 = 0.0;
    for (int k = 0; k < dim; ++k) d2 += (g[s + 1][k] - g[s][k]) * (g[s + 1][k] - g[s][k]);
    const double vnext = V.value(g[s + 1]);
    a += mass * d2 / (2.0 * dt) - 0.5 * dt * (vprev + vnext);
    vprev = vnext;
  }
  return a;
}

ActionPath minimal_action_path(const Point& x, const Point& y, double t, int M, int winding_range,
                               const Potential& V, double mass) {
  if (!(t > 0.0)) throw InvalidArgument("minimal action path needs t > 0");
  if (M < 16) throw InvalidArgument("minimal action path needs M >= 16");
  if (winding_range < 0) throw InvalidArgument("winding range must be nonnegative");
  const int dim = V.dim();
  const Point x0 = wrap_point(x, dim);
  const Point y0 = wrap_point(y, dim);
  Point base{0.0, 0.0};
  for (int k = 0; k < dim; ++k) base[k] = x0[k] + min_image(y0[k] - x0[k]);

  ActionPath best;
  best.action = std::numeric_limits<double>::infinity();
  const int wy = dim == 2 ? winding_range : 0;
  for (int n0 = -winding_range; n0 <= winding_range; ++n0)
    for (int n1 = -wy; n1 <= wy; ++n1) {
      Point end = base;
      end[0] += kTwoPi * n0;
      if (dim == 2) end[1] += kTwoPi * n1;
      std::vector<Point> g(static_cast<std::size_t>(M) + 1);
      for (int s = 0; s <= M; ++s) {
        const double f = static_cast<double>(s) / M;
        g[s] = {x0[0] + f * (end[0] - x0[0]), dim == 2 ? x0[1] + f * (end[1] - x0[1]) : 0.0};
      }
      ActionGradient ag;
      int iters = 0;
      if (!minimize_path(g, t, V, mass, ag, iters)) continue;
      if (ag.action < best.action) {
        best.dim = dim;
        best.t = t;
        best.nodes = std::move(g);
        best.winding = {n0, n1};
        best.action = ag.action;
        best.gradient_norm = ag.norm;
        best.newton_iterations = iters;
      }
    }
  if (!std::isfinite(best.action)) throw OptFailed("no winding class reached a stationary discrete path");
  return best;
}

CostMatrix cost_matrix(const std::vector<Point>& sources, const std::vector<Point>& targets, double t,
                       int M, const Potential& V, double mass, int winding_range) {
  if (sources.size() > 128 || targets.size() > 128)
    throw InvalidArgument("cost matrix is limited to 128 points per side");
  CostMatrix C;
  C.sources = sources;
  C.targets = targets;
  C.t = t;
  C.values = DenseMatrix(sources.size(), targets.size());
  for (std::size_t i = 0; i < sources.size(); ++i)
    for (std::size_t j = 0; j < targets.size(); ++j)
      C.values(i, j) = minimal_action_path(sources[i], targets[j], t, M, winding_range, V, mass).action;
  return C;
}

double plan_cost(const DenseMatrix& plan, const DenseMatrix& C) {
  double c = 0.0;
  for (std::size_t k = 0; k < plan.values.size(); ++k) c += plan.values[k] * C.values[k];
  return c;
}

// --- transportation simplex -------------------------------------------------

TransportPlan kantorovich_exact(const std::vector<double>& a_in, const std::vector<double>& b_in,
                                const DenseMatrix& C) {
  const std::size_t n = a_in.size(), m = b_in.size();
  if (n == 0 || m == 0) throw Infeasible("transport problem with an empty side");
  if (C.rows != n || C.cols != m) throw InvalidArgument("cost matrix shape does not match the measures");
  double sa = 0.0, sb = 0.0;
  for (double w : a_in) {
    if (!(w >= 0.0)) throw Infeasible("negative source mass");
    sa += w;
  }
  for (double w : b_in) {
    if (!(w >= 0.0)) throw Infeasible("negative target mass");
    sb += w;
  }
  if (std::abs(sa - sb) > 1e-9) throw Infeasible("source and target masses differ");

  struct Cell {
    std::size_t i, j;
    double flow;
  };
  std::vector<Cell> basis;
  basis.reserve(n + m - 1);
  {
    std::vector<double> ra(a_in), rb(b_in);
    std::size_t i = 0, j = 0;
    for (;;) {
      const double q = std::max(0.0, std::min(ra[i], rb[j]));
      basis.push_back({i, j, q});
      ra[i] -= q;
      rb[j] -= q;
      if (i == n - 1 && j == m - 1) break;
      if (i == n - 1) ++j;
      else if (j == m - 1) ++i;
      else if (ra[i] < rb[j]) ++i;
      else ++j;
    }
  }

  double scale = 0.0;
  for (double c : C.values) scale = std::max(scale, std::abs(c));
  const double tol = 1e-12 * (1.0 + scale);

  std::vector<double> u(n), v(m);
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> adj(n + m);  // (neighbour, basis index)
  std::vector<std::uint8_t> is_basic(n * m, 0);
  for (const auto& c : basis) is_basic[c.i * m + c.j] = 1;

  auto rebuild = [&] {
    for (auto& l : adj) l.clear();
    for (std::size_t k = 0; k < basis.size(); ++k) {
      adj[basis[k].i].push_back({n + basis[k].j, k});
      adj[n + basis[k].j].push_back({basis[k].i, k});
    }
  };
  auto duals = [&] {
    std::vector<std::uint8_t> seen(n + m, 0);
    std::queue<std::size_t> q;
    u[0] = 0.0;
    seen[0] = 1;
    q.push(0);
    while (!q.empty()) {
      const std::size_t node = q.front();
      q.pop();
      for (const auto& [nb, k] : adj[node]) {
        if (seen[nb]) continue;
        seen[nb] = 1;
        const double c = C(basis[k].i, basis[k].j);
        if (nb >= n) v[nb - n] = c - u[node];
        else u[nb] = c - v[node - n];
        q.push(nb);
      }
    }
  };

  TransportPlan plan;
  plan.exact = true;
  int degenerate_run = 0;
  const int max_pivots = 200000;
  for (;;) {
    rebuild();
    duals();
    // Dantzig pricing; Bland's rule after a long run of degenerate pivots.
    const bool bland = degenerate_run > static_cast<int>(20 * (n + m));
    double best = -tol;
    std::size_t ei = n, ej = m;
    for (std::size_t i = 0; i < n && !(bland && ei < n); ++i)
      for (std::size_t j = 0; j < m; ++j) {
        if (is_basic[i * m + j]) continue;
        const double r = C(i, j) - u[i] - v[j];
        if (r < best) {
          best = r;
          ei = i;
          ej = j;
          if (bland) break;
        }
      }
    if (ei == n) break;
    if (++plan.pivots > max_pivots) throw NonConvergence("transportation simplex exceeded its pivot budget", best);

    // Tree path from column ej to row ei.
    std::vector<std::ptrdiff_t> parent_edge(n + m, -1);
    std::vector<std::size_t> parent(n + m, n + m);
    std::vector<std::uint8_t> seen(n + m, 0);
    std::queue<std::size_t> q;
    q.push(n + ej);
    seen[n + ej] = 1;
    while (!q.empty() && !seen[ei]) {
      const std::size_t node = q.front();
      q.pop();
      for (const auto& [nb, k] : adj[node]) {
        if (seen[nb]) continue;
        seen[nb] = 1;
        parent[nb] = node;
        parent_edge[nb] = static_cast<std::ptrdiff_t>(k);
        q.push(nb);
      }
    }
    // Edges along ei -> ... -> ej; walking back from ei the signs alternate
    // starting with '-'.
    std::vector<std::size_t> cycle;
    for (std::size_t node = ei; node != n + ej; node = parent[node])
      cycle.push_back(static_cast<std::size_t>(parent_edge[node]));
    double theta = std::numeric_limits<double>::infinity();
    std::size_t leave = basis.size();
    for (std::size_t k = 0; k < cycle.size(); k += 2) {
      const auto& c = basis[cycle[k]];
      const bool better = c.flow < theta ||
                          (bland && c.flow == theta && leave < basis.size() &&
                           c.i * m + c.j < basis[leave].i * m + basis[leave].j);
      if (better) {
        theta = c.flow;
        leave = cycle[k];
      }
    }
    for (std::size_t k = 0; k < cycle.size(); ++k) {
      auto& c = basis[cycle[k]];
      c.flow = (k % 2 == 0) ? std::max(0.0, c.flow - theta) : c.flow + theta;
    }
    degenerate_run = theta > 0.0 ? 0 : degenerate_run + 1;
    is_basic[basis[leave].i * m + basis[leave].j] = 0;
    basis[leave] = {ei, ej, theta};
    is_basic[ei * m + ej] = 1;
  }

  plan.weights = DenseMatrix(n, m);
  for (const auto& c : basis) plan.weights(c.i, c.j) = c.flow;
  plan.cost = plan_cost(plan.weights, C);
  plan.u = u;
  plan.v = v;
  plan.min_reduced_cost = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) plan.min_reduced_cost = std::min(plan.min_reduced_cost, C(i, j) - u[i] - v[j]);
  for (std::size_t i = 0; i < n; ++i) plan.dual_objective += a_in[i] * u[i];
  for (std::size_t j = 0; j < m; ++j) plan.dual_objective += b_in[j] * v[j];
  return plan;
}

TransportPlan kantorovich(const ParticleMeasure& mu, const ParticleMeasure& nu, const CostMatrix& C) {
  if (mu.dim != nu.dim) throw DimensionError("measures differ in dimension");
  if (C.values.rows != mu.size() || C.values.cols != nu.size())
    throw InvalidArgument("cost matrix shape does not match the measures");
  if (mu.size() <= 64 && nu.size() <= 64) return kantorovich_exact(mu.weights, nu.weights, C.values);
  const SinkhornResult s = sinkhorn(mu.weights, nu.weights, C.values);
  TransportPlan plan;
  plan.weights = s.plan;
  plan.cost = s.cost;
  plan.exact = false;
  plan.epsilon = s.epsilon;
  plan.epsilon_gap = s.epsilon * std::log(static_cast<double>(mu.size() * nu.size()));
  return plan;
}

// --- actions along characteristics -----------------------------------------

double flow_action(const PhasePoint& z, double t, double step, const Potential& V, double mass) {
  const auto traj = flow_trajectory(z, t, step, V, mass);
  if (traj.size() < 2) return 0.0;
  const double h = t / static_cast<double>(traj.size() - 1);
  double a = 0.0;
  for (std::size_t s = 0; s < traj.size(); ++s) {
    const Point vel{traj[s].z.p[0] / mass, traj[s].z.p[1] / mass};
    const double w = (s == 0 || s + 1 == traj.size()) ? 0.5 * h : h;
    a += w * lagrangian_eval(traj[s].z.x, vel, V, mass);
  }
  return a;
}

FlowAction flow_action(const Point& x, const WeakKamSolution& S, double t, double step,
                       const Potential& V, double mass) {
  if (!S.in_domain(x)) throw ParticleOutsideDomain("flow action: start point outside dom grad S+", 0);
  const PhasePoint z{wrap_point(x, V.dim()), S.gradient_at(x)};
  FlowAction r;
  const auto traj = flow_trajectory(z, t, step, V, mass);
  for (const auto& s : traj)
    if (!S.in_domain(s.z.x)) ++r.exit_samples;
  r.action = flow_action(z, t, step, V, mass);
  return r;
}

DisplacementReport displacement_check(const ParticleMeasure& sigma0, const WeakKamSolution& S, double t,
                                      const Potential& V, double mass, const DisplacementConfig& cfg) {
  if (!(t > 0.0)) throw InvalidArgument("displacement check needs t > 0");
  DisplacementReport rep;
  rep.atoms = sigma0.size();
  rep.t = t;
  std::vector<Point> targets;
  targets.reserve(sigma0.size());
  for (std::size_t i = 0; i < sigma0.size(); ++i) {
    const FlowAction fa = flow_action(sigma0.points[i], S, t, cfg.step, V, mass);
    rep.flow_action += sigma0.weights[i] * fa.action;
    rep.exit_samples += fa.exit_samples;
    targets.push_back(flow_graph_map(sigma0.points[i], S, t, cfg.step, V, mass));
  }
  ParticleMeasure sigma_t = sigma0;
  sigma_t.points = targets;
  rep.costs = cost_matrix(sigma0.points, targets, t, cfg.path_nodes, V, mass, cfg.winding_range);
  for (std::size_t i = 0; i < sigma0.size(); ++i) rep.graph_cost += sigma0.weights[i] * rep.costs(i, i);
  rep.plan = kantorovich(sigma0, sigma_t, rep.costs);
  rep.exact = rep.plan.exact;
  rep.optimal_cost = rep.plan.cost;
  rep.gap_flow = rep.flow_action - rep.optimal_cost;
  rep.gap_graph = rep.graph_cost - rep.optimal_cost;
  const double denom = std::abs(rep.optimal_cost) < 1e-12 ? 1.0 : std::abs(rep.optimal_cost);
  rep.rel_gap_flow = rep.gap_flow / denom;
  rep.rel_gap_graph = rep.gap_graph / denom;
  return rep;
}

}  // namespace toruswkb
