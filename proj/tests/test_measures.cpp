#include <doctest.h>

#include <cmath>
#include <random>

#include "toruswkb/measures.hpp"
#include "toruswkb/weak_kam.hpp"

using namespace toruswkb;

namespace {

LaxOleinikConfig step(double dt) {
  LaxOleinikConfig c;
  c.dt = dt;
  return c;
}

const WeakKamSolution& flat_solution() {
  static const WeakKamSolution S = solve_weak_kam_plus(Potential::zero(make_grid(1, 256)), 1.0, {});
  return S;
}

const WeakKamSolution& cosine_solution() {
  static const WeakKamSolution S = solve_weak_kam_plus(Potential::cosine(make_grid(1, 4096)), 1.0, step(0.1));
  return S;
}

ParticleMeasure dirac(double x) { return uniform_particles(1, {{x, 0.0}}); }

GridMeasure uniform_density(const TorusGrid& g) {
  return {g, std::vector<double>(g.size(), 1.0 / std::pow(kTwoPi, g.dim()))};
}

ParticleMeasure random_particles(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, kTwoPi);
  std::vector<Point> pts(n);
  for (auto& p : pts) p = {u(rng), 0.0};
  return uniform_particles(1, pts);
}

// particles in [c - r, c + r]
ParticleMeasure interval_particles(double c, double r, int n) {
  std::vector<Point> pts;
  for (int i = 0; i < n; ++i) pts.push_back({c - r + 2 * r * (i + 0.5) / n, 0.0});
  return uniform_particles(1, pts);
}

}  // namespace

TEST_CASE("lift onto the graph of the gradient") {
  const ParticleMeasure sigma = random_particles(200, 1);
  const PhaseParticleMeasure flat = lift_graph(sigma, flat_solution());
  for (const auto& z : flat.points) CHECK(z.p[0] == 0.0);

  const WeakKamSolution& S = cosine_solution();
  const PhaseParticleMeasure one = lift_graph(dirac(1.0), S);
  CHECK(one.weights[0] == 1.0);
  CHECK(one.points[0].x[0] == 1.0);
  CHECK(one.points[0].p[0] == S.gradient_at({1.0, 0.0})[0]);

  // |p| = 2 |sin(x / 2)| for V = cos on both sides of the cut locus
  std::vector<Point> pts;
  for (int k = 0; k < 50; ++k) {
    pts.push_back({0.2 + k * (kPi - 0.5) / 49, 0.0});
    pts.push_back({kTwoPi - 0.2 - k * (kPi - 0.5) / 49, 0.0});
  }
  const PhaseParticleMeasure lifted = lift_graph(uniform_particles(1, pts), S);
  for (const auto& z : lifted.points) CHECK(std::abs(std::abs(z.p[0]) - 2 * std::abs(std::sin(z.x[0] / 2))) <= 1e-2);

  try {
    lift_graph(uniform_particles(1, {{1.0, 0.0}, {kPi, 0.0}}), S);
    FAIL("expected ParticleOutsideDomain");
  } catch (const ParticleOutsideDomain& e) {
    CHECK(e.index() == 1);
  }
}

TEST_CASE("phase-space pushforward") {
  const Potential V0 = Potential::zero(make_grid(1, 64));
  const Potential V = Potential::cosine(make_grid(1, 64));
  PhaseParticleMeasure omega;
  omega.dim = 1;
  for (int i = 0; i < 20; ++i) omega.points.push_back({{0.3 * i, 0.0}, {0.1 * (i - 10), 0.0}});
  omega.weights.assign(20, 1.0 / 20);

  const PhaseParticleMeasure same = pushforward_flow(omega, 0.0, 1e-3, V, 1.0);
  for (std::size_t i = 0; i < 20; ++i) {
    CHECK(same.points[i].x == omega.points[i].x);
    CHECK(same.points[i].p == omega.points[i].p);
  }

  PhaseParticleMeasure rest = omega;
  for (auto& z : rest.points) z.p = {0.0, 0.0};
  const PhaseParticleMeasure still = pushforward_flow(rest, 3.7, 1e-2, V0, 1.0);
  for (std::size_t i = 0; i < 20; ++i) CHECK(still.points[i].x == rest.points[i].x);

  const PhaseParticleMeasure full = pushforward_flow(omega, 1.0, 1e-3, V, 1.0);
  const PhaseParticleMeasure half = pushforward_flow(pushforward_flow(omega, 0.5, 1e-3, V, 1.0), 0.5, 1e-3, V, 1.0);
  for (std::size_t i = 0; i < 20; ++i) {
    CHECK(std::abs(min_image(full.points[i].x[0] - half.points[i].x[0])) <= 1e-6);
    CHECK(std::abs(full.points[i].p[0] - half.points[i].p[0]) <= 1e-6);
    CHECK(full.weights[i] == omega.weights[i]);
  }
}

TEST_CASE("projection and pushforward by maps") {
  const WeakKamSolution& S = flat_solution();
  const ParticleMeasure sigma = random_particles(300, 2);
  const ParticleMeasure back = project(lift_graph(sigma, S));
  CHECK(back.points == sigma.points);
  CHECK(back.weights == sigma.weights);
  const ParticleMeasure same = pushforward_map(sigma, [](const Point& x) { return x; });
  CHECK(same.points == sigma.points);

  // integrals against g after the map equal integrals of g o map
  const auto shift = [](const Point& x) { return Point{x[0] + 0.7 * std::sin(x[0]), 0.0}; };
  const ParticleMeasure moved = pushforward_map(sigma, shift);
  for (int q = 1; q <= 10; ++q)
    for (bool sine : {false, true}) {
      const SpatialMode g{{q, 0}, sine};
      double lhs = 0.0, rhs = 0.0;
      for (std::size_t i = 0; i < sigma.size(); ++i) {
        lhs += moved.weights[i] * g.value(moved.points[i]);
        rhs += sigma.weights[i] * g.value(shift(sigma.points[i]));
      }
      CHECK(std::abs(lhs - rhs) <= 1e-12);
    }
}

TEST_CASE("distance to the graph") {
  const WeakKamSolution& S = cosine_solution();
  const PhaseParticleMeasure omega = lift_graph(interval_particles(kPi / 2, 0.5, 100), S);
  CHECK(graph_distance(omega, S).distance <= 1e-12);

  PhaseParticleMeasure moving = lift_graph(random_particles(10, 3), flat_solution());
  for (auto& z : moving.points) z.p[0] = 0.5;
  CHECK(graph_distance(moving, flat_solution()).distance == doctest::Approx(0.5));
}

TEST_CASE("graph invariance along the flow on 1024 nodes") {
  const TorusGrid g = make_grid(1, 1024);
  const Potential V = Potential::cosine(g);
  const WeakKamSolution S = solve_weak_kam_plus(V, 1.0, step(0.1));
  const PhaseParticleMeasure omega = lift_graph(interval_particles(kPi / 2, 0.5, 400), S);
  const GraphDistance d = graph_distance(pushforward_flow(omega, 0.5, 1e-3, V, 1.0), S);
  CHECK(d.exit_count == 0);
  CHECK(d.distance <= 1e-2);
}

TEST_CASE("circular W1") {
  const ParticleMeasure mu = random_particles(50, 4);
  CHECK(w1_circle(mu, mu) == 0.0);
  CHECK(w1_circle(dirac(0.0), dirac(kPi)) == doctest::Approx(kPi).epsilon(1e-14));
  CHECK(w1_circle(dirac(0.0), dirac(1.5 * kPi)) == doctest::Approx(kPi / 2).epsilon(1e-14));
  CHECK(w1_circle(dirac(0.1), dirac(kTwoPi - 0.1)) == doctest::Approx(0.2));

  for (std::uint64_t s = 0; s < 20; ++s) {
    const ParticleMeasure a = random_particles(7, 10 * s + 1);
    const ParticleMeasure b = random_particles(11, 10 * s + 2);
    const ParticleMeasure c = random_particles(5, 10 * s + 3);
    CHECK(w1_circle(a, b) == doctest::Approx(w1_circle(b, a)).epsilon(1e-12));
    CHECK(w1_circle(a, c) <= w1_circle(a, b) + w1_circle(b, c) + 1e-12);
    CHECK(w1_circle(a, b) > 0.0);
  }
  ParticleMeasure two;
  two.dim = 2;
  CHECK_THROWS_AS(w1_circle(two, two), DimensionError);
}

TEST_CASE("Sinkhorn") {
  // identical marginals and a zero-diagonal cost
  const std::vector<double> a{0.25, 0.25, 0.5};
  DenseMatrix C(3, 3);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) C(i, j) = i == j ? 0.0 : 1.0 + i + j;
  SinkhornConfig cfg;
  cfg.epsilon = 1e-3;
  const SinkhornResult id = sinkhorn(a, a, C, cfg);
  CHECK(id.cost <= 1e-2 * 4.0);
  CHECK(id.marginal_error <= 1e-8);

  // two atoms: the plan family is P(t) = [[t, a0 - t], [b0 - t, 1 - a0 - b0 + t]]
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.1, 0.9), c(0.0, 3.0);
  for (int trial = 0; trial < 10; ++trial) {
    const double a0 = u(rng), b0 = u(rng);
    DenseMatrix K(2, 2);
    for (double& v : K.values) v = c(rng);
    const double lo = std::max(0.0, a0 + b0 - 1.0), hi = std::min(a0, b0);
    const auto cost = [&](double t) {
      return t * K(0, 0) + (a0 - t) * K(0, 1) + (b0 - t) * K(1, 0) + (1 - a0 - b0 + t) * K(1, 1);
    };
    const double best = std::min(cost(lo), cost(hi));
    SinkhornConfig fine;
    fine.epsilon = 1e-5;
    const SinkhornResult r = sinkhorn({a0, 1 - a0}, {b0, 1 - b0}, K, fine);
    CHECK(std::abs(r.cost - best) <= 1e-6);

    const SinkhornResult t = sinkhorn({b0, 1 - b0}, {a0, 1 - a0}, K.transposed(), fine);
    CHECK(std::abs(t.cost - r.cost) <= 1e-9);
  }
  SinkhornConfig once;
  once.epsilon = 1e-3;
  once.max_iters = 1;
  once.epsilon_scaling = false;
  DenseMatrix swap(2, 2, 0.0);
  swap(0, 1) = swap(1, 0) = 1.0;
  CHECK_THROWS_AS(sinkhorn({0.2, 0.8}, {0.7, 0.3}, swap, once), NonConvergence);
}

TEST_CASE("weak-form residuals of trivial paths") {
  const ParticleMeasure sigma = random_particles(500, 5);
  std::vector<TimedParticleMeasure> path;
  for (int s = 0; s <= 64; ++s) path.push_back({s / 64.0, sigma});
  const auto modes = standard_modes(1, 3);
  CHECK(continuity_residual(path, flat_solution(), 1.0, modes).max_residual <= 1e-6);
  const std::vector<SpatialMode> zero{{{0, 0}, true}};
  CHECK(continuity_residual(path, cosine_solution(), 1.0, zero).max_residual == 0.0);

  const Potential V = Potential::cosine(make_grid(1, 64));
  PhaseParticleMeasure eq;
  eq.dim = 1;
  eq.points = {{{0.0, 0.0}, {0.0, 0.0}}};
  eq.weights = {1.0};
  std::vector<TimedPhaseMeasure> ppath;
  for (int s = 0; s <= 64; ++s) ppath.push_back({s / 64.0, eq});
  CHECK(liouville_residual(ppath, V, 1.0, modes, MomentumCutoff{}).max_residual <= 1e-6);
  const std::vector<SpatialMode> constant{{{0, 0}, false}};
  CHECK(liouville_residual(ppath, V, 1.0, constant, MomentumCutoff{}).max_residual <= 1e-12);

  std::vector<TimedParticleMeasure> bad = path;
  bad[3].t += 1e-3;
  CHECK_THROWS_AS(continuity_residual(bad, flat_solution(), 1.0, modes), InvalidArgument);
}

TEST_CASE("weak-form residuals of a moving path") {
  // free motion at constant speed solves the continuity equation exactly
  const WeakKamSolution& S = flat_solution();
  const TorusGrid& g = S.grid();
  WeakKamSolution drift = S;
  for (std::size_t i = 0; i < g.size(); ++i) {
    drift.values.values[i] = 0.3 * g.node(i)[0];
    drift.gradient.values[i] = {0.3, 0.0};
  }
  const ParticleMeasure sigma = interval_particles(2.0, 0.5, 800);
  std::vector<TimedParticleMeasure> path;
  for (int s = 0; s <= 256; ++s) {
    const double t = s / 256.0;
    path.push_back({t, pushforward_map(sigma, [t](const Point& x) { return Point{x[0] + 0.3 * t, 0.0}; })});
  }
  CHECK(continuity_residual(path, drift, 1.0, standard_modes(1, 3)).max_residual <= 1e-6);
  CHECK(continuity_residual(path, S, 1.0, standard_modes(1, 3)).max_residual > 1e-2);
}

TEST_CASE("upwind advection") {
  const TorusGrid g = make_grid(1, 256);
  GridMeasure bump{g, std::vector<double>(g.size(), 0.0)};
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double d = g.node(i)[0] - 2.0;
    bump.density[i] = std::exp(-d * d / 0.1);
  }
  const double m = bump.mass();
  for (double& v : bump.density) v /= m;

  const UpwindResult still = advect_density_upwind(bump, flat_solution(), 1.0, 0.5, 0.5);
  CHECK(still.sigma.density == bump.density);

  const double c = 0.8, t = 1.5;
  const UpwindResult moved = advect_density_upwind(bump, constant_face_velocity(g, {c, 0.0}), t, 0.5);
  CHECK(std::abs(moved.sigma.mass() - 1.0) <= 1e-12);
  GridMeasure exact{g, std::vector<double>(g.size(), 0.0)};
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double d = min_image(g.node(i)[0] - 2.0 - c * t);
    exact.density[i] = std::exp(-d * d / 0.1) / m;
  }
  // first-order smearing: diffusion coefficient c h (1 - cfl) / 2 over time t
  const double smear = std::sqrt(c * g.spacing() * 0.5 * t);
  CHECK(w1_circle(moved.sigma, exact) <= smear);
  CHECK(w1_circle(moved.sigma, exact) <= 0.1);
  for (double v : moved.sigma.density) CHECK(v >= 0.0);

  const UpwindResult long_run = advect_density_upwind(bump, constant_face_velocity(g, {1.0, 0.0}),
                                                      1000 * 0.5 * g.spacing(), 0.5);
  CHECK(long_run.steps >= 1000);
  CHECK(std::abs(long_run.sigma.mass() - 1.0) <= 1e-12);

  CHECK_THROWS_AS(advect_density_upwind(bump, constant_face_velocity(g, {1.0, 0.0}), 1.0, 0.95), CflViolation);
  CHECK_THROWS_AS(advect_density_upwind(uniform_density(make_grid(1, 128)), flat_solution(), 1.0, 1.0, 0.5),
                  GridMismatch);
}

TEST_CASE("sampling between grids and particles") {
  const TorusGrid g = make_grid(1, 256);
  const GridMeasure flat = uniform_density(g);
  const ParticleMeasure p = grid_to_particles(flat, 4096, 11);
  CHECK(w1_circle(flat, p) <= 2 * g.spacing());
  CHECK(p.points == grid_to_particles(flat, 4096, 11).points);

  GridMeasure bump{g, std::vector<double>(g.size(), 0.0)};
  for (std::size_t i = 0; i < g.size(); ++i) bump.density[i] = 1.0 + std::cos(g.node(i)[0]);
  const double m = bump.mass();
  for (double& v : bump.density) v /= m;
  const ParticleMeasure many = grid_to_particles(bump, 100000, 12);
  const GridMeasure back = particles_to_grid(many, g, g.spacing());
  CHECK(std::abs(back.mass() - 1.0) <= 1e-10);
  CHECK(w1_circle(bump, back) <= 3 * g.spacing());

  GridMeasure cell{g, std::vector<double>(g.size(), 0.0)};
  cell.density[40] = 1.0 / g.spacing();
  const ParticleMeasure inside = grid_to_particles(cell, 500, 13);
  const double lo = g.node(40)[0] - 0.5 * g.spacing(), hi = g.node(40)[0] + 0.5 * g.spacing();
  for (const auto& x : inside.points) {
    CHECK(x[0] >= lo);
    CHECK(x[0] < hi);
  }

  const TorusGrid g2 = make_grid(2, 32);
  const ParticleMeasure p2 = grid_to_particles(uniform_density(g2), 2048, 14);
  CHECK(p2.dim == 2);
  CHECK(std::abs(particles_to_grid(p2, g2, g2.spacing()).mass() - 1.0) <= 1e-10);
}

TEST_CASE("projected flow equals the pushforward by the flow map") {
  const WeakKamSolution& S = cosine_solution();
  const Potential V = Potential::cosine(S.grid());
  const ParticleMeasure sigma = interval_particles(2.0, 0.5, 300);
  for (double t : {0.25, 1.0}) {
    const ParticleMeasure a = project(pushforward_flow(lift_graph(sigma, S), t, 1e-3, V, 1.0));
    const ParticleMeasure b =
        pushforward_map(sigma, [&](const Point& x) { return flow_graph_map(x, S, t, 1e-3, V, 1.0); });
    CHECK(a.points == b.points);
    CHECK(a.weights == b.weights);
  }
}
