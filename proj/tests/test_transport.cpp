#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "toruswkb/transport.hpp"

using namespace toruswkb;

namespace {

LaxOleinikConfig step(double dt) {
  LaxOleinikConfig c;
  c.dt = dt;
  return c;
}

// Greedy fill of a random visiting order: always a feasible coupling.
DenseMatrix random_plan(const std::vector<double>& a, const std::vector<double>& b, std::mt19937_64& rng) {
  std::vector<std::pair<std::size_t, std::size_t>> cells;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) cells.push_back({i, j});
  std::shuffle(cells.begin(), cells.end(), rng);
  std::vector<double> ra = a, rb = b;
  DenseMatrix P(a.size(), b.size());
  for (auto [i, j] : cells) {
    const double w = std::min(ra[i], rb[j]);
    P(i, j) += w;
    ra[i] -= w;
    rb[j] -= w;
  }
  return P;
}

std::vector<Point> points_on(double lo, double hi, int n) {
  std::vector<Point> p;
  for (int i = 0; i < n; ++i) p.push_back({lo + (hi - lo) * (i + 0.5) / n, 0.0});
  return p;
}

}  // namespace

TEST_CASE("free minimal action") {
  const Potential V0 = Potential::zero(make_grid(1, 64));
  for (auto [x, y] : {std::pair{0.0, 1.0}, {0.5, 5.5}, {1.0, 1.0 + kPi - 0.01}}) {
    const ActionPath path = minimal_action_path({x, 0.0}, {y, 0.0}, 1.3, 32, 1, V0, 2.0);
    const double d = torus_distance({x, 0.0}, {y, 0.0}, 1);
    CHECK(std::abs(path.action - 2.0 * d * d / (2 * 1.3)) <= 1e-8);
    CHECK(path.gradient_norm <= 1e-8);
  }
  CHECK_THROWS_AS(minimal_action_path({0.0, 0.0}, {1.0, 0.0}, 1.0, 8, 1, V0, 1.0), InvalidArgument);
  CHECK_THROWS_AS(minimal_action_path({0.0, 0.0}, {1.0, 0.0}, 0.0, 32, 1, V0, 1.0), InvalidArgument);
}

TEST_CASE("minimal action for the cosine potential") {
  const Potential V = Potential::cosine(make_grid(1, 256));
  // near-constant path: action -t V(x) + O(t^3)
  const double t = 0.05, x = 1.2;
  const ActionPath still = minimal_action_path({x, 0.0}, {x, 0.0}, t, 16, 1, V, 1.0);
  CHECK(std::abs(still.action + t * std::cos(x)) <= t * t * t);

  const double a64 = minimal_action_path({0.0, 0.0}, {kPi, 0.0}, 1.0, 64, 1, V, 1.0).action;
  const double a128 = minimal_action_path({0.0, 0.0}, {kPi, 0.0}, 1.0, 128, 1, V, 1.0).action;
  CHECK(std::abs(a64 - a128) <= 1e-3);

  // splitting the time interval at any intermediate point cannot lower the cost
  const double whole = minimal_action_path({0.3, 0.0}, {2.5, 0.0}, 1.0, 64, 1, V, 1.0).action;
  double split = INFINITY;
  for (const Point& y : points_on(0.0, kTwoPi, 128))
    split = std::min(split, minimal_action_path({0.3, 0.0}, y, 0.5, 32, 1, V, 1.0).action +
                                minimal_action_path(y, {2.5, 0.0}, 0.5, 32, 1, V, 1.0).action);
  CHECK(whole <= split + 1e-3);
}

TEST_CASE("refining the path does not raise the action") {
  const Potential V = Potential::cosine(make_grid(1, 256));
  for (auto [x, y] : {std::pair{0.0, kPi}, {0.3, 2.5}})
    for (int M : {16, 32, 64}) {
      const double coarse = minimal_action_path({x, 0.0}, {y, 0.0}, 1.0, M, 1, V, 1.0).action;
      const double fine = minimal_action_path({x, 0.0}, {y, 0.0}, 1.0, 2 * M, 1, V, 1.0).action;
      CHECK(fine <= coarse + 1e-8);
    }
}

TEST_CASE("cost matrices") {
  const Potential V0 = Potential::zero(make_grid(1, 64));
  const auto X = points_on(0.0, kTwoPi, 9), Y = points_on(0.2, 6.0, 7);
  const CostMatrix C0 = cost_matrix(X, Y, 1.0, 32, V0, 1.0);
  for (std::size_t i = 0; i < X.size(); ++i)
    for (std::size_t j = 0; j < Y.size(); ++j) {
      const double d = torus_distance(X[i], Y[j], 1);
      CHECK(std::abs(C0(i, j) - d * d / 2) <= 1e-8);
    }

  const Potential V = Potential::cosine(make_grid(1, 256));
  const auto P = points_on(0.0, kTwoPi, 12);
  const CostMatrix C = cost_matrix(P, P, 1.0, 64, V, 1.0);
  double asym = 0.0;
  for (std::size_t i = 0; i < P.size(); ++i)
    for (std::size_t j = 0; j < P.size(); ++j) {
      asym = std::max(asym, std::abs(C(i, j) - C(j, i)));
      CHECK(C(i, j) >= -1.0 * critical_value(V) - 1e-6);
    }
  CHECK(asym <= 1e-6);
  // staying put at x costs at most -V(x)
  for (std::size_t i = 0; i < P.size(); ++i) CHECK(C(i, i) <= -std::cos(P[i][0]) + 1e-8);
}

TEST_CASE("exact Kantorovich solver") {
  // two atoms with weights (1/2, 1/2): plans [[s, 1/2 - s], [1/2 - s, s]]
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 2.0);
  for (int trial = 0; trial < 20; ++trial) {
    DenseMatrix K(2, 2);
    for (double& v : K.values) v = u(rng);
    const double best = 0.5 * std::min(K(0, 0) + K(1, 1), K(0, 1) + K(1, 0));
    const TransportPlan plan = kantorovich_exact({0.5, 0.5}, {0.5, 0.5}, K);
    CHECK(std::abs(plan.cost - best) <= 1e-6);
    CHECK(plan.exact);
  }

  // never beaten by random feasible plans; certified by its duals
  std::uniform_real_distribution<double> w(0.1, 1.0);
  for (int trial = 0; trial < 5; ++trial) {
    const std::size_t n = 7 + trial, m = 5 + 2 * trial;
    std::vector<double> a(n), b(m);
    for (double& v : a) v = w(rng);
    for (double& v : b) v = w(rng);
    const double sa = std::accumulate(a.begin(), a.end(), 0.0), sb = std::accumulate(b.begin(), b.end(), 0.0);
    for (double& v : a) v /= sa;
    for (double& v : b) v /= sb;
    DenseMatrix C(n, m);
    for (double& v : C.values) v = u(rng);
    const TransportPlan plan = kantorovich_exact(a, b, C);
    for (std::size_t i = 0; i < n; ++i) {
      double row = 0.0;
      for (std::size_t j = 0; j < m; ++j) row += plan.weights(i, j);
      CHECK(std::abs(row - a[i]) <= 1e-8);
    }
    CHECK(plan.min_reduced_cost >= -1e-9);
    CHECK(std::abs(plan.dual_objective - plan.cost) <= 1e-9);
    for (int k = 0; k < 100; ++k) CHECK(plan.cost <= plan_cost(random_plan(a, b, rng), C) + 1e-12);
  }

  // identical measures under the free cost
  const Potential V0 = Potential::zero(make_grid(1, 64));
  const ParticleMeasure mu = uniform_particles(1, points_on(0.0, kTwoPi, 10));
  const TransportPlan id = kantorovich(mu, mu, cost_matrix(mu.points, mu.points, 1.0, 16, V0, 1.0));
  CHECK(id.cost <= 1e-12);
  for (std::size_t i = 0; i < 10; ++i) CHECK(id.weights(i, i) == doctest::Approx(0.1));

  CHECK_THROWS_AS(kantorovich_exact({0.5, 0.5}, {0.2, 0.2}, DenseMatrix(2, 2, 1.0)), Infeasible);
}

TEST_CASE("large problems fall back to entropic transport") {
  const Potential V0 = Potential::zero(make_grid(1, 64));
  const ParticleMeasure mu = uniform_particles(1, points_on(0.0, kTwoPi, 80));
  const ParticleMeasure nu = uniform_particles(1, points_on(0.05, kTwoPi + 0.05, 80));
  const TransportPlan plan = kantorovich(mu, nu, cost_matrix(mu.points, nu.points, 1.0, 16, V0, 1.0));
  CHECK_FALSE(plan.exact);
  CHECK(plan.epsilon > 0.0);
  CHECK(plan.cost == doctest::Approx(0.05 * 0.05 / 2).epsilon(0.5));
}

TEST_CASE("action along characteristics") {
  const TorusGrid g0 = make_grid(1, 128);
  const WeakKamSolution flat = solve_weak_kam_plus(Potential::zero(g0), 1.0, {});
  const FlowAction rest = flow_action({1.0, 0.0}, flat, 1.0, 1e-3, Potential::zero(g0), 1.0);
  CHECK(rest.action == 0.0);
  CHECK(rest.exit_samples == 0);

  const TorusGrid g = make_grid(1, 4096);
  const Potential V = Potential::cosine(g);
  const WeakKamSolution S = solve_weak_kam_plus(V, 1.0, step(0.1));
  for (const Point& x : points_on(0.3, kPi - 0.2, 6)) {
    const PhasePoint z{x, S.gradient_at(x)};
    const double whole = flow_action(z, 1.0, 1e-3, V, 1.0);
    const double parts = flow_action(z, 0.5, 1e-3, V, 1.0) + flow_action(flow(z, 0.5, 1e-3, V, 1.0), 0.5, 1e-3, V, 1.0);
    CHECK(std::abs(whole - parts) <= 1e-8);

    // characteristics are minimizers: calibration against the discrete cost
    const Point y = flow_graph_map(x, S, 1.0, 1e-3, V, 1.0);
    const double c = minimal_action_path(x, y, 1.0, 64, 1, V, 1.0).action;
    CHECK(std::abs(flow_action(x, S, 1.0, 1e-3, V, 1.0).action - c) <= 1e-2);
  }
}

TEST_CASE("displacement interpolation") {
  const TorusGrid g0 = make_grid(1, 128);
  const Potential V0 = Potential::zero(g0);
  const WeakKamSolution flat = solve_weak_kam_plus(V0, 1.0, {});
  const ParticleMeasure atoms0 = uniform_particles(1, points_on(0.0, kTwoPi, 16));
  const DisplacementReport r0 = displacement_check(atoms0, flat, 1.0, V0, 1.0);
  CHECK(std::abs(r0.flow_action) <= 1e-12);
  CHECK(std::abs(r0.graph_cost) <= 1e-12);
  CHECK(std::abs(r0.optimal_cost) <= 1e-12);

  const TorusGrid g = make_grid(1, 1024);
  const Potential V = Potential::cosine(g);
  const WeakKamSolution S = solve_weak_kam_plus(V, 1.0, step(0.1));
  const ParticleMeasure atoms = uniform_particles(1, points_on(kPi / 2 - 0.5, kPi / 2 + 0.5, 48));
  const DisplacementReport r = displacement_check(atoms, S, 1.0, V, 1.0);
  CHECK(r.exact);
  CHECK(r.gap_graph >= -1e-8);
  CHECK(std::abs(r.rel_gap_flow) <= 0.02);
  CHECK(std::abs(r.rel_gap_graph) <= 0.02);
}
