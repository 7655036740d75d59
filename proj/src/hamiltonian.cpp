#include "toruswkb/hamiltonian.hpp"

#include <algorithm>
#include <cmath>

#include "toruswkb/weak_kam.hpp"

namespace toruswkb {

Potential Potential::zero(const TorusGrid& grid) {
  Analytic a{[](const Point&) { return 0.0; }, [](const Point&) { return Point{0.0, 0.0}; },
             [](const Point&) { return Hessian2{0.0, 0.0, 0.0}; }};
  return from_analytic(grid, std::move(a), "zero");
}

Potential Potential::cosine(const TorusGrid& grid, double amplitude) {
  if (grid.dim() == 1) {
    Analytic a{[amplitude](const Point& x) { return amplitude * std::cos(x[0]); },
               [amplitude](const Point& x) { return Point{-amplitude * std::sin(x[0]), 0.0}; },
               [amplitude](const Point& x) { return Hessian2{-amplitude * std::cos(x[0]), 0.0, 0.0}; }};
    return from_analytic(grid, std::move(a), "cosine");
  }
  Analytic a{
      [amplitude](const Point& x) { return amplitude * (std::cos(x[0]) + 0.5 * std::cos(x[1])); },
      [amplitude](const Point& x) {
        return Point{-amplitude * std::sin(x[0]), -0.5 * amplitude * std::sin(x[1])};
      },
      [amplitude](const Point& x) {
        return Hessian2{-amplitude * std::cos(x[0]), 0.0, -0.5 * amplitude * std::cos(x[1])};
      }};
  return from_analytic(grid, std::move(a), "cosine");
}

Potential Potential::two_mode(const TorusGrid& grid, std::array<double, 2> amp,
                              std::array<double, 2> ph) {
  if (grid.dim() == 1) {
    Analytic a{
        [amp, ph](const Point& x) {
          return amp[0] * std::cos(x[0] + ph[0]) + amp[1] * std::cos(2.0 * x[0] + ph[1]);
        },
        [amp, ph](const Point& x) {
          return Point{-amp[0] * std::sin(x[0] + ph[0]) - 2.0 * amp[1] * std::sin(2.0 * x[0] + ph[1]),
                       0.0};
        },
        [amp, ph](const Point& x) {
          return Hessian2{
              -amp[0] * std::cos(x[0] + ph[0]) - 4.0 * amp[1] * std::cos(2.0 * x[0] + ph[1]), 0.0,
              0.0};
        }};
    return from_analytic(grid, std::move(a), "two-mode");
  }
  Analytic a{
      [amp, ph](const Point& x) {
        return amp[0] * std::cos(x[0] + ph[0]) + amp[1] * std::cos(x[1] + ph[1]);
      },
      [amp, ph](const Point& x) {
        return Point{-amp[0] * std::sin(x[0] + ph[0]), -amp[1] * std::sin(x[1] + ph[1])};
      },
      [amp, ph](const Point& x) {
        return Hessian2{-amp[0] * std::cos(x[0] + ph[0]), 0.0, -amp[1] * std::cos(x[1] + ph[1])};
      }};
  return from_analytic(grid, std::move(a), "two-mode");
}

Potential Potential::from_analytic(const TorusGrid& grid, Analytic analytic, std::string name) {
  Potential V;
  V.samples_ = sample(grid, analytic.value);
  for (double v : V.samples_.values)
    if (!std::isfinite(v)) throw InvalidArgument("potential samples must be finite");
  V.analytic_ = std::move(analytic);
  V.name_ = std::move(name);
  return V;
}

Potential Potential::from_samples(ScalarField samples, std::string name) {
  for (double v : samples.values)
    if (!std::isfinite(v)) throw InvalidArgument("potential samples must be finite");
  Potential V;
  SpectralPlan plan(samples.grid);
  V.coeffs_.assign(samples.values.begin(), samples.values.end());
  plan.forward(V.coeffs_);
  V.samples_ = std::move(samples);
  V.name_ = std::move(name);
  return V;
}

double Potential::value(const Point& x) const {
  if (analytic_) return analytic_->value(x);
  double v = 0.0;
  for (std::size_t j = 0; j < coeffs_.size(); ++j) {
    const auto k = frequency_vector(grid(), j);
    const double phase = k[0] * x[0] + (dim() == 2 ? k[1] * x[1] : 0.0);
    v += (coeffs_[j] * std::polar(1.0, phase)).real();
  }
  return v;
}

Point Potential::gradient(const Point& x) const {
  if (analytic_) return analytic_->gradient(x);
  const int n = grid().points_per_dim();
  Point g{0.0, 0.0};
  for (std::size_t j = 0; j < coeffs_.size(); ++j) {
    const auto k = frequency_vector(grid(), j);
    const double phase = k[0] * x[0] + (dim() == 2 ? k[1] * x[1] : 0.0);
    const Complex e = coeffs_[j] * std::polar(1.0, phase) * Complex(0.0, 1.0);
    for (int a = 0; a < dim(); ++a)
      if (k[a] != -n / 2) g[a] += (e * static_cast<double>(k[a])).real();
  }
  return g;
}

Hessian2 Potential::hessian(const Point& x) const {
  if (analytic_) return analytic_->hessian(x);
  const int n = grid().points_per_dim();
  Hessian2 h{0.0, 0.0, 0.0};
  for (std::size_t j = 0; j < coeffs_.size(); ++j) {
    const auto k = frequency_vector(grid(), j);
    if (k[0] == -n / 2 || (dim() == 2 && k[1] == -n / 2)) continue;
    const double phase = k[0] * x[0] + (dim() == 2 ? k[1] * x[1] : 0.0);
    const double re = (coeffs_[j] * std::polar(1.0, phase)).real();
    h[0] -= k[0] * k[0] * re;
    h[1] -= k[0] * k[1] * re;
    h[2] -= k[1] * k[1] * re;
  }
  return h;
}

Potential Potential::resampled(const TorusGrid& g) const {
  if (g.dim() != dim()) throw DimensionError("cannot resample a potential across dimensions");
  if (analytic_) return from_analytic(g, *analytic_, name_);
  return from_samples(sample(g, [this](const Point& x) { return value(x); }), name_);
}

double critical_value(const Potential& V) {
  const auto& s = V.samples().values;
  double best = *std::max_element(s.begin(), s.end());
  if (V.has_analytic()) {
    const TorusGrid& g = V.grid();
    const int fine = g.points_per_dim() * 8;
    const double h = kTwoPi / fine;
    if (g.dim() == 1) {
      for (int i = 0; i < fine; ++i) best = std::max(best, V.value({i * h, 0.0}));
    } else {
      for (int i = 0; i < fine; ++i)
        for (int j = 0; j < fine; ++j) best = std::max(best, V.value({i * h, j * h}));
    }
  }
  return best;
}

std::size_t argmax_node(const Potential& V) {
  const auto& s = V.samples().values;
  return static_cast<std::size_t>(std::max_element(s.begin(), s.end()) - s.begin());
}

double ham_eval(const PhasePoint& z, const Potential& V, double mass) {
  double p2 = z.p[0] * z.p[0];
  if (V.dim() == 2) p2 += z.p[1] * z.p[1];
  return p2 / (2.0 * mass) + V.value(z.x);
}

double lagrangian_eval(const Point& x, const Point& v, const Potential& V, double mass) {
  double v2 = v[0] * v[0];
  if (V.dim() == 2) v2 += v[1] * v[1];
  return 0.5 * mass * v2 - V.value(x);
}

long flow_step_count(double t, double step) {
  if (!(step > 0.0)) throw InvalidArgument("flow step must be positive");
  if (t == 0.0) return 0;
  return std::max(1L, std::lround(std::abs(t) / step));
}

PhasePoint verlet_step(const PhasePoint& z, double h, const Potential& V, double mass) {
  const int dim = V.dim();
  PhasePoint out = z;
  Point g = V.gradient(out.x);
  for (int a = 0; a < dim; ++a) out.p[a] -= 0.5 * h * g[a];
  for (int a = 0; a < dim; ++a) out.x[a] = wrap_angle(out.x[a] + h * out.p[a] / mass);
  g = V.gradient(out.x);
  for (int a = 0; a < dim; ++a) out.p[a] -= 0.5 * h * g[a];
  return out;
}

PhasePoint flow(const PhasePoint& z, double t, double step, const Potential& V, double mass) {
  if (t < 0.0) throw InvalidArgument("flow time must be nonnegative");
  const long n = flow_step_count(t, step);
  PhasePoint cur{wrap_point(z.x, V.dim()), z.p};
  if (n == 0) return cur;
  const double h = t / static_cast<double>(n);
  for (long s = 0; s < n; ++s) cur = verlet_step(cur, h, V, mass);
  return cur;
}

std::vector<TrajectorySample> flow_trajectory(const PhasePoint& z, double t, double step,
                                              const Potential& V, double mass) {
  if (t < 0.0) throw InvalidArgument("flow time must be nonnegative");
  const long n = flow_step_count(t, step);
  PhasePoint cur{wrap_point(z.x, V.dim()), z.p};
  std::vector<TrajectorySample> out;
  out.reserve(static_cast<std::size_t>(n) + 1);
  out.push_back({0.0, cur, ham_eval(cur, V, mass)});
  if (n == 0) return out;
  const double h = t / static_cast<double>(n);
  for (long s = 1; s <= n; ++s) {
    cur = verlet_step(cur, h, V, mass);
    out.push_back({s * h, cur, ham_eval(cur, V, mass)});
  }
  return out;
}

Point flow_graph_map(const Point& x, const WeakKamSolution& S, double t, double step,
                     const Potential& V, double mass) {
  if (!S.in_domain(x)) throw ParticleOutsideDomain("point outside dom grad S+", 0);
  const PhasePoint z{wrap_point(x, V.dim()), S.gradient_at(x)};
  return flow(z, t, step, V, mass).x;
}

}  // namespace toruswkb
