#include "toruswkb/wigner.hpp"

#include <algorithm>
#include <cmath>

namespace toruswkb {

double MomentumProfile::value(const Point& xi, int dim) const {
  if (kind == Kind::Unit) return 1.0;
  double r2 = (xi[0] - center[0]) * (xi[0] - center[0]);
  if (dim == 2) r2 += (xi[1] - center[1]) * (xi[1] - center[1]);
  r2 /= radius * radius;
  if (r2 >= 1.0) return 0.0;
  return std::exp(1.0 - 1.0 / (1.0 - r2));
}

double TestSymbol::value(const Point& x, const Point& xi) const {
  double v = 0.0;
  for (const auto& t : terms) {
    const double ph = t.q[0] * x[0] + (dim == 2 ? t.q[1] * x[1] : 0.0);
    v += (t.cos_coeff * std::cos(ph) + t.sin_coeff * std::sin(ph)) * t.profile.value(xi, dim);
  }
  return v;
}

TestSymbol unit_symbol(int dim) {
  TestSymbol b;
  b.dim = dim;
  b.id = "unit";
  b.terms.push_back({{0, 0}, 1.0, 0.0, MomentumProfile::unit()});
  return b;
}

std::vector<TestSymbol> standard_battery(int dim, int max_mode, double bump_radius) {
  std::vector<TestSymbol> out;
  for (const auto& mode : standard_modes(dim, max_mode)) {
    TestSymbol b;
    b.dim = dim;
    b.id = std::string(mode.sine ? "sin" : "cos") + "_q" + std::to_string(mode.q[0]) +
           (dim == 2 ? "_" + std::to_string(mode.q[1]) : std::string());
    b.terms.push_back({mode.q, mode.sine ? 0.0 : 1.0, mode.sine ? 1.0 : 0.0,
                       MomentumProfile::bump(bump_radius)});
    out.push_back(std::move(b));
  }
  return out;
}

double battery_radius(const Potential& V, double mass) {
  const auto& s = V.samples().values;
  const double vmin = *std::min_element(s.begin(), s.end());
  return std::sqrt(2.0 * mass * std::max(0.0, critical_value(V) - vmin)) + 1.0;
}

void check_momentum_window(const TestSymbol& b, const TorusGrid& grid, double hbar) {
  if (b.dim != grid.dim()) throw DimensionError("symbol and wave function differ in dimension");
  const double window = hbar * grid.points_per_dim() / 4.0;
  for (const auto& t : b.terms) {
    if (t.profile.kind != MomentumProfile::Kind::Bump) continue;
    for (int a = 0; a < grid.dim(); ++a)
      if (std::abs(t.profile.center[a]) + t.profile.radius > window)
        throw MomentumWindowExceeded("symbol momentum support exceeds hbar N / 4 = " + std::to_string(window));
  }
}

namespace {

// One exponential part c * exp(i q.y) * chi(xi) of a symbol.
struct ExpPart {
  std::array<int, 2> q;
  Complex coeff;
  const MomentumProfile* profile;
};

std::vector<ExpPart> expand(const TestSymbol& b) {
  std::vector<ExpPart> parts;
  for (const auto& t : b.terms) {
    if (t.q[0] == 0 && t.q[1] == 0) {
      parts.push_back({t.q, Complex(t.cos_coeff, 0.0), &t.profile});
      continue;
    }
    parts.push_back({t.q, Complex(0.5 * t.cos_coeff, -0.5 * t.sin_coeff), &t.profile});
    parts.push_back({{-t.q[0], -t.q[1]}, Complex(0.5 * t.cos_coeff, 0.5 * t.sin_coeff), &t.profile});
  }
  return parts;
}

// K(x_r) = sum_k chi(hbar k / 2) exp(i k.x_r) over the grid frequencies.
std::vector<Complex> symbol_kernel(const MomentumProfile& chi, const TorusGrid& g, double hbar,
                                   SpectralPlan& plan) {
  std::vector<Complex> k(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto f = frequency_vector(g, i);
    k[i] = chi.value({0.5 * hbar * f[0], 0.5 * hbar * f[1]}, g.dim());
  }
  plan.inverse(k);
  return k;
}

Complex plane_wave(const std::array<int, 2>& q, const Point& x) {
  return std::polar(1.0, q[0] * x[0] + q[1] * x[1]);
}

}  // namespace

ComplexField weyl_quantize_apply(const TestSymbol& b, const WaveFunction& psi) {
  const TorusGrid& g = psi.grid;
  check_momentum_window(b, g, psi.hbar);
  SpectralPlan plan(g);
  ComplexField out(g);
  const double pref = std::pow(g.spacing() / kTwoPi, g.dim());
  for (const auto& part : expand(b)) {
    const auto K = symbol_kernel(*part.profile, g, psi.hbar, plan);
    std::vector<Complex> ey(g.size());
    for (std::size_t j = 0; j < g.size(); ++j) ey[j] = plane_wave(part.q, g.node(j));
    for (std::size_t i = 0; i < g.size(); ++i) {
      const auto mi = g.multi_index(i);
      Complex acc = 0.0;
      for (std::size_t j = 0; j < g.size(); ++j) {
        const auto mj = g.multi_index(j);
        const std::size_t r = g.index(mi[0] - mj[0], mi[1] - mj[1]);
        const std::size_t refl = g.index(2L * mj[0] - mi[0], 2L * mj[1] - mi[1]);
        acc += ey[j] * K[r] * psi.values[refl];
      }
      out.values[i] += part.coeff * pref * acc;
    }
  }
  return out;
}

Complex pairing_complex(const WaveFunction& psi, const TestSymbol& b) {
  const TorusGrid& g = psi.grid;
  check_momentum_window(b, g, psi.hbar);
  SpectralPlan plan(g);
  const std::size_t n = g.size();
  std::vector<Complex> cpsi = psi.values;
  plan.forward(cpsi);
  const double nd = static_cast<double>(n);
  const double h2 = std::pow(g.cell_volume(), 2);
  Complex total = 0.0;
  for (const auto& part : expand(b)) {
    const auto K = symbol_kernel(*part.profile, g, psi.hbar, plan);
    // R(s) = sum_i e^{i q.x_i} conj(psi_i) psi_{i+s}
    std::vector<Complex> u(n);
    for (std::size_t i = 0; i < n; ++i) u[i] = plane_wave(part.q, g.node(i)) * std::conj(psi.values[i]);
    plan.forward(u);
    std::vector<Complex> w(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto mi = g.multi_index(i);
      w[i] = u[g.index(-static_cast<long>(mi[0]), -static_cast<long>(mi[1]))] * cpsi[i];
    }
    plan.inverse(w);
    Complex acc = 0.0;
    for (std::size_t m = 0; m < n; ++m) {
      const auto mm = g.multi_index(m);
      const std::size_t neg = g.index(-static_cast<long>(mm[0]), -static_cast<long>(mm[1]));
      const std::size_t twice = g.index(2L * mm[0], 2L * mm[1]);
      acc += plane_wave(part.q, g.node(m)) * K[neg] * nd * w[twice];
    }
    total += part.coeff * acc * h2 / std::pow(kTwoPi, g.dim());
  }
  return total;
}

double pairing(const WaveFunction& psi, const TestSymbol& b) {
  const Complex z = pairing_complex(psi, b);
  if (std::abs(z.imag()) > 1e-8)
    throw Error("pairing of a real symbol has imaginary part " + std::to_string(z.imag()));
  return z.real();
}

double classical_pairing(const TestSymbol& b, const PhaseParticleMeasure& omega) {
  double s = 0.0;
  for (std::size_t i = 0; i < omega.size(); ++i) s += omega.weights[i] * b.value(omega.points[i].x, omega.points[i].p);
  return s;
}

// --- Husimi ------------------------------------------------------------------

std::size_t HusimiField::momentum_count() const {
  const std::size_t side = 2 * static_cast<std::size_t>(kmax) + 1;
  return grid.dim() == 1 ? side : side * side;
}

Point HusimiField::momentum(std::size_t m) const {
  const std::size_t side = 2 * static_cast<std::size_t>(kmax) + 1;
  if (grid.dim() == 1) return {hbar * (static_cast<double>(m) - kmax), 0.0};
  return {hbar * (static_cast<double>(m / side) - kmax), hbar * (static_cast<double>(m % side) - kmax)};
}

double HusimiField::mass() const {
  double s = 0.0;
  for (double v : values) s += v;
  return s * grid.cell_volume() * std::pow(hbar, grid.dim());
}

HusimiField husimi(const WaveFunction& psi, double p_window) {
  const TorusGrid& g = psi.grid;
  const int dim = g.dim();
  const int N = g.points_per_dim();
  const double hbar = psi.hbar;
  HusimiField H;
  H.grid = g;
  H.hbar = hbar;
  H.kmax = static_cast<int>(std::floor(p_window / hbar));
  if (H.kmax < 1) throw InvalidArgument("Husimi momentum window holds no lattice momentum");
  if (H.kmax > N / 2) throw InvalidArgument("Husimi momentum window exceeds the grid frequencies");

  // periodized coherent-state profile
  SpectralPlan plan(g);
  std::vector<Complex> cg(g.size());
  const double norm = std::pow(std::numbers::pi * hbar, -0.25 * dim);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const Point x = g.node(i);
    double val = norm;
    for (int a = 0; a < dim; ++a) {
      double s = 0.0;
      for (int nu = -1; nu <= 1; ++nu) {
        const double r = x[a] + kTwoPi * nu;
        s += std::exp(-r * r / (2.0 * hbar));
      }
      val *= s;
    }
    cg[i] = val;
  }
  plan.forward(cg);
  std::vector<Complex> cpsi = psi.values;
  plan.forward(cpsi);

  const std::size_t count = H.momentum_count();
  H.values.assign(count * g.size(), 0.0);
  const double pref = std::pow(kTwoPi, dim);
  const double scale = 1.0 / std::pow(kTwoPi * hbar, dim);
  std::vector<Complex> f(g.size());
  for (std::size_t m = 0; m < count; ++m) {
    const Point p = H.momentum(m);
    const std::array<long, 2> k{std::lround(p[0] / hbar), std::lround(p[1] / hbar)};
    for (std::size_t i = 0; i < g.size(); ++i) {
      const auto fk = frequency_vector(g, i);
      bool inside = true;
      std::array<long, 2> s{0, 0};
      for (int a = 0; a < dim; ++a) {
        s[a] = fk[a] + k[a];
        if (s[a] < -N / 2 || s[a] >= N / 2) inside = false;
      }
      f[i] = inside ? cg[i] * cpsi[g.index(s[0], s[1])] : Complex(0.0);
    }
    plan.inverse(f);
    for (std::size_t i = 0; i < g.size(); ++i) H.values[m * g.size() + i] = std::norm(pref * f[i]) * scale;
  }

  double shell = 0.0;
  for (std::size_t m = 0; m < count; ++m) {
    const Point p = H.momentum(m);
    bool edge = false;
    for (int a = 0; a < dim; ++a)
      if (std::lround(std::abs(p[a]) / hbar) == H.kmax) edge = true;
    if (!edge) continue;
    for (std::size_t i = 0; i < g.size(); ++i) shell += H.values[m * g.size() + i];
  }
  shell *= g.cell_volume() * std::pow(hbar, dim);
  if (shell > 0.01 * H.mass())
    throw WindowTooSmall("Husimi window edge carries " + std::to_string(shell / H.mass() * 100.0) +
                         "% of the mass");
  return H;
}

GridMeasure husimi_position_marginal(const HusimiField& H) {
  GridMeasure out{H.grid, std::vector<double>(H.grid.size(), 0.0)};
  for (std::size_t m = 0; m < H.momentum_count(); ++m)
    for (std::size_t i = 0; i < H.grid.size(); ++i) out.density[i] += H.at(m, i);
  double mass = 0.0;
  for (double d : out.density) mass += d;
  mass *= H.grid.cell_volume();
  if (!(mass > 0.0)) throw EmptySupport("Husimi field carries no mass");
  for (double& d : out.density) d /= mass;
  return out;
}

double husimi_tube_mass(const HusimiField& H, const WeakKamSolution& S, double radius) {
  double inside = 0.0, total = 0.0;
  std::vector<Point> grad(H.grid.size());
  for (std::size_t i = 0; i < H.grid.size(); ++i) grad[i] = S.gradient_at(H.grid.node(i));
  for (std::size_t m = 0; m < H.momentum_count(); ++m) {
    const Point p = H.momentum(m);
    for (std::size_t i = 0; i < H.grid.size(); ++i) {
      const double v = H.at(m, i);
      total += v;
      const double d = std::hypot(p[0] - grad[i][0], H.grid.dim() == 2 ? p[1] - grad[i][1] : 0.0);
      if (d <= radius) inside += v;
    }
  }
  return total > 0.0 ? inside / total : 0.0;
}

}  // namespace toruswkb
