#include "toruswkb/torus_grid.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <ostream>

namespace toruswkb {

namespace {

// FFTW's planner is not re-entrant.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

}  // namespace

double wrap_angle(double x) {
  double r = std::fmod(x, kTwoPi);
  if (r < 0.0) r += kTwoPi;
  if (r >= kTwoPi) r -= kTwoPi;
  return r;
}

Point wrap_point(const Point& p, int dim) {
  Point out{wrap_angle(p[0]), 0.0};
  if (dim == 2) out[1] = wrap_angle(p[1]);
  return out;
}

double min_image(double d) {
  double r = wrap_angle(d + std::numbers::pi) - std::numbers::pi;
  return r;
}

double torus_distance(const Point& a, const Point& b, int dim) {
  double s = 0.0;
  for (int k = 0; k < dim; ++k) {
    const double d = min_image(a[k] - b[k]);
    s += d * d;
  }
  return std::sqrt(s);
}

std::size_t TorusGrid::size() const {
  return dim_ == 1 ? static_cast<std::size_t>(n_)
                   : static_cast<std::size_t>(n_) * static_cast<std::size_t>(n_);
}

double TorusGrid::cell_volume() const { return dim_ == 1 ? spacing_ : spacing_ * spacing_; }

std::size_t TorusGrid::index(long i0, long i1) const {
  const long n = n_;
  long a = i0 % n;
  if (a < 0) a += n;
  if (dim_ == 1) return static_cast<std::size_t>(a);
  long b = i1 % n;
  if (b < 0) b += n;
  return static_cast<std::size_t>(a * n + b);
}

std::array<int, 2> TorusGrid::multi_index(std::size_t flat) const {
  if (dim_ == 1) return {static_cast<int>(flat), 0};
  return {static_cast<int>(flat / n_), static_cast<int>(flat % n_)};
}

Point TorusGrid::node(std::size_t flat) const {
  const auto mi = multi_index(flat);
  return {mi[0] * spacing_, dim_ == 2 ? mi[1] * spacing_ : 0.0};
}

TorusGrid make_grid(int dim, int points_per_dim) {
  if (dim != 1 && dim != 2) throw InvalidArgument("grid dimension must be 1 or 2");
  if (!is_power_of_two(points_per_dim) || points_per_dim < 8)
    throw InvalidArgument("points per dimension must be a power of two >= 8, got " +
                          std::to_string(points_per_dim));
  TorusGrid g;
  g.dim_ = dim;
  g.n_ = points_per_dim;
  g.spacing_ = kTwoPi / points_per_dim;
  return g;
}

ScalarField::ScalarField(const TorusGrid& g, std::vector<double> v) : grid(g), values(std::move(v)) {
  if (values.size() != grid.size()) throw GridMismatch("scalar field size does not match grid");
}

ComplexField::ComplexField(const TorusGrid& g, std::vector<Complex> v)
    : grid(g), values(std::move(v)) {
  if (values.size() != grid.size()) throw GridMismatch("complex field size does not match grid");
}

// --- spectral --------------------------------------------------------------

SpectralPlan::SpectralPlan(const TorusGrid& grid) : grid_(grid), scratch_(grid.size()) {
  std::lock_guard<std::mutex> lock(planner_mutex());
  auto* buf = reinterpret_cast<fftw_complex*>(scratch_.data());
  const int n = grid.points_per_dim();
  if (grid.dim() == 1) {
    forward_plan_ = fftw_plan_dft_1d(n, buf, buf, FFTW_FORWARD, FFTW_ESTIMATE | FFTW_UNALIGNED);
    inverse_plan_ = fftw_plan_dft_1d(n, buf, buf, FFTW_BACKWARD, FFTW_ESTIMATE | FFTW_UNALIGNED);
  } else {
    forward_plan_ = fftw_plan_dft_2d(n, n, buf, buf, FFTW_FORWARD, FFTW_ESTIMATE | FFTW_UNALIGNED);
    inverse_plan_ = fftw_plan_dft_2d(n, n, buf, buf, FFTW_BACKWARD, FFTW_ESTIMATE | FFTW_UNALIGNED);
  }
}

SpectralPlan::~SpectralPlan() {
  std::lock_guard<std::mutex> lock(planner_mutex());
  fftw_destroy_plan(static_cast<fftw_plan>(forward_plan_));
  fftw_destroy_plan(static_cast<fftw_plan>(inverse_plan_));
}

void SpectralPlan::forward(std::vector<Complex>& data) const {
  if (data.size() != grid_.size()) throw GridMismatch("spectral buffer size does not match grid");
  auto* p = reinterpret_cast<fftw_complex*>(data.data());
  fftw_execute_dft(static_cast<fftw_plan>(forward_plan_), p, p);
  const double scale = 1.0 / static_cast<double>(grid_.size());
  for (auto& c : data) c *= scale;
}

void SpectralPlan::inverse(std::vector<Complex>& data) const {
  if (data.size() != grid_.size()) throw GridMismatch("spectral buffer size does not match grid");
  auto* p = reinterpret_cast<fftw_complex*>(data.data());
  fftw_execute_dft(static_cast<fftw_plan>(inverse_plan_), p, p);
}

ComplexField spectral_transform(const ComplexField& field, TransformDirection direction) {
  SpectralPlan plan(field.grid);
  ComplexField out = field;
  if (direction == TransformDirection::Forward)
    plan.forward(out.values);
  else
    plan.inverse(out.values);
  return out;
}

int frequency(int i, int n) { return i < n / 2 ? i : i - n; }

std::array<int, 2> frequency_vector(const TorusGrid& grid, std::size_t flat) {
  const auto mi = grid.multi_index(flat);
  const int n = grid.points_per_dim();
  return {frequency(mi[0], n), grid.dim() == 2 ? frequency(mi[1], n) : 0};
}

VectorField gradient_spectral(const ScalarField& field) {
  const TorusGrid& grid = field.grid;
  SpectralPlan plan(grid);
  std::vector<Complex> coeffs(field.values.begin(), field.values.end());
  plan.forward(coeffs);
  const int n = grid.points_per_dim();
  VectorField out(grid);
  for (int axis = 0; axis < grid.dim(); ++axis) {
    std::vector<Complex> d(coeffs.size());
    for (std::size_t j = 0; j < coeffs.size(); ++j) {
      const int k = frequency_vector(grid, j)[axis];
      d[j] = (k == -n / 2) ? Complex(0.0) : coeffs[j] * Complex(0.0, k);
    }
    plan.inverse(d);
    for (std::size_t j = 0; j < d.size(); ++j) out.values[j][axis] = d[j].real();
  }
  return out;
}

// --- interpolation ---------------------------------------------------------

CellStencil cell_stencil(const TorusGrid& grid, const Point& x) {
  CellStencil st;
  const double h = grid.spacing();
  const int n = grid.points_per_dim();
  std::array<long, 2> lo{0, 0};
  std::array<double, 2> frac{0.0, 0.0};
  for (int k = 0; k < grid.dim(); ++k) {
    const double s = wrap_angle(x[k]) / h;
    double fl = std::floor(s);
    frac[k] = s - fl;
    lo[k] = static_cast<long>(fl) % n;
  }
  if (grid.dim() == 1) {
    st.count = 2;
    st.nodes[0] = grid.index(lo[0]);
    st.nodes[1] = grid.index(lo[0] + 1);
    st.weights[0] = 1.0 - frac[0];
    st.weights[1] = frac[0];
  } else {
    st.count = 4;
    int c = 0;
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) {
        st.nodes[c] = grid.index(lo[0] + a, lo[1] + b);
        st.weights[c] = (a ? frac[0] : 1.0 - frac[0]) * (b ? frac[1] : 1.0 - frac[1]);
        ++c;
      }
  }
  return st;
}

double interpolate_periodic(const ScalarField& field, const Point& x) {
  const CellStencil st = cell_stencil(field.grid, x);
  double v = 0.0;
  for (int c = 0; c < st.count; ++c) v += st.weights[c] * field.values[st.nodes[c]];
  return v;
}

Point interpolate_periodic(const VectorField& field, const Point& x) {
  const CellStencil st = cell_stencil(field.grid, x);
  Point v{0.0, 0.0};
  for (int c = 0; c < st.count; ++c)
    for (int k = 0; k < 2; ++k) v[k] += st.weights[c] * field.values[st.nodes[c]][k];
  return v;
}

// --- csv -------------------------------------------------------------------

namespace {
void write_coords_header(std::ostream& os, int dim) {
  os << "x";
  if (dim == 2) os << ",y";
}
void write_coords(std::ostream& os, const Point& p, int dim) {
  os << p[0];
  if (dim == 2) os << ',' << p[1];
}
}  // namespace

void write_field_csv(std::ostream& os, const ScalarField& field, const std::string& value_name) {
  const int dim = field.grid.dim();
  const auto old = os.precision(17);
  write_coords_header(os, dim);
  os << ',' << value_name << '\n';
  for (std::size_t i = 0; i < field.grid.size(); ++i) {
    write_coords(os, field.grid.node(i), dim);
    os << ',' << field.values[i] << '\n';
  }
  os.precision(old);
}

void write_field_csv(std::ostream& os, const VectorField& field) {
  const int dim = field.grid.dim();
  const auto old = os.precision(17);
  write_coords_header(os, dim);
  os << (dim == 2 ? ",v0,v1\n" : ",v0\n");
  for (std::size_t i = 0; i < field.grid.size(); ++i) {
    write_coords(os, field.grid.node(i), dim);
    os << ',' << field.values[i][0];
    if (dim == 2) os << ',' << field.values[i][1];
    os << '\n';
  }
  os.precision(old);
}

}  // namespace toruswkb
