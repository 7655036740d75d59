#pragma once

// Uniform periodic grids on the flat torus (R / 2 pi Z)^n, n in {1, 2}, and
// the scalar / complex / vector fields that live on them.
//
// Points are stored as std::array<double, 2>; in one dimension the second
// component is ignored and kept at zero.

#include <array>
#include <complex>
#include <cstddef>
#include <iosfwd>
#include <numbers>
#include <vector>

#include "toruswkb/errors.hpp"

namespace toruswkb {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

using Point = std::array<double, 2>;
using Complex = std::complex<double>;

/// Reduce a coordinate to [0, 2 pi).
double wrap_angle(double x);

/// Reduce every active component of `p` to [0, 2 pi).
Point wrap_point(const Point& p, int dim);

/// Representative of `d` modulo 2 pi in [-pi, pi).
double min_image(double d);

/// Torus distance min over windings nu of |a - b - 2 pi nu|.
double torus_distance(const Point& a, const Point& b, int dim);

class TorusGrid {
 public:
  TorusGrid() = default;

  int dim() const { return dim_; }
  int points_per_dim() const { return n_; }
  double spacing() const { return spacing_; }
  /// Number of nodes, N^dim.
  std::size_t size() const;
  /// Cell volume spacing^dim.
  double cell_volume() const;

  /// Flat row-major index of the multi-index (i0, i1); indices are wrapped.
  std::size_t index(long i0, long i1 = 0) const;
  std::array<int, 2> multi_index(std::size_t flat) const;
  Point node(std::size_t flat) const;

  bool operator==(const TorusGrid& other) const = default;

 private:
  friend TorusGrid make_grid(int dim, int points_per_dim);
  int dim_ = 1;
  int n_ = 8;
  double spacing_ = kTwoPi / 8;
};

/// Builds a grid; rejects dim outside {1,2} and N that is not a power of two
/// at least 8.
TorusGrid make_grid(int dim, int points_per_dim);

struct ScalarField {
  TorusGrid grid;
  std::vector<double> values;

  ScalarField() = default;
  explicit ScalarField(const TorusGrid& g, double fill = 0.0)
      : grid(g), values(g.size(), fill) {}
  ScalarField(const TorusGrid& g, std::vector<double> v);

  double operator[](std::size_t i) const { return values[i]; }
  double& operator[](std::size_t i) { return values[i]; }
};

struct ComplexField {
  TorusGrid grid;
  std::vector<Complex> values;

  ComplexField() = default;
  explicit ComplexField(const TorusGrid& g, Complex fill = 0.0)
      : grid(g), values(g.size(), fill) {}
  ComplexField(const TorusGrid& g, std::vector<Complex> v);
};

/// One vector per node; only the first `grid.dim()` components are used.
struct VectorField {
  TorusGrid grid;
  std::vector<Point> values;

  VectorField() = default;
  explicit VectorField(const TorusGrid& g) : grid(g), values(g.size(), Point{0.0, 0.0}) {}
};

/// Sample an analytic function at the nodes.
template <class F>
ScalarField sample(const TorusGrid& grid, F&& f) {
  ScalarField out(grid);
  for (std::size_t i = 0; i < grid.size(); ++i) out.values[i] = f(grid.node(i));
  return out;
}

// --- spectral transforms ---------------------------------------------------
//
// Normalization: the forward transform returns coefficients
//     c_k = N^{-dim} sum_j f_j exp(-i k.x_j),
// so the inverse is the plain Fourier series f_j = sum_k c_k exp(i k.x_j) and
// Parseval reads N^{-dim} sum_j |f_j|^2 = sum_k |c_k|^2. A constant field 1
// maps to c_0 = 1. Coefficients are stored in FFT order on the same grid
// shape; `frequency` maps a storage index to k in {-N/2, ..., N/2 - 1}.

enum class TransformDirection { Forward, Inverse };

ComplexField spectral_transform(const ComplexField& field, TransformDirection direction);

/// Reusable FFTW plan pair for one grid. Transforms act in place on buffers
/// of length grid.size() and use the normalization above. Not copyable;
/// a plan must not be shared between threads.
class SpectralPlan {
 public:
  explicit SpectralPlan(const TorusGrid& grid);
  ~SpectralPlan();
  SpectralPlan(const SpectralPlan&) = delete;
  SpectralPlan& operator=(const SpectralPlan&) = delete;

  const TorusGrid& grid() const { return grid_; }
  void forward(std::vector<Complex>& data) const;
  void inverse(std::vector<Complex>& data) const;

 private:
  TorusGrid grid_;
  void* forward_plan_ = nullptr;
  void* inverse_plan_ = nullptr;
  mutable std::vector<Complex> scratch_;
};

/// Integer frequency along one axis for storage index `i` in [0, N).
int frequency(int i, int n);

/// Frequency vector of a flat coefficient index.
std::array<int, 2> frequency_vector(const TorusGrid& grid, std::size_t flat);

/// Spectral gradient of a smooth periodic field. The Nyquist mode is dropped
/// from the derivative so real input yields real output.
VectorField gradient_spectral(const ScalarField& field);

// --- interpolation ---------------------------------------------------------

/// Multilinear interpolation with periodic wrap. Reproduces nodal values.
double interpolate_periodic(const ScalarField& field, const Point& x);
Point interpolate_periodic(const VectorField& field, const Point& x);

/// Corner nodes and weights of the cell containing `x` (2 corners in 1D,
/// 4 in 2D; unused slots carry weight 0).
struct CellStencil {
  std::array<std::size_t, 4> nodes{};
  std::array<double, 4> weights{};
  int count = 0;
};
CellStencil cell_stencil(const TorusGrid& grid, const Point& x);

// --- serialization ---------------------------------------------------------

/// CSV, one row per node: coordinates then values. `value_names` labels the
/// value columns.
void write_field_csv(std::ostream& os, const ScalarField& field,
                     const std::string& value_name = "value");
void write_field_csv(std::ostream& os, const VectorField& field);

}  // namespace toruswkb
