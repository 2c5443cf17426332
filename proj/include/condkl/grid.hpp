#pragma once

#include <array>
#include <vector>

#include <Eigen/Dense>

namespace condkl {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

struct Point {
  double x1 = 0.0;
  double x2 = 0.0;
};

using PointList = std::vector<Point>;

/// Bilinear stencil: four node indices and their weights.
struct Stencil {
  std::array<Index, 4> nodes{};
  std::array<double, 4> weights{};

  double apply(const Vector& field) const;
};

/// Uniform cell-centred grid over [0, lx] x [0, ly].
///
/// Nodes are cell centres numbered x1-fastest: index = ix + nx * iy. Each
/// node carries the cell area as its quadrature weight (midpoint rule).
class StructuredGrid {
 public:
  StructuredGrid() : StructuredGrid(1.0, 1.0, 2, 2) {}
  StructuredGrid(double lx, double ly, int nx, int ny);

  int nx() const { return nx_; }
  int ny() const { return ny_; }
  double lx() const { return lx_; }
  double ly() const { return ly_; }
  double hx() const { return lx_ / nx_; }
  double hy() const { return ly_ / ny_; }
  double cell_area() const { return hx() * hy(); }
  Index size() const { return static_cast<Index>(nx_) * ny_; }

  Index index(int ix, int iy) const { return ix + static_cast<Index>(nx_) * iy; }
  Point node(Index i) const;
  PointList nodes() const;
  const Vector& weights() const { return weights_; }

  bool contains(const Point& p) const;

  /// Bilinear interpolation stencil from the four surrounding cell centres.
  /// Points in the half-cell band next to the boundary are extrapolated
  /// linearly from the outermost cells.
  Stencil stencil(const Point& p) const;
  double interpolate(const Vector& field, const Point& p) const;

  /// Node index whose centre coincides with p within tol, or -1.
  Index find_node(const Point& p, double tol = 1e-12) const;

  bool operator==(const StructuredGrid& other) const;

 private:
  double lx_;
  double ly_;
  int nx_;
  int ny_;
  Vector weights_;
};

/// Pointwise mean and standard deviation of a field on a grid.
struct MomentField {
  Vector mean;
  Vector std;
};

}  // namespace condkl
