#include "condkl/grid.hpp"

#include <algorithm>
#include <cmath>

#include "condkl/error.hpp"

namespace condkl {

double Stencil::apply(const Vector& field) const {
  double v = 0.0;
  for (int k = 0; k < 4; ++k) v += weights[k] * field[nodes[k]];
  return v;
}

StructuredGrid::StructuredGrid(double lx, double ly, int nx, int ny)
    : lx_(lx), ly_(ly), nx_(nx), ny_(ny) {
  if (!(lx > 0.0) || !(ly > 0.0)) throw InvalidArgument("grid: domain lengths must be positive");
  if (nx < 2 || ny < 2) throw InvalidArgument("grid: nx and ny must be at least 2");
  weights_ = Vector::Constant(size(), cell_area());
}

Point StructuredGrid::node(Index i) const {
  const Index ix = i % nx_;
  const Index iy = i / nx_;
  return {(static_cast<double>(ix) + 0.5) * hx(), (static_cast<double>(iy) + 0.5) * hy()};
}

PointList StructuredGrid::nodes() const {
  PointList out(static_cast<std::size_t>(size()));
  for (Index i = 0; i < size(); ++i) out[static_cast<std::size_t>(i)] = node(i);
  return out;
}

bool StructuredGrid::contains(const Point& p) const {
  return p.x1 >= 0.0 && p.x1 <= lx_ && p.x2 >= 0.0 && p.x2 <= ly_;
}

namespace {

// Left cell index and local coordinate along one axis.
std::pair<int, double> locate(double x, double h, int n) {
  const double s = x / h - 0.5;
  int i = static_cast<int>(std::floor(s));
  i = std::clamp(i, 0, n - 2);
  return {i, s - i};
}

}  // namespace

Stencil StructuredGrid::stencil(const Point& p) const {
  const auto [ix, tx] = locate(p.x1, hx(), nx_);
  const auto [iy, ty] = locate(p.x2, hy(), ny_);
  Stencil s;
  s.nodes = {index(ix, iy), index(ix + 1, iy), index(ix, iy + 1), index(ix + 1, iy + 1)};
  s.weights = {(1 - tx) * (1 - ty), tx * (1 - ty), (1 - tx) * ty, tx * ty};
  return s;
}

double StructuredGrid::interpolate(const Vector& field, const Point& p) const {
  if (field.size() != size()) throw InvalidArgument("interpolate: field size does not match grid");
  return stencil(p).apply(field);
}

Index StructuredGrid::find_node(const Point& p, double tol) const {
  const double sx = p.x1 / hx() - 0.5;
  const double sy = p.x2 / hy() - 0.5;
  const long ix = std::lround(sx);
  const long iy = std::lround(sy);
  if (ix < 0 || iy < 0 || ix >= nx_ || iy >= ny_) return -1;
  const Point c = node(index(static_cast<int>(ix), static_cast<int>(iy)));
  if (std::abs(c.x1 - p.x1) <= tol && std::abs(c.x2 - p.x2) <= tol)
    return index(static_cast<int>(ix), static_cast<int>(iy));
  return -1;
}

bool StructuredGrid::operator==(const StructuredGrid& other) const {
  return nx_ == other.nx_ && ny_ == other.ny_ && lx_ == other.lx_ && ly_ == other.ly_;
}

}  // namespace condkl
