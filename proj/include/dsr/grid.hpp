#pragma once

#include <cmath>
#include <stdexcept>

#include "dsr/common.hpp"

namespace dsr {

// Uniform 2-D imaging grid in the z = 0 plane. Cells are ordered row-major
// with x fastest: cell l = iy * nx + ix sits at
// (x_min + ix * dx, y_min + iy * dy, 0).
struct ImagingGrid {
  double x_min = 0, y_min = 0;
  double dx = 1, dy = 1;
  int nx = 0, ny = 0;

  static ImagingGrid from_spacing(double x0, double x1, double y0, double y1,
                                  double spacing) {
    if (!(spacing > 0) || !(x1 >= x0) || !(y1 >= y0)) {
      throw std::invalid_argument("ImagingGrid: bad extent or spacing");
    }
    ImagingGrid g;
    g.x_min = x0;
    g.y_min = y0;
    g.dx = g.dy = spacing;
    g.nx = static_cast<int>(std::round((x1 - x0) / spacing)) + 1;
    g.ny = static_cast<int>(std::round((y1 - y0) / spacing)) + 1;
    return g;
  }

  static ImagingGrid from_counts(double x0, double y0, double dx, double dy,
                                 int nx, int ny) {
    if (nx < 1 || ny < 1 || !(dx > 0) || !(dy > 0)) {
      throw std::invalid_argument("ImagingGrid: bad counts or spacing");
    }
    ImagingGrid g;
    g.x_min = x0;
    g.y_min = y0;
    g.dx = dx;
    g.dy = dy;
    g.nx = nx;
    g.ny = ny;
    return g;
  }

  int size() const { return nx * ny; }
  double x_at(int ix) const { return x_min + ix * dx; }
  double y_at(int iy) const { return y_min + iy * dy; }
  double x_max() const { return x_at(nx - 1); }
  double y_max() const { return y_at(ny - 1); }

  int cell_index(int ix, int iy) const {
    if (ix < 0 || ix >= nx || iy < 0 || iy >= ny) {
      throw std::out_of_range("ImagingGrid: cell index out of range");
    }
    return iy * nx + ix;
  }
  Vec3 cell_position(int l) const {
    if (l < 0 || l >= size()) {
      throw std::out_of_range("ImagingGrid: cell out of range");
    }
    return Vec3(x_at(l % nx), y_at(l / nx), 0.0);
  }

  // Cell whose center is closest to p (ties resolve to the lower index).
  int nearest_cell(const Vec3& p) const {
    const auto clamp = [](int v, int hi) { return std::min(std::max(v, 0), hi); };
    const int ix = clamp(static_cast<int>(std::floor((p.x() - x_min) / dx + 0.5)),
                         nx - 1);
    const int iy = clamp(static_cast<int>(std::floor((p.y() - y_min) / dy + 0.5)),
                         ny - 1);
    return cell_index(ix, iy);
  }
};

}  // namespace dsr
