#pragma once

#include <Eigen/Core>

namespace difftomo {

/// Slab 0 <= z <= width; rays enter along +z from (y1, 0) and leave at angle
/// theta through the detector line z = width.
struct BrokenRayGeometry {
  double width = 1.0;
  double theta = 0.5235987755982988;

  void validate() const;
};

/// Image lattice: y_i = i dy (periodic, ny samples), z_j = j width / (nz - 1).
struct SlabGrid {
  int ny = 0;
  int nz = 0;
  double dy = 1.0;

  void validate() const;
  double dz(const BrokenRayGeometry& g) const { return g.width / (nz - 1); }
};

/// Line integral of f (ny x nz nodal values, bilinear) along the broken ray
/// from (y1, 0) to the detector at (y2, width).
double broken_ray_forward(const Eigen::MatrixXd& f, const SlabGrid& grid, const BrokenRayGeometry& geom, double y1,
                          double y2);

/// Measurements on the lattice (y1_i, offset_j), y1_i = i dy / m, offset_j =
/// (width - zeta_j) tan(theta) with vertex depths zeta_j = j dz / m, where m is
/// the oversampling factor. Returns (ny m) x ((nz - 1) m + 1).
Eigen::MatrixXd broken_ray_measure(const Eigen::MatrixXd& f, const SlabGrid& grid, const BrokenRayGeometry& geom,
                                   int oversample = 1);

/// Inversion of lattice measurements (layout of broken_ray_measure; the
/// oversampling factor is inferred from the column count). alpha damps high
/// transverse frequencies; scale multiplies the result.
Eigen::MatrixXd broken_ray_invert(const Eigen::MatrixXd& data, const SlabGrid& grid, const BrokenRayGeometry& geom,
                                  double alpha, double scale = 1.0);

/// Scale that makes the inversion of a constant phantom's measurements equal
/// the constant on the interior 10%..90% of the depth range.
double broken_ray_calibrate(const SlabGrid& grid, const BrokenRayGeometry& geom, double alpha, int oversample = 1);

}  // namespace difftomo
