#pragma once

#include <array>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

namespace difftomo {

struct BoundaryEdge {
  int a = 0;
  int b = 0;               // a -> b runs counter-clockwise around the domain
  Eigen::Vector2d normal;  // unit outward normal
};

/// Planar P1 triangulation; coordinates in mm.
struct Mesh {
  std::vector<Eigen::Vector2d> nodes;
  std::vector<std::array<int, 3>> triangles;
  std::vector<BoundaryEdge> boundary_edges;
  /// Nominal edge length used to build the mesh (0 when unknown).
  double spacing = 0.0;

  int node_count() const { return static_cast<int>(nodes.size()); }
  int element_count() const { return static_cast<int>(triangles.size()); }

  double signed_area(int e) const;
  double total_area() const;
  /// Boundary node indices in loop order.
  std::vector<int> boundary_nodes() const;
  /// Per-node flag: true for nodes on a boundary edge.
  std::vector<bool> boundary_mask() const;
  /// Lumped mass (integral of each hat function).
  Eigen::VectorXd lumped_mass() const;
  /// Node adjacency through triangle edges (sorted, no self).
  std::vector<std::vector<int>> adjacency() const;

  /// Throws invalid-geometry if any invariant is broken.
  void validate() const;

  /// Builds a mesh from nodes and triangles; orientation is fixed to
  /// counter-clockwise and boundary edges are derived.
  static Mesh from_triangles(std::vector<Eigen::Vector2d> nodes,
                             std::vector<std::array<int, 3>> triangles, double spacing = 0.0);
};

/// Disk of the given radius centred at the origin, built ring by ring with
/// 6i nodes on ring i. The ring count is floor(radius / h), so halving h at
/// least doubles it. The mesh has exact six-fold rotational symmetry.
Mesh build_disk_mesh(double radius, double h);

/// Point location: element containing p and its barycentric coordinates.
/// Returns -1 when p is outside every element (tolerance 1e-12).
int locate_point(const Mesh& mesh, const Eigen::Vector2d& p, Eigen::Vector3d& bary);

/// P1 interpolation of a nodal field from `src` onto the nodes of `dst`.
/// Points outside `src` take the value of the nearest node.
Eigen::VectorXd interpolate_nodal(const Mesh& src, const Eigen::VectorXd& values, const Mesh& dst);

/// Sparse interpolation operator with the same semantics (rows = dst nodes).
Eigen::SparseMatrix<double> interpolation_matrix(const Mesh& src, const Mesh& dst);

struct ParamField {
  Eigen::VectorXd mu_a;  // absorption, 1/mm
  Eigen::VectorXd diff;  // diffusion coefficient
  double c = 214.3;      // speed of light in the medium

  void validate(int node_count) const;
  static ParamField uniform(int node_count, double mu_a, double diff, double c = 214.3);
};

struct Inclusion {
  Eigen::Vector2d center = Eigen::Vector2d::Zero();
  double radius = 0.0;
  double mu_a = 0.0;
  double diff = 0.0;
};

struct Phantom {
  double mu_a = 0.01;
  double diff = 0.33;
  double c = 214.3;
  std::vector<Inclusion> inclusions;

  void validate() const;
};

/// Nodal rasterization by node centre; the last listed inclusion wins.
ParamField rasterize_phantom(const Phantom& phantom, const Mesh& mesh);

void write_mesh(const Mesh& mesh, const std::string& path);
Mesh read_mesh(const std::string& path);
void write_params(const ParamField& params, const std::string& path);
ParamField read_params(const std::string& path, double c);

}  // namespace difftomo
