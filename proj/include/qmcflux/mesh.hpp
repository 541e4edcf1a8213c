#pragma once

#include <array>
#include <cstddef>
#include <vector>

namespace qmcflux {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

/// Triangulation of the unit square. Local edge k of a triangle is opposite
/// local vertex k; global edges run from the lower to the higher vertex index
/// and carry the normal obtained by rotating that direction clockwise.
struct TriMesh {
  int m = 0;
  std::vector<Point2> vertices;
  std::vector<std::array<int, 3>> triangles;   ///< counter-clockwise
  std::vector<std::array<int, 2>> edges;       ///< (low, high)
  std::vector<std::array<int, 3>> tri_edges;   ///< global edge of local edge k
  std::vector<std::array<int, 2>> edge_tris;   ///< -1 for the missing side
  std::vector<bool> boundary_edge;
  double h = 0.0;

  std::size_t num_vertices() const noexcept { return vertices.size(); }
  std::size_t num_triangles() const noexcept { return triangles.size(); }
  std::size_t num_edges() const noexcept { return edges.size(); }

  double area(std::size_t t) const;
  Point2 centroid(std::size_t t) const;
  double edge_length(std::size_t e) const;
  /// Unit global normal of edge e.
  Point2 edge_normal(std::size_t e) const;
  /// +1 if the outward normal of triangle t on local edge k equals the global normal.
  int edge_sign(std::size_t t, int k) const;
};

/// m x m grid, each cell split along its lower-left to upper-right diagonal.
/// Throws ArgumentError for m < 1.
TriMesh build_mesh(int m);

/// Axis-aligned rectangle [x0,x1] x [y0,y1].
struct Subdomain {
  double x0 = 0.2, x1 = 0.8, y0 = 0.2, y1 = 0.8;
  double area() const { return (x1 - x0) * (y1 - y0); }
};

/// Throws AlignmentError unless every side of the subdomain lies on a grid line.
void check_alignment(const TriMesh& mesh, const Subdomain& sub);

/// Triangles whose centroid lies inside the subdomain.
std::vector<bool> subdomain_mask(const TriMesh& mesh, const Subdomain& sub);

/// Degree-5 seven-point rule on triangles, barycentric coordinates and weights
/// normalised to sum 1.
struct TriangleRule {
  static constexpr int size = 7;
  std::array<std::array<double, 3>, 7> bary;
  std::array<double, 7> weight;
};
const TriangleRule& triangle_rule();

/// Physical quadrature points of every triangle, [t * 7 + q].
struct QuadraturePoints {
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> w; ///< weight times triangle area
};
QuadraturePoints quadrature_points(const TriMesh& mesh);

} // namespace qmcflux
