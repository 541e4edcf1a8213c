#include "qmcflux/mesh.hpp"

#include "qmcflux/errors.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

namespace qmcflux {

double TriMesh::area(std::size_t t) const
{
  const auto& tri = triangles[t];
  const Point2 &a = vertices[tri[0]], &b = vertices[tri[1]], &c = vertices[tri[2]];
  return 0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y));
}

Point2 TriMesh::centroid(std::size_t t) const
{
  const auto& tri = triangles[t];
  Point2 c;
  for (int v : tri) {
    c.x += vertices[v].x / 3.0;
    c.y += vertices[v].y / 3.0;
  }
  return c;
}

double TriMesh::edge_length(std::size_t e) const
{
  const Point2 &a = vertices[edges[e][0]], &b = vertices[edges[e][1]];
  return std::hypot(b.x - a.x, b.y - a.y);
}

Point2 TriMesh::edge_normal(std::size_t e) const
{
  const Point2 &a = vertices[edges[e][0]], &b = vertices[edges[e][1]];
  const double len = std::hypot(b.x - a.x, b.y - a.y);
  return {(b.y - a.y) / len, -(b.x - a.x) / len};
}

int TriMesh::edge_sign(std::size_t t, int k) const
{
  // The outward normal of a counter-clockwise triangle on the edge
  // v_{k+1} -> v_{k+2} is that direction rotated clockwise.
  const auto& tri = triangles[t];
  return tri[(k + 1) % 3] < tri[(k + 2) % 3] ? 1 : -1;
}

TriMesh build_mesh(int m)
{
  if (m < 1)
    throw ArgumentError("build_mesh: m must be >= 1");
  TriMesh mesh;
  mesh.m = m;
  const int np = m + 1;
  for (int j = 0; j < np; ++j)
    for (int i = 0; i < np; ++i)
      mesh.vertices.push_back({static_cast<double>(i) / m, static_cast<double>(j) / m});

  auto vid = [np](int i, int j) { return j * np + i; };
  for (int j = 0; j < m; ++j)
    for (int i = 0; i < m; ++i) {
      const int v00 = vid(i, j), v10 = vid(i + 1, j), v11 = vid(i + 1, j + 1), v01 = vid(i, j + 1);
      mesh.triangles.push_back({v00, v10, v11});
      mesh.triangles.push_back({v00, v11, v01});
    }

  std::map<std::pair<int, int>, int> index;
  mesh.tri_edges.resize(mesh.triangles.size());
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    const auto& tri = mesh.triangles[t];
    for (int k = 0; k < 3; ++k) {
      const int a = tri[(k + 1) % 3], b = tri[(k + 2) % 3];
      const auto key = std::minmax(a, b);
      auto [it, inserted] = index.try_emplace(key, static_cast<int>(mesh.edges.size()));
      if (inserted) {
        mesh.edges.push_back({key.first, key.second});
        mesh.edge_tris.push_back({static_cast<int>(t), -1});
      } else {
        mesh.edge_tris[it->second][1] = static_cast<int>(t);
      }
      mesh.tri_edges[t][k] = it->second;
    }
  }
  mesh.boundary_edge.resize(mesh.edges.size());
  for (std::size_t e = 0; e < mesh.edges.size(); ++e) {
    mesh.boundary_edge[e] = mesh.edge_tris[e][1] < 0;
    mesh.h = std::max(mesh.h, mesh.edge_length(e));
  }
  return mesh;
}

void check_alignment(const TriMesh& mesh, const Subdomain& sub)
{
  for (double c : {sub.x0, sub.x1, sub.y0, sub.y1}) {
    const double scaled = c * mesh.m;
    if (std::abs(scaled - std::round(scaled)) > 1e-9 || c < 0.0 || c > 1.0)
      throw AlignmentError("subdomain side " + std::to_string(c) + " is not on a mesh line of m = " +
                           std::to_string(mesh.m));
  }
}

std::vector<bool> subdomain_mask(const TriMesh& mesh, const Subdomain& sub)
{
  std::vector<bool> mask(mesh.num_triangles());
  for (std::size_t t = 0; t < mask.size(); ++t) {
    const Point2 c = mesh.centroid(t);
    mask[t] = c.x > sub.x0 && c.x < sub.x1 && c.y > sub.y0 && c.y < sub.y1;
  }
  return mask;
}

const TriangleRule& triangle_rule()
{
  static const TriangleRule rule = [] {
    const double r = std::sqrt(15.0);
    const double a1 = (6.0 - r) / 21.0, b1 = (9.0 + 2.0 * r) / 21.0;
    const double a2 = (6.0 + r) / 21.0, b2 = (9.0 - 2.0 * r) / 21.0;
    const double w1 = (155.0 - r) / 1200.0, w2 = (155.0 + r) / 1200.0;
    TriangleRule t;
    t.bary = {{{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0},
               {a1, a1, b1}, {a1, b1, a1}, {b1, a1, a1},
               {a2, a2, b2}, {a2, b2, a2}, {b2, a2, a2}}};
    t.weight = {9.0 / 40.0, w1, w1, w1, w2, w2, w2};
    return t;
  }();
  return rule;
}

QuadraturePoints quadrature_points(const TriMesh& mesh)
{
  const TriangleRule& rule = triangle_rule();
  QuadraturePoints qp;
  const std::size_t n = mesh.num_triangles() * TriangleRule::size;
  qp.x.reserve(n);
  qp.y.reserve(n);
  qp.w.reserve(n);
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangles[t];
    const double area = mesh.area(t);
    for (int q = 0; q < TriangleRule::size; ++q) {
      double x = 0.0, y = 0.0;
      for (int i = 0; i < 3; ++i) {
        x += rule.bary[q][i] * mesh.vertices[tri[i]].x;
        y += rule.bary[q][i] * mesh.vertices[tri[i]].y;
      }
      qp.x.push_back(x);
      qp.y.push_back(y);
      qp.w.push_back(rule.weight[q] * area);
    }
  }
  return qp;
}

} // namespace qmcflux
