#include "qmcflux/fem.hpp"

#include "qmcflux/errors.hpp"
#include "qmcflux/random_field.hpp"

#include <Eigen/Dense>
#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include <algorithm>
#include <cmath>

namespace qmcflux {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

constexpr int nq = TriangleRule::size;

// Two-point Gauss rule on [0,1], exact for the quadratic edge integrands.
constexpr double gauss_s[2] = {0.5 - 0.28867513459481287, 0.5 + 0.28867513459481287};

struct Geometry {
  Point2 P[3];
  double area = 0.0;
  double grad[3][2] = {};   // ∇λ_i
  double normal[3][2] = {}; // outward unit normal on local edge k
  double length[3] = {};
};

Geometry geometry(const TriMesh& mesh, std::size_t t)
{
  Geometry g;
  for (int i = 0; i < 3; ++i)
    g.P[i] = mesh.vertices[mesh.triangles[t][i]];
  g.area = mesh.area(t);
  for (int i = 0; i < 3; ++i) {
    const Point2& b = g.P[(i + 1) % 3];
    const Point2& c = g.P[(i + 2) % 3];
    g.grad[i][0] = (b.y - c.y) / (2.0 * g.area);
    g.grad[i][1] = (c.x - b.x) / (2.0 * g.area);
    g.length[i] = std::hypot(c.x - b.x, c.y - b.y);
    g.normal[i][0] = (c.y - b.y) / g.length[i];
    g.normal[i][1] = -(c.x - b.x) / g.length[i];
  }
  return g;
}

void require_size(std::span<const double> v, std::size_t n, const char* what)
{
  if (v.size() != n)
    throw ArgumentError(std::string(what) + ": expected " + std::to_string(n) + " quadrature values, got " +
                        std::to_string(v.size()));
}

struct Layout {
  int nQ, nU, nM; // flux, scalar and multiplier unknowns per triangle
  int nX() const { return nQ + nU; }
};

Layout layout(Method method)
{
  return method == Method::Rth ? Layout{3, 1, 3} : Layout{6, 3, 6};
}

// Flux basis function i at barycentric point bary (physical point x).
void flux_basis(Method method, const Geometry& g, const double bary[3], Point2 x, int i, double out[2])
{
  if (method == Method::Rth) {
    out[0] = (x.x - g.P[i].x) / (2.0 * g.area);
    out[1] = (x.y - g.P[i].y) / (2.0 * g.area);
  } else {
    const int c = i / 3, v = i % 3;
    out[0] = c == 0 ? bary[v] : 0.0;
    out[1] = c == 1 ? bary[v] : 0.0;
  }
}

double scalar_basis(Method method, const double bary[3], int k)
{
  return method == Method::Rth ? 1.0 : bary[k];
}

} // namespace

std::string to_string(Method method)
{
  switch (method) {
  case Method::Rth:
    return "rth";
  case Method::P1:
    return "p1";
  case Method::Ldgh:
    return "ldgh";
  }
  return "rth";
}

Method parse_method(const std::string& name)
{
  if (name == "rth")
    return Method::Rth;
  if (name == "p1")
    return Method::P1;
  if (name == "ldgh")
    return Method::Ldgh;
  throw ArgumentError("unknown method '" + name + "' (expected rth, p1 or ldgh)");
}

std::vector<double> tabulate(const QuadraturePoints& qp, const Field2& fn)
{
  std::vector<double> v(qp.x.size());
  for (std::size_t i = 0; i < v.size(); ++i)
    v[i] = fn(qp.x[i], qp.y[i]);
  return v;
}

struct HybridSolver::Impl {
  const TriMesh* mesh = nullptr;
  Method method = Method::Rth;
  SolverConfig cfg;
  Layout lay{};
  std::vector<double> a;
  std::vector<Geometry> geo;
  std::vector<Eigen::PartialPivLU<MatrixXd>> lu; // 𝔸
  std::vector<MatrixXd> ainv_b;                  // 𝔸⁻¹𝔹
  std::vector<MatrixXd> dmat;                    // 𝔻
  std::vector<std::array<int, 6>> mdof;          // global multiplier dof or -1
  std::size_t ndof = 0;
  SpMat K;
  std::unique_ptr<Eigen::ConjugateGradient<SpMat, Eigen::Lower | Eigen::Upper, Eigen::DiagonalPreconditioner<double>>> cg;
  std::unique_ptr<Eigen::SimplicialLDLT<SpMat>> ldlt;

  // Multiplier basis p (0: low global vertex, 1: high) on local edge k at edge parameter s,
  // measured from local vertex k+1 to k+2.
  double mult_basis(std::size_t t, int k, int p, double s) const
  {
    const auto& tri = mesh->triangles[t];
    const bool forward = tri[(k + 1) % 3] < tri[(k + 2) % 3];
    const double at_start = forward ? (p == 0) : (p == 1);
    return at_start ? 1.0 - s : s;
  }

  void local_operators(std::size_t t, MatrixXd& AA, MatrixXd& BB, MatrixXd& DD, MatrixXd& Tmm) const;
  VectorXd local_load(std::size_t t, std::span<const double> f, std::span<const double> gx,
                      std::span<const double> gy) const;
};

void HybridSolver::Impl::local_operators(std::size_t t, MatrixXd& AA, MatrixXd& BB, MatrixXd& DD,
                                         MatrixXd& Tmm) const
{
  const Geometry& g = geo[t];
  const TriangleRule& rule = triangle_rule();
  const int nQ = lay.nQ, nU = lay.nU, nM = lay.nM, nX = lay.nX();
  AA.setZero(nX, nX);
  BB.setZero(nX, nM);
  DD.setZero(nM, nX);
  Tmm.setZero(nM, nM);

  // Flux mass ∫ a r_i·r_j.
  double phi[6][2];
  for (int q = 0; q < nq; ++q) {
    const double* bary = rule.bary[q].data();
    Point2 x{0.0, 0.0};
    for (int i = 0; i < 3; ++i) {
      x.x += bary[i] * g.P[i].x;
      x.y += bary[i] * g.P[i].y;
    }
    for (int i = 0; i < nQ; ++i)
      flux_basis(method, g, bary, x, i, phi[i]);
    const double wa = rule.weight[q] * g.area * a[t * nq + q];
    for (int i = 0; i < nQ; ++i)
      for (int j = 0; j < nQ; ++j)
        AA(i, j) += wa * (phi[i][0] * phi[j][0] + phi[i][1] * phi[j][1]);
  }

  if (method == Method::Rth) {
    // ∫ div ψ_i = 1 and ∫_{e_k} ψ_i·n = δ_ik for the outward-flux basis.
    for (int i = 0; i < 3; ++i) {
      AA(i, 3) = -1.0;
      AA(3, i) = 1.0;
      BB(i, i) = 1.0;
      DD(i, i) = 1.0;
    }
    return;
  }

  const double tau = cfg.tau;
  // (div r, v): ∂_c λ_i times ∫ λ_k = |E|/3.
  for (int c = 0; c < 2; ++c)
    for (int i = 0; i < 3; ++i)
      for (int k = 0; k < 3; ++k) {
        const double val = g.grad[i][c] * g.area / 3.0;
        AA(nQ + k, c * 3 + i) += val;
        AA(c * 3 + i, nQ + k) -= val;
      }
  for (int k = 0; k < 3; ++k) {
    const int va = (k + 1) % 3, vb = (k + 2) % 3;
    for (int gq = 0; gq < 2; ++gq) {
      const double s = gauss_s[gq];
      const double w = 0.5 * g.length[k];
      double lam[3] = {0.0, 0.0, 0.0};
      lam[va] = 1.0 - s;
      lam[vb] = s;
      const double mu[2] = {mult_basis(t, k, 0, s), mult_basis(t, k, 1, s)};
      for (int p = 0; p < 2; ++p) {
        const int mi = 2 * k + p;
        for (int c = 0; c < 2; ++c)
          for (int i = 0; i < 3; ++i) {
            const double cq = w * lam[i] * g.normal[k][c] * mu[p];
            BB(c * 3 + i, mi) += cq;
            DD(mi, c * 3 + i) += cq;
          }
        for (int i = 0; i < 3; ++i) {
          const double tum = tau * w * lam[i] * mu[p];
          BB(nQ + i, mi) -= tum;
          DD(mi, nQ + i) += tum;
        }
        for (int p2 = 0; p2 < 2; ++p2)
          Tmm(mi, 2 * k + p2) += tau * w * mu[p] * mu[p2];
      }
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
          AA(nQ + i, nQ + j) += tau * w * lam[i] * lam[j];
    }
  }
  (void)nU;
}

VectorXd HybridSolver::Impl::local_load(std::size_t t, std::span<const double> f, std::span<const double> gx,
                                        std::span<const double> gy) const
{
  const Geometry& g = geo[t];
  const TriangleRule& rule = triangle_rule();
  VectorXd rhs = VectorXd::Zero(lay.nX());
  double phi[2];
  for (int q = 0; q < nq; ++q) {
    const double* bary = rule.bary[q].data();
    const double w = rule.weight[q] * g.area;
    const std::size_t idx = t * nq + q;
    if (!gx.empty()) {
      Point2 x{0.0, 0.0};
      for (int i = 0; i < 3; ++i) {
        x.x += bary[i] * g.P[i].x;
        x.y += bary[i] * g.P[i].y;
      }
      for (int i = 0; i < lay.nQ; ++i) {
        flux_basis(method, g, bary, x, i, phi);
        rhs(i) += w * (gx[idx] * phi[0] + gy[idx] * phi[1]);
      }
    }
    for (int k = 0; k < lay.nU; ++k)
      rhs(lay.nQ + k) += w * f[idx] * scalar_basis(method, bary, k);
  }
  return rhs;
}

HybridSolver::HybridSolver(const TriMesh& mesh, Method method, std::span<const double> a_qp, SolverConfig cfg)
    : impl_(std::make_unique<Impl>())
{
  if (method == Method::P1)
    throw ArgumentError("HybridSolver: p1 is not a hybridized method");
  if (method == Method::Ldgh && !(cfg.tau > 0.0))
    throw ArgumentError("HybridSolver: ldgh needs tau > 0");
  const std::size_t nt = mesh.num_triangles();
  require_size(a_qp, nt * nq, "HybridSolver");
  Impl& im = *impl_;
  im.mesh = &mesh;
  im.method = method;
  im.cfg = cfg;
  im.lay = layout(method);
  im.a.assign(a_qp.begin(), a_qp.end());
  for (double v : im.a)
    if (!(v > 0.0))
      throw ArgumentError("HybridSolver: coefficient must be positive");

  const int per_edge = method == Method::Rth ? 1 : 2;
  std::vector<int> edge_dof(mesh.num_edges(), -1);
  for (std::size_t e = 0; e < mesh.num_edges(); ++e)
    if (!mesh.boundary_edge[e]) {
      edge_dof[e] = static_cast<int>(im.ndof);
      im.ndof += per_edge;
    }

  im.geo.resize(nt);
  im.lu.resize(nt);
  im.ainv_b.resize(nt);
  im.dmat.resize(nt);
  im.mdof.resize(nt);
  std::vector<Triplet> trip;
  trip.reserve(nt * im.lay.nM * im.lay.nM);
  MatrixXd AA, BB, DD, Tmm;
  for (std::size_t t = 0; t < nt; ++t) {
    im.geo[t] = geometry(mesh, t);
    im.local_operators(t, AA, BB, DD, Tmm);
    im.lu[t].compute(AA);
    im.ainv_b[t] = im.lu[t].solve(BB);
    im.dmat[t] = DD;
    const MatrixXd Ke = Tmm + DD * im.ainv_b[t];
    auto& md = im.mdof[t];
    md.fill(-1);
    for (int k = 0; k < 3; ++k) {
      const int e = mesh.tri_edges[t][k];
      if (edge_dof[e] < 0)
        continue;
      for (int p = 0; p < per_edge; ++p)
        md[per_edge * k + p] = edge_dof[e] + p;
    }
    for (int i = 0; i < im.lay.nM; ++i)
      for (int j = 0; j < im.lay.nM; ++j)
        if (md[i] >= 0 && md[j] >= 0)
          trip.emplace_back(md[i], md[j], Ke(i, j));
  }
  im.K.resize(static_cast<Eigen::Index>(im.ndof), static_cast<Eigen::Index>(im.ndof));
  im.K.setFromTriplets(trip.begin(), trip.end());
  if (im.ndof == 0)
    return;
  if (cfg.solver == LinearSolver::Direct) {
    im.ldlt = std::make_unique<Eigen::SimplicialLDLT<SpMat>>(im.K);
    if (im.ldlt->info() != Eigen::Success)
      throw SolverError("HybridSolver: factorization failed", 0.0, 0);
  } else {
    im.cg = std::make_unique<std::remove_reference_t<decltype(*im.cg)>>();
    im.cg->setTolerance(cfg.tol);
    im.cg->setMaxIterations(static_cast<Eigen::Index>(cfg.max_iter.value_or(10 * im.ndof)));
    im.cg->compute(im.K);
  }
}

HybridSolver::~HybridSolver() = default;
HybridSolver::HybridSolver(HybridSolver&&) noexcept = default;
HybridSolver& HybridSolver::operator=(HybridSolver&&) noexcept = default;

std::size_t HybridSolver::dofs() const
{
  return impl_->ndof;
}

Method HybridSolver::method() const
{
  return impl_->method;
}

MixedSolution HybridSolver::solve(std::span<const double> f_qp) const
{
  return solve(f_qp, {}, {});
}

MixedSolution HybridSolver::solve(std::span<const double> f_qp, std::span<const double> gx,
                                  std::span<const double> gy) const
{
  const Impl& im = *impl_;
  const TriMesh& mesh = *im.mesh;
  const std::size_t nt = mesh.num_triangles();
  require_size(f_qp, nt * nq, "HybridSolver::solve");
  if (!gx.empty()) {
    require_size(gx, nt * nq, "HybridSolver::solve");
    require_size(gy, nt * nq, "HybridSolver::solve");
  }
  const Layout lay = im.lay;

  std::vector<VectorXd> local(nt);
  VectorXd rhs = VectorXd::Zero(static_cast<Eigen::Index>(im.ndof));
  for (std::size_t t = 0; t < nt; ++t) {
    local[t] = im.lu[t].solve(im.local_load(t, f_qp, gx, gy));
    const VectorXd contrib = im.dmat[t] * local[t];
    for (int i = 0; i < lay.nM; ++i)
      if (im.mdof[t][i] >= 0)
        rhs(im.mdof[t][i]) += contrib(i);
  }

  MixedSolution sol;
  sol.method = im.method;
  VectorXd M = VectorXd::Zero(static_cast<Eigen::Index>(im.ndof));
  if (im.ndof > 0 && rhs.squaredNorm() > 0.0) {
    if (im.ldlt) {
      M = im.ldlt->solve(rhs);
      sol.residual = (im.K * M - rhs).norm() / rhs.norm();
    } else {
      // Unit right-hand side: CG works with squared norms, which underflow for
      // the tiny loads of derivatives where ξ is flat.
      const double scale = rhs.norm();
      M = im.cg->solve(rhs / scale) * scale;
      sol.iterations = static_cast<std::size_t>(im.cg->iterations());
      sol.residual = im.cg->error();
      if (im.cg->info() != Eigen::Success)
        throw SolverError("conjugate gradients did not converge", sol.residual, sol.iterations);
    }
  }

  const int per_edge = im.method == Method::Rth ? 1 : 2;
  sol.m_dofs.assign(mesh.num_edges() * per_edge, 0.0);
  sol.u_dofs.assign(nt * lay.nU, 0.0);
  sol.q_dofs.assign(im.method == Method::Rth ? mesh.num_edges() : nt * 6, 0.0);
  sol.qx.resize(nt * nq);
  sol.qy.resize(nt * nq);
  sol.u.resize(nt * nq);
  sol.edge_outflux.resize(nt * 3);

  const TriangleRule& rule = triangle_rule();
  double flux_sq = 0.0, jump_sq = 0.0;
  VectorXd mloc(lay.nM);
  for (std::size_t t = 0; t < nt; ++t) {
    const Geometry& g = im.geo[t];
    for (int i = 0; i < lay.nM; ++i)
      mloc(i) = im.mdof[t][i] >= 0 ? M(im.mdof[t][i]) : 0.0;
    const VectorXd X = local[t] - im.ainv_b[t] * mloc;

    for (int k = 0; k < 3; ++k) {
      const int e = mesh.tri_edges[t][k];
      for (int p = 0; p < per_edge; ++p)
        sol.m_dofs[per_edge * e + p] = mloc(per_edge * k + p);
    }
    for (int k = 0; k < lay.nU; ++k)
      sol.u_dofs[t * lay.nU + k] = X(lay.nQ + k);
    if (im.method == Method::Rth) {
      for (int k = 0; k < 3; ++k) {
        sol.q_dofs[mesh.tri_edges[t][k]] = mesh.edge_sign(t, k) * X(k);
        sol.edge_outflux[3 * t + k] = X(k);
      }
    } else {
      for (int i = 0; i < 6; ++i)
        sol.q_dofs[6 * t + i] = X(i);
    }

    double phi[2];
    for (int q = 0; q < nq; ++q) {
      const double* bary = rule.bary[q].data();
      Point2 x{0.0, 0.0};
      for (int i = 0; i < 3; ++i) {
        x.x += bary[i] * g.P[i].x;
        x.y += bary[i] * g.P[i].y;
      }
      double qx = 0.0, qy = 0.0, u = 0.0;
      for (int i = 0; i < lay.nQ; ++i) {
        flux_basis(im.method, g, bary, x, i, phi);
        qx += X(i) * phi[0];
        qy += X(i) * phi[1];
      }
      for (int k = 0; k < lay.nU; ++k)
        u += X(lay.nQ + k) * scalar_basis(im.method, bary, k);
      const std::size_t idx = t * nq + q;
      sol.qx[idx] = qx;
      sol.qy[idx] = qy;
      sol.u[idx] = u;
      flux_sq += rule.weight[q] * g.area * im.a[idx] * (qx * qx + qy * qy);
    }

    if (im.method == Method::Ldgh) {
      const double tau = im.cfg.tau;
      for (int k = 0; k < 3; ++k) {
        const int va = (k + 1) % 3, vb = (k + 2) % 3;
        double out = 0.0;
        for (int gq = 0; gq < 2; ++gq) {
          const double s = gauss_s[gq];
          const double w = 0.5 * g.length[k];
          double lam[3] = {0.0, 0.0, 0.0};
          lam[va] = 1.0 - s;
          lam[vb] = s;
          double qx = 0.0, qy = 0.0, u = 0.0;
          for (int i = 0; i < 3; ++i) {
            qx += X(i) * lam[i];
            qy += X(3 + i) * lam[i];
            u += X(6 + i) * lam[i];
          }
          const double m = mloc(2 * k) * im.mult_basis(t, k, 0, s) + mloc(2 * k + 1) * im.mult_basis(t, k, 1, s);
          out += w * (qx * g.normal[k][0] + qy * g.normal[k][1] + tau * (u - m));
          jump_sq += w * tau * (u - m) * (u - m);
        }
        sol.edge_outflux[3 * t + k] = out;
      }
    }
  }
  sol.flux_norm = std::sqrt(flux_sq);
  sol.jump_norm = std::sqrt(jump_sq);
  sol.energy_norm = std::sqrt(flux_sq + jump_sq);
  return sol;
}

MixedSolution solve_rth(const TriMesh& mesh, std::span<const double> a_qp, std::span<const double> f_qp,
                        const SolverConfig& cfg)
{
  return HybridSolver(mesh, Method::Rth, a_qp, cfg).solve(f_qp);
}

MixedSolution solve_ldgh(const TriMesh& mesh, std::span<const double> a_qp, std::span<const double> f_qp,
                         const SolverConfig& cfg)
{
  return HybridSolver(mesh, Method::Ldgh, a_qp, cfg).solve(f_qp);
}

MixedSolution solve_p1(const TriMesh& mesh, std::span<const double> a_qp, std::span<const double> f_qp,
                       const SolverConfig& cfg)
{
  const std::size_t nt = mesh.num_triangles();
  require_size(a_qp, nt * nq, "solve_p1");
  require_size(f_qp, nt * nq, "solve_p1");
  const TriangleRule& rule = triangle_rule();

  std::vector<int> dof(mesh.num_vertices(), -1);
  std::vector<bool> on_boundary(mesh.num_vertices(), false);
  for (std::size_t e = 0; e < mesh.num_edges(); ++e)
    if (mesh.boundary_edge[e])
      on_boundary[mesh.edges[e][0]] = on_boundary[mesh.edges[e][1]] = true;
  int ndof = 0;
  for (std::size_t v = 0; v < dof.size(); ++v)
    if (!on_boundary[v])
      dof[v] = ndof++;

  std::vector<Triplet> trip;
  VectorXd rhs = VectorXd::Zero(ndof);
  std::vector<Geometry> geo(nt);
  for (std::size_t t = 0; t < nt; ++t) {
    geo[t] = geometry(mesh, t);
    const Geometry& g = geo[t];
    double ainv = 0.0;
    double load[3] = {0.0, 0.0, 0.0};
    for (int q = 0; q < nq; ++q) {
      const double w = rule.weight[q] * g.area;
      const std::size_t idx = t * nq + q;
      if (!(a_qp[idx] > 0.0))
        throw ArgumentError("solve_p1: coefficient must be positive");
      ainv += w / a_qp[idx];
      for (int i = 0; i < 3; ++i)
        load[i] += w * f_qp[idx] * rule.bary[q][i];
    }
    const auto& tri = mesh.triangles[t];
    for (int i = 0; i < 3; ++i) {
      if (dof[tri[i]] < 0)
        continue;
      rhs(dof[tri[i]]) += load[i];
      for (int j = 0; j < 3; ++j)
        if (dof[tri[j]] >= 0)
          trip.emplace_back(dof[tri[i]], dof[tri[j]],
                            ainv * (g.grad[i][0] * g.grad[j][0] + g.grad[i][1] * g.grad[j][1]));
    }
  }
  SpMat K(ndof, ndof);
  K.setFromTriplets(trip.begin(), trip.end());

  MixedSolution sol;
  sol.method = Method::P1;
  VectorXd U = VectorXd::Zero(ndof);
  if (ndof > 0 && rhs.squaredNorm() > 0.0) {
    if (cfg.solver == LinearSolver::Direct) {
      Eigen::SimplicialLDLT<SpMat> ldlt(K);
      U = ldlt.solve(rhs);
      sol.residual = (K * U - rhs).norm() / rhs.norm();
    } else {
      Eigen::ConjugateGradient<SpMat, Eigen::Lower | Eigen::Upper, Eigen::DiagonalPreconditioner<double>> cg;
      cg.setTolerance(cfg.tol);
      cg.setMaxIterations(static_cast<Eigen::Index>(cfg.max_iter.value_or(10 * static_cast<std::size_t>(ndof))));
      cg.compute(K);
      U = cg.solve(rhs);
      sol.iterations = static_cast<std::size_t>(cg.iterations());
      sol.residual = cg.error();
      if (cg.info() != Eigen::Success)
        throw SolverError("conjugate gradients did not converge", sol.residual, sol.iterations);
    }
  }

  sol.u_dofs.assign(mesh.num_vertices(), 0.0);
  for (std::size_t v = 0; v < dof.size(); ++v)
    if (dof[v] >= 0)
      sol.u_dofs[v] = U(dof[v]);
  sol.qx.resize(nt * nq);
  sol.qy.resize(nt * nq);
  sol.u.resize(nt * nq);
  double flux_sq = 0.0;
  for (std::size_t t = 0; t < nt; ++t) {
    const Geometry& g = geo[t];
    const auto& tri = mesh.triangles[t];
    double gu[2] = {0.0, 0.0};
    for (int i = 0; i < 3; ++i) {
      gu[0] += sol.u_dofs[tri[i]] * g.grad[i][0];
      gu[1] += sol.u_dofs[tri[i]] * g.grad[i][1];
    }
    for (int q = 0; q < nq; ++q) {
      const std::size_t idx = t * nq + q;
      const double a = a_qp[idx];
      sol.qx[idx] = -gu[0] / a;
      sol.qy[idx] = -gu[1] / a;
      double u = 0.0;
      for (int i = 0; i < 3; ++i)
        u += sol.u_dofs[tri[i]] * rule.bary[q][i];
      sol.u[idx] = u;
      flux_sq += rule.weight[q] * g.area * a * (sol.qx[idx] * sol.qx[idx] + sol.qy[idx] * sol.qy[idx]);
    }
  }
  sol.flux_norm = std::sqrt(flux_sq);
  sol.energy_norm = sol.flux_norm;
  return sol;
}

MixedSolution solve(Method method, const TriMesh& mesh, std::span<const double> a_qp,
                    std::span<const double> f_qp, const SolverConfig& cfg)
{
  switch (method) {
  case Method::Rth:
    return solve_rth(mesh, a_qp, f_qp, cfg);
  case Method::Ldgh:
    return solve_ldgh(mesh, a_qp, f_qp, cfg);
  case Method::P1:
    return solve_p1(mesh, a_qp, f_qp, cfg);
  }
  throw ArgumentError("solve: unknown method");
}

MixedSolution solve_rt0_dense(const TriMesh& mesh, std::span<const double> a_qp, std::span<const double> f_qp)
{
  const std::size_t nt = mesh.num_triangles(), ne = mesh.num_edges();
  require_size(a_qp, nt * nq, "solve_rt0_dense");
  require_size(f_qp, nt * nq, "solve_rt0_dense");
  const TriangleRule& rule = triangle_rule();
  const Eigen::Index n = static_cast<Eigen::Index>(ne + nt);
  MatrixXd S = MatrixXd::Zero(n, n);
  VectorXd rhs = VectorXd::Zero(n);
  std::vector<Geometry> geo(nt);
  for (std::size_t t = 0; t < nt; ++t) {
    geo[t] = geometry(mesh, t);
    const Geometry& g = geo[t];
    double A[3][3] = {};
    double phi[3][2];
    double F = 0.0;
    for (int q = 0; q < nq; ++q) {
      const double* bary = rule.bary[q].data();
      Point2 x{0.0, 0.0};
      for (int i = 0; i < 3; ++i) {
        x.x += bary[i] * g.P[i].x;
        x.y += bary[i] * g.P[i].y;
      }
      for (int i = 0; i < 3; ++i)
        flux_basis(Method::Rth, g, bary, x, i, phi[i]);
      const double w = rule.weight[q] * g.area;
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
          A[i][j] += w * a_qp[t * nq + q] * (phi[i][0] * phi[j][0] + phi[i][1] * phi[j][1]);
      F += w * f_qp[t * nq + q];
    }
    const Eigen::Index row_t = static_cast<Eigen::Index>(ne + t);
    for (int k = 0; k < 3; ++k) {
      const int ek = mesh.tri_edges[t][k];
      const double sk = mesh.edge_sign(t, k);
      for (int l = 0; l < 3; ++l)
        S(ek, mesh.tri_edges[t][l]) += sk * A[k][l] * mesh.edge_sign(t, l);
      S(ek, row_t) -= sk;
      S(row_t, ek) += sk;
    }
    rhs(row_t) = F;
  }
  const VectorXd X = S.partialPivLu().solve(rhs);

  MixedSolution sol;
  sol.method = Method::Rth;
  sol.q_dofs.assign(X.data(), X.data() + ne);
  sol.u_dofs.assign(X.data() + ne, X.data() + ne + nt);
  sol.qx.resize(nt * nq);
  sol.qy.resize(nt * nq);
  sol.u.resize(nt * nq);
  sol.edge_outflux.resize(3 * nt);
  double flux_sq = 0.0;
  double phi[2];
  for (std::size_t t = 0; t < nt; ++t) {
    const Geometry& g = geo[t];
    for (int k = 0; k < 3; ++k)
      sol.edge_outflux[3 * t + k] = mesh.edge_sign(t, k) * sol.q_dofs[mesh.tri_edges[t][k]];
    for (int q = 0; q < nq; ++q) {
      const double* bary = rule.bary[q].data();
      Point2 x{0.0, 0.0};
      for (int i = 0; i < 3; ++i) {
        x.x += bary[i] * g.P[i].x;
        x.y += bary[i] * g.P[i].y;
      }
      double qx = 0.0, qy = 0.0;
      for (int k = 0; k < 3; ++k) {
        flux_basis(Method::Rth, g, bary, x, k, phi);
        qx += sol.edge_outflux[3 * t + k] * phi[0];
        qy += sol.edge_outflux[3 * t + k] * phi[1];
      }
      const std::size_t idx = t * nq + q;
      sol.qx[idx] = qx;
      sol.qy[idx] = qy;
      sol.u[idx] = sol.u_dofs[t];
      flux_sq += rule.weight[q] * g.area * a_qp[idx] * (qx * qx + qy * qy);
    }
  }
  sol.flux_norm = sol.energy_norm = std::sqrt(flux_sq);
  return sol;
}

QoIVector qoi_eval(const MixedSolution& sol, const TriMesh& mesh, const QuadraturePoints& qp,
                   std::span<const double> a_qp, const Subdomain& sub)
{
  check_alignment(mesh, sub);
  const std::vector<bool> mask = subdomain_mask(mesh, sub);
  QoIVector r;
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t)
    for (int q = 0; q < nq; ++q) {
      const std::size_t idx = t * nq + q;
      const double w = qp.w[idx];
      r.quadratic_flux += w * (sol.qx[idx] * sol.qx[idx] + sol.qy[idx] * sol.qy[idx]);
      if (!mask[t])
        continue;
      r.mean_u += w * sol.u[idx];
      r.mean_flux[0] += w * sol.qx[idx];
      r.mean_flux[1] += w * sol.qy[idx];
      r.mean_grad[0] -= w * a_qp[idx] * sol.qx[idx];
      r.mean_grad[1] -= w * a_qp[idx] * sol.qy[idx];
    }
  const double area = sub.area();
  r.mean_u /= area;
  for (int c = 0; c < 2; ++c) {
    r.mean_flux[c] /= area;
    r.mean_grad[c] /= area;
  }
  return r;
}

double flux_error_l2(const MixedSolution& sol, const QuadraturePoints& qp, const Field2& qx_exact,
                     const Field2& qy_exact)
{
  double sum = 0.0;
  for (std::size_t i = 0; i < qp.w.size(); ++i) {
    const double dx = sol.qx[i] - qx_exact(qp.x[i], qp.y[i]);
    const double dy = sol.qy[i] - qy_exact(qp.x[i], qp.y[i]);
    sum += qp.w[i] * (dx * dx + dy * dy);
  }
  return std::sqrt(sum);
}

StabilityReport check_a1_a2(const MixedSolution& sol, const QuadraturePoints& qp, std::span<const double> a_qp,
                            std::span<const double> f_qp)
{
  double f_sq = 0.0, u_sq = 0.0, a_max = 0.0;
  for (std::size_t i = 0; i < qp.w.size(); ++i) {
    f_sq += qp.w[i] * f_qp[i] * f_qp[i];
    u_sq += qp.w[i] * sol.u[i] * sol.u[i];
    a_max = std::max(a_max, a_qp[i]);
  }
  StabilityReport rep;
  rep.a1_ratio = sol.energy_norm > 0.0 ? sol.flux_norm / sol.energy_norm : 1.0;
  if (f_sq > 0.0)
    rep.C_S = sol.energy_norm / (std::sqrt(a_max) * std::sqrt(f_sq));
  if (u_sq > 0.0)
    rep.beta = sol.energy_norm * std::sqrt(a_max) / std::sqrt(u_sq);
  return rep;
}

ParametricSolver::ParametricSolver(const TriMesh& mesh, const FieldTable& table, std::vector<double> y,
                                   Method method, std::vector<double> f_qp, SolverConfig cfg)
    : mesh_(&mesh), table_(&table), y_(std::move(y)), f_(std::move(f_qp)),
      a_([&] {
        if (table.points() != mesh.num_triangles() * nq)
          throw ArgumentError("ParametricSolver: field table is not on the mesh quadrature points");
        std::vector<double> a(table.points());
        table.values(y_, a);
        return a;
      }()),
      solver_(mesh, method, a_, cfg), base_(solver_.solve(f_))
{
}

const MixedSolution& ParametricSolver::cached(const std::vector<std::size_t>& support)
{
  if (support.empty())
    return base_;
  auto it = cache_.find(support);
  if (it != cache_.end())
    return it->second;
  DerivativeResult d = derivative(support);
  return cache_.emplace(support, std::move(d.solution)).first->second;
}

DerivativeResult ParametricSolver::derivative(std::vector<std::size_t> support)
{
  if (support.size() > 2)
    throw CapacityError("parametric derivative: |nu| is limited to 2");
  std::sort(support.begin(), support.end());
  if (std::adjacent_find(support.begin(), support.end()) != support.end())
    throw ArgumentError("parametric derivative: nu must be a 0/1 multi-index");

  DerivativeResult res;
  res.support = support;
  if (support.empty()) {
    res.solution = base_;
    res.norm = base_.energy_norm;
    return res;
  }
  if (auto it = cache_.find(support); it != cache_.end()) {
    res.solution = it->second;
  }

  const std::size_t npts = a_.size();
  std::vector<double> gx(npts, 0.0), gy(npts, 0.0), da(npts);
  const std::size_t k = support.size();
  for (unsigned mask = 1; mask < (1u << k); ++mask) {
    std::vector<std::size_t> T, rest;
    for (std::size_t i = 0; i < k; ++i)
      ((mask >> i) & 1u ? T : rest).push_back(support[i]);
    table_->derivative(y_, T, a_, da);
    const MixedSolution& lower = cached(rest);
    double sup = 0.0;
    for (std::size_t q = 0; q < npts; ++q) {
      gx[q] -= da[q] * lower.qx[q];
      gy[q] -= da[q] * lower.qy[q];
      sup = std::max(sup, std::abs(da[q] / a_[q]));
    }
    res.lemma_rhs += sup * lower.energy_norm;
  }
  if (res.solution.qx.empty()) {
    const std::vector<double> zero(npts, 0.0);
    res.solution = solver_.solve(zero, gx, gy);
    cache_.emplace(support, res.solution);
  }
  res.norm = res.solution.energy_norm;
  return res;
}

} // namespace qmcflux
