#include "fem_support.hpp"

#include "qmcflux/errors.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <set>

using namespace qmcflux;
using namespace qmcflux::testing;

namespace {

constexpr double pi = std::numbers::pi;

double net_outflux(const TriMesh& mesh, const MixedSolution& sol, const std::vector<bool>& in_set)
{
  double total = 0.0;
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t)
    if (in_set[t])
      for (int k = 0; k < 3; ++k)
        total += sol.edge_outflux[3 * t + k];
  return total;
}

double integral_over(const QuadraturePoints& qp, const std::vector<double>& f, const std::vector<bool>& in_set)
{
  double total = 0.0;
  for (std::size_t i = 0; i < qp.w.size(); ++i)
    if (in_set[i / 7])
      total += qp.w[i] * f[i];
  return total;
}

bool all_zero(const std::vector<double>& v)
{
  for (double x : v)
    if (x != 0.0)
      return false;
  return true;
}

} // namespace

TEST_CASE("mesh counts")
{
  const TriMesh m1 = build_mesh(1);
  CHECK(m1.num_vertices() == 4);
  CHECK(m1.num_triangles() == 2);
  CHECK(m1.num_edges() == 5);
  const TriMesh m2 = build_mesh(2);
  CHECK(m2.num_vertices() == 9);
  CHECK(m2.num_triangles() == 8);
  CHECK(m2.num_edges() == 16);
  CHECK_THROWS_AS(build_mesh(0), ArgumentError);

  for (int m : {1, 3, 7, 10}) {
    const TriMesh mesh = build_mesh(m);
    const long euler = static_cast<long>(mesh.num_vertices()) - static_cast<long>(mesh.num_edges()) +
                       static_cast<long>(mesh.num_triangles());
    CHECK(euler == 1);
    double area = 0.0;
    for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
      CHECK(mesh.area(t) > 0.0);
      area += mesh.area(t);
    }
    CHECK(area == doctest::Approx(1.0).epsilon(1e-14));
    for (std::size_t e = 0; e < mesh.num_edges(); ++e) {
      const int sides = (mesh.edge_tris[e][0] >= 0) + (mesh.edge_tris[e][1] >= 0);
      CHECK(sides == (mesh.boundary_edge[e] ? 1 : 2));
      CHECK(mesh.edges[e][0] < mesh.edges[e][1]);
    }
  }
}

TEST_CASE("edge orientation")
{
  const TriMesh mesh = build_mesh(4);
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    const Point2 c = mesh.centroid(t);
    for (int k = 0; k < 3; ++k) {
      const int e = mesh.tri_edges[t][k];
      const Point2 n = mesh.edge_normal(static_cast<std::size_t>(e));
      CHECK(n.x * n.x + n.y * n.y == doctest::Approx(1.0));
      // Outward normal points away from the centroid.
      const Point2 p = mesh.vertices[mesh.edges[e][0]];
      const double outward = mesh.edge_sign(t, k) * (n.x * (p.x - c.x) + n.y * (p.y - c.y));
      CHECK(outward > 0.0);
    }
  }
  // Interior edges get opposite signs from their two triangles.
  for (std::size_t e = 0; e < mesh.num_edges(); ++e) {
    if (mesh.boundary_edge[e])
      continue;
    int signs = 0;
    for (int side = 0; side < 2; ++side) {
      const int t = mesh.edge_tris[e][side];
      for (int k = 0; k < 3; ++k)
        if (mesh.tri_edges[t][k] == static_cast<int>(e))
          signs += mesh.edge_sign(static_cast<std::size_t>(t), k);
    }
    CHECK(signs == 0);
  }
}

TEST_CASE("subdomain alignment")
{
  CHECK_NOTHROW(check_alignment(build_mesh(5), Subdomain{}));
  CHECK_NOTHROW(check_alignment(build_mesh(10), Subdomain{}));
  CHECK_THROWS_AS(check_alignment(build_mesh(7), Subdomain{}), AlignmentError);
  const TriMesh mesh = build_mesh(5);
  const auto mask = subdomain_mask(mesh, Subdomain{});
  double area = 0.0;
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t)
    if (mask[t])
      area += mesh.area(t);
  CHECK(area == doctest::Approx(0.36).epsilon(1e-14));

  const TriMesh odd = build_mesh(7);
  const QuadraturePoints qp = quadrature_points(odd);
  const std::vector<double> one(qp.w.size(), 1.0);
  const MixedSolution sol = solve_rth(odd, one, one);
  CHECK_THROWS_AS(qoi_eval(sol, odd, qp, one), AlignmentError);
}

TEST_CASE("seven-point rule integrates quintics exactly")
{
  const TriangleRule& rule = triangle_rule();
  double wsum = 0.0;
  for (double w : rule.weight)
    wsum += w;
  CHECK(wsum == doctest::Approx(1.0).epsilon(1e-15));
  // ∫ λ1^a λ2^b λ3^c over the reference simplex (area 1/2) = a! b! c! / (a+b+c+2)!.
  const auto fact = [](int k) {
    double f = 1.0;
    for (int i = 2; i <= k; ++i)
      f *= i;
    return f;
  };
  for (int a = 0; a <= 5; ++a)
    for (int b = 0; a + b <= 5; ++b)
      for (int c = 0; a + b + c <= 5; ++c) {
        double q = 0.0;
        for (int i = 0; i < 7; ++i)
          q += rule.weight[i] * std::pow(rule.bary[i][0], a) * std::pow(rule.bary[i][1], b) *
               std::pow(rule.bary[i][2], c);
        const double exact = 2.0 * fact(a) * fact(b) * fact(c) / fact(a + b + c + 2);
        CHECK(q == doctest::Approx(exact).epsilon(1e-13));
      }
}

TEST_CASE("zero data gives zero solutions")
{
  const TriMesh mesh = build_mesh(5);
  const QuadraturePoints qp = quadrature_points(mesh);
  const std::vector<double> one(qp.w.size(), 1.0), zero(qp.w.size(), 0.0);
  for (Method method : {Method::Rth, Method::P1, Method::Ldgh}) {
    const MixedSolution sol = solve(method, mesh, one, zero);
    CHECK(all_zero(sol.qx));
    CHECK(all_zero(sol.qy));
    CHECK(all_zero(sol.u));
    CHECK(all_zero(sol.m_dofs));
    CHECK(sol.energy_norm == 0.0);
    const QoIVector q = qoi_eval(sol, mesh, qp, one);
    CHECK(q.mean_u == 0.0);
    CHECK(q.mean_flux[0] == 0.0);
    CHECK(q.mean_grad[1] == 0.0);
    CHECK(q.quadratic_flux == 0.0);
  }
}

TEST_CASE("method names")
{
  CHECK(parse_method("rth") == Method::Rth);
  CHECK(parse_method("p1") == Method::P1);
  CHECK(parse_method("ldgh") == Method::Ldgh);
  CHECK(to_string(Method::Ldgh) == "ldgh");
  CHECK_THROWS_AS(parse_method("bdm"), ArgumentError);
}

TEST_CASE("local conservation for rth and ldgh")
{
  for (const auto& cfg : shipped_models()) {
    const FieldModel model(cfg);
    for (Method method : {Method::Rth, Method::Ldgh}) {
      Problem pb(10, model);
      const auto y = sample(model, 4, 0);
      const auto a = pb.coefficient(y);
      const MixedSolution sol = solve(method, pb.mesh, a, pb.f);
      const std::vector<bool> everything(pb.mesh.num_triangles(), true);
      CHECK(std::abs(net_outflux(pb.mesh, sol, everything) - 0.5) < 1e-9);
      const auto inner = subdomain_mask(pb.mesh, Subdomain{});
      CHECK(std::abs(net_outflux(pb.mesh, sol, inner) - integral_over(pb.qp, pb.f, inner)) < 1e-9);
      CHECK(integral_over(pb.qp, pb.f, inner) == doctest::Approx(0.18).epsilon(1e-14));

      // Random unions of elements.
      const CounterRng rng(77, static_cast<std::uint64_t>(method));
      for (std::uint64_t trial = 0; trial < 5; ++trial) {
        std::vector<bool> set(pb.mesh.num_triangles());
        for (std::size_t t = 0; t < set.size(); ++t)
          set[t] = rng.uniform(trial * 1000 + t) < 0.4;
        CHECK(std::abs(net_outflux(pb.mesh, sol, set) - integral_over(pb.qp, pb.f, set)) < 1e-9);
      }
    }
  }
}

TEST_CASE("conservation with unit coefficient at m = 5")
{
  const TriMesh mesh = build_mesh(5);
  const QuadraturePoints qp = quadrature_points(mesh);
  const std::vector<double> one(qp.w.size(), 1.0);
  const auto f = tabulate(qp, [](double x, double) { return x; });
  const MixedSolution sol = solve_rth(mesh, one, f);
  double boundary = 0.0;
  for (std::size_t e = 0; e < mesh.num_edges(); ++e)
    if (mesh.boundary_edge[e]) {
      const int t = mesh.edge_tris[e][0] >= 0 ? mesh.edge_tris[e][0] : mesh.edge_tris[e][1];
      for (int k = 0; k < 3; ++k)
        if (mesh.tri_edges[t][k] == static_cast<int>(e))
          boundary += sol.edge_outflux[3 * t + k];
    }
  CHECK(std::abs(boundary - 0.5) < 1e-9);
}

TEST_CASE("boundary outflux does not depend on the sample")
{
  const FieldModel model(shipped_models()[2]);
  Problem pb(10, model);
  const std::vector<bool> everything(pb.mesh.num_triangles(), true);
  for (std::uint64_t i = 0; i < 10; ++i) {
    const auto a = pb.coefficient(sample(model, 9, i));
    CHECK(std::abs(net_outflux(pb.mesh, solve_rth(pb.mesh, a, pb.f), everything) - 0.5) < 1e-9);
  }
}

TEST_CASE("rth normal flux is single valued and multipliers vanish on the boundary")
{
  const FieldModel model(shipped_models()[0]);
  Problem pb(5, model);
  const auto a = pb.coefficient(sample(model, 1, 1));
  SolverConfig direct;
  direct.solver = LinearSolver::Direct;
  const MixedSolution sol = solve_rth(pb.mesh, a, pb.f, direct);
  for (std::size_t e = 0; e < pb.mesh.num_edges(); ++e) {
    if (pb.mesh.boundary_edge[e]) {
      CHECK(sol.m_dofs[e] == 0.0);
      continue;
    }
    double sum = 0.0;
    for (int side = 0; side < 2; ++side) {
      const int t = pb.mesh.edge_tris[e][side];
      for (int k = 0; k < 3; ++k)
        if (pb.mesh.tri_edges[t][k] == static_cast<int>(e))
          sum += sol.edge_outflux[3 * t + k];
    }
    CHECK(std::abs(sum) < 1e-13);
  }
  const MixedSolution ld = solve_ldgh(pb.mesh, a, pb.f);
  for (std::size_t e = 0; e < pb.mesh.num_edges(); ++e)
    if (pb.mesh.boundary_edge[e]) {
      CHECK(ld.m_dofs[2 * e] == 0.0);
      CHECK(ld.m_dofs[2 * e + 1] == 0.0);
    }
}

TEST_CASE("hybridized and saddle-point RT0 agree")
{
  for (const auto& cfg : shipped_models()) {
    const FieldModel model(cfg);
    Problem pb(5, model);
    const auto a = pb.coefficient(sample(model, 5, 3));
    const MixedSolution hyb = solve_rth(pb.mesh, a, pb.f);
    const MixedSolution dense = solve_rt0_dense(pb.mesh, a, pb.f);
    REQUIRE(hyb.q_dofs.size() == dense.q_dofs.size());
    REQUIRE(hyb.u_dofs.size() == dense.u_dofs.size());
    for (std::size_t i = 0; i < hyb.q_dofs.size(); ++i)
      CHECK(std::abs(hyb.q_dofs[i] - dense.q_dofs[i]) < 1e-8);
    for (std::size_t i = 0; i < hyb.u_dofs.size(); ++i)
      CHECK(std::abs(hyb.u_dofs[i] - dense.u_dofs[i]) < 1e-8);
  }
}

TEST_CASE("manufactured solution rates")
{
  const auto rth = manufactured_errors(Method::Rth, {8, 16, 32, 64});
  const auto p1 = manufactured_errors(Method::P1, {8, 16, 32, 64});
  const auto ldgh = manufactured_errors(Method::Ldgh, {8, 16, 32});
  CHECK(std::abs(fitted_rate(rth) - 1.0) <= 0.15);
  CHECK(std::abs(fitted_rate(p1) - 1.0) <= 0.15);
  CHECK(fitted_rate(ldgh) >= 0.9);
  for (std::size_t i = 1; i < rth.size(); ++i) {
    CHECK(rth[i].second < rth[i - 1].second);
    CHECK(p1[i].second < p1[i - 1].second);
  }
}

TEST_CASE("p1 solution is symmetric for data even in the second coordinate")
{
  for (int m : {5, 10}) {
    const TriMesh mesh = build_mesh(m);
    const QuadraturePoints qp = quadrature_points(mesh);
    const auto a = tabulate(qp, [](double x, double) { return 1.0 + 0.5 * std::sin(pi * x); });
    const auto f = tabulate(qp, [](double x, double) { return x; });
    const MixedSolution sol = solve_p1(mesh, a, f, {1e-14});
    const int n = m + 1;
    double scale = 0.0;
    for (double u : sol.u_dofs)
      scale = std::max(scale, std::abs(u));
    for (int j = 0; j <= m; ++j)
      for (int i = 0; i <= m; ++i)
        CHECK(std::abs(sol.u_dofs[j * n + i] - sol.u_dofs[(m - j) * n + i]) < 1e-10 * scale);
    const QoIVector q = qoi_eval(sol, mesh, qp, a);
    CHECK(std::abs(q.mean_flux[1]) < 1e-9);
    CHECK(std::abs(q.mean_grad[1]) < 1e-9);
  }
}

TEST_CASE("quantities of interest refine at first order")
{
  const FieldModel model(shipped_models()[0]);
  const auto y = sample(model, 12, 0);
  std::vector<QoIVector> q;
  for (int m : {5, 10, 20, 40}) {
    Problem pb(m, model);
    const auto a = pb.coefficient(y);
    q.push_back(qoi_eval(solve_rth(pb.mesh, a, pb.f), pb.mesh, pb.qp, a));
  }
  const auto diff = [&](std::size_t i) { return std::abs(q[i + 1].mean_flux[0] - q[i].mean_flux[0]); };
  // Successive differences shrink by about a factor 2 per refinement (O(h)) or faster.
  CHECK(diff(1) < 0.75 * diff(0));
  CHECK(diff(2) < 0.75 * diff(1));
  for (const QoIVector& v : q) {
    CHECK(std::isfinite(v.mean_u));
    CHECK(v.quadratic_flux >= 0.0);
  }
}

TEST_CASE("stability diagnostics")
{
  const FieldModel model(shipped_models()[2]);
  Problem pb(10, model);
  const auto a = pb.coefficient(sample(model, 2, 0));
  const MixedSolution rth = solve_rth(pb.mesh, a, pb.f);
  const auto r = check_a1_a2(rth, pb.qp, a, pb.f);
  CHECK(r.a1_ratio == 1.0);
  CHECK(r.C_S > 0.0);
  CHECK(r.beta > 0.0);
  SolverConfig cfg;
  cfg.tau = 1.0;
  const MixedSolution ld = solve_ldgh(pb.mesh, a, pb.f, cfg);
  const auto rl = check_a1_a2(ld, pb.qp, a, pb.f);
  CHECK(rl.a1_ratio <= 1.0);
  CHECK(rl.a1_ratio > 0.5);
  CHECK(ld.jump_norm > 0.0);
}

TEST_CASE("empirical stability constant is mesh independent")
{
  for (const auto& cfg : {shipped_models()[0], shipped_models()[2]}) {
    const FieldModel model(cfg);
    std::vector<double> cs;
    for (int m : {5, 10, 20}) {
      Problem pb(m, model);
      double worst = 0.0;
      for (std::uint64_t i = 0; i < 10; ++i) {
        const auto a = pb.coefficient(sample(model, 6, i));
        worst = std::max(worst, check_a1_a2(solve_rth(pb.mesh, a, pb.f), pb.qp, a, pb.f).C_S);
      }
      cs.push_back(worst);
    }
    const auto [lo, hi] = std::minmax_element(cs.begin(), cs.end());
    CHECK(*hi <= 2.0 * *lo);
  }
}

TEST_CASE("direct and iterative multiplier solves agree")
{
  const FieldModel model(shipped_models()[3]);
  Problem pb(10, model);
  const auto a = pb.coefficient(sample(model, 1, 0));
  for (Method method : {Method::Rth, Method::Ldgh, Method::P1}) {
    SolverConfig direct;
    direct.solver = LinearSolver::Direct;
    const MixedSolution s1 = solve(method, pb.mesh, a, pb.f);
    const MixedSolution s2 = solve(method, pb.mesh, a, pb.f, direct);
    CHECK(s1.iterations > 0);
    for (std::size_t i = 0; i < s1.qx.size(); i += 13)
      CHECK(s1.qx[i] == doctest::Approx(s2.qx[i]).epsilon(1e-7).scale(1e-9));
  }
}

TEST_CASE("iteration cap raises a solver error")
{
  const FieldModel model(shipped_models()[0]);
  Problem pb(20, model);
  const auto a = pb.coefficient(sample(model, 1, 0));
  SolverConfig cfg;
  cfg.max_iter = 2;
  try {
    solve_rth(pb.mesh, a, pb.f, cfg);
    FAIL("expected SolverError");
  } catch (const SolverError& e) {
    CHECK(e.iterations() == 2);
    CHECK(e.residual() > 1e-10);
  }
}

TEST_CASE("parametric derivative of order zero is the plain solve")
{
  const FieldModel model(shipped_models()[1]);
  Problem pb(10, model);
  const auto y = sample(model, 3, 3);
  const FieldTable table(model, pb.qp.x, pb.qp.y);
  ParametricSolver ps(pb.mesh, table, y, Method::Rth, pb.f);
  const auto d0 = ps.derivative({});
  const MixedSolution direct = solve_rth(pb.mesh, pb.coefficient(y), pb.f);
  CHECK(d0.solution.q_dofs == direct.q_dofs);
  CHECK(d0.norm == direct.energy_norm);
  CHECK_THROWS_AS(ps.derivative({0, 1, 2}), CapacityError);
  CHECK_THROWS_AS(ps.derivative({1, 1}), ArgumentError);
}

TEST_CASE("lognormal first derivatives obey the single-term bound")
{
  const FieldModel model(shipped_models()[2]);
  Problem pb(10, model);
  const FieldTable table(model, pb.qp.x, pb.qp.y);
  const auto b = model.decay().b;
  for (std::uint64_t i = 0; i < 3; ++i) {
    ParametricSolver ps(pb.mesh, table, sample(model, 21, i), Method::Rth, pb.f);
    for (std::size_t j = 0; j < model.dimension(); ++j) {
      const auto d = ps.derivative({j});
      CHECK(d.norm <= b[j] * ps.base().energy_norm * (1.0 + 1e-12));
      CHECK(d.norm <= d.lemma_rhs * (1.0 + 1e-12));
    }
  }
}

TEST_CASE("parametric derivatives match finite differences")
{
  for (const auto& cfg : shipped_models()) {
    const FieldModel model(cfg);
    Problem pb(5, model);
    const auto y = sample(model, 31, 0);
    const auto check = fd_check(pb, model, y, Method::Rth, {{0}, {2}, {0, 1}, {1, 3}});
    for (double rel : check)
      CHECK(rel < 1e-3);
  }
  const FieldModel model(shipped_models()[3]);
  Problem pb(5, model);
  for (double rel : fd_check(pb, model, sample(model, 8, 1), Method::Ldgh, {{0}, {0, 2}}))
    CHECK(rel < 1e-3);
}

TEST_CASE("parametric regularity bounds")
{
  for (const auto& cfg : shipped_models()) {
    const FieldModel model(cfg);
    Problem pb(5, model);
    const RegularityCheck rc = regularity_check(pb, model, sample(model, 40, 0), Method::Rth, 8);
    CHECK(rc.recursion_violations == 0);
    CHECK(rc.closed_violations == 0);
    CHECK(rc.gevrey_violations == 0);
    CHECK(rc.checked == 1 + 8 + 28);
  }
}

TEST_CASE("quadratic functional derivative bound")
{
  for (const auto& cfg : {shipped_models()[0], shipped_models()[3]}) {
    const FieldModel model(cfg);
    Problem pb(10, model);
    const FieldTable table(model, pb.qp.x, pb.qp.y);
    const auto y = sample(model, 50, 0);
    SolverConfig direct;
    direct.solver = LinearSolver::Direct;
    ParametricSolver ps(pb.mesh, table, y, Method::Rth, pb.f, direct);
    const auto l2 = [&](const MixedSolution& a, const MixedSolution& b) {
      double s = 0.0;
      for (std::size_t i = 0; i < pb.qp.w.size(); ++i)
        s += pb.qp.w[i] * (a.qx[i] * b.qx[i] + a.qy[i] * b.qy[i]);
      return s;
    };
    const MixedSolution q0 = ps.base();
    const MixedSolution q1 = ps.derivative({0}).solution;
    const MixedSolution q2 = ps.derivative({1}).solution;
    const MixedSolution q12 = ps.derivative({0, 1}).solution;
    // ∂_u J = Σ_{v ⊆ u} ∫ ∂_v q · ∂_{u∖v} q.
    const double dJ1 = 2.0 * l2(q0, q1);
    const double dJ12 = 2.0 * l2(q0, q12) + 2.0 * l2(q1, q2);
    CHECK(std::abs(dJ1) <= l2(q0, q0) + l2(q1, q1));
    CHECK(std::abs(dJ12) <= l2(q0, q0) + l2(q1, q1) + l2(q2, q2) + l2(q12, q12));

    // Finite-difference check of ∂_1 J through the quadratic QoI.
    const double h = 1e-4;
    auto J = [&](double shift) {
      auto z = y;
      z[0] += shift;
      const auto a = pb.coefficient(z);
      return qoi_eval(solve_rth(pb.mesh, a, pb.f, direct), pb.mesh, pb.qp, a).quadratic_flux;
    };
    CHECK(dJ1 == doctest::Approx((J(h) - J(-h)) / (2.0 * h)).epsilon(1e-5));
  }
}
