#pragma once

#include "qmcflux/mesh.hpp"

#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace qmcflux {

class FieldTable;

enum class Method { Rth, P1, Ldgh };
std::string to_string(Method method);
/// "rth", "p1" or "ldgh"; throws ArgumentError otherwise.
Method parse_method(const std::string& name);

enum class LinearSolver { Cg, Direct };

struct SolverConfig {
  double tol = 1e-10;                    ///< relative residual for CG
  std::optional<std::size_t> max_iter;   ///< default 10 * dof
  LinearSolver solver = LinearSolver::Cg;
  double tau = 1.0;                      ///< LDG-H stabilization
};

using Field2 = std::function<double(double, double)>;

/// Values of a scalar field at the quadrature points.
std::vector<double> tabulate(const QuadraturePoints& qp, const Field2& fn);

/// Discrete solution. Flux and scalar are also stored at the quadrature points
/// so that norms and quantities of interest are method independent.
struct MixedSolution {
  Method method = Method::Rth;
  /// rth: normal flux through each edge along its global normal;
  /// ldgh: six coefficients per triangle (x components at the three vertices, then y).
  std::vector<double> q_dofs;
  /// rth: one value per triangle; ldgh: three per triangle; p1: one per vertex.
  std::vector<double> u_dofs;
  /// rth: one value per edge; ldgh: two per edge (low, then high vertex); zero on the boundary.
  std::vector<double> m_dofs;

  std::vector<double> qx, qy, u; ///< at quadrature points

  /// Net numerical outflux of triangle t through local edge k, [3 t + k]
  /// (q·n + τ(u - m) for ldgh). Empty for p1.
  std::vector<double> edge_outflux;

  double flux_norm = 0.0;   ///< ∥√a q∥
  double jump_norm = 0.0;   ///< ∥√τ (u - m)∥ over element boundaries, ldgh only
  double energy_norm = 0.0; ///< ∥q∥_{Q_h} = sqrt(flux_norm² + jump_norm²)

  std::size_t iterations = 0;
  double residual = 0.0;
};

/// Hybridized solver for rth (RT0-P0 with piecewise constant multipliers,
/// τ = 0) and ldgh (P1 flux, P1 scalar, P1 multipliers). Element unknowns are
/// eliminated locally; the multiplier system is assembled once per
/// coefficient and can be solved for several right-hand sides.
class HybridSolver {
public:
  HybridSolver(const TriMesh& mesh, Method method, std::span<const double> a_qp, SolverConfig cfg = {});
  ~HybridSolver();
  HybridSolver(HybridSolver&&) noexcept;
  HybridSolver& operator=(HybridSolver&&) noexcept;

  /// Source f at the quadrature points.
  MixedSolution solve(std::span<const double> f_qp) const;

  /// Adds G(r) = ∫ g·r to the first equation; g given at the quadrature points.
  MixedSolution solve(std::span<const double> f_qp, std::span<const double> gx,
                      std::span<const double> gy) const;

  std::size_t dofs() const;
  Method method() const;

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

MixedSolution solve_rth(const TriMesh& mesh, std::span<const double> a_qp, std::span<const double> f_qp,
                        const SolverConfig& cfg = {});
MixedSolution solve_ldgh(const TriMesh& mesh, std::span<const double> a_qp, std::span<const double> f_qp,
                         const SolverConfig& cfg = {});
/// Conforming P1 for -div(a^{-1} grad u) = f, u = 0 on the boundary; the
/// flux is q = -a^{-1} grad u.
MixedSolution solve_p1(const TriMesh& mesh, std::span<const double> a_qp, std::span<const double> f_qp,
                       const SolverConfig& cfg = {});
MixedSolution solve(Method method, const TriMesh& mesh, std::span<const double> a_qp,
                    std::span<const double> f_qp, const SolverConfig& cfg = {});

/// Unhybridized RT0-P0 saddle-point system (all edge fluxes and element
/// values) solved by dense LU. Intended for small meshes.
MixedSolution solve_rt0_dense(const TriMesh& mesh, std::span<const double> a_qp, std::span<const double> f_qp);

struct QoIVector {
  double mean_u = 0.0;
  double mean_grad[2] = {0.0, 0.0}; ///< mean of -a q
  double mean_flux[2] = {0.0, 0.0};
  double quadratic_flux = 0.0;      ///< ∫_D q·q
};

/// Means over the subdomain (divided by its area) and the quadratic
/// functional over D. Throws AlignmentError for a misaligned subdomain.
QoIVector qoi_eval(const MixedSolution& sol, const TriMesh& mesh, const QuadraturePoints& qp,
                   std::span<const double> a_qp, const Subdomain& sub = {});

/// ∥q - q*∥_{L²} by the seven-point rule.
double flux_error_l2(const MixedSolution& sol, const QuadraturePoints& qp, const Field2& qx_exact,
                     const Field2& qy_exact);

struct StabilityReport {
  double a1_ratio = 0.0;    ///< ∥√a q∥ / ∥q∥_{Q_h}, at most 1
  double C_S = 0.0;         ///< ∥q∥_{Q_h} / (∥a∥∞^{1/2} ∥f∥)
  double beta = 0.0;        ///< ∥q∥_{Q_h} sqrt(a_max) / ∥u∥
};

StabilityReport check_a1_a2(const MixedSolution& sol, const QuadraturePoints& qp, std::span<const double> a_qp,
                            std::span<const double> f_qp);

struct DerivativeResult {
  std::vector<std::size_t> support;
  MixedSolution solution;
  double norm = 0.0;        ///< ∥∂^ν q∥_{Q_h}
  double lemma_rhs = 0.0;   ///< Σ_{0 ≠ m ≤ ν} ∥∂^m a / a∥ ∥∂^{ν-m} q∥_{Q_h}, sup over quadrature points
};

/// Parametric derivatives ∂^ν (q, u, m) for ν in {0,1}^s with |ν| <= 2 at a
/// fixed parameter y. The hybrid operator is assembled once and shared by the
/// whole derivative chain; lower-order derivatives are cached.
class ParametricSolver {
public:
  ParametricSolver(const TriMesh& mesh, const FieldTable& table, std::vector<double> y, Method method,
                   std::vector<double> f_qp, SolverConfig cfg = {});

  const MixedSolution& base() const { return base_; }
  std::span<const double> coefficient() const { return a_; }

  /// Throws CapacityError for |ν| > 2, ArgumentError for repeated indices.
  DerivativeResult derivative(std::vector<std::size_t> support);

private:
  const MixedSolution& cached(const std::vector<std::size_t>& support);

  const TriMesh* mesh_;
  const FieldTable* table_;
  std::vector<double> y_;
  std::vector<double> f_;
  std::vector<double> a_;
  HybridSolver solver_;
  MixedSolution base_;
  std::map<std::vector<std::size_t>, MixedSolution> cache_;
};

} // namespace qmcflux
