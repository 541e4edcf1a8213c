#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace qmcflux {

/// Regularity and stability constants feeding the weight formulas.
struct WeightParams {
  double sigma = 1.0;   ///< Gevrey order, >= 1
  double p = 0.75;      ///< summability exponent of b, in (0,1)
  double r = 1.0;       ///< growth exponent of the quantity of interest
  std::vector<double> b;
  double C_R = 1.0;
  double C_G = 1.0;
  double C_S = 1.0;
  double C_E = 1.0;
  double C_J = 1.0;
  double C_Q = 1.0;
  double lambda = 0.75; ///< in (1/2, 1]
  double epsilon = 0.0; ///< used only when p <= 2r/3

  /// Throws ArgumentError on non-positive constants or λ outside (1/2, 1].
  void validate() const;
};

/// Upper end (2σr - 3)/(2σr - 4) of the admissible ε interval, clipped to 1/2
/// (λ = 1/(2-2ε) must stay <= 1). Returns 1/2 when the interval is empty.
double epsilon_upper(double r, double sigma);

/// λ = p/(2r-p) if p in (2r/3, 1/σ); λ = 1/(2-2ε) if p <= 2r/3.
/// Throws TheoryViolation when σp >= 1, ArgumentError for an inadmissible ε.
double select_lambda(double p, double r, double sigma, std::optional<double> epsilon = std::nullopt);

/// Riemann zeta for x > 1 by Euler-Maclaurin (N = 20, six Bernoulli
/// corrections). Throws ArgumentError for x <= 1.
double zeta(double x);

/// Subsets are lists of distinct 0-based coordinate indices into b.
using Subset = std::vector<std::size_t>;

/// Weight for the uniform model,
///   ((2π²)^λ/ζ(2λ))^{|u|/(1+λ)} (Σ_{v⊆u} (|v|!)^{2rσ} Π_{j∈v} (C_R C_G+1)^{2r} b_j^{2r})^{1/(1+λ)}.
/// Throws CapacityError for |u| > 20.
double gamma_bounded(std::span<const std::size_t> u, const WeightParams& params);

/// Optimal exponential weight rate α_j = (b_j + sqrt(b_j² + 1 - 1/(2λ)))/2.
/// Throws InfeasibilityError if the result does not exceed b_j.
double alpha_j(double b, double lambda);

/// η = (2λ-1)/(4λ).
double eta_of(double lambda);

/// ϱ_j(λ) = 2 (sqrt(2π) exp(α_j²/η) / (π^{2-2η}(1-η)η))^λ ζ(λ+1/2).
double rho_j(double lambda, double alpha);

/// Weight for the Gaussian model. Throws CapacityError for |u| > 20.
double gamma_unbounded(std::span<const std::size_t> u, const WeightParams& params);

enum class ParameterModel { Bounded, Gaussian };

using WeightFunction = std::function<double(std::span<const std::size_t>)>;

/// C_{s,γ,λ} (bounded) or C_{s,γ,λ,α} (Gaussian, needs b for ϱ_j), summing
/// over all nonempty subsets of {0..s-1}. Throws CapacityError for s > 12.
double csg_lambda(std::size_t s, const WeightFunction& gamma, double lambda, ParameterModel model,
                  std::span<const double> b = {});

/// K0 (K1+1)^{|ν|} (|ν|!)^σ b^ν for ν given by its support.
double recursion_bound(double K0, double K1, double sigma, std::span<const double> b,
                       std::span<const std::size_t> support);

struct RateReport {
  double exponent = 0.0;
  /// Present in the p <= 2r/3 regime: the rate is 1 - ε for every ε in (0, upper).
  std::optional<std::pair<double, double>> epsilon_interval;
};

/// r/p - 1/2 if p in (2r/3, 1/σ), else 1 - ε. Throws TheoryViolation if σp >= 1.
RateReport theoretical_rate(double p, double r, double sigma);

/// g(γ) = (Σ γ_i^λ ρ_i)^{1/λ} (Σ β_i/γ_i).
double weight_objective(std::span<const double> gamma, std::span<const double> rho,
                        std::span<const double> beta, double lambda);

/// Minimizer γ_i = (β_i/ρ_i)^{1/(1+λ)} of weight_objective.
std::vector<double> optimal_weights(std::span<const double> rho, std::span<const double> beta,
                                    double lambda);

/// Minimum of weight_objective, (Σ ρ_i^{1/(1+λ)} β_i^{λ/(1+λ)})^{(1+λ)/λ}.
double optimal_objective(std::span<const double> rho, std::span<const double> beta, double lambda);

/// Product-form weights for CBC. Coordinate j gets the v = u = {j} term of the
/// general weight (the order-one factor without the v = ∅ summand), so the
/// weights decay like b_j^{2r/(1+λ)}.
std::vector<double> product_weights(const WeightParams& params, ParameterModel model);

} // namespace qmcflux
