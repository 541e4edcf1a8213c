#include "qmcflux/weights.hpp"

#include "qmcflux/errors.hpp"
#include "qmcflux/lattice.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace qmcflux {

namespace {

constexpr std::size_t max_subset_size = 20;
constexpr std::size_t max_csg_dimension = 12;
constexpr double pi = std::numbers::pi;

double factorial(std::size_t k)
{
  double f = 1.0;
  for (std::size_t i = 2; i <= k; ++i)
    f *= static_cast<double>(i);
  return f;
}

// Σ_{v⊆u} (|v|!)^{order_exp} Π_{j∈v} c_j, grouped by |v| through the
// elementary symmetric polynomials of c.
double order_dependent_sum(std::span<const double> c, double order_exp)
{
  std::vector<double> e(c.size() + 1, 0.0);
  e[0] = 1.0;
  for (std::size_t i = 0; i < c.size(); ++i)
    for (std::size_t k = i + 1; k >= 1; --k)
      e[k] += e[k - 1] * c[i];
  double sum = 0.0;
  for (std::size_t k = 0; k < e.size(); ++k)
    sum += std::pow(factorial(k), order_exp) * e[k];
  return sum;
}

void check_subset(std::span<const std::size_t> u, const WeightParams& params)
{
  if (u.size() > max_subset_size)
    throw CapacityError("weights: |u| = " + std::to_string(u.size()) + " exceeds 20");
  for (std::size_t j : u)
    if (j >= params.b.size())
      throw ArgumentError("weights: subset index outside b");
}

} // namespace

void WeightParams::validate() const
{
  if (sigma < 1.0)
    throw ArgumentError("WeightParams: sigma must be >= 1");
  if (!(p > 0.0 && p < 1.0))
    throw ArgumentError("WeightParams: p must lie in (0,1)");
  if (!(r > 0.0))
    throw ArgumentError("WeightParams: r must be positive");
  if (!(lambda > 0.5 && lambda <= 1.0))
    throw ArgumentError("WeightParams: lambda must lie in (1/2, 1]");
  for (double c : {C_R, C_G, C_S, C_E, C_J, C_Q})
    if (!(c > 0.0))
      throw ArgumentError("WeightParams: constants must be positive");
  for (double bj : b)
    if (!(bj >= 0.0))
      throw ArgumentError("WeightParams: b must be nonnegative");
}

double epsilon_upper(double r, double sigma)
{
  const double denom = 2.0 * sigma * r - 4.0;
  if (denom == 0.0)
    return 0.5;
  const double raw = (2.0 * sigma * r - 3.0) / denom;
  if (!(raw > 0.0))
    return 0.5;
  return std::min(raw, 0.5);
}

double select_lambda(double p, double r, double sigma, std::optional<double> epsilon)
{
  if (!(p > 0.0) || !(r > 0.0) || sigma < 1.0)
    throw ArgumentError("select_lambda: need p > 0, r > 0, sigma >= 1");
  if (sigma * p >= 1.0)
    throw TheoryViolation("select_lambda: sigma * p = " + std::to_string(sigma * p) + " >= 1");
  if (p > 2.0 * r / 3.0)
    return p / (2.0 * r - p);
  const double upper = epsilon_upper(r, sigma);
  const double eps = epsilon.value_or(0.5 * upper);
  if (!(eps > 0.0 && eps < upper))
    throw ArgumentError("select_lambda: epsilon must lie in (0, " + std::to_string(upper) + ")");
  return 1.0 / (2.0 - 2.0 * eps);
}

double zeta(double x)
{
  if (!(x > 1.0))
    throw ArgumentError("zeta: argument must exceed 1");
  constexpr int N = 20;
  // B_{2i} / (2i)! for i = 1..6.
  static constexpr double bernoulli_over_factorial[] = {
      1.0 / 6.0 / 2.0,
      -1.0 / 30.0 / 24.0,
      1.0 / 42.0 / 720.0,
      -1.0 / 30.0 / 40320.0,
      5.0 / 66.0 / 3628800.0,
      -691.0 / 2730.0 / 479001600.0,
  };
  double sum = 0.0;
  for (int k = N - 1; k >= 1; --k)
    sum += std::pow(static_cast<double>(k), -x);
  const double Nd = N;
  sum += std::pow(Nd, 1.0 - x) / (x - 1.0) + 0.5 * std::pow(Nd, -x);
  // Rising factorial x (x+1) ... (x+2i-2) times N^{-x-2i+1}.
  double rising = x;
  double power = std::pow(Nd, -x - 1.0);
  for (int i = 1; i <= 6; ++i) {
    sum += bernoulli_over_factorial[i - 1] * rising * power;
    rising *= (x + 2.0 * i - 1.0) * (x + 2.0 * i);
    power /= Nd * Nd;
  }
  return sum;
}

double gamma_bounded(std::span<const std::size_t> u, const WeightParams& params)
{
  check_subset(u, params);
  const double lam = params.lambda;
  const double k = std::pow(params.C_R * params.C_G + 1.0, 2.0 * params.r);
  std::vector<double> c;
  c.reserve(u.size());
  for (std::size_t j : u)
    c.push_back(k * std::pow(params.b[j], 2.0 * params.r));
  const double prefactor = std::pow(2.0 * pi * pi, lam) / zeta(2.0 * lam);
  const double inner = order_dependent_sum(c, 2.0 * params.r * params.sigma);
  return std::pow(prefactor, static_cast<double>(u.size()) / (1.0 + lam)) *
         std::pow(inner, 1.0 / (1.0 + lam));
}

double eta_of(double lambda)
{
  return (2.0 * lambda - 1.0) / (4.0 * lambda);
}

double alpha_j(double b, double lambda)
{
  if (!(lambda > 0.5 && lambda <= 1.0))
    throw ArgumentError("alpha_j: lambda must lie in (1/2, 1]");
  const double alpha = 0.5 * (b + std::sqrt(b * b + 1.0 - 1.0 / (2.0 * lambda)));
  if (!(alpha > b))
    throw InfeasibilityError("alpha_j: alpha_j <= b_j, weight integral diverges");
  return alpha;
}

double rho_j(double lambda, double alpha)
{
  const double eta = eta_of(lambda);
  const double base = std::sqrt(2.0 * pi) * std::exp(alpha * alpha / eta) /
                      (std::pow(pi, 2.0 - 2.0 * eta) * (1.0 - eta) * eta);
  return 2.0 * std::pow(base, lambda) * zeta(lambda + 0.5);
}

double gamma_unbounded(std::span<const std::size_t> u, const WeightParams& params)
{
  check_subset(u, params);
  const double lam = params.lambda;
  const double k = std::pow(params.C_R * params.C_G + 1.0, 2.0 * params.r);
  std::vector<double> c;
  c.reserve(u.size());
  double denominator = 1.0;
  for (std::size_t j : u) {
    const double bj = params.b[j];
    c.push_back(k * std::pow(bj, 2.0 * params.r));
    const double alpha = alpha_j(bj, lam);
    denominator *= rho_j(lam, alpha) * 2.0 * std::exp(2.0 * bj * bj) * normal_cdf(2.0 * bj) *
                   (alpha - bj);
  }
  const double numerator = std::pow(2.0, static_cast<double>(u.size())) *
                           order_dependent_sum(c, 2.0 * params.r * params.sigma);
  return std::pow(numerator / denominator, 1.0 / (1.0 + lam));
}

double csg_lambda(std::size_t s, const WeightFunction& gamma, double lambda, ParameterModel model,
                  std::span<const double> b)
{
  if (s > max_csg_dimension)
    throw CapacityError("csg_lambda: s = " + std::to_string(s) + " exceeds 12");
  if (!(lambda > 0.5 && lambda <= 1.0))
    throw ArgumentError("csg_lambda: lambda must lie in (1/2, 1]");

  std::vector<double> factor(s);
  if (model == ParameterModel::Bounded) {
    const double c = 2.0 * zeta(2.0 * lambda) / std::pow(2.0 * pi * pi, lambda);
    std::fill(factor.begin(), factor.end(), c);
  } else {
    if (b.size() < s)
      throw ArgumentError("csg_lambda: Gaussian model needs b_j for every coordinate");
    for (std::size_t j = 0; j < s; ++j)
      factor[j] = rho_j(lambda, alpha_j(b[j], lambda));
  }

  double sum = 0.0;
  Subset u;
  for (std::uint32_t mask = 1; mask < (1u << s); ++mask) {
    u.clear();
    double prod = 1.0;
    for (std::size_t j = 0; j < s; ++j)
      if (mask & (1u << j)) {
        u.push_back(j);
        prod *= factor[j];
      }
    sum += std::pow(gamma(u), lambda) * prod;
  }
  return std::pow(2.0 * sum, 1.0 / (2.0 * lambda));
}

double recursion_bound(double K0, double K1, double sigma, std::span<const double> b,
                       std::span<const std::size_t> support)
{
  double bnu = 1.0;
  for (std::size_t j : support)
    bnu *= b[j];
  const double order = static_cast<double>(support.size());
  return K0 * std::pow(K1 + 1.0, order) * std::pow(factorial(support.size()), sigma) * bnu;
}

RateReport theoretical_rate(double p, double r, double sigma)
{
  if (sigma * p >= 1.0)
    throw TheoryViolation("theoretical_rate: sigma * p >= 1");
  if (p > 2.0 * r / 3.0)
    return {r / p - 0.5, std::nullopt};
  return {1.0, std::make_pair(0.0, epsilon_upper(r, sigma))};
}

double weight_objective(std::span<const double> gamma, std::span<const double> rho,
                        std::span<const double> beta, double lambda)
{
  double a = 0.0, c = 0.0;
  for (std::size_t i = 0; i < gamma.size(); ++i) {
    a += std::pow(gamma[i], lambda) * rho[i];
    c += beta[i] / gamma[i];
  }
  return std::pow(a, 1.0 / lambda) * c;
}

std::vector<double> optimal_weights(std::span<const double> rho, std::span<const double> beta,
                                    double lambda)
{
  std::vector<double> gamma(rho.size());
  for (std::size_t i = 0; i < rho.size(); ++i)
    gamma[i] = std::pow(beta[i] / rho[i], 1.0 / (1.0 + lambda));
  return gamma;
}

double optimal_objective(std::span<const double> rho, std::span<const double> beta, double lambda)
{
  double sum = 0.0;
  for (std::size_t i = 0; i < rho.size(); ++i)
    sum += std::pow(rho[i], 1.0 / (1.0 + lambda)) * std::pow(beta[i], lambda / (1.0 + lambda));
  return std::pow(sum, (1.0 + lambda) / lambda);
}

std::vector<double> product_weights(const WeightParams& params, ParameterModel model)
{
  const double lam = params.lambda;
  const double k = std::pow(params.C_R * params.C_G + 1.0, 2.0 * params.r);
  std::vector<double> gamma(params.b.size());
  const double prefactor = std::pow(2.0 * pi * pi, lam) / zeta(2.0 * lam);
  for (std::size_t j = 0; j < params.b.size(); ++j) {
    const double bj = params.b[j];
    const double top = k * std::pow(bj, 2.0 * params.r);
    if (model == ParameterModel::Bounded) {
      gamma[j] = std::pow(prefactor * top, 1.0 / (1.0 + lam));
    } else {
      const double alpha = alpha_j(bj, lam);
      const double denom = rho_j(lam, alpha) * 2.0 * std::exp(2.0 * bj * bj) *
                           normal_cdf(2.0 * bj) * (alpha - bj);
      gamma[j] = std::pow(2.0 * top / denom, 1.0 / (1.0 + lam));
    }
  }
  return gamma;
}

} // namespace qmcflux
