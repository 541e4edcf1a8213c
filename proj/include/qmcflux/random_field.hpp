#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace qmcflux {

enum class FieldKind { Affine, Lognormal };
enum class XiKind { Identity, GevreyAffine, GevreySign };

std::string to_string(FieldKind kind);
std::string to_string(XiKind xi);

/// JSON fragment {kind, xi, sigma, s, theta, offset, seed}.
struct FieldConfig {
  FieldKind kind = FieldKind::Affine;
  XiKind xi = XiKind::Identity;
  double sigma = 1.0;   ///< Gevrey order; ω = 1/(σ-1) for the Gevrey transforms
  std::size_t s = 20;
  double theta = 1.3;
  double offset = 5.0;  ///< added to the series (inside exp for lognormal)
  std::uint64_t seed = 0;

  static FieldConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

struct Mode {
  int k = 1;
  int l = 1;
  double amplitude = 0.0;
};

/// First s elements of Z+ x Z+ sorted by k²+ℓ², ties by k; amplitude (k²+ℓ²)^-θ.
std::vector<Mode> build_mode_ordering(std::size_t s, double theta);

/// ξ, ξ' or ξ'' at t. ω is only used by the Gevrey transforms.
/// Throws CapacityError for order > 2.
double xi_eval(XiKind xi, double omega, double t, int order);

/// sup |ξ'|: 1 for the identity, ((ω+1)/ω)^{(ω+1)/ω} ω e^{-(ω+1)/ω} otherwise.
double xi_derivative_sup(XiKind xi, double omega);

struct DecaySequence {
  std::vector<double> b;
  double p_estimate = 0.0;
  double a_min = 0.0; ///< lower bound of a (affine only)
};

class FieldModel {
public:
  /// Throws ArgumentError for bad parameters, ModelInvalid if the affine
  /// coefficient can reach zero.
  explicit FieldModel(FieldConfig cfg);

  const FieldConfig& config() const noexcept { return cfg_; }
  const std::vector<Mode>& modes() const noexcept { return modes_; }
  std::size_t dimension() const noexcept { return modes_.size(); }
  double omega() const noexcept { return omega_; }
  bool gaussian_parameters() const noexcept { return cfg_.kind == FieldKind::Lognormal; }

  double xi(double t, int order = 0) const { return xi_eval(cfg_.xi, omega_, t, order); }
  /// sup |ξ| over the parameter domain.
  double xi_sup() const;
  /// C_G of the Gevrey bound: sup |ξ'|.
  double gevrey_constant() const { return xi_derivative_sup(cfg_.xi, omega_); }
  /// σ used in the Gevrey bound (1 for the identity transform).
  double gevrey_order() const;

  double psi(std::size_t j, double x1, double x2) const;

  /// a(x, y). Components of y beyond s are ignored. Throws ModelInvalid if the
  /// value is not positive.
  double value(double x1, double x2, std::span<const double> y) const;

  DecaySequence decay() const;

private:
  FieldConfig cfg_;
  std::vector<Mode> modes_;
  double omega_ = 0.0;
};

/// Basis values ψ_j tabulated at a fixed set of points, for fast repeated
/// evaluation of a and its parametric derivatives at those points.
class FieldTable {
public:
  FieldTable(const FieldModel& model, std::span<const double> xs, std::span<const double> ys);

  std::size_t points() const noexcept { return npts_; }
  const FieldModel& model() const noexcept { return *model_; }

  void values(std::span<const double> y, std::span<double> out) const;

  /// ∂^T a for a set T of distinct coordinates (|T| <= 2); a_vals must hold a(y).
  void derivative(std::span<const double> y, std::span<const std::size_t> T,
                  std::span<const double> a_vals, std::span<double> out) const;

private:
  const FieldModel* model_;
  std::size_t npts_;
  std::vector<double> psi_; // [j * npts + q]
};

struct AssumptionReport {
  double worst_first = 0.0;   ///< max over y, j of ∥∂_j a/a∥∞ / b_j
  double worst_second = 0.0;  ///< max over y, i<j of ∥∂_i∂_j a/a∥∞ / (2^σ b_i b_j)
  double implied_C_G = 0.0;
  double C_G = 0.0;
  bool gevrey_ok = true;
  double implied_C_Q = 0.0;   ///< lognormal only, r = 1
  bool ratio_ok = true;
  std::size_t samples = 0;
  nlohmann::json to_json() const;
};

/// Checks the Gevrey bound ∥∂^ν a/a∥∞ <= C_G (|ν|!)^σ b^ν for |ν| <= 2 and, for
/// lognormal, ∥a∥∞∥1/a∥∞ <= C_Q Π exp(2 b_j |y_j|), on a 64x64 grid plus the
/// extremum points of every ψ_j.
AssumptionReport check_assumptions(const FieldModel& model, std::span<const std::vector<double>> samples);

} // namespace qmcflux
