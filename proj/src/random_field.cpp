#include "qmcflux/random_field.hpp"

#include "qmcflux/errors.hpp"
#include "qmcflux/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace qmcflux {

namespace {

constexpr double pi = std::numbers::pi;

FieldKind parse_kind(const std::string& s)
{
  if (s == "affine")
    return FieldKind::Affine;
  if (s == "lognormal")
    return FieldKind::Lognormal;
  throw ArgumentError("field: unknown kind '" + s + "'");
}

XiKind parse_xi(const std::string& s)
{
  if (s == "identity")
    return XiKind::Identity;
  if (s == "gevrey-affine")
    return XiKind::GevreyAffine;
  if (s == "gevrey-sign")
    return XiKind::GevreySign;
  throw ArgumentError("field: unknown xi '" + s + "'");
}

// g(u) = exp(-u^-ω) for u > 0 and its first two derivatives.
double gevrey_profile(double omega, double u, int order)
{
  if (u <= 0.0)
    return 0.0;
  const double p = std::pow(u, -omega);
  const double g = std::exp(-p);
  if (order == 0)
    return g;
  const double d1 = omega * p / u; // d/du of -u^-ω
  if (order == 1)
    return g * d1;
  const double d2 = -omega * (omega + 1.0) * p / (u * u);
  return g * (d1 * d1 + d2);
}

} // namespace

std::string to_string(FieldKind kind)
{
  return kind == FieldKind::Affine ? "affine" : "lognormal";
}

std::string to_string(XiKind xi)
{
  switch (xi) {
  case XiKind::Identity:
    return "identity";
  case XiKind::GevreyAffine:
    return "gevrey-affine";
  case XiKind::GevreySign:
    return "gevrey-sign";
  }
  return "identity";
}

FieldConfig FieldConfig::from_json(const nlohmann::json& j)
{
  FieldConfig cfg;
  cfg.kind = parse_kind(j.value("kind", std::string("affine")));
  cfg.xi = parse_xi(j.value("xi", std::string("identity")));
  cfg.sigma = j.value("sigma", 1.0);
  cfg.s = j.value("s", std::size_t{20});
  cfg.theta = j.value("theta", 1.3);
  cfg.offset = j.value("offset", cfg.kind == FieldKind::Affine ? 5.0 : 0.0);
  cfg.seed = j.value("seed", std::uint64_t{0});
  return cfg;
}

nlohmann::json FieldConfig::to_json() const
{
  return {{"kind", to_string(kind)}, {"xi", to_string(xi)}, {"sigma", sigma}, {"s", s},
          {"theta", theta},          {"offset", offset},    {"seed", seed}};
}

std::vector<Mode> build_mode_ordering(std::size_t s, double theta)
{
  if (s < 1)
    throw ArgumentError("build_mode_ordering: s must be >= 1");
  if (!(theta > 1.0))
    throw ArgumentError("build_mode_ordering: theta must exceed 1");
  // The square [1, K]² holds K² >= s pairs, all with k²+ℓ² <= 2K², so the
  // s smallest values (with their whole tie classes) lie below that bound.
  int K = 1;
  while (static_cast<std::size_t>(K) * static_cast<std::size_t>(K) < s)
    ++K;
  const long limit = 2L * K * K;
  std::vector<Mode> all;
  for (int k = 1; static_cast<long>(k) * k < limit; ++k)
    for (int l = 1; static_cast<long>(k) * k + static_cast<long>(l) * l <= limit; ++l)
      all.push_back({k, l, 0.0});
  std::sort(all.begin(), all.end(), [](const Mode& a, const Mode& b) {
    const long na = static_cast<long>(a.k) * a.k + static_cast<long>(a.l) * a.l;
    const long nb = static_cast<long>(b.k) * b.k + static_cast<long>(b.l) * b.l;
    return na != nb ? na < nb : a.k < b.k;
  });
  all.resize(s);
  for (Mode& m : all)
    m.amplitude = std::pow(static_cast<double>(m.k * m.k + m.l * m.l), -theta);
  return all;
}

double xi_eval(XiKind xi, double omega, double t, int order)
{
  if (order < 0 || order > 2)
    throw CapacityError("xi_eval: order must be 0, 1 or 2");
  switch (xi) {
  case XiKind::Identity:
    return order == 0 ? t : (order == 1 ? 1.0 : 0.0);
  case XiKind::GevreyAffine:
    return gevrey_profile(omega, t + 0.5, order);
  case XiKind::GevreySign: {
    if (t == 0.0)
      return 0.0;
    const double v = gevrey_profile(omega, std::abs(t), order);
    // sign(t) g(|t|) has an even first derivative and odd value and second derivative.
    return (order == 1 || t > 0.0) ? v : -v;
  }
  }
  return 0.0;
}

double xi_derivative_sup(XiKind xi, double omega)
{
  if (xi == XiKind::Identity)
    return 1.0;
  const double e = (omega + 1.0) / omega;
  return omega * std::pow(e, e) * std::exp(-e);
}

FieldModel::FieldModel(FieldConfig cfg) : cfg_(cfg)
{
  if (cfg_.xi != XiKind::Identity) {
    if (!(cfg_.sigma > 1.0))
      throw ArgumentError("FieldModel: Gevrey transforms need sigma > 1");
    omega_ = 1.0 / (cfg_.sigma - 1.0);
  }
  if (cfg_.kind == FieldKind::Lognormal && cfg_.xi == XiKind::GevreyAffine)
    throw ArgumentError("FieldModel: gevrey-affine needs parameters in [-1/2, 1/2]");
  modes_ = build_mode_ordering(cfg_.s, cfg_.theta);
  if (cfg_.kind == FieldKind::Affine && !(decay().a_min > 0.0))
    throw ModelInvalid("FieldModel: affine coefficient is not bounded away from zero");
}

double FieldModel::xi_sup() const
{
  const bool uniform = cfg_.kind == FieldKind::Affine;
  switch (cfg_.xi) {
  case XiKind::Identity:
    return uniform ? 0.5 : std::numeric_limits<double>::infinity();
  case XiKind::GevreyAffine:
    return std::exp(-1.0);
  case XiKind::GevreySign:
    return uniform ? std::exp(-std::pow(2.0, omega_)) : 1.0;
  }
  return 0.0;
}

double FieldModel::gevrey_order() const
{
  return cfg_.xi == XiKind::Identity ? 1.0 : cfg_.sigma;
}

double FieldModel::psi(std::size_t j, double x1, double x2) const
{
  const Mode& m = modes_[j];
  return m.amplitude * std::sin(m.k * pi * x1) * std::sin(m.l * pi * x2);
}

double FieldModel::value(double x1, double x2, std::span<const double> y) const
{
  const std::size_t s = std::min(y.size(), modes_.size());
  double sum = 0.0;
  for (std::size_t j = 0; j < s; ++j)
    sum += xi(y[j]) * psi(j, x1, x2);
  const double a = cfg_.kind == FieldKind::Affine ? cfg_.offset + sum : std::exp(cfg_.offset + sum);
  if (!(a > 0.0))
    throw ModelInvalid("FieldModel: coefficient is not positive");
  return a;
}

DecaySequence FieldModel::decay() const
{
  DecaySequence d;
  double total = 0.0;
  for (const Mode& m : modes_)
    total += m.amplitude;
  if (cfg_.kind == FieldKind::Affine) {
    d.a_min = cfg_.offset - xi_sup() * total;
    if (!(d.a_min > 0.0))
      throw ModelInvalid("FieldModel: nonpositive lower bound a_min = " + std::to_string(d.a_min));
  }
  d.b.reserve(modes_.size());
  for (const Mode& m : modes_)
    d.b.push_back(cfg_.kind == FieldKind::Affine ? m.amplitude / d.a_min : m.amplitude);

  // b_j ~ j^{-1/p}; fit on the tail half, where the lattice-point count has
  // settled into its asymptotic regime.
  const std::size_t s = d.b.size();
  if (s < 2) {
    d.p_estimate = std::numeric_limits<double>::quiet_NaN();
    return d;
  }
  const std::size_t first = s >= 4 ? s / 2 : 1;
  std::vector<double> xs, ys;
  for (std::size_t j = first; j <= s; ++j) {
    xs.push_back(std::log(static_cast<double>(j)));
    ys.push_back(std::log(d.b[j - 1]));
  }
  d.p_estimate = -1.0 / least_squares_slope(xs, ys);
  return d;
}

FieldTable::FieldTable(const FieldModel& model, std::span<const double> xs, std::span<const double> ys)
    : model_(&model), npts_(xs.size())
{
  if (xs.size() != ys.size())
    throw ArgumentError("FieldTable: coordinate arrays differ in length");
  const std::size_t s = model.dimension();
  psi_.resize(s * npts_);
  for (std::size_t j = 0; j < s; ++j)
    for (std::size_t q = 0; q < npts_; ++q)
      psi_[j * npts_ + q] = model.psi(j, xs[q], ys[q]);
}

void FieldTable::values(std::span<const double> y, std::span<double> out) const
{
  const FieldConfig& cfg = model_->config();
  const std::size_t s = std::min(y.size(), model_->dimension());
  std::fill(out.begin(), out.begin() + npts_, cfg.offset);
  for (std::size_t j = 0; j < s; ++j) {
    const double c = model_->xi(y[j]);
    if (c == 0.0)
      continue;
    const double* row = psi_.data() + j * npts_;
    for (std::size_t q = 0; q < npts_; ++q)
      out[q] += c * row[q];
  }
  if (cfg.kind == FieldKind::Lognormal)
    for (std::size_t q = 0; q < npts_; ++q)
      out[q] = std::exp(out[q]);
  for (std::size_t q = 0; q < npts_; ++q)
    if (!(out[q] > 0.0))
      throw ModelInvalid("FieldTable: coefficient is not positive");
}

void FieldTable::derivative(std::span<const double> y, std::span<const std::size_t> T,
                            std::span<const double> a_vals, std::span<double> out) const
{
  if (T.size() > 2)
    throw CapacityError("FieldTable: derivative order above 2");
  if (T.size() == 2 && T[0] == T[1])
    throw ArgumentError("FieldTable: derivative indices must be distinct");
  for (std::size_t j : T)
    if (j >= model_->dimension() || j >= y.size())
      throw ArgumentError("FieldTable: derivative index out of range");

  if (T.empty()) {
    std::copy_n(a_vals.begin(), npts_, out.begin());
    return;
  }
  const bool affine = model_->config().kind == FieldKind::Affine;
  if (affine && T.size() == 2) {
    std::fill_n(out.begin(), npts_, 0.0);
    return;
  }
  for (std::size_t q = 0; q < npts_; ++q)
    out[q] = affine ? 1.0 : a_vals[q];
  for (std::size_t j : T) {
    const double c = model_->xi(y[j], 1);
    const double* row = psi_.data() + j * npts_;
    for (std::size_t q = 0; q < npts_; ++q)
      out[q] *= c * row[q];
  }
}

nlohmann::json AssumptionReport::to_json() const
{
  return {{"worst_first", worst_first}, {"worst_second", worst_second},
          {"implied_C_G", implied_C_G}, {"C_G", C_G},
          {"gevrey_ok", gevrey_ok},     {"implied_C_Q", implied_C_Q},
          {"ratio_ok", ratio_ok},       {"samples", samples}};
}

AssumptionReport check_assumptions(const FieldModel& model, std::span<const std::vector<double>> samples)
{
  constexpr int grid = 64;
  std::vector<double> xs, ys;
  for (int i = 0; i < grid; ++i)
    for (int j = 0; j < grid; ++j) {
      xs.push_back((i + 0.5) / grid);
      ys.push_back((j + 0.5) / grid);
    }
  for (const Mode& m : model.modes()) {
    xs.push_back(0.5 / m.k);
    ys.push_back(0.5 / m.l);
  }
  const FieldTable table(model, xs, ys);
  const std::size_t npts = table.points();
  const std::size_t s = model.dimension();
  const DecaySequence dec = model.decay();
  const double sigma = model.gevrey_order();
  const bool lognormal = model.config().kind == FieldKind::Lognormal;

  AssumptionReport rep;
  rep.C_G = model.gevrey_constant();
  rep.samples = samples.size();

  std::vector<double> a(npts), ratio(s * npts);
  for (const std::vector<double>& y : samples) {
    table.values(y, a);
    for (std::size_t j = 0; j < s; ++j) {
      const std::size_t T[] = {j};
      std::span<double> row(ratio.data() + j * npts, npts);
      table.derivative(y, T, a, row);
      double sup = 0.0;
      for (std::size_t q = 0; q < npts; ++q) {
        row[q] = std::abs(row[q] / a[q]);
        sup = std::max(sup, row[q]);
      }
      rep.worst_first = std::max(rep.worst_first, sup / dec.b[j]);
    }
    // Mixed second derivatives vanish for the affine kind; for lognormal
    // ∂_i∂_j a / a = (ξ'_i ψ_i)(ξ'_j ψ_j), the product of the first-order ratios.
    if (lognormal)
      for (std::size_t i = 0; i < s; ++i)
        for (std::size_t j = i + 1; j < s; ++j) {
          double sup = 0.0;
          const double* ri = ratio.data() + i * npts;
          const double* rj = ratio.data() + j * npts;
          for (std::size_t q = 0; q < npts; ++q)
            sup = std::max(sup, ri[q] * rj[q]);
          rep.worst_second = std::max(rep.worst_second, sup / (std::pow(2.0, sigma) * dec.b[i] * dec.b[j]));
        }
    if (lognormal) {
      const auto [lo, hi] = std::minmax_element(a.begin(), a.end());
      double rhs = 0.0;
      for (std::size_t j = 0; j < s && j < y.size(); ++j)
        rhs += 2.0 * dec.b[j] * std::abs(y[j]);
      rep.implied_C_Q = std::max(rep.implied_C_Q, (*hi / *lo) / std::exp(rhs));
    }
  }
  rep.implied_C_G = std::max(rep.worst_first, rep.worst_second);
  rep.gevrey_ok = rep.implied_C_G <= rep.C_G * (1.0 + 1e-12);
  rep.ratio_ok = rep.implied_C_Q <= 1.0 + 1e-12;
  return rep;
}

} // namespace qmcflux
