#include "qmcflux/lattice.hpp"

#include "qmcflux/errors.hpp"
#include "qmcflux/numerics.hpp"
#include "qmcflux/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>

namespace qmcflux {

double normal_cdf(double x)
{
  return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

namespace {

// Acklam's rational approximation, relative error ~1.15e-9.
double acklam_lower(double t)
{
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double t_low = 0.02425;

  if (t < t_low) {
    const double q = std::sqrt(-2.0 * std::log(t));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double q = t - 0.5;
  const double r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

} // namespace

double normal_quantile(double t)
{
  if (!(t > 0.0 && t < 1.0))
    throw ArgumentError("normal_quantile: argument must lie in (0,1)");
  if (t == 0.5)
    return 0.0;
  // Work in the lower tail where 1 - t is exact and erfc keeps relative accuracy.
  if (t > 0.5)
    return -normal_quantile(1.0 - t);

  double x = acklam_lower(t);
  const double e = normal_cdf(x) - t;
  const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
  x -= u / (1.0 + 0.5 * x * u);
  return x;
}

double map_uniform(double t)
{
  if (t <= 0.0)
    t = lattice_zero_nudge;
  return t - 0.5;
}

double map_gaussian(double t)
{
  if (t <= 0.0)
    t = lattice_zero_nudge;
  return normal_quantile(t);
}

double map_coordinate(CoordinateMap map, double t)
{
  if (t <= 0.0)
    t = lattice_zero_nudge;
  return map == CoordinateMap::Uniform ? t - 0.5 : normal_quantile(t);
}

bool is_power_of_two(std::uint64_t n) noexcept
{
  return n != 0 && (n & (n - 1)) == 0;
}

void GeneratingVector::validate() const
{
  if (!is_power_of_two(n))
    throw ValidityError("generating vector: n must be a power of two");
  for (std::size_t j = 0; j < z.size(); ++j) {
    if (z[j] < 1 || z[j] >= n)
      throw ValidityError("generating vector: component " + std::to_string(j + 1) +
                          " outside [1, n)");
    if (n > 1 && z[j] % 2 == 0)
      throw ValidityError("generating vector: component " + std::to_string(j + 1) +
                          " is even, gcd(z_j, n) != 1");
  }
}

std::vector<double> lattice_point(const GeneratingVector& gv, std::uint64_t k)
{
  if (k < 1 || k > gv.n)
    throw ArgumentError("lattice_point: k must lie in [1, n]");
  std::vector<double> t(gv.z.size());
  const double inv_n = 1.0 / static_cast<double>(gv.n);
  for (std::size_t j = 0; j < gv.z.size(); ++j) {
    const unsigned __int128 prod = static_cast<unsigned __int128>(k) * gv.z[j];
    t[j] = static_cast<double>(static_cast<std::uint64_t>(prod % gv.n)) * inv_n;
  }
  return t;
}

void shifted_point(std::span<const double> t, std::span<const double> shift, std::span<double> out)
{
  for (std::size_t j = 0; j < t.size(); ++j) {
    double v = t[j] + shift[j];
    if (v >= 1.0)
      v -= 1.0;
    out[j] = v;
  }
}

std::vector<double> shifted_point(std::span<const double> t, std::span<const double> shift)
{
  std::vector<double> out(t.size());
  shifted_point(t, shift, out);
  return out;
}

ShiftSet generate_shifts(std::size_t R, std::size_t s, std::uint64_t seed)
{
  if (R < 1 || s < 1)
    throw ArgumentError("generate_shifts: R and s must be positive");
  ShiftSet set{R, s, seed, {}};
  set.shifts.resize(R, std::vector<double>(s));
  for (std::size_t r = 0; r < R; ++r) {
    const CounterRng rng(seed, r);
    for (std::size_t j = 0; j < s; ++j)
      set.shifts[r][j] = rng.uniform(j);
  }
  return set;
}

GeneratingVector parse_generating_vector(std::istream& in, std::size_t s, std::uint64_t n,
                                         GeneratingVector::Source source)
{
  if (!is_power_of_two(n))
    throw ArgumentError("generating vector: n must be a power of two");
  GeneratingVector gv;
  gv.n = n;
  gv.source = source;
  std::string line;
  while (gv.z.size() < s && std::getline(in, line)) {
    if (const auto hash = line.find('#'); hash != std::string::npos)
      line.erase(hash);
    std::istringstream ls(line);
    std::uint64_t index = 0, value = 0;
    if (!(ls >> index))
      continue;
    if (!(ls >> value))
      throw ValidityError("generating vector: malformed line '" + line + "'");
    if (index != gv.z.size() + 1)
      throw ValidityError("generating vector: expected index " + std::to_string(gv.z.size() + 1) +
                          ", found " + std::to_string(index));
    gv.z.push_back(value % n);
  }
  if (gv.z.size() < s)
    throw TruncationError("generating vector: requested " + std::to_string(s) +
                          " components but only " + std::to_string(gv.z.size()) + " available");
  gv.validate();
  return gv;
}

GeneratingVector load_generating_vector(const std::string& path, std::size_t s, std::uint64_t n)
{
  std::ifstream in(path);
  if (!in)
    throw ArgumentError("cannot open generating vector file '" + path + "'");
  return parse_generating_vector(in, s, n, GeneratingVector::Source::LoadedFile);
}

extern const char* const builtin_lattice_text;

GeneratingVector builtin_generating_vector(std::size_t s, std::uint64_t n)
{
  std::istringstream in(builtin_lattice_text);
  return parse_generating_vector(in, s, n, GeneratingVector::Source::Builtin);
}

void write_generating_vector(std::ostream& out, const GeneratingVector& gv, const std::string& comment)
{
  if (!comment.empty()) {
    std::istringstream cs(comment);
    std::string line;
    while (std::getline(cs, line))
      out << "# " << line << '\n';
  }
  for (std::size_t j = 0; j < gv.z.size(); ++j)
    out << (j + 1) << ' ' << gv.z[j] << '\n';
}

double bernoulli2(double x)
{
  return x * x - x + 1.0 / 6.0;
}

double shift_averaged_error_sq(std::uint64_t n, std::span<const std::uint64_t> z,
                               std::span<const double> gamma)
{
  double sum = 0.0;
  for (std::uint64_t k = 1; k <= n; ++k) {
    double prod = 1.0;
    for (std::size_t j = 0; j < z.size(); ++j) {
      const double x = static_cast<double>((k * z[j]) % n) / static_cast<double>(n);
      prod *= 1.0 + gamma[j] * bernoulli2(x);
    }
    sum += prod;
  }
  return sum / static_cast<double>(n) - 1.0;
}

GeneratingVector cbc_construct(std::uint64_t n, std::size_t s, std::span<const double> gamma)
{
  if (!is_power_of_two(n) || n < 2)
    throw ArgumentError("cbc_construct: n must be a power of two >= 2");
  if (s < 1 || gamma.size() < s)
    throw ArgumentError("cbc_construct: need s >= 1 and one weight per coordinate");
  for (std::size_t j = 0; j < s; ++j)
    if (!(gamma[j] > 0.0))
      throw ArgumentError("cbc_construct: weights must be positive");

  // Mirror-symmetric kernel table: B2(i/n) == B2((n-i)/n) bit for bit, so the
  // candidates c and n-c produce identical sums and the smaller one wins.
  std::vector<double> kernel(n);
  for (std::uint64_t i = 0; i <= n / 2; ++i) {
    kernel[i] = bernoulli2(static_cast<double>(i) / static_cast<double>(n));
    kernel[(n - i) % n] = kernel[i];
  }
  const std::uint64_t mask = n - 1;

  GeneratingVector gv;
  gv.n = n;
  gv.source = GeneratingVector::Source::Cbc;
  gv.z.reserve(s);
  gv.z.push_back(1);

  std::vector<double> prod(n);
  for (std::uint64_t k = 0; k < n; ++k)
    prod[k] = 1.0 + gamma[0] * kernel[k];

  for (std::size_t j = 1; j < s; ++j) {
    const double g = gamma[j];
    // Only Σ_k prod_k B₂({k c/n}) depends on c. Candidates within rounding of the
    // minimum (measured against Σ |terms|) tie, and the smallest c wins.
    std::vector<double> part, magnitude;
    part.reserve(n / 2);
    magnitude.reserve(n / 2);
    for (std::uint64_t c = 1; c < n; c += 2) {
      double sum = 0.0, abs_sum = 0.0;
      std::uint64_t idx = 0;
      for (std::uint64_t k = 0; k < n; ++k) {
        const double t = prod[k] * kernel[idx];
        sum += t;
        abs_sum += std::abs(t);
        idx = (idx + c) & mask;
      }
      part.push_back(g * sum);
      magnitude.push_back(g * abs_sum);
    }
    const auto min_it = std::min_element(part.begin(), part.end());
    const double best = *min_it;
    const double tol = cbc_tie_tolerance * magnitude[static_cast<std::size_t>(min_it - part.begin())];
    std::uint64_t best_c = 1;
    for (std::size_t i = 0; i < part.size(); ++i)
      if (part[i] <= best + tol) {
        best_c = 2 * i + 1;
        break;
      }
    gv.z.push_back(best_c);
    std::uint64_t idx = 0;
    for (std::uint64_t k = 0; k < n; ++k) {
      prod[k] *= 1.0 + g * kernel[idx];
      idx = (idx + best_c) & mask;
    }
  }
  return gv;
}

CubatureResult summarize_shifts(std::vector<double> per_shift, std::uint64_t n)
{
  CubatureResult res;
  res.n = n;
  res.R = per_shift.size();
  if (per_shift.empty())
    return res;
  res.mean = pairwise_sum(per_shift) / static_cast<double>(per_shift.size());
  if (per_shift.size() >= 2) {
    bool identical = true;
    std::vector<double> sq(per_shift.size());
    for (std::size_t r = 0; r < per_shift.size(); ++r) {
      identical = identical && per_shift[r] == per_shift[0];
      const double d = per_shift[r] - res.mean;
      sq[r] = d * d;
    }
    const double R = static_cast<double>(per_shift.size());
    res.rmse_estimate = identical ? 0.0 : std::sqrt(pairwise_sum(sq) / (R * (R - 1.0)));
  }
  res.per_shift = std::move(per_shift);
  return res;
}

std::size_t VectorEstimate::failed_shifts() const
{
  std::size_t count = 0;
  for (const auto& f : failure)
    count += f.has_value();
  return count;
}

CubatureResult VectorEstimate::component(std::size_t c) const
{
  std::vector<double> values;
  for (std::size_t r = 0; r < per_shift.size(); ++r)
    if (!failure[r])
      values.push_back(per_shift[r][c]);
  return summarize_shifts(std::move(values), n);
}

VectorEstimate estimate_integral_vector(const VectorIntegrand& F, std::size_t dim,
                                        const GeneratingVector& gv, const ShiftSet& shifts,
                                        const EstimateOptions& opts)
{
  if (shifts.s < gv.dimension())
    throw ArgumentError("estimate_integral: shift dimension smaller than lattice dimension");
  const std::size_t s = gv.dimension();
  const std::uint64_t n = gv.n;
  const std::size_t R = shifts.R;

  std::vector<double> samples(R * n * dim);
  std::vector<std::optional<std::string>> sample_error(R * n);

  parallel_for(R * n, opts.threads, [&](std::size_t idx) {
    const std::size_t r = idx / n;
    const std::uint64_t k = idx % n + 1;
    std::vector<double> y = lattice_point(gv, k);
    shifted_point(y, std::span(shifts.shifts[r]).first(s), y);
    for (double& v : y)
      v = map_coordinate(opts.map, v);
    try {
      F(y, std::span(samples).subspan(idx * dim, dim));
    } catch (const std::exception& e) {
      sample_error[idx] = e.what();
    }
  });

  VectorEstimate est;
  est.n = n;
  est.dim = dim;
  est.per_shift.assign(R, std::vector<double>(dim));
  est.failure.resize(R);
  std::vector<double> column(n);
  for (std::size_t r = 0; r < R; ++r) {
    for (std::uint64_t k = 0; k < n; ++k)
      if (sample_error[r * n + k] && !est.failure[r])
        est.failure[r] = "k=" + std::to_string(k + 1) + ": " + *sample_error[r * n + k];
    for (std::size_t c = 0; c < dim; ++c) {
      for (std::uint64_t k = 0; k < n; ++k)
        column[k] = samples[(r * n + k) * dim + c];
      est.per_shift[r][c] = pairwise_sum(column) / static_cast<double>(n);
    }
  }
  return est;
}

CubatureResult estimate_integral(const ScalarIntegrand& F, const GeneratingVector& gv,
                                 const ShiftSet& shifts, const EstimateOptions& opts)
{
  const auto est = estimate_integral_vector(
      [&F](std::span<const double> y, std::span<double> out) { out[0] = F(y); }, 1, gv, shifts,
      opts);
  for (const auto& f : est.failure)
    if (f)
      throw std::runtime_error("estimate_integral: integrand failed at " + *f);
  return est.component(0);
}

} // namespace qmcflux
