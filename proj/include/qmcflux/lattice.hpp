#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace qmcflux {

/// Standard normal CDF, 0.5 * erfc(-x / sqrt 2).
double normal_cdf(double x);

/// Standard normal quantile. Acklam's rational initializer followed by one
/// Halley step on normal_cdf; absolute error below 1e-9 on [1e-12, 1 - 1e-12].
/// Throws ArgumentError unless 0 < t < 1.
double normal_quantile(double t);

/// Smallest value a lattice coordinate is nudged to before mapping (2^-64).
inline constexpr double lattice_zero_nudge = 0x1.0p-64;

/// CBC candidates within this fraction of Σ|terms| of the minimal e² tie.
inline constexpr double cbc_tie_tolerance = 1e-12;

enum class CoordinateMap { Uniform, Gaussian };

double map_uniform(double t);
double map_gaussian(double t);
double map_coordinate(CoordinateMap map, double t);

/// Rank-1 lattice generating vector: points t_k = {k z / n}, k = 1..n.
struct GeneratingVector {
  enum class Source { LoadedFile, Cbc, Builtin };

  std::uint64_t n = 0;
  std::vector<std::uint64_t> z;
  Source source = Source::Cbc;

  std::size_t dimension() const noexcept { return z.size(); }

  /// Throws ValidityError if n is not a power of two or some z_j is even or
  /// not in [1, n).
  void validate() const;
};

bool is_power_of_two(std::uint64_t n) noexcept;

/// t_k with exact integer reduction (k z_j mod n) / n. Throws ArgumentError
/// unless 1 <= k <= n.
std::vector<double> lattice_point(const GeneratingVector& gv, std::uint64_t k);

/// Component-wise fractional part of t + shift, written to out.
void shifted_point(std::span<const double> t, std::span<const double> shift, std::span<double> out);
std::vector<double> shifted_point(std::span<const double> t, std::span<const double> shift);

struct ShiftSet {
  std::size_t R = 0;
  std::size_t s = 0;
  std::uint64_t seed = 0;
  std::vector<std::vector<double>> shifts;
};

/// R uniform shifts in [0,1)^s. Shift r is stream r of CounterRng(seed, r);
/// component j is draw j of that stream.
ShiftSet generate_shifts(std::size_t R, std::size_t s, std::uint64_t seed);

/// Parses "j z_j" lines (1-based j, '#' starts a comment), keeps the first s
/// components and reduces them mod n.
GeneratingVector parse_generating_vector(std::istream& in, std::size_t s, std::uint64_t n,
                                         GeneratingVector::Source source);
GeneratingVector load_generating_vector(const std::string& path, std::size_t s, std::uint64_t n);

/// The checked-in CBC vector (s = 100, built for n = 2^14), truncated to s and
/// reduced mod n.
GeneratingVector builtin_generating_vector(std::size_t s, std::uint64_t n);
inline constexpr std::size_t builtin_lattice_dimension = 100;
inline constexpr std::uint64_t builtin_lattice_points = 16384;

void write_generating_vector(std::ostream& out, const GeneratingVector& gv, const std::string& comment = {});

/// B2(x) = x^2 - x + 1/6.
double bernoulli2(double x);

/// Shift-averaged squared worst-case error for product weights,
///   e^2(z) = (1/n) sum_k prod_j (1 + gamma_j B2({k z_j / n})) - 1,
/// over the first z.size() coordinates.
double shift_averaged_error_sq(std::uint64_t n, std::span<const std::uint64_t> z,
                               std::span<const double> gamma);

/// Component-by-component construction with product weights gamma (size s).
/// z_1 = 1; later components are the smallest odd minimizer of e^2.
/// Naive O(s n^2 / 2). Throws ArgumentError unless n is a power of two >= 2.
GeneratingVector cbc_construct(std::uint64_t n, std::size_t s, std::span<const double> gamma);

struct CubatureResult {
  std::vector<double> per_shift;
  double mean = 0.0;
  std::optional<double> rmse_estimate;
  std::uint64_t n = 0;
  std::size_t R = 0;
};

/// Summarizes per-shift values: mean and sqrt(sum (Q_r - mean)^2 / (R (R-1))).
CubatureResult summarize_shifts(std::vector<double> per_shift, std::uint64_t n);

using ScalarIntegrand = std::function<double(std::span<const double> y)>;
using VectorIntegrand = std::function<void(std::span<const double> y, std::span<double> out)>;

struct EstimateOptions {
  CoordinateMap map = CoordinateMap::Uniform;
  unsigned threads = 1;
};

/// Randomly shifted lattice estimate of the integral of F over the mapped cube.
CubatureResult estimate_integral(const ScalarIntegrand& F, const GeneratingVector& gv,
                                 const ShiftSet& shifts, const EstimateOptions& opts = {});

/// Per-shift results of a vector-valued estimate. A shift whose integrand
/// threw is marked failed and carries the message.
struct VectorEstimate {
  std::uint64_t n = 0;
  std::size_t dim = 0;
  std::vector<std::vector<double>> per_shift; // [r][component]
  std::vector<std::optional<std::string>> failure;

  std::size_t failed_shifts() const;
  /// CubatureResult of one component over the successful shifts.
  CubatureResult component(std::size_t c) const;
};

VectorEstimate estimate_integral_vector(const VectorIntegrand& F, std::size_t dim,
                                        const GeneratingVector& gv, const ShiftSet& shifts,
                                        const EstimateOptions& opts = {});

} // namespace qmcflux
