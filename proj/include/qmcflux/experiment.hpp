#pragma once

#include "qmcflux/fem.hpp"
#include "qmcflux/lattice.hpp"
#include "qmcflux/random_field.hpp"
#include "qmcflux/weights.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace qmcflux {

struct LatticeSource {
  enum class Kind { Builtin, File, Cbc };
  Kind kind = Kind::Cbc;
  std::string path; ///< for Kind::File
};

struct ExperimentConfig {
  std::string name = "affine";
  FieldConfig model;
  int mesh_m = 10;
  Method method = Method::Rth;
  double tau = 1.0;
  std::vector<std::uint64_t> n_list = {4, 8, 16, 32, 64, 128, 256, 512, 1024};
  std::size_t R = 8;
  std::uint64_t seed = 1;
  LatticeSource lattice;
  std::vector<std::string> qois = {"u", "grad", "flux", "quad"};
  unsigned threads = 1;

  /// Reads the JSON layout documented in the README; a top-level "s"
  /// overrides model.s. Calls validate().
  static ExperimentConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

  /// Throws ArgumentError unless n_list is strictly increasing powers of two,
  /// R >= 2, mesh_m is a positive multiple of 5 and every qoi is known.
  void validate() const;
};

struct ConvergenceRecord {
  std::string model;
  std::string method;
  std::string qoi;
  std::string component; ///< "0", "1" or "norm" (Euclidean norm over components)
  std::uint64_t n = 0;
  std::size_t R = 0;
  double qmean = 0.0;
  std::optional<double> rmse;
  std::string status;    ///< ok | partial | failed
  double seconds = 0.0;
};

inline constexpr const char* csv_header = "model,method,qoi,component,n,R,qmean,rmse,status,seconds";

void write_csv(std::ostream& out, std::span<const ConvergenceRecord> records);

struct RateFit {
  std::optional<double> rate;
  std::size_t points = 0;
  std::size_t excluded = 0; ///< points dropped for rmse = 0 or a failed cell
};

/// Negated least-squares slope of log2(rmse) against log2(n). Needs at least
/// three distinct n after exclusions; tail_only keeps the largest four n.
RateFit fit_rate(std::span<const ConvergenceRecord> records, bool tail_only = false);

struct PredictReport {
  WeightParams params;
  ParameterModel parameter_model = ParameterModel::Bounded;
  double rate = 0.0;
  std::optional<std::pair<double, double>> epsilon_interval;
  std::vector<double> product_weights;
  std::vector<std::pair<Subset, double>> sample_gamma;
  nlohmann::json to_json() const;
};

/// WeightParams of a field model: σ from the transform, p = 1/θ, b from the
/// decay sequence, C_R = 1, C_G = sup|ξ'|, λ from select_lambda.
WeightParams weight_params(const FieldModel& model, double r = 1.0);

/// Predicted rate and weights. The quadratic QoI uses the sharpened bound,
/// so r = 1 for every QoI.
PredictReport predict(const ExperimentConfig& cfg);

struct ConvergenceResult {
  std::vector<ConvergenceRecord> records;
  PredictReport prediction;
  nlohmann::json summary; ///< fitted rates per qoi and the predicted rate
};

/// Shifts are drawn once and shared by every n. Failed shifts are dropped
/// from their cell and reflected in the status column.
ConvergenceResult run_convergence(const ExperimentConfig& cfg, std::ostream* log = nullptr);

/// Generating vector for one n according to cfg.lattice.
GeneratingVector lattice_for(const ExperimentConfig& cfg, std::uint64_t n, std::span<const double> product_weights);

} // namespace qmcflux
