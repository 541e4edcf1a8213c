#include "qmcflux/experiment.hpp"

#include "qmcflux/errors.hpp"
#include "qmcflux/numerics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

namespace qmcflux {

namespace {

struct QoiLayout {
  const char* name;
  std::size_t offset; // into the integrand vector
  std::size_t size;
};

// Integrand vector: mean_u, mean_grad (2), mean_flux (2), quadratic_flux.
constexpr QoiLayout qoi_layout[] = {{"u", 0, 1}, {"grad", 1, 2}, {"flux", 3, 2}, {"quad", 5, 1}};
constexpr std::size_t integrand_dim = 6;

const QoiLayout& find_qoi(const std::string& name)
{
  for (const QoiLayout& q : qoi_layout)
    if (name == q.name)
      return q;
  throw ArgumentError("unknown qoi '" + name + "' (expected u, grad, flux or quad)");
}

std::string format_double(double v)
{
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

} // namespace

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j)
{
  ExperimentConfig cfg;
  cfg.name = j.value("name", cfg.name);
  if (j.contains("model"))
    cfg.model = FieldConfig::from_json(j.at("model"));
  if (j.contains("s"))
    cfg.model.s = j.at("s").get<std::size_t>();
  cfg.mesh_m = j.value("mesh_m", cfg.mesh_m);
  if (j.contains("method"))
    cfg.method = parse_method(j.at("method").get<std::string>());
  cfg.tau = j.value("tau", cfg.tau);
  if (j.contains("n_list"))
    cfg.n_list = j.at("n_list").get<std::vector<std::uint64_t>>();
  cfg.R = j.value("R", cfg.R);
  cfg.seed = j.value("seed", cfg.seed);
  if (j.contains("qv_source")) {
    const nlohmann::json& q = j.at("qv_source");
    if (q.is_string()) {
      const std::string s = q.get<std::string>();
      if (s == "builtin")
        cfg.lattice.kind = LatticeSource::Kind::Builtin;
      else if (s == "cbc")
        cfg.lattice.kind = LatticeSource::Kind::Cbc;
      else
        throw ArgumentError("qv_source must be \"builtin\", \"cbc\" or {\"file\": path}");
    } else {
      cfg.lattice.kind = LatticeSource::Kind::File;
      cfg.lattice.path = q.at("file").get<std::string>();
    }
  }
  if (j.contains("qois"))
    cfg.qois = j.at("qois").get<std::vector<std::string>>();
  cfg.threads = j.value("threads", cfg.threads);
  cfg.validate();
  return cfg;
}

nlohmann::json ExperimentConfig::to_json() const
{
  nlohmann::json q;
  switch (lattice.kind) {
  case LatticeSource::Kind::Builtin:
    q = "builtin";
    break;
  case LatticeSource::Kind::Cbc:
    q = "cbc";
    break;
  case LatticeSource::Kind::File:
    q = {{"file", lattice.path}};
    break;
  }
  return {{"name", name},   {"model", model.to_json()}, {"mesh_m", mesh_m}, {"method", to_string(method)},
          {"tau", tau},     {"n_list", n_list},         {"R", R},           {"seed", seed},
          {"qv_source", q}, {"qois", qois},             {"threads", threads}};
}

void ExperimentConfig::validate() const
{
  if (n_list.empty())
    throw ArgumentError("n_list must not be empty");
  for (std::size_t i = 0; i < n_list.size(); ++i) {
    if (!is_power_of_two(n_list[i]) || n_list[i] < 2)
      throw ArgumentError("n_list entries must be powers of two >= 2");
    if (i > 0 && n_list[i] <= n_list[i - 1])
      throw ArgumentError("n_list must be strictly increasing");
  }
  if (R < 2)
    throw ArgumentError("R must be at least 2");
  if (mesh_m < 5 || mesh_m % 5 != 0)
    throw ArgumentError("mesh_m must be a positive multiple of 5");
  if (qois.empty())
    throw ArgumentError("qois must not be empty");
  for (const std::string& q : qois)
    find_qoi(q);
}

void write_csv(std::ostream& out, std::span<const ConvergenceRecord> records)
{
  out << csv_header << '\n';
  for (const ConvergenceRecord& r : records) {
    out << r.model << ',' << r.method << ',' << r.qoi << ',' << r.component << ',' << r.n << ',' << r.R << ','
        << format_double(r.qmean) << ',' << (r.rmse ? format_double(*r.rmse) : std::string("nan")) << ','
        << r.status << ',' << std::fixed << std::setprecision(6) << r.seconds << std::defaultfloat << '\n';
  }
}

RateFit fit_rate(std::span<const ConvergenceRecord> records, bool tail_only)
{
  std::map<std::uint64_t, double> points;
  RateFit fit;
  for (const ConvergenceRecord& r : records) {
    if (r.status == "failed" || !r.rmse || !(*r.rmse > 0.0)) {
      ++fit.excluded;
      continue;
    }
    points[r.n] = *r.rmse;
  }
  std::vector<double> xs, ys;
  for (const auto& [n, e] : points) {
    xs.push_back(std::log2(static_cast<double>(n)));
    ys.push_back(std::log2(e));
  }
  if (tail_only && xs.size() > 4) {
    xs.erase(xs.begin(), xs.end() - 4);
    ys.erase(ys.begin(), ys.end() - 4);
  }
  fit.points = xs.size();
  if (xs.size() >= 3)
    fit.rate = -least_squares_slope(xs, ys);
  return fit;
}

nlohmann::json PredictReport::to_json() const
{
  nlohmann::json gam = nlohmann::json::array();
  for (const auto& [u, g] : sample_gamma) {
    std::vector<std::size_t> one_based;
    for (std::size_t j : u)
      one_based.push_back(j + 1);
    gam.push_back({{"u", one_based}, {"gamma", g}});
  }
  nlohmann::json j = {{"lambda", params.lambda},
                      {"p", params.p},
                      {"sigma", params.sigma},
                      {"r", params.r},
                      {"C_G", params.C_G},
                      {"predicted_rate", rate},
                      {"gamma", gam},
                      {"product_weights", product_weights}};
  if (epsilon_interval)
    j["epsilon_interval"] = {epsilon_interval->first, epsilon_interval->second};
  return j;
}

WeightParams weight_params(const FieldModel& model, double r)
{
  WeightParams p;
  p.sigma = model.gevrey_order();
  p.p = 1.0 / model.config().theta;
  p.r = r;
  p.b = model.decay().b;
  p.C_R = 1.0;
  p.C_G = model.gevrey_constant();
  p.lambda = select_lambda(p.p, p.r, p.sigma);
  if (!(p.p > 2.0 * p.r / 3.0))
    p.epsilon = 0.5 * epsilon_upper(p.r, p.sigma);
  p.validate();
  return p;
}

PredictReport predict(const ExperimentConfig& cfg)
{
  const FieldModel model(cfg.model);
  PredictReport rep;
  rep.params = weight_params(model, 1.0);
  rep.parameter_model = model.gaussian_parameters() ? ParameterModel::Gaussian : ParameterModel::Bounded;
  const RateReport rate = theoretical_rate(rep.params.p, rep.params.r, rep.params.sigma);
  rep.rate = rate.epsilon_interval ? 1.0 - rep.params.epsilon : rate.exponent;
  rep.epsilon_interval = rate.epsilon_interval;
  rep.product_weights = product_weights(rep.params, rep.parameter_model);
  for (std::size_t k = 1; k <= std::min<std::size_t>(3, model.dimension()); ++k) {
    Subset u;
    for (std::size_t j = 0; j < k; ++j)
      u.push_back(j);
    const double g = rep.parameter_model == ParameterModel::Bounded ? gamma_bounded(u, rep.params)
                                                                     : gamma_unbounded(u, rep.params);
    rep.sample_gamma.emplace_back(u, g);
  }
  return rep;
}

GeneratingVector lattice_for(const ExperimentConfig& cfg, std::uint64_t n, std::span<const double> weights)
{
  const std::size_t s = cfg.model.s;
  switch (cfg.lattice.kind) {
  case LatticeSource::Kind::Builtin:
    return builtin_generating_vector(s, n);
  case LatticeSource::Kind::File:
    return load_generating_vector(cfg.lattice.path, s, n);
  case LatticeSource::Kind::Cbc:
    break;
  }
  return cbc_construct(n, s, weights);
}

ConvergenceResult run_convergence(const ExperimentConfig& cfg, std::ostream* log)
{
  cfg.validate();
  const FieldModel model(cfg.model);
  const TriMesh mesh = build_mesh(cfg.mesh_m);
  const Subdomain sub;
  check_alignment(mesh, sub);
  const QuadraturePoints qp = quadrature_points(mesh);
  const FieldTable table(model, qp.x, qp.y);
  const std::vector<double> f = tabulate(qp, [](double x, double) { return x; });
  SolverConfig solver_cfg;
  solver_cfg.tau = cfg.tau;

  ConvergenceResult result;
  result.prediction = predict(cfg);
  const std::size_t s = model.dimension();
  const ShiftSet shifts = generate_shifts(cfg.R, s, cfg.seed);
  EstimateOptions opts;
  opts.map = model.gaussian_parameters() ? CoordinateMap::Gaussian : CoordinateMap::Uniform;
  opts.threads = cfg.threads;

  const VectorIntegrand integrand = [&](std::span<const double> y, std::span<double> out) {
    std::vector<double> a(table.points());
    table.values(y, a);
    const MixedSolution sol = solve(cfg.method, mesh, a, f, solver_cfg);
    const QoIVector q = qoi_eval(sol, mesh, qp, a, sub);
    out[0] = q.mean_u;
    out[1] = q.mean_grad[0];
    out[2] = q.mean_grad[1];
    out[3] = q.mean_flux[0];
    out[4] = q.mean_flux[1];
    out[5] = q.quadratic_flux;
  };

  for (std::uint64_t n : cfg.n_list) {
    const auto start = std::chrono::steady_clock::now();
    const GeneratingVector gv = lattice_for(cfg, n, result.prediction.product_weights);
    const VectorEstimate est = estimate_integral_vector(integrand, integrand_dim, gv, shifts, opts);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    const std::size_t failed = est.failed_shifts();
    const std::size_t ok_shifts = cfg.R - failed;
    const std::string status = failed == 0 ? "ok" : (ok_shifts >= 2 ? "partial" : "failed");
    if (log && failed > 0)
      for (std::size_t r = 0; r < est.failure.size(); ++r)
        if (est.failure[r])
          *log << "n=" << n << " shift " << r << ": " << *est.failure[r] << '\n';

    for (const std::string& name : cfg.qois) {
      const QoiLayout& q = find_qoi(name);
      ConvergenceRecord base;
      base.model = cfg.name;
      base.method = to_string(cfg.method);
      base.qoi = name;
      base.n = n;
      base.R = ok_shifts;
      base.status = status;
      base.seconds = seconds;
      double norm_sq = 0.0, rmse_sq = 0.0;
      bool have_rmse = true;
      for (std::size_t c = 0; c < q.size; ++c) {
        const CubatureResult cr = est.component(q.offset + c);
        ConvergenceRecord rec = base;
        rec.component = std::to_string(c);
        rec.qmean = cr.mean;
        rec.rmse = cr.rmse_estimate;
        result.records.push_back(rec);
        norm_sq += cr.mean * cr.mean;
        if (cr.rmse_estimate)
          rmse_sq += *cr.rmse_estimate * *cr.rmse_estimate;
        else
          have_rmse = false;
      }
      if (q.size > 1) {
        ConvergenceRecord rec = base;
        rec.component = "norm";
        rec.qmean = std::sqrt(norm_sq);
        if (have_rmse)
          rec.rmse = std::sqrt(rmse_sq);
        result.records.push_back(rec);
      }
    }
    if (log)
      *log << cfg.name << " n=" << n << " done in " << std::fixed << std::setprecision(2) << seconds << " s"
           << std::defaultfloat << '\n';
  }

  nlohmann::json rates = nlohmann::json::object();
  for (const std::string& name : cfg.qois) {
    const std::string component = find_qoi(name).size > 1 ? "norm" : "0";
    std::vector<ConvergenceRecord> rows;
    for (const ConvergenceRecord& r : result.records)
      if (r.qoi == name && r.component == component)
        rows.push_back(r);
    const RateFit all = fit_rate(rows);
    const RateFit tail = fit_rate(rows, true);
    nlohmann::json entry = {{"component", component}, {"points", all.points}, {"excluded", all.excluded}};
    entry["rate"] = all.rate ? nlohmann::json(*all.rate) : nlohmann::json(nullptr);
    entry["tail_rate"] = tail.rate ? nlohmann::json(*tail.rate) : nlohmann::json(nullptr);
    rates[name] = entry;
  }
  result.summary = {{"model", cfg.name},
                    {"method", to_string(cfg.method)},
                    {"rates", rates},
                    {"predicted_rate", result.prediction.rate},
                    {"lambda", result.prediction.params.lambda}};
  return result;
}

} // namespace qmcflux
