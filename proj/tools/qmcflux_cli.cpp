// qmcflux command line: convergence sweeps, single solves, CBC vectors,
// weight reports and assumption checks.

#include "qmcflux/errors.hpp"
#include "qmcflux/experiment.hpp"
#include "qmcflux/rng.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

using namespace qmcflux;
using nlohmann::json;

namespace {

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<unsigned> threads;
};

json read_config(const Globals& g)
{
  if (g.config.empty())
    return json::object();
  std::ifstream in(g.config);
  if (!in)
    throw ArgumentError("cannot open config '" + g.config + "'");
  return json::parse(in);
}

ExperimentConfig experiment_config(const Globals& g)
{
  json j = read_config(g);
  if (g.seed)
    j["seed"] = *g.seed;
  if (g.threads)
    j["threads"] = *g.threads;
  return ExperimentConfig::from_json(j);
}

// Parameter vector drawn from the counter RNG and mapped to the model domain.
std::vector<double> draw_parameters(const FieldModel& model, std::uint64_t seed, std::uint64_t index)
{
  const CounterRng rng(seed, index);
  std::vector<double> y(model.dimension());
  const CoordinateMap map = model.gaussian_parameters() ? CoordinateMap::Gaussian : CoordinateMap::Uniform;
  for (std::size_t j = 0; j < y.size(); ++j)
    y[j] = map_coordinate(map, rng.uniform(j));
  return y;
}

void write_text(const std::string& path, const std::string& text)
{
  std::ofstream out(path);
  if (!out)
    throw ArgumentError("cannot write '" + path + "'");
  out << text;
}

int run_convergence_cmd(const Globals& g)
{
  const ExperimentConfig cfg = experiment_config(g);
  const ConvergenceResult res = run_convergence(cfg, &std::cerr);
  std::ostringstream csv;
  write_csv(csv, res.records);
  if (!g.out.empty()) {
    std::filesystem::create_directories(g.out);
    write_text(g.out + "/" + cfg.name + ".csv", csv.str());
    write_text(g.out + "/" + cfg.name + "-summary.json", res.summary.dump(2) + "\n");
  } else {
    std::cout << csv.str();
  }
  std::cerr << res.summary.dump(2) << '\n';
  return 0;
}

int run_solve_cmd(const Globals& g)
{
  json j = read_config(g);
  const FieldModel model(FieldConfig::from_json(j.value("model", json::object())));
  const int m = j.value("mesh_m", 10);
  const Method method = parse_method(j.value("method", std::string("rth")));
  SolverConfig scfg;
  scfg.tau = j.value("tau", 1.0);
  std::vector<double> y;
  if (j.contains("y"))
    y = j.at("y").get<std::vector<double>>();
  else
    y = draw_parameters(model, g.seed.value_or(j.value("seed", std::uint64_t{1})), 0);

  const TriMesh mesh = build_mesh(m);
  const QuadraturePoints qp = quadrature_points(mesh);
  const FieldTable table(model, qp.x, qp.y);
  std::vector<double> a(table.points());
  table.values(y, a);
  const std::vector<double> f = tabulate(qp, [](double x, double) { return x; });
  const MixedSolution sol = solve(method, mesh, a, f, scfg);
  const QoIVector q = qoi_eval(sol, mesh, qp, a);
  const json out = {{"method", to_string(method)},
                    {"mesh_m", m},
                    {"y", y},
                    {"qoi",
                     {{"mean_u", q.mean_u},
                      {"mean_grad", {q.mean_grad[0], q.mean_grad[1]}},
                      {"mean_flux", {q.mean_flux[0], q.mean_flux[1]}},
                      {"quadratic_flux", q.quadratic_flux}}},
                    {"energy_norm", sol.energy_norm},
                    {"iterations", sol.iterations},
                    {"residual", sol.residual}};
  std::cout << out.dump(2) << '\n';
  return 0;
}

int run_cbc_cmd(const Globals& g, std::uint64_t n, std::size_t s, const std::string& output)
{
  json j = read_config(g);
  if (!j.contains("model"))
    j["model"] = {{"kind", "lognormal"}, {"xi", "identity"}, {"theta", 1.3}};
  j["model"]["s"] = s;
  j.erase("s");
  const ExperimentConfig cfg = ExperimentConfig::from_json(j);
  const PredictReport pred = predict(cfg);
  const GeneratingVector gv = cbc_construct(n, s, pred.product_weights);
  std::ostringstream comment;
  comment << "rank-1 lattice generating vector, s = " << s << ", n = " << n << "\n"
          << "naive CBC, kernel B2, product weights of the " << to_string(cfg.model.kind) << " model ("
          << to_string(cfg.model.xi) << ", theta = " << cfg.model.theta << ", lambda = " << pred.params.lambda
          << ")\n"
          << "format: index (1-based) and component";
  std::ostringstream text;
  write_generating_vector(text, gv, comment.str());
  if (output.empty())
    std::cout << text.str();
  else
    write_text(output, text.str());
  return 0;
}

int run_weights_cmd(const Globals& g, std::optional<double> p_override, std::optional<double> r_override,
                    std::optional<double> eps)
{
  const ExperimentConfig cfg = experiment_config(g);
  const FieldModel model(cfg.model);
  WeightParams params = weight_params(model, r_override.value_or(1.0));
  if (p_override)
    params.p = *p_override;
  params.lambda = select_lambda(params.p, params.r, params.sigma, eps);
  if (eps)
    params.epsilon = *eps;
  else if (!(params.p > 2.0 * params.r / 3.0))
    params.epsilon = 0.5 * epsilon_upper(params.r, params.sigma);
  const bool gaussian = model.gaussian_parameters();
  const ParameterModel pm = gaussian ? ParameterModel::Gaussian : ParameterModel::Bounded;
  auto gamma = [&](std::span<const std::size_t> u) {
    return gaussian ? gamma_unbounded(u, params) : gamma_bounded(u, params);
  };
  json gam = json::array();
  for (std::size_t k = 1; k <= std::min<std::size_t>(3, model.dimension()); ++k) {
    Subset u;
    for (std::size_t i = 0; i < k; ++i)
      u.push_back(i);
    std::vector<std::size_t> one_based;
    for (std::size_t i : u)
      one_based.push_back(i + 1);
    gam.push_back({{"u", one_based}, {"gamma", gamma(u)}});
  }
  const std::size_t sc = std::min<std::size_t>(12, model.dimension());
  const double constant = csg_lambda(sc, gamma, params.lambda, pm, params.b);
  const RateReport rate = theoretical_rate(params.p, params.r, params.sigma);
  json out = {{"lambda", params.lambda},
              {"gamma", gam},
              {"constant", constant},
              {"constant_dimension", sc},
              {"predicted_rate", rate.epsilon_interval ? 1.0 - params.epsilon : rate.exponent}};
  if (rate.epsilon_interval)
    out["epsilon_interval"] = {rate.epsilon_interval->first, rate.epsilon_interval->second};
  std::cout << out.dump(2) << '\n';
  return 0;
}

int run_check_cmd(const Globals& g, std::size_t samples)
{
  const ExperimentConfig cfg = experiment_config(g);
  const FieldModel model(cfg.model);
  const std::uint64_t seed = g.seed.value_or(cfg.seed);
  std::vector<std::vector<double>> ys;
  for (std::size_t i = 0; i < samples; ++i)
    ys.push_back(draw_parameters(model, seed, i));
  const AssumptionReport field = check_assumptions(model, ys);

  const TriMesh mesh = build_mesh(cfg.mesh_m);
  const QuadraturePoints qp = quadrature_points(mesh);
  const FieldTable table(model, qp.x, qp.y);
  const std::vector<double> f = tabulate(qp, [](double x, double) { return x; });
  SolverConfig scfg;
  scfg.tau = cfg.tau;
  double a1 = 0.0, cs = 0.0, beta = std::numeric_limits<double>::infinity();
  for (const auto& y : ys) {
    std::vector<double> a(table.points());
    table.values(y, a);
    const MixedSolution sol = solve(cfg.method, mesh, a, f, scfg);
    const StabilityReport rep = check_a1_a2(sol, qp, a, f);
    a1 = std::max(a1, rep.a1_ratio);
    cs = std::max(cs, rep.C_S);
    beta = std::min(beta, rep.beta);
  }
  const json out = {{"field", field.to_json()},
                    {"stability", {{"max_a1_ratio", a1}, {"C_S", cs}, {"beta", beta}, {"samples", samples}}}};
  std::cout << out.dump(2) << '\n';
  return 0;
}

} // namespace

int main(int argc, char** argv)
{
  CLI::App app{"QMC uncertainty quantification for flux quantities of random diffusion problems"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config, "JSON configuration file");
  app.add_option("--seed", g.seed, "Seed for shifts and sampled parameters");
  app.add_option("--out", g.out, "Output directory");
  app.add_option("--threads", g.threads, "Worker threads");

  auto* conv = app.add_subcommand("convergence", "Sweep n and write the RMSE table");
  auto* slv = app.add_subcommand("solve", "Solve one parameter sample");

  auto* cbc = app.add_subcommand("cbc", "Construct a generating vector by CBC");
  std::uint64_t cbc_n = 1024;
  std::size_t cbc_s = 20;
  std::string cbc_output;
  cbc->add_option("--n", cbc_n, "Number of points (power of two)");
  cbc->add_option("--s", cbc_s, "Dimension");
  cbc->add_option("--output", cbc_output, "Write the vector to this file");

  auto* wts = app.add_subcommand("weights", "Print lambda, weights, constant and predicted rate");
  std::optional<double> p_override, r_override, eps;
  wts->add_option("--p", p_override, "Summability exponent (default 1/theta)");
  wts->add_option("--r", r_override, "QoI growth exponent (default 1)");
  wts->add_option("--epsilon", eps, "epsilon for the p <= 2r/3 regime");

  auto* chk = app.add_subcommand("check", "Check the field and stability assumptions on samples");
  std::size_t samples = 10;
  chk->add_option("--samples", samples, "Number of parameter samples");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*conv)
      return run_convergence_cmd(g);
    if (*slv)
      return run_solve_cmd(g);
    if (*cbc)
      return run_cbc_cmd(g, cbc_n, cbc_s, cbc_output);
    if (*wts)
      return run_weights_cmd(g, p_override, r_override, eps);
    if (*chk)
      return run_check_cmd(g, samples);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
