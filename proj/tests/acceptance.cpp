// Runs every acceptance criterion at its stated tolerance and prints one
// PASS/FAIL line per criterion. Usage: qmcflux_acceptance [output-dir]

#include "fem_support.hpp"
#include "oracles.hpp"

#include "qmcflux/experiment.hpp"
#include "qmcflux/weights.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>

using namespace qmcflux;
using namespace qmcflux::testing;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start)
{
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* f, double v)
{
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double net_outflux(const TriMesh& mesh, const MixedSolution& sol, const std::vector<bool>& in_set)
{
  double total = 0.0;
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t)
    if (in_set[t])
      for (int k = 0; k < 3; ++k)
        total += sol.edge_outflux[3 * t + k];
  return total;
}

Outcome conservation()
{
  const auto start = Clock::now();
  double worst_total = 0.0, worst_sub = 0.0;
  for (const auto& cfg : shipped_models()) {
    const FieldModel model(cfg);
    Problem pb(10, model);
    const auto a = pb.coefficient(sample(model, 1, 0));
    const MixedSolution sol = solve_rth(pb.mesh, a, pb.f);
    const std::vector<bool> all(pb.mesh.num_triangles(), true);
    const auto inner = subdomain_mask(pb.mesh, Subdomain{});
    double f_inner = 0.0;
    for (std::size_t i = 0; i < pb.qp.w.size(); ++i)
      if (inner[i / 7])
        f_inner += pb.qp.w[i] * pb.f[i];
    worst_total = std::max(worst_total, std::abs(net_outflux(pb.mesh, sol, all) - 0.5));
    worst_sub = std::max(worst_sub, std::abs(net_outflux(pb.mesh, sol, inner) - f_inner));
  }
  const double t = seconds_since(start);
  return {worst_total <= 1e-8 && worst_sub <= 1e-8 && t < 1.0,
          "max |outflux - 0.5| = " + fmt("%.2e", worst_total) + ", max subdomain defect = " + fmt("%.2e", worst_sub) +
              ", " + fmt("%.2f", t) + " s"};
}

Outcome equivalence()
{
  const auto start = Clock::now();
  double worst = 0.0;
  for (const auto& cfg : shipped_models()) {
    const FieldModel model(cfg);
    Problem pb(5, model);
    const auto a = pb.coefficient(sample(model, 2, 0));
    const MixedSolution hyb = solve_rth(pb.mesh, a, pb.f);
    const MixedSolution dense = solve_rt0_dense(pb.mesh, a, pb.f);
    for (std::size_t i = 0; i < hyb.q_dofs.size(); ++i)
      worst = std::max(worst, std::abs(hyb.q_dofs[i] - dense.q_dofs[i]));
    for (std::size_t i = 0; i < hyb.u_dofs.size(); ++i)
      worst = std::max(worst, std::abs(hyb.u_dofs[i] - dense.u_dofs[i]));
  }
  const double t = seconds_since(start);
  return {worst <= 1e-8 && t < 1.0, "max dof difference = " + fmt("%.2e", worst) + ", " + fmt("%.2f", t) + " s"};
}

Outcome manufactured()
{
  const auto start = Clock::now();
  const double rth = fitted_rate(manufactured_errors(Method::Rth, {8, 16, 32, 64}));
  const double p1 = fitted_rate(manufactured_errors(Method::P1, {8, 16, 32, 64}));
  const double t = seconds_since(start);
  return {std::abs(rth - 1.0) <= 0.15 && std::abs(p1 - 1.0) <= 0.15 && t < 30.0,
          "rth " + fmt("%.3f", rth) + ", p1 " + fmt("%.3f", p1) + ", " + fmt("%.2f", t) + " s"};
}

Outcome statistics()
{
  const auto start = Clock::now();
  const ScalarIntegrand F = [](std::span<const double> y) { return (0.5 + y[0]) * (0.5 + y[1]) * (0.5 + y[2]); };
  const GeneratingVector gv = cbc_construct(64, 3, std::vector<double>{1.0, 1.0, 1.0});
  auto replicate = [&](std::size_t R, std::uint64_t base) {
    std::vector<double> means;
    for (std::uint64_t seed = 0; seed < 200; ++seed)
      means.push_back(estimate_integral(F, gv, generate_shifts(R, 3, base + seed)).mean);
    return means;
  };
  auto mean_var = [](const std::vector<double>& v) {
    const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double s = 0.0;
    for (double x : v)
      s += (x - m) * (x - m);
    return std::make_pair(m, s / static_cast<double>(v.size() - 1));
  };
  const auto [m16, v16] = mean_var(replicate(16, 1000000));
  const auto [m4, v4] = mean_var(replicate(4, 2000000));
  const double stderr16 = std::sqrt(v16 / 200.0);
  const double ratio = v16 / (0.25 * v4);
  const double t = seconds_since(start);
  return {std::abs(m16 - 0.125) < 4.0 * stderr16 && ratio > 0.5 && ratio < 2.0 && t < 10.0,
          "|mean - 0.125| / stderr = " + fmt("%.2f", std::abs(m16 - 0.125) / stderr16) +
              ", Var(R=16) / (Var(R=4)/4) = " + fmt("%.3f", ratio) + ", " + fmt("%.2f", t) + " s"};
}

Outcome regularity()
{
  const auto start = Clock::now();
  std::size_t checked = 0, violations = 0;
  double worst_fd = 0.0, worst_rec = 0.0, worst_closed = 0.0;
  for (const auto& cfg : shipped_models()) {
    const FieldModel model(cfg);
    Problem pb(10, model);
    for (std::uint64_t i = 0; i < 20; ++i) {
      const auto y = sample(model, 100, i);
      const RegularityCheck rc = regularity_check(pb, model, y, Method::Rth, model.dimension());
      checked += rc.checked;
      violations += rc.recursion_violations + rc.closed_violations + rc.gevrey_violations;
      worst_rec = std::max(worst_rec, rc.worst_recursion);
      worst_closed = std::max(worst_closed, rc.worst_closed);
      const std::size_t j = 2 + i % 4;
      for (double rel : fd_check(pb, model, y, Method::Rth, {{0}, {j}, {0, 1}, {1, j}}))
        worst_fd = std::max(worst_fd, rel);
    }
  }
  const double t = seconds_since(start);
  return {violations == 0 && worst_fd <= 1e-3 && t < 60.0,
          std::to_string(checked) + " (y, nu) pairs, " + std::to_string(violations) +
              " bound violations, max norm/recursion = " + fmt("%.3f", worst_rec) +
              ", max norm/closed = " + fmt("%.3f", worst_closed) + ", max FD rel. error = " + fmt("%.1e", worst_fd) +
              ", " + fmt("%.1f", t) + " s"};
}

Outcome convergence(const std::string& out_dir)
{
  const auto start = Clock::now();
  const std::vector<std::pair<std::string, double>> gates = {
      {"affine", 0.95}, {"gevrey-affine", 0.90}, {"lognormal", 0.75}, {"gevrey-lognormal", 0.80}};
  bool pass = true;
  std::ostringstream detail;
  for (const auto& [name, gate] : gates) {
    std::ifstream in(std::string(QMCFLUX_SOURCE_DIR) + "/configs/" + name + ".json");
    const ExperimentConfig cfg = ExperimentConfig::from_json(nlohmann::json::parse(in));
    const ConvergenceResult res = run_convergence(cfg);
    if (!out_dir.empty()) {
      std::ofstream csv(out_dir + "/" + name + ".csv");
      write_csv(csv, res.records);
      std::ofstream(out_dir + "/" + name + "-summary.json") << res.summary.dump(2) << '\n';
    }
    detail << name << " (>= " << gate << "):";
    for (const char* q : {"u", "grad", "flux"}) {
      const auto& rate = res.summary["rates"][q]["rate"];
      const double r = rate.is_number() ? rate.get<double>() : 0.0;
      pass = pass && r >= gate;
      detail << ' ' << q << ' ' << fmt("%.3f", r);
    }
    detail << "; ";
  }
  detail << fmt("%.1f", seconds_since(start)) << " s";
  return {pass, detail.str()};
}

Outcome weight_formulas()
{
  std::mt19937_64 rng(424242);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double worst = 0.0;
  for (int draw = 0; draw < 50; ++draw) {
    WeightParams p;
    p.lambda = 0.51 + 0.49 * unit(rng);
    p.sigma = 1.0 + 0.6 * unit(rng);
    p.r = 0.5 + 1.5 * unit(rng);
    p.C_R = 0.5 + unit(rng);
    p.C_G = 0.5 + 1.5 * unit(rng);
    p.b.resize(12);
    for (double& b : p.b)
      b = 0.4 * unit(rng);
    std::vector<std::size_t> idx(12);
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(static_cast<std::size_t>(draw % 7));
    const double gb = gamma_bounded(idx, p), gu = gamma_unbounded(idx, p);
    worst = std::max(worst, std::abs(gb - oracle::gamma_bounded_oracle(idx, p)) / std::max(1.0, gb));
    worst = std::max(worst, std::abs(gu - oracle::gamma_unbounded_oracle(idx, p)) / std::max(1.0, gu));
  }

  std::size_t beaten = 0;
  std::vector<double> rho(6), beta(6);
  for (std::size_t i = 0; i < 6; ++i) {
    rho[i] = 0.1 + 2.0 * unit(rng);
    beta[i] = 0.1 + 2.0 * unit(rng);
  }
  const double lam = 0.7;
  const auto gstar = optimal_weights(rho, beta, lam);
  const double best = weight_objective(gstar, rho, beta, lam);
  for (int k = 0; k < 100; ++k) {
    auto g = gstar;
    for (double& x : g)
      x *= std::exp(0.5 * (unit(rng) - 0.5));
    beaten += weight_objective(g, rho, beta, lam) >= best;
  }
  return {worst <= 1e-10 && beaten == 100,
          "max relative deviation from subset enumeration = " + fmt("%.1e", worst) + ", minimizer beats " +
              std::to_string(beaten) + "/100 perturbations"};
}

Outcome cbc_optimality()
{
  std::size_t stages = 0, mismatches = 0;
  std::vector<std::vector<double>> weight_sets = {{1.0, 1.0, 1.0, 1.0}, {1.0, 0.5, 0.25, 0.125}};
  for (const char* kind : {"affine", "lognormal"}) {
    const auto pred = predict(ExperimentConfig::from_json({{"model", {{"kind", kind}, {"s", 4}}}}));
    weight_sets.push_back(pred.product_weights);
  }
  for (std::uint64_t n : {16, 32, 64})
    for (const auto& gamma : weight_sets)
      for (std::size_t s = 1; s <= 4; ++s) {
        const std::vector<double> g(gamma.begin(), gamma.begin() + static_cast<long>(s));
        const GeneratingVector gv = cbc_construct(n, s, g);
        for (std::size_t j = 1; j < s; ++j) {
          std::vector<std::uint64_t> prefix(gv.z.begin(), gv.z.begin() + static_cast<long>(j) + 1);
          std::vector<double> e;
          for (std::uint64_t c = 1; c < n; c += 2) {
            prefix.back() = c;
            e.push_back(oracle::worst_case_error_sq(n, prefix, g));
          }
          const double min = *std::min_element(e.begin(), e.end());
          std::uint64_t arg = 0;
          for (std::size_t i = 0; i < e.size(); ++i)
            if (e[i] <= min + 1e-12 * std::abs(min)) {
              arg = 2 * i + 1;
              break;
            }
          ++stages;
          mismatches += gv.z[j] != arg;
        }
      }
  return {mismatches == 0, std::to_string(stages) + " stages, " + std::to_string(mismatches) + " mismatches"};
}

} // namespace

int main(int argc, char** argv)
{
  std::string out_dir;
  if (argc > 1) {
    out_dir = argv[1];
    std::filesystem::create_directories(out_dir);
  }
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"conservation", conservation},
      {"rt0-equivalence", equivalence},
      {"manufactured-rates", manufactured},
      {"qmc-statistics", statistics},
      {"parametric-regularity", regularity},
      {"convergence-desk-scale", [&] { return convergence(out_dir); }},
      {"weight-formulas", weight_formulas},
      {"cbc-optimality", cbc_optimality},
  };
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
    failed += !o.pass;
  }
  return failed == 0 ? 0 : 1;
}
