#include "volfilter/experiment.hpp"

#include <cmath>
#include <exception>
#include <filesystem>
#include <sstream>

#include "volfilter/csv_io.hpp"
#include "volfilter/dual_value.hpp"
#include "volfilter/errors.hpp"
#include "volfilter/exact_sum.hpp"
#include "volfilter/filtering.hpp"
#include "volfilter/parallel.hpp"
#include "volfilter/portfolio.hpp"
#include "volfilter/rng.hpp"
#include "volfilter/sde_sim.hpp"
#include "volfilter/svg_plot.hpp"

namespace volfilter {

std::string StageReport::render() const {
  std::ostringstream os;
  os << "[" << stage << "]\n";
  for (const auto& [k, v] : values) os << "  " << k << " = " << v << '\n';
  for (const auto& f : files) os << "  wrote " << f << '\n';
  return os.str();
}

namespace {

template <class Body>
StageReport staged(const std::string& name, Body&& body) {
  try {
    StageReport r = body();
    r.stage = name;
    return r;
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    std::throw_with_nested(StageError(name, e.what()));
  }
}

std::string out_path(const ExperimentConfig& cfg, const std::string& rel) {
  return (std::filesystem::path(cfg.output_dir) / rel).string();
}

void emit(const ExperimentConfig& cfg, StageReport& r, const std::string& rel,
          const std::string& content) {
  write_text_file(out_path(cfg, rel), content);
  r.files.push_back(rel);
}

void put(StageReport& r, const std::string& key, double v) {
  r.values.emplace_back(key, format_double(v));
}

std::size_t exported(const ExperimentConfig& cfg) {
  return std::min(cfg.export_paths, cfg.n_paths);
}

Policy optimal_policy(const ExperimentConfig& cfg, double* phi0) {
  if (cfg.utility.kind == UtilityKind::Log) {
    if (phi0) *phi0 = solve_log_problem(cfg.model, cfg.grid);
    return policy_log(cfg.model);
  }
  const PowerProblem prob = solve_power_problem(cfg.model, cfg.utility.p, cfg.grid, cfg.theta_mode);
  if (phi0) *phi0 = prob.phi0;
  return policy_power(prob.coeffs, prob.field);
}

// Filter outputs of the exported paths, index-aligned with `paths`.
std::vector<FilterOutput> filter_exported(const ExperimentConfig& cfg, const PathSet& paths,
                                          std::size_t workers) {
  const SignalDynamics dyn = filter_dynamics(cfg.model);
  const FilterPrior prior = filter_prior(cfg.model);
  const auto theta =
      std::make_shared<const RiccatiPath>(riccati_theta(dyn, prior.cov, cfg.grid));
  std::vector<FilterOutput> out(paths.paths.size());
  parallel_for(
      out.size(),
      [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
          const ObservedIncrements obs = observed_brownians(paths.paths[i], cfg.model, cfg.grid);
          out[i] = kalman_bucy_run(dyn, obs, theta, prior.mean);
        }
      },
      workers);
  return out;
}

PathSet exported_paths(const ExperimentConfig& cfg, std::size_t workers) {
  return simulate_paths(cfg.model, cfg.grid, exported(cfg), cfg.seed, {}, workers);
}

}  // namespace

StageReport run_simulate_stage(const ExperimentConfig& cfg, std::size_t workers) {
  return staged("simulate", [&] {
    StageReport r;
    const std::size_t N = cfg.n_paths;
    const std::size_t n = cfg.grid.n_steps;
    std::vector<double> log_ST(N);
    std::vector<std::size_t> truncated(N);
    parallel_for(
        N,
        [&](std::size_t begin, std::size_t end) {
          MarketPath path;
          for (std::size_t i = begin; i < end; ++i) {
            simulate_path(cfg.model, cfg.grid, cfg.seed, i, path);
            log_ST[i] = path.log_S[n];
            truncated[i] = path.truncated_steps;
          }
        },
        workers);
    std::size_t total_trunc = 0;
    for (std::size_t t : truncated) total_trunc += t;
    const MCReport m = mc_mean(log_ST, cfg.seed);
    r.values.emplace_back("model", std::string(to_string(cfg.model.kind)));
    put(r, "n_paths", static_cast<double>(N));
    put(r, "n_steps", static_cast<double>(n));
    put(r, "mean_log_S_T", m.estimate);
    put(r, "se_log_S_T", m.std_error);
    put(r, "truncated_steps", static_cast<double>(total_trunc));

    std::ostringstream csv;
    write_paths_csv(csv, exported_paths(cfg, workers));
    emit(cfg, r, "paths.csv", csv.str());
    return r;
  });
}

StageReport run_filter_stage(const ExperimentConfig& cfg, std::size_t workers) {
  return staged("filter", [&] {
    StageReport r;
    const PathSet paths = exported_paths(cfg, workers);
    const std::vector<FilterOutput> filters = filter_exported(cfg, paths, workers);
    const std::size_t n = cfg.grid.n_steps;
    std::vector<double> sq_err;
    for (std::size_t i = 0; i < filters.size(); ++i) {
      std::ostringstream csv;
      write_filter_csv(csv, filters[i]);
      emit(cfg, r, "filters/kb_path" + std::to_string(i) + ".csv", csv.str());
      const double e = paths.paths[i].mu[n] - filters[i].mu_bar[n];
      sq_err.push_back(e * e);
    }
    put(r, "filtered_paths", static_cast<double>(filters.size()));
    if (!filters.empty()) {
      put(r, "mean_sq_error_T", pairwise_sum(sq_err) / static_cast<double>(sq_err.size()));
      put(r, "theta11_T", filters[0].theta->terminal()(0, 0));

      ParticleOptions opt;
      opt.n_particles = cfg.n_particles;
      opt.seed = cfg.seed;
      const ObservedIncrements obs = observed_brownians(paths.paths[0], cfg.model, cfg.grid);
      const ParticleRun pr = particle_ks_run(filter_dynamics(cfg.model), obs, cfg.grid,
                                             filter_prior(cfg.model), opt);
      std::ostringstream csv;
      write_filter_csv(csv, pr.output);
      emit(cfg, r, "filters/particle_path0.csv", csv.str());
      put(r, "particle_minus_kb_T", pr.output.mu_bar[n] - filters[0].mu_bar[n]);
      put(r, "resamples", static_cast<double>(pr.resample_count));
    }
    return r;
  });
}

StageReport run_value_stage(const ExperimentConfig& cfg, std::size_t) {
  return staged("value", [&] {
    StageReport r;
    r.values.emplace_back("utility", cfg.utility.describe());
    double phi0 = 0.0;
    if (cfg.utility.kind == UtilityKind::Log) {
      phi0 = solve_log_problem(cfg.model, cfg.grid);
    } else {
      const PowerProblem prob =
          solve_power_problem(cfg.model, cfg.utility.p, cfg.grid, cfg.theta_mode);
      phi0 = prob.phi0;
      r.values.emplace_back("theta_mode", std::string(to_string(cfg.theta_mode)));
      put(r, "theta11", prob.field->theta(cfg.grid.t0)(0, 0));
      put(r, "theta12", prob.field->theta(cfg.grid.t0)(0, 1));
      std::ostringstream csv;
      write_coeffs_csv(csv, *prob.coeffs);
      emit(cfg, r, "value_coeffs.csv", csv.str());
    }
    const LagrangeSolution lag = solve_lagrange_multiplier(cfg.x0, cfg.utility, phi0);
    put(r, "phi0", phi0);
    put(r, "z_x", lag.z_x);
    put(r, "J_dual_z_x", dual_value(lag.z_x, cfg.utility, phi0));
    put(r, "primal_value", primal_value_closed(cfg.x0, cfg.utility, phi0));
    put(r, "primal_from_dual", lag.primal);
    return r;
  });
}

StageReport run_optimize_stage(const ExperimentConfig& cfg, std::size_t workers) {
  return staged("optimize", [&] {
    StageReport r;
    double phi0 = 0.0;
    const Policy policy = optimal_policy(cfg, &phi0);
    McSetup setup;
    setup.params = cfg.model;
    setup.grid = cfg.grid;
    setup.n_paths = cfg.n_paths;
    setup.seed = cfg.seed;
    setup.x0 = cfg.x0;
    setup.pi_max = cfg.pi_max;
    const McOutcome out = simulate_policies(setup, {policy}, workers);
    const std::vector<double> wealth = out.policies[0].terminal_wealth();
    const MCReport mc = mc_expected_utility(wealth, cfg.utility, cfg.seed);
    const double J = primal_value_closed(cfg.x0, cfg.utility, phi0);
    put(r, "mc_expected_utility", mc.estimate);
    put(r, "std_error", mc.std_error);
    put(r, "closed_form_value", J);
    put(r, "gap_in_se", (mc.estimate - J) / mc.std_error);
    put(r, "clipped_steps", static_cast<double>(out.policies[0].clip_count));
    std::ostringstream csv;
    write_wealth_csv(csv, wealth, cfg.utility);
    emit(cfg, r, "terminal_wealth.csv", csv.str());
    return r;
  });
}

StageReport run_verify_stage(const ExperimentConfig& cfg, VerificationReport* report) {
  return staged("verify", [&] {
    StageReport r;
    VerificationReport v = run_checks(cfg);
    std::size_t passed = 0;
    for (const auto& c : v.checks) passed += c.pass ? 1 : 0;
    put(r, "passed", static_cast<double>(passed));
    put(r, "total", static_cast<double>(v.checks.size()));
    emit(cfg, r, "checks.txt", v.render());
    if (report) *report = std::move(v);
    return r;
  });
}

StageReport run_report_stage(const ExperimentConfig& cfg, std::size_t workers) {
  std::vector<StageReport> parts{run_simulate_stage(cfg, workers), run_filter_stage(cfg, workers),
                                 run_value_stage(cfg, workers), run_optimize_stage(cfg, workers)};
  return staged("report", [&] {
    StageReport r;
    std::ostringstream text;
    text << "# run configuration\n" << render_experiment_config(cfg) << '\n';
    for (const auto& p : parts) {
      text << p.render();
      for (const auto& f : p.files) r.files.push_back(f);
    }
    if (cfg.plots && exported(cfg) > 0) {
      const PathSet paths = exported_paths(cfg, workers);
      const std::vector<FilterOutput> filters = filter_exported(cfg, paths, workers);
      const std::vector<double> t = [&] {
        std::vector<double> v(cfg.grid.nodes());
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = cfg.grid.time(i);
        return v;
      }();
      const CsvTable particle = read_csv(out_path(cfg, "filters/particle_path0.csv"));
      const std::size_t col = particle.column("mu_bar");
      std::vector<double> pmu;
      for (const auto& row : particle.rows) pmu.push_back(row[col]);
      emit(cfg, r, "filter.svg",
           svg_line_chart({{"true drift", t, paths.paths[0].mu, "#444444", 1.0},
                           {"Kalman-Bucy", t, filters[0].mu_bar, "#1f77b4", 1.8},
                           {"particle", t, pmu, "#d62728", 1.2, 0.8}},
                          "Filtered drift, path 0", "t", "mu"));

      const Policy policy = optimal_policy(cfg, nullptr);
      std::vector<Series> fan;
      WealthPath w;
      for (std::size_t i = 0; i < paths.paths.size(); ++i) {
        wealth_path(cfg.model, cfg.grid, paths.paths[i], filters[i].mu_bar, policy, cfg.x0,
                    cfg.pi_max, w);
        std::vector<double> R(w.log_R.size());
        for (std::size_t k = 0; k < R.size(); ++k) R[k] = w.R(k);
        fan.push_back({i == 0 ? "optimal policy" : "", t, R, "#2ca02c", 1.0, 0.6});
      }
      emit(cfg, r, "wealth_fan.svg", svg_line_chart(fan, "Wealth paths", "t", "R"));
    }
    emit(cfg, r, "report.txt", text.str());
    return r;
  });
}

}  // namespace volfilter
