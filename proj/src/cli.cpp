#include "coag/cli.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <sstream>
#include <utility>

#include "CLI11.hpp"
#include "coag/fluctuation.hpp"
#include "coag/harness.hpp"
#include "coag/io.hpp"
#include "coag/kinetic.hpp"
#include "coag/plot.hpp"
#include "coag/simulator.hpp"
#include "coag/variation.hpp"

namespace coag {

namespace {

using nlohmann::json;

struct Artifacts {
  json report;
  std::vector<std::pair<std::string, std::string>> files;  // name -> content
  bool pass = true;
};

std::string fnum(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Observation times must land on the solver meshes up front, so a typo is a
// config error instead of a mid-run abort.
void check_on_mesh(double t, double step, const char* what) {
  const double k = std::round(t / step);
  if (std::abs(k * step - t) > 1e-6 * step)
    throw ConfigError(std::string("config: ") + what + " must sit on the solver mesh (" +
                      fnum(t) + " vs step " + fnum(step) + ")");
}

double mesh_snap(double t, double step) { return std::round(t / step) * step; }

json fit_to_json(const RateFit& fit) {
  return json{{"slope", fit.slope},     {"slope_se", fit.slope_se}, {"r2", fit.r2},
              {"rejected", fit.rejected}, {"note", fit.note},
              {"h", fit.abscissae},     {"error", fit.ordinates},   {"noise", fit.noise}};
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

// ---------------------------------------------------------------- solve --

Artifacts run_solve(const ExperimentConfig& cfg, bool plot) {
  for (const double t : cfg.times) check_on_mesh(t, cfg.dt / 2.0, "every time");
  const GridMeasure mu0 = initial_measure(cfg);
  const KineticSolution sol = solve_kinetic(mu0, cfg.kernel, cfg.times, cfg.dt);
  const double residual = conservation_residual(sol);
  const double tol = cfg.gate("conservation_tol", 1e-8);

  std::ostringstream csv;
  csv << "time,bin,mass,weight\n";
  json masses = json::array(), overflows = json::array();
  for (const double t : sol.requested_times()) {
    const GridMeasure& st = sol.at_time(t);
    for (int k = 1; k <= cfg.grid.nbins; ++k)
      csv << fnum(t) << "," << k << "," << fnum(cfg.grid.mass(k)) << ","
          << fnum(st.w[k - 1]) << "\n";
    csv << fnum(t) << ",0,0," << fnum(st.overflow) << "\n";
    masses.push_back(moment(st, 1.0) + st.overflow);
    overflows.push_back(st.overflow);
  }

  Artifacts art;
  art.pass = residual <= tol;
  art.report["kernel"] = kernel_name(cfg.kernel);
  art.report["times"] = cfg.times;
  art.report["total_mass"] = masses;
  art.report["overflow"] = overflows;
  art.report["conservation_residual"] = residual;
  art.report["conservation_tol"] = tol;
  art.report["clipped_mass"] = sol.clipped_mass();
  art.report["min_weight"] = sol.min_weight();
  art.files.emplace_back("solution.csv", csv.str());

  if (plot) {
    const GridMeasure& last = sol.at_time(cfg.times.back());
    PlotSeries prof;
    prof.label = "t = " + fnum(cfg.times.back());
    for (int k = 1; k <= cfg.grid.nbins; ++k) {
      prof.x.push_back(cfg.grid.mass(k));
      prof.y.push_back(last.w[k - 1]);
    }
    art.files.emplace_back("plot.svg", svg_loglog({prof}, "mass", "weight"));
  }
  return art;
}

// ------------------------------------------------------------- simulate --

Artifacts run_simulate(const ExperimentConfig& cfg) {
  for (const double t : cfg.times) check_on_mesh(t, cfg.dt / 2.0, "every time");
  if (cfg.functionals.empty())
    throw ConfigError("config: 'simulate' needs at least one functional to track");
  const EnsembleConfig proto = ensemble_config(cfg);
  const EnsembleStats stats = run_ensemble(proto);

  // one fresh path re-run for the integer conservation audit
  ParticleState state = ParticleState::monodisperse(cfg.grid, proto.h, cfg.kernel);
  const long long units0 = state.mass_units() + state.overflow_units();
  RngStream rng = RngStream::for_replica(proto.seed, 0);
  simulate_path(state, cfg.times, rng);
  const bool conserved = state.mass_units() + state.overflow_units() == units0;

  std::ostringstream csv;
  csv << "time,functional,count,raw_mean,raw_se,raw_target,fluct_mean,fluct_se,"
         "fluct_variance\n";
  json channels = json::array();
  const std::size_t F = cfg.functionals.size();
  for (std::size_t t = 0; t < cfg.times.size(); ++t) {
    for (std::size_t f = 0; f < F; ++f) {
      const std::size_t ch = t * F + f;
      const StreamingMoments& raw = stats.raw[ch];
      const StreamingMoments& fl = stats.fluct[ch];
      csv << fnum(cfg.times[t]) << "," << stats.labels[f] << "," << raw.count() << ","
          << fnum(raw.mean()) << "," << fnum(raw.mean_se()) << ","
          << fnum(stats.raw_target[ch]) << "," << fnum(fl.mean()) << ","
          << fnum(fl.mean_se()) << "," << fnum(fl.variance()) << "\n";
      channels.push_back(json{{"time", cfg.times[t]},
                              {"functional", stats.labels[f]},
                              {"raw_mean", raw.mean()},
                              {"raw_se", raw.mean_se()},
                              {"raw_target", stats.raw_target[ch]},
                              {"fluct_mean", fl.mean()},
                              {"fluct_se", fl.mean_se()},
                              {"fluct_variance", fl.variance()}});
    }
  }

  Artifacts art;
  art.pass = conserved;
  art.report["replicas"] = stats.replicas;
  art.report["h"] = proto.h;
  art.report["units_conserved"] = conserved;
  art.report["channels"] = std::move(channels);
  if (!stats.sobolev.empty()) {
    json sob = json::array();
    for (std::size_t t = 0; t < stats.sobolev.size(); ++t)
      sob.push_back(json{{"time", cfg.times[t]},
                         {"mean_sq_norm", stats.sobolev[t].mean()},
                         {"se", stats.sobolev[t].mean_se()}});
    art.report["sobolev"] = std::move(sob);
  }
  art.files.emplace_back("channels.csv", csv.str());
  return art;
}

// ------------------------------------------------------------ variation --

std::vector<std::pair<std::string, GridFunction>> probe_dictionary(const Grid& grid) {
  std::vector<std::pair<std::string, GridFunction>> dict;
  dict.emplace_back("one", constant_function(grid, 1.0));
  dict.emplace_back("mass", mass_function(grid));
  dict.emplace_back("square", power_function(grid, 2.0));
  dict.emplace_back("sqrt", power_function(grid, 0.5));
  dict.emplace_back("ind1", indicator_function(grid, 1));
  dict.emplace_back("ind4", indicator_function(grid, std::min(4, grid.nbins)));
  Eigen::ArrayXd v(grid.nbins);
  for (int k = 1; k <= grid.nbins; ++k) v[k - 1] = grid.mass(k) / (1.0 + grid.mass(k));
  dict.emplace_back("saturating", tabulated_function(grid, v));
  for (int k = 1; k <= grid.nbins; ++k) v[k - 1] = 1.0 / (1.0 + grid.mass(k));
  dict.emplace_back("inverse", tabulated_function(grid, v));
  for (int k = 1; k <= grid.nbins; ++k) v[k - 1] = std::log1p(grid.mass(k));
  dict.emplace_back("log", tabulated_function(grid, v));
  for (int k = 1; k <= grid.nbins; ++k) v[k - 1] = std::exp(-grid.mass(k));
  dict.emplace_back("decay", tabulated_function(grid, v));
  return dict;
}

double flat_gap(const GridMeasure& a, const GridMeasure& b) {
  return (a.w - b.w).abs().maxCoeff() + std::abs(a.overflow - b.overflow);
}

Artifacts run_variation(const ExperimentConfig& cfg) {
  const double t = cfg.times.back();
  check_on_mesh(t, cfg.dt, "the horizon (times.back())");
  if (!(t > 0.0)) throw ConfigError("config: the horizon must be positive");
  const double r_mid = mesh_snap(t / 2.0, cfg.dt);
  if (!(r_mid > 0.0) || !(r_mid < t))
    throw ConfigError("config: the horizon must span at least two dt steps");
  const double series_r = mesh_snap(std::min(t, cfg.gate("series_horizon", 0.2)), cfg.dt);
  if (!(series_r > 0.0))
    throw ConfigError("config: series_horizon must cover at least one dt step");

  const GridMeasure mu0 = initial_measure(cfg);
  const KineticSolution kin = solve_kinetic(mu0, cfg.kernel, {t}, cfg.dt);
  const int N = cfg.grid.nbins;

  const auto dict = probe_dictionary(cfg.grid);
  // sources stay in the lower half of the grid: the identity is between the
  // untruncated flows, and both truncation surrogates (overflow lump forward,
  // linear extension backward) are only negligible away from the top bin
  std::vector<int> source_bins;
  for (int j = 1; j <= 10; ++j) {
    const int b = std::max(1, static_cast<int>(std::lround(j * N / 20.0)));
    if (source_bins.empty() || source_bins.back() != b) source_bins.push_back(b);
  }

  // duality: pairing a seeded first variation against g equals carrying g
  // backward to the source time and reading it at the source mass
  std::ostringstream dcsv;
  dcsv << "probe,source_bin,pairing,backward,abs_err\n";
  double duality_err = 0.0;
  std::vector<PropagatorField> backs;
  backs.reserve(dict.size());
  for (const auto& [name, g] : dict) backs.push_back(solve_backward(g, t, cfg.kernel, kin));
  for (const int b : source_bins) {
    const double x = cfg.grid.mass(b);
    const VariationField xi = solve_variation(x, cfg.kernel, kin);
    const GridMeasure& xi_t = xi.at_time(t);
    for (std::size_t d = 0; d < dict.size(); ++d) {
      const double lhs = pair(dict[d].second, xi_t);
      const double rhs = backs[d].values.front().v[b - 1];
      const double err = std::abs(lhs - rhs);
      duality_err = std::max(duality_err, err);
      dcsv << dict[d].first << "," << b << "," << fnum(lhs) << "," << fnum(rhs) << ","
           << fnum(err) << "\n";
    }
  }

  // two-leg composition through the midpoint node against the single sweep
  double ck_defect = 0.0;
  for (std::size_t d = 0; d < dict.size(); ++d) {
    const GridFunction& at_mid = backs[d].at_time(r_mid);
    const PropagatorField head = solve_backward(at_mid, r_mid, cfg.kernel, kin);
    ck_defect = std::max(
        ck_defect,
        (head.values.front().v - backs[d].values.front().v).abs().maxCoeff());
  }

  // perturbation series against the full backward sweep at the series horizon
  const GridFunction g_sq = power_function(cfg.grid, 2.0);
  const PropagatorField direct = solve_backward(g_sq, series_r, cfg.kernel, kin);
  std::vector<double> series_errs;
  const int series_terms = 4;
  for (int m = 0; m <= series_terms; ++m) {
    const PropagatorField ser = propagator_series(g_sq, series_r, cfg.kernel, kin, m);
    series_errs.push_back(
        (ser.values.front().v - direct.values.front().v).abs().maxCoeff());
  }

  // finite-difference linearity of the first and second variations
  const double s0 = cfg.gate("fd_base", 1e-2);
  const int xbin = std::max(1, N / 3), wbin = std::max(1, N / 2);
  const double xmass = cfg.grid.mass(xbin), wmass = cfg.grid.mass(wbin);
  const VariationField xi = solve_variation(xmass, cfg.kernel, kin);
  const SecondVariationField eta = solve_second_variation(xmass, wmass, cfg.kernel, kin);

  std::vector<double> xi_errs, eta_errs;
  for (int j = 0; j < 4; ++j) {
    const double s = s0 / static_cast<double>(1 << j);
    GridMeasure pert_x = mu0;
    pert_x.w[xbin - 1] += s;
    const KineticSolution kx = solve_kinetic(pert_x, cfg.kernel, {t}, cfg.dt);
    GridMeasure lin = kin.at_time(t);
    lin.w += s * xi.at_time(t).w;
    lin.overflow += s * xi.at_time(t).overflow;
    xi_errs.push_back(flat_gap(kx.at_time(t), lin) / s);

    GridMeasure pert_w = mu0;
    pert_w.w[wbin - 1] += s;
    const KineticSolution kw = solve_kinetic(pert_w, cfg.kernel, {t}, cfg.dt);
    const VariationField xi_w = solve_variation(xmass, cfg.kernel, kw);
    GridMeasure lin2 = xi.at_time(t);
    lin2.w += s * eta.at_time(t).w;
    lin2.overflow += s * eta.at_time(t).overflow;
    eta_errs.push_back(flat_gap(xi_w.at_time(t), lin2) / s);
  }
  std::vector<double> xi_ratios, eta_ratios;
  for (int j = 0; j < 3; ++j) {
    xi_ratios.push_back(xi_errs[j] / xi_errs[j + 1]);
    eta_ratios.push_back(eta_errs[j] / eta_errs[j + 1]);
  }

  const double duality_tol = cfg.gate("duality_tol", 1e-6);
  const double ck_tol = cfg.gate("ck_tol", 1e-8);
  const double series_tol = cfg.gate("series_tol", 1e-5);
  const double ratio_tol = cfg.gate("fd_ratio_tol", 0.4);
  bool ratios_ok = true;
  for (const double q : xi_ratios) ratios_ok = ratios_ok && std::abs(q - 2.0) <= ratio_tol;
  for (const double q : eta_ratios) ratios_ok = ratios_ok && std::abs(q - 2.0) <= ratio_tol;

  Artifacts art;
  art.pass = duality_err <= duality_tol && ck_defect <= ck_tol &&
             series_errs.back() <= series_tol && ratios_ok;
  art.report["horizon"] = t;
  art.report["duality_max_err"] = duality_err;
  art.report["duality_tol"] = duality_tol;
  art.report["ck_defect"] = ck_defect;
  art.report["ck_tol"] = ck_tol;
  art.report["series_horizon"] = series_r;
  art.report["series_errs"] = series_errs;
  art.report["series_tol"] = series_tol;
  art.report["fd_base"] = s0;
  art.report["fd_xi_errs"] = xi_errs;
  art.report["fd_eta_errs"] = eta_errs;
  art.report["fd_xi_ratios"] = xi_ratios;
  art.report["fd_eta_ratios"] = eta_ratios;
  art.report["fd_ratio_tol"] = ratio_tol;
  art.files.emplace_back("duality.csv", dcsv.str());
  return art;
}

// ------------------------------------------------------------- lln, clt --

const FunctionalSpec& ladder_functional(const ExperimentConfig& cfg) {
  if (const auto it = cfg.doc.find("ladder"); it != cfg.doc.end()) {
    if (!it->is_object()) throw ConfigError("config: 'ladder' must be an object");
    if (const auto pit = it->find("phi"); pit != it->end()) {
      if (!pit->is_string()) throw ConfigError("config: ladder.phi must be a string");
      return cfg.functional(pit->get<std::string>());
    }
  }
  if (cfg.functionals.size() == 1) return cfg.functionals.front();
  throw ConfigError(
      "config: ladder commands track one functional; name it with ladder.phi");
}

Artifacts run_ladder(const ExperimentConfig& cfg, bool plot, bool lln) {
  for (const double t : cfg.times) check_on_mesh(t, cfg.dt / 2.0, "every time");
  if (cfg.h_ladder.size() < 4)
    throw ConfigError("config: 'h_ladder' needs at least four rungs");
  EnsembleConfig proto = ensemble_config(cfg, cfg.h_ladder.front());
  proto.functionals = {ladder_functional(cfg)};

  const RateFit fit =
      lln ? lln_rate(proto, cfg.h_ladder) : clt_rate(proto, cfg.h_ladder);
  const double lo = cfg.gate("slope_lo", lln ? 0.8 : 0.35);
  const double hi = cfg.gate("slope_hi", lln ? 1.2 : 0.65);

  std::ostringstream csv;
  csv << "h,error,noise\n";
  for (std::size_t i = 0; i < fit.abscissae.size(); ++i)
    csv << fnum(fit.abscissae[i]) << "," << fnum(fit.ordinates[i]) << ","
        << fnum(fit.noise[i]) << "\n";

  Artifacts art;
  art.pass = !fit.rejected && fit.slope >= lo && fit.slope <= hi;
  art.report["functional"] = proto.functionals.front().name();
  art.report["replicas_per_rung"] = cfg.replicas;
  art.report["fit"] = fit_to_json(fit);
  art.report["slope_band"] = json::array({lo, hi});
  art.files.emplace_back("points.csv", csv.str());

  if (plot) {
    PlotSeries measured;
    measured.label = "measured";
    measured.x = fit.abscissae;
    measured.y = fit.ordinates;
    measured.line = false;
    std::vector<PlotSeries> series{measured};
    if (!fit.rejected) {
      std::vector<double> lx, ly;
      for (std::size_t i = 0; i < fit.abscissae.size(); ++i) {
        lx.push_back(std::log(fit.abscissae[i]));
        ly.push_back(std::log(fit.ordinates[i]));
      }
      const LinearFit lf = linear_fit(lx, ly);
      PlotSeries line;
      char lbl[48];
      std::snprintf(lbl, sizeof lbl, "fit slope %.3f", lf.slope);
      line.label = lbl;
      line.marks = false;
      for (const double h : fit.abscissae) {
        line.x.push_back(h);
        line.y.push_back(std::exp(lf.intercept + lf.slope * std::log(h)));
      }
      series.push_back(std::move(line));
    }
    art.files.emplace_back("plot.svg", svg_loglog(series, "h", "error"));
  }
  return art;
}

// ----------------------------------------------------------- covariance --

Artifacts run_covariance(const ExperimentConfig& cfg) {
  for (const double t : cfg.times) check_on_mesh(t, cfg.dt / 2.0, "every time");
  if (cfg.functionals.empty())
    throw ConfigError("config: 'covariance' needs at least one functional");
  const EnsembleConfig proto = ensemble_config(cfg);

  std::string gauss_phi = cfg.functionals.front().label;
  double gauss_time = cfg.times.back();
  std::vector<double> cov_times = cfg.times;
  std::vector<std::string> cov_phis(cov_times.size(), gauss_phi);
  if (const auto it = cfg.doc.find("law"); it != cfg.doc.end()) {
    if (!it->is_object()) throw ConfigError("config: 'law' must be an object");
    if (const auto p = it->find("gauss_phi"); p != it->end())
      gauss_phi = p->get<std::string>();
    if (const auto p = it->find("gauss_time"); p != it->end())
      gauss_time = p->get<double>();
    if (const auto p = it->find("cov_times"); p != it->end())
      cov_times = p->get<std::vector<double>>();
    if (const auto p = it->find("cov_phis"); p != it->end()) {
      cov_phis = p->get<std::vector<std::string>>();
    } else if (cov_times.size() != cov_phis.size()) {
      cov_phis.assign(cov_times.size(), gauss_phi);
    }
  }
  if (cov_times.size() != cov_phis.size())
    throw ConfigError("config: law.cov_times and law.cov_phis must pair up");
  check_on_mesh(gauss_time, cfg.dt / 2.0, "law.gauss_time");
  for (const double t : cov_times) check_on_mesh(t, cfg.dt / 2.0, "every law.cov_times entry");

  std::vector<FunctionalSpec> phis;
  for (const std::string& name : cov_phis) phis.push_back(cfg.functional(name));

  const GaussianityReport g = clt_gaussianity(proto, cfg.functional(gauss_phi), gauss_time);
  const CovTestReport c = finite_dim_cov_test(proto, cov_times, phis);

  std::ostringstream csv;
  csv << "l,k,time_l,time_k,phi_l,phi_k,sample,predicted,z\n";
  for (Eigen::Index l = 0; l < c.sample.rows(); ++l)
    for (Eigen::Index k = 0; k < c.sample.cols(); ++k)
      csv << l << "," << k << "," << fnum(c.times[static_cast<std::size_t>(l)]) << ","
          << fnum(c.times[static_cast<std::size_t>(k)]) << ","
          << c.labels[static_cast<std::size_t>(l)] << ","
          << c.labels[static_cast<std::size_t>(k)] << "," << fnum(c.sample(l, k)) << ","
          << fnum(c.predicted(l, k)) << "," << fnum(c.zscores(l, k)) << "\n";

  Artifacts art;
  art.pass = g.pass && c.pass;
  art.report["gaussianity"] = json{{"functional", g.label},
                                   {"time", g.time},
                                   {"replicas", g.replicas},
                                   {"sample_variance", g.sample_variance},
                                   {"predicted_variance", g.predicted_variance},
                                   {"variance_ratio", g.variance_ratio},
                                   {"skewness", g.skewness},
                                   {"excess_kurtosis", g.excess_kurtosis},
                                   {"ks_distance", g.ks_distance},
                                   {"ks_ref", g.ks_ref},
                                   {"degenerate", g.degenerate},
                                   {"pass", g.pass}};
  art.report["covariance"] = json{{"times", c.times},
                                  {"functionals", c.labels},
                                  {"replicas", c.replicas},
                                  {"mean_sample", std::vector<double>(
                                                      c.mean_sample.data(),
                                                      c.mean_sample.data() + c.mean_sample.size())},
                                  {"sample", matrix_to_json(c.sample)},
                                  {"predicted", matrix_to_json(c.predicted)},
                                  {"zscores", matrix_to_json(c.zscores)},
                                  {"max_abs_z", c.max_abs_z},
                                  {"ecf_max_diff", c.ecf_max_diff},
                                  {"ecf_ref", c.ecf_ref},
                                  {"pass", c.pass}};
  art.files.emplace_back("covariance.csv", csv.str());
  return art;
}

// ------------------------------------------------------------ selfcheck --

json selfcheck_doc() {
  return json{{"schema", 1},
              {"kernel", json{{"family", "constant"}, {"coeff", 1.0}}},
              {"grid", json{{"delta", 1.0}, {"bins", 16}}},
              {"h", 1.0 / 64.0},
              {"dt", 0.0125},
              {"times", json::array({0.25})},
              {"functionals",
               json{{"mass", json{{"kind", "mass"}}},
                    {"n1", json{{"kind", "indicator"}, {"bin", 1}}}}},
              {"replicas", 24},
              {"seed", 7}};
}

Artifacts run_selfcheck(const ExperimentConfig& cfg) {
  const double t = cfg.times.back();
  std::vector<std::pair<std::string, bool>> checks;

  {
    ParticleState state = ParticleState::monodisperse(cfg.grid, cfg.h, cfg.kernel);
    const long long units0 = state.mass_units() + state.overflow_units();
    RngStream rng = RngStream::for_replica(cfg.seed, 0);
    simulate_path(state, {t}, rng);
    checks.emplace_back("simulator conserves mass units exactly",
                        state.mass_units() + state.overflow_units() == units0);
  }

  const KineticSolution kin =
      solve_kinetic(monodisperse(cfg.grid, cfg.h), cfg.kernel, {t}, cfg.dt);
  const GridFunction E = mass_function(cfg.grid);

  {
    const PropagatorField flow = solve_backward(E, t, cfg.kernel, kin);
    double worst = 0.0;
    for (const GridFunction& g : flow.values)
      worst = std::max(worst, (g.v - E.v).abs().maxCoeff());
    checks.emplace_back("backward flow fixes the mass function bitwise", worst == 0.0);
  }
  {
    double worst = 0.0;
    for (std::size_t i = 0; i < kin.size(); ++i)
      worst = std::max(worst,
                       apply_lambda(E, kin.state(i), cfg.kernel).v.abs().maxCoeff());
    checks.emplace_back("generator annihilates the mass function", worst == 0.0);
  }
  {
    const GridFunction psi = power_function(cfg.grid, 2.0);
    double worst = 0.0;
    for (std::size_t i = 0; i < kin.size(); ++i) {
      worst = std::max(worst, std::abs(pi_form(kin.state(i), E, psi, cfg.kernel)));
      worst = std::max(worst, std::abs(pi_form(kin.state(i), psi, E, cfg.kernel)));
    }
    checks.emplace_back("noise form vanishes on the mass channel", worst == 0.0);
  }
  checks.emplace_back("accumulated variance of the mass channel is zero",
                      ou_variance(E, t, cfg.kernel, kin) == 0.0);
  {
    const OUCovariance cov =
        ou_covariance({t}, {power_function(cfg.grid, 2.0)}, zero_measure(cfg.grid),
                      cfg.kernel, kin);
    const std::complex<double> c0 = char_fn(cov, Eigen::VectorXd::Zero(1));
    checks.emplace_back("characteristic function at p = 0 is one",
                        c0 == std::complex<double>(1.0, 0.0));
  }
  {
    const EnsembleConfig proto = ensemble_config(cfg);
    const EnsembleStats stats = run_ensemble(proto);
    // functionals sort by name: "mass" first
    checks.emplace_back("harness mass channel is degenerate across replicas",
                        stats.fluct[0].variance() == 0.0);
  }

  Artifacts art;
  json rows = json::array();
  for (const auto& [name, ok] : checks) {
    std::cout << (ok ? "ok   " : "FAIL ") << name << "\n";
    rows.push_back(json{{"check", name}, {"pass", ok}});
    art.pass = art.pass && ok;
  }
  art.report["checks"] = std::move(rows);
  return art;
}

}  // namespace

int run_command(const std::vector<std::string>& args) {
  CLI::App app{"numerical laboratory for mass-action coagulation"};
  app.name("coag");

  std::string config_path, out_override;
  std::uint64_t seed = 0;
  long long replicas = 0;
  int threads = 0;
  bool plot = false, force = false;
  app.add_option("--config", config_path, "experiment configuration (JSON)");
  auto* o_seed = app.add_option("--seed", seed, "override the master seed");
  auto* o_replicas = app.add_option("--replicas", replicas, "override the replica count");
  auto* o_threads =
      app.add_option("--threads", threads, "worker threads (SMOL_THREADS as fallback)");
  auto* o_out = app.add_option("--out", out_override, "override the output directory");
  app.add_flag("--plot", plot, "emit an SVG plot with the artifacts");
  app.add_flag("--force", force, "re-run even if the artifact directory is complete");

  app.require_subcommand(1);
  static const struct {
    const char* name;
    const char* blurb;
  } kCommands[] = {
      {"solve", "integrate the kinetic equation and write the trajectory"},
      {"simulate", "run a replica ensemble and summarize every channel"},
      {"variation", "duality, composition, series, and linearity checks"},
      {"lln", "mean-functional error rate along the h ladder"},
      {"clt", "fluctuation-mean rate along the h ladder"},
      {"covariance", "limit law moments and joint covariance at one level"},
      {"selfcheck", "exact identities on a built-in configuration"},
  };
  for (const auto& c : kCommands) app.add_subcommand(c.name, c.blurb)->fallthrough();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  const std::string cmd = app.get_subcommands().front()->get_name();

  ExperimentConfig cfg;
  try {
    if (!config_path.empty())
      cfg = load_config(config_path);
    else if (cmd == "selfcheck")
      cfg = parse_config(selfcheck_doc(), "");
    else
      throw ConfigError("config: --config is required for '" + cmd + "'");

    if (o_seed->count() > 0) {
      cfg.seed = seed;
      cfg.doc["seed"] = seed;
    }
    if (o_replicas->count() > 0) {
      if (replicas < 1) throw ConfigError("config: --replicas must be positive");
      cfg.replicas = replicas;
      cfg.doc["replicas"] = replicas;
    }
    if (o_threads->count() > 0) {
      if (threads < 1) throw ConfigError("config: --threads must be positive");
      cfg.threads = threads;
    } else if (const char* env = std::getenv("SMOL_THREADS")) {
      char* end = nullptr;
      const long v = std::strtol(env, &end, 10);
      if (end == env || *end != '\0' || v < 1)
        throw ConfigError("config: SMOL_THREADS must be a positive integer");
      cfg.threads = static_cast<int>(v);
    }
    cfg.doc["threads"] = cfg.threads;
    if (o_out->count() > 0) {
      cfg.out_dir = out_override;
      cfg.doc["out"] = out_override;
    }
  } catch (const ConfigError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  }

  try {
    const std::string dir = artifact_dir(cfg, cmd);
    if (artifact_complete(dir) && !force) {
      std::cout << "already complete: " << dir << " (re-run with --force)\n";
      return 0;
    }

    Artifacts art;
    if (cmd == "solve")
      art = run_solve(cfg, plot);
    else if (cmd == "simulate")
      art = run_simulate(cfg);
    else if (cmd == "variation")
      art = run_variation(cfg);
    else if (cmd == "lln")
      art = run_ladder(cfg, plot, true);
    else if (cmd == "clt")
      art = run_ladder(cfg, plot, false);
    else if (cmd == "covariance")
      art = run_covariance(cfg);
    else
      art = run_selfcheck(cfg);

    art.report["experiment"] = cmd;
    art.report["config_hash"] = config_hash(cfg.doc);
    art.report["config"] = cfg.doc;
    art.report["pass"] = art.pass;
    for (const auto& [name, content] : art.files) write_text_file(dir + "/" + name, content);
    write_text_file(dir + "/report.json", art.report.dump(2) + "\n");
    std::cout << (art.pass ? "PASS " : "FAIL ") << cmd << " -> " << dir << "/report.json\n";
    return art.pass ? 0 : 1;
  } catch (const ConfigError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace coag
