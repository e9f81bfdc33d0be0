#include "coag/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <cstdio>
#include <limits>
#include <stdexcept>
#include <thread>

#include "coag/rng.hpp"
#include "coag/simulator.hpp"

namespace coag {

void StreamingMoments::push(double x) {
  const double n1 = static_cast<double>(n_);
  n_ += 1;
  const double n = static_cast<double>(n_);
  const double delta = x - mean_;
  const double dn = delta / n;
  const double dn2 = dn * dn;
  const double term1 = delta * dn * n1;
  mean_ += dn;
  m4_ += term1 * dn2 * (n * n - 3.0 * n + 3.0) + 6.0 * dn2 * m2_ - 4.0 * dn * m3_;
  m3_ += term1 * dn * (n - 2.0) - 3.0 * dn * m2_;
  m2_ += term1;
}

void StreamingMoments::merge(const StreamingMoments& other) {
  if (other.n_ == 0) return;
  if (n_ == 0) {
    *this = other;
    return;
  }
  const double na = static_cast<double>(n_);
  const double nb = static_cast<double>(other.n_);
  const double n = na + nb;
  const double d = other.mean_ - mean_;
  const double d2 = d * d;
  const double m2 = m2_ + other.m2_ + d2 * na * nb / n;
  const double m3 = m3_ + other.m3_ + d2 * d * na * nb * (na - nb) / (n * n) +
                    3.0 * d * (na * other.m2_ - nb * m2_) / n;
  const double m4 = m4_ + other.m4_ +
                    d2 * d2 * na * nb * (na * na - na * nb + nb * nb) / (n * n * n) +
                    6.0 * d2 * (na * na * other.m2_ + nb * nb * m2_) / (n * n) +
                    4.0 * d * (na * other.m3_ - nb * m3_) / n;
  mean_ += nb * d / n;
  m2_ = m2;
  m3_ = m3;
  m4_ = m4;
  n_ += other.n_;
}

double StreamingMoments::variance() const {
  return n_ < 2 ? 0.0 : m2_ / static_cast<double>(n_ - 1);
}

double StreamingMoments::mean_se() const {
  return n_ < 1 ? 0.0 : std::sqrt(variance() / static_cast<double>(n_));
}

double StreamingMoments::skewness() const {
  if (n_ < 2 || m2_ <= 0.0) return 0.0;
  const double n = static_cast<double>(n_);
  return std::sqrt(n) * m3_ / std::pow(m2_, 1.5);
}

double StreamingMoments::excess_kurtosis() const {
  if (n_ < 2 || m2_ <= 0.0) return 0.0;
  const double n = static_cast<double>(n_);
  return n * m4_ / (m2_ * m2_) - 3.0;
}

StreamingVector::StreamingVector(Eigen::Index dim)
    : mean_(Eigen::VectorXd::Zero(dim)), com_(Eigen::MatrixXd::Zero(dim, dim)) {}

void StreamingVector::push(const Eigen::VectorXd& x) {
  if (n_ == 0 && mean_.size() == 0) {
    mean_ = Eigen::VectorXd::Zero(x.size());
    com_ = Eigen::MatrixXd::Zero(x.size(), x.size());
  }
  if (x.size() != mean_.size()) throw std::invalid_argument("StreamingVector: dimension mismatch");
  n_ += 1;
  const Eigen::VectorXd d = x - mean_;
  mean_ += d / static_cast<double>(n_);
  com_ += d * (x - mean_).transpose();
}

void StreamingVector::merge(const StreamingVector& other) {
  if (other.n_ == 0) return;
  if (n_ == 0) {
    *this = other;
    return;
  }
  if (other.mean_.size() != mean_.size())
    throw std::invalid_argument("StreamingVector: dimension mismatch");
  const double na = static_cast<double>(n_);
  const double nb = static_cast<double>(other.n_);
  const double n = na + nb;
  const Eigen::VectorXd d = other.mean_ - mean_;
  com_ += other.com_ + (na * nb / n) * (d * d.transpose());
  mean_ += (nb / n) * d;
  n_ += other.n_;
}

Eigen::MatrixXd StreamingVector::covariance() const {
  if (n_ < 2) return Eigen::MatrixXd::Zero(mean_.size(), mean_.size());
  return (com_ + com_.transpose()) / (2.0 * static_cast<double>(n_ - 1));
}

std::string FunctionalSpec::name() const {
  if (!label.empty()) return label;
  char buf[64];
  std::string base;
  switch (kind) {
    case FunctionalKind::Power:
      std::snprintf(buf, sizeof buf, "pow%g", exponent);
      base = buf;
      break;
    case FunctionalKind::Indicator:
      base = "ind" + std::to_string(bin);
      break;
    case FunctionalKind::MassConserved:
      base = "mass";
      break;
    case FunctionalKind::Tabulated:
      base = "tab";
      break;
  }
  if (tensor_power > 1) base += "_m" + std::to_string(tensor_power);
  return base;
}

GridFunction functional_profile(const FunctionalSpec& f, const Grid& grid) {
  switch (f.kind) {
    case FunctionalKind::Power:
      return power_function(grid, f.exponent);
    case FunctionalKind::Indicator:
      if (f.bin < 1 || f.bin > grid.nbins)
        throw std::invalid_argument("functional_profile: indicator bin outside the grid");
      return indicator_function(grid, f.bin);
    case FunctionalKind::MassConserved:
      return mass_function(grid);
    case FunctionalKind::Tabulated:
      if (f.values.size() != grid.nbins)
        throw std::invalid_argument("functional_profile: tabulated values size != grid");
      return tabulated_function(grid, f.values);
  }
  throw std::logic_error("functional_profile: unknown kind");
}

namespace {

double int_power(double base, int m) {
  double out = base;
  for (int i = 1; i < m; ++i) out *= base;
  return out;
}

double read_raw(const GridFunction& profile, bool conserved, int m, const GridMeasure& state) {
  const double base =
      conserved ? moment(state, 1.0) + state.overflow : pair(profile, state);
  return int_power(base, m);
}

double read_fluct(const GridFunction& profile, bool conserved, const GridMeasure& field) {
  return conserved ? moment(field, 1.0) + field.overflow : pair(profile, field);
}

void validate_config(const EnsembleConfig& cfg) {
  validate(cfg.kernel);
  if (cfg.grid.nbins < 1) throw std::invalid_argument("ensemble: empty grid");
  if (!(cfg.grid.delta > 0.0)) throw std::invalid_argument("ensemble: nonpositive bin width");
  if (!(cfg.h > 0.0)) throw std::invalid_argument("ensemble: h must be positive");
  if (!(cfg.dt > 0.0)) throw std::invalid_argument("ensemble: dt must be positive");
  if (cfg.replicas < 1) throw std::invalid_argument("ensemble: need at least one replica");
  if (cfg.times.empty()) throw std::invalid_argument("ensemble: no observation times");
  for (std::size_t i = 0; i < cfg.times.size(); ++i) {
    if (cfg.times[i] < 0.0 || (i > 0 && cfg.times[i] < cfg.times[i - 1]))
      throw std::invalid_argument("ensemble: times must be nondecreasing and nonnegative");
  }
  if (cfg.sobolev_k != 0.0 && cfg.sobolev_k <= 0.5)
    throw std::invalid_argument("ensemble: the dual-norm weight needs k > 1/2");
}

}  // namespace

double evaluate_raw(const FunctionalSpec& f, const GridMeasure& state) {
  if (f.tensor_power < 1) throw std::invalid_argument("evaluate_raw: tensor power must be >= 1");
  if (f.kind == FunctionalKind::MassConserved)
    return int_power(moment(state, 1.0) + state.overflow, f.tensor_power);
  return read_raw(functional_profile(f, state.grid), false, f.tensor_power, state);
}

double evaluate_fluct(const FunctionalSpec& f, const GridMeasure& field) {
  if (f.kind == FunctionalKind::MassConserved) return moment(field, 1.0) + field.overflow;
  return read_fluct(functional_profile(f, field.grid), false, field);
}

void EnsembleStats::merge(const EnsembleStats& other) {
  if (raw.size() != other.raw.size() || fluct.size() != other.fluct.size() ||
      sobolev.size() != other.sobolev.size() || times != other.times ||
      retained.size() != other.retained.size())
    throw std::invalid_argument("EnsembleStats::merge: shape mismatch");
  replicas += other.replicas;
  for (std::size_t i = 0; i < raw.size(); ++i) raw[i].merge(other.raw[i]);
  for (std::size_t i = 0; i < fluct.size(); ++i) fluct[i].merge(other.fluct[i]);
  for (std::size_t i = 0; i < sobolev.size(); ++i) sobolev[i].merge(other.sobolev[i]);
  joint.merge(other.joint);
  for (std::size_t i = 0; i < retained.size(); ++i)
    retained[i].insert(retained[i].end(), other.retained[i].begin(), other.retained[i].end());
  merge_history.insert(merge_history.end(), other.merge_history.begin(),
                       other.merge_history.end());
}

EnsembleStats run_ensemble(const EnsembleConfig& cfg) {
  validate_config(cfg);
  for (const FunctionalSpec& f : cfg.functionals) {
    if (f.tensor_power < 1)
      throw std::invalid_argument("ensemble: tensor power must be >= 1");
    functional_profile(f, cfg.grid);  // validates shape against the grid
  }

  const std::size_t T = cfg.times.size();
  const std::size_t F = cfg.functionals.size();
  const bool want_sobolev = cfg.sobolev_k > 0.5;

  const GridMeasure mu0 = monodisperse(cfg.grid, cfg.h);
  const KineticSolution kinetic = solve_kinetic(mu0, cfg.kernel, cfg.times, cfg.dt);
  std::vector<GridMeasure> mu_at;
  mu_at.reserve(T);
  for (const double t : cfg.times) mu_at.push_back(kinetic.at_time(t));

  std::vector<GridFunction> profiles;
  std::vector<bool> conserved;
  std::vector<int> powers;
  profiles.reserve(F);
  for (const FunctionalSpec& f : cfg.functionals) {
    profiles.push_back(functional_profile(f, cfg.grid));
    conserved.push_back(f.kind == FunctionalKind::MassConserved);
    powers.push_back(f.tensor_power);
  }

  // Per-channel kinetic baselines. Fluctuation readings are evaluated as
  // (base(Z) - base(mu)) / sqrt(h) rather than through the assembled field
  // so the subtrahend is one shared constant per channel: a conserved base
  // then keeps a degenerate channel degenerate to the bit.
  std::vector<double> raw_target(T * F), base_mu(T * F);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t f = 0; f < F; ++f) {
      raw_target[t * F + f] = read_raw(profiles[f], conserved[f], powers[f], mu_at[t]);
      base_mu[t * F + f] = read_raw(profiles[f], conserved[f], 1, mu_at[t]);
    }
  const double sqrt_h = std::sqrt(cfg.h);

  auto make_shaped = [&]() {
    EnsembleStats s;
    s.h = cfg.h;
    s.seed = cfg.seed;
    s.times = cfg.times;
    for (const FunctionalSpec& f : cfg.functionals) s.labels.push_back(f.name());
    s.raw.resize(T * F);
    s.fluct.resize(T * F);
    if (want_sobolev) s.sobolev.resize(T);
    s.joint = StreamingVector(static_cast<Eigen::Index>(T * F));
    s.raw_target = raw_target;
    if (cfg.retain_raw) s.retained.resize(T * F);
    return s;
  };

  constexpr long long kBlock = 256;  // fixed block size keeps merges thread-count-free
  const long long nblocks = (cfg.replicas + kBlock - 1) / kBlock;

  auto run_block = [&](long long b) {
    EnsembleStats local = make_shaped();
    const long long lo = b * kBlock;
    const long long hi = std::min(cfg.replicas, lo + kBlock);
    Eigen::VectorXd jvec(static_cast<Eigen::Index>(T * F));
    for (long long r = lo; r < hi; ++r) {
      RngStream rng = RngStream::for_replica(cfg.seed, static_cast<std::uint64_t>(r));
      ParticleState state = ParticleState::monodisperse(cfg.grid, cfg.h, cfg.kernel);
      const PathResult path = simulate_path(state, cfg.times, rng);
      for (std::size_t t = 0; t < T; ++t) {
        const GridMeasure& emp = path.snapshots[t];
        for (std::size_t f = 0; f < F; ++f) {
          const std::size_t ch = t * F + f;
          local.raw[ch].push(read_raw(profiles[f], conserved[f], powers[f], emp));
          const double fv =
              (read_raw(profiles[f], conserved[f], 1, emp) - base_mu[ch]) / sqrt_h;
          local.fluct[ch].push(fv);
          jvec[static_cast<Eigen::Index>(ch)] = fv;
          if (cfg.retain_raw) local.retained[ch].push_back(fv);
        }
        if (want_sobolev) {
          const GridMeasure field = fluctuation_field(emp, mu_at[t], cfg.h);
          const double nn = dual_norm_sobolev(field, cfg.sobolev_k, cfg.sobolev_quad);
          local.sobolev[t].push(nn * nn);
        }
      }
      local.joint.push(jvec);
      local.replicas += 1;
    }
    local.merge_history.push_back(hi - lo);
    return local;
  };

  std::vector<EnsembleStats> parts(static_cast<std::size_t>(nblocks));
  const int tcount = std::max(1, cfg.threads);
  if (tcount == 1 || nblocks == 1) {
    for (long long b = 0; b < nblocks; ++b) parts[static_cast<std::size_t>(b)] = run_block(b);
  } else {
    std::atomic<long long> next{0};
    auto worker = [&]() {
      for (;;) {
        const long long b = next.fetch_add(1);
        if (b >= nblocks) return;
        parts[static_cast<std::size_t>(b)] = run_block(b);
      }
    };
    std::vector<std::thread> pool;
    const int spawn = static_cast<int>(std::min<long long>(tcount, nblocks));
    pool.reserve(static_cast<std::size_t>(spawn));
    for (int i = 0; i < spawn; ++i) pool.emplace_back(worker);
    for (std::thread& th : pool) th.join();
  }

  EnsembleStats total = std::move(parts[0]);
  for (std::size_t b = 1; b < parts.size(); ++b) total.merge(parts[b]);
  return total;
}

LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw std::invalid_argument("linear_fit: size mismatch");
  const std::size_t n = x.size();
  if (n < 3) throw std::invalid_argument("linear_fit: need at least 3 points");
  double xbar = 0.0, ybar = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    xbar += x[i];
    ybar += y[i];
  }
  xbar /= static_cast<double>(n);
  ybar /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - xbar) * (x[i] - xbar);
    sxy += (x[i] - xbar) * (y[i] - ybar);
    syy += (y[i] - ybar) * (y[i] - ybar);
  }
  if (sxx <= 0.0) throw std::invalid_argument("linear_fit: degenerate abscissae");
  LinearFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = ybar - fit.slope * xbar;
  double ssr = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - (fit.intercept + fit.slope * x[i]);
    ssr += r * r;
  }
  fit.slope_se = std::sqrt(ssr / static_cast<double>(n - 2) / sxx);
  fit.r2 = syy > 0.0 ? 1.0 - ssr / syy : 1.0;
  return fit;
}

RateFit fit_rate(const std::vector<double>& abscissae, const std::vector<double>& ordinates,
                 const std::vector<double>& noise) {
  if (abscissae.size() != ordinates.size() ||
      (!noise.empty() && noise.size() != ordinates.size()))
    throw std::invalid_argument("fit_rate: size mismatch");
  if (abscissae.size() < 3) throw std::invalid_argument("fit_rate: need at least 3 points");
  for (const double a : abscissae)
    if (!(a > 0.0)) throw std::invalid_argument("fit_rate: abscissae must be positive");

  RateFit fit;
  fit.abscissae = abscissae;
  fit.ordinates = ordinates;
  fit.noise = noise;
  for (std::size_t i = 0; i < ordinates.size(); ++i) {
    if (!(ordinates[i] > 0.0)) {
      fit.rejected = true;
      fit.note = "error indistinguishable from zero";
      return fit;
    }
    if (!noise.empty() && noise[i] > ordinates[i]) {
      fit.rejected = true;
      fit.note = "Monte Carlo noise exceeds the signal";
      return fit;
    }
  }
  std::vector<double> lx(abscissae.size()), ly(ordinates.size());
  for (std::size_t i = 0; i < abscissae.size(); ++i) {
    lx[i] = std::log(abscissae[i]);
    ly[i] = std::log(ordinates[i]);
  }
  const LinearFit lf = linear_fit(lx, ly);
  fit.slope = lf.slope;
  fit.slope_se = lf.slope_se;
  fit.r2 = lf.r2;
  return fit;
}

namespace {

void validate_ladder(const std::vector<double>& ladder, std::size_t min_rungs,
                     const char* what) {
  if (ladder.size() < min_rungs)
    throw std::invalid_argument(std::string(what) + ": ladder too short");
  for (std::size_t i = 0; i < ladder.size(); ++i) {
    if (!(ladder[i] > 0.0))
      throw std::invalid_argument(std::string(what) + ": ladder values must be positive");
    for (std::size_t j = i + 1; j < ladder.size(); ++j)
      if (ladder[i] == ladder[j])
        throw std::invalid_argument(std::string(what) + ": ladder values must be distinct");
  }
}

RateFit ladder_rate(const EnsembleConfig& proto, const std::vector<double>& ladder,
                    bool against_target, const char* what) {
  validate_ladder(ladder, 4, what);
  if (proto.functionals.size() != 1)
    throw std::invalid_argument(std::string(what) + ": track exactly one functional");
  std::vector<double> errs, noise;
  errs.reserve(ladder.size());
  noise.reserve(ladder.size());
  for (std::size_t i = 0; i < ladder.size(); ++i) {
    EnsembleConfig cfg = proto;
    cfg.h = ladder[i];
    cfg.seed = stream_seed(proto.seed, static_cast<std::uint64_t>(i + 1));
    const EnsembleStats stats = run_ensemble(cfg);
    double best = -1.0, best_se = 0.0;
    for (std::size_t ch = 0; ch < stats.fluct.size(); ++ch) {
      const StreamingMoments& m = against_target ? stats.raw[ch] : stats.fluct[ch];
      const double target = against_target ? stats.raw_target[ch] : 0.0;
      const double err = std::abs(m.mean() - target);
      if (err > best) {
        best = err;
        best_se = m.mean_se();
      }
    }
    errs.push_back(best);
    noise.push_back(best_se);
  }
  return fit_rate(ladder, errs, noise);
}

}  // namespace

RateFit lln_rate(const EnsembleConfig& proto, const std::vector<double>& ladder) {
  return ladder_rate(proto, ladder, true, "lln_rate");
}

RateFit clt_rate(const EnsembleConfig& proto, const std::vector<double>& ladder) {
  return ladder_rate(proto, ladder, false, "clt_rate");
}

namespace {

double gaussian_cdf(double x, double sigma) {
  return 0.5 * std::erfc(-x / (sigma * std::sqrt(2.0)));
}

}  // namespace

GaussianityReport clt_gaussianity(const EnsembleConfig& proto, const FunctionalSpec& phi,
                                  double t) {
  EnsembleConfig cfg = proto;
  cfg.times = {t};
  cfg.functionals = {phi};
  cfg.retain_raw = true;
  const EnsembleStats stats = run_ensemble(cfg);

  const GridMeasure mu0 = monodisperse(cfg.grid, cfg.h);
  const KineticSolution kinetic = solve_kinetic(mu0, cfg.kernel, {t}, cfg.dt);
  const GridFunction profile = functional_profile(phi, cfg.grid);

  GaussianityReport rep;
  rep.h = cfg.h;
  rep.replicas = stats.replicas;
  rep.time = t;
  rep.label = phi.name();
  rep.predicted_variance = ou_variance(profile, t, cfg.kernel, kinetic);

  const StreamingMoments& ch = stats.fluct[0];
  rep.sample_variance = ch.variance();
  rep.degenerate = rep.predicted_variance == 0.0;
  rep.variance_ratio =
      rep.degenerate
          ? (rep.sample_variance == 0.0 ? 1.0 : std::numeric_limits<double>::infinity())
          : rep.sample_variance / rep.predicted_variance;
  rep.skewness = ch.skewness();
  rep.excess_kurtosis = ch.excess_kurtosis();

  rep.ks_ref = 1.36 / std::sqrt(static_cast<double>(stats.replicas));
  if (!rep.degenerate) {
    std::vector<double> xs = stats.retained[0];
    std::sort(xs.begin(), xs.end());
    const double sigma = std::sqrt(rep.predicted_variance);
    const double n = static_cast<double>(xs.size());
    double d = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const double c = gaussian_cdf(xs[i], sigma);
      d = std::max(d, std::max((static_cast<double>(i) + 1.0) / n - c,
                               c - static_cast<double>(i) / n));
    }
    rep.ks_distance = d;
  }

  rep.pass_variance = std::abs(rep.variance_ratio - 1.0) <= rep.tol_variance_ratio;
  rep.pass_skewness = std::abs(rep.skewness) <= rep.tol_skewness;
  rep.pass_kurtosis = std::abs(rep.excess_kurtosis) <= rep.tol_kurtosis;
  rep.pass = rep.pass_variance && rep.pass_skewness && rep.pass_kurtosis;
  return rep;
}

CovTestReport finite_dim_cov_test(const EnsembleConfig& proto, const std::vector<double>& times,
                                  const std::vector<FunctionalSpec>& phis) {
  if (times.empty() || times.size() != phis.size())
    throw std::invalid_argument("finite_dim_cov_test: need matching times and functionals");
  EnsembleConfig cfg = proto;
  cfg.times = times;
  cfg.functionals = phis;
  cfg.retain_raw = true;
  const EnsembleStats stats = run_ensemble(cfg);

  const auto n = static_cast<Eigen::Index>(times.size());
  const std::size_t F = phis.size();

  const GridMeasure mu0 = monodisperse(cfg.grid, cfg.h);
  const KineticSolution kinetic = solve_kinetic(mu0, cfg.kernel, times, cfg.dt);
  std::vector<GridFunction> profiles;
  profiles.reserve(phis.size());
  for (const FunctionalSpec& f : phis) profiles.push_back(functional_profile(f, cfg.grid));
  const OUCovariance pred =
      ou_covariance(times, profiles, zero_measure(cfg.grid), cfg.kernel, kinetic);

  CovTestReport rep;
  rep.h = cfg.h;
  rep.replicas = stats.replicas;
  rep.times = times;
  for (const FunctionalSpec& f : phis) rep.labels.push_back(f.name());
  rep.predicted = pred.sigma;
  rep.mean_predicted = pred.mean;

  const Eigen::MatrixXd full = stats.joint.covariance();
  rep.sample.resize(n, n);
  rep.mean_sample.resize(n);
  for (Eigen::Index l = 0; l < n; ++l) {
    const auto il = static_cast<Eigen::Index>(static_cast<std::size_t>(l) * F) + l;
    rep.mean_sample[l] = stats.fluct[static_cast<std::size_t>(il)].mean();
    for (Eigen::Index k = 0; k < n; ++k) {
      const auto ik = static_cast<Eigen::Index>(static_cast<std::size_t>(k) * F) + k;
      rep.sample(l, k) = full(il, ik);
    }
  }

  const double r = static_cast<double>(stats.replicas);
  rep.zscores.resize(n, n);
  rep.max_abs_z = 0.0;
  for (Eigen::Index l = 0; l < n; ++l) {
    for (Eigen::Index k = 0; k < n; ++k) {
      const double se = std::sqrt(
          (rep.sample(l, l) * rep.sample(k, k) + rep.sample(l, k) * rep.sample(l, k)) /
          std::max(1.0, r - 1.0));
      const double gap = rep.sample(l, k) - rep.predicted(l, k);
      rep.zscores(l, k) = se > 0.0 ? gap / se
                                   : (gap == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
      rep.max_abs_z = std::max(rep.max_abs_z, std::abs(rep.zscores(l, k)));
    }
  }
  rep.pass = rep.max_abs_z <= 1.96;

  // characteristic functions on a small grid of frequency vectors
  std::vector<Eigen::VectorXd> ps;
  for (const double s : {0.5, 1.0}) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const double sd = std::sqrt(std::max(rep.predicted(j, j), 0.0));
      if (sd <= 0.0) continue;
      Eigen::VectorXd p = Eigen::VectorXd::Zero(n);
      p[j] = s / sd;
      ps.push_back(p);
    }
    Eigen::VectorXd p = Eigen::VectorXd::Zero(n);
    bool ok = true;
    for (Eigen::Index j = 0; j < n; ++j) {
      const double sd = std::sqrt(std::max(rep.predicted(j, j), 0.0));
      if (sd <= 0.0) {
        ok = false;
        break;
      }
      p[j] = s / (sd * std::sqrt(static_cast<double>(n)));
    }
    if (ok && n > 1) ps.push_back(p);
  }
  rep.ecf_ref = 3.0 / std::sqrt(r);
  for (const Eigen::VectorXd& p : ps) {
    std::complex<double> acc{0.0, 0.0};
    const auto nrep = static_cast<std::size_t>(stats.replicas);
    for (std::size_t rr = 0; rr < nrep; ++rr) {
      double phase = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        const auto ch = static_cast<std::size_t>(j) * F + static_cast<std::size_t>(j);
        phase += p[j] * stats.retained[ch][rr];
      }
      acc += std::complex<double>(std::cos(phase), std::sin(phase));
    }
    acc /= static_cast<double>(stats.replicas);
    rep.ecf_max_diff = std::max(rep.ecf_max_diff, std::abs(acc - char_fn(pred, p)));
  }
  return rep;
}

TrendReport second_moment_diagnostic(const EnsembleConfig& proto,
                                     const std::vector<double>& ladder, double k) {
  if (!(k > 0.5))
    throw std::invalid_argument("second_moment_diagnostic: the dual norm needs k > 1/2");
  validate_ladder(ladder, 3, "second_moment_diagnostic");

  TrendReport rep;
  rep.hs = ladder;
  rep.all_finite = true;
  std::vector<double> xs;
  for (std::size_t i = 0; i < ladder.size(); ++i) {
    EnsembleConfig cfg = proto;
    cfg.h = ladder[i];
    cfg.sobolev_k = k;
    cfg.seed = stream_seed(proto.seed, static_cast<std::uint64_t>(i + 1));
    const EnsembleStats stats = run_ensemble(cfg);
    double best = -1.0, best_se = 0.0;
    for (const StreamingMoments& m : stats.sobolev) {
      if (m.mean() > best) {
        best = m.mean();
        best_se = m.mean_se();
      }
    }
    rep.values.push_back(best);
    rep.value_se.push_back(best_se);
    rep.all_finite = rep.all_finite && std::isfinite(best);
    xs.push_back(std::log(1.0 / ladder[i]));
  }
  const LinearFit lf = linear_fit(xs, rep.values);
  rep.slope = lf.slope;
  rep.slope_se = lf.slope_se;
  rep.pass = rep.all_finite &&
             (lf.slope_se > 0.0 ? lf.slope <= 1.645 * lf.slope_se : lf.slope <= 0.0);
  return rep;
}

}  // namespace coag
