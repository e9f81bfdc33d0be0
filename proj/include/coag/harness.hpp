#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "coag/fluctuation.hpp"
#include "coag/kernel.hpp"
#include "coag/kinetic.hpp"
#include "coag/measure.hpp"

namespace coag {

// One-pass accumulator of the first four central moments. Merging partial
// accumulators is exact in distribution and stable in the usual pairwise
// sense; merge order perturbs results only at roundoff.
class StreamingMoments {
 public:
  void push(double x);
  void merge(const StreamingMoments& other);

  long long count() const { return n_; }
  double mean() const { return mean_; }
  double m2() const { return m2_; }
  double m3() const { return m3_; }
  double m4() const { return m4_; }
  double variance() const;         // unbiased; 0 below two samples
  double mean_se() const;          // standard error of the mean
  double skewness() const;         // 0 when the spread is exactly zero
  double excess_kurtosis() const;  // 0 when the spread is exactly zero

 private:
  long long n_ = 0;
  double mean_ = 0.0, m2_ = 0.0, m3_ = 0.0, m4_ = 0.0;
};

// Joint accumulator: mean vector and comoment matrix of a fixed-size sample
// vector, mergeable like StreamingMoments.
class StreamingVector {
 public:
  StreamingVector() = default;
  explicit StreamingVector(Eigen::Index dim);

  void push(const Eigen::VectorXd& x);
  void merge(const StreamingVector& other);

  long long count() const { return n_; }
  Eigen::Index dim() const { return mean_.size(); }
  const Eigen::VectorXd& mean() const { return mean_; }
  Eigen::MatrixXd covariance() const;  // unbiased; zero below two samples

 private:
  long long n_ = 0;
  Eigen::VectorXd mean_;
  Eigen::MatrixXd com_;
};

enum class FunctionalKind { Power, Indicator, MassConserved, Tabulated };

// A tracked scalar functional of a measure. The profile g is paired with the
// state and raised to tensor_power for the raw reading (g, nu)^m; the
// fluctuation reading is always the linear pairing. MassConserved reads the
// grid mass plus the overflow channel — the conserved number whose
// fluctuation channel is degenerate.
struct FunctionalSpec {
  FunctionalKind kind = FunctionalKind::Power;
  double exponent = 1.0;    // Power
  int bin = 1;              // Indicator
  Eigen::ArrayXd values;    // Tabulated
  int tensor_power = 1;
  std::string label;

  std::string name() const;  // label when set, else a generated one
};

GridFunction functional_profile(const FunctionalSpec& f, const Grid& grid);
double evaluate_raw(const FunctionalSpec& f, const GridMeasure& state);
double evaluate_fluct(const FunctionalSpec& f, const GridMeasure& field);

struct EnsembleConfig {
  Grid grid;
  KernelSpec kernel;
  double h = 0.01;
  double dt = 1e-3;                       // kinetic mesh for targets and fields
  std::vector<double> times;              // nondecreasing observation times
  std::vector<FunctionalSpec> functionals;
  long long replicas = 1;
  std::uint64_t seed = 1;
  int threads = 1;                        // worker threads; results identical for any value
  double sobolev_k = 0.0;                 // > 1/2 switches on the dual-norm channel
  int sobolev_quad = 6;
  bool retain_raw = false;                // keep per-replica fluctuation values
};

// Ensemble aggregate. Channel layout: index t*F + f for time index t and
// functional index f. Raw channels carry (g, Z^h_t)^m, fluctuation channels
// the linear (phi, F^h_t); the optional sobolev channels (one per time)
// carry the squared dual norm of F^h_t.
struct EnsembleStats {
  double h = 0.0;
  std::uint64_t seed = 0;
  long long replicas = 0;
  std::vector<double> times;
  std::vector<std::string> labels;

  std::vector<StreamingMoments> raw;
  std::vector<StreamingMoments> fluct;
  std::vector<StreamingMoments> sobolev;
  StreamingVector joint;                       // all fluctuation channels jointly
  std::vector<double> raw_target;              // (g, mu_t)^m per channel
  std::vector<std::vector<double>> retained;   // per fluctuation channel
  std::vector<long long> merge_history;

  void merge(const EnsembleStats& other);
};

// Runs R independent replicas (seeds derived from (seed, replica index)),
// snapshots each at the observation times, and streams every channel.
// Replicas are processed in fixed-size blocks merged in block order, so the
// aggregate is identical for any thread count.
EnsembleStats run_ensemble(const EnsembleConfig& cfg);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_se = 0.0;
  double r2 = 0.0;
};

// Ordinary least squares of y against x (>= 3 points).
LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y);

struct RateFit {
  std::vector<double> abscissae;  // ladder values (h)
  std::vector<double> ordinates;  // observed errors
  std::vector<double> noise;      // Monte Carlo standard error per point
  double slope = 0.0;
  double slope_se = 0.0;
  double r2 = 0.0;
  bool rejected = false;          // noise drowned the signal; slope not trusted
  std::string note;
};

// log-log fit of ordinates against abscissae with a noise gate: any point
// whose noise exceeds its value (or whose value is nonpositive) rejects
// the fit.
RateFit fit_rate(const std::vector<double>& abscissae, const std::vector<double>& ordinates,
                 const std::vector<double>& noise);

// Error-vs-h ladders. The prototype config supplies everything but h; each
// rung runs its own ensemble on a derived seed. Exactly one tracked
// functional is required. lln_rate reads the raw channels against the
// kinetic targets; clt_rate reads the fluctuation channels against zero.
// The per-rung error is the largest over the observation times.
RateFit lln_rate(const EnsembleConfig& proto, const std::vector<double>& ladder);
RateFit clt_rate(const EnsembleConfig& proto, const std::vector<double>& ladder);

struct GaussianityReport {
  double h = 0.0;
  long long replicas = 0;
  double time = 0.0;
  std::string label;
  double sample_variance = 0.0;
  double predicted_variance = 0.0;
  double variance_ratio = 0.0;  // 1 exactly for a degenerate channel
  double skewness = 0.0;
  double excess_kurtosis = 0.0;
  double ks_distance = 0.0;  // vs the centered Gaussian with the predicted variance
  double ks_ref = 0.0;       // 95% band of the distance under the null, ~1.36/sqrt(R)
  bool degenerate = false;
  bool pass_variance = false;
  bool pass_skewness = false;
  bool pass_kurtosis = false;
  bool pass = false;  // the three moment gates; the distance is reported only
  double tol_variance_ratio = 0.10;
  double tol_skewness = 0.10;
  double tol_kurtosis = 0.25;
};

// One-channel law check at a single time: sample moments of (phi, F^h_t)
// against the accumulated-noise prediction, plus the CDF distance.
GaussianityReport clt_gaussianity(const EnsembleConfig& proto, const FunctionalSpec& phi,
                                  double t);

struct CovTestReport {
  double h = 0.0;
  long long replicas = 0;
  std::vector<double> times;
  std::vector<std::string> labels;
  Eigen::VectorXd mean_sample;
  Eigen::VectorXd mean_predicted;
  Eigen::MatrixXd sample;
  Eigen::MatrixXd predicted;
  Eigen::MatrixXd zscores;  // (sample - predicted) / normal-theory se
  double max_abs_z = 0.0;
  bool pass = false;        // every entry inside its 95% interval
  double ecf_max_diff = 0.0;  // empirical vs predicted characteristic function
  double ecf_ref = 0.0;       // ~3/sqrt(R) Monte Carlo band
};

// Joint law of ((phi_1, F_{t_1}), ..., (phi_n, F_{t_n})): sample covariance
// against the predicted matrix entrywise, and the characteristic functions
// on a small p-grid.
CovTestReport finite_dim_cov_test(const EnsembleConfig& proto, const std::vector<double>& times,
                                  const std::vector<FunctionalSpec>& phis);

struct TrendReport {
  std::vector<double> hs;
  std::vector<double> values;    // sup over times of the mean squared dual norm
  std::vector<double> value_se;  // Monte Carlo error of each value
  double slope = 0.0;            // trend against log(1/h)
  double slope_se = 0.0;
  bool all_finite = false;
  bool pass = false;  // slope statistically compatible with <= 0 at 95%
};

// Boundedness probe of the fluctuation field in the dual Sobolev norm along
// an h-ladder: a significantly positive trend of sup_t E||F^h_t||^2 as h
// shrinks fails the check.
TrendReport second_moment_diagnostic(const EnsembleConfig& proto,
                                     const std::vector<double>& ladder, double k);

}  // namespace coag
