#include "coag/kinetic.hpp"

#include <cmath>
#include <stdexcept>

namespace coag {

namespace {

constexpr double kUndershootGuard = 1e-8;   // most negative weight tolerated per step
constexpr double kConservationGuard = 1e-6; // relative mass drift that aborts a solve

Eigen::ArrayXd grid_masses(const Grid& grid) {
  return Eigen::ArrayXd::LinSpaced(grid.nbins, 1.0, static_cast<double>(grid.nbins)) * grid.delta;
}

// dw/dof <- derivative at state w. Gain and overflow flux are accumulated in
// one triangular pass over unordered pairs; the loss term is the K*w matvec.
void rhs(const Eigen::MatrixXd& table, const Grid& grid, const Eigen::ArrayXd& w,
         Eigen::ArrayXd& dw, double& dof) {
  const int N = grid.nbins;
  const Eigen::VectorXd kw = table * w.matrix();
  dw = -(w * kw.array());
  dof = 0.0;
  for (int i = 1; i <= N; ++i) {
    const double wi = w[i - 1];
    if (wi == 0.0) continue;
    const int len = N - i + 1;  // j runs i..N; the table is symmetric so a
                                // column segment reads the row contiguously
    Eigen::ArrayXd prod =
        wi * (table.col(i - 1).segment(i - 1, len).array() * w.segment(i - 1, len));
    prod[0] *= 0.5;  // unordered pair i == j
    const int on_grid = std::max(0, N - 2 * i + 1);  // j <= N - i lands on the grid
    if (on_grid > 0) dw.segment(2 * i - 1, on_grid) += prod.head(on_grid);
    for (int m = on_grid; m < len; ++m) dof += prod[m] * grid.mass(2 * i + m);
  }
}

}  // namespace

GridMeasure coagulation_rhs(const GridMeasure& mu, const Eigen::MatrixXd& table) {
  if (table.rows() != mu.grid.nbins || table.cols() != mu.grid.nbins)
    throw std::invalid_argument("coagulation_rhs: table size != grid");
  GridMeasure out = zero_measure(mu.grid);
  double dof = 0.0;
  Eigen::ArrayXd dw(mu.grid.nbins);
  rhs(table, mu.grid, mu.w, dw, dof);
  out.w = dw;
  out.overflow = dof;
  return out;
}

GridMeasure coagulation_rhs(const GridMeasure& mu, const KernelSpec& spec) {
  return coagulation_rhs(mu, kernel_table(spec, mu.grid));
}

std::size_t KineticSolution::node_index(double t) const {
  if (!(dt_ > 0.0)) throw std::logic_error("node_index: empty solution");
  const double h2 = 0.5 * dt_;
  const auto i = static_cast<long long>(std::llround(t / h2));
  if (i < 0 || i >= static_cast<long long>(times_.size()) ||
      std::abs(t - static_cast<double>(i) * h2) > 1e-6 * dt_)
    throw std::invalid_argument("node_index: time not on the stored mesh");
  return static_cast<std::size_t>(i);
}

KineticSolution solve_kinetic(const GridMeasure& mu0, const KernelSpec& spec,
                              const std::vector<double>& times, double dt) {
  validate(spec);
  if (!(dt > 0.0)) throw std::invalid_argument("solve_kinetic: dt must be positive");
  if (times.empty()) throw std::invalid_argument("solve_kinetic: no output times");
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (times[i] < 0.0 || (i > 0 && times[i] < times[i - 1]))
      throw std::invalid_argument("solve_kinetic: times must be sorted and nonnegative");
  }
  if ((mu0.w < 0.0).any())
    throw std::invalid_argument("solve_kinetic: negative initial weights");

  const double h2 = 0.5 * dt;
  const double t_end = times.back();
  const auto steps = static_cast<long long>(std::llround(t_end / h2));
  if (std::abs(static_cast<double>(steps) * h2 - t_end) > 1e-6 * dt)
    throw std::invalid_argument("solve_kinetic: end time not on the half-step mesh");

  KineticSolution sol;
  sol.grid_ = mu0.grid;
  sol.spec_ = spec;
  sol.dt_ = dt;
  sol.requested_ = times;
  sol.initial_mass_ = moment(mu0, 1) + mu0.overflow;

  const Eigen::MatrixXd table = kernel_table(spec, mu0.grid);
  const Eigen::ArrayXd masses = grid_masses(mu0.grid);
  const double mass_denom = std::max(sol.initial_mass_, 1e-12);
  const int N = mu0.grid.nbins;

  Eigen::ArrayXd w = mu0.w;
  double of = mu0.overflow;
  sol.times_.reserve(static_cast<std::size_t>(steps) + 1);
  sol.states_.reserve(static_cast<std::size_t>(steps) + 1);
  sol.times_.push_back(0.0);
  sol.states_.push_back(mu0);

  Eigen::ArrayXd k1(N), k2(N), k3(N), k4(N), tmp(N);
  double o1 = 0, o2 = 0, o3 = 0, o4 = 0;
  for (long long s = 1; s <= steps; ++s) {
    rhs(table, mu0.grid, w, k1, o1);
    tmp = w + (0.5 * h2) * k1;
    rhs(table, mu0.grid, tmp, k2, o2);
    tmp = w + (0.5 * h2) * k2;
    rhs(table, mu0.grid, tmp, k3, o3);
    tmp = w + h2 * k3;
    rhs(table, mu0.grid, tmp, k4, o4);
    w += (h2 / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    of += (h2 / 6.0) * (o1 + 2.0 * o2 + 2.0 * o3 + o4);

    for (int i = 0; i < N; ++i) {
      if (w[i] < 0.0) {
        sol.min_weight_ = std::min(sol.min_weight_, w[i]);
        if (w[i] < -kUndershootGuard)
          throw std::runtime_error("solve_kinetic: step instability (weight undershoot)");
        sol.clipped_mass_ += -w[i] * masses[i];
        w[i] = 0.0;
      }
    }
    const double m = (masses * w).sum() + of;
    if (std::abs(m - sol.initial_mass_) > kConservationGuard * mass_denom)
      throw std::runtime_error("solve_kinetic: step instability (mass drift)");

    sol.times_.push_back(static_cast<double>(s) * h2);
    sol.states_.push_back({mu0.grid, w, of});
  }
  for (double t : times) (void)sol.node_index(t);  // every requested time is a node
  return sol;
}

double conservation_residual(const KineticSolution& sol) {
  if (sol.size() == 0) return 0.0;
  const Eigen::ArrayXd masses = grid_masses(sol.grid());
  const double denom = std::max(sol.initial_mass(), 1e-12);
  double worst = 0.0;
  for (std::size_t i = 0; i < sol.size(); ++i) {
    const GridMeasure& nu = sol.state(i);
    worst = std::max(worst, std::abs((masses * nu.w).sum() + nu.overflow - sol.initial_mass()));
  }
  return worst / denom;
}

GridMeasure constant_kernel_reference(const Grid& grid, double c, double a, double t) {
  if (!(c > 0.0) || !(a > 0.0) || t < 0.0)
    throw std::invalid_argument("constant_kernel_reference: need c > 0, a > 0, t >= 0");
  GridMeasure nu = zero_measure(grid);
  const double act = a * c * t;
  const double amp = a / ((1.0 + 0.5 * act) * (1.0 + 0.5 * act));
  const double q = act / (act + 2.0);
  double p = 1.0;
  for (int k = 1; k <= grid.nbins; ++k) {
    nu.w[k - 1] = amp * p;
    p *= q;
  }
  return nu;
}

double lipschitz_probe(const GridMeasure& mu0a, const GridMeasure& mu0b,
                       const KernelSpec& spec, double t, double dt,
                       const NormSelector& sel) {
  const double n0 = measure_norm(mu0a - mu0b, sel);
  if (n0 == 0.0) return 0.0;
  const std::vector<double> times = {t};
  const KineticSolution sa = solve_kinetic(mu0a, spec, times, dt);
  const KineticSolution sb = solve_kinetic(mu0b, spec, times, dt);
  return measure_norm(sa.at_time(t) - sb.at_time(t), sel) / n0;
}

}  // namespace coag
