#include "coag/fluctuation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace coag {

GridMeasure fluctuation_field(const GridMeasure& z, const GridMeasure& mu, double h) {
  if (!(z.grid == mu.grid)) throw std::invalid_argument("fluctuation_field: grid mismatch");
  if (!(h > 0.0)) throw std::invalid_argument("fluctuation_field: h must be positive");
  const double scale = 1.0 / std::sqrt(h);
  return scale * (z - mu);
}

double pi_form(const GridMeasure& mu, const GridFunction& phi, const GridFunction& psi,
               const Eigen::MatrixXd& table) {
  if (!(mu.grid == phi.grid) || !(mu.grid == psi.grid))
    throw std::invalid_argument("pi_form: grid mismatch");
  const int N = mu.grid.nbins;
  if (table.rows() != N || table.cols() != N)
    throw std::invalid_argument("pi_form: kernel table size != grid");
  const Eigen::ArrayXd pe = extended_values(phi);
  const Eigen::ArrayXd se = extended_values(psi);
  double acc = 0.0;
  for (int x = 1; x <= N; ++x) {
    const double mx = mu.w[x - 1];
    if (mx == 0.0) continue;
    acc += mx * ((pe.segment(x, N) - phi.v[x - 1] - phi.v) *
                 (se.segment(x, N) - psi.v[x - 1] - psi.v) * table.col(x - 1).array() * mu.w)
                    .sum();
  }
  return 0.25 * acc;
}

double pi_form(const GridMeasure& mu, const GridFunction& phi, const GridFunction& psi,
               const KernelSpec& spec) {
  return pi_form(mu, phi, psi, kernel_table(spec, mu.grid));
}

double ou_variance(const GridFunction& phi, double t, const KernelSpec& spec,
                   const KineticSolution& kinetic) {
  const PropagatorField u = solve_backward(phi, t, spec, kinetic);
  const std::size_t M = u.values.size() - 1;
  if (M == 0) return 0.0;
  const Eigen::MatrixXd table = kernel_table(spec, kinetic.grid());
  double acc = 0.0;
  for (std::size_t i = 0; i <= M; ++i) {
    const double w = (i == 0 || i == M) ? 0.5 : 1.0;
    acc += w * pi_form(kinetic.state(2 * i), u.values[i], u.values[i], table);
  }
  return 2.0 * kinetic.dt() * acc;
}

OUCovariance ou_covariance(const std::vector<double>& times,
                           const std::vector<GridFunction>& phis, const GridMeasure& f0,
                           const KernelSpec& spec, const KineticSolution& kinetic) {
  if (times.empty()) throw std::invalid_argument("ou_covariance: no observation times");
  if (times.size() != phis.size())
    throw std::invalid_argument("ou_covariance: times and functionals differ in number");
  if (!(f0.grid == kinetic.grid()))
    throw std::invalid_argument("ou_covariance: initial deviation grid mismatch");
  const auto n = times.size();
  const Eigen::MatrixXd table = kernel_table(spec, kinetic.grid());
  const double dt = kinetic.dt();

  std::vector<PropagatorField> fields;
  fields.reserve(n);
  for (std::size_t j = 0; j < n; ++j)
    fields.push_back(solve_backward(phis[j], times[j], spec, kinetic));

  OUCovariance cov;
  cov.times = times;
  cov.mean.resize(static_cast<Eigen::Index>(n));
  cov.sigma.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t j = 0; j < n; ++j)
    cov.mean[static_cast<Eigen::Index>(j)] = pair(fields[j].values[0], f0);

  for (std::size_t l = 0; l < n; ++l) {
    for (std::size_t k = l; k < n; ++k) {
      const std::size_t M =
          std::min(fields[l].values.size(), fields[k].values.size()) - 1;
      double acc = 0.0;
      if (M > 0) {
        for (std::size_t i = 0; i <= M; ++i) {
          const double w = (i == 0 || i == M) ? 0.5 : 1.0;
          acc += w * pi_form(kinetic.state(2 * i), fields[l].values[i],
                             fields[k].values[i], table);
        }
      }
      const double s = (M > 0) ? 2.0 * dt * acc : 0.0;
      cov.sigma(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(k)) = s;
      cov.sigma(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(l)) = s;
    }
  }
  return cov;
}

std::complex<double> char_fn(const OUCovariance& cov, const Eigen::VectorXd& p) {
  if (p.size() != cov.mean.size()) throw std::invalid_argument("char_fn: dimension mismatch");
  const double phase = p.dot(cov.mean);
  const double quad = p.dot(cov.sigma * p);
  const double amp = std::exp(-0.5 * quad);
  return {amp * std::cos(phase), amp * std::sin(phase)};
}

}  // namespace coag
